// Compares the OpenMP Monte-Carlo path against the serial reference on the
// bundled cases and checks that both produce identical reports.
#include <chrono>
#include <cstdio>
#include <string>

#include "rtep/benders.hpp"
#include "rtep/verify.hpp"

using namespace rtep;
using Clock = std::chrono::steady_clock;

namespace {

double run(const NetworkCase& cs, const TepPlan& plan, const UncertaintyBox& box,
           int samples, McsMode mode, McsReport& out) {
  McsOptions mo;
  mo.mode = mode;
  auto t0 = Clock::now();
  out = mcs_verify(cs, plan, box, samples, 42, mo);
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  std::string path = argc > 1 ? argv[1] : "cases/bus3.rtep";
  int samples = argc > 2 ? std::atoi(argv[2]) : 500;
  double ud = argc > 3 ? std::atof(argv[3]) : 10.0;

  NetworkCase cs = parse_case(path);
  UncertaintyBox box = build_uncertainty_box(cs, ud, 0.0);
  CompactRobustModel model = build_compact(cs, box);
  BendersOptions opts;
  BendersResult res = benders_solve(cs, box, opts);
  std::printf("plan: %s\n", plan_to_string(model, res.plan).c_str());

  McsReport serial, parallel;
  double ts = run(cs, res.plan, box, samples, McsMode::Serial, serial);
  double tp = run(cs, res.plan, box, samples, McsMode::Parallel, parallel);

  bool identical = serial.n_samples == parallel.n_samples &&
                   serial.feasible == parallel.feasible &&
                   serial.converged == parallel.converged;
  for (int i = 0; identical && i < serial.n_samples; ++i)
    identical = serial.samples[i].feasible == parallel.samples[i].feasible &&
                serial.samples[i].objective_yr == parallel.samples[i].objective_yr;

  std::printf("samples %d  fraction %.4f\n", samples, serial.robustness_fraction);
  std::printf("serial   %8.3f s  (%.1f samples/s)\n", ts, samples / ts);
  std::printf("parallel %8.3f s  (%.1f samples/s)  speedup %.2fx\n", tp, samples / tp,
              ts / tp);
  std::printf("reports identical: %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
