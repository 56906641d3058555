#include <algorithm>
#include <cmath>
#include <random>

#ifdef RTEP_HAVE_OPENMP
#include <omp.h>
#endif

#include "rtep/verify.hpp"

namespace rtep {

std::vector<VecX> mcs_draw_samples(const UncertaintyBox& box, int n_samples,
                                   std::uint64_t seed) {
  // One engine, drawn in sample-major order; the mt19937_64 stream is
  // standardized, so the sample set is bit-reproducible everywhere.
  std::mt19937_64 rng(seed);
  auto uniform = [&rng]() { return (rng() >> 11) * 0x1.0p-53; };
  std::vector<VecX> draws;
  draws.reserve(n_samples);
  const int n = box.size();
  for (int s = 0; s < n_samples; ++s) {
    VecX xi(n);
    for (int k = 0; k < n; ++k) {
      const double w = box.xi_max[k] - box.xi_min[k];
      xi[k] = w == 0.0 ? box.xi_min[k] : box.xi_min[k] + w * uniform();
    }
    draws.push_back(std::move(xi));
  }
  return draws;
}

namespace {

McsSample evaluate_sample(const NetworkCase& c, const TepPlan& plan, const VecX& xi, int id,
                          const McsOptions& opts) {
  McsSample rec;
  rec.id = id;
  AcopfOptions ao = opts.acopf;
  ao.seed = opts.acopf.seed + static_cast<std::uint64_t>(id) * 7919u;
  AcopfSolution sol = acopf_solve(c, plan, xi, ao);
  rec.status = sol.status;
  if (sol.status == NlpStatus::Converged) {
    rec.objective_yr = sol.objective_yr;
    rec.max_violation = sol.max_violation;
    rec.cp_total = sol.total_cp_d() + sol.total_cp_r();
    rec.feasible = sol.max_violation <= opts.feas_tol;
    if (opts.strict && rec.cp_total > opts.strict_cp_allowance + opts.feas_tol)
      rec.feasible = false;
  }
  return rec;
}

}  // namespace

McsReport mcs_verify(const NetworkCase& c, const TepPlan& plan, const UncertaintyBox& box,
                     int n_samples, std::uint64_t seed, const McsOptions& opts) {
  McsReport rep;
  rep.n_samples = n_samples;
  rep.seed = seed;
  if (n_samples <= 0) {
    rep.fraction_defined = false;
    rep.robustness_fraction = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  rep.draws = mcs_draw_samples(box, n_samples, seed);
  rep.samples.resize(n_samples);

  const bool parallel = opts.mode == McsMode::Parallel;
#ifdef RTEP_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
#endif
  for (int s = 0; s < n_samples; ++s)
    rep.samples[s] = evaluate_sample(c, plan, rep.draws[s], s, opts);
  (void)parallel;

  for (const auto& rec : rep.samples) {
    if (rec.status == NlpStatus::Converged) {
      ++rep.converged;
      rep.worst_violation = std::max(rep.worst_violation, rec.max_violation);
    }
    if (rec.feasible)
      ++rep.feasible;
    else
      rep.failures.push_back(rec.id);
  }
  rep.fraction_defined = true;
  rep.robustness_fraction = static_cast<double>(rep.feasible) / n_samples;
  return rep;
}

}  // namespace rtep
