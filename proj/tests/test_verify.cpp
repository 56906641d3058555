#include <cmath>

#include "rtep/benders.hpp"
#include "rtep/verify.hpp"
#include "support.hpp"

using namespace rtep;

TEST_SUITE("verify") {

TEST_CASE("flat start converges on the 3-bus base case") {
  NetworkCase c = testing::load_bus3();
  CompactRobustModel m = build_compact(c, build_uncertainty_box(c, 0, 0));
  TepPlan plan = make_plan(m, {{{2, 3}, 1}});
  AcopfSolution s = acopf_solve(c, plan, VecX::Zero(m.n_xi()));
  REQUIRE(s.status == NlpStatus::Converged);
  CHECK(s.starts_used == 1);
  CHECK(s.max_violation <= 1e-6);
  CHECK(s.f[c.bus_index(c.angle_ref_bus)] == 0.0);
  for (int i = 0; i < c.n_buses(); ++i) {
    double v = std::hypot(s.e[i], s.f[i]);
    CHECK(v >= 0.95 - 1e-6);
    CHECK(v <= 1.05 + 1e-6);
  }
}

TEST_CASE("islanded load bus is fully curtailed") {
  NetworkCase c = testing::load_bus3();
  // Remove every circuit touching bus 3 and forbid rebuilding it.
  c.existing_lines.erase(
      std::remove_if(c.existing_lines.begin(), c.existing_lines.end(),
                     [](const ExistingCorridor& l) { return l.from == 3 || l.to == 3; }),
      c.existing_lines.end());
  c.candidate_corridors.erase(
      std::remove_if(c.candidate_corridors.begin(), c.candidate_corridors.end(),
                     [](const CandidateCorridor& l) { return l.from == 3 || l.to == 3; }),
      c.candidate_corridors.end());
  CompactRobustModel m = build_compact(c, build_uncertainty_box(c, 0, 0));
  TepPlan plan = make_plan(m, {});
  AcopfSolution s = acopf_solve(c, plan, VecX::Zero(m.n_xi()));
  REQUIRE(s.status == NlpStatus::Converged);
  int b3 = c.bus_index(3);
  CHECK(s.cp_d[b3] == doctest::Approx(c.buses[b3].p_load).epsilon(1e-6));
}

TEST_CASE("nonconvex TEP at fixed topology agrees with the relaxation (zero OG)") {
  NetworkCase c = testing::load_bus3();
  CompactRobustModel m = build_compact(c, build_uncertainty_box(c, 0, 0));
  NonconvexTep nct = build_deterministic_tep(c);
  for (auto counts : {std::map<std::pair<int, int>, int>{{{2, 3}, 1}},
                      std::map<std::pair<int, int>, int>{{{1, 3}, 1}, {{2, 3}, 1}}}) {
    TepPlan plan = make_plan(m, counts);
    PrimalSlaveSolution relax = solve_primal_slave(m, plan, VecX::Zero(m.n_xi()));
    QcProblem exact = nct.at_plan(plan);
    NlpSolution s = pdipm_solve(make_nlp(exact));
    REQUIRE(s.ok());
    double exact_yr = s.objective * c.annualization;
    CHECK(std::abs(exact_yr - relax.objective_yr) / exact_yr < 1e-3);
  }
}

TEST_CASE("nonconvex TEP model and the substituted ACOPF agree") {
  NetworkCase c = testing::load_bus3();
  CompactRobustModel m = build_compact(c, build_uncertainty_box(c, 10, 0));
  NonconvexTep nct = build_deterministic_tep(c);
  TepPlan plan = make_plan(m, {{{2, 3}, 1}});
  VecX xi = m.box.xi_max;
  QcProblem exact = nct.at_plan(plan, &xi);
  NlpSolution a = pdipm_solve(make_nlp(exact));
  AcopfSolution b = acopf_solve(c, plan, xi);
  REQUIRE(a.ok());
  REQUIRE(b.status == NlpStatus::Converged);
  CHECK(a.objective * c.annualization == doctest::Approx(b.objective_yr).epsilon(1e-5));
}

TEST_CASE("sampling is reproducible and marginally uniform") {
  NetworkCase c = testing::load_bus3();
  UncertaintyBox box = build_uncertainty_box(c, 20, 50);
  auto d1 = mcs_draw_samples(box, 400, 7);
  auto d2 = mcs_draw_samples(box, 400, 7);
  REQUIRE(d1.size() == d2.size());
  for (size_t i = 0; i < d1.size(); ++i) CHECK((d1[i] - d2[i]).norm() == 0.0);
  // Chi-square uniformity sanity on one active component (10 bins, 400 draws;
  // 99.9% critical value for 9 dof is 27.88).
  int bins[10] = {0};
  for (auto& xi : d1) {
    double t = (xi[0] - box.xi_min[0]) / (box.xi_max[0] - box.xi_min[0]);
    bins[std::min(9, static_cast<int>(t * 10))]++;
  }
  double chi2 = 0;
  for (int b = 0; b < 10; ++b) chi2 += (bins[b] - 40.0) * (bins[b] - 40.0) / 40.0;
  CHECK(chi2 < 27.88);
  // Samples respect the box.
  for (auto& xi : d1)
    for (int k = 0; k < box.size(); ++k) {
      CHECK(xi[k] >= box.xi_min[k] - 1e-15);
      CHECK(xi[k] <= box.xi_max[k] + 1e-15);
    }
}

TEST_CASE("empty sample set is flagged undefined") {
  NetworkCase c = testing::load_bus3();
  UncertaintyBox box = build_uncertainty_box(c, 10, 0);
  CompactRobustModel m = build_compact(c, box);
  TepPlan plan = make_plan(m, {{{2, 3}, 1}});
  McsReport rep = mcs_verify(c, plan, box, 0, 1);
  CHECK(!rep.fraction_defined);
  CHECK(std::isnan(rep.robustness_fraction));
}

TEST_CASE("serial and parallel MCS paths produce identical reports") {
  NetworkCase c = testing::load_bus3();
  UncertaintyBox box = build_uncertainty_box(c, 10, 0);
  BendersResult res = benders_solve(c, box);
  REQUIRE(res.state.converged);
  McsOptions par, ser;
  ser.mode = McsMode::Serial;
  McsReport a = mcs_verify(c, res.plan, box, 64, 5, par);
  McsReport b = mcs_verify(c, res.plan, box, 64, 5, ser);
  REQUIRE(a.n_samples == b.n_samples);
  CHECK(a.feasible == b.feasible);
  CHECK(a.converged == b.converged);
  for (int i = 0; i < a.n_samples; ++i) {
    CHECK(a.samples[i].objective_yr == b.samples[i].objective_yr);
    CHECK(a.samples[i].feasible == b.samples[i].feasible);
  }
}

TEST_CASE("robust plan passes MCS, under-built plan fails the strict mode") {
  NetworkCase c = testing::load_bus3();
  UncertaintyBox box = build_uncertainty_box(c, 10, 0);
  BendersResult res = benders_solve(c, box);
  REQUIRE(res.state.converged);
  McsReport good = mcs_verify(c, res.plan, box, 200, 11);
  CHECK(good.robustness_fraction == 1.0);

  // Negative control: the bare base topology cannot carry the nominal load
  // without shedding, so strict mode must reject samples.
  CompactRobustModel m = build_compact(c, box);
  TepPlan bare = make_plan(m, {});
  McsOptions strict;
  strict.strict = true;
  McsReport bad = mcs_verify(c, bare, box, 50, 11, strict);
  CHECK(bad.robustness_fraction < 1.0);
}

TEST_CASE("worst-case dominance over sampled realizations") {
  NetworkCase c = testing::load_bus3();
  UncertaintyBox box = build_uncertainty_box(c, 15, 0);
  BendersResult res = benders_solve(c, box);
  REQUIRE(res.state.converged);
  AcopfSolution worst = acopf_solve(c, res.plan, res.worst_case.xi);
  REQUIRE(worst.status == NlpStatus::Converged);
  auto draws = mcs_draw_samples(box, 50, 23);
  for (auto& xi : draws) {
    AcopfSolution s = acopf_solve(c, res.plan, xi);
    REQUIRE(s.status == NlpStatus::Converged);
    CHECK(s.objective_yr <= worst.objective_yr * (1 + 1e-3) + 1e-6);
  }
}

}  // TEST_SUITE
