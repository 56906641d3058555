#include <fstream>

#include "rtep/benders.hpp"
#include "rtep/report.hpp"
#include "support.hpp"

using namespace rtep;

namespace {

// Brute force over all Eq-(3)-valid plans x all box vertices, primal slave
// per combination. Independent oracle for benders_solve.
struct OracleResult {
  double cost_yr;
  std::map<std::pair<int, int>, int> counts;
};

OracleResult brute_force_robust(const NetworkCase& c, double ud) {
  UncertaintyBox box = build_uncertainty_box(c, ud, 0);
  CompactRobustModel m = build_compact(c, box);
  std::vector<int> active;
  for (int k = 0; k < m.n_xi(); ++k)
    if (box.xi_max[k] > box.xi_min[k]) active.push_back(k);

  std::vector<std::pair<int, int>> corr_caps;  // (corridor, cand_max)
  for (int corr = 0; corr < m.vars.nc; ++corr)
    corr_caps.emplace_back(corr, m.topo.corridors[corr].cand_max);

  OracleResult best{kInf, {}};
  std::vector<int> counts(corr_caps.size(), 0);
  while (true) {
    std::map<std::pair<int, int>, int> cm;
    for (size_t i = 0; i < corr_caps.size(); ++i)
      if (counts[i] > 0) {
        const Corridor& co = m.topo.corridors[corr_caps[i].first];
        cm[{co.id_a, co.id_b}] = counts[i];
      }
    TepPlan plan = make_plan(m, cm);
    double worst = -kInf;
    for (long mask = 0; mask < (1L << active.size()); ++mask) {
      VecX xi = VecX::Zero(m.n_xi());
      for (size_t b = 0; b < active.size(); ++b)
        xi[active[b]] = (mask >> b) & 1 ? box.xi_max[active[b]] : box.xi_min[active[b]];
      worst = std::max(worst, solve_primal_slave(m, plan, xi).objective_yr);
    }
    double total = plan.investment_cost + worst;
    if (total < best.cost_yr) best = {total, cm};

    int i = 0;
    while (i < static_cast<int>(counts.size()) && counts[i] == corr_caps[i].second)
      counts[i++] = 0;
    if (i == static_cast<int>(counts.size())) break;
    counts[i]++;
  }
  return best;
}

}  // namespace

TEST_SUITE("benders") {

TEST_CASE("no candidates and zero box converge immediately") {
  NetworkCase c = testing::load_bus3();
  c.candidate_corridors.clear();
  UncertaintyBox box = build_uncertainty_box(c, 0, 0);
  BendersResult res = benders_solve(c, box);
  CHECK(res.state.converged);
  CHECK(res.state.iterations <= 2);
  CHECK(res.plan.installed() == 0);
}

TEST_CASE("3-bus deterministic solve picks the cheap 2-3 circuit") {
  NetworkCase c = testing::load_bus3();
  UncertaintyBox box = build_uncertainty_box(c, 0, 0);
  BendersResult res = benders_solve(c, box);
  REQUIRE(res.state.converged);
  CompactRobustModel m = build_compact(c, box);
  auto counts = plan_counts(m, res.plan);
  CHECK(counts == std::map<std::pair<int, int>, int>{{{2, 3}, 1}});
  CHECK(res.plan.investment_cost == doctest::Approx(4000.0));
}

TEST_CASE("LB trace is monotone and the gap closes") {
  NetworkCase c = testing::load_bus3();
  for (double ud : {0.0, 10.0, 20.0}) {
    UncertaintyBox box = build_uncertainty_box(c, ud, 0);
    BendersResult res = benders_solve(c, box);
    REQUIRE(res.state.converged);
    CHECK(res.state.gap() < c.bd_tolerance);
    double prev = -kInf;
    for (const auto& it : res.state.trace) {
      CHECK(it.lb_yr >= prev - 1e-9);
      prev = it.lb_yr;
    }
    CHECK(res.state.ub_yr >= res.state.lb_yr - 1e-6);
  }
}

TEST_CASE("every cut underestimates SD at every visited plan") {
  NetworkCase c = testing::load_bus3();
  UncertaintyBox box = build_uncertainty_box(c, 10, 0);
  BendersResult res = benders_solve(c, box);
  REQUIRE(res.state.converged);
  CompactRobustModel m = build_compact(c, box);
  // Visited plans: from the trace.
  std::vector<TepPlan> plans;
  for (const auto& it : res.state.trace) plans.push_back(it.plan);
  for (const auto& plan : plans) {
    DualSlaveSolution wc = solve_dual_slave(m, plan);
    double sd_raw = wc.sd_yr / m.annualization();
    VecX ym(m.vars.nl);
    for (int l = 0; l < m.vars.nl; ++l) ym[l] = plan.y_m[l];
    for (const auto& cut : res.state.cuts)
      CHECK(cut.value(ym) <= sd_raw + 1e-6);
  }
}

TEST_CASE("oracle equivalence on the 3-bus system") {
  NetworkCase c = testing::load_bus3();
  for (double ud : {0.0, 10.0}) {
    OracleResult oracle = brute_force_robust(c, ud);
    UncertaintyBox box = build_uncertainty_box(c, ud, 0);
    BendersResult res = benders_solve(c, box);
    REQUIRE(res.state.converged);
    CHECK(std::abs(res.total_cost_yr - oracle.cost_yr) / oracle.cost_yr < 1e-4);
  }
}

TEST_CASE("master cone rows hold at the incumbent (Eq-62 shape)") {
  // Snapshot D^p = (0,0,0,2): the linearized row reads delta_D4 >= -1.
  NetworkCase c = testing::load_bus3();
  UncertaintyBox box = build_uncertainty_box(c, 0, 0);
  CompactRobustModel m = build_compact(c, box);
  TepPlan plan = make_plan(m, {{{2, 3}, 1}});
  DualSlaveSolution wc = solve_dual_slave(m, plan);
  std::vector<BendersCut> cuts{make_cut(m, wc)};
  VecX ycone = VecX::Zero(m.vars.n_cone());
  for (int corr = 0; corr < m.vars.nc; ++corr) ycone[4 * corr + 3] = 2.0;
  MilpProblem master = build_master(m, cuts, wc.xi, ycone);
  MilpSolution ms = bb_solve(master);
  REQUIRE(ms.status == MilpStatus::Optimal);
  // Taylor row: w = H yhat = (0,0,0,-2) -> -2*(yhat_4 + 2 dD4) <= 0 after the
  // projection turns (0,0,0,2) into the safe halfspace; either way the master
  // solution must satisfy the assembled rows.
  VecX ax = master.lp.A * ms.x;
  for (int r = 0; r < master.lp.rows(); ++r) {
    if (master.lp.sense[r] == 'L')
      CHECK(ax[r] <= master.lp.rhs[r] + 1e-6);
    else
      CHECK(ax[r] == doctest::Approx(master.lp.rhs[r]).epsilon(1e-6));
  }
}

TEST_CASE("reduced-variable master gives the same bound") {
  NetworkCase c = testing::load_bus3();
  UncertaintyBox box = build_uncertainty_box(c, 10, 0);
  CompactRobustModel m = build_compact(c, box);
  TepPlan plan = make_plan(m, {{{2, 3}, 1}});
  DualSlaveSolution wc = solve_dual_slave(m, plan);
  std::vector<BendersCut> cuts{make_cut(m, wc)};
  MasterOptions full, reduced;
  reduced.reduce_variables = true;
  MilpSolution a = bb_solve(build_master(m, cuts, wc.xi, wc.y_cone, full));
  MilpSolution b = bb_solve(build_master(m, cuts, wc.xi, wc.y_cone, reduced));
  REQUIRE(a.status == MilpStatus::Optimal);
  REQUIRE(b.status == MilpStatus::Optimal);
  CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-7));
}

TEST_CASE("master respects sequential-installation rows") {
  NetworkCase c = testing::load_bus3();
  UncertaintyBox box = build_uncertainty_box(c, 10, 0);
  CompactRobustModel m = build_compact(c, box);
  std::vector<int> all(m.vars.nl, 1);
  TepPlan plan = make_plan_from_vector(m, all);
  DualSlaveSolution wc = solve_dual_slave(m, plan);
  std::vector<BendersCut> cuts{make_cut(m, wc)};
  MilpProblem master = build_master(m, cuts, wc.xi, wc.y_cone);
  MilpSolution ms = bb_solve(master);
  REQUIRE(ms.status == MilpStatus::Optimal);
  std::vector<int> ym(m.vars.nl);
  for (int l = 0; l < m.vars.nl; ++l) ym[l] = static_cast<int>(std::lround(ms.x[l]));
  CHECK(plan_respects_ordering(m, ym));
}

TEST_CASE("trace export writes one row per iteration") {
  NetworkCase c = testing::load_bus3();
  UncertaintyBox box = build_uncertainty_box(c, 10, 0);
  BendersResult res = benders_solve(c, box);
  CompactRobustModel m = build_compact(c, box);
  write_trace_csv("bus3_trace_test.csv", m, res.state);
  std::ifstream in("bus3_trace_test.csv");
  REQUIRE(in.good());
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == res.state.iterations + 1);  // header + per-iteration rows
}

}  // TEST_SUITE
