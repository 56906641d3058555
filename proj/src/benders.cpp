#include <algorithm>
#include <cmath>

#include "rtep/benders.hpp"

namespace rtep {

namespace {

TepPlan all_candidates_plan(const CompactRobustModel& m) {
  std::vector<int> y(m.vars.nl, 1);
  return make_plan_from_vector(m, y);
}

}  // namespace

BendersResult benders_solve(const NetworkCase& c, const UncertaintyBox& box,
                            const BendersOptions& opts) {
  CompactRobustModel model = build_compact(c, box);
  const double ann = c.annualization;
  const double eps = opts.epsilon > 0 ? opts.epsilon : c.bd_tolerance;

  BendersResult res;
  BendersState& st = res.state;

  // Step 2: initial topology.
  TepPlan plan;
  if (model.vars.nl == 0) {
    plan.y_m.clear();
    plan.investment_cost = 0.0;
  } else if (opts.init == InitTopology::Deterministic && !box.is_zero()) {
    BendersOptions det = opts;
    det.init = InitTopology::AllCandidates;
    UncertaintyBox zero = build_uncertainty_box(c, 0.0, 0.0);
    plan = benders_solve(c, zero, det).plan;
    log_msg(1, "benders[%s]: deterministic initial topology %s", c.name.c_str(),
            plan_to_string(model, plan).c_str());
  } else {
    plan = all_candidates_plan(model);
  }

  // Step 3: worst case at the initial topology.
  SlaveOptions sopts = opts.slave;
  DualSlaveSolution wc = solve_dual_slave(model, plan, sopts);
  st.ub_yr = plan.investment_cost + wc.sd_yr;
  res.plan = plan;
  res.worst_case = wc;
  st.cuts.push_back(make_cut(model, wc));

  std::vector<VecX> xi_snaps{wc.xi}, ycone_snaps{wc.y_cone};

  for (int p = 1; p <= opts.max_iters; ++p) {
    st.iterations = p;

    // Step 5: master MILP, lower bound from its proven bound.
    MilpProblem master =
        opts.accumulate_acceleration
            ? build_master_multi(model, st.cuts, xi_snaps, ycone_snaps, opts.master)
            : build_master(model, st.cuts, xi_snaps.back(), ycone_snaps.back(), opts.master);
    MilpSolution ms = bb_solve(master, opts.master.bb);
    if (ms.status == MilpStatus::Infeasible)
      throw SolveError("benders master came back infeasible on " + c.name);
    std::vector<int> ym(model.vars.nl);
    for (int l = 0; l < model.vars.nl; ++l) ym[l] = static_cast<int>(std::lround(ms.x[l]));
    TepPlan cand = make_plan_from_vector(model, ym);
    const double master_bound_yr = ms.bound * ann;
    // Acceleration rows move with xi^p, so the running max keeps LB a valid
    // monotone bound (each master is itself a relaxation).
    st.lb_yr = std::max(st.lb_yr, master_bound_yr);

    // Step 6: worst case at the new plan, upper bound update.
    sopts.warm = st.trace.empty() ? nullptr : &res.worst_case;
    DualSlaveSolution wcp = solve_dual_slave(model, cand, sopts);
    const double ub_cand = cand.investment_cost + wcp.sd_yr;
    if (ub_cand < st.ub_yr) {
      st.ub_yr = ub_cand;
      res.plan = cand;
      res.worst_case = wcp;
    }

    BendersIterate it;
    it.p = p;
    it.lb_yr = st.lb_yr;
    it.ub_yr = st.ub_yr;
    it.master_obj_yr = ms.objective * ann;
    it.plan = cand;
    it.xi = wcp.xi;
    it.sd_yr = wcp.sd_yr;
    it.master_nodes = ms.nodes;
    it.gap = st.gap();
    st.trace.push_back(it);
    log_msg(1, "benders[%s] p=%d LB=%.4f UB=%.4f gap=%.3e plan=%s", c.name.c_str(), p,
            st.lb_yr, st.ub_yr, it.gap, plan_to_string(model, cand).c_str());

    // Step 4 (for the next round): cut from the latest dual slave.
    st.cuts.push_back(make_cut(model, wcp));
    xi_snaps.push_back(wcp.xi);
    ycone_snaps.push_back(wcp.y_cone);
    if (!opts.accumulate_acceleration && xi_snaps.size() > 1) {
      xi_snaps.erase(xi_snaps.begin());
      ycone_snaps.erase(ycone_snaps.begin());
    }

    // Step 7: convergence test.
    if (st.gap() < eps) {
      st.converged = true;
      st.stop_reason = "gap below tolerance";
      break;
    }
  }
  if (!st.converged) st.stop_reason = "iteration cap reached";
  res.total_cost_yr = st.ub_yr;
  return res;
}

}  // namespace rtep
