#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "rtep/benders.hpp"
#include "rtep/report.hpp"
#include "rtep/verify.hpp"

namespace fs = std::filesystem;
using namespace rtep;

namespace {

struct CommonArgs {
  std::string case_path;
  double ud = 0.0, ur = 0.0;
  std::string out_dir = ".";
  int max_iters = 200;
  std::string init_topology = "all";
  std::string dump_model;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--case", a.case_path, "case file")->required();
  cmd->add_option("--ud", a.ud, "load uncertainty percent");
  cmd->add_option("--ur", a.ur, "RES uncertainty percent");
  cmd->add_option("--out", a.out_dir, "output directory");
  cmd->add_option("--max-iters", a.max_iters, "Benders iteration cap");
  cmd->add_option("--init-topology", a.init_topology)
      ->check(CLI::IsMember({"all", "deterministic"}));
  cmd->add_option("--dump-model", a.dump_model, "write the compact block model to this file");
}

BendersOptions benders_options(const CommonArgs& a) {
  BendersOptions o;
  o.max_iters = a.max_iters;
  o.init = a.init_topology == "deterministic" ? InitTopology::Deterministic
                                              : InitTopology::AllCandidates;
  return o;
}

struct RobustRun {
  CompactRobustModel model;
  BendersResult result;
  CostBreakdown costs;
};

RobustRun run_robust(const NetworkCase& cs, double ud, double ur, const BendersOptions& opts) {
  RobustRun rr;
  UncertaintyBox box = build_uncertainty_box(cs, ud, ur);
  rr.result = benders_solve(cs, box, opts);
  rr.model = build_compact(cs, box);
  PrimalSlaveSolution op = solve_primal_slave(rr.model, rr.result.plan, rr.result.worst_case.xi);
  rr.costs = cost_breakdown(rr.model, rr.result.plan, op);
  return rr;
}

int emit_robust(const CommonArgs& a, const NetworkCase& cs, const RobustRun& rr) {
  fs::create_directories(a.out_dir);
  const auto& res = rr.result;
  write_plan_file((fs::path(a.out_dir) / (cs.name + "_plan.txt")).string(), rr.model,
                  res.plan, a.ud, a.ur, res.total_cost_yr);
  write_trace_csv((fs::path(a.out_dir) / (cs.name + "_trace.csv")).string(), rr.model,
                  res.state);
  write_solution_report((fs::path(a.out_dir) / (cs.name + "_solution.txt")).string(),
                        rr.model, res, rr.costs);
  std::printf("case %s  ud=%g%% ur=%g%%\n", cs.name.c_str(), a.ud, a.ur);
  std::printf("  plan: %s\n", plan_to_string(rr.model, res.plan).c_str());
  std::printf("  investment  %12.2f $/yr\n", rr.costs.investment_yr);
  std::printf("  generation  %12.2f $/yr\n", rr.costs.generation_yr);
  std::printf("  curtailment %12.2f $/yr  (CP_d %.4f pu, CP_r %.4f pu)\n",
              rr.costs.curtailment_yr, rr.costs.cp_d_pu, rr.costs.cp_r_pu);
  std::printf("  total       %12.2f $/yr\n", res.total_cost_yr);
  std::printf("  LB %.2f  UB %.2f  gap %.3e  iters %d  %s\n", res.state.lb_yr,
              res.state.ub_yr, res.state.gap(), res.state.iterations,
              res.state.converged ? "converged" : "NOT CONVERGED");
  if (!res.state.converged) {
    std::fprintf(stderr, "error: Benders did not converge (%s)\n",
                 res.state.stop_reason.c_str());
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust AC transmission expansion planning under interval uncertainty"};
  app.require_subcommand(1);

  CommonArgs a;
  // solve-robust / solve-det ---------------------------------------------------
  auto* robust = app.add_subcommand("solve-robust", "Benders-decomposed robust plan");
  add_common(robust, a);
  auto* det = app.add_subcommand("solve-det", "deterministic plan (zero-width box)");
  add_common(det, a);

  // verify ---------------------------------------------------------------------
  auto* verify = app.add_subcommand("verify", "Monte-Carlo robustness check of a plan");
  add_common(verify, a);
  std::string plan_path;
  int samples = 2000;
  std::uint64_t seed = 20240901;
  bool strict = false;
  bool serial = false;
  verify->add_option("--plan", plan_path, "plan file from solve-robust")->required();
  verify->add_option("--samples", samples, "Monte-Carlo sample count");
  verify->add_option("--seed", seed, "RNG seed");
  verify->add_flag("--strict", strict, "zero-curtailment robustness");
  verify->add_flag("--serial", serial, "serial reference path (no OpenMP)");

  // dualgap ----------------------------------------------------------------------
  auto* dualgap = app.add_subcommand("dualgap", "primal vs dual slave objectives");
  add_common(dualgap, a);
  std::string gap_plan_path;
  dualgap->add_option("--plan", gap_plan_path, "augmented topology plan file");

  // sweep ------------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "cost vs uncertainty table");
  add_common(sweep, a);
  std::string ud_list = "0,5,10,15,20,25,30";
  std::string ur_list;
  sweep->add_option("--ud-list", ud_list, "comma-separated u_d percentages");
  sweep->add_option("--ur-list", ur_list, "comma-separated u_r percentages (u_d fixed at --ud)");

  CLI11_PARSE(app, argc, argv);

  try {
    NetworkCase cs = parse_case(a.case_path);
    if (!a.dump_model.empty()) {
      UncertaintyBox box = build_uncertainty_box(cs, a.ud, a.ur);
      write_compact_debug(build_compact(cs, box), a.dump_model);
    }

    if (robust->parsed() || det->parsed()) {
      if (det->parsed()) a.ud = a.ur = 0.0;
      RobustRun rr = run_robust(cs, a.ud, a.ur, benders_options(a));
      return emit_robust(a, cs, rr);
    }

    if (verify->parsed()) {
      UncertaintyBox box = build_uncertainty_box(cs, a.ud, a.ur);
      CompactRobustModel model = build_compact(cs, box);
      TepPlan plan = read_plan_file(plan_path, model);
      McsOptions mo;
      mo.strict = strict;
      mo.mode = serial ? McsMode::Serial : McsMode::Parallel;
      if (strict) {
        // Allowance: the curtailment the plan itself carries at the worst case.
        BendersOptions bo = benders_options(a);
        SlaveOptions so = bo.slave;
        DualSlaveSolution wc = solve_dual_slave(model, plan, so);
        PrimalSlaveSolution op = solve_primal_slave(model, plan, wc.xi);
        CostBreakdown cb = cost_breakdown(model, plan, op);
        mo.strict_cp_allowance = cb.cp_d_pu + cb.cp_r_pu;
      }
      McsReport rep = mcs_verify(cs, plan, box, samples, seed, mo);
      fs::create_directories(a.out_dir);
      write_mcs_report((fs::path(a.out_dir) / (cs.name + "_mcs.txt")).string(), rep);
      std::printf("samples %d  converged %d  feasible %d  fraction %s\n", rep.n_samples,
                  rep.converged, rep.feasible,
                  rep.fraction_defined ? std::to_string(rep.robustness_fraction).c_str()
                                       : "undefined");
      return rep.fraction_defined && rep.robustness_fraction >= 1.0 ? 0 : 1;
    }

    if (dualgap->parsed()) {
      CompactRobustModel model = build_compact(cs, build_uncertainty_box(cs, 0, 0));
      VecX xi = VecX::Zero(model.n_xi());
      std::vector<DualityGapRecord> recs;
      TepPlan base_plan = make_plan(model, {});
      recs.push_back(duality_gap_report(cs, base_plan, xi, "base"));
      TepPlan aug;
      if (!gap_plan_path.empty()) {
        aug = read_plan_file(gap_plan_path, model);
      } else {
        std::vector<int> all(model.vars.nl, 1);
        aug = make_plan_from_vector(model, all);
      }
      recs.push_back(duality_gap_report(cs, aug, xi, "augmented"));
      fs::create_directories(a.out_dir);
      write_dualgap_table((fs::path(a.out_dir) / (cs.name + "_dualgap.csv")).string(), recs);
      int rcode = 0;
      for (const auto& r : recs) {
        std::printf("%-10s %-10s primal %14.4f $/yr  dual %14.4f $/yr  gap %.3e\n",
                    r.system.c_str(), r.topology.c_str(), r.primal_yr, r.dual_yr, r.rel_gap);
        if (!(r.rel_gap <= 1e-4)) rcode = 1;
      }
      return rcode;
    }

    if (sweep->parsed()) {
      auto parse_list = [](const std::string& s) {
        std::vector<double> v;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
        return v;
      };
      std::vector<SweepRow> rows;
      double det_cost = 0.0;
      auto run_point = [&](double ud, double ur) {
        RobustRun rr = run_robust(cs, ud, ur, benders_options(a));
        SweepRow row;
        row.ud = ud;
        row.ur = ur;
        row.total_yr = rr.result.total_cost_yr;
        row.plan = plan_to_string(rr.model, rr.result.plan);
        row.cp_d_pu = rr.costs.cp_d_pu;
        row.converged = rr.result.state.converged;
        if (rows.empty() && ud == 0 && ur == 0) det_cost = row.total_yr;
        row.pct_increase = det_cost > 0 ? 100.0 * (row.total_yr - det_cost) / det_cost : 0.0;
        rows.push_back(row);
        std::printf("ud=%5.1f ur=%5.1f  total %12.2f $/yr  (+%7.3f%%)  CP_d %.4f  %s\n", ud,
                    ur, row.total_yr, row.pct_increase, row.cp_d_pu, row.plan.c_str());
      };
      if (ur_list.empty()) {
        for (double ud : parse_list(ud_list)) run_point(ud, a.ur);
      } else {
        for (double ur : parse_list(ur_list)) run_point(a.ud, ur);
      }
      fs::create_directories(a.out_dir);
      write_sweep_csv((fs::path(a.out_dir) / (cs.name + "_sweep.csv")).string(), rows);
      for (const auto& r : rows)
        if (!r.converged) return 1;
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
