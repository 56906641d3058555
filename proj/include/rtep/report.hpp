#pragma once

#include <string>
#include <vector>

#include "rtep/benders.hpp"
#include "rtep/verify.hpp"

namespace rtep {

// Plan file: "corridor <bus_a> <bus_b> <new circuits>" rows plus header keys.
void write_plan_file(const std::string& path, const CompactRobustModel& m, const TepPlan& p,
                     double ud, double ur, double total_cost_yr);
TepPlan read_plan_file(const std::string& path, const CompactRobustModel& m);

// Per-iteration rows: p, LB, UB, gap, SD, plan, xi.
void write_trace_csv(const std::string& path, const CompactRobustModel& m,
                     const BendersState& st);

struct CostBreakdown {
  double investment_yr = 0.0;
  double generation_yr = 0.0;
  double curtailment_yr = 0.0;
  double total_yr = 0.0;
  double cp_d_pu = 0.0, cp_r_pu = 0.0;
};

// Split of the worst-case operating point (primal slave re-solve at xi*).
CostBreakdown cost_breakdown(const CompactRobustModel& m, const TepPlan& plan,
                             const PrimalSlaveSolution& s);

void write_solution_report(const std::string& path, const CompactRobustModel& m,
                           const BendersResult& res, const CostBreakdown& costs);

void write_mcs_report(const std::string& path, const McsReport& rep);

void write_dualgap_table(const std::string& path, const std::vector<DualityGapRecord>& recs);

struct SweepRow {
  double ud = 0, ur = 0;
  double total_yr = 0;
  double pct_increase = 0;  // vs the deterministic run
  std::string plan;
  double cp_d_pu = 0;
  bool converged = false;
};

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

}  // namespace rtep
