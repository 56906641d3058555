#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rtep/formulation.hpp"
#include "rtep/milp.hpp"
#include "rtep/nlp.hpp"

namespace rtep {

// Optimum of the inner operation problem at a fixed plan and realization.
struct PrimalSlaveSolution {
  VecX y_s, y_cone;
  double objective_yr = 0.0;  // F_s'y_s + F_c, annualized ($/yr)
  VecX z_ms, lam_sxi, z_sxi, lam_cs, z_c;  // duals, full row spaces
  NlpStatus status = NlpStatus::NumericalFailure;
  KktResiduals kkt;
};

// All dual-stage variables of the worst-case slave plus the realized vertex.
struct DualSlaveSolution {
  VecX z_ms, lam_sxi, z_sxi, lam_cs, z_c, y_cone;
  VecX psi, psi_plus, psi_minus, u, xi;
  double sd_yr = 0.0;  // SD(y_m), annualized ($/yr)
  bool snapped = false;
  NlpStatus status = NlpStatus::NumericalFailure;
  std::string note;
};

struct BendersCut {
  // chi >= constant + coeffs' y_m, in raw model units.
  double constant = 0.0;
  VecX coeffs;
  double value(const VecX& ym) const { return constant + coeffs.dot(ym); }
};

struct BendersIterate {
  int p = 0;
  double lb_yr = -kInf, ub_yr = kInf;
  double master_obj_yr = 0.0;
  double gap = kInf;
  TepPlan plan;       // plan produced by the master this iteration
  VecX xi;            // worst-case realization at that plan
  double sd_yr = 0.0;
  long master_nodes = 0;
};

struct BendersState {
  int iterations = 0;
  double lb_yr = -kInf, ub_yr = kInf;
  bool converged = false;
  std::vector<BendersCut> cuts;
  std::vector<BendersIterate> trace;
  TepPlan best_plan;
  std::string stop_reason;

  double gap() const {
    if (!(ub_yr > 0) || lb_yr == -kInf) return kInf;
    return (ub_yr - lb_yr) / ub_yr;
  }
};

struct SlaveOptions {
  IpmOptions ipm;
  // Exhaustive vertex search of the worst case when the box has at most this
  // many non-degenerate components; alternation otherwise.
  int exhaustive_cap = 5;
  int max_alternation_rounds = 8;
  bool skip_phase_a = false;  // start alternation from a sign heuristic instead
  const DualSlaveSolution* warm = nullptr;
};

PrimalSlaveSolution solve_primal_slave(const CompactRobustModel& m, const TepPlan& plan,
                                       const VecX& xi, const IpmOptions& opts = {});

// Proposed dual slave at a fixed realization (zero-gap counterpart of the
// primal slave); building block of the worst-case search.
DualSlaveSolution solve_dual_slave_fixed_xi(const CompactRobustModel& m, const TepPlan& plan,
                                            const VecX& xi, const IpmOptions& opts = {},
                                            const DualSlaveSolution* warm = nullptr);

// Worst-case dual slave: the printed Psi+/Psi-/u linearization solved by
// PDIPM, then vertex snapping and fixed-vertex refinement.
DualSlaveSolution solve_dual_slave(const CompactRobustModel& m, const TepPlan& plan,
                                   const SlaveOptions& opts = {});

// Snap xi to the box vertex selected by sign(Psi), reset u = Psi.*xi and
// recompute SD with the converged multipliers.
DualSlaveSolution snap_worst_case(const CompactRobustModel& m, const TepPlan& plan,
                                  const DualSlaveSolution& sol);

BendersCut make_cut(const CompactRobustModel& m, const DualSlaveSolution& sol);

struct MasterOptions {
  bool reduce_variables = false;  // replace D deltas by direct (c, s) rows
  BbOptions bb;
};

MilpProblem build_master(const CompactRobustModel& m, const std::vector<BendersCut>& cuts,
                         const VecX& xi_p, const VecX& y_cone_p,
                         const MasterOptions& opts = {});

// Acceleration blocks for several past realizations at once (one y_s copy per
// snapshot); build_master is the single-snapshot case.
MilpProblem build_master_multi(const CompactRobustModel& m,
                               const std::vector<BendersCut>& cuts,
                               const std::vector<VecX>& xi_snaps,
                               const std::vector<VecX>& ycone_snaps,
                               const MasterOptions& opts = {});

enum class InitTopology { AllCandidates, Deterministic };

struct BendersOptions {
  int max_iters = 200;
  double epsilon = 0.0;  // 0 means take the case's bd_tolerance
  InitTopology init = InitTopology::AllCandidates;
  SlaveOptions slave;
  MasterOptions master;
  bool accumulate_acceleration = false;  // keep all past xi snapshots
};

struct BendersResult {
  TepPlan plan;
  BendersState state;
  DualSlaveSolution worst_case;
  double total_cost_yr = 0.0;  // investment + worst-case operation
};

BendersResult benders_solve(const NetworkCase& c, const UncertaintyBox& box,
                            const BendersOptions& opts = {});

struct DualityGapRecord {
  std::string system;
  std::string topology;
  double primal_yr = 0.0;
  double dual_yr = 0.0;
  double rel_gap = kInf;
};

DualityGapRecord duality_gap_report(const NetworkCase& c, const TepPlan& plan, const VecX& xi,
                                    const std::string& label = "");

}  // namespace rtep
