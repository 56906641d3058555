#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtep/formulation.hpp"
#include "rtep/nlp.hpp"

namespace rtep {

// Local optimum of the true nonlinear ACOPF (rectangular voltages) with the
// plan frozen into the topology and curtailment as recourse.
struct AcopfSolution {
  NlpStatus status = NlpStatus::NumericalFailure;
  VecX e, f;       // per bus
  VecX p_g, q_g;   // per generator
  VecX cp_d, cp_r;  // per bus
  double objective_yr = kInf;  // generation + curtailment, $/yr
  double max_violation = kInf;  // recomputed constraint residual
  int starts_used = 0;

  double total_cp_d() const { return cp_d.size() ? cp_d.sum() : 0.0; }
  double total_cp_r() const { return cp_r.size() ? cp_r.sum() : 0.0; }
};

struct AcopfOptions {
  IpmOptions ipm;
  int max_starts = 3;       // flat start plus seeded +-5% perturbations
  std::uint64_t seed = 1;
};

AcopfSolution acopf_solve(const NetworkCase& c, const TepPlan& plan, const VecX& xi,
                          const AcopfOptions& opts = {});

struct McsSample {
  int id = 0;
  NlpStatus status = NlpStatus::NumericalFailure;
  double objective_yr = kInf;
  double max_violation = kInf;
  double cp_total = 0.0;
  bool feasible = false;
};

struct McsReport {
  int n_samples = 0;
  std::uint64_t seed = 0;
  int converged = 0;
  int feasible = 0;
  double robustness_fraction = 0.0;  // undefined (NaN) when n_samples = 0
  bool fraction_defined = false;
  double worst_violation = 0.0;
  std::vector<int> failures;  // sample ids
  std::vector<McsSample> samples;
  std::vector<VecX> draws;
};

enum class McsMode { Parallel, Serial };

struct McsOptions {
  bool strict = false;            // zero-curtailment robustness
  double strict_cp_allowance = 0.0;  // worst-case curtailment carried by the plan
  double feas_tol = 1e-6;
  McsMode mode = McsMode::Parallel;
  AcopfOptions acopf;
};

// Uniform samples over the box, one nonlinear ACOPF each. The sample set is a
// pure function of (box, n_samples, seed); the parallel and serial paths are
// required to produce identical reports.
McsReport mcs_verify(const NetworkCase& c, const TepPlan& plan, const UncertaintyBox& box,
                     int n_samples, std::uint64_t seed, const McsOptions& opts = {});

// The pre-drawn sample matrix (n_samples x 2*N_b), exposed for tests.
std::vector<VecX> mcs_draw_samples(const UncertaintyBox& box, int n_samples,
                                   std::uint64_t seed);

}  // namespace rtep
