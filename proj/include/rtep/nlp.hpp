#pragma once

#include <functional>
#include <string>

#include "rtep/common.hpp"

namespace rtep {

// Smooth constrained NLP:
//   min f(x)  s.t.  c_eq(x) = 0,  c_ineq(x) <= 0,  lb <= x <= ub.
// Jacobians are sparse; the Lagrangian Hessian callback returns
//   sigma_f * hess(f) + sum_i lam_eq_i * hess(c_eq_i) + sum_j mu_j * hess(c_ineq_j)
// as a full (symmetric) sparse matrix.
struct NlpProblem {
  int n = 0;
  int m_eq = 0;
  int m_ineq = 0;
  VecX lb, ub;  // empty means unbounded
  VecX x0;

  std::function<double(const VecX&)> objective;
  std::function<VecX(const VecX&)> gradient;
  std::function<VecX(const VecX&)> eq_residual;
  std::function<SpMat(const VecX&)> eq_jacobian;
  std::function<VecX(const VecX&)> ineq_residual;
  std::function<SpMat(const VecX&)> ineq_jacobian;
  std::function<SpMat(const VecX&, double, const VecX&, const VecX&)> lagrangian_hessian;

  std::string name;
};

enum class NlpStatus { Converged, MaxIterations, NumericalFailure };

struct KktResiduals {
  double stationarity = kInf;   // normalized inf-norm of the gradient of the Lagrangian
  double feasibility = kInf;    // normalized max of |c_eq| and positive part of c_ineq
  double complementarity = kInf;
};

struct NlpSolution {
  NlpStatus status = NlpStatus::NumericalFailure;
  VecX x;
  VecX lam_eq;    // equality multipliers
  VecX mu_ineq;   // inequality multipliers, >= 0
  VecX mu_lb, mu_ub;  // bound multipliers, >= 0
  double objective = kInf;
  KktResiduals kkt;
  int iterations = 0;
  std::string message;

  bool ok() const { return status == NlpStatus::Converged; }
};

struct IpmOptions {
  double tol = 1e-8;            // feasibility/optimality tolerance (normalized)
  int max_iter = 250;
  double tau = 0.995;           // fraction-to-boundary
  double sigma_min = 1e-6;      // centering clamp for the predictor-corrector
  double sigma_max = 0.8;
  bool predictor_corrector = true;
  bool verbose = false;         // overrides RTEP_LOG >= 2
};

// Primal-dual interior-point solve (Mehrotra-style predictor-corrector on the
// perturbed KKT system, quasi-definite regularized sparse LDL^T).
NlpSolution pdipm_solve(const NlpProblem& p, const IpmOptions& opts = {});

// Recompute normalized KKT residuals at an arbitrary primal-dual point.
KktResiduals check_kkt(const NlpProblem& p, const VecX& x, const VecX& lam_eq,
                       const VecX& mu_ineq, const VecX& mu_lb, const VecX& mu_ub);

}  // namespace rtep
