#pragma once

#include <doctest.h>

#include <random>
#include <string>

#include "rtep/netcase.hpp"
#include "rtep/nlp.hpp"

#ifndef RTEP_CASE_DIR
#define RTEP_CASE_DIR "cases"
#endif

namespace rtep::testing {

inline std::string case_path(const std::string& name) {
  return std::string(RTEP_CASE_DIR) + "/" + name;
}

inline NetworkCase load_bus3() { return parse_case(case_path("bus3.rtep")); }
inline NetworkCase load_garver6() { return parse_case(case_path("garver6.rtep")); }

// Central finite-difference check of gradient and Jacobians at a point.
// Returns the worst relative error over all sampled entries.
inline double fd_check(const NlpProblem& p, const VecX& x, double h = 1e-6) {
  double worst = 0.0;
  auto rel = [](double got, double want) {
    return std::abs(got - want) / std::max(1.0, std::abs(want));
  };
  VecX g = p.gradient(x);
  for (int i = 0; i < p.n; ++i) {
    VecX xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    double fd = (p.objective(xp) - p.objective(xm)) / (2 * h);
    worst = std::max(worst, rel(g[i], fd));
  }
  if (p.m_eq > 0) {
    SpMat j = p.eq_jacobian(x);
    Eigen::MatrixXd jd = Eigen::MatrixXd(j);
    for (int i = 0; i < p.n; ++i) {
      VecX xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      VecX fd = (p.eq_residual(xp) - p.eq_residual(xm)) / (2 * h);
      for (int r = 0; r < p.m_eq; ++r) worst = std::max(worst, rel(jd(r, i), fd[r]));
    }
  }
  if (p.m_ineq > 0) {
    SpMat j = p.ineq_jacobian(x);
    Eigen::MatrixXd jd = Eigen::MatrixXd(j);
    for (int i = 0; i < p.n; ++i) {
      VecX xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      VecX fd = (p.ineq_residual(xp) - p.ineq_residual(xm)) / (2 * h);
      for (int r = 0; r < p.m_ineq; ++r) worst = std::max(worst, rel(jd(r, i), fd[r]));
    }
  }
  return worst;
}

// Deterministic random point generator for property-style tests.
inline VecX random_point(int n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  VecX x(n);
  for (int i = 0; i < n; ++i)
    x[i] = scale * (2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0);
  return x;
}

}  // namespace rtep::testing
