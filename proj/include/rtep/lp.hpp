#pragma once

#include <string>
#include <vector>

#include "rtep/common.hpp"

namespace rtep {

// min c'x  s.t.  A x (<=|=) rhs,  lb <= x <= ub.
struct LpProblem {
  VecX c;
  SpMat A;                  // column-major, m x n
  std::vector<char> sense;  // per row: 'L' (<=) or 'E' (=)
  VecX rhs;
  VecX lb, ub;

  int rows() const { return static_cast<int>(A.rows()); }
  int cols() const { return static_cast<int>(A.cols()); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterLimit };

struct LpSolution {
  LpStatus status = LpStatus::IterLimit;
  VecX x;              // structural variables
  VecX y;              // row duals; reduced cost d_j = c_j - a_j' y
  VecX reduced_costs;  // structural reduced costs at the final basis
  double objective = kInf;
  int iterations = 0;
};

enum class VarState : unsigned char { Basic, AtLower, AtUpper, FreeNB };

// Basis snapshot for warm starts (branch-and-bound re-solves).
struct SimplexState {
  std::vector<int> basic;        // m column indices (structural or logical)
  std::vector<VarState> state;   // n + m entries
  bool valid() const { return !basic.empty(); }
};

struct LpOptions {
  double tol_primal = 1e-9;
  double tol_dual = 1e-9;
  int max_iter = 0;              // 0 means automatic (scales with problem size)
  const VecX* lb_override = nullptr;  // per-node bounds without copying A
  const VecX* ub_override = nullptr;
};

LpSolution lp_solve(const LpProblem& p, const LpOptions& opts = {});

// Warm-started variant: `state` is read when valid and rewritten with the
// final basis on return.
LpSolution lp_solve_warm(const LpProblem& p, SimplexState* state, const LpOptions& opts = {});

}  // namespace rtep
