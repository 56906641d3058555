#pragma once

#include <vector>

#include "rtep/lp.hpp"

namespace rtep {

struct MilpProblem {
  LpProblem lp;
  std::vector<int> binaries;  // column indices restricted to {0,1}
};

enum class MilpStatus { Optimal, Infeasible, GapLimit };

struct MilpSolution {
  MilpStatus status = MilpStatus::Infeasible;
  VecX x;
  double objective = kInf;  // incumbent value
  double bound = -kInf;     // proven lower bound (minimization)
  double gap = kInf;        // objective - bound
  long nodes = 0;
};

struct BbOptions {
  double abs_gap = 1e-9;
  double rel_gap = 0.0;
  double int_tol = 1e-6;
  long node_limit = 500000;
};

// Best-bound branch and bound with most-fractional branching (ties broken by
// lowest index) and warm-started LP re-solves.
MilpSolution bb_solve(const MilpProblem& p, const BbOptions& opts = {});

}  // namespace rtep
