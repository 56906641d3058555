#include "rtep/milp.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <queue>

namespace rtep {

namespace {

struct Node {
  double bound;
  int depth;
  std::shared_ptr<const std::vector<std::pair<int, int>>> fixes;  // (binary col, 0/1)
  std::shared_ptr<SimplexState> parent_basis;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;  // best bound first
    return a.depth < b.depth;                          // deeper first on ties
  }
};

int most_fractional(const MilpProblem& p, const VecX& x, double int_tol) {
  int pick = -1;
  double best = int_tol;
  for (int j : p.binaries) {
    double f = std::abs(x[j] - std::round(x[j]));
    if (f > best + 1e-15) {
      best = f;
      pick = j;
    }
  }
  return pick;
}

}  // namespace

MilpSolution bb_solve(const MilpProblem& p, const BbOptions& opts) {
  MilpSolution sol;
  const int n = p.lp.cols();

  VecX lb0 = p.lp.lb, ub0 = p.lp.ub;
  for (int j : p.binaries) {
    lb0[j] = std::max(lb0[j], 0.0);
    ub0[j] = std::min(ub0[j], 1.0);
  }

  auto solve_node = [&](const std::vector<std::pair<int, int>>& fixes,
                        SimplexState* basis) -> LpSolution {
    VecX lb = lb0, ub = ub0;
    for (auto& [j, v] : fixes) {
      lb[j] = v;
      ub[j] = v;
    }
    LpOptions lo;
    lo.lb_override = &lb;
    lo.ub_override = &ub;
    return lp_solve_warm(p.lp, basis, lo);
  };

  auto gap_closed = [&](double incumbent, double bound) {
    double g = incumbent - bound;
    return g <= opts.abs_gap || g <= opts.rel_gap * std::max(1.0, std::abs(incumbent));
  };

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  {
    Node root;
    root.bound = -kInf;
    root.depth = 0;
    root.fixes = std::make_shared<std::vector<std::pair<int, int>>>();
    root.parent_basis = nullptr;
    open.push(std::move(root));
  }

  double incumbent = kInf;
  VecX incumbent_x;
  double best_open_bound = -kInf;

  while (!open.empty()) {
    Node node = open.top();
    open.pop();
    best_open_bound = node.bound;
    if (incumbent < kInf && node.bound > -kInf && gap_closed(incumbent, node.bound)) {
      // Everything left is at least as bad; the incumbent is proven.
      best_open_bound = node.bound;
      break;
    }
    ++sol.nodes;
    if (sol.nodes > opts.node_limit) {
      sol.status = MilpStatus::GapLimit;
      break;
    }

    SimplexState basis;
    if (node.parent_basis) basis = *node.parent_basis;
    LpSolution lp = solve_node(*node.fixes, &basis);
    if (lp.status == LpStatus::Infeasible) continue;
    if (lp.status == LpStatus::Unbounded) {
      // Unbounded relaxation at the root means an unbounded MILP model;
      // deeper down it cannot happen once an incumbent bounds the search.
      if (node.depth == 0 && incumbent == kInf) {
        sol.status = MilpStatus::GapLimit;
        sol.bound = -kInf;
        return sol;
      }
      continue;
    }
    if (lp.status != LpStatus::Optimal) {
      sol.status = MilpStatus::GapLimit;
      break;
    }
    if (incumbent < kInf && lp.objective >= incumbent - opts.abs_gap &&
        gap_closed(incumbent, lp.objective))
      continue;

    int branch = most_fractional(p, lp.x, opts.int_tol);
    if (branch < 0) {
      // Integral point (snap residual fractionality away).
      double obj = lp.objective;
      if (obj < incumbent - 1e-12) {
        incumbent = obj;
        incumbent_x = lp.x;
        for (int j : p.binaries) incumbent_x[j] = std::round(incumbent_x[j]);
      }
      continue;
    }

    auto basis_ptr = std::make_shared<SimplexState>(std::move(basis));
    for (int v = 0; v <= 1; ++v) {
      Node child;
      child.bound = lp.objective;
      child.depth = node.depth + 1;
      auto fixes = std::make_shared<std::vector<std::pair<int, int>>>(*node.fixes);
      fixes->emplace_back(branch, v);
      child.fixes = std::move(fixes);
      child.parent_basis = basis_ptr;
      open.push(std::move(child));
    }
  }

  if (incumbent < kInf) {
    sol.x = incumbent_x;
    sol.objective = incumbent;
    double open_bound = open.empty() ? incumbent : std::min(best_open_bound, incumbent);
    sol.bound = open_bound;
    sol.gap = std::max(0.0, sol.objective - sol.bound);
    if (sol.status != MilpStatus::GapLimit)
      sol.status = gap_closed(sol.objective, sol.bound) ? MilpStatus::Optimal
                                                        : MilpStatus::GapLimit;
  } else if (sol.status != MilpStatus::GapLimit) {
    sol.status = MilpStatus::Infeasible;
  }
  return sol;
}

}  // namespace rtep
