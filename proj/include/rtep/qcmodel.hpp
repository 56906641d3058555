#pragma once

#include <string>
#include <vector>

#include "rtep/common.hpp"
#include "rtep/nlp.hpp"

namespace rtep {

// c + l'x + sum_k a_k * x_i * x_j. Quadratic terms are stored unsymmetrized:
// (i, j, a) contributes a*x_i*x_j exactly once.
struct QuadExpr {
  double constant = 0.0;
  std::vector<std::pair<int, double>> lin;
  std::vector<Triplet> quad;

  void add_lin(int i, double a) {
    if (a != 0.0) lin.emplace_back(i, a);
  }
  void add_quad(int i, int j, double a) {
    if (a != 0.0) quad.emplace_back(i, j, a);
  }
  double value(const VecX& x) const {
    double v = constant;
    for (auto& [i, a] : lin) v += a * x[i];
    for (auto& t : quad) v += t.value() * x[t.row()] * x[t.col()];
    return v;
  }
  bool is_linear() const { return quad.empty(); }
};

enum class Sense { Eq, Le };

struct QuadCon {
  QuadExpr expr;  // expr = 0 or expr <= 0
  Sense sense = Sense::Le;
  std::string name;
};

// min obj(x) s.t. constraints, lb <= x <= ub. All expressions at most quadratic,
// so first derivatives are exact affine functions and Hessians are constant.
struct QcProblem {
  int n = 0;
  VecX lb, ub, x0;
  QuadExpr objective;
  std::vector<QuadCon> constraints;
  std::string name;

  int add_var(double l = -kInf, double u = kInf, double start = 0.0) {
    lb.conservativeResize(n + 1);
    ub.conservativeResize(n + 1);
    x0.conservativeResize(n + 1);
    lb[n] = l;
    ub[n] = u;
    x0[n] = start;
    return n++;
  }
  int eq_count() const {
    int m = 0;
    for (auto& c : constraints)
      if (c.sense == Sense::Eq) ++m;
    return m;
  }
};

// Adapter to the generic solver interface (exact derivatives).
NlpProblem make_nlp(const QcProblem& qc);

}  // namespace rtep
