#include "rtep/qcmodel.hpp"

#include <memory>

namespace rtep {

namespace {

// Constraint rows split by sense, with the original order preserved inside
// each group so multipliers can be mapped back if needed.
struct Split {
  std::vector<const QuadCon*> eq, le;
};

VecX expr_grad_accum(const QuadExpr& e, const VecX& x, int n) {
  VecX g = VecX::Zero(n);
  for (auto& [i, a] : e.lin) g[i] += a;
  for (auto& t : e.quad) {
    g[t.row()] += t.value() * x[t.col()];
    g[t.col()] += t.value() * x[t.row()];
  }
  return g;
}

void expr_jac_rows(const QuadExpr& e, const VecX& x, int row, std::vector<Triplet>& out) {
  for (auto& [i, a] : e.lin) out.emplace_back(row, i, a);
  for (auto& t : e.quad) {
    out.emplace_back(row, t.row(), t.value() * x[t.col()]);
    out.emplace_back(row, t.col(), t.value() * x[t.row()]);
  }
}

void expr_hess(const QuadExpr& e, double w, std::vector<Triplet>& out) {
  for (auto& t : e.quad) {
    out.emplace_back(t.row(), t.col(), w * t.value());
    out.emplace_back(t.col(), t.row(), w * t.value());
  }
}

}  // namespace

NlpProblem make_nlp(const QcProblem& qc) {
  auto model = std::make_shared<QcProblem>(qc);
  auto split = std::make_shared<Split>();
  for (auto& c : model->constraints)
    (c.sense == Sense::Eq ? split->eq : split->le).push_back(&c);

  NlpProblem p;
  p.n = model->n;
  p.m_eq = static_cast<int>(split->eq.size());
  p.m_ineq = static_cast<int>(split->le.size());
  p.lb = model->lb;
  p.ub = model->ub;
  p.x0 = model->x0;
  p.name = model->name;

  p.objective = [model](const VecX& x) { return model->objective.value(x); };
  p.gradient = [model](const VecX& x) { return expr_grad_accum(model->objective, x, model->n); };
  p.eq_residual = [model, split](const VecX& x) {
    VecX r(split->eq.size());
    for (size_t i = 0; i < split->eq.size(); ++i) r[i] = split->eq[i]->expr.value(x);
    return r;
  };
  p.eq_jacobian = [model, split](const VecX& x) {
    std::vector<Triplet> tr;
    for (size_t i = 0; i < split->eq.size(); ++i)
      expr_jac_rows(split->eq[i]->expr, x, static_cast<int>(i), tr);
    SpMat j(split->eq.size(), model->n);
    j.setFromTriplets(tr.begin(), tr.end());
    return j;
  };
  p.ineq_residual = [model, split](const VecX& x) {
    VecX r(split->le.size());
    for (size_t i = 0; i < split->le.size(); ++i) r[i] = split->le[i]->expr.value(x);
    return r;
  };
  p.ineq_jacobian = [model, split](const VecX& x) {
    std::vector<Triplet> tr;
    for (size_t i = 0; i < split->le.size(); ++i)
      expr_jac_rows(split->le[i]->expr, x, static_cast<int>(i), tr);
    SpMat j(split->le.size(), model->n);
    j.setFromTriplets(tr.begin(), tr.end());
    return j;
  };
  p.lagrangian_hessian = [model, split](const VecX&, double sf, const VecX& lam,
                                        const VecX& mu) {
    std::vector<Triplet> tr;
    expr_hess(model->objective, sf, tr);
    for (size_t i = 0; i < split->eq.size(); ++i)
      if (lam[static_cast<int>(i)] != 0.0) expr_hess(split->eq[i]->expr, lam[i], tr);
    for (size_t i = 0; i < split->le.size(); ++i)
      if (mu[static_cast<int>(i)] != 0.0) expr_hess(split->le[i]->expr, mu[i], tr);
    SpMat hh(model->n, model->n);
    hh.setFromTriplets(tr.begin(), tr.end());
    return hh;
  };
  return p;
}

}  // namespace rtep
