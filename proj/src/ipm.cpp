#include "rtep/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/SparseCholesky>

namespace rtep {

namespace {

struct BoundRows {
  std::vector<int> ub_var;  // h-row: x_i - ub_i <= 0
  std::vector<int> lb_var;  // h-row: lb_i - x_i <= 0
};

BoundRows collect_bound_rows(const NlpProblem& p) {
  BoundRows br;
  if (p.ub.size() == p.n)
    for (int i = 0; i < p.n; ++i)
      if (std::isfinite(p.ub[i])) br.ub_var.push_back(i);
  if (p.lb.size() == p.n)
    for (int i = 0; i < p.n; ++i)
      if (std::isfinite(p.lb[i])) br.lb_var.push_back(i);
  return br;
}

// Inequality residual with bound rows appended after the user rows.
VecX eval_h_full(const NlpProblem& p, const BoundRows& br, const VecX& x) {
  VecX h(p.m_ineq + br.ub_var.size() + br.lb_var.size());
  if (p.m_ineq > 0) h.head(p.m_ineq) = p.ineq_residual(x);
  int r = p.m_ineq;
  for (int i : br.ub_var) h[r++] = x[i] - p.ub[i];
  for (int i : br.lb_var) h[r++] = p.lb[i] - x[i];
  return h;
}

SpMat eval_jh_full(const NlpProblem& p, const BoundRows& br, const VecX& x) {
  const int mi = p.m_ineq + static_cast<int>(br.ub_var.size() + br.lb_var.size());
  std::vector<Triplet> tr;
  if (p.m_ineq > 0) {
    SpMat ju = p.ineq_jacobian(x);
    tr.reserve(ju.nonZeros() + br.ub_var.size() + br.lb_var.size());
    for (int k = 0; k < ju.outerSize(); ++k)
      for (SpMat::InnerIterator it(ju, k); it; ++it)
        tr.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  }
  int r = p.m_ineq;
  for (int i : br.ub_var) tr.emplace_back(r++, i, 1.0);
  for (int i : br.lb_var) tr.emplace_back(r++, i, -1.0);
  SpMat jh(mi, p.n);
  jh.setFromTriplets(tr.begin(), tr.end());
  return jh;
}

double frac_to_boundary(const VecX& v, const VecX& dv, double tau) {
  double a = 1.0;
  for (int i = 0; i < v.size(); ++i)
    if (dv[i] < 0) a = std::min(a, -tau * v[i] / dv[i]);
  return a;
}

struct Residuals {
  double feascond, gradcond, compcond;
  double worst() const { return std::max(feascond, std::max(gradcond, compcond)); }
};

Residuals conditions(const VecX& x, const VecX& z, const VecX& lam, const VecX& mu,
                     const VecX& g, const VecX& h, const VecX& rstat) {
  Residuals r;
  double prim = 0.0;
  if (g.size()) prim = g.lpNorm<Eigen::Infinity>();
  if (h.size()) prim = std::max(prim, h.maxCoeff());
  const double xz = std::max(x.size() ? x.lpNorm<Eigen::Infinity>() : 0.0,
                             z.size() ? z.lpNorm<Eigen::Infinity>() : 0.0);
  r.feascond = prim / (1.0 + xz);
  double dual = std::max(lam.size() ? lam.lpNorm<Eigen::Infinity>() : 0.0,
                         mu.size() ? mu.lpNorm<Eigen::Infinity>() : 0.0);
  r.gradcond = rstat.lpNorm<Eigen::Infinity>() / (1.0 + dual);
  r.compcond = h.size()
                   ? (z.dot(mu) / static_cast<double>(z.size())) / (1.0 + x.lpNorm<Eigen::Infinity>())
                   : 0.0;
  return r;
}

}  // namespace

NlpSolution pdipm_solve(const NlpProblem& p, const IpmOptions& opts) {
  const int n = p.n;
  const int me = p.m_eq;
  const BoundRows br = collect_bound_rows(p);
  const int mi = p.m_ineq + static_cast<int>(br.ub_var.size() + br.lb_var.size());
  const bool verbose = opts.verbose || log_level() >= 2;

  NlpSolution sol;
  VecX x = p.x0.size() == n ? p.x0 : VecX::Zero(n);
  // Start inside the box; infeasibility elsewhere is absorbed by the slacks.
  if (p.lb.size() == n && p.ub.size() == n)
    for (int i = 0; i < n; ++i) x[i] = std::min(std::max(x[i], p.lb[i]), p.ub[i]);

  VecX h = eval_h_full(p, br, x);
  VecX z(mi), mu(mi);
  for (int i = 0; i < mi; ++i) {
    z[i] = std::min(std::max(1.0, -h[i]), 1e4);
    mu[i] = 1.0 / z[i];
  }
  VecX lam = VecX::Zero(me);

  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
  double delta_last = 0.0;
  int bad_steps = 0;
  double prev_obj = kInf;

  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    const double f = p.objective(x);
    VecX grad = p.gradient(x);
    VecX g = me > 0 ? p.eq_residual(x) : VecX(0);
    SpMat jg = me > 0 ? p.eq_jacobian(x) : SpMat(0, n);
    h = eval_h_full(p, br, x);
    SpMat jh = eval_jh_full(p, br, x);

    VecX rstat = grad;
    if (me > 0) rstat += jg.transpose() * lam;
    if (mi > 0) rstat += jh.transpose() * mu;
    Residuals rc = conditions(x, z, lam, mu, g, h, rstat);

    if (verbose)
      log_msg(0, "  ipm[%s] it %3d  f=% .8e  feas=%.2e grad=%.2e comp=%.2e",
              p.name.c_str(), iter, f, rc.feascond, rc.gradcond, rc.compcond);

    if (rc.feascond < opts.tol && rc.gradcond < opts.tol && rc.compcond < opts.tol) {
      sol.status = NlpStatus::Converged;
      sol.iterations = iter;
      break;
    }
    if (iter == opts.max_iter) {
      sol.status = NlpStatus::MaxIterations;
      sol.iterations = iter;
      sol.message = "iteration limit reached";
      break;
    }
    if (!std::isfinite(f) || !std::isfinite(rc.worst()) ||
        x.lpNorm<Eigen::Infinity>() > 1e14) {
      sol.status = NlpStatus::NumericalFailure;
      sol.iterations = iter;
      sol.message = "diverged to non-finite iterates";
      break;
    }

    // Reduced KKT matrix: [ H + Jh' (mu/z) Jh + dx*I   Jg' ; Jg   -dc*I ].
    VecX sigma = mi > 0 ? VecX((mu.array() / z.array()).matrix()) : VecX(0);
    SpMat hess;
    if (p.lagrangian_hessian) {
      hess = p.lagrangian_hessian(x, 1.0, lam, mu.head(p.m_ineq));
    } else {
      hess = SpMat(n, n);
    }
    std::vector<Triplet> ktr;
    ktr.reserve(hess.nonZeros() + 2 * jg.nonZeros() + 8 * jh.nonZeros() + n + me);
    for (int k = 0; k < hess.outerSize(); ++k)
      for (SpMat::InnerIterator it(hess, k); it; ++it)
        ktr.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    if (mi > 0) {
      SpMat jhs = SpMat(jh.transpose()) * SpMat(sigma.asDiagonal()) * jh;
      for (int k = 0; k < jhs.outerSize(); ++k)
        for (SpMat::InnerIterator it(jhs, k); it; ++it)
          ktr.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
    for (int k = 0; k < jg.outerSize(); ++k)
      for (SpMat::InnerIterator it(jg, k); it; ++it) {
        ktr.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        ktr.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()), it.value());
      }
    const double delta_c = 1e-11;
    for (int i = 0; i < me; ++i) ktr.emplace_back(n + i, n + i, -delta_c);

    // Inertia-correcting primal regularization.
    double delta_x = 0.0;
    bool factored = false;
    for (int attempt = 0; attempt < 40 && !factored; ++attempt) {
      std::vector<Triplet> full = ktr;
      for (int i = 0; i < n; ++i) full.emplace_back(i, i, delta_x);
      SpMat kkt(n + me, n + me);
      kkt.setFromTriplets(full.begin(), full.end());
      ldlt.compute(kkt);
      if (ldlt.info() == Eigen::Success) {
        const VecX& d = ldlt.vectorD();
        int negs = 0;
        bool bad = false;
        for (int i = 0; i < d.size(); ++i) {
          if (!std::isfinite(d[i]) || std::abs(d[i]) < 1e-30) bad = true;
          if (d[i] < 0) ++negs;
        }
        if (!bad && negs == me) {
          factored = true;
          break;
        }
      }
      delta_x = delta_x == 0.0 ? std::max(1e-10, delta_last / 3.0) : delta_x * 10.0;
      if (delta_x > 1e12) break;
    }
    if (!factored) {
      sol.status = NlpStatus::NumericalFailure;
      sol.iterations = iter;
      sol.message = "KKT factorization failed after regularization";
      break;
    }
    if (delta_x > 0) delta_last = delta_x;

    VecX hz = mi > 0 ? VecX(h + z) : VecX(0);
    auto solve_kkt = [&](const VecX& gamma_vec) {
      // gamma_vec holds (gamma*e - d_corr) in the complementarity residual.
      VecX rhs(n + me);
      VecX rx = grad;
      if (me > 0) rx += jg.transpose() * lam;
      if (mi > 0)
        rx += jh.transpose() * VecX(((gamma_vec + mu.cwiseProduct(hz)).array() / z.array()).matrix());
      rhs.head(n) = -rx;
      if (me > 0) rhs.tail(me) = -g;
      VecX dxl = ldlt.solve(rhs);
      return dxl;
    };
    auto expand = [&](const VecX& dxl, const VecX& gamma_vec, VecX& dz, VecX& dmu) {
      if (mi == 0) return;
      dz = -hz - jh * dxl.head(n);
      dmu = VecX(((gamma_vec - mu.cwiseProduct(dz)).array() / z.array()).matrix()) - mu;
    };

    VecX dxl, dz(mi), dmu(mi);
    double gamma = 0.0;
    if (mi > 0 && opts.predictor_corrector) {
      // Affine predictor.
      VecX zero_gam = VecX::Zero(mi);
      VecX dxl_a = solve_kkt(zero_gam);
      VecX dz_a(mi), dmu_a(mi);
      expand(dxl_a, zero_gam, dz_a, dmu_a);
      const double ap = frac_to_boundary(z, dz_a, 1.0);
      const double ad = frac_to_boundary(mu, dmu_a, 1.0);
      const double mu_mean = z.dot(mu) / mi;
      const double mu_aff = (z + ap * dz_a).dot(mu + ad * dmu_a) / mi;
      double sig = std::pow(std::max(mu_aff, 0.0) / mu_mean, 3.0);
      sig = std::min(std::max(sig, opts.sigma_min), opts.sigma_max);
      gamma = sig * mu_mean;
      VecX gv = VecX::Constant(mi, gamma) - dz_a.cwiseProduct(dmu_a);
      dxl = solve_kkt(gv);
      expand(dxl, gv, dz, dmu);
    } else {
      if (mi > 0) gamma = 0.1 * z.dot(mu) / mi;
      VecX gv = VecX::Constant(mi, gamma);
      dxl = solve_kkt(gv);
      expand(dxl, gv, dz, dmu);
    }

    double ap = mi > 0 ? frac_to_boundary(z, dz, opts.tau) : 1.0;
    double ad = mi > 0 ? frac_to_boundary(mu, dmu, opts.tau) : 1.0;

    // Catastrophic-step guard: shrink if the KKT error explodes.
    const double cur = rc.worst();
    double scale = 1.0;
    for (int t = 0; t < 6; ++t) {
      VecX xt = x + scale * ap * dxl.head(n);
      VecX gt = me > 0 ? p.eq_residual(xt) : VecX(0);
      VecX ht = eval_h_full(p, br, xt);
      bool finite_ok = std::isfinite(p.objective(xt)) &&
                       (!gt.size() || gt.allFinite()) && (!ht.size() || ht.allFinite());
      if (finite_ok) {
        double prim = gt.size() ? gt.lpNorm<Eigen::Infinity>() : 0.0;
        if (ht.size()) prim = std::max(prim, ht.maxCoeff());
        if (prim < std::max(1e3 * (1.0 + cur), 1e6) || scale <= 0.1) break;
      } else if (scale <= 1e-3) {
        break;
      }
      scale *= 0.5;
    }
    ap *= scale;

    x += ap * dxl.head(n);
    if (mi > 0) {
      z += ap * dz;
      mu += ad * dmu;
    }
    if (me > 0) lam += ad * dxl.tail(me);

    if (ap < 1e-12 && ad < 1e-12) {
      if (++bad_steps >= 8) {
        sol.status = NlpStatus::NumericalFailure;
        sol.iterations = iter;
        sol.message = "step sizes collapsed";
        break;
      }
    } else {
      bad_steps = 0;
    }
    prev_obj = f;
  }
  (void)prev_obj;

  sol.x = x;
  sol.lam_eq = lam;
  sol.mu_ineq = mu.head(p.m_ineq);
  sol.mu_ub = VecX::Zero(n);
  sol.mu_lb = VecX::Zero(n);
  {
    int r = p.m_ineq;
    for (int i : br.ub_var) sol.mu_ub[i] = mu[r++];
    for (int i : br.lb_var) sol.mu_lb[i] = mu[r++];
  }
  sol.objective = p.objective(x);
  sol.kkt = check_kkt(p, x, sol.lam_eq, sol.mu_ineq, sol.mu_lb, sol.mu_ub);
  return sol;
}

KktResiduals check_kkt(const NlpProblem& p, const VecX& x, const VecX& lam_eq,
                       const VecX& mu_ineq, const VecX& mu_lb, const VecX& mu_ub) {
  const BoundRows br = collect_bound_rows(p);
  KktResiduals r;
  VecX rstat = p.gradient(x);
  VecX g = p.m_eq > 0 ? p.eq_residual(x) : VecX(0);
  if (p.m_eq > 0) rstat += p.eq_jacobian(x).transpose() * lam_eq;
  VecX hu = p.m_ineq > 0 ? p.ineq_residual(x) : VecX(0);
  if (p.m_ineq > 0) rstat += p.ineq_jacobian(x).transpose() * mu_ineq;
  if (mu_ub.size() == p.n) rstat += mu_ub;
  if (mu_lb.size() == p.n) rstat -= mu_lb;

  double dual = std::max({lam_eq.size() ? lam_eq.lpNorm<Eigen::Infinity>() : 0.0,
                          mu_ineq.size() ? mu_ineq.lpNorm<Eigen::Infinity>() : 0.0,
                          mu_lb.size() ? mu_lb.lpNorm<Eigen::Infinity>() : 0.0,
                          mu_ub.size() ? mu_ub.lpNorm<Eigen::Infinity>() : 0.0});
  r.stationarity = rstat.lpNorm<Eigen::Infinity>() / (1.0 + dual);

  double prim = g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0;
  if (hu.size()) prim = std::max(prim, hu.maxCoeff());
  double comp = 0.0;
  for (int i = 0; i < hu.size(); ++i) comp = std::max(comp, std::abs(mu_ineq[i] * hu[i]));
  if (p.ub.size() == p.n && mu_ub.size() == p.n)
    for (int i : br.ub_var) {
      prim = std::max(prim, x[i] - p.ub[i]);
      comp = std::max(comp, std::abs(mu_ub[i] * (x[i] - p.ub[i])));
    }
  if (p.lb.size() == p.n && mu_lb.size() == p.n)
    for (int i : br.lb_var) {
      prim = std::max(prim, p.lb[i] - x[i]);
      comp = std::max(comp, std::abs(mu_lb[i] * (p.lb[i] - x[i])));
    }
  const double xn = x.lpNorm<Eigen::Infinity>();
  r.feasibility = prim / (1.0 + xn);
  r.complementarity = comp / (1.0 + xn);
  return r;
}

}  // namespace rtep
