#include "rtep/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseLU>

namespace rtep {

namespace {

// Bounded-variable revised simplex. One logical column per row keeps the
// initial basis trivially nonsingular; phase 1 minimizes the total bound
// violation of the basic variables with the usual pricing machinery.
class Simplex {
 public:
  Simplex(const LpProblem& p, const LpOptions& opts) : p_(p), opts_(opts) {
    m_ = p.rows();
    n_ = p.cols();
    ncols_ = n_ + m_;
    clo_.resize(ncols_);
    cup_.resize(ncols_);
    for (int j = 0; j < n_; ++j) {
      clo_[j] = opts.lb_override ? (*opts.lb_override)[j] : p.lb[j];
      cup_[j] = opts.ub_override ? (*opts.ub_override)[j] : p.ub[j];
    }
    for (int i = 0; i < m_; ++i) {
      if (p.sense[i] == 'L') {
        clo_[n_ + i] = 0.0;
        cup_[n_ + i] = kInf;
      } else {
        clo_[n_ + i] = 0.0;
        cup_[n_ + i] = 0.0;
      }
    }
    cost_ = VecX::Zero(ncols_);
    cost_.head(n_) = p.c;
    max_iter_ = opts.max_iter > 0 ? opts.max_iter : 20000 + 40 * ncols_;
  }

  LpSolution run(SimplexState* io_state) {
    LpSolution sol;
    init_basis(io_state);
    refactorize();
    compute_basic_values();

    phase_ = 1;
    LpStatus st = iterate();
    if (st == LpStatus::IterLimit) return finish(sol, st, io_state);
    if (infeasibility() > feas_tol()) return finish(sol, LpStatus::Infeasible, io_state);

    phase_ = 2;
    st = iterate();
    return finish(sol, st == LpStatus::Optimal ? LpStatus::Optimal : st, io_state);
  }

 private:
  const LpProblem& p_;
  const LpOptions& opts_;
  int m_, n_, ncols_;
  std::vector<double> clo_, cup_;
  VecX cost_;
  int max_iter_ = 0;
  int phase_ = 1;
  int iters_ = 0;
  bool bland_ = false;
  int stall_ = 0;
  double last_measure_ = kInf;

  std::vector<int> basic_;          // size m
  std::vector<VarState> state_;     // size ncols
  std::vector<int> pos_in_basis_;   // ncols, -1 if nonbasic
  VecX xb_;                         // basic values
  Eigen::SparseLU<SpMat> lu_;
  struct Eta {
    int r;
    std::vector<std::pair<int, double>> w;
    double wr;
  };
  std::vector<Eta> etas_;

  double feas_tol() const { return opts_.tol_primal * 1e3; }

  double nb_value(int j) const {
    switch (state_[j]) {
      case VarState::AtLower: return clo_[j];
      case VarState::AtUpper: return cup_[j];
      default: return 0.0;  // free nonbasic
    }
  }

  void init_basis(SimplexState* io_state) {
    state_.assign(ncols_, VarState::AtLower);
    basic_.resize(m_);
    pos_in_basis_.assign(ncols_, -1);
    bool ok = false;
    if (io_state && io_state->valid() &&
        static_cast<int>(io_state->state.size()) == ncols_ &&
        static_cast<int>(io_state->basic.size()) == m_) {
      basic_ = io_state->basic;
      state_ = io_state->state;
      ok = true;
      std::vector<char> seen(ncols_, 0);
      for (int i = 0; i < m_; ++i) {
        int j = basic_[i];
        if (j < 0 || j >= ncols_ || seen[j]) {
          ok = false;
          break;
        }
        seen[j] = 1;
      }
    }
    if (!ok) {
      for (int i = 0; i < m_; ++i) basic_[i] = n_ + i;
      for (int j = 0; j < ncols_; ++j) {
        if (std::isfinite(clo_[j]))
          state_[j] = VarState::AtLower;
        else if (std::isfinite(cup_[j]))
          state_[j] = VarState::AtUpper;
        else
          state_[j] = VarState::FreeNB;
      }
    }
    for (int i = 0; i < m_; ++i) {
      state_[basic_[i]] = VarState::Basic;
      pos_in_basis_[basic_[i]] = i;
    }
    // Nonbasic variables must sit on a finite bound if they have one.
    for (int j = 0; j < ncols_; ++j) {
      if (state_[j] == VarState::Basic) continue;
      if (state_[j] == VarState::AtLower && !std::isfinite(clo_[j]))
        state_[j] = std::isfinite(cup_[j]) ? VarState::AtUpper : VarState::FreeNB;
      else if (state_[j] == VarState::AtUpper && !std::isfinite(cup_[j]))
        state_[j] = std::isfinite(clo_[j]) ? VarState::AtLower : VarState::FreeNB;
    }
  }

  SpMat basis_matrix() const {
    std::vector<Triplet> tr;
    for (int i = 0; i < m_; ++i) {
      int j = basic_[i];
      if (j >= n_) {
        tr.emplace_back(j - n_, i, 1.0);
      } else {
        for (SpMat::InnerIterator it(p_.A, j); it; ++it)
          tr.emplace_back(static_cast<int>(it.row()), i, it.value());
      }
    }
    SpMat b(m_, m_);
    b.setFromTriplets(tr.begin(), tr.end());
    return b;
  }

  bool refactorize() {
    etas_.clear();
    SpMat b = basis_matrix();
    lu_.compute(b);
    return lu_.info() == Eigen::Success;
  }

  VecX col(int j) const {
    VecX a = VecX::Zero(m_);
    if (j >= n_) {
      a[j - n_] = 1.0;
    } else {
      for (SpMat::InnerIterator it(p_.A, j); it; ++it) a[it.row()] = it.value();
    }
    return a;
  }

  VecX ftran(const VecX& a) {
    VecX v = lu_.solve(a);
    for (const auto& e : etas_) {
      double vr = v[e.r] / e.wr;
      if (vr != 0.0)
        for (auto& [i, wi] : e.w) v[i] -= wi * vr;
      v[e.r] = vr;
    }
    return v;
  }

  // Solving E^T u = v only rewrites entry r: u_r = (v_r - sum_{i!=r} w_i v_i) / w_r.
  VecX btran(const VecX& c) {
    VecX v = c;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double sum = 0.0;
      for (auto& [i, wi] : it->w) sum += wi * v[i];
      v[it->r] = (v[it->r] - sum) / it->wr;
    }
    return lu_.transpose().solve(v);
  }

  void compute_basic_values() {
    VecX b = p_.rhs;
    for (int j = 0; j < ncols_; ++j) {
      if (state_[j] == VarState::Basic) continue;
      double v = nb_value(j);
      if (v == 0.0) continue;
      if (j >= n_) {
        b[j - n_] -= v;
      } else {
        for (SpMat::InnerIterator it(p_.A, j); it; ++it) b[it.row()] -= it.value() * v;
      }
    }
    xb_ = ftran(b);
  }

  double infeasibility() const {
    double s = 0;
    for (int i = 0; i < m_; ++i) {
      int j = basic_[i];
      if (xb_[i] > cup_[j]) s += xb_[i] - cup_[j];
      if (xb_[i] < clo_[j]) s += clo_[j] - xb_[i];
    }
    return s;
  }

  // Basic-cost vector for the current phase.
  VecX basic_costs() const {
    VecX cb(m_);
    for (int i = 0; i < m_; ++i) {
      int j = basic_[i];
      if (phase_ == 1) {
        if (xb_[i] > cup_[j] + opts_.tol_primal)
          cb[i] = 1.0;
        else if (xb_[i] < clo_[j] - opts_.tol_primal)
          cb[i] = -1.0;
        else
          cb[i] = 0.0;
      } else {
        cb[i] = cost_[j];
      }
    }
    return cb;
  }

  double reduced_cost(int j, const VecX& pi) const {
    double cj = phase_ == 1 ? 0.0 : cost_[j];
    if (j >= n_) return cj - pi[j - n_];
    double d = cj;
    for (SpMat::InnerIterator it(p_.A, j); it; ++it) d -= it.value() * pi[it.row()];
    return d;
  }

  LpStatus iterate() {
    int since_refactor = 0;
    while (true) {
      if (iters_++ > max_iter_) return LpStatus::IterLimit;
      if (since_refactor > 100 || static_cast<int>(etas_.size()) > 120) {
        if (!refactorize()) return LpStatus::IterLimit;
        compute_basic_values();
        since_refactor = 0;
      }
      if (phase_ == 1 && infeasibility() <= opts_.tol_primal) return LpStatus::Optimal;

      VecX pi = btran(basic_costs());

      // Pricing: Dantzig by default, Bland once stalling is detected.
      int enter = -1, dir = 0;
      double best = opts_.tol_dual;
      for (int j = 0; j < ncols_; ++j) {
        if (state_[j] == VarState::Basic) continue;
        if (cup_[j] - clo_[j] <= 0.0) continue;  // fixed column never enters
        double d = reduced_cost(j, pi);
        int s = 0;
        if (state_[j] == VarState::AtLower && d < -opts_.tol_dual) s = 1;
        else if (state_[j] == VarState::AtUpper && d > opts_.tol_dual) s = -1;
        else if (state_[j] == VarState::FreeNB && std::abs(d) > opts_.tol_dual)
          s = d < 0 ? 1 : -1;
        if (!s) continue;
        if (bland_) {
          enter = j;
          dir = s;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          enter = j;
          dir = s;
        }
      }
      if (enter < 0) {
        if (phase_ == 1) return infeasibility() <= feas_tol() ? LpStatus::Optimal
                                                              : LpStatus::Infeasible;
        return LpStatus::Optimal;
      }

      VecX w = ftran(col(enter));

      // Ratio test. Basic i moves as xb_i - dir*t*w_i; in phase 1 an
      // infeasible basic blocks at the bound it currently violates.
      double tmax = cup_[enter] - clo_[enter];  // own range (may be +inf)
      int leave = -1;
      double leave_pivot = 0.0;
      int leave_bound = 0;  // -1 lower, +1 upper
      for (int i = 0; i < m_; ++i) {
        double wi = dir * w[i];
        if (std::abs(wi) < 1e-11) continue;
        int j = basic_[i];
        double t;
        int bound;
        if (wi > 0) {  // decreasing
          double target;
          if (phase_ == 1 && xb_[i] > cup_[j] + opts_.tol_primal) target = cup_[j], bound = +1;
          else if (std::isfinite(clo_[j])) target = clo_[j], bound = -1;
          else continue;
          t = (xb_[i] - target) / wi;
        } else {  // increasing
          double target;
          if (phase_ == 1 && xb_[i] < clo_[j] - opts_.tol_primal) target = clo_[j], bound = -1;
          else if (std::isfinite(cup_[j])) target = cup_[j], bound = +1;
          else continue;
          t = (xb_[i] - target) / wi;
        }
        if (t < -opts_.tol_primal) t = 0.0;
        t = std::max(t, 0.0);
        if (t < tmax - 1e-12 ||
            (t < tmax + 1e-12 && leave >= 0 && std::abs(wi) > std::abs(leave_pivot))) {
          tmax = t;
          leave = i;
          leave_pivot = wi;
          leave_bound = bound;
        }
      }

      if (!std::isfinite(tmax)) {
        return phase_ == 1 ? LpStatus::IterLimit : LpStatus::Unbounded;
      }

      // Stall detection drives the Bland fallback (anti-cycling).
      double measure = phase_ == 1 ? infeasibility() : current_objective();
      if (measure < last_measure_ - 1e-12) {
        stall_ = 0;
        bland_ = false;
      } else if (++stall_ > 2 * (m_ + 50)) {
        bland_ = true;
      }
      last_measure_ = measure;

      if (leave < 0) {
        // Bound-to-bound flip of the entering variable.
        xb_ -= dir * tmax * w;
        state_[enter] = dir > 0 ? VarState::AtUpper : VarState::AtLower;
        continue;
      }

      double enter_val = nb_value(enter) + dir * tmax;
      xb_ -= dir * tmax * w;
      int out = basic_[leave];
      state_[out] = leave_bound < 0 ? VarState::AtLower : VarState::AtUpper;
      if (!std::isfinite(leave_bound < 0 ? clo_[out] : cup_[out]))
        state_[out] = VarState::FreeNB;
      pos_in_basis_[out] = -1;
      basic_[leave] = enter;
      state_[enter] = VarState::Basic;
      pos_in_basis_[enter] = leave;
      xb_[leave] = enter_val;

      Eta e;
      e.r = leave;
      e.wr = w[leave];
      if (std::abs(e.wr) < 1e-12) {
        if (!refactorize()) return LpStatus::IterLimit;
        compute_basic_values();
        since_refactor = 0;
        continue;
      }
      for (int i = 0; i < m_; ++i)
        if (i != leave && w[i] != 0.0) e.w.emplace_back(i, w[i]);
      etas_.push_back(std::move(e));
      ++since_refactor;
    }
  }

  double current_objective() const {
    double v = 0;
    for (int i = 0; i < m_; ++i) v += cost_[basic_[i]] * xb_[i];
    for (int j = 0; j < ncols_; ++j)
      if (state_[j] != VarState::Basic) v += cost_[j] * nb_value(j);
    return v;
  }

  LpSolution finish(LpSolution& sol, LpStatus st, SimplexState* io_state) {
    sol.status = st;
    sol.iterations = iters_;
    sol.x = VecX::Zero(n_);
    for (int j = 0; j < n_; ++j)
      sol.x[j] = state_[j] == VarState::Basic ? xb_[pos_in_basis_[j]] : nb_value(j);
    phase_ = 2;
    VecX pi = btran(basic_costs());
    sol.y = pi;
    sol.reduced_costs = VecX::Zero(n_);
    for (int j = 0; j < n_; ++j) sol.reduced_costs[j] = reduced_cost(j, pi);
    sol.objective = p_.c.dot(sol.x);
    if (io_state) {
      io_state->basic = basic_;
      io_state->state = state_;
    }
    return sol;
  }
};

}  // namespace

LpSolution lp_solve(const LpProblem& p, const LpOptions& opts) {
  Simplex s(p, opts);
  return s.run(nullptr);
}

LpSolution lp_solve_warm(const LpProblem& p, SimplexState* state, const LpOptions& opts) {
  Simplex s(p, opts);
  return s.run(state);
}

}  // namespace rtep
