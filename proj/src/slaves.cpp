#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "rtep/benders.hpp"
#include "rtep/qcmodel.hpp"

namespace rtep {

namespace {

// Fixed-plan slaves are solved in a reduced space: candidate lines that are
// not installed contribute only slack rows whose optimal duals are zero, and
// corridors with no circuits at all are dark. Solutions are zero-extended
// back to the full row/column spaces, which keeps them feasible for the
// plan-independent dual feasible set (the basis of cut validity).
struct Reduction {
  std::vector<int> line_map, corr_map, ys_map;  // full index -> reduced or -1
  std::vector<int> lines, corrs, ys;            // reduced -> full
  std::vector<int> tg_rows;                     // kept TG rows (full indices)
  int n_lines = 0, n_corrs = 0, n_ys = 0, n_tg = 0;
};

Reduction reduce_for_plan(const CompactRobustModel& m, const TepPlan& plan) {
  const VariableSpace& v = m.vars;
  Reduction red;
  red.line_map.assign(v.nl, -1);
  red.corr_map.assign(v.nc, -1);
  red.ys_map.assign(v.n_ys(), -1);

  std::vector<int> installed(v.nc, 0);
  for (int l = 0; l < v.nl; ++l)
    if (plan.y_m[l]) installed[m.topo.lines[l].corridor]++;

  for (int l = 0; l < v.nl; ++l)
    if (plan.y_m[l]) {
      red.line_map[l] = static_cast<int>(red.lines.size());
      red.lines.push_back(l);
    }
  for (int c = 0; c < v.nc; ++c)
    if (m.topo.corridors[c].n0 > 0 || installed[c] > 0) {
      red.corr_map[c] = static_cast<int>(red.corrs.size());
      red.corrs.push_back(c);
    }

  auto keep = [&](int col) {
    red.ys_map[col] = static_cast<int>(red.ys.size());
    red.ys.push_back(col);
  };
  for (int i = 0; i < v.nb; ++i) keep(v.c_ii(i));
  for (int c = 0; c < v.nc; ++c)
    if (red.corr_map[c] >= 0) keep(v.c_ij(c));
  for (int c = 0; c < v.nc; ++c)
    if (red.corr_map[c] >= 0) keep(v.s_ij(c));
  for (int i = 0; i < v.nb; ++i) keep(v.theta(i));
  for (int g = 0; g < v.ng; ++g) keep(v.p_g(g));
  for (int g = 0; g < v.ng; ++g) keep(v.q_g(g));
  for (int i = 0; i < v.nb; ++i) keep(v.cp_d(i));
  for (int i = 0; i < v.nb; ++i) keep(v.cp_r(i));
  for (int l = 0; l < v.nl; ++l)
    if (plan.y_m[l]) {
      keep(v.fp_s(l));
      keep(v.fp_r(l));
      keep(v.fq_s(l));
      keep(v.fq_r(l));
    }

  // 18 consecutive TG rows per candidate line, in line order.
  for (int l = 0; l < v.nl; ++l)
    if (plan.y_m[l])
      for (int k = 0; k < 18; ++k) red.tg_rows.push_back(18 * l + k);

  red.n_lines = static_cast<int>(red.lines.size());
  red.n_corrs = static_cast<int>(red.corrs.size());
  red.n_ys = static_cast<int>(red.ys.size());
  red.n_tg = static_cast<int>(red.tg_rows.size());
  return red;
}

// Rows kept as-is, columns remapped (dropped columns contribute nothing).
SpMat slice_cols(const SpMat& src, const std::vector<int>& col_map, int new_cols) {
  std::vector<Triplet> tr;
  tr.reserve(src.nonZeros());
  for (int k = 0; k < src.outerSize(); ++k)
    for (SpMat::InnerIterator it(src, k); it; ++it) {
      int c = col_map[it.col()];
      if (c >= 0) tr.emplace_back(static_cast<int>(it.row()), c, it.value());
    }
  SpMat out(src.rows(), new_cols);
  out.setFromTriplets(tr.begin(), tr.end());
  return out;
}

SpMat slice_rows_cols(const SpMat& src, const std::vector<int>& rows,
                      const std::vector<int>& col_map, int new_cols) {
  std::vector<int> row_map(src.rows(), -1);
  for (size_t i = 0; i < rows.size(); ++i) row_map[rows[i]] = static_cast<int>(i);
  std::vector<Triplet> tr;
  for (int k = 0; k < src.outerSize(); ++k)
    for (SpMat::InnerIterator it(src, k); it; ++it) {
      int r = row_map[it.row()];
      int c = col_map[it.col()];
      if (r >= 0 && c >= 0) tr.emplace_back(r, c, it.value());
    }
  SpMat out(static_cast<int>(rows.size()), new_cols);
  out.setFromTriplets(tr.begin(), tr.end());
  return out;
}

VecX gather(const VecX& v, const std::vector<int>& idx) {
  VecX out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[static_cast<int>(i)] = v[idx[i]];
  return out;
}

VecX ym_vec(const TepPlan& plan) {
  VecX y(plan.y_m.size());
  for (size_t i = 0; i < plan.y_m.size(); ++i) y[static_cast<int>(i)] = plan.y_m[i];
  return y;
}

void add_row_expr(QuadCon& con, const SpMat& mat, int row, int var_offset) {
  for (int k = 0; k < mat.outerSize(); ++k)
    for (SpMat::InnerIterator it(mat, k); it; ++it)
      if (it.row() == row) con.expr.add_lin(var_offset + static_cast<int>(it.col()), it.value());
}

// Row-major copy once to avoid the quadratic scan above for big blocks.
std::vector<std::vector<std::pair<int, double>>> rows_of(const SpMat& mat) {
  std::vector<std::vector<std::pair<int, double>>> rows(mat.rows());
  for (int k = 0; k < mat.outerSize(); ++k)
    for (SpMat::InnerIterator it(mat, k); it; ++it)
      rows[it.row()].emplace_back(static_cast<int>(it.col()), it.value());
  return rows;
}

}  // namespace

PrimalSlaveSolution solve_primal_slave(const CompactRobustModel& m, const TepPlan& plan,
                                       const VecX& xi, const IpmOptions& opts) {
  const VariableSpace& v = m.vars;
  Reduction red = reduce_for_plan(m, plan);
  const int n_ys = red.n_ys;
  const int n_cone = 4 * red.n_corrs;

  SpMat Gr = slice_rows_cols(m.G, red.tg_rows, red.ys_map, n_ys);
  SpMat Ber = slice_cols(m.B_e, red.ys_map, n_ys);
  SpMat Bier = slice_cols(m.B_ie, red.ys_map, n_ys);
  std::vector<int> urows;
  for (int c : red.corrs)
    for (int k = 0; k < 4; ++k) urows.push_back(4 * c + k);
  SpMat Ur = slice_rows_cols(m.U, urows, red.ys_map, n_ys);

  VecX ym = ym_vec(plan);
  VecX g_rhs = gather(VecX(m.r - m.T * ym), red.tg_rows);
  VecX be_rhs = m.t_e - m.J_e * xi;
  VecX bie_rhs = m.t_ie - m.J_ie * xi;

  QcProblem qc;
  qc.name = "primal-slave[" + m.netcase.name + "]";
  for (int i = 0; i < n_ys + n_cone; ++i) qc.add_var();
  // Start: flat voltage products, mid generation.
  for (int i = 0; i < v.nb; ++i) qc.x0[red.ys_map[v.c_ii(i)]] = 1.0;
  for (int c : red.corrs) qc.x0[red.ys_map[v.c_ij(c)]] = 0.98;
  for (int g = 0; g < v.ng; ++g)
    qc.x0[red.ys_map[v.p_g(g)]] =
        0.5 * (m.netcase.generators[g].p_min + m.netcase.generators[g].p_max);
  for (size_t c = 0; c < red.corrs.size(); ++c) {
    qc.x0[n_ys + 4 * static_cast<int>(c) + 0] = 1.96;
    qc.x0[n_ys + 4 * static_cast<int>(c) + 3] = 2.0;
  }

  auto ber_rows = rows_of(Ber);
  auto bier_rows = rows_of(Bier);
  auto gr_rows = rows_of(Gr);
  auto ur_rows = rows_of(Ur);

  // Equalities: balances then cone links.
  for (int r = 0; r < Ber.rows(); ++r) {
    QuadCon con;
    con.sense = Sense::Eq;
    con.name = m.be_names[r];
    for (auto& [c2, val] : ber_rows[r]) con.expr.add_lin(c2, val);
    con.expr.constant = -be_rhs[r];
    qc.constraints.push_back(std::move(con));
  }
  for (size_t r = 0; r < urows.size(); ++r) {
    QuadCon con;
    con.sense = Sense::Eq;
    con.name = m.ulink_names[urows[r]];
    con.expr.add_lin(n_ys + static_cast<int>(r), 1.0);
    for (auto& [c2, val] : ur_rows[r]) con.expr.add_lin(c2, val);
    qc.constraints.push_back(std::move(con));
  }
  // Inequalities: installed-line rows, shared rows, cones.
  for (int r = 0; r < Gr.rows(); ++r) {
    QuadCon con;
    con.sense = Sense::Le;
    con.name = m.tg_names[red.tg_rows[r]];
    for (auto& [c2, val] : gr_rows[r]) con.expr.add_lin(c2, val);
    con.expr.constant = -g_rhs[r];
    qc.constraints.push_back(std::move(con));
  }
  for (int r = 0; r < Bier.rows(); ++r) {
    QuadCon con;
    con.sense = Sense::Le;
    con.name = m.bie_names[r];
    for (auto& [c2, val] : bier_rows[r]) con.expr.add_lin(c2, val);
    con.expr.constant = -bie_rhs[r];
    qc.constraints.push_back(std::move(con));
  }
  for (int c = 0; c < red.n_corrs; ++c) {
    QuadCon con;
    con.sense = Sense::Le;
    con.name = m.cone_names[red.corrs[c]];
    int base = n_ys + 4 * c;
    con.expr.add_quad(base + 0, base + 0, 1.0);
    con.expr.add_quad(base + 1, base + 1, 1.0);
    con.expr.add_quad(base + 2, base + 2, 1.0);
    con.expr.add_quad(base + 3, base + 3, -1.0);
    qc.constraints.push_back(std::move(con));
  }

  for (int i = 0; i < n_ys; ++i)
    if (m.F_s[red.ys[i]] != 0.0) qc.objective.add_lin(i, m.F_s[red.ys[i]]);
  qc.objective.constant = m.F_c;

  NlpSolution nlp = pdipm_solve(make_nlp(qc), opts);
  if (nlp.status == NlpStatus::NumericalFailure) {
    std::ostringstream os;
    os << "primal slave failed on " << m.netcase.name << ": " << nlp.message
       << " (iter " << nlp.iterations << ", kkt " << nlp.kkt.stationarity << "/"
       << nlp.kkt.feasibility << "/" << nlp.kkt.complementarity << ")";
    throw SolveError(os.str());
  }

  PrimalSlaveSolution out;
  out.status = nlp.status;
  out.kkt = nlp.kkt;
  out.y_s = VecX::Zero(v.n_ys());
  for (int i = 0; i < n_ys; ++i) out.y_s[red.ys[i]] = nlp.x[i];
  out.y_cone = VecX::Zero(v.n_cone());
  for (size_t r = 0; r < urows.size(); ++r) out.y_cone[urows[r]] = nlp.x[n_ys + static_cast<int>(r)];
  out.objective_yr = nlp.objective * m.annualization();

  const int me_be = static_cast<int>(Ber.rows());
  out.lam_sxi = nlp.lam_eq.head(me_be);
  out.lam_cs = VecX::Zero(v.n_cone());
  for (size_t r = 0; r < urows.size(); ++r) out.lam_cs[urows[r]] = nlp.lam_eq[me_be + static_cast<int>(r)];
  out.z_ms = VecX::Zero(m.G.rows());
  for (int r = 0; r < red.n_tg; ++r) out.z_ms[red.tg_rows[r]] = nlp.mu_ineq[r];
  out.z_sxi = nlp.mu_ineq.segment(red.n_tg, m.B_ie.rows());
  out.z_c = VecX::Zero(v.nc);
  for (int c = 0; c < red.n_corrs; ++c)
    out.z_c[red.corrs[c]] = nlp.mu_ineq[red.n_tg + m.B_ie.rows() + c];
  return out;
}

namespace {

// Variable layout of the dual-slave programs (reduced spaces).
struct DualLayout {
  Reduction red;
  int v_zms = 0, v_lam = 0, v_zsxi = 0, v_lamcs = 0, v_zc = 0, v_ycone = 0;
  int v_psip = -1, v_psim = -1, v_u = -1;
  int n = 0;
  int me_be = 0, me_bie = 0;
};

// Builds the dual slave constraints shared by the fixed-xi and worst-case
// forms: stationarity (50), the bilinear cone coupling (51), sign constraints
// and the cone membership rows that make strong duality attainable.
QcProblem build_dual_base(const CompactRobustModel& m, const TepPlan& plan, DualLayout& L,
                          bool worst_case) {
  const VariableSpace& v = m.vars;
  L.red = reduce_for_plan(m, plan);
  const Reduction& red = L.red;
  L.me_be = static_cast<int>(m.B_e.rows());
  L.me_bie = static_cast<int>(m.B_ie.rows());

  QcProblem qc;
  qc.name = std::string(worst_case ? "dual-slave-wc[" : "dual-slave[") + m.netcase.name + "]";
  L.v_zms = qc.n;
  for (int i = 0; i < red.n_tg; ++i) qc.add_var(0.0, kInf, 0.01);
  L.v_lam = qc.n;
  for (int i = 0; i < L.me_be; ++i) qc.add_var(-kInf, kInf, 0.0);
  L.v_zsxi = qc.n;
  for (int i = 0; i < L.me_bie; ++i) qc.add_var(0.0, kInf, 0.01);
  L.v_lamcs = qc.n;
  for (int i = 0; i < 4 * red.n_corrs; ++i)
    qc.add_var(-kInf, kInf, i % 4 == 3 ? 2.0 : 0.0);
  L.v_zc = qc.n;
  for (int i = 0; i < red.n_corrs; ++i) qc.add_var(0.0, kInf, 0.5);
  L.v_ycone = qc.n;
  for (int i = 0; i < 4 * red.n_corrs; ++i)
    qc.add_var(i % 4 == 3 ? 0.0 : -kInf, kInf, i % 4 == 3 ? 2.0 : 0.0);
  const int nxi = m.n_xi();
  if (worst_case) {
    L.v_psip = qc.n;
    for (int i = 0; i < nxi; ++i) qc.add_var(0.0, m.netcase.big_l, 0.5);
    L.v_psim = qc.n;
    for (int i = 0; i < nxi; ++i) qc.add_var(0.0, m.netcase.big_l, 0.5);
    L.v_u = qc.n;
    for (int i = 0; i < nxi; ++i) qc.add_var(-kInf, kInf, 0.0);
  }
  L.n = qc.n;

  SpMat Gr = slice_rows_cols(m.G, red.tg_rows, red.ys_map, red.n_ys);
  SpMat Ber = slice_cols(m.B_e, red.ys_map, red.n_ys);
  SpMat Bier = slice_cols(m.B_ie, red.ys_map, red.n_ys);
  std::vector<int> urows;
  for (int c : red.corrs)
    for (int k = 0; k < 4; ++k) urows.push_back(4 * c + k);
  SpMat Ur = slice_rows_cols(m.U, urows, red.ys_map, red.n_ys);

  // Stationarity (50): one row per kept y_s column.
  SpMat GrT = Gr.transpose(), BerT = Ber.transpose(), BierT = Bier.transpose(),
        UrT = Ur.transpose();
  auto grt = rows_of(GrT), bert = rows_of(BerT), biert = rows_of(BierT), urt = rows_of(UrT);
  for (int col = 0; col < red.n_ys; ++col) {
    QuadCon con;
    con.sense = Sense::Eq;
    con.name = "stat[" + v.ys_name(red.ys[col]) + "] <y_s>";
    for (auto& [r, val] : grt[col]) con.expr.add_lin(L.v_zms + r, val);
    for (auto& [r, val] : bert[col]) con.expr.add_lin(L.v_lam + r, val);
    for (auto& [r, val] : biert[col]) con.expr.add_lin(L.v_zsxi + r, val);
    for (auto& [r, val] : urt[col]) con.expr.add_lin(L.v_lamcs + r, val);
    con.expr.constant = m.F_s[red.ys[col]];
    qc.constraints.push_back(std::move(con));
  }
  // Cone coupling (51): lam_cs + 2 z_c H y_cone = 0 per corridor component.
  for (int c = 0; c < red.n_corrs; ++c) {
    for (int comp = 0; comp < 4; ++comp) {
      QuadCon con;
      con.sense = Sense::Eq;
      con.name = "cone stat[" + m.cone_names[red.corrs[c]] + " D" +
                 std::to_string(comp + 1) + "] <y_cone>";
      con.expr.add_lin(L.v_lamcs + 4 * c + comp, 1.0);
      con.expr.add_quad(L.v_zc + c, L.v_ycone + 4 * c + comp, comp == 3 ? -2.0 : 2.0);
      qc.constraints.push_back(std::move(con));
    }
  }
  // Cone membership of the y_cone block (the full dual keeps the primal cone).
  for (int c = 0; c < red.n_corrs; ++c) {
    QuadCon con;
    con.sense = Sense::Le;
    con.name = "dual cone[" + m.cone_names[red.corrs[c]] + "]";
    int base = L.v_ycone + 4 * c;
    con.expr.add_quad(base + 0, base + 0, 1.0);
    con.expr.add_quad(base + 1, base + 1, 1.0);
    con.expr.add_quad(base + 2, base + 2, 1.0);
    con.expr.add_quad(base + 3, base + 3, -1.0);
    qc.constraints.push_back(std::move(con));
  }
  return qc;
}

// Objective pieces shared by both forms, negated for minimization.
void add_dual_objective_base(QcProblem& qc, const CompactRobustModel& m, const DualLayout& L,
                             const TepPlan& plan) {
  VecX ym = ym_vec(plan);
  VecX tg_rhs = gather(VecX(m.T * ym - m.r), L.red.tg_rows);
  for (int i = 0; i < L.red.n_tg; ++i) qc.objective.add_lin(L.v_zms + i, -tg_rhs[i]);
  for (int i = 0; i < L.me_be; ++i) qc.objective.add_lin(L.v_lam + i, m.t_e[i]);
  for (int i = 0; i < L.me_bie; ++i) qc.objective.add_lin(L.v_zsxi + i, m.t_ie[i]);
  qc.objective.constant = -m.F_c;
}

DualSlaveSolution extract_dual(const CompactRobustModel& m, const DualLayout& L,
                               const NlpSolution& nlp) {
  const Reduction& red = L.red;
  DualSlaveSolution s;
  s.status = nlp.status;
  s.z_ms = VecX::Zero(m.G.rows());
  for (int i = 0; i < red.n_tg; ++i) s.z_ms[red.tg_rows[i]] = nlp.x[L.v_zms + i];
  s.lam_sxi = nlp.x.segment(L.v_lam, L.me_be);
  s.z_sxi = nlp.x.segment(L.v_zsxi, L.me_bie);
  s.lam_cs = VecX::Zero(m.vars.n_cone());
  s.y_cone = VecX::Zero(m.vars.n_cone());
  s.z_c = VecX::Zero(m.vars.nc);
  for (int c = 0; c < red.n_corrs; ++c) {
    for (int k = 0; k < 4; ++k) {
      s.lam_cs[4 * red.corrs[c] + k] = nlp.x[L.v_lamcs + 4 * c + k];
      s.y_cone[4 * red.corrs[c] + k] = nlp.x[L.v_ycone + 4 * c + k];
    }
    s.z_c[red.corrs[c]] = nlp.x[L.v_zc + c];
  }
  s.psi = m.J_e.transpose() * s.lam_sxi + m.J_ie.transpose() * s.z_sxi;
  return s;
}

double dual_sd_raw(const CompactRobustModel& m, const TepPlan& plan,
                   const DualSlaveSolution& s, const VecX& xi) {
  VecX ym = ym_vec(plan);
  return m.F_c + (m.T * ym - m.r).dot(s.z_ms) - m.t_e.dot(s.lam_sxi) -
         m.t_ie.dot(s.z_sxi) + xi.dot(s.psi);
}

void warm_start_from(QcProblem& qc, const CompactRobustModel& m, const DualLayout& L,
                     const DualSlaveSolution& w) {
  const Reduction& red = L.red;
  if (w.z_ms.size() == m.G.rows())
    for (int i = 0; i < red.n_tg; ++i)
      qc.x0[L.v_zms + i] = std::max(1e-4, w.z_ms[red.tg_rows[i]]);
  if (w.lam_sxi.size() == L.me_be)
    for (int i = 0; i < L.me_be; ++i) qc.x0[L.v_lam + i] = w.lam_sxi[i];
  if (w.z_sxi.size() == L.me_bie)
    for (int i = 0; i < L.me_bie; ++i) qc.x0[L.v_zsxi + i] = std::max(1e-4, w.z_sxi[i]);
  if (w.lam_cs.size() == m.vars.n_cone())
    for (int c = 0; c < red.n_corrs; ++c)
      for (int k = 0; k < 4; ++k) {
        qc.x0[L.v_lamcs + 4 * c + k] = w.lam_cs[4 * red.corrs[c] + k];
        qc.x0[L.v_ycone + 4 * c + k] = w.y_cone[4 * red.corrs[c] + k];
      }
  if (w.z_c.size() == m.vars.nc)
    for (int c = 0; c < red.n_corrs; ++c)
      qc.x0[L.v_zc + c] = std::max(1e-4, w.z_c[red.corrs[c]]);
}

}  // namespace

DualSlaveSolution solve_dual_slave_fixed_xi(const CompactRobustModel& m, const TepPlan& plan,
                                            const VecX& xi, const IpmOptions& opts,
                                            const DualSlaveSolution* warm) {
  DualLayout L;
  QcProblem qc = build_dual_base(m, plan, L, false);
  add_dual_objective_base(qc, m, L, plan);
  // xi-dependent objective part: (J_e xi)' lam + (J_ie xi)' z, negated.
  VecX ce = m.J_e * xi;
  VecX cie = m.J_ie * xi;
  for (int i = 0; i < L.me_be; ++i)
    if (ce[i] != 0.0) qc.objective.add_lin(L.v_lam + i, -ce[i]);
  for (int i = 0; i < L.me_bie; ++i)
    if (cie[i] != 0.0) qc.objective.add_lin(L.v_zsxi + i, -cie[i]);
  if (warm) warm_start_from(qc, m, L, *warm);

  NlpSolution nlp = pdipm_solve(make_nlp(qc), opts);
  if (nlp.status == NlpStatus::NumericalFailure) {
    // One retry from a deterministically perturbed start.
    QcProblem retry = qc;
    for (int i = 0; i < retry.n; ++i) {
      double v = retry.x0[i] * 1.1 + (i % 3 == 0 ? 0.05 : -0.02);
      if (std::isfinite(retry.lb[i])) v = std::max(v, retry.lb[i] + 1e-3);
      if (std::isfinite(retry.ub[i])) v = std::min(v, retry.ub[i] - 1e-3);
      retry.x0[i] = v;
    }
    nlp = pdipm_solve(make_nlp(retry), opts);
    if (nlp.status == NlpStatus::NumericalFailure)
      throw SolveError("dual slave (fixed xi) failed on " + m.netcase.name + ": " +
                       nlp.message);
  }
  DualSlaveSolution s = extract_dual(m, L, nlp);
  s.xi = xi;
  s.psi_plus = s.psi.cwiseMax(0.0);
  s.psi_minus = (-s.psi).cwiseMax(0.0);
  s.u = s.psi.cwiseProduct(xi);
  s.sd_yr = dual_sd_raw(m, plan, s, xi) * m.annualization();
  return s;
}

DualSlaveSolution snap_worst_case(const CompactRobustModel& m, const TepPlan& plan,
                                  const DualSlaveSolution& sol) {
  DualSlaveSolution s = sol;
  const int nxi = m.n_xi();
  s.xi = VecX::Zero(nxi);
  s.u = VecX::Zero(nxi);
  for (int k = 0; k < nxi; ++k) {
    s.xi[k] = s.psi[k] >= 0.0 ? m.box.xi_max[k] : m.box.xi_min[k];
    s.u[k] = s.psi[k] * s.xi[k];
  }
  s.sd_yr = dual_sd_raw(m, plan, s, s.xi) * m.annualization();
  s.snapped = true;
  return s;
}

namespace {

DualSlaveSolution solve_worst_case_phase_a(const CompactRobustModel& m, const TepPlan& plan,
                                           const SlaveOptions& opts) {
  DualLayout L;
  QcProblem qc = build_dual_base(m, plan, L, true);
  add_dual_objective_base(qc, m, L, plan);
  const int nxi = m.n_xi();
  for (int k = 0; k < nxi; ++k) qc.objective.add_lin(L.v_u + k, -1.0);

  auto je_t = rows_of(SpMat(m.J_e.transpose()));
  auto jie_t = rows_of(SpMat(m.J_ie.transpose()));
  for (int k = 0; k < nxi; ++k) {
    // (54): Psi+ - Psi- - (J_e' lam + J_ie' z)_k = 0.
    QuadCon con;
    con.sense = Sense::Eq;
    con.name = "psi split[" + std::to_string(k) + "]";
    con.expr.add_lin(L.v_psip + k, 1.0);
    con.expr.add_lin(L.v_psim + k, -1.0);
    for (auto& [r, val] : je_t[k]) con.expr.add_lin(L.v_lam + r, -val);
    for (auto& [r, val] : jie_t[k]) con.expr.add_lin(L.v_zsxi + r, -val);
    qc.constraints.push_back(std::move(con));
    // (56): -Psi- ximax + Psi+ ximin <= u <= Psi+ ximax - Psi- ximin.
    QuadCon up;
    up.sense = Sense::Le;
    up.name = "u ub[" + std::to_string(k) + "]";
    up.expr.add_lin(L.v_u + k, 1.0);
    up.expr.add_lin(L.v_psip + k, -m.box.xi_max[k]);
    up.expr.add_lin(L.v_psim + k, m.box.xi_min[k]);
    qc.constraints.push_back(std::move(up));
    QuadCon lo;
    lo.sense = Sense::Le;
    lo.name = "u lb[" + std::to_string(k) + "]";
    lo.expr.add_lin(L.v_u + k, -1.0);
    lo.expr.add_lin(L.v_psim + k, -m.box.xi_max[k]);
    lo.expr.add_lin(L.v_psip + k, m.box.xi_min[k]);
    qc.constraints.push_back(std::move(lo));
  }
  if (opts.warm) warm_start_from(qc, m, L, *opts.warm);

  NlpSolution nlp = pdipm_solve(make_nlp(qc), opts.ipm);
  if (nlp.status == NlpStatus::NumericalFailure) {
    QcProblem retry = qc;
    for (int i = 0; i < retry.n; ++i) retry.x0[i] = retry.x0[i] * 0.9 + 0.01;
    nlp = pdipm_solve(make_nlp(retry), opts.ipm);
    if (nlp.status == NlpStatus::NumericalFailure)
      throw SolveError("worst-case dual slave failed on " + m.netcase.name + ": " +
                       nlp.message);
  }
  DualSlaveSolution s = extract_dual(m, L, nlp);
  s.psi_plus = nlp.x.segment(L.v_psip, nxi);
  s.psi_minus = nlp.x.segment(L.v_psim, nxi);
  s.u = nlp.x.segment(L.v_u, nxi);
  s.xi = VecX::Zero(nxi);
  s.sd_yr = -nlp.objective * m.annualization();
  s.note = "phase A (pre-snap)";
  return s;
}

}  // namespace

DualSlaveSolution solve_dual_slave(const CompactRobustModel& m, const TepPlan& plan,
                                   const SlaveOptions& opts) {
  const int nxi = m.n_xi();
  std::vector<int> active;
  for (int k = 0; k < nxi; ++k)
    if (m.box.xi_max[k] > m.box.xi_min[k]) active.push_back(k);

  // Degenerate box: the worst case is the single point.
  if (active.empty()) {
    DualSlaveSolution s = solve_dual_slave_fixed_xi(m, plan, m.box.xi_max, opts.ipm, opts.warm);
    s.snapped = true;
    s.xi = m.box.xi_max;
    s.note = "zero-width box";
    return s;
  }

  if (static_cast<int>(active.size()) <= opts.exhaustive_cap) {
    // Exhaustive vertex sweep with the fixed-vertex dual.
    DualSlaveSolution best;
    best.sd_yr = -kInf;
    const DualSlaveSolution* warm = opts.warm;
    for (long mask = 0; mask < (1L << active.size()); ++mask) {
      VecX xi = m.box.xi_max;  // degenerate components sit at their point value
      for (size_t b = 0; b < active.size(); ++b)
        xi[active[b]] = (mask >> b) & 1 ? m.box.xi_max[active[b]] : m.box.xi_min[active[b]];
      DualSlaveSolution s = solve_dual_slave_fixed_xi(m, plan, xi, opts.ipm, warm);
      if (s.sd_yr > best.sd_yr) best = s;
      warm = nullptr;
    }
    best.snapped = true;
    best.u = best.psi.cwiseProduct(best.xi);
    best.psi_plus = best.psi.cwiseMax(0.0);
    best.psi_minus = (-best.psi).cwiseMax(0.0);
    best.note = "exhaustive vertex sweep (" + std::to_string(1L << active.size()) + ")";
    return best;
  }

  // Phase A: the printed worst-case program; its snap picks the start vertex.
  DualSlaveSolution cur;
  if (opts.warm && opts.warm->snapped) {
    cur = *opts.warm;
  } else if (opts.skip_phase_a) {
    cur = solve_dual_slave_fixed_xi(m, plan, m.box.xi_max, opts.ipm, opts.warm);
  } else {
    cur = solve_worst_case_phase_a(m, plan, opts);
  }
  DualSlaveSolution snapped = snap_worst_case(m, plan, cur);

  DualSlaveSolution best;
  best.sd_yr = -kInf;
  std::set<std::vector<int>> seen;
  VecX vertex = snapped.xi;
  const DualSlaveSolution* warm = &cur;
  for (int round = 0; round < opts.max_alternation_rounds; ++round) {
    std::vector<int> key(active.size());
    for (size_t b = 0; b < active.size(); ++b)
      key[b] = vertex[active[b]] == m.box.xi_max[active[b]] ? 1 : 0;
    if (!seen.insert(key).second) break;
    DualSlaveSolution s = solve_dual_slave_fixed_xi(m, plan, vertex, opts.ipm, warm);
    if (s.sd_yr > best.sd_yr) best = s;
    DualSlaveSolution next = snap_worst_case(m, plan, s);
    if ((next.xi - vertex).lpNorm<Eigen::Infinity>() == 0.0) break;
    vertex = next.xi;
    warm = &best;
  }
  best.snapped = true;
  best.u = best.psi.cwiseProduct(best.xi);
  best.psi_plus = best.psi.cwiseMax(0.0);
  best.psi_minus = (-best.psi).cwiseMax(0.0);
  best.note = "alternation over " + std::to_string(seen.size()) + " vertices";
  return best;
}

BendersCut make_cut(const CompactRobustModel& m, const DualSlaveSolution& sol) {
  BendersCut cut;
  cut.coeffs = m.T.transpose() * sol.z_ms;
  cut.constant = m.F_c - m.r.dot(sol.z_ms) - m.t_e.dot(sol.lam_sxi) -
                 m.t_ie.dot(sol.z_sxi) + sol.xi.dot(sol.psi);
  return cut;
}

DualityGapRecord duality_gap_report(const NetworkCase& c, const TepPlan& plan, const VecX& xi,
                                    const std::string& label) {
  UncertaintyBox zero = build_uncertainty_box(c, 0.0, 0.0);
  CompactRobustModel m = build_compact(c, zero);
  DualityGapRecord rec;
  rec.system = c.name;
  rec.topology = label;
  PrimalSlaveSolution p = solve_primal_slave(m, plan, xi);
  DualSlaveSolution d = solve_dual_slave_fixed_xi(m, plan, xi);
  rec.primal_yr = p.objective_yr;
  rec.dual_yr = d.sd_yr;
  rec.rel_gap = std::abs(p.objective_yr - d.sd_yr) / std::max(1.0, std::abs(p.objective_yr));
  return rec;
}

}  // namespace rtep
