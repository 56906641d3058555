#include <cmath>

#include "rtep/benders.hpp"

namespace rtep {

namespace {

// Cone snapshots are projected onto the cone boundary before linearization:
// tangent planes at boundary points support the cone, so the master stays a
// relaxation even when the dual left an inactive corridor's block arbitrary.
VecX project_snapshot(const CompactRobustModel& m, const VecX& ycone_p) {
  VecX out = ycone_p;
  for (int c = 0; c < m.vars.nc; ++c) {
    double d1 = ycone_p[4 * c], d2 = ycone_p[4 * c + 1], d3 = ycone_p[4 * c + 2];
    double rho = std::sqrt(d1 * d1 + d2 * d2 + d3 * d3);
    if (rho < 1e-8) {
      const Corridor& co = m.topo.corridors[c];
      double va = m.netcase.buses[co.a].v_min, vb = m.netcase.buses[co.b].v_min;
      out[4 * c] = out[4 * c + 1] = out[4 * c + 2] = 0.0;
      out[4 * c + 3] = va * va + vb * vb;  // redundant halfspace, always valid
    } else {
      out[4 * c + 3] = rho;
    }
  }
  return out;
}

std::vector<std::vector<std::pair<int, double>>> rows_of(const SpMat& mat) {
  std::vector<std::vector<std::pair<int, double>>> rows(mat.rows());
  for (int k = 0; k < mat.outerSize(); ++k)
    for (SpMat::InnerIterator it(mat, k); it; ++it)
      rows[it.row()].emplace_back(static_cast<int>(it.col()), it.value());
  return rows;
}

}  // namespace

MilpProblem build_master_multi(const CompactRobustModel& m,
                               const std::vector<BendersCut>& cuts,
                               const std::vector<VecX>& xi_snaps,
                               const std::vector<VecX>& ycone_snaps,
                               const MasterOptions& opts) {
  if (cuts.empty()) throw ValidationError("master needs at least one optimality cut");
  if (xi_snaps.empty() || xi_snaps.size() != ycone_snaps.size())
    throw ValidationError("master needs matching xi / y_cone snapshots");

  const int nl = m.vars.nl;
  const int n_ys = m.vars.n_ys();
  const int n_cone = m.vars.n_cone();
  const int ns = static_cast<int>(xi_snaps.size());
  const bool full = !opts.reduce_variables;

  const int chi = nl;
  const int ys0 = nl + 1;
  const int per_snap = n_ys + (full ? n_cone : 0);
  const int ncols = ys0 + ns * per_snap;

  auto ys_col = [&](int s, int j) { return ys0 + s * per_snap + j; };
  auto dcone_col = [&](int s, int j) { return ys0 + s * per_snap + n_ys + j; };

  std::vector<Triplet> tr;
  std::vector<double> rhs;
  std::vector<char> sense;
  auto new_row = [&](char sn, double b) {
    sense.push_back(sn);
    rhs.push_back(b);
    return static_cast<int>(rhs.size()) - 1;
  };

  auto a_rows = rows_of(m.A);
  auto t_rows = rows_of(m.T);
  auto g_rows = rows_of(m.G);
  auto be_rows = rows_of(m.B_e);
  auto bie_rows = rows_of(m.B_ie);
  auto u_rows = rows_of(m.U);

  for (int r = 0; r < m.A.rows(); ++r) {
    int row = new_row('L', m.h[r]);
    for (auto& [c, val] : a_rows[r]) tr.emplace_back(row, c, val);
  }

  for (const auto& cut : cuts) {
    int row = new_row('L', -cut.constant);
    tr.emplace_back(row, chi, -1.0);
    for (int l = 0; l < nl; ++l)
      if (cut.coeffs[l] != 0.0) tr.emplace_back(row, l, cut.coeffs[l]);
  }

  for (int s = 0; s < ns; ++s) {
    const VecX& xi = xi_snaps[s];
    VecX ycone_hat = project_snapshot(m, ycone_snaps[s]);
    VecX be_rhs = m.t_e - m.J_e * xi;
    VecX bie_rhs = m.t_ie - m.J_ie * xi;

    for (int r = 0; r < m.T.rows(); ++r) {
      int row = new_row('L', m.r[r]);
      for (auto& [c, val] : t_rows[r]) tr.emplace_back(row, c, val);
      for (auto& [c, val] : g_rows[r]) tr.emplace_back(row, ys_col(s, c), val);
    }
    for (int r = 0; r < m.B_e.rows(); ++r) {
      int row = new_row('E', be_rhs[r]);
      for (auto& [c, val] : be_rows[r]) tr.emplace_back(row, ys_col(s, c), val);
    }
    for (int r = 0; r < m.B_ie.rows(); ++r) {
      int row = new_row('L', bie_rhs[r]);
      for (auto& [c, val] : bie_rows[r]) tr.emplace_back(row, ys_col(s, c), val);
    }
    for (int c = 0; c < m.vars.nc; ++c) {
      VecX w(4);
      for (int k = 0; k < 4; ++k)
        w[k] = (k == 3 ? -1.0 : 1.0) * ycone_hat[4 * c + k];
      double q = CompactRobustModel::cone_value(ycone_hat, c);
      if (full) {
        for (int k = 0; k < 4; ++k) {
          int row = new_row('E', -ycone_hat[4 * c + k]);
          tr.emplace_back(row, dcone_col(s, 4 * c + k), 1.0);
          for (auto& [cc, val] : u_rows[4 * c + k]) tr.emplace_back(row, ys_col(s, cc), val);
        }
        int row = new_row('L', -q);
        for (int k = 0; k < 4; ++k)
          if (w[k] != 0.0) tr.emplace_back(row, dcone_col(s, 4 * c + k), 2.0 * w[k]);
      } else {
        // Taylor row written directly on the (c, s) auxiliaries.
        int row = new_row('L', q);
        for (int k = 0; k < 4; ++k)
          if (w[k] != 0.0)
            for (auto& [cc, val] : u_rows[4 * c + k])
              tr.emplace_back(row, ys_col(s, cc), -2.0 * w[k] * val);
      }
    }
    {
      int row = new_row('L', -m.F_c);
      tr.emplace_back(row, chi, -1.0);
      for (int j = 0; j < n_ys; ++j)
        if (m.F_s[j] != 0.0) tr.emplace_back(row, ys_col(s, j), m.F_s[j]);
    }
  }

  MilpProblem p;
  p.lp.A.resize(static_cast<int>(rhs.size()), ncols);
  p.lp.A.setFromTriplets(tr.begin(), tr.end());
  p.lp.A.makeCompressed();
  p.lp.sense = sense;
  p.lp.rhs = Eigen::Map<VecX>(rhs.data(), rhs.size());
  p.lp.c = VecX::Zero(ncols);
  for (int l = 0; l < nl; ++l) p.lp.c[l] = m.F_m[l];
  p.lp.c[chi] = 1.0;
  p.lp.lb = VecX::Constant(ncols, -kInf);
  p.lp.ub = VecX::Constant(ncols, kInf);
  for (int l = 0; l < nl; ++l) {
    p.lp.lb[l] = 0.0;
    p.lp.ub[l] = 1.0;
    p.binaries.push_back(l);
  }
  return p;
}

MilpProblem build_master(const CompactRobustModel& m, const std::vector<BendersCut>& cuts,
                         const VecX& xi_p, const VecX& y_cone_p, const MasterOptions& opts) {
  return build_master_multi(m, cuts, {xi_p}, {y_cone_p}, opts);
}

}  // namespace rtep
