#include "rtep/formulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace rtep {

namespace {
constexpr double kPi = std::numbers::pi;

std::string corr_tag(const Corridor& c) {
  return std::to_string(c.id_a) + "-" + std::to_string(c.id_b);
}

std::string line_tag(const TepTopology& t, int line) {
  const CandLine& l = t.lines[line];
  return corr_tag(t.corridors[l.corridor]) + " k" + std::to_string(l.k);
}
}  // namespace

int TepTopology::find_corridor(int bus_idx_a, int bus_idx_b) const {
  int a = std::min(bus_idx_a, bus_idx_b), b = std::max(bus_idx_a, bus_idx_b);
  for (size_t i = 0; i < corridors.size(); ++i)
    if (corridors[i].a == a && corridors[i].b == b) return static_cast<int>(i);
  return -1;
}

TepTopology build_topology(const NetworkCase& c) {
  std::map<std::pair<int, int>, Corridor> merged;
  auto slot = [&](int from_id, int to_id) -> Corridor& {
    int ia = c.bus_index(from_id), ib = c.bus_index(to_id);
    int a = std::min(ia, ib), b = std::max(ia, ib);
    auto& corr = merged[{a, b}];
    corr.a = a;
    corr.b = b;
    corr.id_a = c.buses[a].id;
    corr.id_b = c.buses[b].id;
    return corr;
  };
  for (const auto& l : c.existing_lines) {
    Corridor& corr = slot(l.from, l.to);
    corr.n0 = l.n0;
    corr.g0 = l.g;
    corr.b0 = l.b;
    corr.bsh0 = l.b_sh_half;
    corr.pmax0 = l.p_max;
  }
  for (const auto& l : c.candidate_corridors) {
    Corridor& corr = slot(l.from, l.to);
    corr.cand_max = l.n_max;
    corr.gc = l.g;
    corr.bc = l.b;
    corr.bshc = l.b_sh_half;
    corr.pmaxc = l.p_max;
    corr.ic_yr = l.install_cost;
  }
  TepTopology topo;
  for (auto& [key, corr] : merged) topo.corridors.push_back(corr);
  for (size_t i = 0; i < topo.corridors.size(); ++i)
    for (int k = 1; k <= topo.corridors[i].cand_max; ++k)
      topo.lines.push_back({static_cast<int>(i), k});
  return topo;
}

std::string VariableSpace::ys_name(int idx) const {
  if (idx < nb) return "c_ii[" + std::to_string(idx) + "]";
  if (idx < nb + nc) return "c_ij[corr " + std::to_string(idx - nb) + "]";
  if (idx < nb + 2 * nc) return "s_ij[corr " + std::to_string(idx - nb - nc) + "]";
  if (idx < 2 * nb + 2 * nc) return "theta[" + std::to_string(idx - nb - 2 * nc) + "]";
  if (idx < 2 * nb + 2 * nc + ng) return "P_g[" + std::to_string(idx - 2 * nb - 2 * nc) + "]";
  if (idx < 2 * nb + 2 * nc + 2 * ng)
    return "Q_g[" + std::to_string(idx - 2 * nb - 2 * nc - ng) + "]";
  if (idx < 3 * nb + 2 * nc + 2 * ng)
    return "CP_d[" + std::to_string(idx - 2 * nb - 2 * nc - 2 * ng) + "]";
  if (idx < 4 * nb + 2 * nc + 2 * ng)
    return "CP_r[" + std::to_string(idx - 3 * nb - 2 * nc - 2 * ng) + "]";
  int f = idx - (4 * nb + 2 * nc + 2 * ng);
  static const char* kind[] = {"P_send", "P_recv", "Q_send", "Q_recv"};
  return std::string(kind[f % 4]) + "[line " + std::to_string(f / 4) + "]";
}

double NamedRow::eval(const VecX& vym, const VecX& vys, const VecX& vycone,
                      const VecX& vxi) const {
  double v = -rhs;
  for (auto& [i, a] : ym) v += a * vym[i];
  for (auto& [i, a] : ys) v += a * vys[i];
  for (auto& [i, a] : ycone) v += a * vycone[i];
  for (auto& [i, a] : xi) v += a * vxi[i];
  return v;
}

namespace {

// Linear coefficients of the four per-corridor flow expressions over y_s.
struct FlowExpr {
  std::vector<std::pair<int, double>> terms;
};

FlowExpr flow_p(const VariableSpace& v, const Corridor& c, int corr, bool at_a, double g,
                double b) {
  FlowExpr e;
  int cii = at_a ? v.c_ii(c.a) : v.c_ii(c.b);
  double s_sign = at_a ? -1.0 : 1.0;
  e.terms = {{cii, g}, {v.c_ij(corr), -g}, {v.s_ij(corr), s_sign * b}};
  return e;
}

FlowExpr flow_q(const VariableSpace& v, const Corridor& c, int corr, bool at_a, double g,
                double b, double bsh) {
  FlowExpr e;
  int cii = at_a ? v.c_ii(c.a) : v.c_ii(c.b);
  double s_sign = at_a ? 1.0 : -1.0;
  e.terms = {{cii, b + bsh}, {v.c_ij(corr), -b}, {v.s_ij(corr), s_sign * g}};
  return e;
}

void add_scaled(NamedRow& row, const FlowExpr& e, double scale) {
  for (auto& [i, a] : e.terms) row.ys.emplace_back(i, scale * a);
}

RobustTepModel build_model(const NetworkCase& c, const UncertaintyBox& box) {
  RobustTepModel m;
  m.netcase = c;
  m.topo = build_topology(c);
  m.box = box;

  VariableSpace& v = m.vars;
  v.nb = c.n_buses();
  v.ng = static_cast<int>(c.generators.size());
  v.nc = static_cast<int>(m.topo.corridors.size());
  v.nl = static_cast<int>(m.topo.lines.size());

  const double ann = c.annualization;
  m.f_m = VecX::Zero(v.nl);
  for (int l = 0; l < v.nl; ++l)
    m.f_m[l] = m.topo.corridors[m.topo.lines[l].corridor].ic_yr / ann;
  m.f_s = VecX::Zero(v.n_ys());
  m.f_c = 0.0;
  for (int g = 0; g < v.ng; ++g) {
    m.f_s[v.p_g(g)] = c.generators[g].cost_a / ann;
    m.f_c += c.generators[g].cost_b / ann;
  }
  for (int i = 0; i < v.nb; ++i) {
    m.f_s[v.cp_d(i)] = c.gamma_d;
    m.f_s[v.cp_r(i)] = c.gamma_r;
  }

  const int ref = c.bus_index(c.angle_ref_bus);
  const double M = c.big_m;
  const double eps = c.eps_theta;

  auto& rows = m.rows;

  // --- A: sequential installation x_ij^k <= x_ij^{k-1} -----------------------
  for (int l = 0; l < v.nl; ++l) {
    const CandLine& cl = m.topo.lines[l];
    if (cl.k < 2) continue;
    NamedRow row;
    row.block = Block::A;
    row.name = "seq install[" + line_tag(m.topo, l) + "]";
    row.ym = {{l, 1.0}, {l - 1, -1.0}};
    row.rhs = 0.0;
    rows.push_back(std::move(row));
  }

  // --- T/G: candidate-line rows (duals z_ms) ---------------------------------
  for (int l = 0; l < v.nl; ++l) {
    const CandLine& cl = m.topo.lines[l];
    const Corridor& co = m.topo.corridors[cl.corridor];
    const std::string tag = line_tag(m.topo, l);
    FlowExpr ep_a = flow_p(v, co, cl.corridor, true, co.gc, co.bc);
    FlowExpr ep_b = flow_p(v, co, cl.corridor, false, co.gc, co.bc);
    FlowExpr eq_a = flow_q(v, co, cl.corridor, true, co.gc, co.bc, co.bshc);
    FlowExpr eq_b = flow_q(v, co, cl.corridor, false, co.gc, co.bc, co.bshc);

    auto bound_pair = [&](int var, double cap, const std::string& what,
                          const std::string& dual) {
      NamedRow up;
      up.block = Block::TG;
      up.name = what + " ub[" + tag + "] <ubar_" + dual + ">";
      up.ys = {{var, 1.0}};
      up.ym = {{l, -cap}};
      up.rhs = 0.0;
      rows.push_back(std::move(up));
      NamedRow lo;
      lo.block = Block::TG;
      lo.name = what + " lb[" + tag + "] <lbar_" + dual + ">";
      lo.ys = {{var, -1.0}};
      lo.ym = {{l, -cap}};
      lo.rhs = 0.0;
      rows.push_back(std::move(lo));
    };
    bound_pair(v.fp_s(l), co.pmaxc, "cand P send", "pijk");
    bound_pair(v.fp_r(l), co.pmaxc, "cand P recv", "pjik");
    bound_pair(v.fq_s(l), M, "cand Q send", "qijk");
    bound_pair(v.fq_r(l), M, "cand Q recv", "qjik");

    auto bigm_pair = [&](const FlowExpr& e, int var, double var_sign,
                         const std::string& what) {
      // M(x-1) <= expr +- flow <= M(1-x), written as two <= rows.
      NamedRow up;
      up.block = Block::TG;
      up.name = what + " def ub[" + tag + "]";
      add_scaled(up, e, 1.0);
      up.ys.emplace_back(var, var_sign);
      up.ym = {{l, M}};
      up.rhs = M;
      rows.push_back(std::move(up));
      NamedRow lo;
      lo.block = Block::TG;
      lo.name = what + " def lb[" + tag + "]";
      add_scaled(lo, e, -1.0);
      lo.ys.emplace_back(var, -var_sign);
      lo.ym = {{l, M}};
      lo.rhs = M;
      rows.push_back(std::move(lo));
    };
    bigm_pair(ep_a, v.fp_s(l), -1.0, "cand P send");
    bigm_pair(ep_b, v.fp_r(l), -1.0, "cand P recv");
    bigm_pair(eq_a, v.fq_s(l), 1.0, "cand Q send");
    bigm_pair(eq_b, v.fq_r(l), 1.0, "cand Q recv");

    // Candidate angle consistency with the big-pi relaxation.
    NamedRow aup;
    aup.block = Block::TG;
    aup.name = "cand angle ub[" + tag + "] <zbar_ijk>";
    aup.ys = {{v.theta(co.a), 1.0}, {v.theta(co.b), -1.0}, {v.s_ij(cl.corridor), -1.0}};
    aup.ym = {{l, kPi}};
    aup.rhs = eps + kPi;
    rows.push_back(std::move(aup));
    NamedRow alo;
    alo.block = Block::TG;
    alo.name = "cand angle lb[" + tag + "] <zlow_ijk>";
    alo.ys = {{v.theta(co.a), -1.0}, {v.theta(co.b), 1.0}, {v.s_ij(cl.corridor), 1.0}};
    alo.ym = {{l, kPi}};
    alo.rhs = eps + kPi;
    rows.push_back(std::move(alo));
  }

  // --- B_e: real then reactive power balance (duals lambda_p, lambda_q) ------
  const int nb = v.nb;
  for (int i = 0; i < nb; ++i) {
    NamedRow row;
    row.block = Block::Be;
    row.name = "P balance[bus " + std::to_string(c.buses[i].id) + "] <lambda_p>";
    for (int corr = 0; corr < v.nc; ++corr) {
      const Corridor& co = m.topo.corridors[corr];
      if (co.a != i && co.b != i) continue;
      if (co.n0 > 0)
        add_scaled(row, flow_p(v, co, corr, co.a == i, co.g0, co.b0), co.n0);
    }
    for (int l = 0; l < v.nl; ++l) {
      const Corridor& co = m.topo.corridors[m.topo.lines[l].corridor];
      if (co.a == i) row.ys.emplace_back(v.fp_s(l), 1.0);
      if (co.b == i) row.ys.emplace_back(v.fp_r(l), 1.0);
    }
    for (int g = 0; g < v.ng; ++g)
      if (c.bus_index(c.generators[g].bus) == i) row.ys.emplace_back(v.p_g(g), -1.0);
    row.ys.emplace_back(v.cp_d(i), -1.0);
    row.ys.emplace_back(v.cp_r(i), 1.0);
    if (c.buses[i].p_load > 0) row.xi.emplace_back(i, 1.0);
    if (c.buses[i].p_res > 0) row.xi.emplace_back(nb + i, -1.0);
    row.rhs = c.buses[i].p_res - c.buses[i].p_load;
    rows.push_back(std::move(row));
  }
  for (int i = 0; i < nb; ++i) {
    const double delta = c.buses[i].q_over_p.value_or(0.0);
    NamedRow row;
    row.block = Block::Be;
    row.name = "Q balance[bus " + std::to_string(c.buses[i].id) + "] <lambda_q>";
    for (int corr = 0; corr < v.nc; ++corr) {
      const Corridor& co = m.topo.corridors[corr];
      if (co.a != i && co.b != i) continue;
      if (co.n0 > 0)
        add_scaled(row, flow_q(v, co, corr, co.a == i, co.g0, co.b0, co.bsh0), -co.n0);
    }
    for (int l = 0; l < v.nl; ++l) {
      const Corridor& co = m.topo.corridors[m.topo.lines[l].corridor];
      if (co.a == i) row.ys.emplace_back(v.fq_s(l), 1.0);
      if (co.b == i) row.ys.emplace_back(v.fq_r(l), 1.0);
    }
    for (int g = 0; g < v.ng; ++g)
      if (c.bus_index(c.generators[g].bus) == i) row.ys.emplace_back(v.q_g(g), -1.0);
    if (delta != 0.0) row.ys.emplace_back(v.cp_d(i), -delta);
    if (c.buses[i].b_shunt != 0.0) row.ys.emplace_back(v.c_ii(i), -c.buses[i].b_shunt);
    if (c.buses[i].p_load > 0) row.xi.emplace_back(i, delta);
    row.rhs = -delta * c.buses[i].p_load;
    rows.push_back(std::move(row));
  }

  // --- B_ie (duals z_sxi) -----------------------------------------------------
  for (int corr = 0; corr < v.nc; ++corr) {
    const Corridor& co = m.topo.corridors[corr];
    if (co.n0 == 0) continue;
    const std::string tag = corr_tag(co);
    FlowExpr ep_a = flow_p(v, co, corr, true, co.g0, co.b0);
    FlowExpr ep_b = flow_p(v, co, corr, false, co.g0, co.b0);
    auto base_pair = [&](const FlowExpr& e, const std::string& what,
                         const std::string& dual) {
      NamedRow up;
      up.block = Block::Bie;
      up.name = what + " ub[" + tag + "] <ubar_" + dual + ">";
      add_scaled(up, e, co.n0);
      up.rhs = co.n0 * co.pmax0;
      rows.push_back(std::move(up));
      NamedRow lo;
      lo.block = Block::Bie;
      lo.name = what + " lb[" + tag + "] <lbar_" + dual + ">";
      add_scaled(lo, e, -co.n0);
      lo.rhs = co.n0 * co.pmax0;
      rows.push_back(std::move(lo));
    };
    base_pair(ep_a, "base P send", "pij0");
    base_pair(ep_b, "base P recv", "pji0");
  }
  for (int g = 0; g < v.ng; ++g) {
    const auto& gen = c.generators[g];
    const std::string tag = "gen bus " + std::to_string(gen.bus);
    NamedRow up;
    up.block = Block::Bie;
    up.name = "Pg ub[" + tag + "] <zbar_pgi>";
    up.ys = {{v.p_g(g), 1.0}};
    up.rhs = gen.p_max;
    rows.push_back(std::move(up));
    NamedRow lo;
    lo.block = Block::Bie;
    lo.name = "Pg lb[" + tag + "] <zlow_pgi>";
    lo.ys = {{v.p_g(g), -1.0}};
    lo.rhs = -gen.p_min;
    rows.push_back(std::move(lo));
  }
  for (int g = 0; g < v.ng; ++g) {
    const auto& gen = c.generators[g];
    const std::string tag = "gen bus " + std::to_string(gen.bus);
    NamedRow up;
    up.block = Block::Bie;
    up.name = "Qg ub[" + tag + "] <zbar_qgi>";
    up.ys = {{v.q_g(g), 1.0}};
    up.rhs = gen.q_max;
    rows.push_back(std::move(up));
    NamedRow lo;
    lo.block = Block::Bie;
    lo.name = "Qg lb[" + tag + "] <zlow_qgi>";
    lo.ys = {{v.q_g(g), -1.0}};
    lo.rhs = -gen.q_min;
    rows.push_back(std::move(lo));
  }
  for (int i = 0; i < nb; ++i) {
    const std::string tag = "bus " + std::to_string(c.buses[i].id);
    NamedRow up;
    up.block = Block::Bie;
    up.name = "V ub[" + tag + "] <zbar_vi>";
    up.ys = {{v.c_ii(i), 1.0}};
    up.rhs = c.buses[i].v_max * c.buses[i].v_max;
    rows.push_back(std::move(up));
    NamedRow lo;
    lo.block = Block::Bie;
    lo.name = "V lb[" + tag + "] <zlow_vi>";
    lo.ys = {{v.c_ii(i), -1.0}};
    lo.rhs = -c.buses[i].v_min * c.buses[i].v_min;
    rows.push_back(std::move(lo));
  }
  for (int i = 0; i < nb; ++i) {
    const std::string tag = "bus " + std::to_string(c.buses[i].id);
    const double cap = i == ref ? 0.0 : kPi / 2.0;  // reference angle pinned to 0
    NamedRow up;
    up.block = Block::Bie;
    up.name = "theta ub[" + tag + "] <zbar_thetai>";
    up.ys = {{v.theta(i), 1.0}};
    up.rhs = cap;
    rows.push_back(std::move(up));
    NamedRow lo;
    lo.block = Block::Bie;
    lo.name = "theta lb[" + tag + "] <zlow_thetai>";
    lo.ys = {{v.theta(i), -1.0}};
    lo.rhs = cap;
    rows.push_back(std::move(lo));
  }
  for (int corr = 0; corr < v.nc; ++corr) {
    const Corridor& co = m.topo.corridors[corr];
    if (co.n0 == 0) continue;
    const std::string tag = corr_tag(co);
    NamedRow up;
    up.block = Block::Bie;
    up.name = "base angle ub[" + tag + "] <zbar_ij0>";
    up.ys = {{v.theta(co.a), double(co.n0)},
             {v.theta(co.b), -double(co.n0)},
             {v.s_ij(corr), -double(co.n0)}};
    up.rhs = co.n0 * eps;
    rows.push_back(std::move(up));
    NamedRow lo;
    lo.block = Block::Bie;
    lo.name = "base angle lb[" + tag + "] <zlow_ij0>";
    lo.ys = {{v.theta(co.a), -double(co.n0)},
             {v.theta(co.b), double(co.n0)},
             {v.s_ij(corr), double(co.n0)}};
    lo.rhs = co.n0 * eps;
    rows.push_back(std::move(lo));
  }
  for (int i = 0; i < nb; ++i) {
    const std::string tag = "bus " + std::to_string(c.buses[i].id);
    NamedRow up;
    up.block = Block::Bie;
    up.name = "CPd ub[" + tag + "] <zbar_pdi>";
    up.ys = {{v.cp_d(i), 1.0}};
    if (c.buses[i].p_load > 0) up.xi.emplace_back(i, -1.0);
    up.rhs = c.buses[i].p_load;
    rows.push_back(std::move(up));
    NamedRow lo;
    lo.block = Block::Bie;
    lo.name = "CPd lb[" + tag + "] <zlow_pdi>";
    lo.ys = {{v.cp_d(i), -1.0}};
    lo.rhs = 0.0;
    rows.push_back(std::move(lo));
  }
  for (int i = 0; i < nb; ++i) {
    const std::string tag = "bus " + std::to_string(c.buses[i].id);
    NamedRow up;
    up.block = Block::Bie;
    up.name = "CPr ub[" + tag + "] <zbar_pri>";
    up.ys = {{v.cp_r(i), 1.0}};
    if (c.buses[i].p_res > 0) up.xi.emplace_back(nb + i, -1.0);
    up.rhs = c.buses[i].p_res;
    rows.push_back(std::move(up));
    NamedRow lo;
    lo.block = Block::Bie;
    lo.name = "CPr lb[" + tag + "] <zlow_pri>";
    lo.ys = {{v.cp_r(i), -1.0}};
    lo.rhs = 0.0;
    rows.push_back(std::move(lo));
  }

  // --- U link: y_cone + U y_s = 0 (duals alpha, beta, gamma, phi) -------------
  for (int corr = 0; corr < v.nc; ++corr) {
    const Corridor& co = m.topo.corridors[corr];
    const std::string tag = corr_tag(co);
    static const char* dual[] = {"alpha", "beta", "gamma", "phi"};
    for (int comp = 0; comp < 4; ++comp) {
      NamedRow row;
      row.block = Block::Ulink;
      row.name = "cone link D" + std::to_string(comp + 1) + "[" + tag + "] <" + dual[comp] + ">";
      row.ycone = {{v.cone(corr, comp), 1.0}};
      switch (comp) {
        case 0: row.ys = {{v.c_ij(corr), -2.0}}; break;
        case 1: row.ys = {{v.s_ij(corr), -2.0}}; break;
        case 2: row.ys = {{v.c_ii(co.a), -1.0}, {v.c_ii(co.b), 1.0}}; break;
        case 3: row.ys = {{v.c_ii(co.a), -1.0}, {v.c_ii(co.b), -1.0}}; break;
      }
      row.rhs = 0.0;
      rows.push_back(std::move(row));
    }
  }
  return m;
}

}  // namespace

RobustTepModel build_relaxed_tep(const NetworkCase& c) {
  UncertaintyBox zero = build_uncertainty_box(c, 0.0, 0.0);
  return build_model(c, zero);
}

RobustTepModel build_uncertain_tep(const NetworkCase& c, const UncertaintyBox& box) {
  return build_model(c, box);
}

double CompactRobustModel::cone_value(const VecX& ycone, int corr) {
  const double d1 = ycone[4 * corr], d2 = ycone[4 * corr + 1], d3 = ycone[4 * corr + 2],
               d4 = ycone[4 * corr + 3];
  return d1 * d1 + d2 * d2 + d3 * d3 - d4 * d4;
}

CompactRobustModel assemble_compact(const RobustTepModel& m) {
  CompactRobustModel cm;
  cm.netcase = m.netcase;
  cm.topo = m.topo;
  cm.vars = m.vars;
  cm.box = m.box;
  cm.F_m = m.f_m;
  cm.F_s = m.f_s;
  cm.F_c = m.f_c;
  cm.named = m.rows;

  const int n_ys = m.vars.n_ys();
  const int n_ym = m.vars.nl;
  const int n_xi = m.box.size();

  std::vector<Triplet> ta, tt, tg, tbe, tje, tbie, tjie, tu;
  std::vector<double> ha, rr, te, tie;

  for (const auto& row : m.rows) {
    switch (row.block) {
      case Block::A: {
        int r = static_cast<int>(ha.size());
        for (auto& [i, a] : row.ym) ta.emplace_back(r, i, a);
        if (!row.ys.empty() || !row.ycone.empty() || !row.xi.empty())
          throw std::logic_error("A row touches continuous variables: " + row.name);
        ha.push_back(row.rhs);
        cm.a_names.push_back(row.name);
        break;
      }
      case Block::TG: {
        int r = static_cast<int>(rr.size());
        for (auto& [i, a] : row.ym) tt.emplace_back(r, i, a);
        for (auto& [i, a] : row.ys) tg.emplace_back(r, i, a);
        if (!row.ycone.empty() || !row.xi.empty())
          throw std::logic_error("TG row touches cone or xi columns: " + row.name);
        rr.push_back(row.rhs);
        cm.tg_names.push_back(row.name);
        break;
      }
      case Block::Be: {
        int r = static_cast<int>(te.size());
        for (auto& [i, a] : row.ys) tbe.emplace_back(r, i, a);
        for (auto& [i, a] : row.xi) tje.emplace_back(r, i, a);
        if (!row.ym.empty() || !row.ycone.empty())
          throw std::logic_error("B_e row touches binary or cone columns: " + row.name);
        te.push_back(row.rhs);
        cm.be_names.push_back(row.name);
        break;
      }
      case Block::Bie: {
        int r = static_cast<int>(tie.size());
        for (auto& [i, a] : row.ys) tbie.emplace_back(r, i, a);
        for (auto& [i, a] : row.xi) tjie.emplace_back(r, i, a);
        if (!row.ym.empty() || !row.ycone.empty())
          throw std::logic_error("B_ie row touches binary or cone columns: " + row.name);
        tie.push_back(row.rhs);
        cm.bie_names.push_back(row.name);
        break;
      }
      case Block::Ulink: {
        int r = static_cast<int>(cm.ulink_names.size());
        if (row.ycone.size() != 1 || row.ycone[0].second != 1.0 || row.ycone[0].first != r)
          throw std::logic_error("U rows must carry y_cone identity in order: " + row.name);
        for (auto& [i, a] : row.ys) tu.emplace_back(r, i, a);
        cm.ulink_names.push_back(row.name);
        break;
      }
    }
  }

  auto fill = [](SpMat& s, int rows, int cols, std::vector<Triplet>& tr) {
    s.resize(rows, cols);
    s.setFromTriplets(tr.begin(), tr.end());
    s.makeCompressed();
  };
  fill(cm.A, static_cast<int>(ha.size()), n_ym, ta);
  cm.h = Eigen::Map<VecX>(ha.data(), ha.size());
  fill(cm.T, static_cast<int>(rr.size()), n_ym, tt);
  fill(cm.G, static_cast<int>(rr.size()), n_ys, tg);
  cm.r = Eigen::Map<VecX>(rr.data(), rr.size());
  fill(cm.B_e, static_cast<int>(te.size()), n_ys, tbe);
  fill(cm.J_e, static_cast<int>(te.size()), n_xi, tje);
  cm.t_e = Eigen::Map<VecX>(te.data(), te.size());
  fill(cm.B_ie, static_cast<int>(tie.size()), n_ys, tbie);
  fill(cm.J_ie, static_cast<int>(tie.size()), n_xi, tjie);
  cm.t_ie = Eigen::Map<VecX>(tie.data(), tie.size());
  fill(cm.U, m.vars.n_cone(), n_ys, tu);

  if (static_cast<int>(cm.ulink_names.size()) != m.vars.n_cone())
    throw std::logic_error("U block row count mismatch");
  for (int corr = 0; corr < m.vars.nc; ++corr)
    cm.cone_names.push_back("rotated cone[" + corr_tag(m.topo.corridors[corr]) +
                            "] <zbar_ij>");
  return cm;
}

CompactRobustModel build_compact(const NetworkCase& c, const UncertaintyBox& box) {
  return assemble_compact(build_uncertain_tep(c, box));
}

int TepPlan::installed() const {
  int n = 0;
  for (int v : y_m) n += v;
  return n;
}

TepPlan make_plan_from_vector(const CompactRobustModel& m, const std::vector<int>& y_m) {
  if (static_cast<int>(y_m.size()) != m.vars.nl)
    throw ValidationError("plan vector length mismatch");
  if (!plan_respects_ordering(m, y_m))
    throw ValidationError("plan violates sequential-installation ordering");
  TepPlan p;
  p.y_m = y_m;
  p.investment_cost = 0.0;
  for (int l = 0; l < m.vars.nl; ++l)
    if (y_m[l]) p.investment_cost += m.topo.corridors[m.topo.lines[l].corridor].ic_yr;
  return p;
}

TepPlan make_plan(const CompactRobustModel& m, const std::map<std::pair<int, int>, int>& counts) {
  std::vector<int> y(m.vars.nl, 0);
  for (auto& [key, cnt] : counts) {
    int ia = m.netcase.bus_index(key.first), ib = m.netcase.bus_index(key.second);
    int corr = m.topo.find_corridor(ia, ib);
    if (corr < 0)
      throw ValidationError("no corridor " + std::to_string(key.first) + "-" +
                            std::to_string(key.second));
    if (cnt < 0 || cnt > m.topo.corridors[corr].cand_max)
      throw ValidationError("count out of range for corridor " + std::to_string(key.first) +
                            "-" + std::to_string(key.second));
    for (int l = 0; l < m.vars.nl; ++l)
      if (m.topo.lines[l].corridor == corr && m.topo.lines[l].k <= cnt) y[l] = 1;
  }
  return make_plan_from_vector(m, y);
}

std::map<std::pair<int, int>, int> plan_counts(const CompactRobustModel& m, const TepPlan& p) {
  std::map<std::pair<int, int>, int> counts;
  for (int l = 0; l < m.vars.nl; ++l)
    if (p.y_m[l]) {
      const Corridor& co = m.topo.corridors[m.topo.lines[l].corridor];
      counts[{co.id_a, co.id_b}]++;
    }
  return counts;
}

std::string plan_to_string(const CompactRobustModel& m, const TepPlan& p) {
  auto counts = plan_counts(m, p);
  if (counts.empty()) return "(no additions)";
  std::ostringstream o;
  bool first = true;
  for (auto& [key, cnt] : counts) {
    if (!first) o << ", ";
    first = false;
    o << "n_" << key.first << "-" << key.second << "=" << cnt;
  }
  return o.str();
}

bool plan_respects_ordering(const CompactRobustModel& m, const std::vector<int>& y_m) {
  for (int l = 0; l < m.vars.nl; ++l) {
    if (y_m[l] != 0 && y_m[l] != 1) return false;
    if (m.topo.lines[l].k >= 2 && y_m[l] > y_m[l - 1]) return false;
  }
  return true;
}

void write_compact_debug(const CompactRobustModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "# compact robust model dump\n";
  out << "case " << m.netcase.name << "\n";
  out << "n_ym " << m.vars.nl << "\nn_ys " << m.vars.n_ys() << "\nn_cone "
      << m.vars.n_cone() << "\nn_xi " << m.n_xi() << "\n";
  out << "F_c " << m.F_c << "\n";
  out << "\n[y_s index map]\n";
  for (int i = 0; i < m.vars.n_ys(); ++i) out << i << " " << m.vars.ys_name(i) << "\n";
  out << "\n[y_m index map]\n";
  for (int l = 0; l < m.vars.nl; ++l) {
    const Corridor& co = m.topo.corridors[m.topo.lines[l].corridor];
    out << l << " x[" << co.id_a << "-" << co.id_b << " k" << m.topo.lines[l].k
        << "] F_m=" << m.F_m[l] << "\n";
  }
  auto block = [&](const char* nm, const SpMat& s, const std::vector<std::string>& names,
                   const VecX* rhs) {
    out << "\n[" << nm << "] " << s.rows() << "x" << s.cols() << "\n";
    for (int r = 0; r < s.rows(); ++r) {
      out << r << " " << names[r];
      if (rhs) out << " rhs=" << (*rhs)[r];
      out << " :";
      for (int k = 0; k < s.outerSize(); ++k)
        for (SpMat::InnerIterator it(s, k); it; ++it)
          if (it.row() == r) out << " (" << it.col() << "," << it.value() << ")";
      out << "\n";
    }
  };
  block("A", m.A, m.a_names, &m.h);
  block("T", m.T, m.tg_names, &m.r);
  block("G", m.G, m.tg_names, nullptr);
  block("B_e", m.B_e, m.be_names, &m.t_e);
  block("J_e", m.J_e, m.be_names, nullptr);
  block("B_ie", m.B_ie, m.bie_names, &m.t_ie);
  block("J_ie", m.J_ie, m.bie_names, nullptr);
  block("U", m.U, m.ulink_names, nullptr);
  out << "\n[H] diag(1,1,1,-1) per corridor\n";
  out << "\n[box]\n";
  for (int i = 0; i < m.box.size(); ++i)
    out << i << " [" << m.box.xi_min[i] << ", " << m.box.xi_max[i] << "]\n";
}

QcProblem NonconvexTep::at_plan(const TepPlan& plan, const VecX* xi) const {
  const NetworkCase& c = netcase;
  const int nb = c.n_buses();
  const int ng = static_cast<int>(c.generators.size());
  const int nc = static_cast<int>(topo.corridors.size());
  QcProblem qc;
  qc.name = "nonconvex-tep[" + c.name + "]";

  // Variable layout: e, f per bus; c_ii; c_ij, s_ij per corridor; P_g, Q_g;
  // CP_d, CP_r; per installed candidate line 4 flow variables.
  std::vector<int> ve(nb), vf(nb), vcii(nb), vcij(nc), vsij(nc), vpg(ng), vqg(ng), vcpd(nb),
      vcpr(nb);
  std::vector<int> installed(nc, 0);
  for (size_t l = 0; l < topo.lines.size(); ++l)
    if (plan.y_m[l]) installed[topo.lines[l].corridor]++;
  auto dark = [&](int k) { return topo.corridors[k].n0 == 0 && installed[k] == 0; };

  const int ref = c.bus_index(c.angle_ref_bus);
  for (int i = 0; i < nb; ++i) ve[i] = qc.add_var(-kInf, kInf, 1.0);
  for (int i = 0; i < nb; ++i)
    vf[i] = i == ref ? qc.add_var(0.0, 0.0, 0.0) : qc.add_var(-kInf, kInf, 0.0);
  for (int i = 0; i < nb; ++i) vcii[i] = qc.add_var(-kInf, kInf, 1.0);
  for (int k = 0; k < nc; ++k)
    vcij[k] = dark(k) ? qc.add_var(0.0, 0.0, 0.0) : qc.add_var(-kInf, kInf, 1.0);
  for (int k = 0; k < nc; ++k)
    vsij[k] = dark(k) ? qc.add_var(0.0, 0.0, 0.0) : qc.add_var(-kInf, kInf, 0.0);
  for (int g = 0; g < ng; ++g) {
    vpg[g] = qc.add_var(c.generators[g].p_min, c.generators[g].p_max,
                        0.5 * (c.generators[g].p_min + c.generators[g].p_max));
    }
  for (int g = 0; g < ng; ++g)
    vqg[g] = qc.add_var(c.generators[g].q_min, c.generators[g].q_max,
                        0.5 * (c.generators[g].q_min + c.generators[g].q_max));
  VecX xid = VecX::Zero(nb), xir = VecX::Zero(nb);
  if (xi) {
    xid = xi->head(nb);
    xir = xi->tail(nb);
  }
  for (int i = 0; i < nb; ++i)
    vcpd[i] = qc.add_var(0.0, std::max(0.0, c.buses[i].p_load + xid[i]), 0.0);
  for (int i = 0; i < nb; ++i)
    vcpr[i] = qc.add_var(0.0, std::max(0.0, c.buses[i].p_res + xir[i]), 0.0);

  // Defining constraints c_ii = e^2 + f^2, c_ij = e_i e_j + f_i f_j,
  // s_ij = f_i e_j - f_j e_i (the non-convex core).
  for (int i = 0; i < nb; ++i) {
    QuadCon con;
    con.sense = Sense::Eq;
    con.name = "def c_ii[" + std::to_string(c.buses[i].id) + "]";
    con.expr.add_lin(vcii[i], -1.0);
    con.expr.add_quad(ve[i], ve[i], 1.0);
    con.expr.add_quad(vf[i], vf[i], 1.0);
    qc.constraints.push_back(std::move(con));
  }
  for (int k = 0; k < nc; ++k) {
    const Corridor& co = topo.corridors[k];
    if (dark(k)) continue;  // c_ij, s_ij fixed at 0, no circuits to define
    QuadCon cc;
    cc.sense = Sense::Eq;
    cc.name = "def c_ij[" + corr_tag(co) + "]";
    cc.expr.add_lin(vcij[k], -1.0);
    cc.expr.add_quad(ve[co.a], ve[co.b], 1.0);
    cc.expr.add_quad(vf[co.a], vf[co.b], 1.0);
    qc.constraints.push_back(std::move(cc));
    QuadCon cs;
    cs.sense = Sense::Eq;
    cs.name = "def s_ij[" + corr_tag(co) + "]";
    cs.expr.add_lin(vsij[k], -1.0);
    cs.expr.add_quad(vf[co.a], ve[co.b], 1.0);
    cs.expr.add_quad(vf[co.b], ve[co.a], -1.0);
    qc.constraints.push_back(std::move(cs));
  }

  auto add_flow_terms = [&](QuadExpr& e, int k, bool at_a, double g, double b, double scale,
                            bool reactive, double bsh) {
    const Corridor& co = topo.corridors[k];
    int cii = at_a ? vcii[co.a] : vcii[co.b];
    double ssign = at_a ? -1.0 : 1.0;
    if (!reactive) {
      e.add_lin(cii, scale * g);
      e.add_lin(vcij[k], -scale * g);
      e.add_lin(vsij[k], scale * ssign * b);
    } else {
      e.add_lin(cii, scale * (b + bsh));
      e.add_lin(vcij[k], -scale * b);
      e.add_lin(vsij[k], -scale * ssign * g);
    }
  };

  // Balances; installed candidate circuits are merged with their own
  // admittances (flow variables appear only through their defining rows,
  // which at x=1 pin them to the line expressions, so we inline them).
  for (int i = 0; i < nb; ++i) {
    QuadCon con;
    con.sense = Sense::Eq;
    con.name = "P balance[" + std::to_string(c.buses[i].id) + "]";
    for (int k = 0; k < nc; ++k) {
      const Corridor& co = topo.corridors[k];
      if (co.a != i && co.b != i) continue;
      if (co.n0 > 0) add_flow_terms(con.expr, k, co.a == i, co.g0, co.b0, co.n0, false, 0.0);
      if (installed[k] > 0)
        add_flow_terms(con.expr, k, co.a == i, co.gc, co.bc, installed[k], false, 0.0);
    }
    for (int g = 0; g < ng; ++g)
      if (c.bus_index(c.generators[g].bus) == i) con.expr.add_lin(vpg[g], -1.0);
    con.expr.add_lin(vcpd[i], -1.0);
    con.expr.add_lin(vcpr[i], 1.0);
    con.expr.constant = c.buses[i].p_load + xid[i] - c.buses[i].p_res - xir[i];
    qc.constraints.push_back(std::move(con));
  }
  for (int i = 0; i < nb; ++i) {
    const double delta = c.buses[i].q_over_p.value_or(0.0);
    QuadCon con;
    con.sense = Sense::Eq;
    con.name = "Q balance[" + std::to_string(c.buses[i].id) + "]";
    for (int k = 0; k < nc; ++k) {
      const Corridor& co = topo.corridors[k];
      if (co.a != i && co.b != i) continue;
      if (co.n0 > 0) add_flow_terms(con.expr, k, co.a == i, co.g0, co.b0, -co.n0, true, co.bsh0);
      if (installed[k] > 0)
        add_flow_terms(con.expr, k, co.a == i, co.gc, co.bc, -installed[k], true, co.bshc);
    }
    for (int g = 0; g < ng; ++g)
      if (c.bus_index(c.generators[g].bus) == i) con.expr.add_lin(vqg[g], -1.0);
    con.expr.add_lin(vcpd[i], -delta);
    if (c.buses[i].b_shunt != 0.0) con.expr.add_lin(vcii[i], -c.buses[i].b_shunt);
    con.expr.constant = delta * (c.buses[i].p_load + xid[i]);
    qc.constraints.push_back(std::move(con));
  }

  // Flow limits (per circuit) and voltage boxes.
  for (int k = 0; k < nc; ++k) {
    const Corridor& co = topo.corridors[k];
    auto flow_limit = [&](bool at_a, double g, double b, double cap, const char* what) {
      for (double sgn : {1.0, -1.0}) {
        QuadCon con;
        con.sense = Sense::Le;
        con.name = std::string(what) + (sgn > 0 ? " ub[" : " lb[") + corr_tag(co) + "]";
        add_flow_terms(con.expr, k, at_a, g, b, sgn, false, 0.0);
        con.expr.constant -= cap;
        qc.constraints.push_back(std::move(con));
      }
    };
    if (co.n0 > 0) {
      flow_limit(true, co.g0, co.b0, co.pmax0, "base P send");
      flow_limit(false, co.g0, co.b0, co.pmax0, "base P recv");
    }
    if (installed[k] > 0) {
      flow_limit(true, co.gc, co.bc, co.pmaxc, "cand P send");
      flow_limit(false, co.gc, co.bc, co.pmaxc, "cand P recv");
      // Reactive candidate flows carry the big-M cap per circuit.
      auto q_limit = [&](bool at_a) {
        for (double sgn : {1.0, -1.0}) {
          QuadCon con;
          con.sense = Sense::Le;
          con.name = std::string("cand Q cap") + (sgn > 0 ? " ub[" : " lb[") + corr_tag(co) + "]";
          add_flow_terms(con.expr, k, at_a, co.gc, co.bc, sgn, true, co.bshc);
          con.expr.constant -= c.big_m;
          qc.constraints.push_back(std::move(con));
        }
      };
      q_limit(true);
      q_limit(false);
    }
  }
  for (int i = 0; i < nb; ++i) {
    QuadCon up;
    up.sense = Sense::Le;
    up.name = "V ub[" + std::to_string(c.buses[i].id) + "]";
    up.expr.add_lin(vcii[i], 1.0);
    up.expr.constant = -c.buses[i].v_max * c.buses[i].v_max;
    qc.constraints.push_back(std::move(up));
    QuadCon lo;
    lo.sense = Sense::Le;
    lo.name = "V lb[" + std::to_string(c.buses[i].id) + "]";
    lo.expr.add_lin(vcii[i], -1.0);
    lo.expr.constant = c.buses[i].v_min * c.buses[i].v_min;
    qc.constraints.push_back(std::move(lo));
  }

  // Operation cost only; the frozen investment is constant.
  const double ann = c.annualization;
  for (int g = 0; g < ng; ++g) {
    qc.objective.add_lin(vpg[g], c.generators[g].cost_a / ann);
    qc.objective.constant += c.generators[g].cost_b / ann;
  }
  for (int i = 0; i < nb; ++i) {
    qc.objective.add_lin(vcpd[i], c.gamma_d);
    qc.objective.add_lin(vcpr[i], c.gamma_r);
  }
  return qc;
}

NonconvexTep build_deterministic_tep(const NetworkCase& c) {
  NonconvexTep t;
  t.netcase = c;
  t.topo = build_topology(c);
  return t;
}

}  // namespace rtep
