#include <cmath>
#include <random>

#include "rtep/qcmodel.hpp"
#include "rtep/verify.hpp"

namespace rtep {

namespace {

struct AcopfVars {
  std::vector<int> e, f, pg, qg, cpd, cpr;
};

// Adds the real or reactive per-circuit flow expression of corridor k seen
// from one end, scale times, in rectangular voltage variables.
void add_flow(QuadExpr& ex, const AcopfVars& vv, const Corridor& co, bool at_a, double g,
              double b, double bsh, double scale, bool reactive) {
  int ei = at_a ? vv.e[co.a] : vv.e[co.b];
  int fi = at_a ? vv.f[co.a] : vv.f[co.b];
  int ea = vv.e[co.a], eb = vv.e[co.b], fa = vv.f[co.a], fb = vv.f[co.b];
  double ssign = at_a ? 1.0 : -1.0;  // s_ij seen from this end
  if (!reactive) {
    // g*c_ii - g*c_ij - b*s(side)
    ex.add_quad(ei, ei, scale * g);
    ex.add_quad(fi, fi, scale * g);
    ex.add_quad(ea, eb, -scale * g);
    ex.add_quad(fa, fb, -scale * g);
    ex.add_quad(fa, eb, -scale * ssign * b);
    ex.add_quad(fb, ea, scale * ssign * b);
  } else {
    // (b+bsh)*c_ii - b*c_ij + g*s(side)
    ex.add_quad(ei, ei, scale * (b + bsh));
    ex.add_quad(fi, fi, scale * (b + bsh));
    ex.add_quad(ea, eb, -scale * b);
    ex.add_quad(fa, fb, -scale * b);
    ex.add_quad(fa, eb, scale * ssign * g);
    ex.add_quad(fb, ea, -scale * ssign * g);
  }
}

QcProblem build_acopf(const NetworkCase& c, const TepTopology& topo,
                      const std::vector<int>& installed, const VecX& xid, const VecX& xir,
                      AcopfVars& vv) {
  const int nb = c.n_buses();
  const int ng = static_cast<int>(c.generators.size());
  const int ref = c.bus_index(c.angle_ref_bus);
  QcProblem qc;
  qc.name = "acopf[" + c.name + "]";
  vv.e.resize(nb);
  vv.f.resize(nb);
  vv.pg.resize(ng);
  vv.qg.resize(ng);
  vv.cpd.resize(nb);
  vv.cpr.resize(nb);
  for (int i = 0; i < nb; ++i) vv.e[i] = qc.add_var(-kInf, kInf, 1.0);
  for (int i = 0; i < nb; ++i)
    vv.f[i] = i == ref ? qc.add_var(0.0, 0.0, 0.0) : qc.add_var(-kInf, kInf, 0.0);
  for (int g = 0; g < ng; ++g)
    vv.pg[g] = qc.add_var(c.generators[g].p_min, c.generators[g].p_max,
                          0.5 * (c.generators[g].p_min + c.generators[g].p_max));
  for (int g = 0; g < ng; ++g)
    vv.qg[g] = qc.add_var(c.generators[g].q_min, c.generators[g].q_max,
                          0.5 * (c.generators[g].q_min + c.generators[g].q_max));
  for (int i = 0; i < nb; ++i)
    vv.cpd[i] = qc.add_var(0.0, std::max(0.0, c.buses[i].p_load + xid[i]), 0.0);
  for (int i = 0; i < nb; ++i)
    vv.cpr[i] = qc.add_var(0.0, std::max(0.0, c.buses[i].p_res + xir[i]), 0.0);

  const int nc = static_cast<int>(topo.corridors.size());
  for (int i = 0; i < nb; ++i) {
    QuadCon con;
    con.sense = Sense::Eq;
    con.name = "P balance[" + std::to_string(c.buses[i].id) + "]";
    for (int k = 0; k < nc; ++k) {
      const Corridor& co = topo.corridors[k];
      if (co.a != i && co.b != i) continue;
      if (co.n0 > 0) add_flow(con.expr, vv, co, co.a == i, co.g0, co.b0, co.bsh0, co.n0, false);
      if (installed[k] > 0)
        add_flow(con.expr, vv, co, co.a == i, co.gc, co.bc, co.bshc, installed[k], false);
    }
    for (int g = 0; g < ng; ++g)
      if (c.bus_index(c.generators[g].bus) == i) con.expr.add_lin(vv.pg[g], -1.0);
    con.expr.add_lin(vv.cpd[i], -1.0);
    con.expr.add_lin(vv.cpr[i], 1.0);
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
      if (co.n0 > 0) add_flow(con.expr, vv, co, co.a == i, co.g0, co.b0, co.bsh0, -co.n0, true);
      if (installed[k] > 0)
        add_flow(con.expr, vv, co, co.a == i, co.gc, co.bc, co.bshc, -installed[k], true);
    }
    for (int g = 0; g < ng; ++g)
      if (c.bus_index(c.generators[g].bus) == i) con.expr.add_lin(vv.qg[g], -1.0);
    if (delta != 0.0) con.expr.add_lin(vv.cpd[i], -delta);
    if (c.buses[i].b_shunt != 0.0) {
      con.expr.add_quad(vv.e[i], vv.e[i], -c.buses[i].b_shunt);
      con.expr.add_quad(vv.f[i], vv.f[i], -c.buses[i].b_shunt);
    }
    con.expr.constant = delta * (c.buses[i].p_load + xid[i]);
    qc.constraints.push_back(std::move(con));
  }
  for (int k = 0; k < nc; ++k) {
    const Corridor& co = topo.corridors[k];
    auto limit = [&](bool at_a, double g, double b, double cap, const char* tagud,
                     double sgn) {
      QuadCon con;
      con.sense = Sense::Le;
      con.name = std::string("P flow ") + tagud + "[" + std::to_string(co.id_a) + "-" +
                 std::to_string(co.id_b) + (at_a ? " send]" : " recv]");
      add_flow(con.expr, vv, co, at_a, g, b, 0.0, sgn, false);
      con.expr.constant = -cap;
      qc.constraints.push_back(std::move(con));
    };
    if (co.n0 > 0)
      for (bool at_a : {true, false})
        for (double sgn : {1.0, -1.0})
          limit(at_a, co.g0, co.b0, co.pmax0, sgn > 0 ? "ub" : "lb", sgn);
    if (installed[k] > 0)
      for (bool at_a : {true, false})
        for (double sgn : {1.0, -1.0})
          limit(at_a, co.gc, co.bc, co.pmaxc, sgn > 0 ? "ub" : "lb", sgn);
  }
  for (int i = 0; i < nb; ++i) {
    QuadCon up;
    up.sense = Sense::Le;
    up.name = "V ub[" + std::to_string(c.buses[i].id) + "]";
    up.expr.add_quad(vv.e[i], vv.e[i], 1.0);
    up.expr.add_quad(vv.f[i], vv.f[i], 1.0);
    up.expr.constant = -c.buses[i].v_max * c.buses[i].v_max;
    qc.constraints.push_back(std::move(up));
    QuadCon lo;
    lo.sense = Sense::Le;
    lo.name = "V lb[" + std::to_string(c.buses[i].id) + "]";
    lo.expr.add_quad(vv.e[i], vv.e[i], -1.0);
    lo.expr.add_quad(vv.f[i], vv.f[i], -1.0);
    lo.expr.constant = c.buses[i].v_min * c.buses[i].v_min;
    qc.constraints.push_back(std::move(lo));
  }

  const double ann = c.annualization;
  for (int g = 0; g < ng; ++g) {
    qc.objective.add_lin(vv.pg[g], c.generators[g].cost_a / ann);
    qc.objective.constant += c.generators[g].cost_b / ann;
  }
  for (int i = 0; i < nb; ++i) {
    qc.objective.add_lin(vv.cpd[i], c.gamma_d);
    qc.objective.add_lin(vv.cpr[i], c.gamma_r);
  }
  return qc;
}

double violation_of(const QcProblem& qc, const VecX& x) {
  double v = 0.0;
  for (const auto& con : qc.constraints) {
    double r = con.expr.value(x);
    v = std::max(v, con.sense == Sense::Eq ? std::abs(r) : r);
  }
  for (int i = 0; i < qc.n; ++i) {
    if (std::isfinite(qc.lb[i])) v = std::max(v, qc.lb[i] - x[i]);
    if (std::isfinite(qc.ub[i])) v = std::max(v, x[i] - qc.ub[i]);
  }
  return v;
}

}  // namespace

AcopfSolution acopf_solve(const NetworkCase& c, const TepPlan& plan, const VecX& xi,
                          const AcopfOptions& opts) {
  TepTopology topo = build_topology(c);
  const int nb = c.n_buses();
  std::vector<int> installed(topo.corridors.size(), 0);
  for (size_t l = 0; l < topo.lines.size(); ++l)
    if (plan.y_m[l]) installed[topo.lines[l].corridor]++;
  VecX xid = xi.size() ? VecX(xi.head(nb)) : VecX::Zero(nb);
  VecX xir = xi.size() ? VecX(xi.tail(nb)) : VecX::Zero(nb);

  AcopfVars vv;
  QcProblem qc = build_acopf(c, topo, installed, xid, xir, vv);

  AcopfSolution best;
  std::mt19937_64 rng(opts.seed);
  auto uniform = [&rng]() { return (rng() >> 11) * 0x1.0p-53; };

  for (int attempt = 0; attempt < std::max(1, opts.max_starts); ++attempt) {
    QcProblem trial = qc;
    if (attempt > 0) {
      // Random voltage perturbation around flat start (+-5%).
      for (int i = 0; i < nb; ++i) {
        trial.x0[vv.e[i]] = 1.0 + 0.1 * (uniform() - 0.5);
        if (trial.lb[vv.f[i]] != 0.0 || trial.ub[vv.f[i]] != 0.0)
          trial.x0[vv.f[i]] = 0.1 * (uniform() - 0.5);
      }
    }
    NlpSolution nlp = pdipm_solve(make_nlp(trial), opts.ipm);
    if (nlp.status == NlpStatus::Converged) {
      double viol = violation_of(qc, nlp.x);
      if (best.status != NlpStatus::Converged || nlp.objective < best.objective_yr / c.annualization) {
        best.status = nlp.status;
        best.objective_yr = nlp.objective * c.annualization;
        best.max_violation = viol;
        best.e = VecX(nb);
        best.f = VecX(nb);
        for (int i = 0; i < nb; ++i) {
          best.e[i] = nlp.x[vv.e[i]];
          best.f[i] = nlp.x[vv.f[i]];
        }
        best.p_g = VecX(c.generators.size());
        best.q_g = VecX(c.generators.size());
        for (size_t g = 0; g < c.generators.size(); ++g) {
          best.p_g[static_cast<int>(g)] = nlp.x[vv.pg[g]];
          best.q_g[static_cast<int>(g)] = nlp.x[vv.qg[g]];
        }
        best.cp_d = VecX(nb);
        best.cp_r = VecX(nb);
        for (int i = 0; i < nb; ++i) {
          best.cp_d[i] = nlp.x[vv.cpd[i]];
          best.cp_r[i] = nlp.x[vv.cpr[i]];
        }
      }
      best.starts_used = attempt + 1;
      break;  // first converged start wins; later starts only on failure
    }
    best.starts_used = attempt + 1;
  }
  return best;
}

}  // namespace rtep
