#include "rtep/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace rtep {

namespace {
std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << std::setprecision(12);
  return out;
}
}  // namespace

void write_plan_file(const std::string& path, const CompactRobustModel& m, const TepPlan& p,
                     double ud, double ur, double total_cost_yr) {
  auto out = open_out(path);
  out << "# rtep plan\n";
  out << "case " << m.netcase.name << "\n";
  out << "ud_percent " << ud << "\n";
  out << "ur_percent " << ur << "\n";
  out << "investment_usd_yr " << p.investment_cost << "\n";
  out << "total_cost_usd_yr " << total_cost_yr << "\n";
  for (auto& [key, cnt] : plan_counts(m, p))
    out << "corridor " << key.first << " " << key.second << " " << cnt << "\n";
}

TepPlan read_plan_file(const std::string& path, const CompactRobustModel& m) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open plan file '" + path + "'");
  std::map<std::pair<int, int>, int> counts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key) || key[0] == '#') continue;
    if (key == "corridor") {
      int a, b, n;
      if (!(ss >> a >> b >> n)) throw ParseError("bad corridor row in plan", lineno);
      counts[{a, b}] = n;
    }
  }
  return make_plan(m, counts);
}

void write_trace_csv(const std::string& path, const CompactRobustModel& m,
                     const BendersState& st) {
  auto out = open_out(path);
  out << "p,lb_usd_yr,ub_usd_yr,rel_gap,sd_usd_yr,master_nodes,plan,xi\n";
  for (const auto& it : st.trace) {
    out << it.p << "," << it.lb_yr << "," << it.ub_yr << "," << it.gap << "," << it.sd_yr
        << "," << it.master_nodes << ",\"" << plan_to_string(m, it.plan) << "\",\"";
    for (int k = 0; k < it.xi.size(); ++k) out << (k ? " " : "") << it.xi[k];
    out << "\"\n";
  }
}

CostBreakdown cost_breakdown(const CompactRobustModel& m, const TepPlan& plan,
                             const PrimalSlaveSolution& s) {
  CostBreakdown cb;
  cb.investment_yr = plan.investment_cost;
  const VariableSpace& v = m.vars;
  double gen_raw = 0.0, cur_raw = 0.0;
  for (int g = 0; g < v.ng; ++g)
    gen_raw += m.F_s[v.p_g(g)] * s.y_s[v.p_g(g)];
  gen_raw += m.F_c;
  for (int i = 0; i < v.nb; ++i) {
    cur_raw += m.F_s[v.cp_d(i)] * s.y_s[v.cp_d(i)] + m.F_s[v.cp_r(i)] * s.y_s[v.cp_r(i)];
    cb.cp_d_pu += s.y_s[v.cp_d(i)];
    cb.cp_r_pu += s.y_s[v.cp_r(i)];
  }
  cb.generation_yr = gen_raw * m.annualization();
  cb.curtailment_yr = cur_raw * m.annualization();
  cb.total_yr = cb.investment_yr + cb.generation_yr + cb.curtailment_yr;
  return cb;
}

void write_solution_report(const std::string& path, const CompactRobustModel& m,
                           const BendersResult& res, const CostBreakdown& costs) {
  auto out = open_out(path);
  out << "# rtep robust solution\n";
  out << "case " << m.netcase.name << "\n";
  out << "converged " << (res.state.converged ? 1 : 0) << "\n";
  out << "iterations " << res.state.iterations << "\n";
  out << "lb_usd_yr " << res.state.lb_yr << "\n";
  out << "ub_usd_yr " << res.state.ub_yr << "\n";
  out << "plan " << plan_to_string(m, res.plan) << "\n";
  out << "investment_usd_yr " << costs.investment_yr << "\n";
  out << "generation_usd_yr " << costs.generation_yr << "\n";
  out << "curtailment_usd_yr " << costs.curtailment_yr << "\n";
  out << "total_usd_yr " << costs.total_yr << "\n";
  out << "cp_d_pu " << costs.cp_d_pu << "\n";
  out << "cp_r_pu " << costs.cp_r_pu << "\n";
  out << "worst_case_xi_pu";
  for (int k = 0; k < res.worst_case.xi.size(); ++k) out << " " << res.worst_case.xi[k];
  out << "\n";
}

void write_mcs_report(const std::string& path, const McsReport& rep) {
  auto out = open_out(path);
  out << "# rtep mcs report\n";
  out << "samples " << rep.n_samples << "\n";
  out << "seed " << rep.seed << "\n";
  out << "converged " << rep.converged << "\n";
  out << "feasible " << rep.feasible << "\n";
  if (rep.fraction_defined)
    out << "robustness_fraction " << rep.robustness_fraction << "\n";
  else
    out << "robustness_fraction undefined\n";
  out << "worst_violation_pu " << rep.worst_violation << "\n";
  out << "# id status objective_usd_yr max_violation_pu cp_total_pu feasible\n";
  for (const auto& s : rep.samples) {
    const char* st = s.status == NlpStatus::Converged
                         ? "converged"
                         : (s.status == NlpStatus::MaxIterations ? "maxiter" : "failed");
    out << "sample " << s.id << " " << st << " " << s.objective_yr << " " << s.max_violation
        << " " << s.cp_total << " " << (s.feasible ? 1 : 0) << "\n";
  }
}

void write_dualgap_table(const std::string& path, const std::vector<DualityGapRecord>& recs) {
  auto out = open_out(path);
  out << "system,topology,primal_usd_yr,dual_usd_yr,rel_gap\n";
  for (const auto& r : recs)
    out << r.system << "," << r.topology << "," << r.primal_yr << "," << r.dual_yr << ","
        << r.rel_gap << "\n";
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  auto out = open_out(path);
  out << "ud_percent,ur_percent,total_usd_yr,pct_increase_vs_det,cp_d_pu,converged,plan\n";
  for (const auto& r : rows)
    out << r.ud << "," << r.ur << "," << r.total_yr << "," << r.pct_increase << "," << r.cp_d_pu
        << "," << (r.converged ? 1 : 0) << ",\"" << r.plan << "\"\n";
}

}  // namespace rtep
