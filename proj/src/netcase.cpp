#include "rtep/netcase.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace rtep {

int NetworkCase::bus_index(int id) const {
  for (int i = 0; i < n_buses(); ++i)
    if (buses[i].id == id) return i;
  throw ValidationError("unknown bus id " + std::to_string(id));
}

double NetworkCase::total_load_p() const {
  double s = 0;
  for (const auto& b : buses) s += b.p_load;
  return s;
}

double NetworkCase::total_load_q() const {
  double s = 0;
  for (const auto& b : buses)
    if (b.q_over_p) s += b.p_load * *b.q_over_p;
  return s;
}

double NetworkCase::total_gen_capacity() const {
  double s = 0;
  for (const auto& g : generators) s += g.p_max;
  return s;
}

double NetworkCase::total_res() const {
  double s = 0;
  for (const auto& b : buses) s += b.p_res;
  return s;
}

namespace {

bool finite(double v) { return std::isfinite(v); }

void check(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace

void validate_case(const NetworkCase& c) {
  check(!c.buses.empty(), "case has no buses");
  std::map<int, int> seen;
  for (const auto& b : c.buses) {
    check(seen.emplace(b.id, 1).second, "duplicate bus id " + std::to_string(b.id));
    const std::string tag = "bus " + std::to_string(b.id) + ": ";
    check(finite(b.p_load) && finite(b.p_res) && finite(b.b_shunt) && finite(b.v_min) &&
              finite(b.v_max),
          tag + "non-finite field");
    check(b.p_load >= 0, tag + "p_load must be >= 0");
    check(b.p_res >= 0, tag + "p_res must be >= 0");
    check(b.v_min > 0 && b.v_min <= b.v_max, tag + "requires 0 < v_min <= v_max");
    if (b.p_load > 0)
      check(b.q_over_p.has_value() && finite(*b.q_over_p),
            tag + "q_over_p required when p_load > 0");
    else
      check(!b.q_over_p.has_value(), tag + "q_over_p must be absent when p_load = 0");
  }
  check(seen.count(c.angle_ref_bus) == 1,
        "angle_ref_bus " + std::to_string(c.angle_ref_bus) + " is not a bus");

  for (const auto& g : c.generators) {
    const std::string tag = "gen at bus " + std::to_string(g.bus) + ": ";
    check(seen.count(g.bus) == 1, tag + "unknown bus");
    check(finite(g.p_min) && finite(g.p_max) && finite(g.q_min) && finite(g.q_max) &&
              finite(g.cost_a) && finite(g.cost_b),
          tag + "non-finite field");
    check(g.p_min <= g.p_max, tag + "p_min > p_max");
    check(g.q_min <= g.q_max, tag + "q_min > q_max");
  }

  auto check_endpoints = [&](int from, int to, const std::string& tag) {
    check(seen.count(from) == 1 && seen.count(to) == 1, tag + "unknown endpoint bus");
    check(from != to, tag + "self-loop");
  };
  for (const auto& l : c.existing_lines) {
    const std::string tag =
        "line0 " + std::to_string(l.from) + "-" + std::to_string(l.to) + ": ";
    check_endpoints(l.from, l.to, tag);
    check(finite(l.g) && finite(l.b) && finite(l.b_sh_half) && finite(l.p_max),
          tag + "non-finite field");
    check(l.n0 >= 1, tag + "n0 must be >= 1");
    check(l.p_max > 0, tag + "p_max must be > 0");
  }
  for (const auto& l : c.candidate_corridors) {
    const std::string tag =
        "candidate " + std::to_string(l.from) + "-" + std::to_string(l.to) + ": ";
    check_endpoints(l.from, l.to, tag);
    check(finite(l.g) && finite(l.b) && finite(l.b_sh_half) && finite(l.p_max) &&
              finite(l.install_cost),
          tag + "non-finite field");
    check(l.n_max >= 1, tag + "n_max must be >= 1");
    check(l.install_cost > 0, tag + "install_cost must be > 0");
    check(l.p_max > 0, tag + "p_max must be > 0");
    check(l.install_cost / c.annualization < 12.0,
          tag + "install_cost exceeds the scaled bound (cost/annualization must be < 12)");
  }
  // No duplicate corridors within a list (a corridor may appear in both lists).
  std::map<std::pair<int, int>, int> corr;
  for (const auto& l : c.existing_lines) {
    auto key = std::minmax(l.from, l.to);
    check(corr.emplace(std::make_pair(key.first, key.second), 1).second,
          "duplicate base corridor " + std::to_string(l.from) + "-" + std::to_string(l.to));
  }
  corr.clear();
  for (const auto& l : c.candidate_corridors) {
    auto key = std::minmax(l.from, l.to);
    check(corr.emplace(std::make_pair(key.first, key.second), 1).second,
          "duplicate candidate corridor " + std::to_string(l.from) + "-" +
              std::to_string(l.to));
  }

  check(finite(c.base_mva) && c.base_mva > 0, "base_mva must be > 0");
  check(finite(c.gamma_d) && c.gamma_d > 0, "gamma_d must be > 0");
  check(finite(c.gamma_r) && c.gamma_r > 0, "gamma_r must be > 0");
  check(finite(c.big_m) && c.big_m > 0, "big_m must be > 0");
  check(finite(c.big_l) && c.big_l >= 10.0 * c.big_m, "big_l must be >= 10*big_m");
  check(finite(c.bd_tolerance) && c.bd_tolerance > 0, "bd_tolerance must be > 0");
  check(finite(c.eps_theta) && c.eps_theta > 0, "eps_theta must be > 0");
  check(finite(c.annualization) && c.annualization > 0, "annualization must be > 0");
}

namespace {

struct Tokenizer {
  std::istringstream in;
  int lineno;
  std::string context;

  Tokenizer(const std::string& line, int lineno, std::string context)
      : in(line), lineno(lineno), context(std::move(context)) {}

  double num(const char* field) {
    std::string tok;
    if (!(in >> tok))
      throw ParseError(context + ": missing field '" + field + "'", lineno);
    try {
      size_t pos = 0;
      double v = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      if (!std::isfinite(v))
        throw ParseError(context + ": field '" + field + "' is not finite", lineno);
      return v;
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError(context + ": bad number '" + tok + "' for field '" + field + "'",
                       lineno);
    }
  }

  int integer(const char* field) {
    double v = num(field);
    if (v != std::floor(v))
      throw ParseError(context + ": field '" + field + "' must be an integer", lineno);
    return static_cast<int>(v);
  }

  // "-" denotes an absent optional value.
  std::optional<double> opt_num(const char* field) {
    std::string tok;
    if (!(in >> tok))
      throw ParseError(context + ": missing field '" + field + "'", lineno);
    if (tok == "-") return std::nullopt;
    in.putback(' ');
    for (auto it = tok.rbegin(); it != tok.rend(); ++it) in.putback(*it);
    return num(field);
  }

  void done() {
    std::string tok;
    if (in >> tok)
      throw ParseError(context + ": unexpected trailing field '" + tok + "'", lineno);
  }
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

NetworkCase parse_case_text(const std::string& text, const std::string& origin) {
  NetworkCase c;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  bool have_ref = false;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(origin + ": unterminated section header", lineno);
      section = line.substr(1, line.size() - 2);
      if (section != "system" && section != "bus" && section != "gen" && section != "line0" &&
          section != "candidate")
        throw ParseError(origin + ": unknown section [" + section + "]", lineno);
      continue;
    }
    if (section.empty())
      throw ParseError(origin + ": data before any section header", lineno);

    if (section == "system") {
      size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ParseError(origin + ": expected 'key = value' in [system]", lineno);
      std::string key = trim(line.substr(0, eq));
      std::string val = trim(line.substr(eq + 1));
      if (key == "name") {
        c.name = val;
        continue;
      }
      Tokenizer t(val, lineno, origin + " [system] " + key);
      if (key == "base_mva") c.base_mva = t.num(key.c_str());
      else if (key == "angle_ref_bus") { c.angle_ref_bus = t.integer(key.c_str()); have_ref = true; }
      else if (key == "gamma_d") c.gamma_d = t.num(key.c_str());
      else if (key == "gamma_r") c.gamma_r = t.num(key.c_str());
      else if (key == "big_m") c.big_m = t.num(key.c_str());
      else if (key == "big_l") c.big_l = t.num(key.c_str());
      else if (key == "bd_tolerance") c.bd_tolerance = t.num(key.c_str());
      else if (key == "eps_theta") c.eps_theta = t.num(key.c_str());
      else if (key == "annualization") c.annualization = t.num(key.c_str());
      else throw ParseError(origin + ": unknown [system] key '" + key + "'", lineno);
      t.done();
    } else if (section == "bus") {
      Tokenizer t(line, lineno, origin + " [bus]");
      Bus b;
      b.id = t.integer("id");
      b.p_load = t.num("p_load");
      b.q_over_p = t.opt_num("q_over_p");
      b.p_res = t.num("p_res");
      b.b_shunt = t.num("b_shunt");
      b.v_min = t.num("v_min");
      b.v_max = t.num("v_max");
      t.done();
      c.buses.push_back(b);
    } else if (section == "gen") {
      Tokenizer t(line, lineno, origin + " [gen]");
      Generator g;
      g.bus = t.integer("bus");
      g.p_min = t.num("p_min");
      g.p_max = t.num("p_max");
      g.q_min = t.num("q_min");
      g.q_max = t.num("q_max");
      g.cost_a = t.num("cost_a");
      g.cost_b = t.num("cost_b");
      t.done();
      c.generators.push_back(g);
    } else if (section == "line0") {
      Tokenizer t(line, lineno, origin + " [line0]");
      ExistingCorridor l;
      l.from = t.integer("from");
      l.to = t.integer("to");
      l.n0 = t.integer("n0");
      l.g = t.num("g");
      l.b = t.num("b");
      l.b_sh_half = t.num("b_sh_half");
      l.p_max = t.num("p_max");
      t.done();
      c.existing_lines.push_back(l);
    } else {  // candidate
      Tokenizer t(line, lineno, origin + " [candidate]");
      CandidateCorridor l;
      l.from = t.integer("from");
      l.to = t.integer("to");
      l.n_max = t.integer("n_max");
      l.g = t.num("g");
      l.b = t.num("b");
      l.b_sh_half = t.num("b_sh_half");
      l.p_max = t.num("p_max");
      l.install_cost = t.num("install_cost");
      t.done();
      c.candidate_corridors.push_back(l);
    }
  }
  if (!have_ref && !c.buses.empty()) c.angle_ref_bus = c.buses.front().id;
  validate_case(c);
  return c;
}

NetworkCase parse_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_case_text(ss.str(), path);
}

std::string serialize_case(const NetworkCase& c) {
  std::ostringstream o;
  char buf[256];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  o << "[system]\n";
  o << "name = " << c.name << "\n";
  o << "base_mva = " << num(c.base_mva) << "\n";
  o << "angle_ref_bus = " << c.angle_ref_bus << "\n";
  o << "gamma_d = " << num(c.gamma_d) << "\n";
  o << "gamma_r = " << num(c.gamma_r) << "\n";
  o << "big_m = " << num(c.big_m) << "\n";
  o << "big_l = " << num(c.big_l) << "\n";
  o << "bd_tolerance = " << num(c.bd_tolerance) << "\n";
  o << "eps_theta = " << num(c.eps_theta) << "\n";
  o << "annualization = " << num(c.annualization) << "\n";
  o << "\n[bus]\n# id p_load q_over_p p_res b_shunt v_min v_max\n";
  for (const auto& b : c.buses) {
    o << b.id << " " << num(b.p_load) << " "
      << (b.q_over_p ? num(*b.q_over_p) : std::string("-")) << " " << num(b.p_res) << " "
      << num(b.b_shunt) << " " << num(b.v_min) << " " << num(b.v_max) << "\n";
  }
  o << "\n[gen]\n# bus p_min p_max q_min q_max cost_a cost_b\n";
  for (const auto& g : c.generators) {
    o << g.bus << " " << num(g.p_min) << " " << num(g.p_max) << " " << num(g.q_min) << " "
      << num(g.q_max) << " " << num(g.cost_a) << " " << num(g.cost_b) << "\n";
  }
  o << "\n[line0]\n# from to n0 g b b_sh_half p_max\n";
  for (const auto& l : c.existing_lines) {
    o << l.from << " " << l.to << " " << l.n0 << " " << num(l.g) << " " << num(l.b) << " "
      << num(l.b_sh_half) << " " << num(l.p_max) << "\n";
  }
  o << "\n[candidate]\n# from to n_max g b b_sh_half p_max install_cost\n";
  for (const auto& l : c.candidate_corridors) {
    o << l.from << " " << l.to << " " << l.n_max << " " << num(l.g) << " " << num(l.b) << " "
      << num(l.b_sh_half) << " " << num(l.p_max) << " " << num(l.install_cost) << "\n";
  }
  return o.str();
}

void write_case(const NetworkCase& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write case file '" + path + "'");
  out << serialize_case(c);
}

UncertaintyBox build_uncertainty_box(const NetworkCase& c, double u_d, double u_r) {
  if (u_d < 0 || u_r < 0) throw ValidationError("uncertainty percentages must be >= 0");
  if (u_r > 100) throw ValidationError("u_r cannot exceed 100 (RES output stays nonnegative)");
  const int nb = c.n_buses();
  UncertaintyBox box;
  box.u_d = u_d;
  box.u_r = u_r;
  box.xi_min = VecX::Zero(2 * nb);
  box.xi_max = VecX::Zero(2 * nb);
  for (int i = 0; i < nb; ++i) {
    const double wd = u_d * c.buses[i].p_load / 100.0;
    box.xi_max[i] = wd;
    box.xi_min[i] = -wd;
    const double wr = u_r * c.buses[i].p_res / 100.0;
    box.xi_max[nb + i] = 0.0;
    box.xi_min[nb + i] = -wr;
  }
  return box;
}

}  // namespace rtep
