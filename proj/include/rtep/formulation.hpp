#pragma once

#include <map>
#include <string>
#include <vector>

#include "rtep/netcase.hpp"
#include "rtep/qcmodel.hpp"

namespace rtep {

// A corridor merges the base-topology circuits and the candidate additions
// between one pair of buses; c_ij/s_ij/cone variables live per corridor.
struct Corridor {
  int a = 0, b = 0;          // bus indices, a < b
  int id_a = 0, id_b = 0;    // original bus ids
  int n0 = 0;                // base circuits (0 when purely candidate)
  double g0 = 0, b0 = 0, bsh0 = 0, pmax0 = 0;
  int cand_max = 0;          // candidate circuits allowed (0 when none)
  double gc = 0, bc = 0, bshc = 0, pmaxc = 0;
  double ic_yr = 0;          // $/yr per candidate circuit
};

struct CandLine {
  int corridor = 0;
  int k = 0;  // 1-based position within the corridor
};

struct TepTopology {
  std::vector<Corridor> corridors;  // sorted by (a, b)
  std::vector<CandLine> lines;      // corridor-major, k ascending
  int find_corridor(int bus_idx_a, int bus_idx_b) const;  // -1 if absent
};

TepTopology build_topology(const NetworkCase& c);

// Ordered index map over the continuous slave variables y_s and the cone
// variables y_cone. Binary variables y_m are indexed by TepTopology::lines.
struct VariableSpace {
  int nb = 0, ng = 0, nc = 0, nl = 0;

  int c_ii(int bus) const { return bus; }
  int c_ij(int corr) const { return nb + corr; }
  int s_ij(int corr) const { return nb + nc + corr; }
  int theta(int bus) const { return nb + 2 * nc + bus; }
  int p_g(int gen) const { return 2 * nb + 2 * nc + gen; }
  int q_g(int gen) const { return 2 * nb + 2 * nc + ng + gen; }
  int cp_d(int bus) const { return 2 * nb + 2 * nc + 2 * ng + bus; }
  int cp_r(int bus) const { return 3 * nb + 2 * nc + 2 * ng + bus; }
  int fp_s(int line) const { return 4 * nb + 2 * nc + 2 * ng + 4 * line; }
  int fp_r(int line) const { return fp_s(line) + 1; }
  int fq_s(int line) const { return fp_s(line) + 2; }
  int fq_r(int line) const { return fp_s(line) + 3; }
  int n_ys() const { return 4 * nb + 2 * nc + 2 * ng + 4 * nl; }

  int cone(int corr, int comp) const { return 4 * corr + comp; }  // D1..D4
  int n_cone() const { return 4 * nc; }

  std::string ys_name(int idx) const;  // for dumps and index-map exports
};

enum class Block { A, TG, Be, Bie, Ulink };

// One linear row of the robust model with its provenance. Cone rows are
// structural (one per corridor, fixed H) and are not stored here.
struct NamedRow {
  std::string name;  // includes the paper-side dual label
  Block block = Block::Bie;
  std::vector<std::pair<int, double>> ym, ys, ycone;
  std::vector<std::pair<int, double>> xi;
  double rhs = 0.0;

  double eval(const VecX& vym, const VecX& vys, const VecX& vycone, const VecX& vxi) const;
};

// Relaxed (rotated-cone) robust TEP before block assembly.
struct RobustTepModel {
  NetworkCase netcase;
  TepTopology topo;
  VariableSpace vars;
  std::vector<NamedRow> rows;
  UncertaintyBox box;
  VecX f_m, f_s;  // raw objective units: $/yr divided by annualization
  double f_c = 0.0;
};

// Convex relaxation with a zero-width box.
RobustTepModel build_relaxed_tep(const NetworkCase& c);
// Same rows with the uncertainty box attached.
RobustTepModel build_uncertain_tep(const NetworkCase& c, const UncertaintyBox& box);

// Block form of Eqs. "A y_m <= h; T y_m + G y_s <= r; B_e y_s + J_e xi = t_e;
// B_ie y_s + J_ie xi <= t_ie; y_cone + U y_s = 0; cone rows".
struct CompactRobustModel {
  NetworkCase netcase;
  TepTopology topo;
  VariableSpace vars;
  UncertaintyBox box;

  VecX F_m, F_s;
  double F_c = 0.0;

  SpMat A;
  VecX h;
  SpMat T, G;
  VecX r;
  SpMat B_e, J_e;
  VecX t_e;
  SpMat B_ie, J_ie;
  VecX t_ie;
  SpMat U;  // n_cone x n_ys

  std::vector<std::string> a_names, tg_names, be_names, bie_names, ulink_names, cone_names;
  std::vector<NamedRow> named;  // original rows, for the mapping tests

  int n_xi() const { return box.size(); }
  double annualization() const { return netcase.annualization; }
  // Cone value D1^2+D2^2+D3^2-D4^2 of corridor `corr` at a cone vector.
  static double cone_value(const VecX& ycone, int corr);
};

CompactRobustModel assemble_compact(const RobustTepModel& m);
CompactRobustModel build_compact(const NetworkCase& c, const UncertaintyBox& box);

void write_compact_debug(const CompactRobustModel& m, const std::string& path);

// Binary installation decisions x_ij^k flattened over TepTopology::lines.
struct TepPlan {
  std::vector<int> y_m;
  double investment_cost = 0.0;  // $/yr

  int installed() const;
  bool empty_plan() const { return installed() == 0; }
};

TepPlan make_plan(const CompactRobustModel& m, const std::map<std::pair<int, int>, int>& counts);
TepPlan make_plan_from_vector(const CompactRobustModel& m, const std::vector<int>& y_m);
// Counts per corridor keyed by (bus id, bus id), only nonzero entries.
std::map<std::pair<int, int>, int> plan_counts(const CompactRobustModel& m, const TepPlan& p);
std::string plan_to_string(const CompactRobustModel& m, const TepPlan& p);
// Eq-(3) sequential-installation validity.
bool plan_respects_ordering(const CompactRobustModel& m, const std::vector<int>& y_m);

// Non-convex rectangular-coordinate TEP (the exact model the relaxation
// relaxes); used by the optimality-gap suite via multi-start local solves.
struct NonconvexTep {
  NetworkCase netcase;
  TepTopology topo;

  // Freeze a plan (and optionally an uncertainty realization) into a solvable
  // program over {e, f, c, s, P_g, Q_g, CP, flows}.
  QcProblem at_plan(const TepPlan& plan, const VecX* xi = nullptr) const;
};

NonconvexTep build_deterministic_tep(const NetworkCase& c);

}  // namespace rtep
