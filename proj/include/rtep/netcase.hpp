#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rtep/common.hpp"

namespace rtep {

struct Bus {
  int id = 0;
  double p_load = 0.0;                  // rated real load P_d, pu
  std::optional<double> q_over_p;       // tan of load power-factor angle; set iff p_load > 0
  double p_res = 0.0;                   // rated RES generation P_r, pu
  double b_shunt = 0.0;                 // bus shunt susceptance, pu
  double v_min = 0.95;                  // |V| lower bound, pu
  double v_max = 1.05;                  // |V| upper bound, pu
};

struct Generator {
  int bus = 0;
  double p_min = 0.0, p_max = 0.0;      // pu
  double q_min = 0.0, q_max = 0.0;      // pu
  double cost_a = 0.0;                  // $/pu/yr
  double cost_b = 0.0;                  // $/yr
};

struct ExistingCorridor {
  int from = 0, to = 0;
  int n0 = 1;                           // identical circuits in the base topology
  double g = 0.0, b = 0.0;              // series admittance, pu
  double b_sh_half = 0.0;               // half line-charging susceptance, pu
  double p_max = 0.0;                   // per-line real power rating, pu
};

struct CandidateCorridor {
  int from = 0, to = 0;
  int n_max = 1;                        // identical new circuits allowed beyond the base
  double g = 0.0, b = 0.0;
  double b_sh_half = 0.0;
  double p_max = 0.0;
  double install_cost = 0.0;            // $/yr per circuit (annualized)
};

// Immutable after construction/validation; safe to share between solves.
struct NetworkCase {
  std::string name;
  std::vector<Bus> buses;
  int angle_ref_bus = 0;
  std::vector<Generator> generators;
  std::vector<ExistingCorridor> existing_lines;
  std::vector<CandidateCorridor> candidate_corridors;

  double base_mva = 100.0;
  double gamma_d = 100.0;               // load curtailment cost
  double gamma_r = 500.0;               // RES curtailment cost
  double big_m = 10.0;
  double big_l = 300.0;                 // bound on the Psi split variables
  double bd_tolerance = 1e-5;
  double eps_theta = 0.0044;            // rad
  double annualization = 8760.0;

  int n_buses() const { return static_cast<int>(buses.size()); }
  // Index of a bus id in `buses`; throws ValidationError for unknown ids.
  int bus_index(int id) const;

  double total_load_p() const;
  double total_load_q() const;
  double total_gen_capacity() const;
  double total_res() const;
};

// Interval uncertainty box over xi = (xi_d per bus, xi_r per bus), length 2*N_b.
// Load entries are symmetric about 0, RES entries one-sided non-positive.
struct UncertaintyBox {
  VecX xi_min, xi_max;
  double u_d = 0.0, u_r = 0.0;          // the percentages the box was built from

  int size() const { return static_cast<int>(xi_min.size()); }
  bool is_zero() const { return xi_min.isZero(0.0) && xi_max.isZero(0.0); }
};

// Throws ValidationError naming the offending field.
void validate_case(const NetworkCase& c);

// Parse the documented case format (sections [system], [bus], [gen], [line0],
// [candidate]). Throws ParseError with the line number on malformed input and
// ValidationError on invariant violations.
NetworkCase parse_case(const std::string& path);
NetworkCase parse_case_text(const std::string& text, const std::string& origin = "<string>");

std::string serialize_case(const NetworkCase& c);
void write_case(const NetworkCase& c, const std::string& path);

// xi_d in [-u_d*P_d/100, +u_d*P_d/100], xi_r in [-u_r*P_r/100, 0].
// Throws ValidationError on negative percentages.
UncertaintyBox build_uncertainty_box(const NetworkCase& c, double u_d, double u_r);

}  // namespace rtep
