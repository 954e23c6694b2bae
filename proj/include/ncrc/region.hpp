#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ncrc/channel.hpp"
#include "ncrc/rng.hpp"
#include "ncrc/scheduler.hpp"

namespace ncrc {

// ---------------------------------------------------------------------------
// Code-length oracles.
// ---------------------------------------------------------------------------

// Discrete per-scheduled-slot MI distribution on a lattice (bits/slot,
// already including the K symbols of a slot).
struct MiPmf {
  std::vector<double> values;
  std::vector<double> probs;

  void validate() const;
  double mean() const;
  double sample(Rng& rng) const;
};

// Pr{ T <= t } for the slot count T at which the accumulated MI first reaches
// message_bits; truncated when the survival probability drops below tail_tol.
std::vector<double> absorption_cdf(const MiPmf& pmf, double message_bits,
                                   double tail_tol = 1e-13);

// Expected stopping time of max_j T_j over independent members, i.e. the mean
// code length Lbar of a multicast group whose tracked members have the given
// per-slot MI distributions. Exact up to the stated tail tolerance.
double lbar_oracle_exact(const std::vector<MiPmf>& members, double message_bits);

// eta_gj for a straggler listening while the covered members finish:
// E[ min(S_{T_c}, M) ] / M with T_c the covered set's absorption time and S_t
// the straggler's accumulated MI after t slots.
double eta_oracle_exact(const MiPmf& straggler, const std::vector<MiPmf>& covered,
                        double message_bits);

// ---------------------------------------------------------------------------
// Monte-Carlo session statistics for continuous channels.
// ---------------------------------------------------------------------------

struct GroupSessionStats {
  double lbar = 0.0;         // mean session length over the covered set
  double lbar_stderr = 0.0;
  std::vector<double> eta;   // per straggler, order of `stragglers`
  std::vector<double> member_lbar;  // solo mean code length per member
};

// Simulates group-only multicast sessions (one coded packet per slot at p_av,
// member gains i.i.d. across slots) and reports the session-length and eta
// statistics needed by the combined-delivery region.
GroupSessionStats group_session_mc(const ChannelModel& model, int group,
                                   double message_bits,
                                   const std::vector<int>& covered,
                                   const std::vector<int>& stragglers, double p_av,
                                   int num_sessions, Rng& rng);

// ---------------------------------------------------------------------------
// Throughput-region linear program.
// ---------------------------------------------------------------------------

struct RegionSpec {
  const ChannelModel* model = nullptr;
  const CsiTable* table = nullptr;  // built on power.levels
  PowerSet power;
  std::vector<double> unicast_message_bits;
  std::vector<double> group_message_bits;
  std::vector<double> lbar;  // per group: plain Lbar_g, or Lbar_g(l) if combined
  std::vector<double> direction_unicast;  // lambda direction per unicast flow
  std::vector<double> direction_group;    // per group
  double epsilon = 0.0;
  bool combined = false;
  std::vector<std::vector<int>> stragglers;  // per group: member ids (combined)
  std::vector<std::vector<double>> eta;      // per group: eta per straggler
  // Genie variant: infinite block-length outer bound (rate-loss factors
  // removed, multicast rate = min-member ergodic MI at p_av).
  bool genie = false;
  int state_cap = 4096;
};

struct RegionProblem {
  int num_actions = 0;  // F
  std::uint64_t num_states = 0;  // E
  std::vector<double> pi;  // E
  std::vector<std::string> row_names;
  std::vector<double> row_direction;  // lambda-direction coefficient per row
  // rate[row][m * E + i], bits/slot
  std::vector<std::vector<double>> rate;
  std::vector<double> action_power;  // F
  double p_av = 0.0;
  ActionSpace actions;
};

struct RegionSolution {
  double lambda_star = 0.0;
  // alpha[m][i]; every state's column sums to 1.
  std::vector<std::vector<double>> alpha;
  std::vector<std::string> binding;
  bool warning_zero_power = false;
};

RegionProblem build_region(const RegionSpec& spec);
RegionSolution solve_boundary(const RegionProblem& problem);

std::string region_report_json(const RegionSpec& spec, const RegionProblem& problem,
                               const RegionSolution& sol);

}  // namespace ncrc
