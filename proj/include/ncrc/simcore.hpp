#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ncrc/channel.hpp"
#include "ncrc/queueing.hpp"
#include "ncrc/rateless.hpp"
#include "ncrc/repair.hpp"
#include "ncrc/scheduler.hpp"

namespace ncrc {

enum class Policy { kNcRc, kFixedRate, kUnicastOnly, kNcRcCombined };

const char* policy_name(Policy p);
Policy policy_from_name(const std::string& name);

struct UnicastFlowConfig {
  double lambda = 0.0;        // bits/slot
  double message_bits = 0.0;  // M_u
};

struct MulticastFlowConfig {
  double lambda = 0.0;
  double message_bits = 0.0;
  int covered_count = -1;  // l(g); -1 means all members (plain multicast)
};

struct TraceOptions {
  std::string queue_csv;       // slot,flow,queue_bits,z
  std::string decision_csv;    // slot,action_index,flow,power,metric
  std::string lengths_csv;     // flow,code_index,length[,member]
  std::string settlement_csv;  // group,session,member,r_star,residual
};

struct SimConfig {
  ChannelConfig channel;
  std::vector<UnicastFlowConfig> unicast;
  std::vector<MulticastFlowConfig> groups;
  PowerSet power;
  Policy policy = Policy::kNcRc;
  long long horizon = 100000;
  long long warmup = -1;  // metrics warmup in slots; -1 = horizon/10
  std::uint64_t seed = 1;
  double epsilon = 0.0;  // reception overhead of unicast-style flows
  ArrivalKind arrivals = ArrivalKind::kPoisson;
  int warmup_sessions = 200;  // combined delivery: sessions before partition
  bool check_invariants = false;
  std::uint64_t bmi_state_cap = 65536;  // disable B_mi tracking beyond this
  TraceOptions traces;

  void validate() const;
  long long effective_warmup() const { return warmup < 0 ? horizon / 10 : warmup; }
  SimConfig scaled_arrivals(double t) const;  // multiplies every lambda by t
};

enum class Verdict { kStable, kUnstable, kInconclusive };
const char* verdict_name(Verdict v);

struct RunMetrics {
  int num_flows = 0;
  long long slots = 0;                  // measurement window length
  std::vector<double> avg_queue_bits;   // per flow, time average over window
  double total_avg_queue_bits = 0.0;
  std::vector<double> throughput_bps;   // per flow, delivered bits/slot
  double total_throughput_bps = 0.0;
  double avg_power_watts = 0.0;         // window average
  double full_avg_power_watts = 0.0;    // whole-run average (power identity)
  double final_z = 0.0;
  double z_over_t = 0.0;                // Z(T)/T over the whole run
  std::vector<double> lyapunov_trace;   // sampled diagnostic
  Verdict verdict = Verdict::kInconclusive;
  double stability_slope = 0.0;         // bits/slot, last-half LS fit
  double stability_rate_ref = 0.0;      // per-flow delivered-rate scale
  std::vector<double> group_mean_code_length;  // per group; 0 if none completed
  std::vector<double> group_tracked_rate;      // final I_g estimate, bits/slot
  std::vector<double> repair_eta;       // per repair flow (combined only)
  // Action-state frequency counters B_mi over the whole run; empty when the
  // state alphabet exceeds bmi_state_cap. state_counts[i] tallies slots in
  // CSI state i for the identity sum_m B_mi = state count.
  std::vector<std::vector<long long>> b_mi;
  std::vector<long long> state_counts;
};

// Quadratic diagnostic L = 1/2 (sum_s Q_s^2 + Z^2).
double lyapunov_value(std::span<const double> queues, double z);

// Least-squares slope of the last half of the total-queue trace, compared
// against a per-flow service-rate scale: stable when the slope is within 1%
// of it, unstable beyond 10%.
Verdict classify_stability(std::span<const double> total_queue_trace,
                           double per_flow_rate_ref, double* slope_out = nullptr);

RunMetrics run(const SimConfig& cfg);

// Bisection on the arrival scale t (lambdas = t * configured lambdas) using
// the run verdict; returns a bracket [lo, hi] with lo classified stable and
// hi unstable. Not converged when the run budget is exhausted first.
struct BoundarySearchOptions {
  long long slots = 100000;
  long long warmup = 10000;
  double rel_width = 0.05;
  int max_runs = 48;
  double t_hi_init = 0.0;  // 0: auto from i_max * K
  std::uint64_t seed = 1;
};

struct BoundaryBracket {
  double lo = 0.0;
  double hi = 0.0;
  bool converged = false;
  int runs = 0;
};

BoundaryBracket empirical_boundary_search(const SimConfig& base,
                                          const BoundarySearchOptions& opts);

}  // namespace ncrc
