#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ncrc/channel.hpp"

namespace ncrc {

// Discrete transmission power set; P_av must be a member. Multicast always
// transmits at P_av. Including 0 lets the argmax idle when Z is large.
struct PowerSet {
  std::vector<double> levels;  // sorted ascending, distinct, >= 0
  double p_av = 0.0;

  void validate() const;
  int size() const { return static_cast<int>(levels.size()); }
  int index_of(double p) const;
  double max_level() const { return levels.back(); }
  bool includes_zero() const { return !levels.empty() && levels.front() == 0.0; }
};

enum class FlowKind { kUnicast, kMulticast, kRepair };

// One schedulable flow as the policy sees it. Repair flows reuse the unicast
// metric with the pending residual as the message size.
struct FlowView {
  FlowKind kind = FlowKind::kUnicast;
  int receiver = -1;          // unicast/repair: flat receiver index
  int group = -1;             // multicast/repair: group index
  double queue_bits = 0.0;    // Q_s
  double message_bits = 0.0;  // M_s (repair: current residual)
  int csi_bin = 0;            // reporter's quantized CSI (unicast/repair)
  // Multicast rate tracking state (eq-rate): code index and the sum of
  // completed code lengths.
  long long code_index = 1;
  double sum_lengths = 0.0;
  bool eligible = true;       // repair flows with no pending residual idle
};

struct SchedulerSnapshot {
  std::vector<FlowView> flows;
  double z = 0.0;  // virtual power queue
};

// Scheduling decision: flow index into the snapshot plus transmit power.
struct ControlAction {
  int flow = -1;
  double power = 0.0;
  int power_index = -1;
  double metric = -std::numeric_limits<double>::infinity();
};

// Enumeration of the control action set Omega. Unicast and repair flows pair
// with every power level; each multicast flow contributes the single
// (g, P_av) action. Index layout: flow-major in snapshot order, power-minor.
struct ActionSpace {
  struct Entry {
    int flow;
    int power_index;  // -1 for multicast (power fixed at P_av)
  };
  std::vector<Entry> entries;
  std::vector<int> first_of_flow;  // start offset per flow

  static ActionSpace build(const std::vector<FlowKind>& kinds, const PowerSet& ps);
  int size() const { return static_cast<int>(entries.size()); }
  int index_of(int flow, int power_index) const;
};

// Rate-loss factor M/(M(1+eps) + Imax K) applied to the conditional expected
// MI of unicast-style flows; equals M/(M + Imax K) at eps = 0.
double rate_loss_factor(double message_bits, double i_max_k, double epsilon = 0.0);

struct UnicastMetric {
  double best_power = 0.0;
  int best_power_index = 0;
  double metric = 0.0;  // Q_u I_u - Z P_u
  double rate = 0.0;    // I_u, bits/slot
};

// eq-rate: P_u = argmax_P Q E{I(h,P)K|hhat} f - Z P (ties -> lowest power);
// expected MI comes from the cached per-bin table.
UnicastMetric unicast_metric(double queue_bits, double z, double message_bits,
                             const CsiTable& table, int receiver, int csi_bin,
                             double i_max_k, double symbols_per_slot,
                             double epsilon = 0.0);

struct MulticastMetric {
  double metric = 0.0;
  double rate = 0.0;  // I_g, bits/slot
};

// I_g = n_g M_g / sum_lengths for n_g > 1, else Imax K; metric Q I_g - Z P_av.
MulticastMetric multicast_metric(double queue_bits, double z, long long code_index,
                                 double sum_lengths, double message_bits,
                                 double i_max_k, double p_av);

// eq96 argmax over all flows; ties break to the lowest flow index, then the
// lowest power level. Ineligible flows are skipped (unless nothing else
// exists, in which case flow 0's entry is returned with zero service).
ControlAction nc_rc_decide(const SchedulerSnapshot& snap, const PowerSet& ps,
                           const CsiTable& table, double i_max_k,
                           double symbols_per_slot, double epsilon = 0.0);

// Fixed-rate baseline: per-flow goodput-maximizing rate R*(hhat, P) from the
// cached table; the decision metric is Q * goodput - Z P. Returns the chosen
// action plus the code rate of the scheduled flow.
struct FixedRateDecision {
  ControlAction action;
  double code_rate = 0.0;  // bits per slot-message
};

FixedRateDecision fixed_rate_decide(const SchedulerSnapshot& snap, const PowerSet& ps,
                                    const CsiTable& table,
                                    const std::vector<GroupFixedRate>& group_rates,
                                    double symbols_per_slot);

// Exact-CSI specialization used when rho = 1: the best fixed rate equals the
// realized mutual information itself, so outages vanish.
double perfect_csi_fixed_rate(const ChannelModel& model, cplx hhat, double power);

}  // namespace ncrc
