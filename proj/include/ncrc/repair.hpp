#pragma once

#include <deque>
#include <optional>
#include <vector>

namespace ncrc {

// Combined delivery (multicast plus unicast file repair): the covered members
// finish the multicast session; each straggler keeps listening, and whatever
// is still missing of each message, M_v(n) = M_g - R*_gj(n), is queued on a
// per-straggler unicast repair flow.

struct PartitionSpec {
  std::vector<int> covered;     // member ids, descending average throughput
  std::vector<int> stragglers;  // remaining member ids, ascending id
  std::vector<double> avg_throughput;  // per member, bits/slot
};

// Ranks members by average throughput Ibar_gj = (codes * M_g) / sum L_gj and
// keeps the top `covered_count`. Ties break toward the lower member id.
// Every member needs at least one completed warmup code.
PartitionSpec estimate_partition(
    const std::vector<std::vector<long long>>& member_lengths, double message_bits,
    int covered_count);

struct RepairFlow {
  int group = -1;
  int member = -1;    // straggler's member index within the group
  int receiver = -1;  // flat receiver index
  double queue_bits = 0.0;        // Q_v
  double accumulated_mi = 0.0;    // R_v against the current residual
  std::deque<double> residuals;   // pending M_v(n), FIFO
  double session_mi = 0.0;        // R_gj listened during the current session
  bool session_decoded = false;   // straggler hit M_g and froze
  long long code_index = 1;       // n_v
  long long slots_on_message = 0;
  std::vector<long long> length_history;
  long long settled_sessions = 0;
  double settled_mi_sum = 0.0;    // sum of R*_gj(n)

  bool has_backlog() const { return !residuals.empty(); }
  double current_residual() const { return residuals.empty() ? 0.0 : residuals.front(); }
};

// Straggler listening during a multicast slot; freezes once M_g is reached.
void repair_listen(RepairFlow& flow, double mi_slot, double message_bits);

struct Settlement {
  double r_star = 0.0;    // MI credited against Q_v (eq. (44)'s R* term)
  double residual = 0.0;  // M_v(n) appended to the repair backlog (0 = skipped)
};

// End-of-session settlement for one straggler: computes R* = min(R_gj, M_g),
// queues the residual (zero-size residuals are skipped), updates the eta
// counters, and resets the listening registers. The Q_v decrement itself is
// applied by the caller together with that slot's arrivals.
Settlement end_of_session_settlement(RepairFlow& flow, double message_bits);

// One slot of repair-flow reception. Returns the decoded residual size if the
// head-of-line residual completed this slot (the caller then serves Q_v by
// that amount). Zero-size residuals never occur (skipped at settlement).
std::optional<double> step_repair_reception(RepairFlow& flow, bool scheduled,
                                            double mi_slot);

// eta_gj = sum R*_gj(n) / (N M_g) over settled sessions.
std::optional<double> eta_estimate(const RepairFlow& flow, double message_bits);

}  // namespace ncrc
