#include "ncrc/repair.hpp"

#include <algorithm>
#include <numeric>

#include "ncrc/common.hpp"

namespace ncrc {

PartitionSpec estimate_partition(
    const std::vector<std::vector<long long>>& member_lengths, double message_bits,
    int covered_count) {
  const int members = static_cast<int>(member_lengths.size());
  NCRC_CHECK(covered_count >= 1 && covered_count <= members);
  PartitionSpec spec;
  spec.avg_throughput.resize(members);
  for (int j = 0; j < members; ++j) {
    const auto& hist = member_lengths[j];
    if (hist.empty())
      throw std::runtime_error("estimate_partition: member without completed warmup codes");
    double sum = std::accumulate(hist.begin(), hist.end(), 0.0);
    spec.avg_throughput[j] = static_cast<double>(hist.size()) * message_bits / sum;
  }
  std::vector<int> order(members);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return spec.avg_throughput[a] > spec.avg_throughput[b];
  });
  spec.covered.assign(order.begin(), order.begin() + covered_count);
  spec.stragglers.assign(order.begin() + covered_count, order.end());
  std::sort(spec.stragglers.begin(), spec.stragglers.end());
  return spec;
}

void repair_listen(RepairFlow& flow, double mi_slot, double message_bits) {
  if (flow.session_decoded) return;
  NCRC_CHECK(mi_slot >= 0.0);
  flow.session_mi += mi_slot;
  if (flow.session_mi >= message_bits) flow.session_decoded = true;
}

Settlement end_of_session_settlement(RepairFlow& flow, double message_bits) {
  Settlement s;
  s.r_star = std::min(flow.session_mi, message_bits);
  s.residual = message_bits - s.r_star;
  flow.settled_sessions += 1;
  flow.settled_mi_sum += s.r_star;
  if (s.residual > 0.0) flow.residuals.push_back(s.residual);
  flow.session_mi = 0.0;
  flow.session_decoded = false;
  return s;
}

std::optional<double> step_repair_reception(RepairFlow& flow, bool scheduled,
                                            double mi_slot) {
  if (!scheduled || flow.residuals.empty()) return std::nullopt;
  NCRC_CHECK(mi_slot >= 0.0);
  double target = flow.residuals.front();
  if (flow.accumulated_mi + mi_slot < target) {
    flow.accumulated_mi += mi_slot;
    flow.slots_on_message += 1;
    return std::nullopt;
  }
  flow.length_history.push_back(flow.slots_on_message + 1);
  flow.accumulated_mi = 0.0;
  flow.slots_on_message = 0;
  flow.code_index += 1;
  flow.residuals.pop_front();
  return target;
}

std::optional<double> eta_estimate(const RepairFlow& flow, double message_bits) {
  if (flow.settled_sessions == 0) return std::nullopt;
  return flow.settled_mi_sum /
         (static_cast<double>(flow.settled_sessions) * message_bits);
}

}  // namespace ncrc
