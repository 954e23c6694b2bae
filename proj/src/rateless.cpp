#include "ncrc/rateless.hpp"

#include <algorithm>

#include "ncrc/common.hpp"

namespace ncrc {

bool step_unicast(UnicastReception& st, bool scheduled, double mi_slot) {
  if (!scheduled) return false;
  NCRC_CHECK(mi_slot >= 0.0);
  if (st.accumulated_mi + mi_slot < st.threshold()) {
    st.accumulated_mi += mi_slot;
    st.slots_on_message += 1;
    return false;
  }
  st.length_history.push_back(st.slots_on_message + 1);
  st.accumulated_mi = 0.0;
  st.slots_on_message = 0;
  st.code_index += 1;
  return true;
}

bool step_multicast(MulticastReception& st, bool scheduled,
                    std::span<const double> mi_slots) {
  if (!scheduled) return false;
  NCRC_CHECK(static_cast<int>(mi_slots.size()) == st.members());
  bool all_decoded = true;
  for (int j = 0; j < st.members(); ++j) {
    if (st.decoded[j]) continue;
    NCRC_CHECK(mi_slots[j] >= 0.0);
    st.accumulated[j] += mi_slots[j];
    if (st.accumulated[j] >= st.message_bits) {
      st.decoded[j] = 1;
      st.member_slots[j] = st.slots_on_message + 1;
    } else {
      all_decoded = false;
    }
  }
  if (!all_decoded) {
    st.slots_on_message += 1;
    return false;
  }
  long long lg = 0;
  for (int j = 0; j < st.members(); ++j) {
    st.member_lengths[j].push_back(st.member_slots[j]);
    lg = std::max(lg, st.member_slots[j]);
  }
  NCRC_CHECK_MSG(lg == st.slots_on_message + 1,
                 "session length must equal the slowest member's code length");
  st.length_history.push_back(lg);
  st.upsilon += lg;
  std::fill(st.accumulated.begin(), st.accumulated.end(), 0.0);
  std::fill(st.decoded.begin(), st.decoded.end(), 0);
  std::fill(st.member_slots.begin(), st.member_slots.end(), 0);
  st.slots_on_message = 0;
  st.code_index += 1;
  return true;
}

std::optional<double> mean_code_length(std::span<const long long> history) {
  if (history.empty()) return std::nullopt;
  double s = 0.0;
  for (long long v : history) s += static_cast<double>(v);
  return s / static_cast<double>(history.size());
}

}  // namespace ncrc
