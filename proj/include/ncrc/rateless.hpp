#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ncrc {

// Reception of a rateless code is modeled by mutual-information accumulation:
// the in-flight message decodes once the accumulated MI reaches
// message_bits * (1 + epsilon). Code indices start at 1; length histories
// hold one entry per completed code.

struct UnicastReception {
  double message_bits = 0.0;      // M_u
  double epsilon = 0.0;           // reception overhead
  double accumulated_mi = 0.0;    // R_u
  long long code_index = 1;       // n_u
  long long slots_on_message = 0; // T_u, scheduled slots spent on current code
  std::vector<long long> length_history;  // L_u(n) of completed codes

  double threshold() const { return message_bits * (1.0 + epsilon); }
};

struct MulticastReception {
  double message_bits = 0.0;      // M_g
  std::vector<double> accumulated;     // R_gj per tracked member
  std::vector<std::uint8_t> decoded;   // member has ACKed current message
  std::vector<long long> member_slots; // L_gj of the current code, per member
  long long code_index = 1;       // n_g
  long long slots_on_message = 0; // T_g
  std::vector<long long> length_history;               // L_g(n)
  std::vector<std::vector<long long>> member_lengths;  // L_gj(n) per member
  long long upsilon = 0;          // accumulated block length, sum of history

  explicit MulticastReception(double m_bits = 0.0, int members = 0)
      : message_bits(m_bits),
        accumulated(members, 0.0),
        decoded(members, 0),
        member_slots(members, 0),
        member_lengths(members) {}

  int members() const { return static_cast<int>(accumulated.size()); }
};

// One slot of unicast reception. If not scheduled the state is untouched.
// Otherwise MI accumulates; crossing the threshold resets the registers,
// advances the code index, appends the code length, and returns true (ACK).
bool step_unicast(UnicastReception& st, bool scheduled, double mi_slot);

// One slot of multicast reception; mi_slots holds the per-member realized MI.
// Members that already decoded are frozen. The code completes (returns true)
// only when every tracked member has decoded, at which point
// L_g(n) = max_j L_gj(n) is recorded and all registers reset.
bool step_multicast(MulticastReception& st, bool scheduled,
                    std::span<const double> mi_slots);

// Arithmetic mean of a length history; empty history means no completed codes.
std::optional<double> mean_code_length(std::span<const long long> history);

}  // namespace ncrc
