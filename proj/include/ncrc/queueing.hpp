#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "ncrc/common.hpp"
#include "ncrc/rng.hpp"

namespace ncrc {

// Data queue with cumulative arrival/departure counters so the identity
// Q(t) = Q(0) + A(t) - D(t) can be asserted at any slot.
struct DataQueue {
  double bits = 0.0;          // Q
  double lambda = 0.0;        // mean arrivals, bits/slot
  double message_bits = 0.0;  // M, service quantum
  double cum_arrivals = 0.0;  // A
  double cum_departures = 0.0;  // D
};

// Virtual power queue Z enforcing the time-average power constraint:
// Z(t+1) = (Z(t) - P_av)^+ + P(t).
struct PowerQueue {
  double z = 0.0;
  double p_av = 0.0;
  double cum_power = 0.0;  // W
};

enum class ArrivalKind { kPoisson, kDeterministic };

// Arrival generator. Poisson draws integer bit counts with mean lambda.
// Deterministic mode emits floor((t+1) lambda) - floor(t lambda); for integer
// lambda that is lambda every slot, and the running mean equals lambda
// exactly for fractional rates as well.
class ArrivalProcess {
 public:
  ArrivalProcess(ArrivalKind kind, double lambda)
      : kind_(kind), lambda_(lambda) {
    NCRC_CHECK(lambda >= 0.0);
  }

  long long draw(Rng& rng) {
    if (lambda_ <= 0.0) return 0;
    if (kind_ == ArrivalKind::kPoisson) {
      std::poisson_distribution<long long> d(lambda_);
      return d(rng);
    }
    ++slot_;
    double next = std::floor(static_cast<double>(slot_) * lambda_ + 1e-9);
    long long out = static_cast<long long>(next - emitted_);
    emitted_ = next;
    return out;
  }

  double lambda() const { return lambda_; }

 private:
  ArrivalKind kind_;
  double lambda_;
  long long slot_ = 0;
  double emitted_ = 0.0;
};

// Q' = (Q - served*service_bits)^+ + arrivals, per the queue evolutions.
// Also advances the A/D counters; the realized departure is min(Q, bits).
inline void step_data_queue(DataQueue& q, bool served, double service_bits,
                            double arrivals) {
  NCRC_CHECK(service_bits >= 0.0 && arrivals >= 0.0);
  if (served) {
    double dep = std::min(q.bits, service_bits);
    q.bits -= dep;
    q.cum_departures += dep;
  }
  q.bits += arrivals;
  q.cum_arrivals += arrivals;
}

inline void step_power_queue(PowerQueue& z, double power) {
  NCRC_CHECK(power >= 0.0);
  z.z = std::max(z.z - z.p_av, 0.0) + power;
  z.cum_power += power;
}

}  // namespace ncrc
