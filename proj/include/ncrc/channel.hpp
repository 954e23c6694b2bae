#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "ncrc/rng.hpp"

namespace ncrc {

using cplx = std::complex<double>;

enum class ChannelMode {
  kIidRayleigh,  // gains i.i.d. across slots and receivers
  kAr1Rayleigh,  // first-order autoregressive Rayleigh evolution
  kDiscrete,     // gains drawn from a finite |h|^2 alphabet (lattice MI)
};

// Receivers are indexed flat: unicast users 0..U-1, then group members in
// group order. Multicast members never report CSI; their imperfect gains are
// still drawn every slot so that paired-seed runs of different policies see
// identical channel sample paths, and so that file-repair and unicast-only
// modes can treat members as CSI-reporting receivers.
struct ChannelConfig {
  int num_unicast = 0;
  std::vector<int> group_sizes;             // J(g)
  std::vector<double> unicast_snr_db;       // per unicast user
  std::vector<std::vector<double>> group_snr_db;  // per group, per member
  double rho = 0.0;                         // CSI accuracy in [0,1]
  double i_max = 5.0;                       // bits/symbol cap
  int symbols_per_slot = 1;                 // K
  ChannelMode mode = ChannelMode::kIidRayleigh;
  double ar_coeff = 0.1;                    // ar1 mode only, in [0,1)
  int quant_bins = 4;                       // B magnitude bins per reporter
  double p_av_for_snr = 1.0;                // SNR = E{|h|^2} * P_av

  // Discrete mode: shared |h|^2 alphabet with probabilities. quant_bins must
  // equal gain_levels.size(); the CSI report is the true level with
  // probability rho and an independent draw otherwise.
  std::vector<double> gain_levels;
  std::vector<double> gain_probs;
};

struct ChannelDraw {
  std::vector<cplx> h;        // true gains, flat receiver index
  std::vector<cplx> hhat;     // imperfect gains, flat receiver index
  std::vector<int> level;     // discrete mode: true level index, else -1
  std::vector<int> hhat_level;  // discrete mode: reported level index, else -1
  std::uint64_t state_index = 0;  // joint CSI index over unicast reporters
};

// min(log2(1 + |h|^2 P), i_max) per eq. (1)'s bound; bits per symbol.
double mutual_information_gain2(double gain2, double power, double i_max);
inline double mutual_information(cplx h, double power, double i_max) {
  return mutual_information_gain2(std::norm(h), power, i_max);
}

class ChannelModel {
 public:
  explicit ChannelModel(ChannelConfig cfg);

  const ChannelConfig& config() const { return cfg_; }
  int num_receivers() const { return static_cast<int>(variance_.size()); }
  int num_unicast() const { return cfg_.num_unicast; }
  int num_groups() const { return static_cast<int>(cfg_.group_sizes.size()); }
  int group_size(int g) const { return cfg_.group_sizes[g]; }
  // Flat receiver index of member j of group g.
  int member_receiver(int g, int j) const { return member_base_[g] + j; }
  double variance(int receiver) const { return variance_[receiver]; }
  double i_max() const { return cfg_.i_max; }
  int symbols_per_slot() const { return cfg_.symbols_per_slot; }

  // Draws all receivers' true and imperfect gains for one slot. prev is
  // required in ar1 mode and ignored otherwise.
  ChannelDraw sample_slot(Rng& rng, const ChannelDraw* prev = nullptr) const;

  double mutual_information(cplx h, double power) const {
    return ncrc::mutual_information(h, power, cfg_.i_max);
  }

  // E{ I(h, P) | hhat } for one receiver, per symbol. Exact finite sum in
  // discrete mode; Gauss-Legendre quadrature over the Rician posterior
  // magnitude otherwise (h | hhat ~ CN(sqrt(rho) hhat, (1-rho) v)).
  double conditional_expected_mi(int receiver, cplx hhat, double power) const;
  double conditional_expected_mi_mag(int receiver, double hhat_mag, double power) const;

  // Unconditional ergodic mean E{ I(h, P) }, per symbol.
  double unconditional_mean_mi(int receiver, double power) const;

  // Pr{ I(h, P) >= thresh_bits_per_symbol | hhat magnitude }.
  double conditional_mi_ccdf(int receiver, double hhat_mag, double power,
                             double thresh) const;
  double unconditional_mi_ccdf(int receiver, double power, double thresh) const;

  // CSI quantization: B equiprobable-under-Rayleigh magnitude bins per
  // reporter (discrete mode: the bin is the reported level index).
  int bin_of(int receiver, const ChannelDraw& draw) const;
  int bin_count() const { return cfg_.quant_bins; }
  // Joint mixed-radix index over an ordered reporter list (first reporter is
  // the least significant digit).
  std::uint64_t joint_state(const ChannelDraw& draw,
                            const std::vector<int>& reporters) const;
  // Stationary probability of one reporter's bin (1/B for Rayleigh modes).
  double bin_prob(int receiver, int bin) const;
  // Stationary probability of a joint state over `reporters`.
  double joint_state_prob(std::uint64_t state, const std::vector<int>& reporters) const;
  // Bin-conditional expectation E{ I(h,P) | hhat in bin }, per symbol.
  double bin_expected_mi(int receiver, int bin, double power) const;
  double bin_mi_ccdf(int receiver, int bin, double power, double thresh) const;

 private:
  ChannelConfig cfg_;
  std::vector<double> variance_;  // E{|h|^2} per receiver
  std::vector<int> member_base_;  // flat index of each group's first member
  double level_mean_mi_cached(double power) const;

  cplx draw_cn(Rng& rng, double var) const;
};

// Scheduler- and LP-facing cache: per (receiver, power level, bin) the
// bin-conditional expected MI, plus the goodput-maximizing fixed rate for the
// fixed-rate baseline. Values are per symbol; callers scale by K.
struct CsiTable {
  int bins = 0;
  std::vector<double> power_levels;
  // expected_mi[receiver][power][bin]
  std::vector<std::vector<std::vector<double>>> expected_mi;
  // Fixed-rate baseline: best rate (bits/slot, i.e. per-symbol rate times K)
  // and its goodput (bits/slot) per (receiver, power, bin).
  std::vector<std::vector<std::vector<double>>> best_rate;
  std::vector<std::vector<std::vector<double>>> best_goodput;

  double mi(int receiver, int power_idx, int bin) const {
    return expected_mi[receiver][power_idx][bin];
  }
};

// rate_grid_points intervals over [0, i_max*K]; 256 per the rate-grid choice.
// with_fixed_rate controls whether the goodput tables of the fixed-rate
// baseline are populated (they dominate the build cost).
CsiTable build_csi_table(const ChannelModel& model,
                         const std::vector<double>& power_levels,
                         int rate_grid_points = 256, bool with_fixed_rate = true);

// Fixed-rate parameters of a multicast group served at p_av with no CSI:
// best R maximizing R * Pr{ all members' I*K >= R }.
struct GroupFixedRate {
  double rate = 0.0;     // bits/slot
  double goodput = 0.0;  // bits/slot
};
GroupFixedRate group_fixed_rate(const ChannelModel& model, int group, double p_av,
                                int rate_grid_points = 256);

}  // namespace ncrc
