#include "ncrc/channel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "ncrc/common.hpp"

namespace ncrc {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Gauss-Legendre nodes/weights on [-1, 1], cached per order.
struct GlRule {
  std::vector<double> x;
  std::vector<double> w;
};

GlRule make_gl(int n) {
  GlRule r;
  r.x.resize(n);
  r.w.resize(n);
  auto legendre = [n](double x, double& p, double& dp) {
    double p1 = 1.0, p2 = 0.0;
    for (int j = 0; j < n; ++j) {
      double p3 = p2;
      p2 = p1;
      p1 = ((2.0 * j + 1.0) * x * p2 - j * p3) / (j + 1.0);
    }
    p = p1;
    dp = n * (x * p1 - p2) / (x * x - 1.0);
  };
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton iteration from the Chebyshev-based initial guess.
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double p = 0.0, dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      legendre(x, p, dp);
      double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    legendre(x, p, dp);
    r.x[i] = -x;
    r.x[n - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.w[i] = w;
    r.w[n - 1 - i] = w;
  }
  return r;
}

const GlRule& gl_rule(int n) {
  static std::mutex mu;
  static std::map<int, GlRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_gl(n)).first;
  return it->second;
}

// I0(z) * exp(-z) for z >= 0, overflow-free.
double bessel_i0_scaled(double z) {
  if (z < 30.0) return std::cyl_bessel_i(0.0, z) * std::exp(-z);
  double inv = 1.0 / z;
  double s = 1.0 + inv * (0.125 + inv * (0.0703125 +
             inv * (0.0732421875 + inv * 0.112152099609375)));
  return s / std::sqrt(2.0 * kPi * z);
}

// Rician posterior magnitude density f(r | hhat): mean component nu, total
// complex variance s2. Written with the scaled Bessel so the rho -> 1 limit
// stays finite: f(r) = (2r/s2) exp(-(r-nu)^2/s2) i0e(2 r nu / s2).
double rician_pdf(double r, double nu, double s2) {
  if (r <= 0.0) return 0.0;
  double z = 2.0 * r * nu / s2;
  double d = r - nu;
  return (2.0 * r / s2) * std::exp(-d * d / s2) * bessel_i0_scaled(z);
}

}  // namespace

double mutual_information_gain2(double gain2, double power, double i_max) {
  NCRC_CHECK(power >= 0.0);
  double v = std::log2(1.0 + gain2 * power);
  return std::min(v, i_max);
}

ChannelModel::ChannelModel(ChannelConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.rho < 0.0 || cfg_.rho > 1.0) throw std::invalid_argument("rho outside [0,1]");
  if (cfg_.i_max <= 0.0) throw std::invalid_argument("i_max must be positive");
  if (cfg_.symbols_per_slot < 1) throw std::invalid_argument("symbols_per_slot < 1");
  if (cfg_.quant_bins < 1) throw std::invalid_argument("quant_bins < 1");
  if (cfg_.num_unicast < 0) throw std::invalid_argument("negative unicast count");
  if (static_cast<int>(cfg_.unicast_snr_db.size()) != cfg_.num_unicast)
    throw std::invalid_argument("unicast_snr_db size mismatch");
  if (cfg_.group_snr_db.size() != cfg_.group_sizes.size())
    throw std::invalid_argument("group_snr_db size mismatch");
  if (cfg_.mode == ChannelMode::kAr1Rayleigh &&
      (cfg_.ar_coeff < 0.0 || cfg_.ar_coeff >= 1.0))
    throw std::invalid_argument("ar_coeff outside [0,1)");
  if (cfg_.p_av_for_snr <= 0.0) throw std::invalid_argument("p_av_for_snr <= 0");

  // Per-receiver variance from per-receiver SNR: SNR = E{|h|^2} P_av.
  for (int u = 0; u < cfg_.num_unicast; ++u) {
    double snr = std::pow(10.0, cfg_.unicast_snr_db[u] / 10.0);
    variance_.push_back(snr / cfg_.p_av_for_snr);
  }
  for (size_t g = 0; g < cfg_.group_sizes.size(); ++g) {
    member_base_.push_back(static_cast<int>(variance_.size()));
    if (static_cast<int>(cfg_.group_snr_db[g].size()) != cfg_.group_sizes[g])
      throw std::invalid_argument("group member SNR list size mismatch");
    for (double db : cfg_.group_snr_db[g]) {
      double snr = std::pow(10.0, db / 10.0);
      variance_.push_back(snr / cfg_.p_av_for_snr);
    }
  }

  if (cfg_.mode == ChannelMode::kDiscrete) {
    if (cfg_.gain_levels.empty() || cfg_.gain_levels.size() != cfg_.gain_probs.size())
      throw std::invalid_argument("discrete mode needs matching gain_levels/gain_probs");
    if (static_cast<int>(cfg_.gain_levels.size()) != cfg_.quant_bins)
      throw std::invalid_argument("discrete mode: quant_bins must equal level count");
    double sum = std::accumulate(cfg_.gain_probs.begin(), cfg_.gain_probs.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("discrete gain_probs must sum to 1");
    for (double g : cfg_.gain_levels)
      if (g < 0.0) throw std::invalid_argument("negative gain level");
  }
  for (double v : variance_)
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("bad mean SNR");
}

cplx ChannelModel::draw_cn(Rng& rng, double var) const {
  std::normal_distribution<double> n(0.0, std::sqrt(var / 2.0));
  double re = n(rng);
  double im = n(rng);
  return {re, im};
}

ChannelDraw ChannelModel::sample_slot(Rng& rng, const ChannelDraw* prev) const {
  const int nr = num_receivers();
  ChannelDraw d;
  d.h.resize(nr);
  d.hhat.resize(nr);
  d.level.assign(nr, -1);
  d.hhat_level.assign(nr, -1);

  switch (cfg_.mode) {
    case ChannelMode::kIidRayleigh:
      for (int r = 0; r < nr; ++r) d.h[r] = draw_cn(rng, variance_[r]);
      break;
    case ChannelMode::kAr1Rayleigh: {
      // First slot (no prev): draw from the stationary distribution.
      double c = cfg_.ar_coeff;
      for (int r = 0; r < nr; ++r) {
        cplx inno = draw_cn(rng, variance_[r]);
        d.h[r] = prev ? std::sqrt(c) * prev->h[r] + std::sqrt(1.0 - c) * inno
                      : inno;
      }
      break;
    }
    case ChannelMode::kDiscrete: {
      std::discrete_distribution<int> lev(cfg_.gain_probs.begin(), cfg_.gain_probs.end());
      for (int r = 0; r < nr; ++r) {
        int l = lev(rng);
        d.level[r] = l;
        d.h[r] = cplx(std::sqrt(cfg_.gain_levels[l]), 0.0);
      }
      break;
    }
  }

  if (cfg_.mode == ChannelMode::kDiscrete) {
    // Report the true level with probability rho, an independent draw
    // otherwise. Both variates are consumed every slot so the stream stays
    // aligned across configurations.
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::discrete_distribution<int> lev(cfg_.gain_probs.begin(), cfg_.gain_probs.end());
    for (int r = 0; r < nr; ++r) {
      double coin = uni(rng);
      int indep = lev(rng);
      int l = (coin < cfg_.rho) ? d.level[r] : indep;
      d.hhat_level[r] = l;
      d.hhat[r] = cplx(std::sqrt(cfg_.gain_levels[l]), 0.0);
    }
  } else {
    double sr = std::sqrt(cfg_.rho);
    double sn = std::sqrt(1.0 - cfg_.rho);
    for (int r = 0; r < nr; ++r) {
      cplx noise = draw_cn(rng, variance_[r]);
      d.hhat[r] = sr * d.h[r] + sn * noise;
    }
  }

  std::vector<int> reporters(cfg_.num_unicast);
  std::iota(reporters.begin(), reporters.end(), 0);
  d.state_index = joint_state(d, reporters);
  return d;
}

double ChannelModel::level_mean_mi_cached(double power) const {
  double m = 0.0;
  for (size_t l = 0; l < cfg_.gain_levels.size(); ++l)
    m += cfg_.gain_probs[l] *
         mutual_information_gain2(cfg_.gain_levels[l], power, cfg_.i_max);
  return m;
}

double ChannelModel::conditional_expected_mi_mag(int receiver, double hhat_mag,
                                                 double power) const {
  NCRC_CHECK(power >= 0.0);
  if (power == 0.0) return 0.0;
  if (cfg_.mode == ChannelMode::kDiscrete) {
    // Posterior P(h = a | hhat = b) = rho 1{a=b} + (1-rho) pi_a.
    int b = -1;
    double best = 1e300;
    for (size_t l = 0; l < cfg_.gain_levels.size(); ++l) {
      double diff = std::abs(std::sqrt(cfg_.gain_levels[l]) - hhat_mag);
      if (diff < best) {
        best = diff;
        b = static_cast<int>(l);
      }
    }
    double own = mutual_information_gain2(cfg_.gain_levels[b], power, cfg_.i_max);
    return cfg_.rho * own + (1.0 - cfg_.rho) * level_mean_mi_cached(power);
  }

  double v = variance_[receiver];
  double rho = cfg_.rho;
  if (rho >= 1.0 - 1e-12)
    return mutual_information_gain2(hhat_mag * hhat_mag, power, cfg_.i_max);

  double nu = std::sqrt(rho) * hhat_mag;
  double s2 = (1.0 - rho) * v;
  double sig = std::sqrt(s2 / 2.0);
  double lo = std::max(0.0, nu - 10.0 * sig);
  double hi = nu + 10.0 * sig;
  const GlRule& rule = gl_rule(256);
  double acc = 0.0;
  double half = 0.5 * (hi - lo);
  double mid = 0.5 * (hi + lo);
  for (size_t i = 0; i < rule.x.size(); ++i) {
    double r = mid + half * rule.x[i];
    double f = mutual_information_gain2(r * r, power, cfg_.i_max);
    acc += rule.w[i] * f * rician_pdf(r, nu, s2);
  }
  return acc * half;
}

double ChannelModel::conditional_expected_mi(int receiver, cplx hhat,
                                             double power) const {
  return conditional_expected_mi_mag(receiver, std::abs(hhat), power);
}

double ChannelModel::unconditional_mean_mi(int receiver, double power) const {
  if (power == 0.0) return 0.0;
  if (cfg_.mode == ChannelMode::kDiscrete) return level_mean_mi_cached(power);
  // Rayleigh magnitude = Rician with nu = 0 and s2 = v.
  double v = variance_[receiver];
  double hi = 10.0 * std::sqrt(v / 2.0);
  const GlRule& rule = gl_rule(256);
  double acc = 0.0;
  double half = 0.5 * hi;
  for (size_t i = 0; i < rule.x.size(); ++i) {
    double r = half + half * rule.x[i];
    acc += rule.w[i] * mutual_information_gain2(r * r, power, cfg_.i_max) *
           rician_pdf(r, 0.0, v);
  }
  return acc * half;
}

double ChannelModel::conditional_mi_ccdf(int receiver, double hhat_mag, double power,
                                         double thresh) const {
  if (thresh <= 0.0) return 1.0;
  if (thresh > cfg_.i_max) return 0.0;
  if (power == 0.0) return 0.0;
  // I >= thresh  <=>  |h|^2 >= (2^thresh - 1)/P   (cap handled above).
  double x_th = (std::exp2(thresh) - 1.0) / power;
  double r_th = std::sqrt(x_th);
  if (cfg_.mode == ChannelMode::kDiscrete) {
    int b = -1;
    double best = 1e300;
    for (size_t l = 0; l < cfg_.gain_levels.size(); ++l) {
      double diff = std::abs(std::sqrt(cfg_.gain_levels[l]) - hhat_mag);
      if (diff < best) {
        best = diff;
        b = static_cast<int>(l);
      }
    }
    double p = 0.0;
    for (size_t l = 0; l < cfg_.gain_levels.size(); ++l) {
      double post = (1.0 - cfg_.rho) * cfg_.gain_probs[l] +
                    (static_cast<int>(l) == b ? cfg_.rho : 0.0);
      if (cfg_.gain_levels[l] >= x_th) p += post;
    }
    return p;
  }
  double rho = cfg_.rho;
  double v = variance_[receiver];
  if (rho >= 1.0 - 1e-12) return hhat_mag * hhat_mag >= x_th ? 1.0 : 0.0;
  double nu = std::sqrt(rho) * hhat_mag;
  double s2 = (1.0 - rho) * v;
  double sig = std::sqrt(s2 / 2.0);
  double hi = nu + 10.0 * sig;
  if (r_th >= hi) return 0.0;
  // The integrand is smooth on [r_th, hi]; 96 nodes are ample.
  const GlRule& rule = gl_rule(96);
  double half = 0.5 * (hi - r_th);
  double mid = 0.5 * (hi + r_th);
  double acc = 0.0;
  for (size_t i = 0; i < rule.x.size(); ++i) {
    double r = mid + half * rule.x[i];
    acc += rule.w[i] * rician_pdf(r, nu, s2);
  }
  return std::clamp(acc * half, 0.0, 1.0);
}

double ChannelModel::unconditional_mi_ccdf(int receiver, double power,
                                           double thresh) const {
  if (thresh <= 0.0) return 1.0;
  if (thresh > cfg_.i_max || power == 0.0) return 0.0;
  double x_th = (std::exp2(thresh) - 1.0) / power;
  if (cfg_.mode == ChannelMode::kDiscrete) {
    double p = 0.0;
    for (size_t l = 0; l < cfg_.gain_levels.size(); ++l)
      if (cfg_.gain_levels[l] >= x_th) p += cfg_.gain_probs[l];
    return p;
  }
  return std::exp(-x_th / variance_[receiver]);
}

int ChannelModel::bin_of(int receiver, const ChannelDraw& draw) const {
  if (cfg_.mode == ChannelMode::kDiscrete) return draw.hhat_level[receiver];
  // Equiprobable Rayleigh magnitude bins via the CDF u = 1 - exp(-r^2/v).
  double r = std::abs(draw.hhat[receiver]);
  double u = 1.0 - std::exp(-r * r / variance_[receiver]);
  int b = static_cast<int>(u * cfg_.quant_bins);
  return std::clamp(b, 0, cfg_.quant_bins - 1);
}

std::uint64_t ChannelModel::joint_state(const ChannelDraw& draw,
                                        const std::vector<int>& reporters) const {
  std::uint64_t idx = 0;
  std::uint64_t radix = 1;
  for (int r : reporters) {
    idx += radix * static_cast<std::uint64_t>(bin_of(r, draw));
    radix *= static_cast<std::uint64_t>(cfg_.quant_bins);
  }
  return idx;
}

double ChannelModel::bin_prob(int /*receiver*/, int bin) const {
  if (cfg_.mode == ChannelMode::kDiscrete) return cfg_.gain_probs[bin];
  return 1.0 / cfg_.quant_bins;
}

double ChannelModel::joint_state_prob(std::uint64_t state,
                                      const std::vector<int>& reporters) const {
  double p = 1.0;
  for (int r : reporters) {
    int b = static_cast<int>(state % cfg_.quant_bins);
    state /= cfg_.quant_bins;
    p *= bin_prob(r, b);
  }
  return p;
}

double ChannelModel::bin_expected_mi(int receiver, int bin, double power) const {
  if (power == 0.0) return 0.0;
  if (cfg_.mode == ChannelMode::kDiscrete) {
    double lev_mag = std::sqrt(cfg_.gain_levels[bin]);
    return conditional_expected_mi_mag(receiver, lev_mag, power);
  }
  // Average the exact-hhat expectation over the bin in CDF coordinates:
  // |hhat| = sqrt(-v ln(1-u)), u uniform on [bin/B, (bin+1)/B].
  double v = variance_[receiver];
  int B = cfg_.quant_bins;
  double u0 = static_cast<double>(bin) / B;
  double u1 = static_cast<double>(bin + 1) / B;
  const GlRule& rule = gl_rule(24);
  double half = 0.5 * (u1 - u0);
  double mid = 0.5 * (u1 + u0);
  double acc = 0.0;
  for (size_t i = 0; i < rule.x.size(); ++i) {
    double u = mid + half * rule.x[i];
    double mag = std::sqrt(-v * std::log1p(-u));
    acc += rule.w[i] * conditional_expected_mi_mag(receiver, mag, power);
  }
  return acc * half * B;
}

double ChannelModel::bin_mi_ccdf(int receiver, int bin, double power,
                                 double thresh) const {
  if (thresh <= 0.0) return 1.0;
  if (thresh > cfg_.i_max || power == 0.0) return 0.0;
  if (cfg_.mode == ChannelMode::kDiscrete) {
    double lev_mag = std::sqrt(cfg_.gain_levels[bin]);
    return conditional_mi_ccdf(receiver, lev_mag, power, thresh);
  }
  double v = variance_[receiver];
  int B = cfg_.quant_bins;
  double u0 = static_cast<double>(bin) / B;
  double u1 = static_cast<double>(bin + 1) / B;
  const GlRule& rule = gl_rule(24);
  double half = 0.5 * (u1 - u0);
  double mid = 0.5 * (u1 + u0);
  double acc = 0.0;
  for (size_t i = 0; i < rule.x.size(); ++i) {
    double u = mid + half * rule.x[i];
    double mag = std::sqrt(-v * std::log1p(-u));
    acc += rule.w[i] * conditional_mi_ccdf(receiver, mag, power, thresh);
  }
  return std::clamp(acc * half * B, 0.0, 1.0);
}

namespace {

// Posterior magnitude nodes of |h| given "hhat in bin": quadrature points and
// probability weights, independent of the transmit power, so one node set
// serves every power level and every rate threshold.
struct PosteriorNodes {
  std::vector<double> r;
  std::vector<double> w;  // sums to ~1
};

PosteriorNodes bin_posterior_nodes(const ChannelModel& model, int receiver, int bin) {
  PosteriorNodes out;
  const auto& cfg = model.config();
  double v = model.variance(receiver);
  double rho = cfg.rho;
  int B = cfg.quant_bins;
  double u0 = static_cast<double>(bin) / B;
  double u1 = static_cast<double>(bin + 1) / B;
  const GlRule& outer = gl_rule(24);
  const GlRule& inner = gl_rule(128);
  double oh = 0.5 * (u1 - u0), om = 0.5 * (u1 + u0);
  for (size_t i = 0; i < outer.x.size(); ++i) {
    double u = om + oh * outer.x[i];
    double mag = std::sqrt(-v * std::log1p(-u));
    double wo = outer.w[i] * oh * B;  // conditional density of u within the bin
    if (rho >= 1.0 - 1e-12) {
      out.r.push_back(mag);
      out.w.push_back(wo);
      continue;
    }
    double nu = std::sqrt(rho) * mag;
    double s2 = (1.0 - rho) * v;
    double sig = std::sqrt(s2 / 2.0);
    double lo = std::max(0.0, nu - 10.0 * sig), hi = nu + 10.0 * sig;
    double ih = 0.5 * (hi - lo), im = 0.5 * (hi + lo);
    for (size_t k = 0; k < inner.x.size(); ++k) {
      double r = im + ih * inner.x[k];
      out.r.push_back(r);
      out.w.push_back(wo * inner.w[k] * ih * rician_pdf(r, nu, s2));
    }
  }
  return out;
}

}  // namespace

CsiTable build_csi_table(const ChannelModel& model,
                         const std::vector<double>& power_levels,
                         int rate_grid_points, bool with_fixed_rate) {
  CsiTable t;
  t.bins = model.bin_count();
  t.power_levels = power_levels;
  int nr = model.num_receivers();
  int np = static_cast<int>(power_levels.size());
  double K = model.symbols_per_slot();
  double imax = model.i_max();
  double rmax = imax * K;
  t.expected_mi.assign(nr, std::vector<std::vector<double>>(
                               np, std::vector<double>(t.bins, 0.0)));
  if (with_fixed_rate) {
    t.best_rate = t.expected_mi;
    t.best_goodput = t.expected_mi;
  }
  const bool discrete = model.config().mode == ChannelMode::kDiscrete;
  for (int r = 0; r < nr; ++r) {
    for (int b = 0; b < t.bins; ++b) {
      PosteriorNodes nodes;
      std::vector<double> suffix;  // suffix weight sums over r-sorted nodes
      if (!discrete) {
        nodes = bin_posterior_nodes(model, r, b);
        std::vector<size_t> order(nodes.r.size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](size_t a, size_t c) { return nodes.r[a] < nodes.r[c]; });
        PosteriorNodes sorted;
        sorted.r.reserve(order.size());
        sorted.w.reserve(order.size());
        for (size_t idx : order) {
          sorted.r.push_back(nodes.r[idx]);
          sorted.w.push_back(nodes.w[idx]);
        }
        nodes = std::move(sorted);
        suffix.assign(nodes.w.size() + 1, 0.0);
        for (size_t i = nodes.w.size(); i-- > 0;)
          suffix[i] = suffix[i + 1] + nodes.w[i];
      }
      for (int p = 0; p < np; ++p) {
        double power = power_levels[p];
        if (discrete) {
          t.expected_mi[r][p][b] = model.bin_expected_mi(r, b, power);
        } else if (power == 0.0) {
          t.expected_mi[r][p][b] = 0.0;
        } else {
          double acc = 0.0;
          for (size_t i = 0; i < nodes.r.size(); ++i)
            acc += nodes.w[i] *
                   mutual_information_gain2(nodes.r[i] * nodes.r[i], power, imax);
          t.expected_mi[r][p][b] = acc;
        }
        if (!with_fixed_rate) continue;
        double best_g = 0.0, best_r = 0.0;
        for (int j = 1; j <= rate_grid_points; ++j) {
          double rate = rmax * j / rate_grid_points;
          double ccdf;
          if (discrete) {
            ccdf = model.bin_mi_ccdf(r, b, power, rate / K);
          } else if (power == 0.0 || rate / K > imax) {
            ccdf = 0.0;
          } else {
            double r_th = std::sqrt((std::exp2(rate / K) - 1.0) / power);
            size_t lo = std::lower_bound(nodes.r.begin(), nodes.r.end(), r_th) -
                        nodes.r.begin();
            ccdf = std::min(1.0, suffix[lo]);
          }
          double g = rate * ccdf;
          if (g > best_g + 1e-12) {
            best_g = g;
            best_r = rate;
          }
        }
        t.best_rate[r][p][b] = best_r;
        t.best_goodput[r][p][b] = best_g;
      }
    }
  }
  return t;
}

GroupFixedRate group_fixed_rate(const ChannelModel& model, int group, double p_av,
                                int rate_grid_points) {
  // Fixed-rate multicast runs an application-layer rateless code over the
  // per-slot chunks: every member independently keeps the chunks whose
  // realized MI covered the rate. The sustainable group rate is set by the
  // slowest member's chunk goodput, so R maximizes min_j R Pr{I_j K >= R}.
  GroupFixedRate out;
  double K = model.symbols_per_slot();
  double rmax = model.i_max() * K;
  for (int j = 1; j <= rate_grid_points; ++j) {
    double rate = rmax * j / rate_grid_points;
    double p = 1.0;
    for (int m = 0; m < model.group_size(group); ++m)
      p = std::min(p, model.unconditional_mi_ccdf(model.member_receiver(group, m),
                                                  p_av, rate / K));
    double g = rate * p;
    if (g > out.goodput + 1e-12) {
      out.goodput = g;
      out.rate = rate;
    }
  }
  return out;
}

}  // namespace ncrc
