#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ncrc/scheduler.hpp"
#include "ncrc/rng.hpp"
#include "test_util.hpp"

using namespace ncrc;

namespace {

// Unit-variance Rayleigh channel, one reporting user.
ChannelModel unit_model(double rho, int bins = 4, double i_max = 5.0) {
  ChannelConfig c;
  c.num_unicast = 1;
  c.unicast_snr_db = {0.0};
  c.rho = rho;
  c.i_max = i_max;
  c.quant_bins = bins;
  return ChannelModel(c);
}

}  // namespace

TEST_CASE("rate-loss factor is exactly 8/9 at M=40, ImaxK=5") {
  CHECK(rate_loss_factor(40.0, 5.0) == 8.0 / 9.0);  // bit-exact
  CHECK(rate_loss_factor(40.0, 5.0, 0.25) == doctest::Approx(40.0 / 55.0));
}

TEST_CASE("power set validation") {
  PowerSet ps;
  ps.levels = {0.0, 1.0, 2.0};
  ps.p_av = 1.0;
  ps.validate();
  CHECK(ps.includes_zero());
  CHECK(ps.index_of(2.0) == 2);
  ps.p_av = 1.5;
  CHECK_THROWS(ps.validate());
}

TEST_CASE("action space layout F = U*O + G") {
  PowerSet ps;
  ps.levels = {0.0, 1.0, 2.0};
  ps.p_av = 1.0;
  std::vector<FlowKind> kinds = {FlowKind::kUnicast, FlowKind::kUnicast,
                                 FlowKind::kMulticast, FlowKind::kRepair};
  ActionSpace sp = ActionSpace::build(kinds, ps);
  CHECK(sp.size() == 2 * 3 + 1 + 3);
  CHECK(sp.index_of(0, 2) == 2);
  CHECK(sp.index_of(2, 0) == 6);  // multicast single action
  CHECK(sp.index_of(3, 1) == 8);
}

TEST_CASE("unicast metric picks the max power at Z=0 and the lowest on ties") {
  ChannelModel m = unit_model(0.8);
  CsiTable t = build_csi_table(m, {0.0, 1.0, 2.0});
  UnicastMetric um = unicast_metric(100.0, 0.0, 40.0, t, 0, 3, 5.0, 1.0);
  CHECK(um.best_power == 2.0);  // expectation is monotone in power
  CHECK(um.metric > 0.0);

  UnicastMetric idle = unicast_metric(0.0, 0.0, 40.0, t, 0, 3, 5.0, 1.0);
  CHECK(idle.metric <= 1e-12);
  CHECK(idle.best_power == 0.0);  // ties break to the lowest level
}

TEST_CASE("multicast metric follows the tracked rate") {
  MulticastMetric m1 = multicast_metric(10.0, 0.0, 1, 0.0, 40.0, 5.0, 1.0);
  CHECK(m1.rate == doctest::Approx(5.0));  // code index 1: Imax K
  MulticastMetric m3 = multicast_metric(10.0, 2.0, 3, 10.0, 40.0, 5.0, 1.0);
  CHECK(m3.rate == doctest::Approx(12.0));  // 3*40/10
  CHECK(m3.metric == doctest::Approx(10.0 * 12.0 - 2.0 * 1.0));
}

TEST_CASE("nc_rc_decide: argmax, tie-break, multicast power") {
  ChannelModel m = unit_model(1.0, 2, 5.0);
  PowerSet ps;
  ps.levels = {1.0};
  ps.p_av = 1.0;
  CsiTable t = build_csi_table(m, ps.levels);

  SchedulerSnapshot snap;
  snap.z = 0.0;
  FlowView g1;
  g1.kind = FlowKind::kMulticast;
  g1.group = 0;
  g1.queue_bits = 80.0;
  g1.message_bits = 40.0;
  g1.code_index = 2;
  g1.sum_lengths = 10.0;  // I_g = 2*40/10 = 8, metric 640
  FlowView g2 = g1;
  g2.queue_bits = 50.0;  // metric 400
  snap.flows = {g1, g2};
  ControlAction a = nc_rc_decide(snap, ps, t, 5.0, 1.0);
  CHECK(a.flow == 0);
  CHECK(a.power == 1.0);

  // Exact tie goes to the lower flow index.
  snap.flows[1] = snap.flows[0];
  a = nc_rc_decide(snap, ps, t, 5.0, 1.0);
  CHECK(a.flow == 0);
}

TEST_CASE("decision is invariant under scaling queues and Z by 2") {
  ChannelModel m = unit_model(0.6, 4);
  PowerSet ps;
  ps.levels = {0.0, 1.0, 2.0};
  ps.p_av = 1.0;
  CsiTable t = build_csi_table(m, ps.levels);
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int it = 0; it < 2000; ++it) {
    SchedulerSnapshot snap;
    snap.z = u(rng) * 50.0;
    for (int f = 0; f < 3; ++f) {
      FlowView v;
      if (f == 2) {
        v.kind = FlowKind::kMulticast;
        v.group = 0;
        v.code_index = 2;
        v.sum_lengths = 8.0 + u(rng) * 10.0;
      } else {
        v.kind = FlowKind::kUnicast;
        v.receiver = 0;
        v.csi_bin = static_cast<int>(u(rng) * 4);
      }
      v.queue_bits = u(rng) * 300.0;
      v.message_bits = 40.0;
      snap.flows.push_back(v);
    }
    ControlAction a = nc_rc_decide(snap, ps, t, 5.0, 1.0);
    SchedulerSnapshot scaled = snap;
    scaled.z *= 2.0;
    for (auto& v : scaled.flows) v.queue_bits *= 2.0;
    ControlAction b = nc_rc_decide(scaled, ps, t, 5.0, 1.0);
    CHECK(a.flow == b.flow);
    CHECK(a.power_index == b.power_index);
  }
}

TEST_CASE("fixed-rate tables: goodput never exceeds the conditional mean") {
  ChannelModel m = unit_model(0.7, 8);
  CsiTable t = build_csi_table(m, {0.5, 1.0, 4.0});
  for (int p = 0; p < 3; ++p)
    for (int b = 0; b < 8; ++b)
      CHECK(t.best_goodput[0][p][b] <= t.expected_mi[0][p][b] + 1e-9);
}

TEST_CASE("fixed-rate R* at rho=0 matches a brute-force MC grid search") {
  // With no CSI the outage curve is Rayleigh: Pr{I >= R} = exp(-(2^R-1)/P).
  ChannelModel m = unit_model(0.0, 1, 5.0);
  const double P = 10.0;
  CsiTable t = build_csi_table(m, {P});
  double table_rate = t.best_rate[0][0][0];

  Rng rng(31415);
  std::exponential_distribution<double> g2(1.0);
  const int n = 200000;
  std::vector<double> gains(n);
  for (int i = 0; i < n; ++i) gains[i] = g2(rng);
  double best_rate = 0.0, best_good = 0.0;
  for (int j = 1; j <= 256; ++j) {
    double rate = 5.0 * j / 256.0;
    long long ok = 0;
    for (int i = 0; i < n; ++i)
      if (std::min(std::log2(1.0 + gains[i] * P), 5.0) >= rate) ++ok;
    double good = rate * ok / n;
    if (good > best_good) {
      best_good = good;
      best_rate = rate;
    }
  }
  // MC noise can shift the argmax by a grid step or two.
  CHECK(std::abs(table_rate - best_rate) <= 3.0 * 5.0 / 256.0);
  CHECK(t.best_goodput[0][0][0] == doctest::Approx(best_good).epsilon(0.02));
}

TEST_CASE("fixed-rate decide: perfect CSI picks the realized MI as the rate") {
  ChannelModel m = unit_model(1.0, 4);
  cplx h{1.3, 0.2};
  CHECK(perfect_csi_fixed_rate(m, h, 2.0) ==
        doctest::Approx(m.mutual_information(h, 2.0)));
}

TEST_CASE("group fixed rate follows the weakest member's chunk goodput") {
  ChannelConfig c;
  c.num_unicast = 0;
  c.group_sizes = {2};
  c.group_snr_db = {{3.0, 0.0}};  // weakest member has unit variance
  c.rho = 0.0;
  c.i_max = 5.0;
  c.p_av_for_snr = 1.0;
  ChannelModel m(c);
  GroupFixedRate gr = group_fixed_rate(m, 0, 10.0);
  CHECK(gr.rate > 0.0);
  // Brute-force against the weakest member's analytic outage curve.
  double best_good = 0.0, best_rate = 0.0;
  for (int j = 1; j <= 256; ++j) {
    double rate = 5.0 * j / 256.0;
    double x = (std::exp2(rate) - 1.0) / 10.0;
    double good = rate * std::exp(-x);
    if (good > best_good) {
      best_good = good;
      best_rate = rate;
    }
  }
  CHECK(gr.rate == doctest::Approx(best_rate).epsilon(1e-9));
  CHECK(gr.goodput == doctest::Approx(best_good).epsilon(1e-6));
}
