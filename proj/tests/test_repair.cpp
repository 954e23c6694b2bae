#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ncrc/channel.hpp"
#include "ncrc/region.hpp"
#include "ncrc/repair.hpp"
#include "ncrc/rng.hpp"

using namespace ncrc;

TEST_CASE("partition keeps the top throughput members") {
  // Average throughputs 3, 5, 4, 1 bits/slot (M = 60).
  std::vector<std::vector<long long>> hist = {{20}, {12}, {15}, {60}};
  PartitionSpec p = estimate_partition(hist, 60.0, 3);
  CHECK(p.avg_throughput[0] == doctest::Approx(3.0));
  CHECK(p.avg_throughput[1] == doctest::Approx(5.0));
  CHECK(p.covered == std::vector<int>{1, 2, 0});
  CHECK(p.stragglers == std::vector<int>{3});

  PartitionSpec all = estimate_partition(hist, 60.0, 4);
  CHECK(all.stragglers.empty());

  std::vector<std::vector<long long>> empty_hist = {{20}, {}};
  CHECK_THROWS(estimate_partition(empty_hist, 60.0, 1));
}

TEST_CASE("partition ties break toward the lower member id") {
  std::vector<std::vector<long long>> hist = {{10}, {10}, {10}};
  PartitionSpec p = estimate_partition(hist, 40.0, 2);
  CHECK(p.covered == std::vector<int>{0, 1});
  CHECK(p.stragglers == std::vector<int>{2});
}

TEST_CASE("settlement arithmetic") {
  const double M = 40.0;
  RepairFlow f;
  f.session_mi = 47.0;
  f.session_decoded = true;  // froze above M
  Settlement s = end_of_session_settlement(f, M);
  CHECK(s.r_star == doctest::Approx(40.0));
  CHECK(s.residual == doctest::Approx(0.0));
  CHECK(f.residuals.empty());  // zero-size residual skipped

  RepairFlow g;
  Settlement s2 = end_of_session_settlement(g, M);
  CHECK(s2.r_star == doctest::Approx(0.0));
  CHECK(s2.residual == doctest::Approx(M));

  RepairFlow h;
  h.session_mi = 25.0;
  Settlement s3 = end_of_session_settlement(h, M);
  CHECK(s3.r_star == doctest::Approx(25.0));
  CHECK(s3.residual == doctest::Approx(15.0));
  CHECK(s3.r_star + s3.residual == doctest::Approx(M));
  CHECK(h.session_mi == 0.0);
  REQUIRE(h.residuals.size() == 1);
  CHECK(h.residuals.front() == doctest::Approx(15.0));
}

TEST_CASE("repair reception against the pending residual") {
  RepairFlow f;
  f.residuals.push_back(15.0);
  f.accumulated_mi = 12.0;
  auto dec = step_repair_reception(f, true, 5.0);
  REQUIRE(dec.has_value());
  CHECK(*dec == doctest::Approx(15.0));
  CHECK(f.residuals.empty());
  CHECK(f.accumulated_mi == 0.0);
  CHECK(f.code_index == 2);
  REQUIRE(f.length_history.size() == 1);

  // Not scheduled or no backlog: nothing happens.
  CHECK_FALSE(step_repair_reception(f, false, 5.0).has_value());
  CHECK_FALSE(step_repair_reception(f, true, 5.0).has_value());
}

TEST_CASE("listening freezes at the message size") {
  RepairFlow f;
  repair_listen(f, 30.0, 40.0);
  CHECK_FALSE(f.session_decoded);
  repair_listen(f, 30.0, 40.0);
  CHECK(f.session_decoded);
  double frozen = f.session_mi;
  repair_listen(f, 30.0, 40.0);
  CHECK(f.session_mi == frozen);
}

TEST_CASE("eta estimate: boundary cases and the oracle") {
  const double M = 40.0;
  RepairFlow f;
  CHECK_FALSE(eta_estimate(f, M).has_value());
  f.session_mi = M + 5.0;
  f.session_decoded = true;
  end_of_session_settlement(f, M);
  CHECK(eta_estimate(f, M).value() == doctest::Approx(1.0));

  RepairFlow g;
  end_of_session_settlement(g, M);
  CHECK(eta_estimate(g, M).value() == doctest::Approx(0.0));

  // Two-point MI sessions against the exact joint chain.
  MiPmf pmf{{2.0, 5.0}, {0.5, 0.5}};
  double oracle = eta_oracle_exact(pmf, {pmf}, M);
  Rng rng(314);
  RepairFlow straggler;
  const int sessions = 100000;
  for (int n = 0; n < sessions; ++n) {
    double covered_acc = 0.0;
    while (covered_acc < M) {
      covered_acc += pmf.sample(rng);
      repair_listen(straggler, pmf.sample(rng), M);
    }
    end_of_session_settlement(straggler, M);
  }
  CHECK(eta_estimate(straggler, M).value() == doctest::Approx(oracle).epsilon(0.02));
}

TEST_CASE("heterogeneous SNR warmup excludes the weakest member") {
  // Group SNRs [12, 9, 6, 3] dB: with l = 3 the 3 dB member should end up
  // the straggler once enough warmup sessions are observed.
  ChannelConfig c;
  c.num_unicast = 0;
  c.group_sizes = {4};
  c.group_snr_db = {{12.0, 9.0, 6.0, 3.0}};
  c.rho = 0.5;
  c.i_max = 5.0;
  ChannelModel model(c);
  Rng rng(2718);
  const double M = 40.0;
  std::vector<std::vector<long long>> hist(4);
  std::vector<double> acc(4, 0.0);
  std::vector<long long> done(4, 0);
  for (int session = 0; session < 300; ++session) {
    std::fill(acc.begin(), acc.end(), 0.0);
    std::fill(done.begin(), done.end(), 0);
    long long t = 0;
    int left = 4;
    while (left > 0) {
      ++t;
      ChannelDraw d = model.sample_slot(rng);
      for (int j = 0; j < 4; ++j) {
        if (done[j]) continue;
        acc[j] += model.mutual_information(d.h[model.member_receiver(0, j)], 1.0);
        if (acc[j] >= M) {
          done[j] = t;
          hist[j].push_back(t);
          --left;
        }
      }
    }
  }
  PartitionSpec p = estimate_partition(hist, M, 3);
  CHECK(p.stragglers == std::vector<int>{3});
}
