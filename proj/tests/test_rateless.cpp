#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ncrc/rateless.hpp"
#include "ncrc/region.hpp"
#include "ncrc/rng.hpp"

using namespace ncrc;

TEST_CASE("unicast accumulation below threshold") {
  UnicastReception st;
  st.message_bits = 40.0;
  st.accumulated_mi = 30.0;
  bool acked = step_unicast(st, true, 5.0);
  CHECK_FALSE(acked);
  CHECK(st.accumulated_mi == doctest::Approx(35.0));
  CHECK(st.code_index == 1);
}

TEST_CASE("unicast decode resets registers and records the length") {
  UnicastReception st;
  st.message_bits = 40.0;
  st.accumulated_mi = 36.0;
  st.slots_on_message = 9;
  bool acked = step_unicast(st, true, 5.0);
  CHECK(acked);
  CHECK(st.accumulated_mi == 0.0);
  CHECK(st.slots_on_message == 0);
  CHECK(st.code_index == 2);
  REQUIRE(st.length_history.size() == 1);
  CHECK(st.length_history[0] == 10);
}

TEST_CASE("unscheduled slots leave the state untouched") {
  UnicastReception st;
  st.message_bits = 40.0;
  st.accumulated_mi = 17.5;
  st.slots_on_message = 4;
  CHECK_FALSE(step_unicast(st, false, 5.0));
  CHECK(st.accumulated_mi == doctest::Approx(17.5));
  CHECK(st.slots_on_message == 4);
}

TEST_CASE("nonzero reception overhead raises the decode threshold") {
  UnicastReception st;
  st.message_bits = 40.0;
  st.epsilon = 0.25;  // threshold 50
  st.accumulated_mi = 44.0;
  CHECK_FALSE(step_unicast(st, true, 5.0));
  CHECK(st.accumulated_mi == doctest::Approx(49.0));
  CHECK(step_unicast(st, true, 5.0));
}

TEST_CASE("single-member multicast reproduces unicast decode slots") {
  UnicastReception u;
  u.message_bits = 40.0;
  MulticastReception m(40.0, 1);
  Rng rng(123);
  std::uniform_real_distribution<double> mi(0.0, 5.0);
  for (int t = 0; t < 5000; ++t) {
    double x = mi(rng);
    bool au = step_unicast(u, true, x);
    bool am = step_multicast(m, true, std::span<const double>(&x, 1));
    CHECK(au == am);
  }
  CHECK(u.length_history == m.length_history);
  CHECK(u.code_index == m.code_index);
}

TEST_CASE("partial multicast decode freezes the fast member") {
  MulticastReception m(40.0, 2);
  m.accumulated = {38.0, 20.0};
  std::vector<double> mi = {5.0, 5.0};
  bool acked = step_multicast(m, true, mi);
  CHECK_FALSE(acked);
  CHECK(m.decoded[0] == 1);
  CHECK(m.decoded[1] == 0);
  CHECK(m.accumulated[1] == doctest::Approx(25.0));
  // Frozen member no longer accumulates.
  double before = m.accumulated[0];
  step_multicast(m, true, mi);
  CHECK(m.accumulated[0] == before);
}

TEST_CASE("deterministic multicast code length") {
  MulticastReception m(40.0, 3);
  std::vector<double> mi = {5.0, 5.0, 5.0};
  int acks = 0;
  for (int t = 0; t < 80; ++t)
    if (step_multicast(m, true, mi)) ++acks;
  CHECK(acks == 10);
  for (long long l : m.length_history) CHECK(l == 8);
  CHECK(m.upsilon == 80);
  CHECK(m.code_index == 11);
}

TEST_CASE("session length equals the slowest member's code length") {
  MulticastReception m(40.0, 3);
  Rng rng(9);
  std::uniform_real_distribution<double> mi(0.0, 5.0);
  std::vector<double> x(3);
  for (int t = 0; t < 20000; ++t) {
    for (double& v : x) v = mi(rng);
    step_multicast(m, true, x);
  }
  REQUIRE(m.length_history.size() > 100);
  for (size_t n = 0; n < m.length_history.size(); ++n) {
    long long mx = 0;
    for (int j = 0; j < 3; ++j) mx = std::max(mx, m.member_lengths[j][n]);
    CHECK(m.length_history[n] == mx);
  }
  long long sum = 0;
  for (long long l : m.length_history) sum += l;
  CHECK(m.upsilon == sum);
}

TEST_CASE("pre-decode bound and overshoot conservation") {
  UnicastReception st;
  st.message_bits = 40.0;
  Rng rng(77);
  std::uniform_real_distribution<double> mi(0.0, 5.0);
  for (int t = 0; t < 50000; ++t) {
    double x = mi(rng);
    double before = st.accumulated_mi;
    bool acked = step_unicast(st, true, x);
    if (acked) {
      double total = before + x;
      CHECK(total >= 40.0);
      CHECK(total < 45.0);
    } else {
      CHECK(st.accumulated_mi < 40.0);
    }
  }
}

TEST_CASE("mean code length basics") {
  std::vector<long long> h = {8, 8, 8};
  CHECK(mean_code_length(h).value() == doctest::Approx(8.0));
  CHECK_FALSE(mean_code_length(std::span<const long long>()).has_value());
}

TEST_CASE("Monte-Carlo mean code length matches the absorbing-chain oracle") {
  MiPmf pmf{{2.0, 5.0}, {0.5, 0.5}};
  const double M = 40.0;

  SUBCASE("single member") {
    double exact = lbar_oracle_exact({pmf}, M);
    UnicastReception st;
    st.message_bits = M;
    Rng rng(2024);
    const int codes = 100000;
    long long slots = 0;
    int done = 0;
    while (done < codes) {
      ++slots;
      if (step_unicast(st, true, pmf.sample(rng))) ++done;
    }
    double mc = static_cast<double>(slots) / codes;
    CHECK(mc == doctest::Approx(exact).epsilon(0.01));
  }

  SUBCASE("two members, joint absorption") {
    double exact = lbar_oracle_exact({pmf, pmf}, M);
    MulticastReception m(M, 2);
    Rng rng(2025);
    std::vector<double> x(2);
    const int codes = 100000;
    long long slots = 0;
    int done = 0;
    while (done < codes) {
      ++slots;
      for (double& v : x) v = pmf.sample(rng);
      if (step_multicast(m, true, x)) ++done;
    }
    double mc = static_cast<double>(slots) / codes;
    CHECK(mc == doctest::Approx(exact).epsilon(0.01));
  }
}
