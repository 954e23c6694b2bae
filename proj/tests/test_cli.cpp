#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "ncrc/scenario.hpp"

using namespace ncrc;

namespace {

SimConfig tiny_base() {
  SimConfig cfg;
  ChannelConfig& c = cfg.channel;
  c.num_unicast = 1;
  c.unicast_snr_db = {10.0};
  c.group_sizes = {2};
  c.group_snr_db = {{10.0, 6.0}};
  c.rho = 0.8;
  c.quant_bins = 2;
  cfg.unicast = {UnicastFlowConfig{0.2, 40.0}};
  cfg.groups = {MulticastFlowConfig{0.2, 40.0, -1}};
  cfg.power.levels = {0.0, 1.0};
  cfg.power.p_av = 1.0;
  cfg.horizon = 3000;
  cfg.warmup = 300;
  return cfg;
}

std::string csv_of(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  emit_csv(rows, os);
  return os.str();
}

}  // namespace

TEST_CASE("csv emission: header-only and single-row tables") {
  std::ostringstream empty;
  emit_csv({}, empty);
  CHECK(empty.str() ==
        "policy,sweep,seed,avg_queue_bits,throughput_bps,avg_power_w,verdict\n");

  ResultRow r;
  r.policy = "nc_rc";
  r.sweep = 0.5;
  r.seed = 42;
  r.verdict = "stable";
  std::ostringstream one;
  emit_csv({r}, one);
  std::string s = one.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == 2);
  CHECK(s.find("nc_rc,0.5,42") != std::string::npos);
}

TEST_CASE("json emission is an array of row objects") {
  ResultRow r;
  r.policy = "nc_rc";
  r.verdict = "stable";
  std::ostringstream os;
  emit_json({r}, os);
  CHECK(os.str().find("\"policy\"") != std::string::npos);
  CHECK(os.str().front() == '[');
}

TEST_CASE("presets carry the expected structure") {
  Scenario f1 = make_preset("fig1");
  CHECK(f1.base.channel.rho == doctest::Approx(0.1));
  CHECK(f1.base.channel.num_unicast == 5);
  CHECK(f1.base.channel.group_sizes == std::vector<int>{4, 4});
  CHECK(f1.policies.size() == 3);
  CHECK(f1.genie_line);
  Scenario f2 = make_preset("fig2");
  CHECK(f2.base.channel.rho == doctest::Approx(0.8));
  Scenario f3 = make_preset("fig3");
  CHECK(f3.base.channel.unicast_snr_db ==
        std::vector<double>{12.0, 10.0, 8.0, 6.0, 4.0});
  CHECK(f3.base.groups[0].covered_count == 3);
  CHECK(f3.policies == std::vector<Policy>{Policy::kNcRc, Policy::kNcRcCombined});
  CHECK_THROWS(make_preset("fig9"));
}

TEST_CASE("scenario rows: grid x policies x replications") {
  Scenario sc;
  sc.base = tiny_base();
  sc.grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  sc.policies = {Policy::kNcRc, Policy::kFixedRate, Policy::kUnicastOnly};
  sc.replications = 5;
  sc.master_seed = 99;
  std::vector<ResultRow> rows = run_scenario(sc, 4);
  CHECK(rows.size() == 8 * 3 * 5);
}

TEST_CASE("same master seed gives byte-identical tables") {
  Scenario sc;
  sc.base = tiny_base();
  sc.grid = {0.2, 0.5};
  sc.policies = {Policy::kNcRc};
  sc.replications = 3;
  sc.master_seed = 12345;
  std::string a = csv_of(run_scenario(sc, 3));
  std::string b = csv_of(run_scenario(sc, 1));
  CHECK(a == b);
}

TEST_CASE("adding replications never changes earlier rows") {
  Scenario sc;
  sc.base = tiny_base();
  sc.grid = {0.3};
  sc.policies = {Policy::kNcRc};
  sc.replications = 2;
  sc.master_seed = 5;
  std::vector<ResultRow> two = run_scenario(sc, 2);
  sc.replications = 4;
  std::vector<ResultRow> four = run_scenario(sc, 2);
  REQUIRE(four.size() == 4);
  for (int i = 0; i < 2; ++i) {
    CHECK(two[i].seed == four[i].seed);
    CHECK(two[i].avg_queue_bits == four[i].avg_queue_bits);
    CHECK(two[i].throughput_bps == four[i].throughput_bps);
  }
}

TEST_CASE("config json round trip") {
  const char* text = R"json({
    "channel": {
      "mode": "discrete", "rho": 0.8, "i_max": 4,
      "unicast_snr_db": [0, 0], "group_snr_db": [[0, 0]],
      "gain_levels": [0, 15], "gain_probs": [0.5, 0.5]
    },
    "power": {"levels": [0, 1], "p_av": 1},
    "unicast": [{"lambda": 0.5, "message_bits": 37},
                {"lambda": 0.5, "message_bits": 37}],
    "groups": [{"lambda": 0.5, "message_bits": 37}],
    "policy": "nc_rc", "horizon": 50000, "seed": 3,
    "arrivals": "poisson", "epsilon": 0.0
  })json";
  SimConfig cfg = sim_config_from_json_text(text);
  CHECK(cfg.channel.num_unicast == 2);
  CHECK(cfg.channel.mode == ChannelMode::kDiscrete);
  CHECK(cfg.channel.quant_bins == 2);  // implied by the level count
  CHECK(cfg.channel.group_sizes == std::vector<int>{2});
  CHECK(cfg.unicast.size() == 2);
  CHECK(cfg.groups[0].message_bits == doctest::Approx(37.0));
  CHECK(cfg.power.levels.size() == 2);
  CHECK(cfg.horizon == 50000);
  cfg.validate();

  CHECK_THROWS(sim_config_from_json_text("{\"policy\": \"nope\"}"));
}

TEST_CASE("run metrics serialize to json") {
  SimConfig cfg = tiny_base();
  cfg.horizon = 2000;
  cfg.warmup = 200;
  RunMetrics m = run(cfg);
  std::string j = run_metrics_json(m);
  CHECK(j.find("\"total_throughput_bps\"") != std::string::npos);
  CHECK(j.find("\"verdict\"") != std::string::npos);
}

TEST_CASE("rho and covered-count sweeps reuse the base loads") {
  Scenario sc;
  sc.base = tiny_base();
  sc.sweep = SweepVar::kRho;
  sc.grid = {0.1, 0.9};
  sc.policies = {Policy::kNcRc};
  sc.replications = 1;
  std::vector<ResultRow> rows = run_scenario(sc, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].sweep == doctest::Approx(0.1));
  CHECK(rows[1].sweep == doctest::Approx(0.9));

  Scenario cc;
  cc.base = tiny_base();
  cc.base.policy = Policy::kNcRcCombined;
  cc.base.warmup_sessions = 5;
  cc.sweep = SweepVar::kCoveredCount;
  cc.grid = {1.0, 2.0};
  cc.policies = {Policy::kNcRcCombined};
  cc.replications = 1;
  std::vector<ResultRow> rows2 = run_scenario(cc, 2);
  REQUIRE(rows2.size() == 2);
  CHECK(rows2[0].sweep == doctest::Approx(1.0));
}
