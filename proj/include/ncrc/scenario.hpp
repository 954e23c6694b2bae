#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ncrc/region.hpp"
#include "ncrc/simcore.hpp"

namespace ncrc {

enum class SweepVar { kLambda, kRho, kCoveredCount };

// A sweep scenario: grid of sweep values x policies x replications over a
// base configuration. Presets mirror the standard experiment shapes; custom
// scenarios come from a config file. The sweep variable is the per-flow
// traffic load by default; rho and l(g) sweeps reuse the base loads.
struct Scenario {
  std::string name = "custom";
  SweepVar sweep = SweepVar::kLambda;
  std::vector<double> grid;  // sweep values
  int replications = 5;
  std::uint64_t master_seed = 1;
  SimConfig base;
  std::vector<Policy> policies;
  bool genie_line = false;   // append the infinite-block-length LP reference
  bool region_check = false; // LP boundary vs simulated loads
  int region_bins = 0;       // override quant_bins for LP lines (0 = as-is)
};

struct ResultRow {
  std::string policy;
  double sweep = 0.0;
  std::uint64_t seed = 0;
  double avg_queue_bits = 0.0;
  double throughput_bps = 0.0;
  double avg_power_w = 0.0;
  std::string verdict;
};

// Named presets: fig1, fig2, fig3, region_check. Throws on unknown names.
Scenario make_preset(const std::string& name);

// Runs every (grid point, policy, replication) job on a small worker pool and
// returns rows in deterministic order. Per-job seeds derive from the master
// seed and the job coordinates only, so results are reproducible and earlier
// rows never change when replications are added.
std::vector<ResultRow> run_scenario(const Scenario& sc, int threads = 0);

void emit_csv(const std::vector<ResultRow>& rows, std::ostream& os);
void emit_json(const std::vector<ResultRow>& rows, std::ostream& os);

std::string run_metrics_json(const RunMetrics& m);

// JSON config file <-> SimConfig. The unicast count and group sizes are
// implied by the channel SNR lists.
SimConfig sim_config_from_json_text(const std::string& text);
SimConfig load_sim_config(const std::string& path);

// Region helpers: bundles the model/table lifetime with the spec.
struct RegionBundle {
  ChannelModel model;
  CsiTable table;
  RegionSpec spec;

  explicit RegionBundle(ChannelModel m) : model(std::move(m)) {}
};

// Builds a region spec from a simulation config. For combined regions the
// covered set is the top-l members by mean SNR; Lbar and eta come from the
// exact lattice oracle in discrete mode and from Monte-Carlo sessions
// (mc_sessions per group) otherwise.
std::unique_ptr<RegionBundle> make_region_bundle(const SimConfig& cfg, bool combined,
                                                 bool genie, int bins_override,
                                                 int mc_sessions, std::uint64_t seed);

}  // namespace ncrc
