#include "ncrc/scenario.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ncrc/common.hpp"
#include "ncrc/rng.hpp"

namespace ncrc {

using nlohmann::json;

namespace {

ChannelConfig paper_channel(int num_unicast, double snr_db, int groups, int group_size,
                            double rho) {
  ChannelConfig c;
  c.num_unicast = num_unicast;
  c.unicast_snr_db.assign(num_unicast, snr_db);
  c.group_sizes.assign(groups, group_size);
  c.group_snr_db.assign(groups, std::vector<double>(group_size, snr_db));
  c.rho = rho;
  c.i_max = 5.0;
  c.symbols_per_slot = 1;
  c.quant_bins = 4;
  c.mode = ChannelMode::kIidRayleigh;
  return c;
}

SimConfig paper_base(double rho) {
  SimConfig cfg;
  cfg.channel = paper_channel(5, 10.0, 2, 4, rho);
  cfg.unicast.assign(5, UnicastFlowConfig{0.0, 40.0});
  cfg.groups.assign(2, MulticastFlowConfig{0.0, 40.0, -1});
  cfg.power.levels = {0.0, 1.0, 2.0};
  cfg.power.p_av = 1.0;
  cfg.horizon = 200000;
  cfg.warmup = -1;
  return cfg;
}

std::vector<double> default_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 10; ++i) g.push_back(0.1 * i);
  return g;
}

// Lattice config used by the region_check preset: on/off gains whose MI at
// P_av lands on a {0, 4} lattice, so the LP boundary is exactly computable.
SimConfig lattice_check_base() {
  SimConfig cfg;
  ChannelConfig& c = cfg.channel;
  c.num_unicast = 2;
  c.unicast_snr_db = {0.0, 0.0};  // unused in discrete mode
  c.group_sizes = {2};
  c.group_snr_db = {{0.0, 0.0}};
  c.rho = 0.8;
  c.i_max = 4.0;
  c.symbols_per_slot = 1;
  c.mode = ChannelMode::kDiscrete;
  c.gain_levels = {0.0, 15.0};  // MI(15, P_av=1) = log2(16) = 4 bits
  c.gain_probs = {0.5, 0.5};
  c.quant_bins = 2;
  cfg.unicast.assign(2, UnicastFlowConfig{1.0, 37.0});
  cfg.groups.assign(1, MulticastFlowConfig{1.0, 37.0, -1});
  cfg.power.levels = {0.0, 1.0};
  cfg.power.p_av = 1.0;
  cfg.horizon = 200000;
  cfg.warmup = 20000;
  return cfg;
}

}  // namespace

Scenario make_preset(const std::string& name) {
  Scenario sc;
  sc.name = name;
  if (name == "fig1" || name == "fig2") {
    sc.base = paper_base(name == "fig1" ? 0.1 : 0.8);
    sc.grid = default_grid();
    sc.policies = {Policy::kNcRc, Policy::kFixedRate, Policy::kUnicastOnly};
    sc.genie_line = true;
    sc.region_bins = 2;  // keeps the genie LP at E = 2^5 states
    return sc;
  }
  if (name == "fig3") {
    SimConfig cfg;
    cfg.channel = paper_channel(5, 10.0, 2, 4, 0.9);
    cfg.channel.unicast_snr_db = {12.0, 10.0, 8.0, 6.0, 4.0};
    cfg.channel.group_snr_db = {{12.0, 9.0, 6.0, 3.0}, {12.0, 9.0, 6.0, 3.0}};
    cfg.unicast.assign(5, UnicastFlowConfig{0.0, 40.0});
    cfg.groups.assign(2, MulticastFlowConfig{0.0, 40.0, 3});
    cfg.power.levels = {0.0, 1.0, 2.0};
    cfg.power.p_av = 1.0;
    cfg.horizon = 200000;
    sc.base = cfg;
    sc.grid = default_grid();
    sc.policies = {Policy::kNcRc, Policy::kNcRcCombined};
    return sc;
  }
  if (name == "region_check") {
    sc.base = lattice_check_base();
    sc.policies = {Policy::kNcRc};
    sc.region_check = true;
    sc.replications = 3;
    return sc;
  }
  if (name == "custom") {
    sc.policies = {Policy::kNcRc};
    return sc;
  }
  throw std::invalid_argument("unknown scenario preset: " + name);
}

std::vector<ResultRow> run_scenario(const Scenario& sc, int threads) {
  std::vector<double> grid = sc.grid;
  Scenario work = sc;

  if (sc.region_check) {
    // LP boundary of the lattice config along the symmetric direction, then
    // paired loads around it.
    SimConfig dir_cfg = sc.base;
    for (auto& u : dir_cfg.unicast) u.lambda = 1.0;
    for (auto& g : dir_cfg.groups) g.lambda = 1.0;
    auto bundle = make_region_bundle(dir_cfg, false, false, 0, 0, sc.master_seed);
    RegionProblem prob = build_region(bundle->spec);
    RegionSolution lp = solve_boundary(prob);
    work.grid = {0.9 * lp.lambda_star, 1.1 * lp.lambda_star};
    work.region_check = false;
    std::vector<ResultRow> rows = run_scenario(work, threads);
    ResultRow lp_row;
    lp_row.policy = "lp_boundary";
    lp_row.sweep = lp.lambda_star;
    lp_row.seed = sc.master_seed;
    lp_row.verdict = "boundary";
    rows.insert(rows.begin(), lp_row);
    return rows;
  }

  struct Job {
    int grid_idx;
    int policy_idx;
    int rep;
  };
  std::vector<Job> jobs;
  for (size_t gi = 0; gi < grid.size(); ++gi)
    for (size_t pi = 0; pi < sc.policies.size(); ++pi)
      for (int r = 0; r < sc.replications; ++r)
        jobs.push_back({static_cast<int>(gi), static_cast<int>(pi), r});

  std::vector<ResultRow> rows(jobs.size());
  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
      const Job& jb = jobs[i];
      SimConfig cfg = sc.base;
      double sweep_value = grid[jb.grid_idx];
      switch (sc.sweep) {
        case SweepVar::kLambda:
          for (auto& u : cfg.unicast) u.lambda = sweep_value;
          for (auto& g : cfg.groups) g.lambda = sweep_value;
          break;
        case SweepVar::kRho:
          cfg.channel.rho = sweep_value;
          break;
        case SweepVar::kCoveredCount:
          for (auto& g : cfg.groups)
            g.covered_count = static_cast<int>(std::llround(sweep_value));
          break;
      }
      cfg.policy = sc.policies[jb.policy_idx];
      // Counter-based substream: a function of the job coordinates only.
      std::uint64_t stream =
          (static_cast<std::uint64_t>(jb.grid_idx) * 64 + jb.policy_idx) * 1048576ull +
          static_cast<std::uint64_t>(jb.rep) + 2;
      cfg.seed = derive_seed(sc.master_seed, stream);
      RunMetrics m = run(cfg);
      ResultRow& row = rows[i];
      row.policy = policy_name(cfg.policy);
      row.sweep = sweep_value;
      row.seed = cfg.seed;
      row.avg_queue_bits = m.total_avg_queue_bits;
      row.throughput_bps = m.total_throughput_bps;
      row.avg_power_w = m.avg_power_watts;
      row.verdict = verdict_name(m.verdict);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(jobs.size());
        return;
      }
    }
  };
  int nthreads = threads > 0 ? threads
                             : static_cast<int>(std::min<size_t>(
                                   jobs.size(),
                                   std::max(1u, std::thread::hardware_concurrency())));
  std::vector<std::thread> pool;
  for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);

  if (sc.genie_line) {
    SimConfig dir_cfg = sc.base;
    for (auto& u : dir_cfg.unicast) u.lambda = 1.0;
    for (auto& g : dir_cfg.groups) g.lambda = 1.0;
    auto bundle = make_region_bundle(dir_cfg, false, true, sc.region_bins, 0,
                                     sc.master_seed);
    RegionProblem prob = build_region(bundle->spec);
    RegionSolution lp = solve_boundary(prob);
    ResultRow row;
    row.policy = "genie_lp";
    row.sweep = lp.lambda_star;
    row.seed = sc.master_seed;
    row.verdict = "boundary";
    rows.push_back(row);
  }
  return rows;
}

void emit_csv(const std::vector<ResultRow>& rows, std::ostream& os) {
  os << "policy,sweep,seed,avg_queue_bits,throughput_bps,avg_power_w,verdict\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%llu,%.10g,%.10g,%.10g,%s\n",
                  r.policy.c_str(), r.sweep,
                  static_cast<unsigned long long>(r.seed), r.avg_queue_bits,
                  r.throughput_bps, r.avg_power_w, r.verdict.c_str());
    os << buf;
  }
}

void emit_json(const std::vector<ResultRow>& rows, std::ostream& os) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"policy", r.policy},
                   {"sweep", r.sweep},
                   {"seed", r.seed},
                   {"avg_queue_bits", r.avg_queue_bits},
                   {"throughput_bps", r.throughput_bps},
                   {"avg_power_w", r.avg_power_w},
                   {"verdict", r.verdict}});
  }
  os << arr.dump(2) << "\n";
}

std::string run_metrics_json(const RunMetrics& m) {
  json j;
  j["num_flows"] = m.num_flows;
  j["slots"] = m.slots;
  j["avg_queue_bits"] = m.avg_queue_bits;
  j["total_avg_queue_bits"] = m.total_avg_queue_bits;
  j["throughput_bps"] = m.throughput_bps;
  j["total_throughput_bps"] = m.total_throughput_bps;
  j["avg_power_watts"] = m.avg_power_watts;
  j["full_avg_power_watts"] = m.full_avg_power_watts;
  j["final_z"] = m.final_z;
  j["z_over_t"] = m.z_over_t;
  j["verdict"] = verdict_name(m.verdict);
  j["stability_slope"] = m.stability_slope;
  j["stability_rate_ref"] = m.stability_rate_ref;
  j["group_mean_code_length"] = m.group_mean_code_length;
  j["group_tracked_rate"] = m.group_tracked_rate;
  j["repair_eta"] = m.repair_eta;
  j["lyapunov_trace"] = m.lyapunov_trace;
  return j.dump(2);
}

namespace {

ArrivalKind arrival_kind_from(const std::string& s) {
  if (s == "poisson") return ArrivalKind::kPoisson;
  if (s == "deterministic") return ArrivalKind::kDeterministic;
  throw std::invalid_argument("unknown arrival kind: " + s);
}

ChannelMode channel_mode_from(const std::string& s) {
  if (s == "iid_rayleigh") return ChannelMode::kIidRayleigh;
  if (s == "ar1_rayleigh") return ChannelMode::kAr1Rayleigh;
  if (s == "discrete") return ChannelMode::kDiscrete;
  throw std::invalid_argument("unknown channel mode: " + s);
}

}  // namespace

SimConfig sim_config_from_json_text(const std::string& text) {
  json j = json::parse(text);
  SimConfig cfg;
  const json& ch = j.at("channel");
  ChannelConfig& c = cfg.channel;
  c.mode = channel_mode_from(ch.value("mode", "iid_rayleigh"));
  c.rho = ch.value("rho", 0.0);
  c.i_max = ch.value("i_max", 5.0);
  c.symbols_per_slot = ch.value("symbols_per_slot", 1);
  c.quant_bins = ch.value("quant_bins", 4);
  c.ar_coeff = ch.value("ar_coeff", 0.1);
  c.unicast_snr_db = ch.value("unicast_snr_db", std::vector<double>{});
  c.num_unicast = static_cast<int>(c.unicast_snr_db.size());
  c.group_snr_db = ch.value("group_snr_db", std::vector<std::vector<double>>{});
  for (const auto& g : c.group_snr_db)
    c.group_sizes.push_back(static_cast<int>(g.size()));
  c.gain_levels = ch.value("gain_levels", std::vector<double>{});
  c.gain_probs = ch.value("gain_probs", std::vector<double>{});
  if (c.mode == ChannelMode::kDiscrete)
    c.quant_bins = static_cast<int>(c.gain_levels.size());

  const json& pw = j.at("power");
  cfg.power.levels = pw.at("levels").get<std::vector<double>>();
  cfg.power.p_av = pw.at("p_av").get<double>();

  for (const auto& u : j.value("unicast", json::array()))
    cfg.unicast.push_back(
        {u.value("lambda", 0.0), u.value("message_bits", 40.0)});
  for (const auto& g : j.value("groups", json::array()))
    cfg.groups.push_back({g.value("lambda", 0.0), g.value("message_bits", 40.0),
                          g.value("covered_count", -1)});

  cfg.policy = policy_from_name(j.value("policy", "nc_rc"));
  cfg.horizon = j.value("horizon", 100000LL);
  cfg.warmup = j.value("warmup", -1LL);
  cfg.seed = j.value("seed", 1ULL);
  cfg.epsilon = j.value("epsilon", 0.0);
  cfg.arrivals = arrival_kind_from(j.value("arrivals", "poisson"));
  cfg.warmup_sessions = j.value("warmup_sessions", 200);
  cfg.check_invariants = j.value("check_invariants", false);
  if (j.contains("traces")) {
    const json& tr = j["traces"];
    cfg.traces.queue_csv = tr.value("queue_csv", "");
    cfg.traces.decision_csv = tr.value("decision_csv", "");
    cfg.traces.lengths_csv = tr.value("lengths_csv", "");
    cfg.traces.settlement_csv = tr.value("settlement_csv", "");
  }
  return cfg;
}

SimConfig load_sim_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return sim_config_from_json_text(ss.str());
}

std::unique_ptr<RegionBundle> make_region_bundle(const SimConfig& cfg, bool combined,
                                                 bool genie, int bins_override,
                                                 int mc_sessions, std::uint64_t seed) {
  ChannelConfig cc = cfg.channel;
  cc.p_av_for_snr = cfg.power.p_av > 0.0 ? cfg.power.p_av : 1.0;
  if (bins_override > 0 && cc.mode != ChannelMode::kDiscrete)
    cc.quant_bins = bins_override;
  auto bundle = std::make_unique<RegionBundle>(ChannelModel(cc));
  const ChannelModel& model = bundle->model;
  bundle->table = build_csi_table(model, cfg.power.levels, 256, false);

  RegionSpec& spec = bundle->spec;
  spec.model = &bundle->model;
  spec.table = &bundle->table;
  spec.power = cfg.power;
  spec.genie = genie;
  spec.combined = combined;
  spec.epsilon = cfg.epsilon;
  for (const auto& u : cfg.unicast) {
    spec.unicast_message_bits.push_back(u.message_bits);
    spec.direction_unicast.push_back(u.lambda);
  }
  for (const auto& g : cfg.groups) {
    spec.group_message_bits.push_back(g.message_bits);
    spec.direction_group.push_back(g.lambda);
  }

  Rng rng(derive_seed(seed, 7));
  const double K = model.symbols_per_slot();
  for (int g = 0; g < model.num_groups(); ++g) {
    int J = model.group_size(g);
    int l = cfg.groups[g].covered_count < 0 ? J : cfg.groups[g].covered_count;
    if (!combined) l = J;
    // Covered set: top-l members by mean SNR (lower id on ties).
    std::vector<int> order(J);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return model.variance(model.member_receiver(g, a)) >
             model.variance(model.member_receiver(g, b));
    });
    std::vector<int> covered(order.begin(), order.begin() + l);
    std::vector<int> straggler(order.begin() + l, order.end());
    std::sort(covered.begin(), covered.end());
    std::sort(straggler.begin(), straggler.end());

    if (genie) {
      spec.lbar.push_back(1.0);  // unused by the genie rows
    } else if (model.config().mode == ChannelMode::kDiscrete) {
      MiPmf pmf;
      pmf.values.reserve(model.config().gain_levels.size());
      for (double g2 : model.config().gain_levels)
        pmf.values.push_back(
            mutual_information_gain2(g2, cfg.power.p_av, model.i_max()) * K);
      pmf.probs = model.config().gain_probs;
      std::vector<MiPmf> members(covered.size(), pmf);
      spec.lbar.push_back(lbar_oracle_exact(members, cfg.groups[g].message_bits));
      if (combined) {
        std::vector<double> etas;
        for (size_t s = 0; s < straggler.size(); ++s)
          etas.push_back(
              eta_oracle_exact(pmf, members, cfg.groups[g].message_bits));
        spec.stragglers.push_back(straggler);
        spec.eta.push_back(etas);
      }
    } else {
      int sessions = mc_sessions > 0 ? mc_sessions : 100000;
      GroupSessionStats st =
          group_session_mc(model, g, cfg.groups[g].message_bits, covered,
                           straggler, cfg.power.p_av, sessions, rng);
      spec.lbar.push_back(st.lbar);
      if (combined) {
        spec.stragglers.push_back(straggler);
        spec.eta.push_back(st.eta);
      }
    }
  }
  return bundle;
}

}  // namespace ncrc
