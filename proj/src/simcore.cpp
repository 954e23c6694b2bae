#include "ncrc/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ncrc/common.hpp"
#include "ncrc/rng.hpp"

namespace ncrc {

const char* policy_name(Policy p) {
  switch (p) {
    case Policy::kNcRc: return "nc_rc";
    case Policy::kFixedRate: return "fixed_rate";
    case Policy::kUnicastOnly: return "unicast_only";
    case Policy::kNcRcCombined: return "nc_rc_combined";
  }
  return "?";
}

Policy policy_from_name(const std::string& name) {
  if (name == "nc_rc") return Policy::kNcRc;
  if (name == "fixed_rate") return Policy::kFixedRate;
  if (name == "unicast_only") return Policy::kUnicastOnly;
  if (name == "nc_rc_combined") return Policy::kNcRcCombined;
  throw std::invalid_argument("unknown policy: " + name);
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kStable: return "stable";
    case Verdict::kUnstable: return "unstable";
    case Verdict::kInconclusive: return "inconclusive";
  }
  return "?";
}

void SimConfig::validate() const {
  power.validate();
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  if (effective_warmup() < 0 || effective_warmup() >= horizon)
    throw std::invalid_argument("need horizon > warmup >= 0");
  if (static_cast<int>(unicast.size()) != channel.num_unicast)
    throw std::invalid_argument("unicast flow list does not match channel config");
  if (unicast.empty() && groups.empty())
    throw std::invalid_argument("no flows configured");
  if (groups.size() != channel.group_sizes.size())
    throw std::invalid_argument("group flow list does not match channel config");
  for (const auto& u : unicast) {
    if (u.lambda < 0.0) throw std::invalid_argument("negative arrival rate");
    if (u.message_bits <= 0.0) throw std::invalid_argument("message size must be positive");
  }
  for (size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].lambda < 0.0) throw std::invalid_argument("negative arrival rate");
    if (groups[g].message_bits <= 0.0)
      throw std::invalid_argument("message size must be positive");
    int J = channel.group_sizes[g];
    int l = groups[g].covered_count;
    if (l != -1 && (l < 1 || l > J))
      throw std::invalid_argument("covered_count outside [1, J]");
  }
  if (epsilon < 0.0) throw std::invalid_argument("negative reception overhead");
  if (policy == Policy::kNcRcCombined && warmup_sessions < 1)
    throw std::invalid_argument("combined delivery needs warmup_sessions >= 1");
}

SimConfig SimConfig::scaled_arrivals(double t) const {
  SimConfig c = *this;
  for (auto& u : c.unicast) u.lambda *= t;
  for (auto& g : c.groups) g.lambda *= t;
  return c;
}

double lyapunov_value(std::span<const double> queues, double z) {
  double s = z * z;
  for (double q : queues) s += q * q;
  return 0.5 * s;
}

Verdict classify_stability(std::span<const double> total_queue_trace,
                           double per_flow_rate_ref, double* slope_out) {
  if (total_queue_trace.size() < 10000)
    throw std::invalid_argument("stability trace too short (need >= 1e4 samples)");
  size_t n = total_queue_trace.size() / 2;
  std::span<const double> tail = total_queue_trace.subspan(total_queue_trace.size() - n);
  double xbar = (n - 1) / 2.0;
  double ybar = 0.0;
  for (double y : tail) ybar += y;
  ybar /= n;
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double dx = static_cast<double>(i) - xbar;
    sxy += dx * (tail[i] - ybar);
    sxx += dx * dx;
  }
  double slope = sxy / sxx;
  if (slope_out) *slope_out = slope;
  if (slope <= 0.01 * per_flow_rate_ref) return Verdict::kStable;
  if (slope > 0.1 * per_flow_rate_ref) return Verdict::kUnstable;
  return Verdict::kInconclusive;
}

namespace {

struct EngineFlow {
  FlowKind kind = FlowKind::kUnicast;
  int receiver = -1;  // unicast / member / repair receiver
  int group = -1;     // owning group for multicast, member and repair flows
  DataQueue q;
  UnicastReception uni;
  MulticastReception multi;
  RepairFlow rep;
  // Accounting for the throughput identity.
  long long acks = 0;
  double credited_bits = 0.0;  // sum of intended service quanta
  bool truncated_service = false;
};

struct CsvSink {
  std::ofstream out;
  bool on = false;
  explicit CsvSink(const std::string& path, const char* header) {
    if (path.empty()) return;
    out.open(path);
    if (!out) throw std::runtime_error("cannot open trace file: " + path);
    out << header << "\n";
    on = true;
  }
};

class Engine {
 public:
  explicit Engine(const SimConfig& cfg)
      : cfg_(cfg),
        model_(make_model(cfg)),
        table_(build_csi_table(model_, cfg.power.levels, 256,
                               cfg.policy == Policy::kFixedRate)) {
    build_flows();
    action_space_ = ActionSpace::build(flow_kinds(), cfg_.power);
    setup_bmi();
    if (cfg_.policy == Policy::kFixedRate) {
      for (int g = 0; g < model_.num_groups(); ++g)
        group_rates_.push_back(
            group_fixed_rate(model_, g, cfg_.power.p_av));
      exact_csi_ = cfg_.channel.rho >= 1.0 - 1e-12 &&
                   cfg_.channel.mode != ChannelMode::kDiscrete;
    }
  }

  RunMetrics run();

 private:
  static ChannelModel make_model(const SimConfig& cfg) {
    ChannelConfig cc = cfg.channel;
    // Degenerate zero-power budgets keep a unit normalization; every rate is
    // zero regardless of the variance then.
    cc.p_av_for_snr = cfg.power.p_av > 0.0 ? cfg.power.p_av : 1.0;
    return ChannelModel(cc);
  }

  std::vector<FlowKind> flow_kinds() const {
    std::vector<FlowKind> k;
    for (const auto& f : flows_) k.push_back(f.kind);
    return k;
  }

  void build_flows() {
    const int U = model_.num_unicast();
    const int G = model_.num_groups();
    for (int u = 0; u < U; ++u) {
      EngineFlow f;
      f.kind = FlowKind::kUnicast;
      f.receiver = u;
      f.q.lambda = cfg_.unicast[u].lambda;
      f.q.message_bits = cfg_.unicast[u].message_bits;
      f.uni.message_bits = cfg_.unicast[u].message_bits;
      f.uni.epsilon = cfg_.epsilon;
      flows_.push_back(std::move(f));
    }
    if (cfg_.policy == Policy::kUnicastOnly) {
      // Every multicast member becomes a standalone unicast flow carrying a
      // copy of the group arrivals.
      for (int g = 0; g < G; ++g) {
        for (int j = 0; j < model_.group_size(g); ++j) {
          EngineFlow f;
          f.kind = FlowKind::kUnicast;
          f.receiver = model_.member_receiver(g, j);
          f.group = g;
          f.q.lambda = cfg_.groups[g].lambda;
          f.q.message_bits = cfg_.groups[g].message_bits;
          f.uni.message_bits = cfg_.groups[g].message_bits;
          f.uni.epsilon = cfg_.epsilon;
          flows_.push_back(std::move(f));
        }
      }
      return;
    }
    for (int g = 0; g < G; ++g) {
      EngineFlow f;
      f.kind = FlowKind::kMulticast;
      f.group = g;
      f.q.lambda = cfg_.groups[g].lambda;
      f.q.message_bits = cfg_.groups[g].message_bits;
      f.multi = MulticastReception(cfg_.groups[g].message_bits, model_.group_size(g));
      flows_.push_back(std::move(f));
      tracked_.push_back(all_members(g));
    }
    if (cfg_.policy == Policy::kNcRcCombined) {
      group_first_repair_.assign(G, -1);
      for (int g = 0; g < G; ++g) {
        int J = model_.group_size(g);
        int l = cfg_.groups[g].covered_count < 0 ? J : cfg_.groups[g].covered_count;
        group_first_repair_[g] = static_cast<int>(flows_.size());
        for (int s = 0; s < J - l; ++s) {
          EngineFlow f;
          f.kind = FlowKind::kRepair;
          f.group = g;
          f.rep.group = g;
          flows_.push_back(std::move(f));
        }
      }
    }
  }

  std::vector<int> all_members(int g) const {
    std::vector<int> ids(model_.group_size(g));
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
  }

  void setup_bmi() {
    bmi_reporters_.resize(model_.num_unicast());
    std::iota(bmi_reporters_.begin(), bmi_reporters_.end(), 0);
    double e = std::pow(static_cast<double>(model_.bin_count()),
                        static_cast<double>(bmi_reporters_.size()));
    if (e <= static_cast<double>(cfg_.bmi_state_cap) &&
        e * action_space_.size() <= 8e6) {
      bmi_states_ = static_cast<std::uint64_t>(std::llround(e));
    }
  }

  // Multicast group index -> flow index.
  int group_flow(int g) const { return model_.num_unicast() + g; }

  SchedulerSnapshot make_snapshot(const ChannelDraw& draw, double z) const {
    SchedulerSnapshot snap;
    snap.z = z;
    snap.flows.reserve(flows_.size());
    for (const auto& f : flows_) {
      FlowView v;
      v.kind = f.kind;
      v.receiver = f.receiver;
      v.group = f.group;
      v.queue_bits = f.q.bits;
      switch (f.kind) {
        case FlowKind::kUnicast:
          v.message_bits = f.uni.message_bits;
          v.csi_bin = model_.bin_of(f.receiver, draw);
          break;
        case FlowKind::kMulticast:
          v.message_bits = f.multi.message_bits;
          v.code_index = f.multi.code_index;
          v.sum_lengths = static_cast<double>(f.multi.upsilon);
          break;
        case FlowKind::kRepair:
          v.eligible = f.rep.receiver >= 0 && f.rep.has_backlog();
          v.message_bits = v.eligible ? f.rep.current_residual() : 0.0;
          v.receiver = f.rep.receiver;
          v.csi_bin = v.eligible ? model_.bin_of(f.rep.receiver, draw) : 0;
          break;
      }
      snap.flows.push_back(v);
    }
    return snap;
  }

  struct Decision {
    ControlAction action;
    double fixed_rate = 0.0;
  };

  Decision decide(const SchedulerSnapshot& snap) const {
    Decision d;
    double imax_k = model_.i_max() * model_.symbols_per_slot();
    if (cfg_.policy == Policy::kFixedRate) {
      if (exact_csi_) {
        d = decide_fixed_exact(snap);
      } else {
        FixedRateDecision fr = fixed_rate_decide(snap, cfg_.power, table_,
                                                 group_rates_,
                                                 model_.symbols_per_slot());
        d.action = fr.action;
        d.fixed_rate = fr.code_rate;
      }
    } else {
      d.action = nc_rc_decide(snap, cfg_.power, table_, imax_k,
                              model_.symbols_per_slot(), cfg_.epsilon);
    }
    return d;
  }

  // Perfect-CSI fixed-rate: the code rate equals the realized MI, no outage.
  Decision decide_fixed_exact(const SchedulerSnapshot& snap) const {
    Decision d;
    std::vector<double> rates(snap.flows.size(), 0.0);
    for (size_t f = 0; f < snap.flows.size(); ++f) {
      const FlowView& fl = snap.flows[f];
      if (!fl.eligible) continue;
      double metric, power, rate;
      int pidx;
      if (fl.kind == FlowKind::kMulticast) {
        const GroupFixedRate& gr = group_rates_[fl.group];
        metric = fl.queue_bits * gr.goodput - snap.z * cfg_.power.p_av;
        power = cfg_.power.p_av;
        pidx = cfg_.power.index_of(power);
        rate = gr.rate;
      } else {
        metric = -std::numeric_limits<double>::infinity();
        power = cfg_.power.levels.front();
        pidx = 0;
        rate = 0.0;
        for (int p = 0; p < cfg_.power.size(); ++p) {
          double r = model_.mutual_information(cur_draw_->hhat[fl.receiver],
                                               cfg_.power.levels[p]) *
                     model_.symbols_per_slot();
          double m = fl.queue_bits * r - snap.z * cfg_.power.levels[p];
          if (p == 0 || m > metric + 1e-12) {
            metric = m;
            power = cfg_.power.levels[p];
            pidx = p;
            rate = r;
          }
        }
      }
      rates[f] = rate;
      if (d.action.flow < 0 || metric > d.action.metric + 1e-12) {
        d.action.flow = static_cast<int>(f);
        d.action.metric = metric;
        d.action.power = power;
        d.action.power_index = pidx;
      }
    }
    if (d.action.flow >= 0) d.fixed_rate = rates[d.action.flow];
    return d;
  }

  void activate_partition(int g);
  void serve_nc_rc(const ChannelDraw& draw, const ControlAction& a,
                   CsvSink& settle_csv);
  void serve_fixed_rate(const ChannelDraw& draw, const Decision& d);
  void apply_arrivals(Rng& arr_rng);
  void check_slot_invariants(const ChannelDraw& draw, const SchedulerSnapshot& snap,
                             const Decision& d, long long slot);

  const SimConfig& cfg_;
  ChannelModel model_;
  CsiTable table_;
  std::vector<GroupFixedRate> group_rates_;
  bool exact_csi_ = false;
  std::vector<EngineFlow> flows_;
  std::vector<std::vector<int>> tracked_;        // per group: tracked member ids
  std::vector<int> group_first_repair_;          // per group: first repair flow
  std::vector<long long> sessions_done_;         // per group
  std::vector<bool> repair_active_;              // per group
  ActionSpace action_space_;
  std::vector<int> bmi_reporters_;
  std::uint64_t bmi_states_ = 0;
  PowerQueue zq_;
  double theta_ = 0.0;  // cumulative virtual-queue departures
  const ChannelDraw* cur_draw_ = nullptr;
  std::vector<ArrivalProcess> arr_unicast_;
  std::vector<ArrivalProcess> arr_group_;
  // Per-slot service bookkeeping (flow index -> credited bits this slot).
  int served_flow_ = -1;
  double served_bits_ = 0.0;
  std::vector<std::pair<int, double>> extra_served_;  // settlement credits
};

void Engine::activate_partition(int g) {
  EngineFlow& gf = flows_[group_flow(g)];
  int J = model_.group_size(g);
  int l = cfg_.groups[g].covered_count < 0 ? J : cfg_.groups[g].covered_count;
  PartitionSpec part = estimate_partition(gf.multi.member_lengths,
                                          cfg_.groups[g].message_bits, l);
  tracked_[g] = part.covered;
  std::sort(tracked_[g].begin(), tracked_[g].end());
  // Fresh rate-tracking state for the covered-set sessions.
  gf.multi = MulticastReception(cfg_.groups[g].message_bits,
                                static_cast<int>(tracked_[g].size()));
  for (size_t s = 0; s < part.stragglers.size(); ++s) {
    EngineFlow& rf = flows_[group_first_repair_[g] + static_cast<int>(s)];
    rf.rep = RepairFlow();
    rf.rep.group = g;
    rf.rep.member = part.stragglers[s];
    rf.rep.receiver = model_.member_receiver(g, part.stragglers[s]);
    rf.receiver = rf.rep.receiver;
  }
  repair_active_[g] = true;
}

void Engine::serve_nc_rc(const ChannelDraw& draw, const ControlAction& a,
                         CsvSink& settle_csv) {
  EngineFlow& f = flows_[a.flow];
  const double K = model_.symbols_per_slot();
  switch (f.kind) {
    case FlowKind::kUnicast: {
      double mi = model_.mutual_information(draw.h[f.receiver], a.power) * K;
      double before = f.uni.accumulated_mi;
      bool acked = step_unicast(f.uni, true, mi);
      if (acked) {
        if (cfg_.check_invariants) {
          double total = before + mi;
          NCRC_CHECK_MSG(total >= f.uni.threshold() - 1e-9 &&
                             total < f.uni.threshold() + model_.i_max() * K + 1e-9,
                         "decode-slot MI conservation");
        }
        served_flow_ = a.flow;
        served_bits_ = f.uni.message_bits;
      }
      break;
    }
    case FlowKind::kMulticast: {
      int g = f.group;
      std::vector<double> mis(tracked_[g].size());
      for (size_t j = 0; j < tracked_[g].size(); ++j) {
        int rcv = model_.member_receiver(g, tracked_[g][j]);
        mis[j] = model_.mutual_information(draw.h[rcv], cfg_.power.p_av) * K;
      }
      bool acked = step_multicast(f.multi, true, mis);
      if (cfg_.policy == Policy::kNcRcCombined && repair_active_[g]) {
        for (int rf_i = group_first_repair_[g];
             rf_i < static_cast<int>(flows_.size()) &&
             flows_[rf_i].kind == FlowKind::kRepair && flows_[rf_i].group == g;
             ++rf_i) {
          EngineFlow& rf = flows_[rf_i];
          double mi = model_.mutual_information(draw.h[rf.rep.receiver],
                                                cfg_.power.p_av) * K;
          repair_listen(rf.rep, mi, cfg_.groups[g].message_bits);
        }
      }
      if (acked) {
        served_flow_ = a.flow;
        served_bits_ = f.multi.message_bits;
        sessions_done_[g] += 1;
        if (cfg_.policy == Policy::kNcRcCombined && repair_active_[g]) {
          for (int rf_i = group_first_repair_[g];
               rf_i < static_cast<int>(flows_.size()) &&
               flows_[rf_i].kind == FlowKind::kRepair && flows_[rf_i].group == g;
               ++rf_i) {
            EngineFlow& rf = flows_[rf_i];
            Settlement s = end_of_session_settlement(rf.rep,
                                                     cfg_.groups[g].message_bits);
            if (cfg_.check_invariants)
              NCRC_CHECK_MSG(std::abs(s.r_star + s.residual -
                                      cfg_.groups[g].message_bits) < 1e-9,
                             "straggler mass balance R* + M_v = M_g");
            if (s.r_star > 0.0) extra_served_.emplace_back(rf_i, s.r_star);
            if (settle_csv.on)
              settle_csv.out << f.group << ',' << (f.multi.code_index - 1) << ','
                             << rf.rep.member << ',' << s.r_star << ','
                             << s.residual << "\n";
          }
        }
        if (cfg_.policy == Policy::kNcRcCombined && !repair_active_[g] &&
            sessions_done_[g] >= cfg_.warmup_sessions) {
          activate_partition(g);
        }
      }
      break;
    }
    case FlowKind::kRepair: {
      double mi = model_.mutual_information(draw.h[f.rep.receiver], a.power) * K;
      double before = f.rep.accumulated_mi;
      auto decoded = step_repair_reception(f.rep, true, mi);
      if (decoded) {
        if (cfg_.check_invariants) {
          double total = before + mi;
          NCRC_CHECK_MSG(total >= *decoded - 1e-9 &&
                             total < *decoded + model_.i_max() * K + 1e-9,
                         "repair decode-slot MI conservation");
        }
        served_flow_ = a.flow;
        served_bits_ = *decoded;
      }
      break;
    }
  }
}

void Engine::serve_fixed_rate(const ChannelDraw& draw, const Decision& d) {
  EngineFlow& f = flows_[d.action.flow];
  const double K = model_.symbols_per_slot();
  double rate = d.fixed_rate;
  if (rate <= 0.0) return;
  if (f.kind == FlowKind::kMulticast) {
    // Application-layer rateless over fixed-rate chunks: each member keeps
    // the chunks whose realized MI covered the rate and decodes the message
    // once it has accumulated M_g bits of them; the queue is served when
    // every member is done.
    int g = f.group;
    std::vector<double> chunk(model_.group_size(g));
    for (int j = 0; j < model_.group_size(g); ++j) {
      int rcv = model_.member_receiver(g, j);
      double mi = model_.mutual_information(draw.h[rcv], cfg_.power.p_av) * K;
      chunk[j] = (mi >= rate - 1e-12) ? rate : 0.0;
    }
    if (step_multicast(f.multi, true, chunk)) {
      served_flow_ = d.action.flow;
      served_bits_ = f.multi.message_bits;
    }
  } else {
    double mi = model_.mutual_information(draw.h[f.receiver], d.action.power) * K;
    if (mi >= rate - 1e-12) {
      served_flow_ = d.action.flow;
      served_bits_ = rate;
    }
  }
}

void Engine::apply_arrivals(Rng& arr_rng) {
  const int U = model_.num_unicast();
  for (int u = 0; u < U; ++u) {
    double a = static_cast<double>(arr_unicast_[u].draw(arr_rng));
    step_data_queue(flows_[u].q, false, 0.0, a);
  }
  for (int g = 0; g < model_.num_groups(); ++g) {
    double a = static_cast<double>(arr_group_[g].draw(arr_rng));
    if (cfg_.policy == Policy::kUnicastOnly) {
      for (auto& f : flows_)
        if (f.kind == FlowKind::kUnicast && f.group == g)
          step_data_queue(f.q, false, 0.0, a);
    } else {
      step_data_queue(flows_[group_flow(g)].q, false, 0.0, a);
      if (cfg_.policy == Policy::kNcRcCombined && repair_active_[g]) {
        for (int rf_i = group_first_repair_[g];
             rf_i < static_cast<int>(flows_.size()) &&
             flows_[rf_i].kind == FlowKind::kRepair && flows_[rf_i].group == g;
             ++rf_i)
          step_data_queue(flows_[rf_i].q, false, 0.0, a);
      }
    }
  }
}

void Engine::check_slot_invariants(const ChannelDraw& draw,
                                   const SchedulerSnapshot& snap, const Decision& d,
                                   long long slot) {
  // Pre-decode bound R < M(1+eps) for unicast-style reception registers.
  for (const auto& f : flows_) {
    if (f.kind == FlowKind::kUnicast)
      NCRC_CHECK_MSG(f.uni.accumulated_mi < f.uni.threshold(),
                     "pre-decode bound R_u < M_u(1+eps)");
    if (f.kind == FlowKind::kRepair && f.rep.has_backlog())
      NCRC_CHECK_MSG(f.rep.accumulated_mi < f.rep.current_residual(),
                     "pre-decode bound for repair residual");
    // Queue identity Q = Q(0) + A - D.
    double expect = f.q.cum_arrivals - f.q.cum_departures;
    NCRC_CHECK_MSG(std::abs(f.q.bits - expect) <=
                       1e-6 * std::max(1.0, f.q.cum_arrivals),
                   "queue identity Q = A - D");
    NCRC_CHECK(f.q.bits >= 0.0);
  }
  // Virtual queue identity Z = W - Theta.
  NCRC_CHECK_MSG(std::abs(zq_.z - (zq_.cum_power - theta_)) <=
                     1e-9 * std::max(1.0, zq_.cum_power),
                 "virtual queue identity Z = W - Theta");
  // Causality n_s(t) <= t.
  for (const auto& f : flows_) {
    long long n = (f.kind == FlowKind::kUnicast)   ? f.uni.code_index
                  : (f.kind == FlowKind::kMulticast) ? f.multi.code_index
                                                     : f.rep.code_index;
    NCRC_CHECK_MSG(n - 1 <= slot + 1, "code index causality");
  }
  // Scale invariance of the decision: doubling (Q, Z) leaves it unchanged.
  // The factor 2 scales every metric exactly in floating point.
  SchedulerSnapshot scaled = snap;
  scaled.z *= 2.0;
  for (auto& fv : scaled.flows) fv.queue_bits *= 2.0;
  Decision d2 = decide(scaled);
  NCRC_CHECK_MSG(d2.action.flow == d.action.flow &&
                     d2.action.power_index == d.action.power_index,
                 "argmax scale invariance");
  (void)draw;
}

RunMetrics Engine::run() {
  const long long T = cfg_.horizon;
  const long long W = cfg_.effective_warmup();
  const int U = model_.num_unicast();
  const int G = model_.num_groups();
  const int NF = static_cast<int>(flows_.size());

  sessions_done_.assign(std::max(G, 1), 0);
  repair_active_.assign(std::max(G, 1), false);
  zq_.p_av = cfg_.power.p_av;

  Rng ch_rng(derive_seed(cfg_.seed, 0));
  Rng arr_rng(derive_seed(cfg_.seed, 1));
  for (int u = 0; u < U; ++u)
    arr_unicast_.emplace_back(cfg_.arrivals, cfg_.unicast[u].lambda);
  for (int g = 0; g < G; ++g)
    arr_group_.emplace_back(cfg_.arrivals, cfg_.groups[g].lambda);

  CsvSink queue_csv(cfg_.traces.queue_csv, "slot,flow,queue_bits,z");
  CsvSink decision_csv(cfg_.traces.decision_csv, "slot,action_index,flow,power,metric");
  CsvSink lengths_csv(cfg_.traces.lengths_csv, "flow,code_index,length,member");
  CsvSink settle_csv(cfg_.traces.settlement_csv, "group,session,member,r_star,residual");

  RunMetrics m;
  m.num_flows = NF;
  m.slots = T - W;
  m.avg_queue_bits.assign(NF, 0.0);
  m.throughput_bps.assign(NF, 0.0);
  if (bmi_states_ > 0) {
    m.b_mi.assign(action_space_.size(), std::vector<long long>(bmi_states_, 0));
    m.state_counts.assign(bmi_states_, 0);
  }

  std::vector<double> window_d0(NF, 0.0);
  double window_power = 0.0;
  std::vector<double> queue_trace;
  queue_trace.reserve(static_cast<size_t>(T - W));
  long long lyap_every = std::max<long long>(1, (T - W) / 1024);

  ChannelDraw prev;
  bool have_prev = false;
  std::vector<double> qsnap(NF);

  for (long long t = 0; t < T; ++t) {
    ChannelDraw draw = model_.sample_slot(ch_rng, have_prev ? &prev : nullptr);
    cur_draw_ = &draw;

    if (t == W)
      for (int f = 0; f < NF; ++f) window_d0[f] = flows_[f].q.cum_departures;

    double total_q = 0.0;
    for (int f = 0; f < NF; ++f) {
      qsnap[f] = flows_[f].q.bits;
      total_q += qsnap[f];
      if (t >= W) m.avg_queue_bits[f] += qsnap[f];
    }
    if (t >= W) queue_trace.push_back(total_q);

    SchedulerSnapshot snap = make_snapshot(draw, zq_.z);
    Decision d = decide(snap);

    served_flow_ = -1;
    served_bits_ = 0.0;
    extra_served_.clear();
    double power = 0.0;
    if (d.action.flow >= 0) {
      power = d.action.power;
      if (cfg_.policy == Policy::kFixedRate)
        serve_fixed_rate(draw, d);
      else
        serve_nc_rc(draw, d.action, settle_csv);
    }

    if (served_flow_ >= 0) {
      EngineFlow& f = flows_[served_flow_];
      if (f.q.bits < served_bits_ - 1e-12) f.truncated_service = true;
      f.acks += 1;
      f.credited_bits += served_bits_;
      step_data_queue(f.q, true, served_bits_, 0.0);
    }
    for (auto& [fi, bits] : extra_served_) {
      EngineFlow& f = flows_[fi];
      if (f.q.bits < bits - 1e-12) f.truncated_service = true;
      f.credited_bits += bits;
      step_data_queue(f.q, true, bits, 0.0);
    }

    apply_arrivals(arr_rng);

    theta_ += std::min(zq_.z, zq_.p_av);
    step_power_queue(zq_, power);
    if (t >= W) window_power += power;

    if (bmi_states_ > 0 && d.action.flow >= 0) {
      std::uint64_t st = model_.joint_state(draw, bmi_reporters_);
      int ai = action_space_.index_of(d.action.flow,
                                      std::max(d.action.power_index, 0));
      m.b_mi[ai][st] += 1;
      m.state_counts[st] += 1;
    }

    if (cfg_.check_invariants) check_slot_invariants(draw, snap, d, t);

    if (queue_csv.on) {
      for (int f = 0; f < NF; ++f)
        queue_csv.out << t << ',' << f << ',' << flows_[f].q.bits << ',' << zq_.z
                      << "\n";
    }
    if (decision_csv.on && d.action.flow >= 0) {
      int ai = action_space_.index_of(d.action.flow,
                                      std::max(d.action.power_index, 0));
      decision_csv.out << t << ',' << ai << ',' << d.action.flow << ','
                       << d.action.power << ',' << d.action.metric << "\n";
    }
    if (t >= W && (t - W) % lyap_every == 0) {
      for (int f = 0; f < NF; ++f) qsnap[f] = flows_[f].q.bits;
      m.lyapunov_trace.push_back(lyapunov_value(qsnap, zq_.z));
    }

    prev = std::move(draw);
    have_prev = true;
    cur_draw_ = nullptr;
  }

  const double window = static_cast<double>(T - W);
  for (int f = 0; f < NF; ++f) {
    m.avg_queue_bits[f] /= window;
    m.total_avg_queue_bits += m.avg_queue_bits[f];
    m.throughput_bps[f] = (flows_[f].q.cum_departures - window_d0[f]) / window;
    m.total_throughput_bps += m.throughput_bps[f];
  }
  m.avg_power_watts = window_power / window;
  m.full_avg_power_watts = zq_.cum_power / static_cast<double>(T);
  m.final_z = zq_.z;
  m.z_over_t = zq_.z / static_cast<double>(T);

  // Power identity (1/T) sum P <= P_av + Z(T)/T, a consequence of eq86.
  NCRC_CHECK_MSG(m.full_avg_power_watts <= cfg_.power.p_av + m.z_over_t + 1e-9,
                 "time-average power identity");

  m.stability_rate_ref = m.total_throughput_bps / std::max(NF, 1);
  if (queue_trace.size() >= 10000) {
    m.verdict = classify_stability(queue_trace, m.stability_rate_ref,
                                   &m.stability_slope);
  } else {
    m.verdict = Verdict::kInconclusive;
  }

  const double imax_k = model_.i_max() * model_.symbols_per_slot();
  for (int g = 0; g < G && cfg_.policy != Policy::kUnicastOnly; ++g) {
    const EngineFlow& f = flows_[group_flow(g)];
    auto mean = mean_code_length(f.multi.length_history);
    m.group_mean_code_length.push_back(mean.value_or(0.0));
    m.group_tracked_rate.push_back(
        f.multi.code_index > 1
            ? static_cast<double>(f.multi.code_index) * f.multi.message_bits /
                  static_cast<double>(f.multi.upsilon)
            : imax_k);
  }
  for (const auto& f : flows_) {
    if (f.kind != FlowKind::kRepair) continue;
    m.repair_eta.push_back(
        eta_estimate(f.rep, cfg_.groups[f.group].message_bits).value_or(0.0));
  }

  // B_mi consistency: sum over actions equals the per-state slot counts.
  if (bmi_states_ > 0 && cfg_.check_invariants) {
    for (std::uint64_t i = 0; i < bmi_states_; ++i) {
      long long s = 0;
      for (const auto& row : m.b_mi) s += row[i];
      NCRC_CHECK_MSG(s == m.state_counts[i], "B_mi state-count identity");
    }
  }
  // Throughput accounting: without empty-queue truncation, delivered bits
  // equal the credited service quanta exactly.
  if (cfg_.check_invariants) {
    for (const auto& f : flows_) {
      if (!f.truncated_service)
        NCRC_CHECK_MSG(std::abs(f.q.cum_departures - f.credited_bits) <=
                           1e-6 * std::max(1.0, f.credited_bits),
                       "delivered bits equal credited service");
    }
  }

  if (lengths_csv.on) {
    for (int fi = 0; fi < NF; ++fi) {
      const EngineFlow& f = flows_[fi];
      if (f.kind == FlowKind::kUnicast) {
        for (size_t n = 0; n < f.uni.length_history.size(); ++n)
          lengths_csv.out << fi << ',' << (n + 1) << ',' << f.uni.length_history[n]
                          << ",-1\n";
      } else if (f.kind == FlowKind::kMulticast) {
        for (size_t n = 0; n < f.multi.length_history.size(); ++n)
          lengths_csv.out << fi << ',' << (n + 1) << ','
                          << f.multi.length_history[n] << ",-1\n";
        for (size_t j = 0; j < f.multi.member_lengths.size(); ++j)
          for (size_t n = 0; n < f.multi.member_lengths[j].size(); ++n)
            lengths_csv.out << fi << ',' << (n + 1) << ','
                            << f.multi.member_lengths[j][n] << ',' << j << "\n";
      } else {
        for (size_t n = 0; n < f.rep.length_history.size(); ++n)
          lengths_csv.out << fi << ',' << (n + 1) << ',' << f.rep.length_history[n]
                          << ",-1\n";
      }
    }
  }
  return m;
}

}  // namespace

RunMetrics run(const SimConfig& cfg) {
  cfg.validate();
  Engine engine(cfg);
  return engine.run();
}

BoundaryBracket empirical_boundary_search(const SimConfig& base,
                                          const BoundarySearchOptions& opts) {
  BoundaryBracket br;
  double total_dir = 0.0;
  for (const auto& u : base.unicast) total_dir += u.lambda;
  for (const auto& g : base.groups) total_dir += g.lambda;
  if (total_dir <= 0.0) throw std::invalid_argument("boundary search needs a direction");

  auto verdict_at = [&](double t) {
    SimConfig c = base.scaled_arrivals(t);
    c.horizon = opts.slots;
    c.warmup = opts.warmup;
    c.seed = opts.seed;
    c.traces = TraceOptions{};
    ++br.runs;
    return run(c).verdict;
  };

  // The server can deliver at most i_max*K bits per slot, so the total
  // arrival rate at the boundary cannot exceed that.
  double imax_k = base.channel.i_max * base.channel.symbols_per_slot;
  double hi = opts.t_hi_init > 0.0 ? opts.t_hi_init : 1.25 * imax_k / total_dir;
  double lo = 0.0;
  int guard = 0;
  while (br.runs < opts.max_runs && verdict_at(hi) == Verdict::kStable) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 8) break;
  }
  while (br.runs < opts.max_runs && hi - lo > opts.rel_width * hi) {
    double mid = 0.5 * (lo + hi);
    if (verdict_at(mid) == Verdict::kStable)
      lo = mid;
    else
      hi = mid;
  }
  br.lo = lo;
  br.hi = hi;
  br.converged = hi - lo <= opts.rel_width * hi;
  return br;
}

}  // namespace ncrc
