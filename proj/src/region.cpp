#include "ncrc/region.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ncrc/common.hpp"
#include "ncrc/simplex.hpp"

namespace ncrc {

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

void MiPmf::validate() const {
  if (values.empty() || values.size() != probs.size())
    throw std::invalid_argument("MiPmf: values/probs mismatch");
  double s = 0.0;
  bool positive = false;
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0 || probs[i] < 0.0)
      throw std::invalid_argument("MiPmf: negative entry");
    if (values[i] > 0.0 && probs[i] > 0.0) positive = true;
    s += probs[i];
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("MiPmf: probs must sum to 1");
  if (!positive) throw std::invalid_argument("MiPmf: needs positive-MI mass");
}

double MiPmf::mean() const {
  double m = 0.0;
  for (size_t i = 0; i < values.size(); ++i) m += values[i] * probs[i];
  return m;
}

double MiPmf::sample(Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  double acc = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    acc += probs[i];
    if (x < acc) return values[i];
  }
  return values.back();
}

namespace {

// Greatest common lattice step of the positive MI values (tolerant float gcd).
double lattice_step(const MiPmf& pmf) {
  double g = 0.0;
  for (double v : pmf.values) {
    if (v <= 0.0) continue;
    if (g == 0.0) {
      g = v;
      continue;
    }
    double a = std::max(g, v), b = std::min(g, v);
    for (int it = 0; it < 200 && b > 1e-9 * a; ++it) {
      double r = std::fmod(a, b);
      if (r < 1e-9 * b || b - r < 1e-9 * b) r = 0.0;
      a = b;
      b = r;
    }
    g = a;
  }
  NCRC_CHECK(g > 0.0);
  return g;
}

}  // namespace

std::vector<double> absorption_cdf(const MiPmf& pmf, double message_bits,
                                   double tail_tol) {
  pmf.validate();
  NCRC_CHECK(message_bits > 0.0);
  double step = lattice_step(pmf);
  long long units = static_cast<long long>(std::ceil(message_bits / step - 1e-9));
  NCRC_CHECK_MSG(units <= 1000000, "lattice state space too large");
  std::vector<long long> uvals(pmf.values.size());
  for (size_t i = 0; i < pmf.values.size(); ++i)
    uvals[i] = static_cast<long long>(std::llround(pmf.values[i] / step));

  // dist over transient states 0..units-1; `done` accumulates absorbed mass.
  std::vector<double> dist(units, 0.0), next(units, 0.0);
  dist[0] = 1.0;
  double done = 0.0;
  std::vector<double> cdf;
  cdf.push_back(0.0);  // F(0): cannot absorb before the first slot
  const long long max_t = 100000000;
  for (long long t = 1; t <= max_t; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    double absorbed = 0.0;
    for (long long s = 0; s < units; ++s) {
      double p = dist[s];
      if (p == 0.0) continue;
      for (size_t k = 0; k < uvals.size(); ++k) {
        long long ns = s + uvals[k];
        double mass = p * pmf.probs[k];
        if (ns >= units)
          absorbed += mass;
        else
          next[ns] += mass;
      }
    }
    done += absorbed;
    dist.swap(next);
    cdf.push_back(done);
    if (1.0 - done < tail_tol) return cdf;
  }
  NCRC_CHECK_MSG(false, "absorption_cdf: horizon exhausted");
  return cdf;
}

double lbar_oracle_exact(const std::vector<MiPmf>& members, double message_bits) {
  NCRC_CHECK(!members.empty());
  std::vector<std::vector<double>> cdfs;
  size_t longest = 0;
  for (const MiPmf& m : members) {
    cdfs.push_back(absorption_cdf(m, message_bits));
    longest = std::max(longest, cdfs.back().size());
  }
  // E[max T_j] = sum_{t>=0} (1 - prod_j F_j(t)).
  double mean = 0.0;
  for (size_t t = 0;; ++t) {
    double prod = 1.0;
    for (const auto& c : cdfs) prod *= (t < c.size()) ? c[t] : 1.0;
    double surv = 1.0 - prod;
    mean += surv;
    if (t >= longest && surv < 1e-13) break;
    NCRC_CHECK(t < 200000000);
  }
  return mean;
}

double eta_oracle_exact(const MiPmf& straggler, const std::vector<MiPmf>& covered,
                        double message_bits) {
  NCRC_CHECK(!covered.empty());
  straggler.validate();
  std::vector<std::vector<double>> cdfs;
  size_t longest = 0;
  for (const MiPmf& m : covered) {
    cdfs.push_back(absorption_cdf(m, message_bits));
    longest = std::max(longest, cdfs.back().size());
  }
  double step = lattice_step(straggler);
  long long units = static_cast<long long>(std::ceil(message_bits / step - 1e-9));
  std::vector<long long> uvals(straggler.values.size());
  for (size_t i = 0; i < straggler.values.size(); ++i)
    uvals[i] = static_cast<long long>(std::llround(straggler.values[i] / step));

  // Straggler sum capped at `units` (absorbing "reached M" state).
  std::vector<double> dist(units + 1, 0.0), next(units + 1, 0.0);
  dist[0] = 1.0;
  auto expect_min = [&]() {
    double e = 0.0;
    for (long long s = 0; s < units; ++s)
      e += dist[s] * std::min(static_cast<double>(s) * step, message_bits);
    e += dist[units] * message_bits;
    return e;
  };

  double eta_acc = 0.0;
  double prev_fc = 0.0;
  for (size_t t = 1;; ++t) {
    // Advance the straggler chain to time t.
    std::fill(next.begin(), next.end(), 0.0);
    for (long long s = 0; s <= units; ++s) {
      double p = dist[s];
      if (p == 0.0) continue;
      if (s == units) {
        next[units] += p;
        continue;
      }
      for (size_t k = 0; k < uvals.size(); ++k) {
        long long ns = std::min(s + uvals[k], units);
        next[ns] += p * straggler.probs[k];
      }
    }
    dist.swap(next);
    double fc = 1.0;
    for (const auto& c : cdfs) fc *= (t < c.size()) ? c[t] : 1.0;
    double pt = fc - prev_fc;  // Pr{ T_c = t }
    prev_fc = fc;
    if (pt > 0.0) eta_acc += pt * expect_min();
    if (t >= longest && 1.0 - fc < 1e-13) {
      // Remaining tail: straggler has had ample time, bound by M.
      eta_acc += (1.0 - fc) * message_bits;
      break;
    }
    NCRC_CHECK(t < 200000000);
  }
  return eta_acc / message_bits;
}

GroupSessionStats group_session_mc(const ChannelModel& model, int group,
                                   double message_bits,
                                   const std::vector<int>& covered,
                                   const std::vector<int>& stragglers, double p_av,
                                   int num_sessions, Rng& rng) {
  NCRC_CHECK(!covered.empty() && num_sessions > 0 && message_bits > 0.0);
  const int J = model.group_size(group);
  const double K = model.symbols_per_slot();
  const auto& cfg = model.config();
  GroupSessionStats out;
  out.eta.assign(stragglers.size(), 0.0);
  out.member_lbar.assign(J, 0.0);
  double sum_l = 0.0, sum_l2 = 0.0;
  std::vector<double> eta_sum(stragglers.size(), 0.0);
  std::vector<double> solo_sum(J, 0.0);

  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::discrete_distribution<int> lev(cfg.gain_probs.begin(), cfg.gain_probs.end());
  auto draw_gain2 = [&](int receiver) {
    if (cfg.mode == ChannelMode::kDiscrete) return cfg.gain_levels[lev(rng)];
    // Rayleigh |h|^2 is exponential with mean = variance.
    double u = uni(rng);
    return -model.variance(receiver) * std::log1p(-u);
  };

  std::vector<double> acc(J);
  std::vector<double> acc_at_session_end(J);
  std::vector<long long> absorb(J);
  for (int n = 0; n < num_sessions; ++n) {
    std::fill(acc.begin(), acc.end(), 0.0);
    std::fill(absorb.begin(), absorb.end(), 0);
    long long t = 0;
    long long covered_done_at = 0;
    // Run until every member has absorbed (solo stats need the slow ones);
    // the covered set's completion defines the session length.
    int undone = J;
    while (undone > 0) {
      ++t;
      NCRC_CHECK(t < 100000000);
      for (int j = 0; j < J; ++j) {
        if (absorb[j] != 0) continue;
        double g2 = draw_gain2(model.member_receiver(group, j));
        acc[j] += mutual_information_gain2(g2, p_av, model.i_max()) * K;
        if (acc[j] >= message_bits) {
          absorb[j] = t;
          --undone;
        }
      }
      if (covered_done_at == 0) {
        bool all = true;
        for (int j : covered)
          if (absorb[j] == 0) all = false;
        if (all) {
          covered_done_at = t;
          acc_at_session_end = acc;
        }
      }
    }
    double L = static_cast<double>(covered_done_at);
    sum_l += L;
    sum_l2 += L * L;
    for (int j = 0; j < J; ++j) solo_sum[j] += static_cast<double>(absorb[j]);
    for (size_t s = 0; s < stragglers.size(); ++s) {
      int j = stragglers[s];
      eta_sum[s] += std::min(acc_at_session_end[j], message_bits);
    }
  }
  out.lbar = sum_l / num_sessions;
  out.lbar_stderr =
      std::sqrt(std::max(0.0, sum_l2 / num_sessions - out.lbar * out.lbar) /
                num_sessions);
  for (int j = 0; j < J; ++j) out.member_lbar[j] = solo_sum[j] / num_sessions;
  for (size_t s = 0; s < stragglers.size(); ++s)
    out.eta[s] = eta_sum[s] / (num_sessions * message_bits);
  return out;
}

// ---------------------------------------------------------------------------
// Region LP
// ---------------------------------------------------------------------------

RegionProblem build_region(const RegionSpec& spec) {
  NCRC_CHECK(spec.model != nullptr && spec.table != nullptr);
  const ChannelModel& model = *spec.model;
  spec.power.validate();
  const int U = model.num_unicast();
  const int G = model.num_groups();
  const double K = model.symbols_per_slot();
  const double imax_k = model.i_max() * K;
  NCRC_CHECK(static_cast<int>(spec.unicast_message_bits.size()) == U);
  NCRC_CHECK(static_cast<int>(spec.group_message_bits.size()) == G);
  NCRC_CHECK(static_cast<int>(spec.lbar.size()) == G);
  NCRC_CHECK(static_cast<int>(spec.direction_unicast.size()) == U);
  NCRC_CHECK(static_cast<int>(spec.direction_group.size()) == G);
  if (spec.genie && spec.combined)
    throw std::invalid_argument("genie bound is defined for the plain region");

  // Reporters: unicast users, then (combined) stragglers group-major.
  std::vector<int> reporters(U);
  std::iota(reporters.begin(), reporters.end(), 0);
  std::vector<FlowKind> kinds(U, FlowKind::kUnicast);
  kinds.insert(kinds.end(), G, FlowKind::kMulticast);
  struct RepairId {
    int group;
    int member;
    int receiver;
  };
  std::vector<RepairId> repair;
  if (spec.combined) {
    NCRC_CHECK(static_cast<int>(spec.stragglers.size()) == G);
    NCRC_CHECK(static_cast<int>(spec.eta.size()) == G);
    for (int g = 0; g < G; ++g) {
      NCRC_CHECK(spec.eta[g].size() == spec.stragglers[g].size());
      for (int j : spec.stragglers[g]) {
        int r = model.member_receiver(g, j);
        repair.push_back({g, j, r});
        reporters.push_back(r);
        kinds.push_back(FlowKind::kRepair);
      }
    }
  }

  const int B = model.bin_count();
  double e_approx = std::pow(static_cast<double>(B),
                             static_cast<double>(reporters.size()));
  if (e_approx > static_cast<double>(spec.state_cap))
    throw std::runtime_error(
        "region: CSI state space exceeds the exact-LP cap (" +
        std::to_string(spec.state_cap) +
        "); use the empirical boundary search instead");
  const std::uint64_t E = static_cast<std::uint64_t>(std::llround(e_approx));

  RegionProblem p;
  p.actions = ActionSpace::build(kinds, spec.power);
  p.num_actions = p.actions.size();
  p.num_states = E;
  p.p_av = spec.power.p_av;
  p.action_power.resize(p.num_actions);
  for (int m = 0; m < p.num_actions; ++m) {
    const auto& e = p.actions.entries[m];
    p.action_power[m] =
        (e.power_index < 0) ? spec.power.p_av : spec.power.levels[e.power_index];
  }

  p.pi.resize(E);
  std::vector<std::vector<int>> state_bins(E, std::vector<int>(reporters.size()));
  for (std::uint64_t i = 0; i < E; ++i) {
    std::uint64_t rest = i;
    double prob = 1.0;
    for (size_t r = 0; r < reporters.size(); ++r) {
      int b = static_cast<int>(rest % B);
      rest /= B;
      state_bins[i][r] = b;
      prob *= model.bin_prob(reporters[r], b);
    }
    p.pi[i] = prob;
  }

  auto zero_row = [&]() { return std::vector<double>(p.num_actions * E, 0.0); };

  // Unicast rows.
  for (int u = 0; u < U; ++u) {
    auto row = zero_row();
    double f = spec.genie ? 1.0
                          : rate_loss_factor(spec.unicast_message_bits[u], imax_k,
                                             spec.epsilon);
    for (int pidx = 0; pidx < spec.power.size(); ++pidx) {
      int m = p.actions.index_of(u, pidx);
      for (std::uint64_t i = 0; i < E; ++i) {
        int b = state_bins[i][u];
        row[m * E + i] = spec.table->mi(u, pidx, b) * K * f;
      }
    }
    p.rate.push_back(std::move(row));
    p.row_names.push_back("unicast_" + std::to_string(u));
    p.row_direction.push_back(spec.direction_unicast[u]);
  }

  // Multicast rows.
  for (int g = 0; g < G; ++g) {
    auto row = zero_row();
    double rate;
    if (spec.genie) {
      rate = 1e300;
      for (int j = 0; j < model.group_size(g); ++j)
        rate = std::min(rate, model.unconditional_mean_mi(
                                  model.member_receiver(g, j), spec.power.p_av) *
                                  K);
    } else {
      NCRC_CHECK(spec.lbar[g] > 0.0);
      rate = spec.group_message_bits[g] / spec.lbar[g];
    }
    int m = p.actions.index_of(U + g, 0);
    for (std::uint64_t i = 0; i < E; ++i) row[m * E + i] = rate;
    p.rate.push_back(std::move(row));
    p.row_names.push_back("multicast_" + std::to_string(g));
    p.row_direction.push_back(spec.direction_group[g]);
  }

  // Straggler rows (combined delivery): the group arrival rate must also be
  // sustainable per straggler via repair service plus the eta share of the
  // multicast sessions.
  if (spec.combined) {
    int flow = U + G;
    int rep_idx = 0;
    for (int g = 0; g < G; ++g) {
      for (size_t sj = 0; sj < spec.stragglers[g].size(); ++sj, ++flow, ++rep_idx) {
        auto row = zero_row();
        double eta = spec.eta[g][sj];
        NCRC_CHECK(eta >= 0.0 && eta <= 1.0);
        double resid = (1.0 - eta) * spec.group_message_bits[g];
        double f = resid > 0.0 ? rate_loss_factor(resid, imax_k, spec.epsilon) : 0.0;
        int rcv = repair[rep_idx].receiver;
        size_t reporter_pos = U + rep_idx;
        for (int pidx = 0; pidx < spec.power.size(); ++pidx) {
          int m = p.actions.index_of(flow, pidx);
          for (std::uint64_t i = 0; i < E; ++i) {
            int b = state_bins[i][reporter_pos];
            row[m * E + i] = spec.table->mi(rcv, pidx, b) * K * f;
          }
        }
        double eta_rate = eta * spec.group_message_bits[g] / spec.lbar[g];
        int mg = p.actions.index_of(U + g, 0);
        for (std::uint64_t i = 0; i < E; ++i) row[mg * E + i] += eta_rate;
        p.rate.push_back(std::move(row));
        p.row_names.push_back("straggler_" + std::to_string(g) + "_" +
                              std::to_string(spec.stragglers[g][sj]));
        p.row_direction.push_back(spec.direction_group[g]);
      }
    }
  }
  return p;
}

RegionSolution solve_boundary(const RegionProblem& problem) {
  const int F = problem.num_actions;
  const std::uint64_t E = problem.num_states;
  const std::uint64_t nvar = 1 + static_cast<std::uint64_t>(F) * E;
  RegionSolution sol;

  double dir_mass = 0.0;
  for (double d : problem.row_direction) dir_mass += d;
  if (dir_mass <= 0.0) throw std::invalid_argument("region direction is zero");

  double min_power = *std::min_element(problem.action_power.begin(),
                                       problem.action_power.end());
  if (min_power > problem.p_av + 1e-12) {
    sol.lambda_star = 0.0;
    sol.warning_zero_power = true;
    return sol;
  }

  SimplexSolver lp;
  std::vector<double> c(nvar, 0.0);
  c[0] = 1.0;  // maximize t
  lp.set_objective(c);

  auto var = [&](int m, std::uint64_t i) {
    return 1 + static_cast<std::uint64_t>(m) * E + i;
  };

  // Flow rows: t * dir_r - sum rate * pi * alpha <= 0.
  for (size_t r = 0; r < problem.rate.size(); ++r) {
    std::vector<double> row(nvar, 0.0);
    row[0] = problem.row_direction[r];
    for (int m = 0; m < F; ++m)
      for (std::uint64_t i = 0; i < E; ++i)
        row[var(m, i)] = -problem.rate[r][m * E + i] * problem.pi[i];
    lp.add_le(std::move(row), 0.0);
  }
  // Power row.
  {
    std::vector<double> row(nvar, 0.0);
    for (int m = 0; m < F; ++m)
      for (std::uint64_t i = 0; i < E; ++i)
        row[var(m, i)] = problem.action_power[m] * problem.pi[i];
    lp.add_le(std::move(row), problem.p_av);
  }
  // Per-state simplex constraints.
  for (std::uint64_t i = 0; i < E; ++i) {
    std::vector<double> row(nvar, 0.0);
    for (int m = 0; m < F; ++m) row[var(m, i)] = 1.0;
    lp.add_eq(std::move(row), 1.0);
  }

  LpResult res = lp.solve();
  NCRC_CHECK_MSG(res.optimal, "region LP failed to solve");
  sol.lambda_star = res.objective;
  sol.alpha.assign(F, std::vector<double>(E, 0.0));
  for (int m = 0; m < F; ++m)
    for (std::uint64_t i = 0; i < E; ++i) sol.alpha[m][i] = res.x[var(m, i)];
  for (int r : res.binding_le_rows) {
    if (r < static_cast<int>(problem.row_names.size()))
      sol.binding.push_back(problem.row_names[r]);
    else
      sol.binding.push_back("power");
  }
  return sol;
}

std::string region_report_json(const RegionSpec& spec, const RegionProblem& problem,
                               const RegionSolution& sol) {
  std::ostringstream os;
  os.precision(12);
  os << "{\n  \"lambda_star\": " << sol.lambda_star << ",\n  \"direction\": [";
  bool first = true;
  for (double d : spec.direction_unicast) {
    os << (first ? "" : ", ") << d;
    first = false;
  }
  for (double d : spec.direction_group) os << ", " << d;
  os << "],\n  \"num_actions\": " << problem.num_actions
     << ",\n  \"num_states\": " << problem.num_states << ",\n  \"binding\": [";
  for (size_t i = 0; i < sol.binding.size(); ++i)
    os << (i ? ", " : "") << '"' << sol.binding[i] << '"';
  os << "],\n  \"alpha_flow_share\": [";
  // Per-flow total time share sum_i alpha_mi pi_i over the flow's actions.
  for (size_t f = 0; f < problem.actions.first_of_flow.size(); ++f) {
    double share = 0.0;
    for (int m = 0; m < problem.num_actions; ++m) {
      if (problem.actions.entries[m].flow != static_cast<int>(f)) continue;
      for (std::uint64_t i = 0; i < problem.num_states; ++i)
        share += sol.alpha[m][i] * problem.pi[i];
    }
    os << (f ? ", " : "") << share;
  }
  os << "],\n  \"warning_zero_power\": " << (sol.warning_zero_power ? "true" : "false")
     << "\n}\n";
  return os.str();
}

}  // namespace ncrc
