#include "ncrc/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include "ncrc/common.hpp"

namespace ncrc {

void PowerSet::validate() const {
  if (levels.empty()) throw std::invalid_argument("empty power set");
  for (size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 0.0) throw std::invalid_argument("negative power level");
    if (i > 0 && levels[i] <= levels[i - 1])
      throw std::invalid_argument("power levels must be ascending and distinct");
  }
  if (index_of(p_av) < 0)
    throw std::invalid_argument("p_av must be one of the power levels");
}

int PowerSet::index_of(double p) const {
  for (size_t i = 0; i < levels.size(); ++i)
    if (std::abs(levels[i] - p) < 1e-12) return static_cast<int>(i);
  return -1;
}

ActionSpace ActionSpace::build(const std::vector<FlowKind>& kinds, const PowerSet& ps) {
  ActionSpace sp;
  for (size_t f = 0; f < kinds.size(); ++f) {
    sp.first_of_flow.push_back(sp.size());
    if (kinds[f] == FlowKind::kMulticast) {
      sp.entries.push_back({static_cast<int>(f), -1});
    } else {
      for (int p = 0; p < ps.size(); ++p)
        sp.entries.push_back({static_cast<int>(f), p});
    }
  }
  return sp;
}

int ActionSpace::index_of(int flow, int power_index) const {
  int base = first_of_flow[flow];
  if (entries[base].power_index < 0) return base;
  return base + power_index;
}

double rate_loss_factor(double message_bits, double i_max_k, double epsilon) {
  NCRC_CHECK(message_bits > 0.0 && i_max_k > 0.0 && epsilon >= 0.0);
  return message_bits / (message_bits * (1.0 + epsilon) + i_max_k);
}

UnicastMetric unicast_metric(double queue_bits, double z, double message_bits,
                             const CsiTable& table, int receiver, int csi_bin,
                             double i_max_k, double symbols_per_slot,
                             double epsilon) {
  double f = rate_loss_factor(message_bits, i_max_k, epsilon);
  UnicastMetric best;
  bool first = true;
  for (size_t p = 0; p < table.power_levels.size(); ++p) {
    double rate = table.mi(receiver, static_cast<int>(p), csi_bin) *
                  symbols_per_slot * f;
    double metric = queue_bits * rate - z * table.power_levels[p];
    // Strict > keeps the lowest power level on ties.
    if (first || metric > best.metric + 1e-12) {
      best.metric = metric;
      best.best_power = table.power_levels[p];
      best.best_power_index = static_cast<int>(p);
      best.rate = rate;
      first = false;
    }
  }
  return best;
}

MulticastMetric multicast_metric(double queue_bits, double z, long long code_index,
                                 double sum_lengths, double message_bits,
                                 double i_max_k, double p_av) {
  MulticastMetric m;
  if (code_index > 1) {
    NCRC_CHECK(sum_lengths > 0.0);
    m.rate = static_cast<double>(code_index) * message_bits / sum_lengths;
  } else {
    m.rate = i_max_k;
  }
  m.metric = queue_bits * m.rate - z * p_av;
  return m;
}

ControlAction nc_rc_decide(const SchedulerSnapshot& snap, const PowerSet& ps,
                           const CsiTable& table, double i_max_k,
                           double symbols_per_slot, double epsilon) {
  ControlAction best;
  for (size_t f = 0; f < snap.flows.size(); ++f) {
    const FlowView& fl = snap.flows[f];
    if (!fl.eligible) continue;
    double metric;
    double power;
    int pidx;
    if (fl.kind == FlowKind::kMulticast) {
      MulticastMetric m = multicast_metric(fl.queue_bits, snap.z, fl.code_index,
                                           fl.sum_lengths, fl.message_bits,
                                           i_max_k, ps.p_av);
      metric = m.metric;
      power = ps.p_av;
      pidx = ps.index_of(ps.p_av);
    } else {
      UnicastMetric m = unicast_metric(fl.queue_bits, snap.z, fl.message_bits,
                                       table, fl.receiver, fl.csi_bin, i_max_k,
                                       symbols_per_slot, epsilon);
      metric = m.metric;
      power = m.best_power;
      pidx = m.best_power_index;
    }
    // Strict > keeps the lowest flow index on ties.
    if (best.flow < 0 || metric > best.metric + 1e-12) {
      best.flow = static_cast<int>(f);
      best.metric = metric;
      best.power = power;
      best.power_index = pidx;
    }
  }
  return best;
}

FixedRateDecision fixed_rate_decide(const SchedulerSnapshot& snap, const PowerSet& ps,
                                    const CsiTable& table,
                                    const std::vector<GroupFixedRate>& group_rates,
                                    double /*symbols_per_slot*/) {
  FixedRateDecision out;
  ControlAction& best = out.action;
  std::vector<double> rate_of_flow(snap.flows.size(), 0.0);
  for (size_t f = 0; f < snap.flows.size(); ++f) {
    const FlowView& fl = snap.flows[f];
    if (!fl.eligible) continue;
    double metric, power, rate;
    int pidx;
    if (fl.kind == FlowKind::kMulticast) {
      const GroupFixedRate& gr = group_rates[fl.group];
      metric = fl.queue_bits * gr.goodput - snap.z * ps.p_av;
      power = ps.p_av;
      pidx = ps.index_of(ps.p_av);
      rate = gr.rate;
    } else {
      metric = -std::numeric_limits<double>::infinity();
      power = ps.levels.front();
      pidx = 0;
      rate = 0.0;
      for (int p = 0; p < ps.size(); ++p) {
        double g = table.best_goodput[fl.receiver][p][fl.csi_bin];
        double m = fl.queue_bits * g - snap.z * ps.levels[p];
        if (p == 0 || m > metric + 1e-12) {
          metric = m;
          power = ps.levels[p];
          pidx = p;
          rate = table.best_rate[fl.receiver][p][fl.csi_bin];
        }
      }
    }
    rate_of_flow[f] = rate;
    if (best.flow < 0 || metric > best.metric + 1e-12) {
      best.flow = static_cast<int>(f);
      best.metric = metric;
      best.power = power;
      best.power_index = pidx;
    }
  }
  if (best.flow >= 0) out.code_rate = rate_of_flow[best.flow];
  return out;
}

double perfect_csi_fixed_rate(const ChannelModel& model, cplx hhat, double power) {
  return model.mutual_information(hhat, power) * model.symbols_per_slot();
}

}  // namespace ncrc
