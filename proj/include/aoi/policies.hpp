#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/model.hpp"
#include "aoi/planner.hpp"
#include "aoi/rng.hpp"
#include "aoi/state_space.hpp"

namespace aoi {

/// Unified decision interface. Deterministic policies consume no randomness;
/// randomized ones consume exactly one uniform draw per decision, which keeps
/// traces reproducible.
class DecisionPolicy {
 public:
  virtual ~DecisionPolicy() = default;
  virtual Action decide(const SystemState& s, RngStream& rng) const = 0;
};

/// Baseline: sense-and-send whenever the battery covers sensing plus
/// transmission, retransmit when it covers transmission only, idle otherwise.
/// With nothing to retransmit (r=0) the retransmit branch degrades to idle.
inline Action greedy_action(const SystemState& s, const EnvConfig& cfg) {
  if (s.b < cfg.e_tx) return Action::Idle;
  if (s.b >= cfg.e_tx + cfg.e_s) return Action::NewUpdate;
  return s.r >= 1 ? Action::Retransmit : Action::Idle;
}

class GreedyPolicy : public DecisionPolicy {
 public:
  explicit GreedyPolicy(EnvConfig cfg) : cfg_(std::move(cfg)) {}
  Action decide(const SystemState& s, RngStream&) const override { return greedy_action(s, cfg_); }

 private:
  EnvConfig cfg_;
};

class TabularPolicyView : public DecisionPolicy {
 public:
  TabularPolicyView(const StateSpace& space, TabularPolicy policy)
      : space_(&space), policy_(std::move(policy)) {}
  Action decide(const SystemState& s, RngStream&) const override { return policy_.at(space_->index_of(s)); }

 private:
  const StateSpace* space_;
  TabularPolicy policy_;
};

enum class ThresholdVariant { Single, Double };

/// Integer AoI thresholds indexed by (e, b, delta_tx, r). The value
/// delta_max+1 means "never transmit"; cells whose battery cannot pay for the
/// triggered transmit action are pinned there. The double variant keeps
/// T_n <= T_x elementwise.
class ThresholdTable {
 public:
  ThresholdTable(EnvConfig cfg, ThresholdVariant variant, int initial_value)
      : cfg_(std::move(cfg)), variant_(variant), grid_(cfg_) {
    const auto n = static_cast<std::size_t>(grid_.size());
    t_n_.assign(n, initial_value);
    t_x_.assign(n, initial_value);
    for (std::int64_t i = 0; i < grid_.size(); ++i) {
      const auto c = grid_.cell_at(i);
      if (threshold_cell_pinned(c.b, c.r, cfg_)) {
        t_n_[static_cast<std::size_t>(i)] = cfg_.delta_max + 1;
        t_x_[static_cast<std::size_t>(i)] = cfg_.delta_max + 1;
      }
    }
  }

  const EnvConfig& config() const { return cfg_; }
  ThresholdVariant variant() const { return variant_; }
  const CellGrid& grid() const { return grid_; }

  int threshold_n(const SystemState& s) const { return t_n_[cell(s)]; }
  int threshold_x(const SystemState& s) const { return t_x_[cell(s)]; }

  void set(int e, int b, int delta_tx, int r, int tn, int tx) {
    const auto i = static_cast<std::size_t>(grid_.index(e, b, delta_tx, r));
    if (tn > tx) throw std::invalid_argument("threshold pair must satisfy T_n <= T_x");
    t_n_[i] = tn;
    t_x_[i] = tx;
  }

  bool pinned(int e, int b, int delta_tx, int r) const {
    (void)e;
    (void)delta_tx;
    return threshold_cell_pinned(b, r, cfg_);
  }

  std::string to_csv() const {
    std::ostringstream out;
    out << "e,b,delta_tx,r,T_n,T_x\n";
    for (std::int64_t i = 0; i < grid_.size(); ++i) {
      const auto c = grid_.cell_at(i);
      out << c.e << ',' << c.b << ',' << c.delta_tx << ',' << c.r << ','
          << t_n_[static_cast<std::size_t>(i)] << ',' << t_x_[static_cast<std::size_t>(i)] << "\n";
    }
    return out.str();
  }

  static ThresholdTable from_csv(const std::vector<std::string>& lines, const EnvConfig& cfg) {
    if (lines.empty() || split(lines[0], ',').size() != 6)
      throw std::invalid_argument("threshold CSV line 1: missing header");
    ThresholdTable table(cfg, ThresholdVariant::Double, cfg.delta_max + 1);
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
      if (trim(lines[ln]).empty()) continue;
      const std::string ctx = "threshold CSV line " + std::to_string(ln + 1);
      const auto f = split(lines[ln], ',');
      if (f.size() != 6) throw std::invalid_argument(ctx + ": expected 6 fields");
      const int e = static_cast<int>(parse_int(f[0], ctx));
      const int b = static_cast<int>(parse_int(f[1], ctx));
      const int dtx = static_cast<int>(parse_int(f[2], ctx));
      const int r = static_cast<int>(parse_int(f[3], ctx));
      const int tn = static_cast<int>(parse_int(f[4], ctx));
      const int tx = static_cast<int>(parse_int(f[5], ctx));
      if (e < 0 || e >= cfg.energy_states() || b < 0 || b > cfg.b_max || dtx < 1 || dtx > cfg.delta_max ||
          r < 0 || r > cfg.harq.r_max)
        throw std::invalid_argument(ctx + ": cell outside the configured grid");
      if (tn > tx) throw std::invalid_argument(ctx + ": T_n exceeds T_x");
      table.set(e, b, dtx, r, tn, tx);
    }
    return table;
  }

 private:
  std::size_t cell(const SystemState& s) const {
    return static_cast<std::size_t>(grid_.index(s.e, s.b, s.delta_tx, s.r));
  }

  EnvConfig cfg_;
  ThresholdVariant variant_;
  CellGrid grid_;
  std::vector<int> t_n_, t_x_;
};

namespace detail {

/// Degrades an intended action to the best feasible lower one (x -> n -> i).
inline Action coerce_feasible(Action wanted, const SystemState& s, const EnvConfig& cfg) {
  const ActionSet feas = feasible_actions(s, cfg);
  if (wanted == Action::Retransmit && !feas.contains(wanted)) wanted = Action::NewUpdate;
  if (wanted == Action::NewUpdate && !feas.contains(wanted)) wanted = Action::Idle;
  return wanted;
}

}  // namespace detail

/// Double-threshold rule: idle below T_n, send fresh between the thresholds,
/// retransmit at or above T_x; the result is coerced to a feasible action.
inline Action double_threshold_action(const SystemState& s, const ThresholdTable& t) {
  Action wanted = Action::Idle;
  if (s.delta_rx >= t.threshold_x(s)) {
    wanted = Action::Retransmit;
  } else if (s.delta_rx >= t.threshold_n(s)) {
    wanted = Action::NewUpdate;
  }
  return detail::coerce_feasible(wanted, s, t.config());
}

/// Single-threshold rule (no preemption): idle below T, otherwise send fresh
/// when nothing is pending and retransmit when a packet is pending.
inline Action single_threshold_action(const SystemState& s, const ThresholdTable& t) {
  if (s.delta_rx < t.threshold_n(s)) return Action::Idle;
  const Action wanted = (s.r == 0) ? Action::NewUpdate : Action::Retransmit;
  return detail::coerce_feasible(wanted, s, t.config());
}

class ThresholdPolicy : public DecisionPolicy {
 public:
  explicit ThresholdPolicy(ThresholdTable table) : table_(std::move(table)) {}
  Action decide(const SystemState& s, RngStream&) const override {
    return table_.variant() == ThresholdVariant::Single ? single_threshold_action(s, table_)
                                                        : double_threshold_action(s, table_);
  }
  const ThresholdTable& table() const { return table_; }

 private:
  ThresholdTable table_;
};

/// Continuous threshold parameters for the sigmoid-smoothed policies used by
/// FDPG. Pinned cells are fixed at delta_max+1 and excluded from learning.
struct SigmoidThresholdParams {
  EnvConfig cfg;
  ThresholdVariant variant = ThresholdVariant::Single;
  CellGrid grid;
  std::vector<double> theta_n;  // transmit gate (single variant uses only this)
  std::vector<double> theta_x;  // retransmit gate (double variant)
  double tau = 0.3;

  SigmoidThresholdParams(EnvConfig config, ThresholdVariant v, double initial_theta, double temperature)
      : cfg(std::move(config)), variant(v), grid(cfg), tau(temperature) {
    const auto n = static_cast<std::size_t>(grid.size());
    theta_n.assign(n, initial_theta);
    theta_x.assign(n, initial_theta);
    for (std::int64_t i = 0; i < grid.size(); ++i) {
      const auto c = grid.cell_at(i);
      if (threshold_cell_pinned(c.b, c.r, cfg)) {
        theta_n[static_cast<std::size_t>(i)] = cfg.delta_max + 1;
        theta_x[static_cast<std::size_t>(i)] = cfg.delta_max + 1;
      }
    }
  }

  std::size_t cell(const SystemState& s) const {
    return static_cast<std::size_t>(grid.index(s.e, s.b, s.delta_tx, s.r));
  }

  /// Rounded deterministic thresholds (the tau -> 0 limit of the policy).
  ThresholdTable to_threshold_table() const {
    ThresholdTable table(cfg, variant, cfg.delta_max + 1);
    for (std::int64_t i = 0; i < grid.size(); ++i) {
      const auto c = grid.cell_at(i);
      if (threshold_cell_pinned(c.b, c.r, cfg)) continue;
      auto round_clamp = [&](double v) {
        return std::clamp(static_cast<int>(std::llround(v)), 1, cfg.delta_max + 1);
      };
      int tn = round_clamp(theta_n[static_cast<std::size_t>(i)]);
      int tx = (variant == ThresholdVariant::Single) ? tn : round_clamp(theta_x[static_cast<std::size_t>(i)]);
      table.set(c.e, c.b, c.delta_tx, c.r, tn, std::max(tn, tx));
    }
    return table;
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Probability that the policy transmits (n for r=0, x otherwise) in state s
/// under the single-variant sigmoid parameterization.
inline double sigmoid_transmit_probability(const SigmoidThresholdParams& params, const SystemState& s) {
  if (!(params.tau > 0.0)) throw std::invalid_argument("sigmoid temperature must be positive");
  return sigmoid((s.delta_rx - params.theta_n[params.cell(s)]) / params.tau);
}

/// Stochastic threshold policy. The single variant gates idle versus the
/// transmit action; the double variant uses one sigmoid to gate i -> transmit
/// and a second one to pick x over n. One uniform draw per decision; the
/// sampled intent is coerced to a feasible action.
class SigmoidPolicy : public DecisionPolicy {
 public:
  explicit SigmoidPolicy(const SigmoidThresholdParams& params) : params_(&params) {}

  Action decide(const SystemState& s, RngStream& rng) const override {
    const double u = rng.uniform();
    Action wanted;
    if (params_->variant == ThresholdVariant::Single) {
      const double p_tx = sigmoid_transmit_probability(*params_, s);
      const Action transmit = (s.r == 0) ? Action::NewUpdate : Action::Retransmit;
      wanted = (u < p_tx) ? transmit : Action::Idle;
    } else {
      const std::size_t c = params_->cell(s);
      const double g1 = sigmoid((s.delta_rx - params_->theta_n[c]) / params_->tau);
      const double g2 = sigmoid((s.delta_rx - params_->theta_x[c]) / params_->tau);
      const double p_i = 1.0 - g1;
      const double p_n = g1 * (1.0 - g2);
      if (u < p_i) {
        wanted = Action::Idle;
      } else if (u < p_i + p_n) {
        wanted = Action::NewUpdate;
      } else {
        wanted = Action::Retransmit;
      }
    }
    return detail::coerce_feasible(wanted, s, params_->cfg);
  }

 private:
  const SigmoidThresholdParams* params_;
};

/// Boltzmann distribution over the feasible actions of one Q row, stabilized
/// by subtracting the feasible minimum before exponentiation. Infeasible
/// actions get probability zero.
inline std::array<double, 3> softmax_distribution(const std::array<double, 3>& q_row, double tau, ActionSet feasible) {
  if (!(tau > 0.0)) throw std::invalid_argument("softmax temperature must be positive");
  if (feasible.size() == 0) throw std::invalid_argument("softmax over an empty feasible set");
  double q_min = std::numeric_limits<double>::infinity();
  for (Action a : kAllActions)
    if (feasible.contains(a)) q_min = std::min(q_min, q_row[static_cast<std::size_t>(action_code(a))]);
  std::array<double, 3> p{0.0, 0.0, 0.0};
  double total = 0.0;
  for (Action a : kAllActions) {
    if (!feasible.contains(a)) continue;
    const auto i = static_cast<std::size_t>(action_code(a));
    p[i] = std::exp(-(q_row[i] - q_min) / tau);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

/// Samples an action from a distribution over {i, n, x} with one uniform
/// draw. Floating-point remainder goes to the last positive-probability
/// entry, so zero-probability (infeasible) actions are never produced.
inline Action sample_action(const std::array<double, 3>& dist, RngStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    acc += dist[i];
    if (u < acc) return static_cast<Action>(static_cast<int>(i));
  }
  if (last_positive < 0) throw std::invalid_argument("sample_action: distribution has no mass");
  return static_cast<Action>(last_positive);
}

}  // namespace aoi
