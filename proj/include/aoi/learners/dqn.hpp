#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <vector>

#include "aoi/config.hpp"
#include "aoi/model.hpp"
#include "aoi/planner.hpp"
#include "aoi/rng.hpp"
#include "aoi/state_space.hpp"
#include "aoi/trace.hpp"

namespace aoi {

/// Huber loss, quadratic with the conventional 1/2 inside the threshold and
/// linear outside, continuous at |eps| = d.
inline double huber_loss(double eps, double d) {
  if (!(d > 0.0)) throw std::invalid_argument("huber loss parameter must be positive");
  const double a = std::abs(eps);
  return a <= d ? 0.5 * eps * eps : d * (a - 0.5 * d);
}

inline double huber_gradient(double eps, double d) {
  if (!(d > 0.0)) throw std::invalid_argument("huber loss parameter must be positive");
  return std::abs(eps) <= d ? eps : (eps > 0.0 ? d : -d);
}

/// State encoding for the network: one-hot EH state followed by battery,
/// both ages, and the retransmission count as normalized scalars.
inline int dqn_input_dim(const EnvConfig& cfg) { return cfg.energy_states() + 4; }

inline void encode_state(const SystemState& s, const EnvConfig& cfg, std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(dqn_input_dim(cfg)), 0.0);
  out[static_cast<std::size_t>(s.e)] = 1.0;
  const auto base = static_cast<std::size_t>(cfg.energy_states());
  out[base + 0] = static_cast<double>(s.b) / cfg.b_max;
  out[base + 1] = static_cast<double>(s.delta_rx) / cfg.delta_max;
  out[base + 2] = static_cast<double>(s.delta_tx) / cfg.delta_max;
  out[base + 3] = cfg.harq.r_max > 0 ? static_cast<double>(s.r) / cfg.harq.r_max : 0.0;
}

/// Feed-forward net: input -> hidden rectified-linear units -> one value per
/// action. Parameters live in one flat vector (W1, b1, W2, b2) so optimizers
/// and finite-difference checks can treat them uniformly.
class MlpQNet {
 public:
  MlpQNet(int in_dim, int hidden, int out_dim)
      : in_(in_dim), hidden_(hidden), out_(out_dim),
        w_(static_cast<std::size_t>(hidden * in_dim + hidden + out_dim * hidden + out_dim), 0.0) {}

  int input_dim() const { return in_; }
  int output_dim() const { return out_; }
  std::size_t param_count() const { return w_.size(); }
  std::vector<double>& params() { return w_; }
  const std::vector<double>& params() const { return w_; }

  void init(RngStream& rng) {
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in_));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (int i = 0; i < hidden_ * in_; ++i) w_[static_cast<std::size_t>(i)] = (2.0 * rng.uniform() - 1.0) * s1;
    for (int i = 0; i < hidden_; ++i) w_[w1_size() + static_cast<std::size_t>(i)] = 0.0;
    const std::size_t off = w1_size() + static_cast<std::size_t>(hidden_);
    for (int i = 0; i < out_ * hidden_; ++i) w_[off + static_cast<std::size_t>(i)] = (2.0 * rng.uniform() - 1.0) * s2;
    for (int i = 0; i < out_; ++i) w_[off + static_cast<std::size_t>(out_ * hidden_ + i)] = 0.0;
  }

  void forward(const std::vector<double>& x, std::vector<double>& q) const {
    std::vector<double> hid;
    forward_hidden(x, hid);
    output_from_hidden(hid, q);
  }

  /// Accumulates d q(x, action) / d theta into grad, scaled by `scale`.
  void accumulate_gradient(const std::vector<double>& x, int action, double scale, std::vector<double>& grad) const {
    std::vector<double> hid;
    forward_hidden(x, hid);
    const std::size_t off2 = w1_size() + static_cast<std::size_t>(hidden_);
    const std::size_t off2b = off2 + static_cast<std::size_t>(out_ * hidden_);
    // output layer
    for (int j = 0; j < hidden_; ++j)
      grad[off2 + static_cast<std::size_t>(action * hidden_ + j)] += scale * hid[static_cast<std::size_t>(j)];
    grad[off2b + static_cast<std::size_t>(action)] += scale;
    // hidden layer through the rectifier
    for (int j = 0; j < hidden_; ++j) {
      if (hid[static_cast<std::size_t>(j)] <= 0.0) continue;
      const double up = scale * w_[off2 + static_cast<std::size_t>(action * hidden_ + j)];
      for (int i = 0; i < in_; ++i)
        grad[static_cast<std::size_t>(j * in_ + i)] += up * x[static_cast<std::size_t>(i)];
      grad[w1_size() + static_cast<std::size_t>(j)] += up;
    }
  }

 private:
  std::size_t w1_size() const { return static_cast<std::size_t>(hidden_ * in_); }

  void forward_hidden(const std::vector<double>& x, std::vector<double>& hid) const {
    hid.assign(static_cast<std::size_t>(hidden_), 0.0);
    for (int j = 0; j < hidden_; ++j) {
      double acc = w_[w1_size() + static_cast<std::size_t>(j)];
      const std::size_t row = static_cast<std::size_t>(j * in_);
      for (int i = 0; i < in_; ++i) acc += w_[row + static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
      hid[static_cast<std::size_t>(j)] = acc > 0.0 ? acc : 0.0;
    }
  }

  void output_from_hidden(const std::vector<double>& hid, std::vector<double>& q) const {
    q.assign(static_cast<std::size_t>(out_), 0.0);
    const std::size_t off2 = w1_size() + static_cast<std::size_t>(hidden_);
    const std::size_t off2b = off2 + static_cast<std::size_t>(out_ * hidden_);
    for (int k = 0; k < out_; ++k) {
      double acc = w_[off2b + static_cast<std::size_t>(k)];
      for (int j = 0; j < hidden_; ++j)
        acc += w_[off2 + static_cast<std::size_t>(k * hidden_ + j)] * hid[static_cast<std::size_t>(j)];
      q[static_cast<std::size_t>(k)] = acc;
    }
  }

  int in_, hidden_, out_;
  std::vector<double> w_;
};

/// Temporal-difference error with the value convention reward = -cost:
///   eps = Q(s,a) - (-cost + gamma * Q_target(s', argmax_{a' feasible} Q(s',a'))).
/// The argmax over the online network is feasibility-masked.
inline double dqn_td_error(const MlpQNet& online, const MlpQNet& target, const SystemState& s, Action a,
                           const SystemState& s_next, int cost, double gamma, const EnvConfig& cfg) {
  std::vector<double> x, q_online, q_next_online, q_next_target;
  encode_state(s, cfg, x);
  online.forward(x, q_online);
  encode_state(s_next, cfg, x);
  online.forward(x, q_next_online);
  target.forward(x, q_next_target);

  const ActionSet feas = feasible_actions(s_next, cfg);
  int best = -1;
  double best_v = -std::numeric_limits<double>::infinity();
  for (Action an : kPreferenceOrder) {
    if (!feas.contains(an)) continue;
    const int k = action_code(an);
    if (q_next_online[static_cast<std::size_t>(k)] > best_v) {
      best_v = q_next_online[static_cast<std::size_t>(k)];
      best = k;
    }
  }
  const double target_value = -static_cast<double>(cost) + gamma * q_next_target[static_cast<std::size_t>(best)];
  return q_online[static_cast<std::size_t>(action_code(a))] - target_value;
}

struct DqnTransition {
  SystemState s;
  Action a;
  SystemState next;
  int cost;
};

/// DQN with uniform experience replay and a target network refreshed at
/// episode boundaries. The learner owns all of its mutable state; exploration,
/// environment noise, initialization, and minibatch sampling draw from
/// independent substreams of the seed.
class DqnLearner {
 public:
  DqnLearner(const EnvConfig& cfg, std::uint64_t seed, const DqnConfig& hyper = {})
      : cfg_(cfg), hyper_(validated(hyper)),
        online_(dqn_input_dim(cfg), hyper.hidden, 3),
        target_(dqn_input_dim(cfg), hyper.hidden, 3),
        adam_m_(online_.param_count(), 0.0),
        adam_v_(online_.param_count(), 0.0),
        root_(seed),
        env_rng_(root_.fork(stream_tag::environment)),
        explore_rng_(root_.fork(stream_tag::exploration)),
        batch_rng_(root_.fork(stream_tag::minibatch)),
        epsilon_(hyper.eps0) {
    RngStream init_rng = root_.fork(stream_tag::initialization);
    online_.init(init_rng);
    target_ = online_;
  }

  int episodes_run() const { return episodes_; }
  long target_refreshes() const { return target_refreshes_; }
  std::size_t replay_size() const { return buffer_.size(); }
  double epsilon() const { return epsilon_; }
  const MlpQNet& online_net() const { return online_; }
  const MlpQNet& target_net() const { return target_; }

  void run_episode() {
    SystemState s = initial_state(cfg_, env_rng_);
    for (int t = 0; t < hyper_.episode_length; ++t) {
      const Action a = select_action(s);
      const StepResult res = step(s, a, cfg_, env_rng_);
      store({s, a, res.next, res.cost});
      if (buffer_.size() >= static_cast<std::size_t>(hyper_.batch)) train_minibatch();
      s = res.next;
    }
    target_ = online_;
    ++target_refreshes_;
    epsilon_ = std::max(hyper_.eps_min, epsilon_ * hyper_.eps_decay);
    ++episodes_;
  }

  /// Greedy feasibility-masked policy of the current online network.
  TabularPolicy extract_policy(const StateSpace& space) const {
    TabularPolicy policy;
    policy.action.resize(static_cast<std::size_t>(space.size()));
    std::vector<double> x, q;
    for (std::int64_t i = 0; i < space.size(); ++i) {
      const SystemState s = space.state_at(i);
      encode_state(s, cfg_, x);
      online_.forward(x, q);
      const ActionSet feas = feasible_actions(s, cfg_);
      Action best = Action::Idle;
      double best_v = -std::numeric_limits<double>::infinity();
      for (Action a : kPreferenceOrder) {
        if (!feas.contains(a)) continue;
        const double v = q[static_cast<std::size_t>(action_code(a))];
        if (v > best_v) {
          best_v = v;
          best = a;
        }
      }
      policy.action[static_cast<std::size_t>(i)] = best;
    }
    return policy;
  }

 private:
  static const DqnConfig& validated(const DqnConfig& h) {
    if (h.hidden < 1 || h.batch < 1 || h.replay_capacity < h.batch || h.episode_length < 1 || h.eval_steps < 1)
      throw std::invalid_argument("invalid DQN hyperparameters");
    if (!(h.discount >= 0.0 && h.discount < 1.0) || !(h.learning_rate > 0.0) || !(h.huber_d > 0.0))
      throw std::invalid_argument("invalid DQN hyperparameters");
    return h;
  }

  Action select_action(const SystemState& s) {
    const ActionSet feas = feasible_actions(s, cfg_);
    if (explore_rng_.uniform() < epsilon_) {
      const int pick = static_cast<int>(explore_rng_.uniform_int(static_cast<std::uint64_t>(feas.size())));
      int seen = 0;
      for (Action a : kAllActions)
        if (feas.contains(a) && seen++ == pick) return a;
    }
    std::vector<double> x, q;
    encode_state(s, cfg_, x);
    online_.forward(x, q);
    Action best = Action::Idle;
    double best_v = -std::numeric_limits<double>::infinity();
    for (Action a : kPreferenceOrder) {
      if (!feas.contains(a)) continue;
      const double v = q[static_cast<std::size_t>(action_code(a))];
      if (v > best_v) {
        best_v = v;
        best = a;
      }
    }
    return best;
  }

  void store(const DqnTransition& tr) {
    if (buffer_.size() < static_cast<std::size_t>(hyper_.replay_capacity)) {
      buffer_.push_back(tr);
    } else {
      buffer_[write_pos_] = tr;
    }
    write_pos_ = (write_pos_ + 1) % static_cast<std::size_t>(hyper_.replay_capacity);
  }

  void train_minibatch() {
    std::vector<double> grad(online_.param_count(), 0.0);
    std::vector<double> x;
    const double inv_batch = 1.0 / hyper_.batch;
    for (int k = 0; k < hyper_.batch; ++k) {
      const auto& tr = buffer_[batch_rng_.uniform_int(buffer_.size())];
      const double eps = dqn_td_error(online_, target_, tr.s, tr.a, tr.next, tr.cost, hyper_.discount, cfg_);
      const double g = huber_gradient(eps, hyper_.huber_d) * inv_batch;
      encode_state(tr.s, cfg_, x);
      online_.accumulate_gradient(x, action_code(tr.a), g, grad);
    }
    adam_step(grad);
  }

  void adam_step(const std::vector<double>& grad) {
    ++adam_t_;
    const double b1 = hyper_.adam_beta1, b2 = hyper_.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, adam_t_);
    const double bc2 = 1.0 - std::pow(b2, adam_t_);
    auto& w = online_.params();
    for (std::size_t i = 0; i < w.size(); ++i) {
      adam_m_[i] = b1 * adam_m_[i] + (1.0 - b1) * grad[i];
      adam_v_[i] = b2 * adam_v_[i] + (1.0 - b2) * grad[i] * grad[i];
      w[i] -= hyper_.learning_rate * (adam_m_[i] / bc1) / (std::sqrt(adam_v_[i] / bc2) + hyper_.adam_eps);
    }
  }

  EnvConfig cfg_;
  DqnConfig hyper_;
  MlpQNet online_, target_;
  std::vector<double> adam_m_, adam_v_;
  long adam_t_ = 0;
  RngStream root_, env_rng_, explore_rng_, batch_rng_;
  std::vector<DqnTransition> buffer_;
  std::size_t write_pos_ = 0;
  double epsilon_;
  int episodes_ = 0;
  long target_refreshes_ = 0;
};

struct DqnResult {
  TabularPolicy policy;
  RunTrace trace;  // evaluation rollout of the extracted greedy policy
};

/// Trains for the given number of episodes and returns the greedy policy
/// together with a fresh evaluation trace of that policy.
inline DqnResult dqn_learn(const EnvConfig& cfg, int episodes, std::uint64_t seed, const DqnConfig& hyper = {}) {
  const auto started = std::chrono::steady_clock::now();
  DqnLearner learner(cfg, seed, hyper);
  for (int ep = 0; ep < episodes; ++ep) learner.run_episode();

  StateSpace space(cfg);
  DqnResult out{learner.extract_policy(space), RunTrace{}};
  out.trace.seed = seed;
  out.trace.algorithm = "dqn";

  RngStream eval_rng = RngStream(seed).fork(stream_tag::evaluation);
  SystemState s = initial_state(cfg, eval_rng);
  for (int t = 0; t < hyper.eval_steps; ++t) {
    const Action a = out.policy.at(space.index_of(s));
    const StepResult res = step(s, a, cfg, eval_rng);
    out.trace.append(res.cost);
    s = res.next;
  }
  out.trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

}  // namespace aoi
