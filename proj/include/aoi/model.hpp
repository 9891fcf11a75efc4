#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "aoi/config.hpp"
#include "aoi/rng.hpp"
#include "aoi/types.hpp"

namespace aoi {

inline bool is_valid_state(const SystemState& s, const EnvConfig& cfg) {
  return s.e >= 0 && s.e < cfg.energy_states() && s.b >= 0 && s.b <= cfg.b_max &&
         s.delta_tx >= 1 && s.delta_rx >= s.delta_tx && s.delta_rx <= cfg.delta_max &&
         s.r >= 0 && s.r <= cfg.harq.r_max;
}

inline SystemState make_state(int e, int b, int delta_rx, int delta_tx, int r, const EnvConfig& cfg) {
  SystemState s{e, b, delta_rx, delta_tx, r};
  if (!is_valid_state(s, cfg)) throw std::domain_error("invalid system state " + to_string(s));
  return s;
}

/// Idle is always allowed; a new update needs sensing plus transmission
/// energy; a retransmission needs transmission energy and a pending packet.
inline ActionSet feasible_actions(const SystemState& s, const EnvConfig& cfg) {
  ActionSet set;
  set.insert(Action::Idle);
  if (s.b >= cfg.e_s + cfg.e_tx) set.insert(Action::NewUpdate);
  if (s.b >= cfg.e_tx && s.r >= 1) set.insert(Action::Retransmit);
  return set;
}

inline int action_energy(Action a, const EnvConfig& cfg) {
  switch (a) {
    case Action::Idle: return 0;
    case Action::NewUpdate: return cfg.e_s + cfg.e_tx;
    case Action::Retransmit: return cfg.e_tx;
  }
  throw std::logic_error("invalid action");
}

/// Battery recursion: spend first, add the harvest of the slot, clamp at
/// capacity. The action must be affordable from b alone (energy causality).
inline int next_battery(int b, int e, Action a, const EnvConfig& cfg) {
  const int spend = action_energy(a, cfg);
  if (spend > b) throw std::domain_error("energy causality violated: action spends more than the battery holds");
  return std::min(b + e - spend, cfg.b_max);
}

struct TransitionOutcome {
  SystemState next;
  double prob = 0.0;
  std::optional<bool> ack;  // channel outcome; empty for idle
};

namespace detail {

/// Deterministic part of the state recursion once the channel outcome and
/// the next EH state are fixed.
inline SystemState next_state_given(const SystemState& s, Action a, bool ack, int e_next, const EnvConfig& cfg) {
  SystemState n;
  n.e = e_next;
  n.b = next_battery(s.b, s.e, a, cfg);
  n.delta_tx = (a == Action::NewUpdate) ? 1 : std::min(s.delta_tx + 1, cfg.delta_max);
  if (a != Action::Idle && ack) {
    n.delta_rx = (a == Action::NewUpdate) ? 1 : std::min(s.delta_tx + 1, cfg.delta_max);
  } else {
    n.delta_rx = std::min(s.delta_rx + 1, cfg.delta_max);
  }
  if ((a != Action::Idle && ack) || n.delta_tx == cfg.delta_max) {
    n.r = 0;
  } else if (a == Action::NewUpdate) {
    n.r = std::min(1, cfg.harq.r_max);  // fresh update failed
  } else if (a == Action::Idle) {
    n.r = s.r;
  } else {
    n.r = std::min(s.r + 1, cfg.harq.r_max);
  }
  return n;
}

inline double success_probability(const SystemState& s, Action a, const EnvConfig& cfg) {
  // A fresh packet has zero combined prior attempts; a retransmission in
  // state r benefits from r combined attempts.
  const int r_eff = (a == Action::NewUpdate) ? 0 : s.r;
  return 1.0 - cfg.harq.error_probability(r_eff);
}

}  // namespace detail

/// Exact one-step distribution: the product of the channel outcome (for
/// transmit actions) and the next EH state. Outcome order is deterministic:
/// ACK before NACK, then ascending next EH state.
inline std::vector<TransitionOutcome> transition_distribution(const SystemState& s, Action a, const EnvConfig& cfg) {
  if (!is_valid_state(s, cfg)) throw std::domain_error("invalid system state " + to_string(s));
  if (!feasible_actions(s, cfg).contains(a))
    throw std::domain_error("infeasible action '" + std::string(1, action_symbol(a)) + "' in state " + to_string(s));

  const auto& eh_row = cfg.eh.p[static_cast<std::size_t>(s.e)];
  std::vector<TransitionOutcome> out;
  auto emit = [&](std::optional<bool> ack, double p_channel) {
    for (int e2 = 0; e2 < cfg.energy_states(); ++e2) {
      const double pe = eh_row[static_cast<std::size_t>(e2)];
      if (pe <= 0.0) continue;
      out.push_back({detail::next_state_given(s, a, ack.value_or(false), e2, cfg), p_channel * pe, ack});
    }
  };
  if (a == Action::Idle) {
    emit(std::nullopt, 1.0);
  } else {
    const double ps = detail::success_probability(s, a, cfg);
    emit(true, ps);
    emit(false, 1.0 - ps);
  }
  return out;
}

struct StepResult {
  SystemState next;
  int cost = 0;
  std::optional<bool> ack;
};

/// Sampled counterpart of transition_distribution. Consumes one uniform draw
/// for the channel (transmit actions only) and one for the next EH state.
/// The cost of a step is the receiver AoI, independent of the action.
inline StepResult step(const SystemState& s, Action a, const EnvConfig& cfg, RngStream& rng) {
  if (!is_valid_state(s, cfg)) throw std::domain_error("invalid system state " + to_string(s));
  if (!feasible_actions(s, cfg).contains(a))
    throw std::domain_error("infeasible action '" + std::string(1, action_symbol(a)) + "' in state " + to_string(s));
  std::optional<bool> ack;
  if (a != Action::Idle) ack = rng.bernoulli(detail::success_probability(s, a, cfg));
  const auto& eh_row = cfg.eh.p[static_cast<std::size_t>(s.e)];
  const int e2 = rng.categorical(std::span<const double>(eh_row.data(), eh_row.size()));
  return {detail::next_state_given(s, a, ack.value_or(false), e2, cfg), s.delta_rx, ack};
}

/// Fresh system: empty battery, no pending packet, both ages at 1, and the
/// EH state drawn from the chain's stationary distribution (uniform fallback
/// if the chain is not uniquely ergodic; *stationary_exact reports which).
inline SystemState initial_state(const EnvConfig& cfg, RngStream& rng, bool* stationary_exact = nullptr) {
  const auto st = cfg.eh.stationary();
  if (stationary_exact) *stationary_exact = st.exact;
  const int e = rng.categorical(std::span<const double>(st.pi.data(), st.pi.size()));
  return SystemState{e, 0, 1, 1, 0};
}

}  // namespace aoi
