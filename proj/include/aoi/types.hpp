#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace aoi {

/// Transmitter actions: stay idle, sense-and-send a new update, or
/// retransmit the last failed update. Codes double as the on-disk action
/// encoding (0=i, 1=n, 2=x).
enum class Action : int { Idle = 0, NewUpdate = 1, Retransmit = 2 };

inline constexpr std::array<Action, 3> kAllActions{Action::Idle, Action::NewUpdate, Action::Retransmit};

/// Fixed tie-break order: prefer the cheaper action on exact value ties.
inline constexpr std::array<Action, 3> kPreferenceOrder{Action::Idle, Action::Retransmit, Action::NewUpdate};

inline int action_code(Action a) { return static_cast<int>(a); }

inline char action_symbol(Action a) {
  switch (a) {
    case Action::Idle: return 'i';
    case Action::NewUpdate: return 'n';
    case Action::Retransmit: return 'x';
  }
  throw std::logic_error("invalid action");
}

inline Action action_from_symbol(char c) {
  switch (c) {
    case 'i': return Action::Idle;
    case 'n': return Action::NewUpdate;
    case 'x': return Action::Retransmit;
  }
  throw std::invalid_argument(std::string("unknown action symbol: ") + c);
}

/// Small set of actions, used for feasibility masks.
struct ActionSet {
  std::uint8_t bits = 0;

  void insert(Action a) { bits = static_cast<std::uint8_t>(bits | (1u << action_code(a))); }
  bool contains(Action a) const { return (bits >> action_code(a)) & 1u; }
  int size() const {
    int n = 0;
    for (Action a : kAllActions) n += contains(a);
    return n;
  }
  bool operator==(const ActionSet&) const = default;
};

/// Full system state: EH-chain state, battery level, AoI at receiver and
/// transmitter, and the retransmission count of the packet held at the
/// transmitter (0 means there is nothing to retransmit).
struct SystemState {
  int e = 0;
  int b = 0;
  int delta_rx = 1;
  int delta_tx = 1;
  int r = 0;

  auto operator<=>(const SystemState&) const = default;
};

inline std::string to_string(const SystemState& s) {
  return "(e=" + std::to_string(s.e) + ",b=" + std::to_string(s.b) +
         ",drx=" + std::to_string(s.delta_rx) + ",dtx=" + std::to_string(s.delta_tx) +
         ",r=" + std::to_string(s.r) + ")";
}

}  // namespace aoi
