#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "aoi/config.hpp"
#include "aoi/model.hpp"
#include "aoi/types.hpp"

namespace aoi {

/// Enumeration of all valid states (delta_rx >= delta_tx), ordered
/// lexicographically on (e, b, delta_rx, delta_tx, r), with O(1) bidirectional
/// index mapping.
class StateSpace {
 public:
  explicit StateSpace(EnvConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    pair_count_ = cfg_.delta_max * (cfg_.delta_max + 1) / 2;
    pairs_.reserve(static_cast<std::size_t>(pair_count_));
    for (int drx = 1; drx <= cfg_.delta_max; ++drx)
      for (int dtx = 1; dtx <= drx; ++dtx) pairs_.emplace_back(drx, dtx);
    r_count_ = cfg_.harq.r_max + 1;
    b_count_ = cfg_.b_max + 1;
    size_ = static_cast<std::int64_t>(cfg_.energy_states()) * b_count_ * pair_count_ * r_count_;
  }

  static std::int64_t expected_size(const EnvConfig& cfg) {
    return static_cast<std::int64_t>(cfg.energy_states()) * (cfg.b_max + 1) *
           (static_cast<std::int64_t>(cfg.delta_max) * (cfg.delta_max + 1) / 2) * (cfg.harq.r_max + 1);
  }

  std::int64_t size() const { return size_; }
  const EnvConfig& config() const { return cfg_; }

  std::int64_t index_of(const SystemState& s) const {
    if (!is_valid_state(s, cfg_)) throw std::domain_error("state outside the space: " + to_string(s));
    const std::int64_t pair = static_cast<std::int64_t>(s.delta_rx - 1) * s.delta_rx / 2 + (s.delta_tx - 1);
    return ((static_cast<std::int64_t>(s.e) * b_count_ + s.b) * pair_count_ + pair) * r_count_ + s.r;
  }

  SystemState state_at(std::int64_t idx) const {
    if (idx < 0 || idx >= size_) throw std::out_of_range("state index out of range");
    SystemState s;
    s.r = static_cast<int>(idx % r_count_);
    idx /= r_count_;
    const auto& pr = pairs_[static_cast<std::size_t>(idx % pair_count_)];
    s.delta_rx = pr.first;
    s.delta_tx = pr.second;
    idx /= pair_count_;
    s.b = static_cast<int>(idx % b_count_);
    s.e = static_cast<int>(idx / b_count_);
    return s;
  }

 private:
  EnvConfig cfg_;
  int pair_count_ = 0;
  int r_count_ = 0;
  int b_count_ = 0;
  std::int64_t size_ = 0;
  std::vector<std::pair<int, int>> pairs_;  // pair index -> (delta_rx, delta_tx)
};

inline StateSpace enumerate_states(const EnvConfig& cfg) { return StateSpace(cfg); }

/// Index grid over the threshold coordinates (e, b, delta_tx, r), shared by
/// threshold tables and the FDPG parameter vector.
class CellGrid {
 public:
  explicit CellGrid(const EnvConfig& cfg)
      : e_count_(cfg.energy_states()),
        b_count_(cfg.b_max + 1),
        dtx_count_(cfg.delta_max),
        r_count_(cfg.harq.r_max + 1) {}

  std::int64_t size() const {
    return static_cast<std::int64_t>(e_count_) * b_count_ * dtx_count_ * r_count_;
  }

  std::int64_t index(int e, int b, int delta_tx, int r) const {
    return ((static_cast<std::int64_t>(e) * b_count_ + b) * dtx_count_ + (delta_tx - 1)) * r_count_ + r;
  }

  struct Cell {
    int e, b, delta_tx, r;
  };

  Cell cell_at(std::int64_t idx) const {
    Cell c{};
    c.r = static_cast<int>(idx % r_count_);
    idx /= r_count_;
    c.delta_tx = static_cast<int>(idx % dtx_count_) + 1;
    idx /= dtx_count_;
    c.b = static_cast<int>(idx % b_count_);
    c.e = static_cast<int>(idx / b_count_);
    return c;
  }

 private:
  int e_count_, b_count_, dtx_count_, r_count_;
};

/// A threshold cell never transmits when the battery cannot pay for the
/// transmit action that the cell would trigger (x for r>=1, n for r=0).
inline bool threshold_cell_pinned(int b, int r, const EnvConfig& cfg) {
  return (r >= 1) ? (b < cfg.e_tx) : (b < cfg.e_s + cfg.e_tx);
}

}  // namespace aoi
