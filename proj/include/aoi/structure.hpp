#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "aoi/planner.hpp"
#include "aoi/state_space.hpp"

namespace aoi {

/// Checks that a policy is monotone in the receiver AoI: within every fixed
/// (e, b, delta_tx, r) slice, scanning delta_rx upward, the action sequence
/// must be a (possibly empty) prefix of idles followed only by transmissions.
/// Slices where no transmit action is feasible pass vacuously.
struct ThresholdStructureReport {
  struct Violation {
    int e, b, delta_tx, r;
    int transmit_delta_rx;  // first delta_rx at which the slice transmits
    int idle_delta_rx;      // a later delta_rx that idles again
  };
  std::vector<Violation> violations;
  std::int64_t slices_checked = 0;

  bool pass() const { return violations.empty(); }

  std::string summary() const {
    std::ostringstream out;
    out << "threshold structure: " << (pass() ? "PASS" : "FAIL") << " (" << slices_checked
        << " slices, " << violations.size() << " violations)";
    for (const auto& v : violations) {
      out << "\n  slice (e=" << v.e << ",b=" << v.b << ",dtx=" << v.delta_tx << ",r=" << v.r
          << "): transmits at delta_rx=" << v.transmit_delta_rx << " but idles at delta_rx=" << v.idle_delta_rx;
    }
    return out.str();
  }
};

inline ThresholdStructureReport verify_threshold_structure(const TabularPolicy& policy, const StateSpace& space) {
  const EnvConfig& cfg = space.config();
  ThresholdStructureReport report;
  for (int e = 0; e < cfg.energy_states(); ++e) {
    for (int b = 0; b <= cfg.b_max; ++b) {
      for (int r = 0; r <= cfg.harq.r_max; ++r) {
        const bool can_transmit = b >= cfg.e_s + cfg.e_tx || (b >= cfg.e_tx && r >= 1);
        if (!can_transmit) continue;
        for (int dtx = 1; dtx <= cfg.delta_max; ++dtx) {
          ++report.slices_checked;
          int first_transmit = 0;
          for (int drx = dtx; drx <= cfg.delta_max; ++drx) {
            const Action a = policy.at(space.index_of(SystemState{e, b, drx, dtx, r}));
            if (a != Action::Idle) {
              if (first_transmit == 0) first_transmit = drx;
            } else if (first_transmit != 0) {
              report.violations.push_back({e, b, dtx, r, first_transmit, drx});
              break;
            }
          }
        }
      }
    }
  }
  return report;
}

/// Numerical check of the diminishing-differences property of Q in
/// (delta_rx, action): for every state and each ordered feasible action pair,
/// Q(delta_rx+1, a2) - Q(delta_rx+1, a1) <= Q(delta_rx, a2) - Q(delta_rx, a1)
/// up to the tolerance. Q rows are recomputed from the differential values,
/// so a perturbed h surfaces as violations.
struct SubmodularityReport {
  struct Violation {
    SystemState at;
    Action a1, a2;
    double excess;  // lhs - rhs beyond the tolerance
  };
  std::vector<Violation> violations;
  std::int64_t comparisons = 0;
  double max_excess = 0.0;

  bool pass() const { return violations.empty(); }

  std::string summary() const {
    std::ostringstream out;
    out << "submodularity: " << (pass() ? "PASS" : "FAIL") << " (" << comparisons << " comparisons, "
        << violations.size() << " violations, max excess " << max_excess << ")";
    return out.str();
  }
};

inline SubmodularityReport verify_submodularity(const ValueTables& values, const EnvConfig& cfg, double tol = 1e-9) {
  StateSpace space(cfg);
  TransitionKernel kernel(space);
  if (values.h.size() != static_cast<std::size_t>(space.size()))
    throw std::invalid_argument("value table size does not match the configured state space");

  constexpr std::array<std::pair<Action, Action>, 3> pairs{{{Action::Idle, Action::NewUpdate},
                                                            {Action::Idle, Action::Retransmit},
                                                            {Action::NewUpdate, Action::Retransmit}}};
  SubmodularityReport report;
  for (std::int64_t i = 0; i < space.size(); ++i) {
    const SystemState s = space.state_at(i);
    if (s.delta_rx + 1 > cfg.delta_max) continue;
    const SystemState up{s.e, s.b, s.delta_rx + 1, s.delta_tx, s.r};
    const auto q_lo = action_values(kernel, i, values.h);
    const auto q_hi = action_values(kernel, space.index_of(up), values.h);
    const ActionSet feas = kernel.feasible(i);
    for (const auto& [a1, a2] : pairs) {
      if (!feas.contains(a1) || !feas.contains(a2)) continue;
      ++report.comparisons;
      const auto i1 = static_cast<std::size_t>(action_code(a1));
      const auto i2 = static_cast<std::size_t>(action_code(a2));
      const double lhs = q_hi[i2] - q_hi[i1];
      const double rhs = q_lo[i2] - q_lo[i1];
      const double excess = lhs - rhs;
      report.max_excess = std::max(report.max_excess, excess);
      if (excess > tol) report.violations.push_back({s, a1, a2, excess});
    }
  }
  return report;
}

}  // namespace aoi
