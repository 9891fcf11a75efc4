#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <vector>

#include "aoi/config.hpp"
#include "aoi/model.hpp"
#include "aoi/planner.hpp"
#include "aoi/policies.hpp"
#include "aoi/rng.hpp"
#include "aoi/state_space.hpp"
#include "aoi/trace.hpp"

namespace aoi {

/// Mutable state of the tabular average-cost Q-learner with Boltzmann
/// exploration: Q table, gain estimate, per-pair visit counts, temperature,
/// and the global step counter.
struct GrState {
  std::vector<std::array<double, 3>> q;
  std::vector<std::array<std::uint32_t, 3>> visits;
  double gain = 0.0;
  double tau;
  long long n = 0;  // completed updates

  GrState(std::int64_t states, double tau0)
      : q(static_cast<std::size_t>(states), {0.0, 0.0, 0.0}),
        visits(static_cast<std::size_t>(states), {0u, 0u, 0u}),
        tau(tau0) {}
};

/// One observed transition (s, a) -> s' with the incurred cost. Advances the
/// step counter, bumps the visit count, and applies
///   Q(s,a) += alpha * [cost - J + min_{a' feasible} Q(s',a') - Q(s,a)],
///   J_n     = J_{n-1} + beta(n) * (cost - J_{n-1}),
/// with alpha = 1/sqrt(m) (m counting this visit) and beta(n) = 1/n, which
/// keeps J exactly equal to the running empirical average of observed costs.
/// The learner touches the model only through feasibility masks.
inline void gr_q_update(GrState& grs, const StateSpace& space, std::int64_t s, Action a, std::int64_t s_next,
                        int cost) {
  grs.n += 1;
  const auto si = static_cast<std::size_t>(s);
  const auto ai = static_cast<std::size_t>(action_code(a));
  const std::uint32_t m = ++grs.visits[si][ai];
  const double alpha = 1.0 / std::sqrt(static_cast<double>(m));

  double next_min = std::numeric_limits<double>::infinity();
  const ActionSet feas = feasible_actions(space.state_at(s_next), space.config());
  for (Action an : kAllActions)
    if (feas.contains(an))
      next_min = std::min(next_min, grs.q[static_cast<std::size_t>(s_next)][static_cast<std::size_t>(action_code(an))]);

  grs.q[si][ai] += alpha * (cost - grs.gain + next_min - grs.q[si][ai]);

  const double beta = 1.0 / static_cast<double>(grs.n);
  grs.gain += beta * (cost - grs.gain);
}

struct GrResult {
  TabularPolicy policy;
  RunTrace trace;
  GrState state;
};

/// Runs the learner for the given number of environment steps along a single
/// trajectory. Action selection is softmax over the feasible Q row with an
/// exponentially decaying temperature; exploration and environment noise use
/// independent substreams of the seed.
inline GrResult gr_learn(const EnvConfig& cfg, long steps, std::uint64_t seed, const GrConfig& hyper = {}) {
  const auto started = std::chrono::steady_clock::now();
  StateSpace space(cfg);
  RngStream root(seed);
  RngStream env_rng = root.fork(stream_tag::environment);
  RngStream explore_rng = root.fork(stream_tag::exploration);

  GrResult out{TabularPolicy{}, RunTrace{}, GrState(space.size(), hyper.tau0)};
  out.trace.seed = seed;
  out.trace.algorithm = "gr";

  SystemState s = initial_state(cfg, env_rng);
  std::int64_t si = space.index_of(s);
  ActionSet feas = feasible_actions(s, cfg);
  for (long t = 0; t < steps; ++t) {
    const auto dist = softmax_distribution(out.state.q[static_cast<std::size_t>(si)], out.state.tau, feas);
    const Action a = sample_action(dist, explore_rng);
    const StepResult res = step(s, a, cfg, env_rng);
    const std::int64_t ni = space.index_of(res.next);
    gr_q_update(out.state, space, si, a, ni, res.cost);
    out.state.tau = std::max(out.state.tau * hyper.gamma_tau, hyper.tau_min);
    out.trace.append(res.cost);
    s = res.next;
    si = ni;
    feas = feasible_actions(s, cfg);
  }

  out.policy.action.resize(static_cast<std::size_t>(space.size()));
  for (std::int64_t i = 0; i < space.size(); ++i) {
    std::array<double, 3> masked{kInfeasibleQ, kInfeasibleQ, kInfeasibleQ};
    const ActionSet f = feasible_actions(space.state_at(i), cfg);
    for (Action a : kAllActions)
      if (f.contains(a))
        masked[static_cast<std::size_t>(action_code(a))] =
            out.state.q[static_cast<std::size_t>(i)][static_cast<std::size_t>(action_code(a))];
    out.policy.action[static_cast<std::size_t>(i)] = argmin_preferred(masked);
  }
  out.trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

}  // namespace aoi
