#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "aoi/config.hpp"
#include "aoi/model.hpp"
#include "aoi/policies.hpp"
#include "aoi/rng.hpp"
#include "aoi/trace.hpp"

namespace aoi {

/// Finite-difference gradient from one perturbation: (D^T D)^{-1} D (J+ - J-)
/// / (2 sigma). D^T D is the count of ones in D. An all-zero D carries no
/// information and must be resampled by the caller.
inline std::vector<double> fdpg_gradient_estimate(const std::vector<double>& d, double j_plus, double j_minus,
                                                  double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("perturbation size sigma must be positive");
  double ones = 0.0;
  for (double v : d) ones += v;
  if (ones == 0.0) throw std::invalid_argument("perturbation vector is all zero; resample");
  const double scale = (j_plus - j_minus) / (2.0 * sigma) / ones;
  std::vector<double> grad(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) grad[i] = d[i] * scale;
  return grad;
}

struct FdpgResult {
  ThresholdTable table;
  RunTrace trace;
  SigmoidThresholdParams params;
};

/// Policy-gradient search over the sigmoid threshold parameters. Each
/// iteration perturbs the learnable coordinates by +/- sigma along a Bernoulli
/// direction, rolls out both perturbed policies over the same random numbers,
/// and descends the finite-difference gradient. Pinned coordinates never
/// move; theta is clipped to [1, delta_max+1] and the double variant is
/// projected onto T_n <= T_x after every update.
inline FdpgResult fdpg_learn(const EnvConfig& cfg, long iterations, std::uint64_t seed, const FdpgConfig& hyper = {},
                             ThresholdVariant variant = ThresholdVariant::Single) {
  if (hyper.horizon < 1) throw std::invalid_argument("rollout horizon must be positive");
  if (!(hyper.sigma > 0.0)) throw std::invalid_argument("perturbation size sigma must be positive");
  if (!(hyper.q > 0.0 && hyper.q < 1.0)) throw std::invalid_argument("perturbation parameter q must lie in (0,1)");
  if (!(hyper.y > 0.0) || !(hyper.z > 0.5 && hyper.z <= 1.0))
    throw std::invalid_argument("step-size schedule requires y > 0 and z in (0.5, 1]");
  if (!(hyper.tau0 > 0.0)) throw std::invalid_argument("sigmoid temperature must be positive");
  const auto started = std::chrono::steady_clock::now();
  SigmoidThresholdParams params(cfg, variant, 0.0, hyper.tau0);

  // Learnable coordinates: unpinned cells of theta_n, then (double variant)
  // unpinned cells of theta_x.
  std::vector<std::size_t> cells;
  for (std::int64_t i = 0; i < params.grid.size(); ++i) {
    const auto c = params.grid.cell_at(i);
    if (!threshold_cell_pinned(c.b, c.r, cfg)) cells.push_back(static_cast<std::size_t>(i));
  }
  const std::size_t d_dim = (variant == ThresholdVariant::Double) ? 2 * cells.size() : cells.size();

  auto coord = [&](std::size_t k) -> double& {
    return k < cells.size() ? params.theta_n[cells[k]] : params.theta_x[cells[k - cells.size()]];
  };

  RngStream root(seed);
  RngStream perturb_rng = root.fork(stream_tag::exploration);
  RngStream env_root = root.fork(stream_tag::environment);

  FdpgResult out{ThresholdTable(cfg, variant, cfg.delta_max + 1), RunTrace{}, params};
  out.trace.seed = seed;
  out.trace.algorithm = (variant == ThresholdVariant::Single) ? "fdpg-single" : "fdpg-double";

  const int t_steps = hyper.horizon;
  std::vector<double> direction(d_dim, 0.0);
  bool diverged = false;

  for (long n = 1; n <= iterations; ++n) {
    if (d_dim > 0) {
      double ones = 0.0;
      do {
        ones = 0.0;
        for (std::size_t k = 0; k < d_dim; ++k) {
          direction[k] = perturb_rng.bernoulli(hyper.q) ? 1.0 : 0.0;
          ones += direction[k];
        }
      } while (ones == 0.0);
    }

    // Common random numbers: both rollouts replay the same substream.
    const RngStream iter_stream = env_root.fork(static_cast<std::uint64_t>(n));
    auto rollout = [&](double sign) {
      for (std::size_t k = 0; k < d_dim; ++k) coord(k) += sign * hyper.sigma * direction[k];
      SigmoidPolicy policy(params);
      RngStream rng = iter_stream;
      SystemState s = initial_state(cfg, rng);
      long long total = 0;
      for (int t = 0; t < t_steps; ++t) {
        const Action a = policy.decide(s, rng);
        const StepResult res = step(s, a, cfg, rng);
        total += res.cost;
        out.trace.append(res.cost);
        s = res.next;
      }
      for (std::size_t k = 0; k < d_dim; ++k) coord(k) -= sign * hyper.sigma * direction[k];
      return static_cast<double>(total) / static_cast<double>(t_steps);
    };
    const double j_plus = rollout(+1.0);
    const double j_minus = rollout(-1.0);

    if (d_dim > 0) {
      const auto grad = fdpg_gradient_estimate(direction, j_plus, j_minus, hyper.sigma);
      const double gamma_n = hyper.y / std::pow(static_cast<double>(n) + 1.0, hyper.z);
      for (std::size_t k = 0; k < d_dim; ++k) coord(k) -= gamma_n * grad[k];

      for (std::size_t k = 0; k < d_dim; ++k) {
        if (std::abs(coord(k)) > 10.0 * cfg.delta_max) diverged = true;
        coord(k) = std::clamp(coord(k), 1.0, static_cast<double>(cfg.delta_max) + 1.0);
      }
      if (variant == ThresholdVariant::Double) {
        for (std::size_t c : cells) {
          if (params.theta_n[c] > params.theta_x[c]) {
            const double mid = (params.theta_n[c] + params.theta_x[c]) / 2.0;
            params.theta_n[c] = mid;
            params.theta_x[c] = mid;
          }
        }
      }
    }
    params.tau *= hyper.zeta;
  }

  if (diverged) out.trace.notes.push_back("theta exceeded 10*delta_max before clipping");
  out.table = params.to_threshold_table();
  out.params = params;
  out.trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

}  // namespace aoi
