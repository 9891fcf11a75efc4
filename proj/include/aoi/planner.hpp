#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/csv.hpp"
#include "aoi/model.hpp"
#include "aoi/state_space.hpp"

namespace aoi {

inline constexpr double kInfeasibleQ = std::numeric_limits<double>::infinity();

/// Flattened enumeration of P(s'|s,a) over the whole state space. Infeasible
/// (s,a) pairs have an empty outcome range.
class TransitionKernel {
 public:
  explicit TransitionKernel(const StateSpace& space) : space_(&space) {
    const auto n = space.size();
    offsets_.assign(static_cast<std::size_t>(n) * 3 + 1, 0);
    cost_.resize(static_cast<std::size_t>(n));
    feasible_.resize(static_cast<std::size_t>(n));
    const EnvConfig& cfg = space.config();
    std::size_t slot = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      const SystemState s = space.state_at(i);
      cost_[static_cast<std::size_t>(i)] = s.delta_rx;
      feasible_[static_cast<std::size_t>(i)] = feasible_actions(s, cfg);
      for (Action a : kAllActions) {
        offsets_[slot] = static_cast<std::int64_t>(next_.size());
        if (feasible_[static_cast<std::size_t>(i)].contains(a)) {
          for (const auto& o : transition_distribution(s, a, cfg)) {
            next_.push_back(static_cast<std::int32_t>(space.index_of(o.next)));
            prob_.push_back(o.prob);
          }
        }
        ++slot;
      }
    }
    offsets_[slot] = static_cast<std::int64_t>(next_.size());
  }

  const StateSpace& space() const { return *space_; }
  double cost(std::int64_t s) const { return cost_[static_cast<std::size_t>(s)]; }
  ActionSet feasible(std::int64_t s) const { return feasible_[static_cast<std::size_t>(s)]; }

  /// Expected h over the one-step distribution of (s, a).
  double expected_value(std::int64_t s, Action a, const std::vector<double>& h) const {
    const std::size_t slot = static_cast<std::size_t>(s) * 3 + static_cast<std::size_t>(action_code(a));
    double acc = 0.0;
    for (std::int64_t k = offsets_[slot]; k < offsets_[slot + 1]; ++k)
      acc += prob_[static_cast<std::size_t>(k)] * h[static_cast<std::size_t>(next_[static_cast<std::size_t>(k)])];
    return acc;
  }

  template <typename F>
  void for_each_outcome(std::int64_t s, Action a, F&& f) const {
    const std::size_t slot = static_cast<std::size_t>(s) * 3 + static_cast<std::size_t>(action_code(a));
    for (std::int64_t k = offsets_[slot]; k < offsets_[slot + 1]; ++k)
      f(next_[static_cast<std::size_t>(k)], prob_[static_cast<std::size_t>(k)]);
  }

 private:
  const StateSpace* space_;
  std::vector<std::int64_t> offsets_;
  std::vector<std::int32_t> next_;
  std::vector<double> prob_;
  std::vector<double> cost_;
  std::vector<ActionSet> feasible_;
};

/// One-step lookahead values Q(s,a) = cost + E[h(s')|a]; infeasible actions
/// are masked with +infinity so array shapes stay uniform.
inline std::array<double, 3> action_values(const TransitionKernel& kernel, std::int64_t s, const std::vector<double>& h) {
  std::array<double, 3> q{kInfeasibleQ, kInfeasibleQ, kInfeasibleQ};
  const ActionSet feas = kernel.feasible(s);
  for (Action a : kAllActions)
    if (feas.contains(a))
      q[static_cast<std::size_t>(action_code(a))] = kernel.cost(s) + kernel.expected_value(s, a, h);
  return q;
}

inline Action argmin_preferred(const std::array<double, 3>& q) {
  Action best = Action::Idle;
  double best_v = std::numeric_limits<double>::infinity();
  for (Action a : kPreferenceOrder) {
    const double v = q[static_cast<std::size_t>(action_code(a))];
    if (v < best_v) {
      best_v = v;
      best = a;
    }
  }
  return best;
}

struct TabularPolicy {
  std::vector<Action> action;

  Action at(std::int64_t s) const { return action[static_cast<std::size_t>(s)]; }

  static TabularPolicy uniform(const StateSpace& space, Action a) {
    return TabularPolicy{std::vector<Action>(static_cast<std::size_t>(space.size()), a)};
  }
};

struct ValueTables {
  double gain = 0.0;
  std::vector<double> h;
  std::vector<std::array<double, 3>> q;
  long iterations = 0;
  double span_residual = 0.0;
  bool converged = false;
  std::int64_t s_ref = 0;
};

inline SystemState default_reference_state() { return SystemState{0, 0, 1, 1, 0}; }

struct RviOptions {
  double tol = 1e-9;
  long max_iter = 100000;
  std::optional<SystemState> s_ref;
  const std::vector<double>* h0 = nullptr;
};

struct RviResult {
  ValueTables values;
  TabularPolicy policy;
};

/// Relative value iteration for the average-cost criterion. Each sweep does
/// the Bellman backup over feasible actions, subtracts the reference-state
/// value, and stops once the span seminorm of the value increments drops
/// below tol. The gain is read at the reference state.
inline RviResult rvi_solve_kernel(const TransitionKernel& kernel, const RviOptions& opts = {}) {
  const StateSpace& space = kernel.space();
  const auto n = static_cast<std::size_t>(space.size());
  const std::int64_t ref = space.index_of(opts.s_ref.value_or(default_reference_state()));

  std::vector<double> h(n, 0.0);
  if (opts.h0) {
    if (opts.h0->size() != n) throw std::invalid_argument("h0 size does not match state space");
    h = *opts.h0;
    const double href = h[static_cast<std::size_t>(ref)];
    for (double& v : h) v -= href;
  }
  std::vector<double> v_prev(n, 0.0);
  std::vector<double> v_next(n, 0.0);
  bool have_prev = false;

  RviResult out;
  out.values.s_ref = ref;
  double span = std::numeric_limits<double>::infinity();
  long iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    for (std::size_t s = 0; s < n; ++s) {
      const auto q = action_values(kernel, static_cast<std::int64_t>(s), h);
      v_next[s] = *std::min_element(q.begin(), q.end());
    }
    if (have_prev) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < n; ++s) {
        const double d = v_next[s] - v_prev[s];
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
      span = hi - lo;
    }
    const double vref = v_next[static_cast<std::size_t>(ref)];
    for (std::size_t s = 0; s < n; ++s) h[s] = v_next[s] - vref;
    std::swap(v_prev, v_next);
    have_prev = true;
    if (span < opts.tol) {
      ++iter;
      break;
    }
  }

  // Final backup from the converged h: tables are mutually consistent and the
  // Bellman residual |min_a Q - h - J| stays within the span tolerance.
  out.values.h = h;
  out.values.q.resize(n);
  out.policy.action.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    out.values.q[s] = action_values(kernel, static_cast<std::int64_t>(s), h);
    out.policy.action[s] = argmin_preferred(out.values.q[s]);
  }
  out.values.gain = *std::min_element(out.values.q[static_cast<std::size_t>(ref)].begin(),
                                      out.values.q[static_cast<std::size_t>(ref)].end());
  out.values.iterations = iter;
  out.values.span_residual = span;
  out.values.converged = span < opts.tol;
  return out;
}

inline RviResult rvi_solve(const EnvConfig& cfg, const RviOptions& opts = {}) {
  StateSpace space(cfg);
  TransitionKernel kernel(space);
  return rvi_solve_kernel(kernel, opts);
}

struct EvalOptions {
  double tol = 1e-10;
  long max_iter = 500000;
  std::optional<SystemState> s_ref;
  std::size_t direct_solve_limit = 5000;
};

struct PolicyEvaluation {
  double gain = 0.0;
  std::vector<double> h;
  double residual = 0.0;
  bool direct = false;
  bool converged = true;
};

namespace detail {

/// Dense solve of the evaluation equations h + J*1 = c + P h, h(ref) = 0.
/// Returns false if the system is numerically singular.
inline bool evaluate_direct(const TransitionKernel& kernel, const TabularPolicy& policy, std::int64_t ref,
                            PolicyEvaluation& out) {
  const auto n = static_cast<std::size_t>(kernel.space().size());
  const std::size_t m = n + 1;  // unknowns: h(0..n-1), J
  std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
  for (std::size_t s = 0; s < n; ++s) {
    a[s][s] += 1.0;
    a[s][n] = 1.0;
    kernel.for_each_outcome(static_cast<std::int64_t>(s), policy.at(static_cast<std::int64_t>(s)),
                            [&](std::int32_t ns, double p) { a[s][static_cast<std::size_t>(ns)] -= p; });
    a[s][m] = kernel.cost(static_cast<std::int64_t>(s));
  }
  a[n][static_cast<std::size_t>(ref)] = 1.0;  // h(ref) = 0
  a[n][m] = 0.0;

  for (std::size_t col = 0; col < m; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < m; ++row)
      if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
    if (std::abs(a[pivot][col]) < 1e-11) return false;
    std::swap(a[col], a[pivot]);
    const double inv = 1.0 / a[col][col];
    for (std::size_t row = 0; row < m; ++row) {
      if (row == col) continue;
      const double f = a[row][col] * inv;
      if (f == 0.0) continue;
      for (std::size_t k = col; k <= m; ++k) a[row][k] -= f * a[col][k];
    }
  }
  out.h.resize(n);
  for (std::size_t s = 0; s < n; ++s) out.h[s] = a[s][m] / a[s][s];
  out.gain = a[n][m] / a[n][n];
  out.direct = true;
  out.converged = true;
  return true;
}

inline void evaluate_iterative(const TransitionKernel& kernel, const TabularPolicy& policy, std::int64_t ref,
                               const EvalOptions& opts, PolicyEvaluation& out) {
  const auto n = static_cast<std::size_t>(kernel.space().size());
  std::vector<double> v(n, 0.0), v2(n, 0.0);
  double lo = 0.0, hi = 0.0;
  long iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    lo = std::numeric_limits<double>::infinity();
    hi = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) {
      double acc = kernel.cost(static_cast<std::int64_t>(s));
      kernel.for_each_outcome(static_cast<std::int64_t>(s), policy.at(static_cast<std::int64_t>(s)),
                              [&](std::int32_t ns, double p) { acc += p * v[static_cast<std::size_t>(ns)]; });
      v2[s] = acc;
      const double d = acc - v[s];
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    const double vref = v2[static_cast<std::size_t>(ref)];
    for (std::size_t s = 0; s < n; ++s) v2[s] -= vref;
    std::swap(v, v2);
    if (hi - lo < opts.tol) {
      ++iter;
      break;
    }
  }
  out.gain = (hi + lo) / 2.0;
  out.h = v;
  out.direct = false;
  out.converged = hi - lo < opts.tol;
}

}  // namespace detail

/// Exact average-cost evaluation of a stationary policy: direct linear solve
/// for small spaces, iterative relative-value evaluation above the limit.
/// The residual reports max_s |h(s) + J - c(s) - P_pi h(s)|.
inline PolicyEvaluation evaluate_policy_exact_kernel(const TransitionKernel& kernel, const TabularPolicy& policy,
                                                     const EvalOptions& opts = {}) {
  const StateSpace& space = kernel.space();
  const auto n = static_cast<std::size_t>(space.size());
  if (policy.action.size() != n) throw std::invalid_argument("policy size does not match state space");
  for (std::size_t s = 0; s < n; ++s)
    if (!kernel.feasible(static_cast<std::int64_t>(s)).contains(policy.at(static_cast<std::int64_t>(s))))
      throw std::domain_error("policy takes an infeasible action at state " +
                              to_string(space.state_at(static_cast<std::int64_t>(s))));
  const std::int64_t ref = space.index_of(opts.s_ref.value_or(default_reference_state()));

  PolicyEvaluation out;
  if (n > opts.direct_solve_limit || !detail::evaluate_direct(kernel, policy, ref, out))
    detail::evaluate_iterative(kernel, policy, ref, opts, out);

  double res = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    double acc = kernel.cost(static_cast<std::int64_t>(s)) - out.gain;
    kernel.for_each_outcome(static_cast<std::int64_t>(s), policy.at(static_cast<std::int64_t>(s)),
                            [&](std::int32_t ns, double p) { acc += p * out.h[static_cast<std::size_t>(ns)]; });
    res = std::max(res, std::abs(acc - out.h[s]));
  }
  out.residual = res;
  return out;
}

inline PolicyEvaluation evaluate_policy_exact(const TabularPolicy& policy, const EnvConfig& cfg,
                                              const EvalOptions& opts = {}) {
  StateSpace space(cfg);
  TransitionKernel kernel(space);
  return evaluate_policy_exact_kernel(kernel, policy, opts);
}

struct PiOptions {
  EvalOptions eval;
  int max_improvements = 1000;
};

struct PiResult {
  double gain = 0.0;
  TabularPolicy policy;
  std::vector<double> h;
  int improvements = 0;
  bool cycle_warning = false;
};

/// Howard policy iteration with exact evaluation, used as an independent
/// oracle for RVI. An action switch requires a strict improvement beyond a
/// small margin; repeated policies are detected and stop the loop.
inline PiResult policy_iteration_solve_kernel(const TransitionKernel& kernel, const PiOptions& opts = {}) {
  const StateSpace& space = kernel.space();
  const auto n = static_cast<std::size_t>(space.size());

  TabularPolicy policy;
  policy.action.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const ActionSet feas = kernel.feasible(static_cast<std::int64_t>(s));
    policy.action[s] = feas.contains(Action::NewUpdate) ? Action::NewUpdate
                       : feas.contains(Action::Retransmit) ? Action::Retransmit
                                                           : Action::Idle;
  }

  auto policy_key = [&](const TabularPolicy& p) {
    std::uint64_t hsh = 1469598103934665603ULL;
    for (Action a : p.action) {
      hsh ^= static_cast<std::uint64_t>(action_code(a));
      hsh *= 1099511628211ULL;
    }
    return hsh;
  };

  PiResult out;
  std::set<std::uint64_t> seen;
  PolicyEvaluation eval;
  for (int round = 0; round < opts.max_improvements; ++round) {
    eval = evaluate_policy_exact_kernel(kernel, policy, opts.eval);
    bool changed = false;
    TabularPolicy improved = policy;
    for (std::size_t s = 0; s < n; ++s) {
      const auto q = action_values(kernel, static_cast<std::int64_t>(s), eval.h);
      const Action best = argmin_preferred(q);
      const double incumbent = q[static_cast<std::size_t>(action_code(policy.action[s]))];
      if (q[static_cast<std::size_t>(action_code(best))] < incumbent - 1e-10) {
        improved.action[s] = best;
        changed = true;
      }
    }
    out.improvements = round + 1;
    if (!changed) break;
    const std::uint64_t key = policy_key(improved);
    if (!seen.insert(key).second) {
      out.cycle_warning = true;
      break;
    }
    policy = improved;
  }
  out.gain = eval.gain;
  out.h = eval.h;
  out.policy = policy;
  return out;
}

inline PiResult policy_iteration_solve(const EnvConfig& cfg, const PiOptions& opts = {}) {
  StateSpace space(cfg);
  TransitionKernel kernel(space);
  return policy_iteration_solve_kernel(kernel, opts);
}

// ---------------------------------------------------------------------------
// Policy / value-table CSV interchange
// ---------------------------------------------------------------------------

inline const char* kPolicyCsvHeader = "e,b,delta_rx,delta_tx,r,action,h,Q_i,Q_n,Q_x";

/// Writes the solved policy and value tables (infeasible Q cells are empty).
inline std::string policy_csv(const StateSpace& space, const TabularPolicy& policy, const ValueTables* values = nullptr) {
  std::ostringstream out;
  out << kPolicyCsvHeader << "\n";
  for (std::int64_t i = 0; i < space.size(); ++i) {
    const SystemState s = space.state_at(i);
    out << s.e << ',' << s.b << ',' << s.delta_rx << ',' << s.delta_tx << ',' << s.r << ','
        << action_symbol(policy.at(i));
    if (values) {
      out << ',' << format_double(values->h[static_cast<std::size_t>(i)]);
      for (Action a : kAllActions) {
        const double q = values->q[static_cast<std::size_t>(i)][static_cast<std::size_t>(action_code(a))];
        out << ',';
        if (std::isfinite(q)) out << format_double(q);
      }
    } else {
      out << ",,,,";
    }
    out << "\n";
  }
  return out.str();
}

/// Parses a policy CSV back into a TabularPolicy over the given space.
/// Reports the offending line number on malformed input.
inline TabularPolicy parse_policy_csv(const std::vector<std::string>& lines, const StateSpace& space) {
  if (lines.empty() || split(lines[0], ',').size() < 6)
    throw std::invalid_argument("policy CSV line 1: missing header");
  TabularPolicy policy = TabularPolicy::uniform(space, Action::Idle);
  std::vector<bool> seen(static_cast<std::size_t>(space.size()), false);
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const std::string ctx = "policy CSV line " + std::to_string(ln + 1);
    const auto fields = split(lines[ln], ',');
    if (fields.size() < 6) throw std::invalid_argument(ctx + ": expected at least 6 fields");
    SystemState s;
    s.e = static_cast<int>(parse_int(fields[0], ctx));
    s.b = static_cast<int>(parse_int(fields[1], ctx));
    s.delta_rx = static_cast<int>(parse_int(fields[2], ctx));
    s.delta_tx = static_cast<int>(parse_int(fields[3], ctx));
    s.r = static_cast<int>(parse_int(fields[4], ctx));
    if (fields[5].size() != 1) throw std::invalid_argument(ctx + ": malformed action field '" + fields[5] + "'");
    std::int64_t idx;
    try {
      idx = space.index_of(s);
    } catch (const std::exception&) {
      throw std::invalid_argument(ctx + ": state outside the configured space");
    }
    policy.action[static_cast<std::size_t>(idx)] = action_from_symbol(fields[5][0]);
    seen[static_cast<std::size_t>(idx)] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i])
      throw std::invalid_argument("policy CSV: missing state " + to_string(space.state_at(static_cast<std::int64_t>(i))));
  return policy;
}

}  // namespace aoi
