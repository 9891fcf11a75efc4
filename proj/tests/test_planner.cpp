#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "aoi/planner.hpp"
#include "aoi/policies.hpp"

using namespace aoi;

namespace {

EnvConfig no_energy_cfg() {
  EnvConfig cfg;
  cfg.eh.p = {{1.0, 0.0}, {1.0, 0.0}};
  return cfg;
}

// Small instance kept under the direct-solve limit: |S| = 2*3*10*2 = 120.
EnvConfig tiny_cfg() {
  EnvConfig cfg;
  cfg.b_max = 2;
  cfg.delta_max = 4;
  cfg.harq.r_max = 1;
  cfg.harq.g_table = {0.5, 0.25};
  return cfg;
}

TabularPolicy greedy_policy(const StateSpace& space) {
  TabularPolicy p;
  p.action.resize(static_cast<std::size_t>(space.size()));
  for (std::int64_t i = 0; i < space.size(); ++i)
    p.action[static_cast<std::size_t>(i)] = greedy_action(space.state_at(i), space.config());
  return p;
}

double simulate_gain(const TabularPolicy& policy, const EnvConfig& cfg, long steps, std::uint64_t seed) {
  StateSpace space(cfg);
  RngStream rng(seed);
  SystemState s = initial_state(cfg, rng);
  long long total = 0;
  for (long t = 0; t < steps; ++t) {
    const auto res = step(s, policy.at(space.index_of(s)), cfg, rng);
    total += res.cost;
    s = res.next;
  }
  return static_cast<double>(total) / static_cast<double>(steps);
}

}  // namespace

TEST(Rvi, NoEnergyGainIsDeltaMaxAndTrajectoryIdles) {
  const EnvConfig cfg = no_energy_cfg();
  const auto res = rvi_solve(cfg, RviOptions{.tol = 1e-9});
  ASSERT_TRUE(res.values.converged);
  EXPECT_NEAR(res.values.gain, 40.0, 1e-6);
  // From the empty-battery start the only feasible action is idle forever.
  StateSpace space(cfg);
  RngStream rng(1);
  SystemState s = initial_state(cfg, rng);
  for (int t = 0; t < 200; ++t) {
    EXPECT_EQ(res.policy.at(space.index_of(s)), Action::Idle);
    s = step(s, Action::Idle, cfg, rng).next;
  }
}

TEST(Rvi, AgreesWithPolicyIterationOnTinyConfig) {
  const EnvConfig cfg = tiny_cfg();
  const auto rvi = rvi_solve(cfg, RviOptions{.tol = 1e-11});
  const auto pi = policy_iteration_solve(cfg);
  EXPECT_FALSE(pi.cycle_warning);
  EXPECT_NEAR(rvi.values.gain, pi.gain, 1e-6);
}

TEST(Rvi, BellmanResidualAtConvergence) {
  const EnvConfig cfg = tiny_cfg();
  const double tol = 1e-10;
  const auto res = rvi_solve(cfg, RviOptions{.tol = tol});
  ASSERT_TRUE(res.values.converged);
  double worst = 0.0;
  for (std::size_t s = 0; s < res.values.h.size(); ++s) {
    const double v = *std::min_element(res.values.q[s].begin(), res.values.q[s].end());
    worst = std::max(worst, std::abs(v - res.values.h[s] - res.values.gain));
  }
  EXPECT_LT(worst, 10.0 * tol);
  EXPECT_DOUBLE_EQ(res.values.h[static_cast<std::size_t>(res.values.s_ref)], 0.0);
}

TEST(Rvi, GainIndependentOfInitialization) {
  const EnvConfig cfg = tiny_cfg();
  const double tol = 1e-10;
  const auto from_zero = rvi_solve(cfg, RviOptions{.tol = tol});

  StateSpace space(cfg);
  RngStream rng(99);
  std::vector<double> h0(static_cast<std::size_t>(space.size()));
  for (double& v : h0) v = 20.0 * rng.uniform() - 10.0;
  RviOptions opts{.tol = tol};
  opts.h0 = &h0;
  const auto from_random = rvi_solve(cfg, opts);

  EXPECT_NEAR(from_zero.values.gain, from_random.values.gain, 10.0 * tol);
}

TEST(Rvi, TieBreakPrefersCheaperAction) {
  const std::array<double, 3> tied{1.0, 1.0, 1.0};
  EXPECT_EQ(argmin_preferred(tied), Action::Idle);
  const std::array<double, 3> nx_tied{2.0, 1.0, 1.0};
  EXPECT_EQ(argmin_preferred(nx_tied), Action::Retransmit);
  const std::array<double, 3> masked{kInfeasibleQ, 3.0, kInfeasibleQ};
  EXPECT_EQ(argmin_preferred(masked), Action::NewUpdate);
}

TEST(Rvi, NonConvergenceReportsLastTables) {
  const EnvConfig cfg = tiny_cfg();
  const auto res = rvi_solve(cfg, RviOptions{.tol = 1e-12, .max_iter = 3});
  EXPECT_FALSE(res.values.converged);
  EXPECT_EQ(res.values.iterations, 3);
  EXPECT_EQ(res.values.h.size(), static_cast<std::size_t>(StateSpace(cfg).size()));
}

TEST(Rvi, SimulatedGainMatchesExactOnTinyConfig) {
  const EnvConfig cfg = tiny_cfg();
  const auto res = rvi_solve(cfg, RviOptions{.tol = 1e-10});
  const double sim = simulate_gain(res.policy, cfg, 2000000, 7);
  EXPECT_NEAR(sim, res.values.gain, 0.02);
}

TEST(PolicyIteration, NoEnergyGainIsDeltaMax) {
  const auto pi = policy_iteration_solve(no_energy_cfg());
  EXPECT_NEAR(pi.gain, 40.0, 1e-8);
}

TEST(PolicyIteration, TerminalPolicyIsBellmanGreedy) {
  const EnvConfig cfg = tiny_cfg();
  const auto pi = policy_iteration_solve(cfg);
  StateSpace space(cfg);
  TransitionKernel kernel(space);
  const auto eval = evaluate_policy_exact(pi.policy, cfg);
  double worst = 0.0;
  for (std::int64_t s = 0; s < space.size(); ++s) {
    const auto q = action_values(kernel, s, eval.h);
    const double best = *std::min_element(q.begin(), q.end());
    const double chosen = q[static_cast<std::size_t>(action_code(pi.policy.at(s)))];
    worst = std::max(worst, chosen - best);
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(EvaluatePolicy, GreedyNoEnergyGainIsDeltaMax) {
  const EnvConfig cfg = no_energy_cfg();
  StateSpace space(cfg);
  const auto eval = evaluate_policy_exact(greedy_policy(space), cfg);
  EXPECT_NEAR(eval.gain, 40.0, 1e-8);
}

TEST(EvaluatePolicy, GainInvariantToReferenceState) {
  const EnvConfig cfg = tiny_cfg();
  StateSpace space(cfg);
  const auto policy = greedy_policy(space);
  EvalOptions a;
  a.s_ref = SystemState{0, 0, 1, 1, 0};
  EvalOptions b;
  b.s_ref = SystemState{1, 2, 4, 2, 1};
  const auto ea = evaluate_policy_exact(policy, cfg, a);
  const auto eb = evaluate_policy_exact(policy, cfg, b);
  EXPECT_NEAR(ea.gain, eb.gain, 1e-9);
  EXPECT_TRUE(ea.direct);
}

TEST(EvaluatePolicy, DirectAndIterativeAgree) {
  const EnvConfig cfg = tiny_cfg();
  StateSpace space(cfg);
  const auto policy = greedy_policy(space);
  EvalOptions direct;
  const auto ed = evaluate_policy_exact(policy, cfg, direct);
  EvalOptions iterative;
  iterative.direct_solve_limit = 0;
  const auto ei = evaluate_policy_exact(policy, cfg, iterative);
  EXPECT_TRUE(ed.direct);
  EXPECT_FALSE(ei.direct);
  EXPECT_NEAR(ed.gain, ei.gain, 1e-7);
  EXPECT_LT(ed.residual, 1e-9);
  EXPECT_LT(ei.residual, 1e-7);
}

TEST(EvaluatePolicy, GreedyGainMatchesSimulationOnDefaultConfig) {
  const EnvConfig cfg;
  StateSpace space(cfg);
  const auto policy = greedy_policy(space);
  const auto eval = evaluate_policy_exact(policy, cfg);
  EXPECT_FALSE(eval.direct);  // 39360 states, above the direct-solve limit
  const double sim = simulate_gain(policy, cfg, 1000000, 3);
  EXPECT_NEAR(sim, eval.gain, 0.05);
}

TEST(EvaluatePolicy, RejectsInfeasiblePolicy) {
  const EnvConfig cfg = tiny_cfg();
  StateSpace space(cfg);
  auto policy = TabularPolicy::uniform(space, Action::NewUpdate);
  EXPECT_THROW(evaluate_policy_exact(policy, cfg), std::domain_error);
}

// Exact gain responds monotonically to the model parameters: non-increasing
// in pe and b_max, non-decreasing in e_s.
TEST(GainMonotonicity, ThreePointSweeps) {
  EnvConfig base = tiny_cfg();
  double prev = std::numeric_limits<double>::infinity();
  for (double pe : {0.3, 0.5, 0.7}) {
    EnvConfig cfg = base;
    cfg.eh = EhChain::iid(pe);
    const double j = rvi_solve(cfg, RviOptions{.tol = 1e-9}).values.gain;
    EXPECT_LT(j, prev);
    prev = j;
  }
  prev = std::numeric_limits<double>::infinity();
  for (int bmax : {2, 3, 4}) {
    EnvConfig cfg = base;
    cfg.b_max = bmax;
    const double j = rvi_solve(cfg, RviOptions{.tol = 1e-9}).values.gain;
    EXPECT_LE(j, prev + 1e-9);
    prev = j;
  }
  prev = -std::numeric_limits<double>::infinity();
  for (int es : {0, 1, 2}) {
    EnvConfig cfg = base;
    cfg.b_max = 3;  // keep n feasible at e_s = 2
    cfg.e_s = es;
    const double j = rvi_solve(cfg, RviOptions{.tol = 1e-9}).values.gain;
    EXPECT_GE(j, prev - 1e-9);
    prev = j;
  }
}

TEST(PolicyCsv, RoundTripAndErrors) {
  const EnvConfig cfg = tiny_cfg();
  StateSpace space(cfg);
  const auto res = rvi_solve(cfg, RviOptions{.tol = 1e-9});
  const std::string csv = policy_csv(space, res.policy, &res.values);

  std::vector<std::string> lines;
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), static_cast<std::size_t>(space.size()) + 1);

  const auto parsed = parse_policy_csv(lines, space);
  for (std::int64_t i = 0; i < space.size(); ++i) EXPECT_EQ(parsed.at(i), res.policy.at(i));

  auto broken = lines;
  broken[5] = "0,0,not-a-number,1,0,i,0,,,";
  try {
    parse_policy_csv(broken, space);
    FAIL() << "expected parse error";
  } catch (const std::invalid_argument& ex) {
    EXPECT_NE(std::string(ex.what()).find("line 6"), std::string::npos);
  }
}
