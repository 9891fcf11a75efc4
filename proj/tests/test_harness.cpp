#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "aoi/harness.hpp"
#include "aoi/presets.hpp"

using namespace aoi;
namespace fs = std::filesystem;

namespace {

EnvConfig no_energy_cfg() {
  EnvConfig cfg;
  cfg.eh.p = {{1.0, 0.0}, {1.0, 0.0}};
  return cfg;
}

EnvConfig tiny_cfg() {
  EnvConfig cfg;
  cfg.b_max = 2;
  cfg.delta_max = 4;
  cfg.harq.r_max = 1;
  cfg.harq.g_table = {0.5, 0.25};
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST(RunTrace, RunningAverageRecomputesFromInstColumn) {
  RunTrace tr;
  RngStream rng(4);
  long long sum = 0;
  for (int t = 1; t <= 1000; ++t) {
    const int aoi = 1 + static_cast<int>(rng.uniform_int(40));
    tr.append(aoi);
    sum += aoi;
    ASSERT_NEAR(tr.running_avg.back(), static_cast<double>(sum) / t, 1e-9);
  }
  EXPECT_NEAR(tr.tail_avg(1.0), tr.final_running_avg(), 1e-9);
}

TEST(RunScenario, GreedyNoEnergySaturates) {
  Scenario sc;
  sc.name = "degenerate";
  sc.config.env = no_energy_cfg();
  sc.algo = Algo::Greedy;
  sc.runs = 3;
  sc.horizon = 4000;
  const auto res = run_scenario(sc, 2);
  EXPECT_NEAR(res.summary.mean_final_avg, 40.0, 0.4);
  EXPECT_DOUBLE_EQ(res.summary.stderr_final_avg, 0.0);  // fully deterministic
  EXPECT_FALSE(res.summary.partial);
}

TEST(RunScenario, DeterministicAcrossWorkerCounts) {
  Scenario sc;
  sc.name = "det";
  sc.config.env = tiny_cfg();
  sc.algo = Algo::Gr;
  sc.runs = 6;
  sc.horizon = 2000;
  sc.seed_base = 50;
  const auto a = run_scenario(sc, 1);
  const auto b = run_scenario(sc, 2);
  ASSERT_EQ(a.traces.size(), b.traces.size());
  for (std::size_t i = 0; i < a.traces.size(); ++i) {
    EXPECT_EQ(a.traces[i].seed, b.traces[i].seed);
    EXPECT_EQ(a.traces[i].inst, b.traces[i].inst);
  }
  EXPECT_EQ(a.summary.csv_row(), b.summary.csv_row());
}

TEST(RunScenario, SummaryRecomputesFromTraces) {
  Scenario sc;
  sc.name = "recompute";
  sc.config.env = tiny_cfg();
  sc.algo = Algo::Greedy;
  sc.runs = 8;
  sc.horizon = 1500;
  const auto res = run_scenario(sc, 2);
  double mean = 0.0;
  for (const auto& tr : res.traces) mean += tr.final_running_avg();
  mean /= static_cast<double>(res.traces.size());
  EXPECT_NEAR(res.summary.mean_final_avg, mean, 1e-12);
}

TEST(RunScenario, FailingRunsLeavePartialMarker) {
  Scenario sc;
  sc.name = "broken";
  sc.config.env = tiny_cfg();
  sc.config.fdpg.horizon = 0;  // rejected by the learner contract
  sc.algo = Algo::FdpgSingle;
  sc.runs = 3;
  sc.horizon = 400;
  const auto res = run_scenario(sc, 2);
  EXPECT_TRUE(res.summary.partial);
  EXPECT_EQ(res.errors.size(), 3u);
  EXPECT_TRUE(res.traces.empty());
}

TEST(RunScenario, RviRecordsExactGain) {
  Scenario sc;
  sc.name = "exact";
  sc.config.env = tiny_cfg();
  sc.algo = Algo::Rvi;
  sc.runs = 2;
  sc.horizon = 20000;
  const auto res = run_scenario(sc, 2);
  ASSERT_TRUE(res.summary.exact_gain.has_value());
  ASSERT_TRUE(res.policy.has_value());
  EXPECT_NEAR(res.summary.mean_final_avg, *res.summary.exact_gain, 0.2);
}

TEST(RunSweep, RhoZeroMatchesIidHalf) {
  Scenario base;
  base.name = "rho";
  base.config.env = tiny_cfg();
  base.algo = Algo::Rvi;
  base.runs = 1;
  base.horizon = 100;
  SweepSpec spec{SweepParam::Rho, {0.0, 0.4, 0.8}, base};
  const auto sweep = run_sweep(spec, 2);
  ASSERT_EQ(sweep.rows.size(), 3u);
  EXPECT_TRUE(sweep.monotone_ok);  // AoI non-decreasing in correlation

  EnvConfig iid = tiny_cfg();
  iid.eh = EhChain::iid(0.5);
  const double j_iid = rvi_solve(iid, RviOptions{.tol = 1e-8}).values.gain;
  EXPECT_NEAR(sweep.rows[0].mean, j_iid, 1e-6);
}

TEST(RunSweep, PeSweepStrictlyDecreasing) {
  Scenario base;
  base.name = "pe";
  base.config.env = tiny_cfg();
  base.algo = Algo::Rvi;
  base.runs = 1;
  base.horizon = 100;
  SweepSpec spec{SweepParam::Pe, {0.3, 0.5, 0.7}, base};
  const auto sweep = run_sweep(spec, 2);
  EXPECT_TRUE(sweep.monotone_ok);
  EXPECT_GT(sweep.rows[0].mean, sweep.rows[1].mean);
  EXPECT_GT(sweep.rows[1].mean, sweep.rows[2].mean);
}

TEST(RunSweep, RejectsIllegalValues) {
  Scenario base;
  base.name = "bad";
  base.config.env = tiny_cfg();
  SweepSpec spec{SweepParam::Pe, {1.5}, base};
  EXPECT_THROW(run_sweep(spec), std::invalid_argument);
}

TEST(Heatmap, AllIdlePolicyGivesZeroGrid) {
  const EnvConfig cfg = tiny_cfg();
  StateSpace space(cfg);
  const fs::path dir = fs::temp_directory_path() / "aoi_heatmap_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto policy_path = (dir / "policy.csv").string();
  write_file(policy_path, policy_csv(space, TabularPolicy::uniform(space, Action::Idle)));

  const auto files = export_policy_heatmap(policy_path, cfg, (dir / "grids").string());
  ASSERT_FALSE(files.empty());
  for (const auto& name : files) {
    const auto lines = read_lines((dir / "grids" / name).string());
    ASSERT_EQ(lines.size(), static_cast<std::size_t>(cfg.b_max) + 2);  // header + b rows
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto fields = split(lines[i], ',');
      for (std::size_t k = 1; k < fields.size(); ++k) ASSERT_EQ(fields[k], "0");
    }
  }
  fs::remove_all(dir);
}

TEST(Heatmap, GridDimensionsMatchSlice) {
  const EnvConfig cfg = tiny_cfg();
  StateSpace space(cfg);
  const fs::path dir = fs::temp_directory_path() / "aoi_heatmap_dims";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto policy_path = (dir / "policy.csv").string();
  write_file(policy_path, policy_csv(space, TabularPolicy::uniform(space, Action::Idle)));
  export_policy_heatmap(policy_path, cfg, (dir / "grids").string(), true);
  // Slice (e=0, delta_tx=3, r=1): columns delta_rx in [3, 4] plus the b label.
  const auto lines = read_lines((dir / "grids" / "heatmap_e0_dtx3_r1.csv").string());
  ASSERT_EQ(split(lines[0], ',').size(), 1u + (4 - 3 + 1));
  ASSERT_EQ(lines.size(), 1u + static_cast<std::size_t>(cfg.b_max + 1));
  fs::remove_all(dir);
}

TEST(Heatmap, MalformedCsvReportsLineNumber) {
  const EnvConfig cfg = tiny_cfg();
  const fs::path dir = fs::temp_directory_path() / "aoi_heatmap_bad";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto policy_path = (dir / "policy.csv").string();
  write_file(policy_path, "e,b,delta_rx,delta_tx,r,action,h,Q_i,Q_n,Q_x\n0,0,zzz,1,0,i,,,,\n");
  try {
    export_policy_heatmap(policy_path, cfg, (dir / "grids").string());
    FAIL() << "expected parse error";
  } catch (const std::invalid_argument& ex) {
    EXPECT_NE(std::string(ex.what()).find("line 2"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Presets, EnvironmentsMatchExperimentSections) {
  const EnvConfig corr = preset_env_correlated();
  EXPECT_DOUBLE_EQ(corr.eh.p[0][0], 0.7);
  EXPECT_DOUBLE_EQ(corr.eh.p[1][1], 0.7);
  const EnvConfig arq = preset_env_arq_correlated();
  for (int r = 0; r <= arq.harq.r_max; ++r) EXPECT_DOUBLE_EQ(arq.harq.error_probability(r), 0.5);
  EXPECT_DOUBLE_EQ(preset_env_iid().eh.p[1][1], 0.5);
}
