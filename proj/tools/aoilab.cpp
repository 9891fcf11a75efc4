// Command-line front end: exact solving, structural verification, policy
// simulation, the three learners, parameter sweeps, and figure presets.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>

#include "aoi/harness.hpp"
#include "aoi/presets.hpp"

namespace fs = std::filesystem;
using namespace aoi;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::uint64_t seed = 1;
  int runs = 100;
  long horizon = 20000;
  std::string out_dir = "out";
  int workers = 0;
};

LabConfig load_or_default(const GlobalOpts& g) {
  if (g.config_path.empty()) return LabConfig{};
  return load_config(g.config_path);
}

fs::path ensure_out_dir(const GlobalOpts& g) {
  fs::create_directories(g.out_dir);
  return g.out_dir;
}

int cmd_solve(const GlobalOpts& g, const std::string& algo, double tol, long max_iter) {
  const LabConfig cfg = load_or_default(g);
  const auto dir = ensure_out_dir(g);
  StateSpace space(cfg.env);
  TabularPolicy policy;
  std::string name;
  if (algo == "rvi") {
    const auto res = rvi_solve(cfg.env, RviOptions{.tol = tol, .max_iter = max_iter});
    if (!res.values.converged)
      std::cerr << "warning: RVI stopped at span " << format_double(res.values.span_residual) << " after "
                << res.values.iterations << " iterations\n";
    std::cout << "gain " << format_double(res.values.gain) << " iterations " << res.values.iterations << "\n";
    write_file((dir / "policy.csv").string(), policy_csv(space, res.policy, &res.values));
  } else if (algo == "pi") {
    const auto res = policy_iteration_solve(cfg.env);
    if (res.cycle_warning) std::cerr << "warning: policy iteration hit a tie cycle; returning current best\n";
    std::cout << "gain " << format_double(res.gain) << " improvements " << res.improvements << "\n";
    write_file((dir / "policy.csv").string(), policy_csv(space, res.policy, nullptr));
  } else {
    throw CLI::ValidationError("--algo must be rvi or pi");
  }
  std::cout << "wrote " << (dir / "policy.csv").string() << "\n";
  return 0;
}

int cmd_verify(const GlobalOpts& g, double tol, double submod_tol) {
  const LabConfig cfg = load_or_default(g);
  const auto dir = ensure_out_dir(g);
  StateSpace space(cfg.env);
  const auto res = rvi_solve(cfg.env, RviOptions{.tol = tol});
  const auto threshold = verify_threshold_structure(res.policy, space);
  const auto submod = verify_submodularity(res.values, cfg.env, submod_tol);
  std::cout << threshold.summary() << "\n" << submod.summary() << "\n";

  std::ostringstream report;
  report << "check,detail\n";
  for (const auto& v : threshold.violations)
    report << "threshold,slice e=" << v.e << " b=" << v.b << " dtx=" << v.delta_tx << " r=" << v.r
           << " transmit_at=" << v.transmit_delta_rx << " idle_at=" << v.idle_delta_rx << "\n";
  for (const auto& v : submod.violations)
    report << "submodularity,state " << to_string(v.at) << " pair " << action_symbol(v.a1) << action_symbol(v.a2)
           << " excess " << format_double(v.excess) << "\n";
  write_file((dir / "verify_report.csv").string(), report.str());
  return (threshold.pass() && submod.pass()) ? 0 : 2;
}

int cmd_simulate(const GlobalOpts& g, const std::string& policy_arg) {
  const LabConfig cfg = load_or_default(g);
  const auto dir = ensure_out_dir(g);

  Scenario sc;
  sc.name = "simulate";
  sc.config = cfg;
  sc.runs = g.runs;
  sc.horizon = g.horizon;
  sc.seed_base = g.seed;

  ScenarioResult result;
  if (policy_arg == "greedy") {
    sc.algo = Algo::Greedy;
    result = run_scenario(sc, g.workers);
  } else {
    // Named policy file: solved-policy CSV or threshold CSV, told apart by header.
    const auto lines = read_lines(policy_arg);
    if (lines.empty()) throw std::runtime_error("empty policy file: " + policy_arg);
    StateSpace space(cfg.env);
    std::unique_ptr<DecisionPolicy> policy;
    std::string label;
    if (split(lines[0], ',').size() == 6 && lines[0].rfind("e,b,delta_tx", 0) == 0) {
      policy = std::make_unique<ThresholdPolicy>(ThresholdTable::from_csv(lines, cfg.env));
      label = "threshold";
    } else {
      policy = std::make_unique<TabularPolicyView>(space, parse_policy_csv(lines, space));
      label = "tabular";
    }
    result.traces.resize(static_cast<std::size_t>(g.runs));
    detail::parallel_for(g.runs, g.workers <= 0 ? detail::default_workers() : g.workers, [&](int i) {
      result.traces[static_cast<std::size_t>(i)] =
          detail::simulate_policy(*policy, cfg.env, g.horizon, g.seed + static_cast<std::uint64_t>(i), label);
      result.traces[static_cast<std::size_t>(i)].scenario = "simulate";
    });
    detail::summarize(result, sc);
    result.summary.algorithm = label;
  }
  for (const auto& err : result.errors) std::cerr << "error: " << err << "\n";
  write_traces_csv(result.traces, (dir / "traces.csv").string());
  write_summary_csv({result.summary}, (dir / "summary.csv").string());
  std::cout << "mean final running avg " << format_double(result.summary.mean_final_avg) << " over "
            << result.summary.runs << " runs\n";
  return result.summary.partial ? 1 : 0;
}

int cmd_learn(const GlobalOpts& g, const std::string& which, const std::string& variant) {
  const LabConfig cfg = load_or_default(g);
  const auto dir = ensure_out_dir(g);

  Scenario sc;
  sc.name = "learn-" + which;
  sc.config = cfg;
  sc.runs = g.runs;
  sc.horizon = g.horizon;
  sc.seed_base = g.seed;
  if (which == "gr") {
    sc.algo = Algo::Gr;
  } else if (which == "fdpg") {
    sc.algo = variant == "double" ? Algo::FdpgDouble : Algo::FdpgSingle;
  } else if (which == "dqn") {
    sc.algo = Algo::Dqn;
  } else {
    throw CLI::ValidationError("learn expects gr, fdpg, or dqn");
  }
  const auto result = run_scenario(sc, g.workers);
  for (const auto& err : result.errors) std::cerr << "error: " << err << "\n";
  write_traces_csv(result.traces, (dir / "traces.csv").string());
  write_summary_csv({result.summary}, (dir / "summary.csv").string());

  // Final artifact of the first seed: a policy or threshold table.
  StateSpace space(cfg.env);
  if (sc.algo == Algo::Gr) {
    const auto res = gr_learn(cfg.env, sc.horizon, sc.seed_base, cfg.gr);
    write_file((dir / "policy.csv").string(), policy_csv(space, res.policy, nullptr));
  } else if (sc.algo == Algo::Dqn) {
    const int episodes = static_cast<int>(std::max(1L, sc.horizon / cfg.dqn.episode_length));
    const auto res = dqn_learn(cfg.env, episodes, sc.seed_base, cfg.dqn);
    write_file((dir / "policy.csv").string(), policy_csv(space, res.policy, nullptr));
  } else {
    const auto v = sc.algo == Algo::FdpgDouble ? ThresholdVariant::Double : ThresholdVariant::Single;
    const long iterations = std::max(1L, sc.horizon / (2L * cfg.fdpg.horizon));
    const auto res = fdpg_learn(cfg.env, iterations, sc.seed_base, cfg.fdpg, v);
    write_file((dir / "thresholds.csv").string(), res.table.to_csv());
  }
  std::cout << "mean final running avg " << format_double(result.summary.mean_final_avg) << " over "
            << result.summary.runs << " runs\n";
  return result.summary.partial ? 1 : 0;
}

int cmd_sweep(const GlobalOpts& g, const std::string& param, const std::string& values_csv, const std::string& algo) {
  const LabConfig cfg = load_or_default(g);
  const auto dir = ensure_out_dir(g);

  SweepSpec spec;
  spec.param = sweep_param_from_name(param);
  for (const auto& tok : split(values_csv, ',')) spec.values.push_back(parse_double(tok, "--values"));
  spec.base.name = "sweep";
  spec.base.config = cfg;
  spec.base.algo = algo_from_name(algo);
  spec.base.runs = g.runs;
  spec.base.horizon = g.horizon;
  spec.base.seed_base = g.seed;
  if (spec.base.algo == Algo::Rvi || spec.base.algo == Algo::Pi) spec.base.runs = 1;

  const auto result = run_sweep(spec, g.workers);
  write_file((dir / "sweep.csv").string(), result.csv());
  std::cout << result.csv();
  std::cout << "monotone trend " << (result.monotone_ok ? "ok" : "violated") << "\n";
  return 0;
}

int cmd_heatmap(const GlobalOpts& g, const std::string& policy_path, bool all_slices) {
  const LabConfig cfg = load_or_default(g);
  const auto dir = ensure_out_dir(g);
  const auto files = export_policy_heatmap(policy_path, cfg.env, (dir / "heatmaps").string(), all_slices);
  std::cout << "wrote " << files.size() << " heat-map grids under " << (dir / "heatmaps").string() << "\n";
  return 0;
}

int cmd_preset(const GlobalOpts& g, const std::string& name) {
  PresetRequest req;
  req.name = name;
  req.base = load_or_default(g);
  req.runs = g.runs;
  req.horizon = g.horizon;
  req.seed = g.seed;
  req.out_dir = g.out_dir;
  req.workers = g.workers;
  run_preset(req, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Average-AoI scheduling lab: exact planning, structural checks, and model-free learners"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "key/value configuration file");
  app.add_option("--seed", g.seed, "base seed; run i uses seed+i");
  app.add_option("--runs", g.runs, "independent runs per scenario");
  app.add_option("--horizon", g.horizon, "environment steps per run");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--workers", g.workers, "parallel workers (0 = all cores)");

  auto* solve = app.add_subcommand("solve", "solve the configured model exactly");
  std::string solve_algo = "rvi";
  double solve_tol = 1e-9;
  long solve_max_iter = 100000;
  solve->add_option("--algo", solve_algo, "rvi or pi");
  solve->add_option("--tol", solve_tol, "span tolerance");
  solve->add_option("--max-iter", solve_max_iter, "iteration cap");

  auto* verify = app.add_subcommand("verify", "check threshold structure and submodularity of the solution");
  double verify_tol = 1e-10;
  double submod_tol = 1e-9;
  verify->add_option("--tol", verify_tol, "RVI span tolerance");
  verify->add_option("--submod-tol", submod_tol, "submodularity tolerance");

  auto* simulate = app.add_subcommand("simulate", "simulate a named policy");
  std::string sim_policy = "greedy";
  simulate->add_option("--policy", sim_policy, "greedy, a policy CSV path, or a threshold CSV path");

  auto* learn = app.add_subcommand("learn", "run a model-free learner");
  std::string learn_algo;
  std::string learn_variant = "single";
  learn->add_option("algorithm", learn_algo, "gr, fdpg, or dqn")->required();
  learn->add_option("--variant", learn_variant, "fdpg threshold variant: single or double");

  auto* sweep = app.add_subcommand("sweep", "sweep one model parameter");
  std::string sweep_param = "pe";
  std::string sweep_values = "0.3,0.5,0.7";
  std::string sweep_algo = "rvi";
  sweep->add_option("--param", sweep_param, "pe, b_max, e_s, or rho");
  sweep->add_option("--values", sweep_values, "comma-separated values");
  sweep->add_option("--algo", sweep_algo, "algorithm to evaluate");

  auto* heatmap = app.add_subcommand("heatmap", "export policy heat-map grids from a policy CSV");
  std::string heatmap_policy;
  bool heatmap_all = false;
  heatmap->add_option("policy", heatmap_policy, "solved policy CSV")->required();
  heatmap->add_flag("--all-slices", heatmap_all, "emit every (e, delta_tx, r) slice");

  auto* preset = app.add_subcommand("preset", "run a bundled experiment preset");
  std::string preset_name;
  preset->add_option("name", preset_name, "fig2..fig8")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(g, solve_algo, solve_tol, solve_max_iter);
    if (verify->parsed()) return cmd_verify(g, verify_tol, submod_tol);
    if (simulate->parsed()) return cmd_simulate(g, sim_policy);
    if (learn->parsed()) return cmd_learn(g, learn_algo, learn_variant);
    if (sweep->parsed()) return cmd_sweep(g, sweep_param, sweep_values, sweep_algo);
    if (heatmap->parsed()) return cmd_heatmap(g, heatmap_policy, heatmap_all);
    if (preset->parsed()) return cmd_preset(g, preset_name);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
