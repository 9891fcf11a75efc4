#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "aoi/harness.hpp"

namespace aoi {

/// Scenario presets mirroring the experiment sections: the memoryless-EH
/// default, the temporally correlated EH chain with stay probability 0.7,
/// and the plain-ARQ variant with a flat error curve.
inline EnvConfig preset_env_iid() { return EnvConfig{}; }

inline EnvConfig preset_env_correlated() {
  EnvConfig env;
  env.eh = EhChain::symmetric2(0.4);  // p(1|1) = p(0|0) = 0.7
  return env;
}

inline EnvConfig preset_env_arq_correlated() {
  EnvConfig env = preset_env_correlated();
  env.harq.g_table.assign(static_cast<std::size_t>(env.harq.r_max) + 1, 0.5);
  return env;
}

struct PresetRequest {
  std::string name;
  LabConfig base;
  int runs = 100;
  long horizon = 20000;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int workers = 0;
};

namespace detail {

inline std::filesystem::path preset_dir(const PresetRequest& req) {
  auto dir = std::filesystem::path(req.out_dir) / req.name;
  std::filesystem::create_directories(dir);
  return dir;
}

inline void solve_and_export(const PresetRequest& req, const EnvConfig& env, std::ostream& log) {
  const auto dir = preset_dir(req);
  StateSpace space(env);
  const auto rvi = rvi_solve(env, RviOptions{.tol = 1e-9});
  log << req.name << ": RVI gain " << format_double(rvi.values.gain) << " after " << rvi.values.iterations
      << " iterations\n";
  const auto policy_path = (dir / "policy.csv").string();
  write_file(policy_path, policy_csv(space, rvi.policy, &rvi.values));
  const auto report = verify_threshold_structure(rvi.policy, space);
  log << req.name << ": " << report.summary() << "\n";
  export_policy_heatmap(policy_path, env, (dir / "heatmaps").string());
}

inline std::vector<RunSummary> run_algorithms(const PresetRequest& req, const EnvConfig& env,
                                              const std::vector<Algo>& algos, std::ostream& log) {
  const auto dir = preset_dir(req);
  std::vector<RunSummary> summaries;
  for (Algo algo : algos) {
    Scenario sc;
    sc.name = req.name;
    sc.config = req.base;
    sc.config.env = env;
    sc.algo = algo;
    sc.runs = req.runs;
    sc.horizon = req.horizon;
    sc.seed_base = req.seed;
    const auto res = run_scenario(sc, req.workers);
    for (const auto& err : res.errors) log << req.name << " [" << algo_name(algo) << "] FAILED " << err << "\n";
    write_traces_csv(res.traces, (dir / (std::string("traces_") + algo_name(algo) + ".csv")).string());
    summaries.push_back(res.summary);
    log << req.name << " [" << algo_name(algo) << "]: mean final avg "
        << format_double(res.summary.mean_final_avg)
        << (res.summary.exact_gain ? ", exact gain " + format_double(*res.summary.exact_gain) : std::string())
        << (res.summary.partial ? " (PARTIAL)" : "") << "\n";
  }
  write_summary_csv(summaries, (dir / "summary.csv").string());
  return summaries;
}

inline void sweep_to_file(const PresetRequest& req, const SweepSpec& spec, const std::string& filename,
                          std::ostream& log) {
  const auto res = run_sweep(spec, req.workers);
  write_file((preset_dir(req) / filename).string(), res.csv());
  log << req.name << " sweep " << sweep_param_name(spec.param) << ": monotone "
      << (res.monotone_ok ? "ok" : "VIOLATED") << "\n";
}

}  // namespace detail

inline void run_preset(const PresetRequest& req, std::ostream& log) {
  const std::vector<Algo> learning_algos{Algo::Greedy, Algo::Gr,         Algo::FdpgSingle,
                                         Algo::FdpgDouble, Algo::Dqn, Algo::Rvi};
  if (req.name == "fig2") {
    detail::solve_and_export(req, preset_env_iid(), log);
  } else if (req.name == "fig3") {
    Scenario base;
    base.name = "fig3";
    base.config = req.base;
    base.algo = Algo::Rvi;
    base.runs = 1;
    base.horizon = req.horizon;
    base.seed_base = req.seed;
    SweepSpec pe{SweepParam::Pe, {0.2, 0.4, 0.6, 0.8}, base};
    detail::sweep_to_file(req, pe, "sweep_pe.csv", log);
    SweepSpec bmax{SweepParam::BMax, {2, 5, 10, 30}, base};
    detail::sweep_to_file(req, bmax, "sweep_bmax.csv", log);
    SweepSpec es{SweepParam::Es, {0, 1, 2}, base};
    detail::sweep_to_file(req, es, "sweep_es.csv", log);
    // Finite-battery approximation of the rate-constrained reference point.
    Scenario big = base;
    big.config.env.e_s = 0;
    big.config.env.eh = EhChain::iid(0.2);
    SweepSpec cap{SweepParam::BMax, {30, 60}, big};
    detail::sweep_to_file(req, cap, "sweep_bmax_unconstrained.csv", log);
  } else if (req.name == "fig4") {
    detail::run_algorithms(req, preset_env_iid(), learning_algos, log);
  } else if (req.name == "fig5") {
    detail::solve_and_export(req, preset_env_correlated(), log);
  } else if (req.name == "fig6") {
    detail::run_algorithms(req, preset_env_arq_correlated(), {Algo::FdpgSingle, Algo::FdpgDouble}, log);
  } else if (req.name == "fig7") {
    detail::run_algorithms(req, preset_env_correlated(), learning_algos, log);
  } else if (req.name == "fig8") {
    Scenario base;
    base.name = "fig8";
    base.config = req.base;
    base.runs = req.runs;
    base.horizon = req.horizon;
    base.seed_base = req.seed;
    const std::vector<double> rhos{0.0, 0.2, 0.4, 0.6, 0.8};
    for (Algo algo : {Algo::Rvi, Algo::FdpgSingle, Algo::FdpgDouble, Algo::Greedy}) {
      SweepSpec spec{SweepParam::Rho, rhos, base};
      spec.base.algo = algo;
      detail::sweep_to_file(req, spec, std::string("sweep_rho_") + algo_name(algo) + ".csv", log);
    }
  } else {
    throw std::invalid_argument("unknown preset: " + req.name + " (expected fig2..fig8)");
  }
}

}  // namespace aoi
