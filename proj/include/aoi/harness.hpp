#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "aoi/config.hpp"
#include "aoi/learners/dqn.hpp"
#include "aoi/learners/fdpg.hpp"
#include "aoi/learners/gr.hpp"
#include "aoi/planner.hpp"
#include "aoi/policies.hpp"
#include "aoi/structure.hpp"
#include "aoi/trace.hpp"

namespace aoi {

enum class Algo { Rvi, Pi, Greedy, Gr, FdpgSingle, FdpgDouble, Dqn };

inline const char* algo_name(Algo a) {
  switch (a) {
    case Algo::Rvi: return "rvi";
    case Algo::Pi: return "pi";
    case Algo::Greedy: return "greedy";
    case Algo::Gr: return "gr";
    case Algo::FdpgSingle: return "fdpg-single";
    case Algo::FdpgDouble: return "fdpg-double";
    case Algo::Dqn: return "dqn";
  }
  throw std::logic_error("invalid algorithm");
}

inline Algo algo_from_name(const std::string& name) {
  for (Algo a : {Algo::Rvi, Algo::Pi, Algo::Greedy, Algo::Gr, Algo::FdpgSingle, Algo::FdpgDouble, Algo::Dqn})
    if (name == algo_name(a)) return a;
  throw std::invalid_argument("unknown algorithm: " + name);
}

struct Scenario {
  std::string name;
  LabConfig config;
  Algo algo = Algo::Rvi;
  int runs = 100;
  long horizon = 20000;  // environment-step budget per run
  std::uint64_t seed_base = 1;

  void validate() const {
    if (name.empty()) throw std::invalid_argument("scenario name is empty");
    if (runs < 1) throw std::invalid_argument("run count must be at least 1");
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    config.env.validate();
  }
};

inline const char* kSummaryCsvHeader =
    "scenario,algorithm,runs,horizon,mean_final_avg,stderr_final_avg,mean_tail_avg,stderr_tail_avg,exact_gain";

struct RunSummary {
  std::string scenario;
  std::string algorithm;
  int runs = 0;
  long horizon = 0;
  double mean_final_avg = 0.0;
  double stderr_final_avg = 0.0;
  double mean_tail_avg = 0.0;
  double stderr_tail_avg = 0.0;
  std::optional<double> exact_gain;
  bool partial = false;

  std::string csv_row() const {
    std::ostringstream out;
    out << scenario << ',' << algorithm << ',' << runs << ',' << horizon << ','
        << format_double(mean_final_avg) << ',' << format_double(stderr_final_avg) << ','
        << format_double(mean_tail_avg) << ',' << format_double(stderr_tail_avg) << ','
        << (exact_gain ? format_double(*exact_gain) : std::string());
    return out.str();
  }
};

struct ScenarioResult {
  std::vector<RunTrace> traces;
  RunSummary summary;
  std::optional<TabularPolicy> policy;   // solved policy for rvi/pi
  std::optional<ValueTables> values;     // value tables for rvi
  std::vector<std::string> errors;
};

namespace detail {

inline int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs `count` jobs on up to `workers` threads. Results land in submission
/// order, so output never depends on scheduling.
inline void parallel_for(int count, int workers, const std::function<void(int)>& job) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) job(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline RunTrace simulate_policy(const DecisionPolicy& policy, const EnvConfig& cfg, long horizon,
                                std::uint64_t seed, const std::string& algorithm) {
  RunTrace trace;
  trace.seed = seed;
  trace.algorithm = algorithm;
  RngStream rng = RngStream(seed).fork(stream_tag::environment);
  RngStream decision_rng = RngStream(seed).fork(stream_tag::exploration);
  SystemState s = initial_state(cfg, rng);
  for (long t = 0; t < horizon; ++t) {
    const Action a = policy.decide(s, decision_rng);
    const StepResult res = step(s, a, cfg, rng);
    trace.append(res.cost);
    s = res.next;
  }
  return trace;
}

inline void summarize(ScenarioResult& result, const Scenario& sc) {
  auto& sm = result.summary;
  sm.scenario = sc.name;
  sm.algorithm = algo_name(sc.algo);
  sm.runs = static_cast<int>(result.traces.size());
  sm.horizon = sc.horizon;
  const auto n = static_cast<double>(result.traces.size());
  double mean_f = 0.0, mean_t = 0.0;
  for (const auto& tr : result.traces) {
    mean_f += tr.final_running_avg();
    mean_t += tr.tail_avg();
  }
  mean_f /= n;
  mean_t /= n;
  double var_f = 0.0, var_t = 0.0;
  for (const auto& tr : result.traces) {
    var_f += (tr.final_running_avg() - mean_f) * (tr.final_running_avg() - mean_f);
    var_t += (tr.tail_avg() - mean_t) * (tr.tail_avg() - mean_t);
  }
  sm.mean_final_avg = mean_f;
  sm.mean_tail_avg = mean_t;
  if (result.traces.size() > 1) {
    sm.stderr_final_avg = std::sqrt(var_f / (n - 1.0) / n);
    sm.stderr_tail_avg = std::sqrt(var_t / (n - 1.0) / n);
  }
}

}  // namespace detail

/// Executes the scenario's independent seeded runs (run i uses seed_base + i)
/// and aggregates the final running averages. Planner algorithms solve once,
/// record the exact gain, and simulate the solved policy per run.
inline ScenarioResult run_scenario(const Scenario& sc, int workers = 0) {
  sc.validate();
  if (workers <= 0) workers = detail::default_workers();
  const EnvConfig& env = sc.config.env;

  ScenarioResult result;
  result.traces.resize(static_cast<std::size_t>(sc.runs));
  std::vector<std::string> run_errors(static_cast<std::size_t>(sc.runs));

  std::shared_ptr<const StateSpace> space;
  std::shared_ptr<const TabularPolicy> solved;
  if (sc.algo == Algo::Rvi || sc.algo == Algo::Pi) {
    space = std::make_shared<StateSpace>(env);
    if (sc.algo == Algo::Rvi) {
      auto rvi = rvi_solve(env, RviOptions{.tol = 1e-8});
      result.summary.exact_gain = rvi.values.gain;
      result.values = std::move(rvi.values);
      solved = std::make_shared<TabularPolicy>(std::move(rvi.policy));
    } else {
      auto pi = policy_iteration_solve(env);
      result.summary.exact_gain = pi.gain;
      solved = std::make_shared<TabularPolicy>(std::move(pi.policy));
    }
    result.policy = *solved;
  }

  detail::parallel_for(sc.runs, workers, [&](int i) {
    const std::uint64_t seed = sc.seed_base + static_cast<std::uint64_t>(i);
    try {
      RunTrace trace;
      switch (sc.algo) {
        case Algo::Rvi:
        case Algo::Pi: {
          TabularPolicyView view(*space, *solved);
          trace = detail::simulate_policy(view, env, sc.horizon, seed, algo_name(sc.algo));
          break;
        }
        case Algo::Greedy: {
          GreedyPolicy greedy(env);
          trace = detail::simulate_policy(greedy, env, sc.horizon, seed, "greedy");
          break;
        }
        case Algo::Gr: {
          trace = gr_learn(env, sc.horizon, seed, sc.config.gr).trace;
          break;
        }
        case Algo::FdpgSingle:
        case Algo::FdpgDouble: {
          const auto variant = sc.algo == Algo::FdpgSingle ? ThresholdVariant::Single : ThresholdVariant::Double;
          const long per_iter = 2L * sc.config.fdpg.horizon;
          const long iterations = per_iter > 0 ? std::max(1L, sc.horizon / per_iter) : 1;
          trace = fdpg_learn(env, iterations, seed, sc.config.fdpg, variant).trace;
          break;
        }
        case Algo::Dqn: {
          const long per_episode = sc.config.dqn.episode_length;
          const int episodes = per_episode > 0 ? static_cast<int>(std::max(1L, sc.horizon / per_episode)) : 1;
          trace = dqn_learn(env, episodes, seed, sc.config.dqn).trace;
          break;
        }
      }
      trace.scenario = sc.name;
      result.traces[static_cast<std::size_t>(i)] = std::move(trace);
    } catch (const std::exception& ex) {
      run_errors[static_cast<std::size_t>(i)] = ex.what();
    }
  });

  for (std::size_t i = 0; i < run_errors.size(); ++i) {
    if (!run_errors[i].empty()) {
      result.errors.push_back("run " + std::to_string(i) + ": " + run_errors[i]);
      result.summary.partial = true;
    }
  }
  if (result.summary.partial) {
    std::erase_if(result.traces, [](const RunTrace& t) { return t.inst.empty(); });
    if (result.traces.empty()) {
      result.summary.scenario = sc.name;
      result.summary.algorithm = algo_name(sc.algo);
      return result;
    }
  }
  detail::summarize(result, sc);
  return result;
}

// ---------------------------------------------------------------------------
// Parameter sweeps
// ---------------------------------------------------------------------------

enum class SweepParam { Pe, BMax, Es, Rho };

inline const char* sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::Pe: return "pe";
    case SweepParam::BMax: return "b_max";
    case SweepParam::Es: return "e_s";
    case SweepParam::Rho: return "rho";
  }
  throw std::logic_error("invalid sweep parameter");
}

inline SweepParam sweep_param_from_name(const std::string& name) {
  for (SweepParam p : {SweepParam::Pe, SweepParam::BMax, SweepParam::Es, SweepParam::Rho})
    if (name == sweep_param_name(p)) return p;
  throw std::invalid_argument("unknown sweep parameter: " + name);
}

struct SweepSpec {
  SweepParam param = SweepParam::Pe;
  std::vector<double> values;
  Scenario base;

  void validate() const {
    base.validate();
    if (values.empty()) throw std::invalid_argument("sweep has no values");
    for (double v : values) {
      switch (param) {
        case SweepParam::Pe:
          if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("pe must lie in (0,1)");
          break;
        case SweepParam::BMax:
          if (v < 1.0 || v != std::floor(v)) throw std::invalid_argument("b_max values must be positive integers");
          break;
        case SweepParam::Es:
          if (v < 0.0 || v != std::floor(v)) throw std::invalid_argument("e_s values must be non-negative integers");
          break;
        case SweepParam::Rho:
          if (!(v >= 0.0 && v < 1.0)) throw std::invalid_argument("rho must lie in [0,1)");
          break;
      }
    }
  }
};

inline EnvConfig apply_sweep_value(EnvConfig env, SweepParam param, double value) {
  switch (param) {
    case SweepParam::Pe: env.eh = EhChain::iid(value); break;
    case SweepParam::BMax: env.b_max = static_cast<int>(value); break;
    case SweepParam::Es: env.e_s = static_cast<int>(value); break;
    case SweepParam::Rho: env.eh = EhChain::symmetric2(value); break;
  }
  return env;
}

inline const char* kSweepCsvHeader = "param,value,mean_aoi,stderr";

struct SweepResult {
  SweepParam param;
  struct Row {
    double value;
    double mean;
    double stderr_;
  };
  std::vector<Row> rows;
  // Expected direction from the model: AoI non-increasing in pe and b_max,
  // non-decreasing in e_s and rho.
  bool monotone_ok = true;

  std::string csv() const {
    std::ostringstream out;
    out << kSweepCsvHeader << "\n";
    for (const auto& r : rows)
      out << sweep_param_name(param) << ',' << format_double(r.value) << ',' << format_double(r.mean) << ','
          << format_double(r.stderr_) << "\n";
    return out.str();
  }
};

/// One scenario per swept value; the summary metric is the exact gain for
/// planner algorithms and the mean final running average otherwise.
inline SweepResult run_sweep(const SweepSpec& sw, int workers = 0) {
  sw.validate();
  SweepResult out;
  out.param = sw.param;
  for (double v : sw.values) {
    Scenario sc = sw.base;
    sc.name = sw.base.name + "_" + sweep_param_name(sw.param) + "=" + format_double(v);
    sc.config.env = apply_sweep_value(sw.base.config.env, sw.param, v);
    const ScenarioResult res = run_scenario(sc, workers);
    if (res.summary.partial) throw std::runtime_error("sweep value " + format_double(v) + " had failing runs");
    const double mean = res.summary.exact_gain ? *res.summary.exact_gain : res.summary.mean_final_avg;
    const double se = res.summary.exact_gain ? 0.0 : res.summary.stderr_final_avg;
    out.rows.push_back({v, mean, se});
  }
  const bool expect_decreasing = sw.param == SweepParam::Pe || sw.param == SweepParam::BMax;
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    const double d = out.rows[i].mean - out.rows[i - 1].mean;
    if (expect_decreasing ? d > 1e-9 : d < -1e-9) out.monotone_ok = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Policy heat-map export
// ---------------------------------------------------------------------------

/// Writes one grid file per (e, delta_tx, r) slice of a solved-policy CSV:
/// rows are battery levels, columns receiver AoI from delta_tx to delta_max,
/// cells the integer action code (0=i, 1=n, 2=x). By default only the
/// delta_tx = r+1 slices are emitted, the layout of the policy figures.
inline std::vector<std::string> export_policy_heatmap(const std::string& policy_csv_path, const EnvConfig& cfg,
                                                      const std::string& out_dir, bool all_slices = false) {
  StateSpace space(cfg);
  const TabularPolicy policy = parse_policy_csv(read_lines(policy_csv_path), space);
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  for (int e = 0; e < cfg.energy_states(); ++e) {
    for (int r = 0; r <= cfg.harq.r_max; ++r) {
      for (int dtx = 1; dtx <= cfg.delta_max; ++dtx) {
        if (!all_slices && dtx != std::min(r + 1, cfg.delta_max)) continue;
        std::ostringstream grid;
        grid << "b";
        for (int drx = dtx; drx <= cfg.delta_max; ++drx) grid << ",drx_" << drx;
        grid << "\n";
        for (int b = 0; b <= cfg.b_max; ++b) {
          grid << b;
          for (int drx = dtx; drx <= cfg.delta_max; ++drx)
            grid << ',' << action_code(policy.at(space.index_of(SystemState{e, b, drx, dtx, r})));
          grid << "\n";
        }
        const std::string name = "heatmap_e" + std::to_string(e) + "_dtx" + std::to_string(dtx) + "_r" +
                                 std::to_string(r) + ".csv";
        write_file((std::filesystem::path(out_dir) / name).string(), grid.str());
        written.push_back(name);
      }
    }
  }
  return written;
}

// ---------------------------------------------------------------------------
// Output plumbing shared by the CLI
// ---------------------------------------------------------------------------

inline void write_traces_csv(const std::vector<RunTrace>& traces, const std::string& path) {
  std::ostringstream out;
  out << kTraceCsvHeader << "\n";
  for (const auto& tr : traces) tr.write_csv(out, false);
  write_file(path, out.str());
}

inline void write_summary_csv(const std::vector<RunSummary>& summaries, const std::string& path) {
  std::ostringstream out;
  out << kSummaryCsvHeader << "\n";
  for (const auto& sm : summaries) out << sm.csv_row() << "\n";
  write_file(path, out.str());
}

}  // namespace aoi
