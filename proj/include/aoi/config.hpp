#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoi/csv.hpp"

namespace aoi {

/// HARQ decoding-error curve g(r): probability that a transmission fails
/// after r prior combined attempts. Either the analytic form p0 * lambda^r
/// or an explicit table.
struct HarqModel {
  double p0 = 0.5;
  double lambda = 0.5;
  int r_max = 3;
  std::vector<double> g_table;  // empty -> analytic form

  double error_probability(int r) const {
    if (r < 0) throw std::domain_error("retransmission count is negative");
    r = std::min(r, r_max);
    if (!g_table.empty()) return g_table[static_cast<std::size_t>(r)];
    return p0 * std::pow(lambda, r);
  }

  void validate() const {
    if (r_max < 0) throw std::invalid_argument("r_max must be non-negative");
    if (!g_table.empty() && g_table.size() != static_cast<std::size_t>(r_max) + 1)
      throw std::invalid_argument("g_table must have r_max+1 entries");
    double prev = 1.0;
    for (int r = 0; r <= r_max; ++r) {
      const double g = g_table.empty() ? p0 * std::pow(lambda, r) : g_table[static_cast<std::size_t>(r)];
      if (!(g > 0.0 && g < 1.0))
        throw std::invalid_argument("error probability g(" + std::to_string(r) + ") must lie in (0,1)");
      if (g > prev + 1e-12)
        throw std::invalid_argument("error probability g(r) must be non-increasing in r");
      prev = g;
    }
  }
};

inline double error_probability(const HarqModel& harq, int r) { return harq.error_probability(r); }

/// First-order Markov model of the energy harvested per slot. State e means
/// e energy units arrive at the end of the slot; row e of the matrix is the
/// distribution of the next state.
struct EhChain {
  std::vector<std::vector<double>> p;

  int state_count() const { return static_cast<int>(p.size()); }

  void validate() const {
    const std::size_t n = p.size();
    if (n == 0) throw std::invalid_argument("EH chain has no states");
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i].size() != n) throw std::invalid_argument("EH transition matrix is not square");
      double row = 0.0;
      for (double v : p[i]) {
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("EH transition probability outside [0,1]");
        row += v;
      }
      if (std::abs(row - 1.0) > 1e-12)
        throw std::invalid_argument("EH transition row " + std::to_string(i) + " does not sum to 1");
      if (!(p[i][0] > 0.0))
        throw std::invalid_argument("p_E(0|e) must be positive for every e");
    }
  }

  struct Stationary {
    std::vector<double> pi;
    bool exact = true;  // false -> uniform fallback, chain not uniquely ergodic
  };

  /// Stationary distribution via a direct linear solve of pi^T P = pi^T with
  /// the normalization sum(pi)=1. Falls back to uniform if the system is
  /// singular (non-ergodic chain).
  Stationary stationary() const {
    const int n = state_count();
    // Rows 0..n-1: (P^T - I) pi = 0, last row replaced by sum(pi) = 1.
    std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) a[i][j] = p[j][i] - (i == j ? 1.0 : 0.0);
      a[i][n] = 0.0;
    }
    for (int j = 0; j < n; ++j) a[n - 1][j] = 1.0;
    a[n - 1][n] = 1.0;

    // Gaussian elimination with partial pivoting.
    bool singular = false;
    for (int col = 0; col < n; ++col) {
      int pivot = col;
      for (int row = col + 1; row < n; ++row)
        if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
      if (std::abs(a[pivot][col]) < 1e-12) {
        singular = true;
        break;
      }
      std::swap(a[col], a[pivot]);
      for (int row = 0; row < n; ++row) {
        if (row == col) continue;
        const double f = a[row][col] / a[col][col];
        if (f == 0.0) continue;
        for (int k = col; k <= n; ++k) a[row][k] -= f * a[col][k];
      }
    }
    Stationary out;
    out.pi.assign(static_cast<std::size_t>(n), 1.0 / n);
    if (singular) {
      out.exact = false;
      return out;
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double v = a[i][n] / a[i][i];
      if (v < 0.0 && v > -1e-10) v = 0.0;
      if (v < 0.0) {
        out.exact = false;
        out.pi.assign(static_cast<std::size_t>(n), 1.0 / n);
        return out;
      }
      out.pi[static_cast<std::size_t>(i)] = v;
      total += v;
    }
    for (double& v : out.pi) v /= total;
    return out;
  }

  /// i.i.d. arrivals over {0,1}: one unit with probability pe each slot.
  static EhChain iid(double pe) {
    EhChain c;
    c.p = {{1.0 - pe, pe}, {1.0 - pe, pe}};
    return c;
  }

  /// Symmetric two-state chain with stay probability (1+rho)/2, so rho is the
  /// lag-1 correlation coefficient of the harvest process.
  static EhChain symmetric2(double rho) {
    const double stay = (1.0 + rho) / 2.0;
    EhChain c;
    c.p = {{stay, 1.0 - stay}, {1.0 - stay, stay}};
    return c;
  }
};

struct EnvConfig {
  HarqModel harq;
  EhChain eh = EhChain::iid(0.5);
  int b_max = 5;
  int e_s = 1;
  int e_tx = 1;
  int delta_max = 40;

  void validate() const {
    harq.validate();
    eh.validate();
    if (e_s < 0) throw std::invalid_argument("sensing cost must be non-negative");
    if (e_tx < 1) throw std::invalid_argument("transmission cost must be at least 1");
    if (b_max < e_tx) throw std::invalid_argument("battery capacity below transmission cost: no action ever feasible");
    if (delta_max < 2) throw std::invalid_argument("delta_max must be at least 2");
  }

  int energy_states() const { return eh.state_count(); }
};

struct GrConfig {
  double tau0 = 1.0;
  double gamma_tau = 0.95;
  double tau_min = 1e-3;
};

struct FdpgConfig {
  double sigma = 2.0;    // perturbation size
  double q = 0.5;        // Bernoulli parameter of the perturbation vector
  double tau0 = 0.3;     // sigmoid temperature
  double zeta = 0.99;    // temperature decay per iteration
  double y = 40000.0;    // step size gamma(n) = y / (n+1)^z; the single-sample
                         // least-squares gradient spreads one scalar over all
                         // perturbed coordinates, so y compensates for the
                         // parameter dimension (tuned for the default model)
  double z = 0.8;
  int horizon = 200;     // rollout length T
};

struct DqnConfig {
  double discount = 0.99;
  int batch = 32;
  int replay_capacity = 2000;
  double learning_rate = 1e-4;
  double eps0 = 1.0;
  double eps_decay = 0.9;
  double eps_min = 0.01;
  int episode_length = 1000;
  int hidden = 24;
  double huber_d = 1.0;
  int eval_steps = 100000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct LabConfig {
  EnvConfig env;
  GrConfig gr;
  FdpgConfig fdpg;
  DqnConfig dqn;
};

namespace detail {

class KeyValueFile {
 public:
  void parse_line(const std::string& raw, int line_no) {
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') return;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(line_no) + ": malformed section header");
      section_ = std::string(trim(line.substr(1, line.size() - 2)));
      return;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    if (!section_.empty() && key.find('.') == std::string::npos) key = section_ + "." + key;
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<double> number(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return parse_double(it->second, "config key " + key);
  }

  std::optional<long long> integer(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return parse_int(it->second, "config key " + key);
  }

  std::optional<std::vector<double>> number_list(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    std::vector<double> out;
    for (const auto& tok : split(it->second, ','))
      out.push_back(parse_double(tok, "config key " + key));
    return out;
  }

 private:
  std::string section_;
  std::map<std::string, std::string> values_;
};

inline void apply_env(const KeyValueFile& kv, EnvConfig& env) {
  if (auto v = kv.number("p0")) env.harq.p0 = *v;
  if (auto v = kv.number("lambda")) env.harq.lambda = *v;
  if (auto v = kv.integer("r_max")) env.harq.r_max = static_cast<int>(*v);
  if (auto v = kv.number_list("g_table")) {
    env.harq.g_table = *v;
    if (!kv.has("r_max")) env.harq.r_max = static_cast<int>(v->size()) - 1;
  }
  if (kv.has("pe") && kv.has("eh_matrix"))
    throw std::invalid_argument("config: give either pe or eh_matrix, not both");
  if (auto v = kv.number("pe")) env.eh = EhChain::iid(*v);
  if (auto v = kv.number_list("eh_matrix")) {
    const std::size_t n2 = v->size();
    const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n2))));
    if (n * n != n2) throw std::invalid_argument("eh_matrix length is not a perfect square");
    EhChain chain;
    chain.p.assign(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) chain.p[i][j] = (*v)[i * n + j];
    env.eh = chain;
  }
  if (auto v = kv.integer("b_max")) env.b_max = static_cast<int>(*v);
  if (auto v = kv.integer("e_s")) env.e_s = static_cast<int>(*v);
  if (auto v = kv.integer("e_tx")) env.e_tx = static_cast<int>(*v);
  if (auto v = kv.integer("delta_max")) env.delta_max = static_cast<int>(*v);
}

inline void apply_learners(const KeyValueFile& kv, LabConfig& cfg) {
  if (auto v = kv.number("gr.tau0")) cfg.gr.tau0 = *v;
  if (auto v = kv.number("gr.gamma")) cfg.gr.gamma_tau = *v;
  if (auto v = kv.number("gr.tau_min")) cfg.gr.tau_min = *v;

  if (auto v = kv.number("fdpg.sigma")) cfg.fdpg.sigma = *v;
  if (auto v = kv.number("fdpg.q")) cfg.fdpg.q = *v;
  if (auto v = kv.number("fdpg.tau0")) cfg.fdpg.tau0 = *v;
  if (auto v = kv.number("fdpg.zeta")) cfg.fdpg.zeta = *v;
  if (auto v = kv.number("fdpg.y")) cfg.fdpg.y = *v;
  if (auto v = kv.number("fdpg.z")) cfg.fdpg.z = *v;
  if (auto v = kv.integer("fdpg.horizon")) cfg.fdpg.horizon = static_cast<int>(*v);

  if (auto v = kv.number("dqn.discount")) cfg.dqn.discount = *v;
  if (auto v = kv.integer("dqn.batch")) cfg.dqn.batch = static_cast<int>(*v);
  if (auto v = kv.integer("dqn.replay")) cfg.dqn.replay_capacity = static_cast<int>(*v);
  if (auto v = kv.number("dqn.lr")) cfg.dqn.learning_rate = *v;
  if (auto v = kv.number("dqn.eps0")) cfg.dqn.eps0 = *v;
  if (auto v = kv.number("dqn.eps_decay")) cfg.dqn.eps_decay = *v;
  if (auto v = kv.number("dqn.eps_min")) cfg.dqn.eps_min = *v;
  if (auto v = kv.integer("dqn.episode_length")) cfg.dqn.episode_length = static_cast<int>(*v);
  if (auto v = kv.integer("dqn.hidden")) cfg.dqn.hidden = static_cast<int>(*v);
  if (auto v = kv.number("dqn.huber_d")) cfg.dqn.huber_d = *v;
  if (auto v = kv.integer("dqn.eval_steps")) cfg.dqn.eval_steps = static_cast<int>(*v);

  if (cfg.fdpg.horizon < 1) throw std::invalid_argument("fdpg.horizon must be positive");
  if (!(cfg.fdpg.z > 0.5 && cfg.fdpg.z <= 1.0)) throw std::invalid_argument("fdpg.z must lie in (0.5, 1]");
  if (!(cfg.fdpg.y > 0.0)) throw std::invalid_argument("fdpg.y must be positive");
  if (!(cfg.fdpg.sigma > 0.0)) throw std::invalid_argument("fdpg.sigma must be positive");
  if (!(cfg.fdpg.q > 0.0 && cfg.fdpg.q < 1.0)) throw std::invalid_argument("fdpg.q must lie in (0,1)");
}

}  // namespace detail

inline LabConfig parse_config_text(const std::vector<std::string>& lines) {
  detail::KeyValueFile kv;
  int line_no = 0;
  for (const auto& line : lines) kv.parse_line(line, ++line_no);
  LabConfig cfg;
  detail::apply_env(kv, cfg.env);
  detail::apply_learners(kv, cfg);
  cfg.env.validate();
  return cfg;
}

inline LabConfig load_config(const std::string& path) { return parse_config_text(read_lines(path)); }

}  // namespace aoi
