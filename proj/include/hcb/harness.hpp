#pragma once
// Monte Carlo experiment runner: simple-regret estimation, horizon sweeps,
// random instance generation, concentration checks for the stage-one
// estimators, scaling fits, and CSV/JSON persistence.
//
// Determinism: every episode draws from a substream keyed by (master seed,
// algorithm, horizon index, replication index), so results are byte-identical
// regardless of worker count or completion order. Doubles are serialized with
// std::to_chars (shortest round-trip form).

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hcb/agents.hpp"
#include "hcb/complexity.hpp"
#include "hcb/model.hpp"
#include "hcb/rng.hpp"

namespace hcb {

// ----- deterministic parallel loop ---------------------------------------------

inline int default_workers() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs body(0..n-1) on up to `workers` threads. Callers must write results
// into preallocated per-index slots so the merge is order-independent.
inline void parallel_for(int n, int workers, const std::function<void(int)>& body) {
  if (n <= 0) return;
  workers = std::min(std::max(workers, 1), n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto run = [&] {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ----- number formatting ---------------------------------------------------------

// Shortest decimal form that round-trips; used for all persisted doubles.
inline std::string format_double(double v) {
  std::array<char, 40> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc())
    throw std::runtime_error("format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

// ----- regret estimation ---------------------------------------------------------

struct RegretReport {
  std::string algorithm;
  Mode mode = Mode::Nmc;
  int N = 0, K = 0, T = 0, reps = 0;
  std::uint64_t seed = 0;
  double regret_hat = 0.0;
  double stderr_ = 0.0;
  double mu_star = 0.0;
  std::vector<Action> actions;    // canonical action set for the mode
  std::vector<double> mu;         // exact expected reward per action
  std::vector<long long> freq;    // identification tally per action
  double wall_seconds = 0.0;      // reported to stdout only, never persisted
};

// Runs reps independent episodes and combines the empirical identification
// frequencies with the exact action means:
//   regret_hat = mu_star - sum_a freq_a/reps * mu_a,
// stderr propagating the multinomial covariance of the frequencies.
inline RegretReport estimate_simple_regret(const HcbInstance& inst,
                                           const PolicyFactory& make_policy,
                                           int T, int reps, std::uint64_t seed,
                                           int workers = 1) {
  if (reps < 2) throw std::invalid_argument("estimate_simple_regret: need reps >= 2");
  RegretReport rep;
  {
    std::unique_ptr<Policy> probe = make_policy();
    rep.algorithm = probe->name();
    rep.mode = probe->mode();
  }
  rep.N = inst.num_arms;
  rep.K = inst.num_contexts;
  rep.T = T;
  rep.reps = reps;
  rep.seed = seed;
  rep.actions = enumerate_actions(inst.num_arms, inst.num_contexts, rep.mode);
  rep.mu.reserve(rep.actions.size());
  for (const Action& a : rep.actions) rep.mu.push_back(exact_mu(inst, a));
  rep.mu_star = *std::max_element(rep.mu.begin(), rep.mu.end());

  const RandomStream base(seed);
  std::vector<int> chosen(static_cast<std::size_t>(reps), -1);
  auto t0 = std::chrono::steady_clock::now();
  parallel_for(reps, workers, [&](int e) {
    std::unique_ptr<Policy> policy = make_policy();
    EpisodeResult res =
        run_episode(inst, *policy, T, base.child("episode", static_cast<std::uint64_t>(e)));
    chosen[static_cast<std::size_t>(e)] = canonical_index(res.chosen, inst.num_arms);
  });
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  rep.freq.assign(rep.actions.size(), 0);
  for (int idx : chosen) {
    if (idx < 0 || idx >= static_cast<int>(rep.actions.size()))
      throw std::logic_error("estimate_simple_regret: final choice outside the action set");
    ++rep.freq[static_cast<std::size_t>(idx)];
  }
  double mean = 0.0, mean_sq = 0.0;
  for (std::size_t i = 0; i < rep.actions.size(); ++i) {
    double f = static_cast<double>(rep.freq[i]) / static_cast<double>(reps);
    mean += f * rep.mu[i];
    mean_sq += f * rep.mu[i] * rep.mu[i];
  }
  rep.regret_hat = rep.mu_star - mean;
  rep.stderr_ = std::sqrt(std::max(0.0, mean_sq - mean * mean) /
                          static_cast<double>(reps));
  return rep;
}

// ----- random instances -----------------------------------------------------------

struct GeneratorSpec {
  int N = 4;
  int K = 2;
  double lo = 0.3, hi = 0.7;       // uniform range for conditional entries
  int biased_count = 0;            // leading arms forced to biased_value in every row
  double biased_value = 0.001;
  bool sorted_p = false;           // sort the S=1 row ascending; requires hi <= 1/2
  double alpha_lo = 0.2, alpha_hi = 0.8;
  std::string reward = "constant_half";  // constant_half | dense | bump
  double bump_epsilon = 0.1;
  int bump_arm = 0;                // 0-based
};

inline GeneratorSpec generator_from_json(const nlohmann::json& j) {
  GeneratorSpec g;
  g.N = j.at("N").get<int>();
  g.K = j.value("K", 2);
  g.lo = j.value("lo", 0.3);
  g.hi = j.value("hi", 0.7);
  g.biased_count = j.value("biased_count", 0);
  g.biased_value = j.value("biased_value", 0.001);
  g.sorted_p = j.value("sorted_p", false);
  g.alpha_lo = j.value("alpha_lo", 0.2);
  g.alpha_hi = j.value("alpha_hi", 0.8);
  g.reward = j.value("reward", std::string("constant_half"));
  g.bump_epsilon = j.value("bump_epsilon", 0.1);
  g.bump_arm = j.value("bump_arm", 1) - 1;  // serialized 1-based
  return g;
}

inline nlohmann::json generator_to_json(const GeneratorSpec& g) {
  return nlohmann::json{{"N", g.N},
                        {"K", g.K},
                        {"lo", g.lo},
                        {"hi", g.hi},
                        {"biased_count", g.biased_count},
                        {"biased_value", g.biased_value},
                        {"sorted_p", g.sorted_p},
                        {"alpha_lo", g.alpha_lo},
                        {"alpha_hi", g.alpha_hi},
                        {"reward", g.reward},
                        {"bump_epsilon", g.bump_epsilon},
                        {"bump_arm", g.bump_arm + 1}};
}

inline HcbInstance random_instance(const GeneratorSpec& g, RandomStream& rng) {
  if (g.N < 1 || g.N > 64 || g.K < 1)
    throw std::invalid_argument("random_instance: bad dimensions");
  if (!(0.0 < g.lo && g.lo <= g.hi && g.hi < 1.0))
    throw std::invalid_argument("random_instance: conditional range must be within (0,1)");
  if (g.biased_count < 0 || g.biased_count > g.N)
    throw std::invalid_argument("random_instance: biased_count out of range");
  if (!(g.biased_value > 0.0 && g.biased_value < 1.0))
    throw std::invalid_argument("random_instance: biased_value out of range");
  if (g.sorted_p && (g.hi > 0.5 || g.biased_value > 0.5))
    throw std::invalid_argument(
        "random_instance: sorted-p families require conditionals <= 1/2");
  if (!(0.0 < g.alpha_lo && g.alpha_lo <= g.alpha_hi && g.alpha_hi < 1.0))
    throw std::invalid_argument("random_instance: alpha range must be within (0,1)");

  std::vector<double> alpha;
  if (g.K == 2) {
    double a1 = rng.uniform(g.alpha_lo, g.alpha_hi);
    alpha = {1.0 - a1, a1};
  } else {
    alpha.resize(static_cast<std::size_t>(g.K));
    double total = 0.0;
    for (double& a : alpha) {
      a = rng.uniform(g.alpha_lo, g.alpha_hi);
      total += a;
    }
    for (double& a : alpha) a /= total;
  }

  std::vector<std::vector<double>> cond(
      static_cast<std::size_t>(g.K), std::vector<double>(static_cast<std::size_t>(g.N)));
  for (auto& row : cond)
    for (std::size_t j = 0; j < row.size(); ++j)
      row[j] = static_cast<int>(j) < g.biased_count ? g.biased_value
                                                    : rng.uniform(g.lo, g.hi);
  if (g.sorted_p) {
    if (g.K != 2)
      throw std::invalid_argument("random_instance: sorted-p requires K = 2");
    std::sort(cond[1].begin(), cond[1].end());
  }

  RewardFunction reward = ConstantHalf{};
  if (g.reward == "dense") {
    if (g.N > 20)
      throw std::invalid_argument("random_instance: dense reward needs N <= 20");
    DenseTable table;
    table.values.resize(std::size_t{1} << g.N);
    for (double& v : table.values) v = rng.uniform();
    reward = std::move(table);
  } else if (g.reward == "bump") {
    if (g.bump_arm < 0 || g.bump_arm >= g.N)
      throw std::invalid_argument("random_instance: bump arm out of range");
    reward = make_target_bump(g.bump_epsilon, {{g.bump_arm, 1}});
  } else if (g.reward != "constant_half") {
    throw std::invalid_argument("random_instance: unknown reward family \"" +
                                g.reward + "\"");
  }
  return build_instance(g.K, g.N, alpha, cond, reward);
}

// ----- experiment configuration ----------------------------------------------------

struct ExperimentConfig {
  std::string instance_path;               // exclusive with generator
  std::optional<GeneratorSpec> generator;
  std::vector<std::string> algorithms;
  Mode mode = Mode::Nmc;
  std::vector<int> T_grid;
  int reps = 2;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.instance_path.empty() == !cfg.generator.has_value())
    throw std::invalid_argument(
        "config: exactly one of \"instance\" and \"generator\" is required");
  if (cfg.algorithms.empty())
    throw std::invalid_argument("config: at least one algorithm is required");
  if (cfg.T_grid.empty()) throw std::invalid_argument("config: T grid is empty");
  for (std::size_t i = 0; i + 1 < cfg.T_grid.size(); ++i)
    if (cfg.T_grid[i] >= cfg.T_grid[i + 1])
      throw std::invalid_argument("config: T grid must be strictly ascending");
  if (cfg.T_grid.front() < 1) throw std::invalid_argument("config: T must be >= 1");
  if (cfg.reps < 2) throw std::invalid_argument("config: reps must be >= 2");
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (j.contains("instance")) cfg.instance_path = j.at("instance").get<std::string>();
  if (j.contains("generator")) cfg.generator = generator_from_json(j.at("generator"));
  cfg.algorithms = j.at("algorithms").get<std::vector<std::string>>();
  cfg.mode = parse_mode(j.value("mode", std::string("nmc")));
  cfg.T_grid = j.at("T_grid").get<std::vector<int>>();
  cfg.reps = j.at("reps").get<int>();
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.out_dir = j.value("out", std::string("."));
  validate_config(cfg);
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
    return config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad config file " + path + ": " + e.what());
  }
}

inline HcbInstance resolve_instance(const ExperimentConfig& cfg) {
  if (!cfg.instance_path.empty()) return load_instance(cfg.instance_path);
  RandomStream rng = RandomStream(cfg.seed).child("instance");
  return random_instance(*cfg.generator, rng);
}

// ----- persistence ------------------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string reports_to_csv(const std::vector<RegretReport>& reports) {
  std::string csv = "algorithm,mode,N,K,T,reps,regret_hat,stderr,mu_star,seed\n";
  for (const RegretReport& r : reports) {
    csv += r.algorithm;
    csv += ',';
    csv += to_string(r.mode);
    csv += ',';
    csv += std::to_string(r.N);
    csv += ',';
    csv += std::to_string(r.K);
    csv += ',';
    csv += std::to_string(r.T);
    csv += ',';
    csv += std::to_string(r.reps);
    csv += ',';
    csv += format_double(r.regret_hat);
    csv += ',';
    csv += format_double(r.stderr_);
    csv += ',';
    csv += format_double(r.mu_star);
    csv += ',';
    csv += std::to_string(r.seed);
    csv += '\n';
  }
  return csv;
}

inline nlohmann::json report_to_json(const RegretReport& r) {
  nlohmann::json j;
  j["algorithm"] = r.algorithm;
  j["mode"] = to_string(r.mode);
  j["N"] = r.N;
  j["K"] = r.K;
  j["T"] = r.T;
  j["reps"] = r.reps;
  j["seed"] = r.seed;
  j["regret_hat"] = r.regret_hat;
  j["stderr"] = r.stderr_;
  j["mu_star"] = r.mu_star;
  nlohmann::json actions = nlohmann::json::array();
  for (const Action& a : r.actions) actions.push_back(action_label(a));
  j["actions"] = actions;
  j["mu"] = r.mu;
  j["freq"] = r.freq;
  return j;
}

// ----- sweep -------------------------------------------------------------------------

struct SweepResult {
  std::vector<RegretReport> reports;
  std::string csv_path;
  std::string json_path;
};

// One report per (algorithm, T) cell, iterated algorithms-outer / T-inner.
// Episode substreams are keyed by (seed, algorithm, T index, episode index),
// so output files are byte-identical for any worker count.
inline SweepResult sweep(const ExperimentConfig& cfg, int workers = 1) {
  validate_config(cfg);
  const HcbInstance inst = resolve_instance(cfg);
  const RandomStream master(cfg.seed);
  SweepResult result;
  for (const std::string& alg : cfg.algorithms) {
    const RandomStream alg_stream = master.child(alg);
    for (std::size_t ti = 0; ti < cfg.T_grid.size(); ++ti) {
      const int T = cfg.T_grid[ti];
      PolicyFactory make = [&, T]() {
        return make_policy(alg, inst.num_arms, inst.num_contexts, T, cfg.mode);
      };
      std::uint64_t cell_seed = alg_stream.child("T", ti).key();
      try {
        RegretReport rep =
            estimate_simple_regret(inst, make, T, cfg.reps, cell_seed, workers);
        rep.seed = cfg.seed;  // reports carry the master seed for reproduction
        result.reports.push_back(std::move(rep));
      } catch (const std::exception& e) {
        throw std::runtime_error("sweep cell (" + alg + ", T=" + std::to_string(T) +
                                 "): " + e.what());
      }
    }
  }
  std::filesystem::create_directories(cfg.out_dir);
  result.csv_path = (std::filesystem::path(cfg.out_dir) / "sweep.csv").string();
  result.json_path = (std::filesystem::path(cfg.out_dir) / "sweep.json").string();
  write_text_file(result.csv_path, reports_to_csv(result.reports));
  nlohmann::json arr = nlohmann::json::array();
  for (const RegretReport& r : result.reports) arr.push_back(report_to_json(r));
  write_text_file(result.json_path, arr.dump(2) + "\n");
  return result;
}

// ----- concentration checks for the stage-one estimators -----------------------------

struct ConcentrationRow {
  std::string event;
  double bound = 0.0;        // per-replication failure probability bound
  long long failures = 0;
  int reps = 0;
  double failure_rate = 0.0;
  double margin = 0.0;       // 3 sqrt(bound (1-bound) / reps)
  bool condition_met = true; // largeness condition attached to this bound
  std::string condition;     // empty when the bound is unconditional
  bool pass = true;          // rate <= bound + margin, or vacuous if not applicable
};

struct ConcentrationReport {
  int Tprime = 0;
  int reps = 0;
  double alpha = 0.0;
  double m1 = 0.0;
  std::vector<ConcentrationRow> rows;
  long long events_held = 0;        // replications where E_p and E_pbar both held
  long long window_exceptions = 0;  // among those, m_hat outside [2m1/3, 2m1]
  bool pass = false;                // all applicable rows pass and no exceptions
};

// Simulates `reps` independent observation stages of T' rounds and tallies,
// per replication, whether each estimator landed within its stated radius:
//   |alpha_hat - alpha|  <= r(3 alpha, 2, T')        failure prob <= 1/T'
//   E_p  : every p_hat_j within relative radius r(27/(alpha p_j), 2N, T')
//                                                    failure prob <= 2/T'
//   E_pbar: same for the complements                 failure prob <= 2/T'
//   |mu_obs_hat - mu_obs| < r(3, 2, T')              failure prob <= 1/T'
//   every mu_s1j1 estimate within r(27/(alpha p_j), 2N, T')
//                                                    failure prob <= 2/T'
//   m_hat in [2 m1 / 3, 2 m1]                        failure prob <= 4/T'
//   p_j >= 1/(4 m1) for every j outside the biased set
//                                                    failure prob <= 4/T'
// The E_p / E_pbar bounds require T' > 27 ln(2NT')/alpha and the m_hat window
// requires T' > 108 m1 ln(2NT')/alpha; rows whose condition fails are marked
// not applicable rather than failing. Whenever E_p and E_pbar both hold the
// window containment is exact, so window_exceptions counts its violations.
inline ConcentrationReport concentration_suite(const HcbInstance& inst, int Tprime,
                                               int reps, std::uint64_t seed,
                                               int workers = 1) {
  if (inst.num_contexts != 2)
    throw std::invalid_argument("concentration_suite: two-context instances only");
  if (Tprime < 2 || reps < 1)
    throw std::invalid_argument("concentration_suite: need T' >= 2 and reps >= 1");
  const int N = inst.num_arms;
  const double alpha = inst.alpha[1];
  const std::vector<double>& p = inst.p();
  const double m1 = m_value(p);
  const double Td = static_cast<double>(Tprime);
  const double mu_obs_true = exact_mu(inst, Action::observe());
  std::vector<double> mu_s1j1_true(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j)
    mu_s1j1_true[static_cast<std::size_t>(j)] = exact_conditional_reward(inst, 1, j, 1);

  const double rad_alpha = error_radius(3.0 * alpha, 2.0, Td);
  const double rad_mu_obs = error_radius(3.0, 2.0, Td);
  std::vector<double> rad_p(static_cast<std::size_t>(N)), rad_pbar(rad_p);
  for (int j = 0; j < N; ++j) {
    rad_p[static_cast<std::size_t>(j)] =
        error_radius(27.0 / (alpha * p[static_cast<std::size_t>(j)]), 2.0 * N, Td);
    rad_pbar[static_cast<std::size_t>(j)] = error_radius(
        27.0 / (alpha * (1.0 - p[static_cast<std::size_t>(j)])), 2.0 * N, Td);
  }

  enum EventIdx {
    kAlpha = 0,
    kEp,
    kEpbar,
    kMuObs,
    kMuS1J1,
    kWindow,
    kPjBound,
    kNumEvents
  };
  // per-replication outcome bits, merged after the parallel loop
  struct RepOutcome {
    std::array<bool, kNumEvents> failed{};
    bool events_held = false;
    bool window_exception = false;
  };
  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(reps));
  const RandomStream base(seed);

  parallel_for(reps, workers, [&](int r) {
    RandomStream rng =
        base.child("rep", static_cast<std::uint64_t>(r)).child("env");
    long long cnt_s1 = 0, sum_y = 0;
    std::vector<long long> cnt_x1(static_cast<std::size_t>(N), 0);
    std::vector<long long> sum_y_x1(static_cast<std::size_t>(N), 0);
    const Action obs_action = Action::observe();
    for (int t = 0; t < Tprime; ++t) {
      Observation o = sample_round(inst, obs_action, rng);
      sum_y += o.y;
      if (o.s != 1) continue;
      ++cnt_s1;
      for (int j = 0; j < N; ++j)
        if ((o.x >> j) & 1) {
          ++cnt_x1[static_cast<std::size_t>(j)];
          sum_y_x1[static_cast<std::size_t>(j)] += o.y;
        }
    }
    double alpha_hat = static_cast<double>(cnt_s1) / Td;
    double mu_obs_hat = static_cast<double>(sum_y) / Td;
    std::vector<double> p_hat(static_cast<std::size_t>(N), 0.0);
    std::vector<double> mu_hat(static_cast<std::size_t>(N), 0.0);
    for (int j = 0; j < N; ++j) {
      std::size_t sj = static_cast<std::size_t>(j);
      p_hat[sj] = cnt_s1 > 0 ? static_cast<double>(cnt_x1[sj]) /
                                   static_cast<double>(cnt_s1)
                             : 0.0;
      mu_hat[sj] = cnt_x1[sj] > 0 ? static_cast<double>(sum_y_x1[sj]) /
                                        static_cast<double>(cnt_x1[sj])
                                  : 0.0;
    }
    double m_hat = m_value(p_hat);
    std::vector<int> biased = threshold_set(p_hat, m_hat);

    RepOutcome& out = outcomes[static_cast<std::size_t>(r)];
    out.failed[kAlpha] = std::abs(alpha_hat - alpha) > rad_alpha;
    bool ep = true, epbar = true, mu_ok = true;
    for (int j = 0; j < N; ++j) {
      std::size_t sj = static_cast<std::size_t>(j);
      double pj = p[sj];
      if (std::abs(p_hat[sj] - pj) > rad_p[sj] * pj) ep = false;
      if (std::abs((1.0 - p_hat[sj]) - (1.0 - pj)) > rad_pbar[sj] * (1.0 - pj))
        epbar = false;
      if (std::abs(mu_hat[sj] - mu_s1j1_true[sj]) > rad_p[sj]) mu_ok = false;
    }
    out.failed[kEp] = !ep;
    out.failed[kEpbar] = !epbar;
    out.failed[kMuObs] = std::abs(mu_obs_hat - mu_obs_true) >= rad_mu_obs;
    out.failed[kMuS1J1] = !mu_ok;
    bool window_ok = m_hat >= 2.0 * m1 / 3.0 && m_hat <= 2.0 * m1;
    out.failed[kWindow] = !window_ok;
    out.events_held = ep && epbar;
    out.window_exception = out.events_held && !window_ok;
    bool pj_ok = true;
    std::vector<bool> in_biased(static_cast<std::size_t>(N), false);
    for (int j : biased) in_biased[static_cast<std::size_t>(j)] = true;
    for (int j = 0; j < N; ++j)
      if (!in_biased[static_cast<std::size_t>(j)] &&
          p[static_cast<std::size_t>(j)] < 1.0 / (4.0 * m1))
        pj_ok = false;
    out.failed[kPjBound] = !pj_ok;
  });

  ConcentrationReport report;
  report.Tprime = Tprime;
  report.reps = reps;
  report.alpha = alpha;
  report.m1 = m1;
  const double cond27 = 27.0 * std::log(2.0 * N * Td) / alpha;
  const double cond108 = 108.0 * m1 * std::log(2.0 * N * Td) / alpha;
  struct RowSpec {
    int idx;
    const char* name;
    double bound;
    bool condition_met;
    const char* condition;
  };
  const RowSpec specs[] = {
      {kAlpha, "alpha", 1.0 / Td, true, ""},
      {kEp, "E_p", 2.0 / Td, Td > cond27, "T' > 27 ln(2NT')/alpha"},
      {kEpbar, "E_pbar", 2.0 / Td, Td > cond27, "T' > 27 ln(2NT')/alpha"},
      {kMuObs, "mu_obs", 1.0 / Td, true, ""},
      {kMuS1J1, "mu_s1j1", 2.0 / Td, true, ""},
      {kWindow, "m1_window", 4.0 / Td, Td > cond108, "T' > 108 m1 ln(2NT')/alpha"},
      {kPjBound, "pj_lower_bound", 4.0 / Td, true, ""},
  };
  report.pass = true;
  for (const RowSpec& s : specs) {
    ConcentrationRow row;
    row.event = s.name;
    row.bound = s.bound;
    row.reps = reps;
    for (const RepOutcome& o : outcomes)
      row.failures += o.failed[static_cast<std::size_t>(s.idx)] ? 1 : 0;
    row.failure_rate = static_cast<double>(row.failures) / static_cast<double>(reps);
    row.margin = 3.0 * std::sqrt(s.bound * (1.0 - s.bound) / static_cast<double>(reps));
    row.condition_met = s.condition_met;
    row.condition = s.condition;
    row.pass = !s.condition_met || row.failure_rate <= s.bound + row.margin;
    report.pass = report.pass && row.pass;
    report.rows.push_back(std::move(row));
  }
  for (const RepOutcome& o : outcomes) {
    report.events_held += o.events_held ? 1 : 0;
    report.window_exceptions += o.window_exception ? 1 : 0;
  }
  report.pass = report.pass && report.window_exceptions == 0;
  return report;
}

// ----- scaling fits ------------------------------------------------------------------

struct ScalingPoint {
  double T = 0.0;
  double regret = 0.0;
  double stderr_ = 0.0;
};

struct ScalingFit {
  std::string status;  // "ok" or "inconclusive"
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // slope +- 2 stderr
  int points_used = 0;
};

// Least-squares slope of log(regret) against log(T), using only points whose
// regret clears 3x its standard error; fewer than 3 such points leave the fit
// inconclusive rather than failed.
inline ScalingFit fit_scaling(const std::vector<ScalingPoint>& series) {
  ScalingFit fit;
  std::vector<std::pair<double, double>> pts;
  for (const ScalingPoint& s : series)
    if (s.regret > 3.0 * s.stderr_ && s.regret > 0.0 && s.T > 0.0)
      pts.emplace_back(std::log(s.T), std::log(s.regret));
  fit.points_used = static_cast<int>(pts.size());
  if (pts.size() < 3) {
    fit.status = "inconclusive";
    return fit;
  }
  double n = static_cast<double>(pts.size());
  double sx = 0.0, sy = 0.0;
  for (auto& [x, y] : pts) {
    sx += x;
    sy += y;
  }
  double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (auto& [x, y] : pts) {
    double e = y - (fit.intercept + fit.slope * x);
    ssr += e * e;
  }
  fit.slope_stderr = std::sqrt(ssr / (n - 2.0) / sxx);
  fit.ci_lo = fit.slope - 2.0 * fit.slope_stderr;
  fit.ci_hi = fit.slope + 2.0 * fit.slope_stderr;
  fit.status = "ok";
  return fit;
}

inline ScalingFit fit_scaling(const std::vector<RegretReport>& reports) {
  std::vector<ScalingPoint> pts;
  pts.reserve(reports.size());
  for (const RegretReport& r : reports)
    pts.push_back({static_cast<double>(r.T), r.regret_hat, r.stderr_});
  return fit_scaling(pts);
}

}  // namespace hcb
