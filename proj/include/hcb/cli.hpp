#pragma once
// Command-line front end. Subcommands:
//   run           one (algorithm, T) cell of an experiment config
//   sweep         full algorithms x T grid, writing sweep.csv / sweep.json
//   verify-lemmas built-in self-checks (model identities, hardness oracle,
//                 concentration suite, separation, per-round KL bound)
//   adversary     build a worst-case family, measure a policy against it, and
//                 compare with the theoretical lower bound
//   gen-instance  draw a random instance from a generator spec and save it
//
// Shared flags: --config PATH, --seed U64 (overrides the config seed),
// --workers INT, --quick (replication counts / 10), --out DIR (overrides the
// config output directory). Setting HCB_LOG to a non-empty value other than
// "0" enables progress logging on stderr. Stdout carries one key=value pair
// per line. Exit codes: 0 success, 1 check or computation failure, 2 usage
// or configuration error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hcb/adversary.hpp"
#include "hcb/agents.hpp"
#include "hcb/complexity.hpp"
#include "hcb/harness.hpp"
#include "hcb/model.hpp"
#include "hcb/rng.hpp"

namespace hcb {
namespace cli_detail {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool log_enabled() {
  const char* v = std::getenv("HCB_LOG");
  return v != nullptr && *v != '\0' && std::string(v) != "0";
}

inline void log(const std::string& msg) {
  if (log_enabled()) std::cerr << "[hcb] " << msg << '\n';
}

inline void kv(const std::string& key, const std::string& value) {
  std::cout << key << '=' << value << '\n';
}
inline void kv(const std::string& key, double value) { kv(key, format_double(value)); }
inline void kv(const std::string& key, bool pass) { kv(key, pass ? std::string("pass") : std::string("fail")); }
inline void kv(const std::string& key, long long value) { kv(key, std::to_string(value)); }
inline void kv(const std::string& key, int value) { kv(key, std::to_string(value)); }
inline void kv(const std::string& key, std::uint64_t value) { kv(key, std::to_string(value)); }

inline int scaled_reps(int reps, bool quick) {
  return quick ? std::max(2, reps / 10) : reps;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("bad config file " + path + ": " + e.what());
  }
}

// Independent evaluation of the hardness minimizer: the minimum of
// {s > 0 : s >= |I_s|} is attained either at a reciprocal drop point or at an
// integer plateau crossing, so scanning those candidates directly finds it.
inline double m_value_bruteforce(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  int zeros = 0;
  std::vector<double> u;
  for (double x : v) {
    double theta = boundary_gap(x);
    if (theta == 0.0)
      ++zeros;
    else
      u.push_back(1.0 / theta);
  }
  auto f = [&](double s) {
    int count = zeros;
    for (double uj : u) count += uj > s ? 1 : 0;
    return count;
  };
  std::vector<double> candidates(u);
  for (int s = 1; s <= n; ++s) candidates.push_back(static_cast<double>(s));
  double best = std::numeric_limits<double>::infinity();
  for (double s : candidates)
    if (s > 0.0 && s >= f(s)) best = std::min(best, s);
  return best;
}

// ----- verify-lemmas checks -----------------------------------------------------

// Recomputes expected rewards by enumerating arm vectors with explicit
// probability products, then checks the interventional identities against
// exact_mu.
inline bool check_model_identities(std::uint64_t seed, int instances) {
  RandomStream root = RandomStream(seed).child("model");
  const double tol = 1e-12;
  for (int it = 0; it < instances; ++it) {
    RandomStream rng = root.child("instance", it);
    GeneratorSpec g;
    g.N = 1 + static_cast<int>(rng.uniform() * 6.0);
    g.K = 2;
    g.lo = 0.05;
    g.hi = 0.95;
    g.reward = it % 3 == 0 ? "constant_half" : it % 3 == 1 ? "dense" : "bump";
    g.bump_arm = 0;
    HcbInstance inst = random_instance(g, rng);
    const int N = inst.num_arms;
    const std::uint64_t states = std::uint64_t{1} << N;
    auto ctx_prob = [&](int s, std::uint64_t x, int forced_arm, int forced_bit) {
      double prob = 1.0;
      for (int j = 0; j < N; ++j) {
        int bit = static_cast<int>((x >> j) & 1);
        if (j == forced_arm) {
          if (bit != forced_bit) return 0.0;
          continue;
        }
        double pj = inst.cond[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)];
        prob *= bit == 1 ? pj : 1.0 - pj;
      }
      return prob;
    };
    // joint normalization
    double total = 0.0;
    for (int s = 0; s < 2; ++s)
      for (std::uint64_t x = 0; x < states; ++x)
        total += inst.alpha[static_cast<std::size_t>(s)] * ctx_prob(s, x, -1, -1);
    if (std::abs(total - 1.0) > tol) return false;
    // forcing a context: mean reward under its conditional row
    std::array<double, 2> mu_ctx{};
    for (int s = 0; s < 2; ++s) {
      double mu = 0.0;
      for (std::uint64_t x = 0; x < states; ++x)
        mu += ctx_prob(s, x, -1, -1) * reward_mean(inst, x);
      mu_ctx[static_cast<std::size_t>(s)] = mu;
      if (std::abs(mu - exact_mu(inst, Action::do_context(s))) > tol) return false;
    }
    // observation mixes the contexts
    double mu_obs = inst.alpha[0] * mu_ctx[0] + inst.alpha[1] * mu_ctx[1];
    if (std::abs(mu_obs - exact_mu(inst, Action::observe())) > tol) return false;
    // forcing an arm mixes the mutilated conditionals
    for (int j = 0; j < N; ++j)
      for (int k = 0; k <= 1; ++k) {
        double mu = 0.0;
        for (int s = 0; s < 2; ++s) {
          double cond_mu = 0.0;
          for (std::uint64_t x = 0; x < states; ++x)
            cond_mu += ctx_prob(s, x, j, k) * reward_mean(inst, x);
          if (std::abs(cond_mu - exact_conditional_reward(inst, s, j, k)) > tol)
            return false;
          mu += inst.alpha[static_cast<std::size_t>(s)] * cond_mu;
        }
        if (std::abs(mu - exact_mu(inst, Action::do_arm(j, k))) > tol) return false;
      }
  }
  return true;
}

inline bool check_complexity_oracle(std::uint64_t seed, int vectors) {
  RandomStream root = RandomStream(seed).child("complexity");
  for (int it = 0; it < vectors; ++it) {
    RandomStream rng = root.child("vector", it);
    int n = 1 + static_cast<int>(rng.uniform() * 32.0);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) {
      double roll = rng.uniform();
      if (roll < 0.1)
        x = 0.0;
      else if (roll < 0.2)
        x = 1.0;
      else if (roll < 0.3)
        x = 0.5;
      else if (roll < 0.5)
        x = rng.uniform(0.0, 0.1);
      else
        x = rng.uniform();
    }
    double m = m_value(v);
    if (m != m_value_bruteforce(v)) return false;
    if (static_cast<double>(biased_index_set(v, m).size()) > m) return false;
  }
  return true;
}

inline HcbInstance default_concentration_instance(std::uint64_t seed) {
  // five arms, every conditional strictly inside (0.3, 0.7), m(p) = 2.5
  std::vector<double> p{0.31, 0.35, 0.40, 0.45, 0.49};
  std::vector<double> q{0.35, 0.45, 0.55, 0.60, 0.65};
  RandomStream rng = RandomStream(seed).child("reward");
  DenseTable table;
  table.values.resize(std::size_t{1} << 5);
  for (double& v : table.values) v = rng.uniform();
  return binary_instance(0.5, p, q, table);
}

inline bool check_separation(std::uint64_t seed, int instances) {
  RandomStream root = RandomStream(seed).child("separation");
  for (int it = 0; it < instances; ++it) {
    HcbInstance inst;
    bool found = false;
    for (int attempt = 0; attempt < 100 && !found; ++attempt) {
      RandomStream rng = root.child("instance", it).child("try", attempt);
      GeneratorSpec g;
      g.N = 4 + static_cast<int>(rng.uniform() * 7.0);
      g.lo = 0.30;
      g.hi = 0.45;
      g.sorted_p = true;
      HcbInstance candidate = random_instance(g, rng);
      if (m_value(candidate.p()) > 2.0) {
        inst = candidate;
        found = true;
      }
    }
    if (!found) return false;
    AdversarialFamily fam = build_adversarial_family(
        inst.alpha[1], inst.p(), inst.q(), 1000, FamilyShape::Isolated);
    if (!verify_separation(fam).ok) return false;
  }
  return true;
}

inline bool check_kl_bound(int grid) {
  for (int i = 1; i <= grid; ++i) {
    double eps = 0.2499 * static_cast<double>(i) / static_cast<double>(grid);
    double kl = kl_per_hit(eps);
    if (!(kl > 0.0) || kl > 16.0 * eps * eps / 3.0) return false;
  }
  return true;
}

// ----- subcommand bodies ---------------------------------------------------------

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;  // 0 means hardware default
  bool quick = false;
  std::string out;
  bool out_set = false;
};

inline int effective_workers(const CommonFlags& f) {
  return f.workers > 0 ? f.workers : default_workers();
}

inline ExperimentConfig load_experiment(const CommonFlags& f) {
  ExperimentConfig cfg;
  try {
    cfg = config_from_json(load_json_file(f.config));
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (f.seed_set) cfg.seed = f.seed;
  if (f.out_set) cfg.out_dir = f.out;
  cfg.reps = scaled_reps(cfg.reps, f.quick);
  return cfg;
}

inline int cmd_run(const CommonFlags& f) {
  ExperimentConfig cfg = load_experiment(f);
  if (cfg.algorithms.size() != 1 || cfg.T_grid.size() != 1)
    throw UsageError("run expects a config with exactly one algorithm and one T");
  const HcbInstance inst = resolve_instance(cfg);
  const std::string alg = cfg.algorithms.front();
  const int T = cfg.T_grid.front();
  log("run " + alg + " T=" + std::to_string(T));
  PolicyFactory make = [&]() {
    return make_policy(alg, inst.num_arms, inst.num_contexts, T, cfg.mode);
  };
  std::uint64_t cell_seed = RandomStream(cfg.seed).child(alg).child("T", 0).key();
  RegretReport rep =
      estimate_simple_regret(inst, make, T, cfg.reps, cell_seed, effective_workers(f));
  kv("algorithm", rep.algorithm);
  kv("mode", to_string(rep.mode));
  kv("N", rep.N);
  kv("K", rep.K);
  kv("T", rep.T);
  kv("reps", rep.reps);
  kv("seed", cfg.seed);
  kv("regret_hat", rep.regret_hat);
  kv("stderr", rep.stderr_);
  kv("mu_star", rep.mu_star);
  kv("wall_seconds", rep.wall_seconds);
  return 0;
}

inline int cmd_sweep(const CommonFlags& f) {
  ExperimentConfig cfg = load_experiment(f);
  SweepResult result = sweep(cfg, effective_workers(f));
  kv("cells", static_cast<long long>(result.reports.size()));
  for (const RegretReport& r : result.reports) {
    const std::string tag = "[" + r.algorithm + "][" + std::to_string(r.T) + "]";
    kv("regret_hat" + tag, r.regret_hat);
    kv("stderr" + tag, r.stderr_);
    log("cell " + tag + " wall=" + format_double(r.wall_seconds) + "s");
  }
  kv("csv", result.csv_path);
  kv("json", result.json_path);
  return 0;
}

inline int cmd_verify(const CommonFlags& f) {
  if (!f.config.empty())
    throw UsageError("verify-lemmas does not take a config file");
  const std::uint64_t seed = f.seed_set ? f.seed : 0;
  const int workers = effective_workers(f);
  kv("seed", seed);
  kv("quick", f.quick ? std::string("1") : std::string("0"));

  bool model_ok = check_model_identities(seed, f.quick ? 10 : 40);
  kv("model_identities", model_ok);
  bool complexity_ok = check_complexity_oracle(seed, f.quick ? 100 : 400);
  kv("complexity_oracle", complexity_ok);

  HcbInstance conc_inst = default_concentration_instance(seed);
  ConcentrationReport conc = concentration_suite(
      conc_inst, 2000, scaled_reps(2000, f.quick), seed, workers);
  for (const ConcentrationRow& row : conc.rows) {
    if (!row.condition_met) {
      kv("concentration." + row.event, std::string("not_applicable"));
      continue;
    }
    kv("concentration." + row.event, row.pass);
    if (!row.pass)
      kv("concentration." + row.event + ".failure_rate", row.failure_rate);
  }
  kv("concentration.window_exceptions", conc.window_exceptions);
  kv("concentration", conc.pass);

  bool separation_ok = check_separation(seed, f.quick ? 8 : 30);
  kv("separation", separation_ok);
  bool kl_ok = check_kl_bound(1000);
  kv("kl_bound", kl_ok);

  bool all = model_ok && complexity_ok && conc.pass && separation_ok && kl_ok;
  kv("verdict", all);
  return all ? 0 : 1;
}

inline int cmd_adversary(const CommonFlags& f) {
  nlohmann::json j = load_json_file(f.config);
  double alpha = 0.0;
  std::vector<double> p, q;
  long long T = 0;
  int reps = 0;
  std::string alg, shape_name;
  std::uint64_t seed = 0;
  std::string out_dir;
  try {
    shape_name = j.value("shape", std::string("isolated"));
    alpha = j.at("alpha").get<double>();
    p = j.at("p").get<std::vector<double>>();
    q = j.at("q").get<std::vector<double>>();
    T = j.at("T").get<long long>();
    reps = j.value("reps", 200);
    alg = j.value("algorithm", std::string("alg-nmc"));
    seed = f.seed_set ? f.seed : j.value("seed", std::uint64_t{0});
    out_dir = f.out_set ? f.out : j.value("out", std::string("."));
    if (shape_name != "isolated" && shape_name != "coordinate")
      throw std::invalid_argument("shape must be isolated or coordinate");
    if (reps < 2) throw std::invalid_argument("reps must be >= 2");
  } catch (const std::exception& e) {
    throw UsageError(std::string("adversary config: ") + e.what());
  }
  reps = scaled_reps(reps, f.quick);
  const FamilyShape shape = shape_name == "isolated" ? FamilyShape::Isolated
                                                     : FamilyShape::Coordinate;

  AdversarialFamily fam;
  LowerBoundReport lb;
  try {
    fam = build_adversarial_family(alpha, p, q, T, shape);
    lb = theoretical_lower_bound(alpha, p, q, T);
  } catch (const std::exception& e) {
    throw UsageError(std::string("adversary config: ") + e.what());
  }
  kv("shape", to_string(fam.shape));
  kv("epsilon", fam.epsilon);
  kv("m1", fam.m1);
  kv("regime", lb.regime);
  kv("m_tilde", lb.m_tilde);
  kv("bound", lb.bound);

  const RandomStream master(seed);
  const int N = fam.base.num_arms;
  double max_hard = -1.0, max_hard_se = 0.0;
  int max_arm = -1;
  for (std::size_t m = 0; m < fam.members.size(); ++m) {
    const int arm = fam.member_arms[m];
    if (std::find(fam.hard_set.begin(), fam.hard_set.end(), arm) ==
        fam.hard_set.end())
      continue;
    PolicyFactory make = [&]() {
      return make_policy(alg, N, 2, static_cast<int>(T), Mode::Nmc);
    };
    RegretReport rep = estimate_simple_regret(
        fam.members[m], make, static_cast<int>(T), reps,
        master.child("member", m).key(), effective_workers(f));
    log("member " + std::to_string(arm + 1) +
        " regret=" + format_double(rep.regret_hat));
    if (rep.regret_hat > max_hard) {
      max_hard = rep.regret_hat;
      max_hard_se = rep.stderr_;
      max_arm = arm;
    }
  }
  kv("max_hard_regret", max_hard);
  kv("max_hard_stderr", max_hard_se);
  kv("max_hard_arm", max_arm + 1);
  const bool ok = max_hard + 3.0 * max_hard_se >= lb.bound;
  kv("verdict", ok);

  std::filesystem::create_directories(out_dir);
  const std::string fam_path =
      (std::filesystem::path(out_dir) / "family.json").string();
  write_text_file(fam_path, family_to_json(fam).dump(2) + "\n");
  kv("family", fam_path);
  return ok ? 0 : 1;
}

inline int cmd_gen_instance(const CommonFlags& f) {
  GeneratorSpec g;
  try {
    g = generator_from_json(load_json_file(f.config));
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(std::string("generator config: ") + e.what());
  }
  const std::uint64_t seed = f.seed_set ? f.seed : 0;
  RandomStream rng = RandomStream(seed).child("instance");
  HcbInstance inst = random_instance(g, rng);
  const std::string out_dir = f.out_set ? f.out : ".";
  std::filesystem::create_directories(out_dir);
  const std::string path =
      (std::filesystem::path(out_dir) / "instance.json").string();
  save_instance(inst, path);
  kv("path", path);
  kv("N", inst.num_arms);
  kv("K", inst.num_contexts);
  if (inst.num_contexts == 2) {
    kv("m1", m_value(inst.p()));
    kv("m0", m_value(inst.q()));
  }
  return 0;
}

}  // namespace cli_detail

// Entry point; args excludes the program name. Returns the process exit code.
inline int run_cli(std::vector<std::string> args) {
  using cli_detail::CommonFlags;
  CLI::App app{"hierarchical causal bandit simulator and verification harness"};
  app.require_subcommand(1);

  struct SubSpec {
    CLI::App* sub = nullptr;
    CommonFlags flags;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* out_opt = nullptr;
  };
  std::vector<std::unique_ptr<SubSpec>> specs;
  auto add_sub = [&](const std::string& name, const std::string& desc,
                     bool takes_config) {
    auto spec = std::make_unique<SubSpec>();
    spec->sub = app.add_subcommand(name, desc);
    if (takes_config)
      spec->sub
          ->add_option("-c,--config", spec->flags.config, "JSON configuration file")
          ->required()
          ->check(CLI::ExistingFile);
    spec->seed_opt =
        spec->sub->add_option("--seed", spec->flags.seed, "master RNG seed");
    spec->sub->add_option("--workers", spec->flags.workers,
                          "worker thread cap (default: hardware)");
    spec->sub->add_flag("--quick", spec->flags.quick,
                        "scale replication counts down 10x");
    spec->out_opt = spec->sub->add_option("--out", spec->flags.out,
                                          "output directory override");
    specs.push_back(std::move(spec));
    return specs.back().get();
  };

  SubSpec* run_spec = add_sub("run", "estimate simple regret for one cell", true);
  SubSpec* sweep_spec = add_sub("sweep", "run the full algorithms x T grid", true);
  SubSpec* verify_spec =
      add_sub("verify-lemmas", "run the built-in verification suites", false);
  SubSpec* adv_spec =
      add_sub("adversary", "measure a policy against a worst-case family", true);
  SubSpec* gen_spec = add_sub("gen-instance", "draw and save a random instance", true);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  for (auto& spec : specs) {
    spec->flags.seed_set = spec->seed_opt->count() > 0;
    spec->flags.out_set = spec->out_opt->count() > 0;
  }

  try {
    if (run_spec->sub->parsed()) return cli_detail::cmd_run(run_spec->flags);
    if (sweep_spec->sub->parsed()) return cli_detail::cmd_sweep(sweep_spec->flags);
    if (verify_spec->sub->parsed()) return cli_detail::cmd_verify(verify_spec->flags);
    if (adv_spec->sub->parsed()) return cli_detail::cmd_adversary(adv_spec->flags);
    if (gen_spec->sub->parsed()) return cli_detail::cmd_gen_instance(gen_spec->flags);
    std::cerr << "error: no subcommand selected\n";
    return 2;
  } catch (const cli_detail::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace hcb
