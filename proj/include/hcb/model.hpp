#pragma once
// Generative model: a context S ~ alpha over {0..K-1}, arms X_1..X_N that are
// conditionally independent Bernoullis given S, and a binary reward Y with
// P(Y=1|X=x) = r(x). Actions are do-interventions: do() observes, do(X_j=x)
// forces one arm, do(S=s) forces the context (manipulable mode only).
//
// Arms are indexed 0-based internally; external text (labels, files) uses
// 1-based arm names, e.g. "do(X3=1)". Arm bit-vectors are packed into a
// uint64 little-endian: arm j occupies bit j.

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hcb/rng.hpp"

namespace hcb {

enum class Mode { Nmc, Mc };

inline std::string to_string(Mode m) { return m == Mode::Nmc ? "nmc" : "mc"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "nmc") return Mode::Nmc;
  if (s == "mc") return Mode::Mc;
  throw std::invalid_argument("mode must be \"nmc\" or \"mc\", got \"" + s + "\"");
}

// ----- actions --------------------------------------------------------------

enum class ActionKind { Observe, DoArm, DoContext };

struct Action {
  ActionKind kind = ActionKind::Observe;
  int arm = -1;      // 0-based, DoArm only
  int bit = -1;      // forced arm value, DoArm only
  int context = -1;  // forced context, DoContext only

  static Action observe() { return Action{}; }
  static Action do_arm(int arm, int bit) {
    return Action{ActionKind::DoArm, arm, bit, -1};
  }
  static Action do_context(int s) {
    return Action{ActionKind::DoContext, -1, -1, s};
  }
  friend bool operator==(const Action&, const Action&) = default;
};

// Canonical order: do(), then do(X_j=x) ascending by (j, x), then do(S=s)
// ascending by s. Used for tie-breaks and for report layouts.
inline int canonical_index(const Action& a, int num_arms) {
  switch (a.kind) {
    case ActionKind::Observe:
      return 0;
    case ActionKind::DoArm:
      return 1 + 2 * a.arm + a.bit;
    case ActionKind::DoContext:
      return 1 + 2 * num_arms + a.context;
  }
  return -1;
}

inline std::string action_label(const Action& a) {
  switch (a.kind) {
    case ActionKind::Observe:
      return "do()";
    case ActionKind::DoArm:
      return "do(X" + std::to_string(a.arm + 1) + "=" + std::to_string(a.bit) +
             ")";
    case ActionKind::DoContext:
      return "do(S=" + std::to_string(a.context) + ")";
  }
  return "?";
}

// ----- reward functions -----------------------------------------------------

struct ConstantHalf {};

// Explicit table r(x) over all 2^N arm configurations, index little-endian.
struct DenseTable {
  std::vector<double> values;
};

// r(x) = 1/2 + epsilon * 1{ (x & support) == pattern }: a bump on the
// configurations matching a partial assignment of the arms.
struct TargetBump {
  double epsilon = 0.0;
  std::uint64_t support = 0;  // bit j set  <=>  arm j constrained
  std::uint64_t pattern = 0;  // required bits, subset of support

  bool hit(std::uint64_t x) const { return (x & support) == pattern; }
};

using RewardFunction = std::variant<ConstantHalf, DenseTable, TargetBump>;

inline TargetBump make_target_bump(
    double epsilon, const std::vector<std::pair<int, int>>& constraints) {
  TargetBump r;
  r.epsilon = epsilon;
  for (auto [arm, bit] : constraints) {
    if (arm < 0 || arm >= 64 || (bit != 0 && bit != 1))
      throw std::invalid_argument("make_target_bump: bad constraint");
    r.support |= std::uint64_t{1} << arm;
    if (bit) r.pattern |= std::uint64_t{1} << arm;
  }
  return r;
}

// ----- instances ------------------------------------------------------------

struct HcbInstance {
  int num_contexts = 0;                   // K
  int num_arms = 0;                       // N
  std::vector<double> alpha;              // P(S=i), length K
  std::vector<std::vector<double>> cond;  // cond[i][j] = P(X_j=1 | S=i)
  RewardFunction reward = ConstantHalf{};

  // Binary-context accessors matching the usual (alpha, p, q) parameterization:
  // p = conditionals under S=1, q = conditionals under S=0.
  const std::vector<double>& p() const { return cond.at(1); }
  const std::vector<double>& q() const { return cond.at(0); }
};

inline double reward_mean(const HcbInstance& inst, std::uint64_t x) {
  if (std::holds_alternative<ConstantHalf>(inst.reward)) return 0.5;
  if (const auto* t = std::get_if<TargetBump>(&inst.reward))
    return 0.5 + (t->hit(x) ? t->epsilon : 0.0);
  return std::get<DenseTable>(inst.reward).values[static_cast<std::size_t>(x)];
}

inline void validate_instance(const HcbInstance& inst) {
  const int K = inst.num_contexts, N = inst.num_arms;
  if (K < 1) throw std::invalid_argument("instance: K must be >= 1");
  if (N < 1) throw std::invalid_argument("instance: N must be >= 1");
  if (N > 64) throw std::invalid_argument("instance: N must be <= 64");
  if (static_cast<int>(inst.alpha.size()) != K)
    throw std::invalid_argument("instance: alpha must have K entries");
  double sum = 0.0;
  for (double a : inst.alpha) {
    if (!(a > 0.0)) throw std::invalid_argument("instance: alpha entries must be > 0");
    sum += a;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("instance: alpha must sum to 1");
  if (static_cast<int>(inst.cond.size()) != K)
    throw std::invalid_argument("instance: cond must have K rows");
  for (const auto& row : inst.cond) {
    if (static_cast<int>(row.size()) != N)
      throw std::invalid_argument("instance: cond rows must have N entries");
    for (double c : row)
      if (!(c > 0.0 && c < 1.0))
        throw std::invalid_argument(
            "instance: conditionals must lie strictly inside (0,1)");
  }
  if (const auto* d = std::get_if<DenseTable>(&inst.reward)) {
    if (N > 20)
      throw std::invalid_argument("instance: dense reward tables need N <= 20");
    if (d->values.size() != (std::size_t{1} << N))
      throw std::invalid_argument("instance: dense table must have 2^N values");
    for (double v : d->values)
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("instance: reward values must be in [0,1]");
  }
  if (const auto* t = std::get_if<TargetBump>(&inst.reward)) {
    if (!(t->epsilon > 0.0 && t->epsilon < 0.25))
      throw std::invalid_argument("instance: bump size must be in (0, 1/4)");
    if ((t->pattern & ~t->support) != 0)
      throw std::invalid_argument("instance: bump pattern outside its support");
    if (N < 64 && (t->support >> N) != 0)
      throw std::invalid_argument("instance: bump support outside the arm range");
  }
}

inline HcbInstance build_instance(int K, int N, std::vector<double> alpha,
                                  std::vector<std::vector<double>> cond,
                                  RewardFunction reward) {
  HcbInstance inst;
  inst.num_contexts = K;
  inst.num_arms = N;
  inst.alpha = std::move(alpha);
  inst.cond = std::move(cond);
  inst.reward = std::move(reward);
  validate_instance(inst);
  return inst;
}

// K=2 convenience: q is the S=0 row, p the S=1 row.
inline HcbInstance binary_instance(double alpha1, std::vector<double> p,
                                   std::vector<double> q,
                                   RewardFunction reward) {
  const int N = static_cast<int>(p.size());
  return build_instance(2, N, {1.0 - alpha1, alpha1},
                        {std::move(q), std::move(p)}, std::move(reward));
}

// ----- action enumeration ---------------------------------------------------

inline std::vector<Action> enumerate_actions(int num_arms, int num_contexts,
                                             Mode mode) {
  std::vector<Action> out;
  out.reserve(1 + 2 * num_arms + (mode == Mode::Mc ? num_contexts : 0));
  out.push_back(Action::observe());
  for (int j = 0; j < num_arms; ++j)
    for (int x = 0; x <= 1; ++x) out.push_back(Action::do_arm(j, x));
  if (mode == Mode::Mc)
    for (int s = 0; s < num_contexts; ++s) out.push_back(Action::do_context(s));
  return out;
}

inline std::vector<Action> enumerate_actions(const HcbInstance& inst,
                                             Mode mode) {
  return enumerate_actions(inst.num_arms, inst.num_contexts, mode);
}

inline void check_action(const HcbInstance& inst, const Action& a) {
  switch (a.kind) {
    case ActionKind::Observe:
      return;
    case ActionKind::DoArm:
      if (a.arm < 0 || a.arm >= inst.num_arms || (a.bit != 0 && a.bit != 1))
        throw std::invalid_argument("action: arm index or value out of range");
      return;
    case ActionKind::DoContext:
      if (a.context < 0 || a.context >= inst.num_contexts)
        throw std::invalid_argument("action: context value out of range");
      return;
  }
}

// ----- sampling -------------------------------------------------------------

struct Observation {
  int s = 0;
  std::uint64_t x = 0;
  int y = 0;
};

// One round of the environment under the given intervention. Draw order is
// fixed (context unless forced, then arms in ascending index skipping the
// forced one, then the reward), which pins down histories byte-for-byte for
// a given stream.
inline Observation sample_round(const HcbInstance& inst, const Action& a,
                                RandomStream& rng) {
  check_action(inst, a);
  Observation obs;
  obs.s = a.kind == ActionKind::DoContext ? a.context
                                          : rng.categorical(inst.alpha);
  const std::vector<double>& row = inst.cond[obs.s];
  for (int j = 0; j < inst.num_arms; ++j) {
    int bit;
    if (a.kind == ActionKind::DoArm && a.arm == j)
      bit = a.bit;
    else
      bit = rng.bernoulli(row[j]) ? 1 : 0;
    obs.x |= static_cast<std::uint64_t>(bit) << j;
  }
  obs.y = rng.bernoulli(reward_mean(inst, obs.x)) ? 1 : 0;
  return obs;
}

// ----- exact inference ------------------------------------------------------

namespace detail {

// P(X = x | S = s) with one arm optionally forced (forced arm contributes
// factor 1 when consistent, 0 otherwise).
inline double arm_vector_prob(const HcbInstance& inst, int s, std::uint64_t x,
                              int forced_arm, int forced_bit) {
  const std::vector<double>& row = inst.cond[s];
  double prob = 1.0;
  for (int j = 0; j < inst.num_arms; ++j) {
    int bit = static_cast<int>((x >> j) & 1);
    if (j == forced_arm) {
      if (bit != forced_bit) return 0.0;
      continue;
    }
    prob *= bit ? row[j] : 1.0 - row[j];
  }
  return prob;
}

}  // namespace detail

// P(S = s | a): point mass under do(S=s0), alpha otherwise.
inline double context_prob(const HcbInstance& inst, const Action& a, int s) {
  if (a.kind == ActionKind::DoContext) return s == a.context ? 1.0 : 0.0;
  return inst.alpha[s];
}

// Joint P(S=s, X=x | a) for every (s, x); flat layout s * 2^N + x. Requires
// N <= 20 (enumeration cap); used by oracles and property checks.
inline std::vector<double> enumerate_joint(const HcbInstance& inst,
                                           const Action& a) {
  check_action(inst, a);
  if (inst.num_arms > 20)
    throw std::invalid_argument("enumerate_joint: N > 20 enumeration cap");
  const std::size_t width = std::size_t{1} << inst.num_arms;
  const int forced_arm = a.kind == ActionKind::DoArm ? a.arm : -1;
  std::vector<double> joint(static_cast<std::size_t>(inst.num_contexts) * width);
  for (int s = 0; s < inst.num_contexts; ++s) {
    double ps = context_prob(inst, a, s);
    if (ps == 0.0) continue;
    for (std::uint64_t x = 0; x < width; ++x)
      joint[s * width + x] =
          ps * detail::arm_vector_prob(inst, s, x, forced_arm, a.bit);
  }
  return joint;
}

// P((x & support) == pattern | a): closed-form product over the constrained
// arms only, so it works at any N.
inline double hit_probability(const HcbInstance& inst, const Action& a,
                              std::uint64_t support, std::uint64_t pattern) {
  check_action(inst, a);
  double total = 0.0;
  for (int s = 0; s < inst.num_contexts; ++s) {
    double ps = context_prob(inst, a, s);
    if (ps == 0.0) continue;
    const std::vector<double>& row = inst.cond[s];
    double prod = 1.0;
    for (std::uint64_t rest = support; rest != 0; rest &= rest - 1) {
      int j = std::countr_zero(rest);
      int want = static_cast<int>((pattern >> j) & 1);
      if (a.kind == ActionKind::DoArm && a.arm == j) {
        if (a.bit != want) {
          prod = 0.0;
          break;
        }
        continue;  // forced consistently: factor 1
      }
      prod *= want ? row[j] : 1.0 - row[j];
    }
    total += ps * prod;
  }
  return total;
}

// mu_a = E[Y | A=a]. Structured rewards evaluate in closed form at any N;
// dense tables enumerate all 2^N configurations per context.
inline double exact_mu(const HcbInstance& inst, const Action& a) {
  check_action(inst, a);
  if (std::holds_alternative<ConstantHalf>(inst.reward)) return 0.5;
  if (const auto* t = std::get_if<TargetBump>(&inst.reward))
    return 0.5 + t->epsilon * hit_probability(inst, a, t->support, t->pattern);
  const auto& values = std::get<DenseTable>(inst.reward).values;
  std::vector<double> joint = enumerate_joint(inst, a);
  const std::size_t width = std::size_t{1} << inst.num_arms;
  double mu = 0.0;
  for (int s = 0; s < inst.num_contexts; ++s)
    for (std::size_t x = 0; x < width; ++x)
      mu += joint[s * width + x] * values[x];
  return mu;
}

// P(Y=1 | S=s, X_j=x): by conditional independence of the arms given S this
// is the mutilated-graph expectation with arm j pinned, so no division by a
// marginal is needed.
inline double exact_conditional_reward(const HcbInstance& inst, int s, int j,
                                       int xbit) {
  if (s < 0 || s >= inst.num_contexts || j < 0 || j >= inst.num_arms ||
      (xbit != 0 && xbit != 1))
    throw std::invalid_argument("exact_conditional_reward: index out of range");
  if (std::holds_alternative<ConstantHalf>(inst.reward)) return 0.5;
  if (const auto* t = std::get_if<TargetBump>(&inst.reward)) {
    double prod = 1.0;
    for (std::uint64_t rest = t->support; rest != 0; rest &= rest - 1) {
      int arm = std::countr_zero(rest);
      int want = static_cast<int>((t->pattern >> arm) & 1);
      if (arm == j) {
        if (want != xbit) {
          prod = 0.0;
          break;
        }
        continue;
      }
      prod *= want ? inst.cond[s][arm] : 1.0 - inst.cond[s][arm];
    }
    return 0.5 + t->epsilon * prod;
  }
  if (inst.num_arms > 20)
    throw std::invalid_argument("exact_conditional_reward: N > 20 enumeration cap");
  const auto& values = std::get<DenseTable>(inst.reward).values;
  const std::size_t width = std::size_t{1} << inst.num_arms;
  double mu = 0.0;
  for (std::uint64_t x = 0; x < width; ++x) {
    if (((x >> j) & 1) != static_cast<std::uint64_t>(xbit)) continue;
    mu += detail::arm_vector_prob(inst, s, x, j, xbit) * values[x];
  }
  return mu;
}

// arg max of exact_mu over the mode's action set, canonical tie-break.
inline std::pair<Action, double> optimal_action(const HcbInstance& inst,
                                                Mode mode) {
  std::vector<Action> actions = enumerate_actions(inst, mode);
  Action best = actions.front();
  double best_mu = exact_mu(inst, best);
  for (std::size_t i = 1; i < actions.size(); ++i) {
    double mu = exact_mu(inst, actions[i]);
    if (mu > best_mu) {
      best = actions[i];
      best_mu = mu;
    }
  }
  return {best, best_mu};
}

// ----- instance files -------------------------------------------------------
//
// JSON layout:
//   {"K": 2, "N": 3, "alpha": [...], "cond": [[row s=0], [row s=1]],
//    "reward": {"type": "constant_half"}
//            | {"type": "dense_table", "values": [... 2^N ...]}
//            | {"type": "target_bump", "epsilon": e, "target": [[arm, bit]...]}}
// Arms in "target" are 1-based to match the do(Xj=...) naming.

inline nlohmann::json instance_to_json(const HcbInstance& inst) {
  nlohmann::json j;
  j["K"] = inst.num_contexts;
  j["N"] = inst.num_arms;
  j["alpha"] = inst.alpha;
  j["cond"] = inst.cond;
  if (std::holds_alternative<ConstantHalf>(inst.reward)) {
    j["reward"] = {{"type", "constant_half"}};
  } else if (const auto* d = std::get_if<DenseTable>(&inst.reward)) {
    j["reward"] = {{"type", "dense_table"}, {"values", d->values}};
  } else {
    const auto& t = std::get<TargetBump>(inst.reward);
    nlohmann::json target = nlohmann::json::array();
    for (std::uint64_t rest = t.support; rest != 0; rest &= rest - 1) {
      int arm = std::countr_zero(rest);
      target.push_back({arm + 1, static_cast<int>((t.pattern >> arm) & 1)});
    }
    j["reward"] = {{"type", "target_bump"},
                   {"epsilon", t.epsilon},
                   {"target", target}};
  }
  return j;
}

inline HcbInstance instance_from_json(const nlohmann::json& j) {
  RewardFunction reward = ConstantHalf{};
  const nlohmann::json& r = j.at("reward");
  std::string type = r.at("type").get<std::string>();
  if (type == "constant_half") {
    reward = ConstantHalf{};
  } else if (type == "dense_table") {
    reward = DenseTable{r.at("values").get<std::vector<double>>()};
  } else if (type == "target_bump") {
    std::vector<std::pair<int, int>> constraints;
    for (const auto& c : r.at("target"))
      constraints.emplace_back(c.at(0).get<int>() - 1, c.at(1).get<int>());
    reward = make_target_bump(r.at("epsilon").get<double>(), constraints);
  } else {
    throw std::invalid_argument("instance: unknown reward type \"" + type + "\"");
  }
  return build_instance(j.at("K").get<int>(), j.at("N").get<int>(),
                        j.at("alpha").get<std::vector<double>>(),
                        j.at("cond").get<std::vector<std::vector<double>>>(),
                        std::move(reward));
}

inline HcbInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open instance file: " + path);
  nlohmann::json j;
  try {
    in >> j;
    return instance_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad instance file " + path + ": " + e.what());
  }
}

inline void save_instance(const HcbInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write instance file: " + path);
  out << instance_to_json(inst).dump(2) << '\n';
}

}  // namespace hcb
