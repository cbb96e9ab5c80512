#pragma once
// Adversarial two-context families around a neutral base instance, the
// separation properties that make them hard to tell apart, and the resulting
// minimax lower bound on simple regret.
//
// A family consists of a base instance with constant reward 1/2 and one
// member per targeted arm whose reward is bumped by epsilon on a target arm
// set X*_i:
//   isolated shape:   X*_i = { x : x_i = 1, x_l = 0 for l in the first
//                     ceil(m1) arms, l != i }, one member per such arm;
//   coordinate shape: X*_i = { x : x_i = 1 }, one member per arm.
// epsilon = sqrt(ln 1.05)/4 * sqrt(m1/T) (isolated) or the same with m1 = 1
// (coordinate), keeping every member within KL budget ln(1.05) of the base
// over a T-round episode.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hcb/agents.hpp"
#include "hcb/model.hpp"
#include "hcb/rng.hpp"

#include <json.hpp>

namespace hcb {

// Total KL divergence allowed between base and member episode distributions.
inline double kl_budget() { return std::log(1.05); }

// KL(Ber(1/2) || Ber(1/2+eps)): divergence contributed by one round whose arm
// draw lands in the target set. Bounded above by 16 eps^2 / 3 on (0, 1/4).
inline double kl_per_hit(double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon < 0.25))
    throw std::invalid_argument("kl_per_hit: epsilon must be in (0, 1/4)");
  return 0.5 * std::log(0.5 / (0.5 + epsilon)) +
         0.5 * std::log(0.5 / (0.5 - epsilon));
}

namespace detail {

// Preconditions shared by the isolated-target construction: p sorted
// ascending, entries at most 1/2, and hardness above 2.
inline double require_isolated_base(const std::vector<double>& p) {
  if (!std::is_sorted(p.begin(), p.end()))
    throw std::invalid_argument("isolated construction: p must be sorted ascending");
  for (double v : p)
    if (!(v <= 0.5))
      throw std::invalid_argument("isolated construction: p entries must be <= 1/2");
  double m1 = m_value(p);
  if (!(m1 > 2.0))
    throw std::invalid_argument("isolated construction: need m(p) > 2");
  return m1;
}

}  // namespace detail

// Among the ceil(m(p)) bump-candidate arms, the floor(m(p)/2) with the
// smallest q values (ties kept in arm order) are the hardest to tell apart.
// Returned in ascending-q order, 0-based.
inline std::vector<int> hard_index_set(const std::vector<double>& p,
                                       const std::vector<double>& q) {
  if (p.size() != q.size())
    throw std::invalid_argument("hard_index_set: p and q sizes differ");
  const double m1 = detail::require_isolated_base(p);
  const int M = static_cast<int>(std::ceil(m1));
  std::vector<int> order(static_cast<std::size_t>(M));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&q](int a, int b) { return q[static_cast<std::size_t>(a)] <
                                               q[static_cast<std::size_t>(b)]; });
  order.resize(static_cast<std::size_t>(std::floor(m1 / 2.0)));
  return order;
}

enum class FamilyShape { Isolated, Coordinate };

inline std::string to_string(FamilyShape s) {
  return s == FamilyShape::Isolated ? "isolated" : "coordinate";
}

struct AdversarialFamily {
  FamilyShape shape = FamilyShape::Isolated;
  double epsilon = 0.0;
  double m1 = 0.0;            // m(p) of the base parameters
  long long T = 0;            // horizon the family was sized for
  HcbInstance base;           // constant reward 1/2
  std::vector<int> member_arms;       // bumped arm per member, 0-based
  std::vector<HcbInstance> members;   // base with the bump reward
  std::vector<int> hard_set;          // 0-based arms, ascending-q order

  const TargetBump& target_of(int member) const {
    const auto* bump =
        std::get_if<TargetBump>(&members.at(static_cast<std::size_t>(member)).reward);
    if (bump == nullptr)
      throw std::logic_error("adversarial member without a bump reward");
    return *bump;
  }
};

inline AdversarialFamily build_adversarial_family(double alpha1,
                                                  const std::vector<double>& p,
                                                  const std::vector<double>& q,
                                                  long long T,
                                                  FamilyShape shape) {
  AdversarialFamily fam;
  fam.shape = shape;
  fam.T = T;
  fam.base = binary_instance(alpha1, p, q, ConstantHalf{});
  fam.m1 = m_value(p);
  const int N = fam.base.num_arms;
  const double scale = std::sqrt(std::log(1.05)) / 4.0;

  if (shape == FamilyShape::Isolated) {
    fam.hard_set = hard_index_set(p, q);  // also enforces the base preconditions
    if (T < static_cast<long long>(std::ceil(fam.m1)))
      throw std::invalid_argument("isolated family: need T >= m(p)");
    fam.epsilon = scale * std::sqrt(fam.m1 / static_cast<double>(T));
    const int M = static_cast<int>(std::ceil(fam.m1));
    for (int i = 0; i < M; ++i) {
      std::vector<std::pair<int, int>> constraints;
      constraints.reserve(static_cast<std::size_t>(M));
      for (int l = 0; l < M; ++l) constraints.emplace_back(l, l == i ? 1 : 0);
      fam.member_arms.push_back(i);
      fam.members.push_back(binary_instance(
          alpha1, p, q, make_target_bump(fam.epsilon, constraints)));
    }
  } else {
    if (T < 1) throw std::invalid_argument("coordinate family: need T >= 1");
    fam.epsilon = scale * std::sqrt(1.0 / static_cast<double>(T));
    for (int i = 0; i < N; ++i) {
      fam.member_arms.push_back(i);
      fam.members.push_back(binary_instance(
          alpha1, p, q, make_target_bump(fam.epsilon, {{i, 1}})));
    }
    fam.hard_set = fam.member_arms;
  }
  if (!(fam.epsilon > 0.0) || !(fam.epsilon < 0.25))
    throw std::invalid_argument("adversarial family: epsilon left (0, 1/4)");
  return fam;
}

// ----- separation of the isolated targets --------------------------------------

struct SeparationMemberRow {
  int arm = -1;
  double p_target = 0.0;       // P(X in X*_i | do(X_i = 1)) under the base
  bool claim1_ok = false;      // alpha/e <= p_target <= 1
  bool in_hard_set = false;
  double max_other = 0.0;      // max over actions a != do(X_i=1)
  Action max_other_action;
  bool claim2_ok = true;       // max_other <= 1/m1 (hard-set members only)
};

struct SeparationReport {
  double alpha_over_e = 0.0;
  double m1 = 0.0;
  double claim2_cap = 0.0;  // 1/m1
  std::vector<SeparationMemberRow> rows;
  bool claim1_ok = false;
  bool claim2_ok = false;
  bool ok = false;
};

// Checks, in closed form under the base instance, that forcing a target's arm
// hits its isolated target set with probability at least alpha/e, while no
// hard-set target can be hit with probability above 1/m(p) by any other action.
inline SeparationReport verify_separation(double alpha1,
                                          const std::vector<double>& p,
                                          const std::vector<double>& q) {
  const std::vector<int> hard = hard_index_set(p, q);
  const HcbInstance base = binary_instance(alpha1, p, q, ConstantHalf{});
  const double m1 = m_value(p);
  const int M = static_cast<int>(std::ceil(m1));
  SeparationReport rep;
  rep.m1 = m1;
  rep.claim2_cap = 1.0 / m1;
  rep.alpha_over_e = alpha1 / std::exp(1.0);
  rep.claim1_ok = true;
  rep.claim2_ok = true;
  const std::vector<Action> actions =
      enumerate_actions(base.num_arms, base.num_contexts, Mode::Mc);
  for (int i = 0; i < M; ++i) {
    std::vector<std::pair<int, int>> constraints;
    for (int l = 0; l < M; ++l) constraints.emplace_back(l, l == i ? 1 : 0);
    const TargetBump bump = make_target_bump(0.1, constraints);
    SeparationMemberRow row;
    row.arm = i;
    const Action own = Action::do_arm(i, 1);
    row.p_target = hit_probability(base, own, bump.support, bump.pattern);
    row.claim1_ok = row.p_target >= rep.alpha_over_e && row.p_target <= 1.0;
    row.in_hard_set = std::find(hard.begin(), hard.end(), i) != hard.end();
    if (row.in_hard_set) {
      row.max_other = -1.0;
      for (const Action& a : actions) {
        if (a == own) continue;
        double h = hit_probability(base, a, bump.support, bump.pattern);
        if (h > row.max_other) {
          row.max_other = h;
          row.max_other_action = a;
        }
      }
      row.claim2_ok = row.max_other <= rep.claim2_cap;
    }
    rep.claim1_ok = rep.claim1_ok && row.claim1_ok;
    rep.claim2_ok = rep.claim2_ok && row.claim2_ok;
    rep.rows.push_back(row);
  }
  rep.ok = rep.claim1_ok && rep.claim2_ok;
  return rep;
}

inline SeparationReport verify_separation(const AdversarialFamily& fam) {
  if (fam.shape != FamilyShape::Isolated)
    throw std::invalid_argument("verify_separation: isolated families only");
  return verify_separation(fam.base.alpha[1], fam.base.p(), fam.base.q());
}

// ----- minimax lower bound ------------------------------------------------------

// Context-frequency thresholds above which a context's hardness survives the
// construction: tau_1 = 3e/(alpha(3-e)), tau_0 the same with 1-alpha.
inline double hardness_threshold(double alpha_side) {
  const double e = std::exp(1.0);
  return 3.0 * e / (alpha_side * (3.0 - e));
}

struct LowerBoundReport {
  int regime = 0;       // 1: both contexts hard, 2: only S=1, 3: only S=0, 4: neither
  double m1 = 0.0;      // m(p)
  double m0 = 0.0;      // m(q)
  double tau1 = 0.0;
  double tau0 = 0.0;
  double q_max = 0.0;
  double m_tilde = 0.0;
  double bound = 0.0;   // (1/127) * sqrt(m_tilde / T)
};

// Worst-case simple regret any strategy must suffer at horizon T against some
// instance sharing these observational parameters.
inline LowerBoundReport theoretical_lower_bound(double alpha1,
                                                const std::vector<double>& p,
                                                const std::vector<double>& q,
                                                long long T) {
  if (p.size() != q.size())
    throw std::invalid_argument("theoretical_lower_bound: p and q sizes differ");
  const int N = static_cast<int>(p.size());
  if (N < 4)
    throw std::invalid_argument("theoretical_lower_bound: need at least 4 arms");
  if (!(alpha1 > 0.0) || !(alpha1 < 1.0))
    throw std::invalid_argument("theoretical_lower_bound: alpha must be in (0,1)");
  LowerBoundReport rep;
  rep.m1 = m_value(p);
  rep.m0 = m_value(q);
  if (static_cast<double>(T) < std::max(rep.m1, rep.m0))
    throw std::invalid_argument("theoretical_lower_bound: need T >= max(m1, m0)");
  rep.tau1 = hardness_threshold(alpha1);
  rep.tau0 = hardness_threshold(1.0 - alpha1);
  rep.q_max = *std::max_element(q.begin(), q.end());
  const double a2 = alpha1 * alpha1;
  const double b2 = (1.0 - alpha1) * (1.0 - alpha1);
  const bool hard1 = rep.m1 >= rep.tau1;
  const bool hard0 = rep.m0 >= rep.tau0;
  if (hard1 && hard0) {
    rep.regime = 1;
    rep.m_tilde = std::max(rep.m1 * a2, rep.m0 * b2);
  } else if (hard1) {
    rep.regime = 2;
    rep.m_tilde = rep.m1 * a2;
  } else if (hard0) {
    rep.regime = 3;
    rep.m_tilde = rep.m0 * b2;
  } else {
    rep.regime = 4;
    const double gap = 1.0 - std::max(rep.q_max, 0.5);
    rep.m_tilde = gap * gap;
  }
  rep.bound = std::sqrt(rep.m_tilde / static_cast<double>(T)) / 127.0;
  return rep;
}

// ----- empirical KL between episode distributions -------------------------------

struct KlEstimate {
  double estimate = 0.0;   // kl_per_hit(eps) * mean target hits per episode
  double stderr_ = 0.0;
  double mean_hits = 0.0;
  int reps = 0;
};

// The divergence between a member's and the base's T-round history
// distributions equals kl_per_hit(eps) * E_base[# rounds whose arm vector
// lands in the target set]; the expectation is estimated by Monte Carlo on
// the base instance.
inline KlEstimate estimate_history_kl(const AdversarialFamily& fam, int member,
                                      const PolicyFactory& make_policy, int T,
                                      int reps, RandomStream rng) {
  if (reps < 2) throw std::invalid_argument("estimate_history_kl: need reps >= 2");
  if (member < 0 || member >= static_cast<int>(fam.members.size()))
    throw std::invalid_argument("estimate_history_kl: member out of range");
  const TargetBump& bump = fam.target_of(member);
  std::vector<double> hits;
  hits.reserve(static_cast<std::size_t>(reps));
  for (int e = 0; e < reps; ++e) {
    std::unique_ptr<Policy> policy = make_policy();
    EpisodeResult res = run_episode(fam.base, *policy, T, rng.child("episode", e));
    long long n = 0;
    for (const StepRecord& rec : res.history) n += bump.hit(rec.obs.x) ? 1 : 0;
    hits.push_back(static_cast<double>(n));
  }
  double mean = std::accumulate(hits.begin(), hits.end(), 0.0) /
                static_cast<double>(reps);
  double ss = 0.0;
  for (double h : hits) ss += (h - mean) * (h - mean);
  double sd = std::sqrt(ss / static_cast<double>(reps - 1));
  // A zero bump leaves the member identical to the base, so no divergence
  // accrues regardless of how often the target is hit.
  const double per_hit = fam.epsilon == 0.0 ? 0.0 : kl_per_hit(fam.epsilon);
  KlEstimate out;
  out.reps = reps;
  out.mean_hits = mean;
  out.estimate = per_hit * mean;
  out.stderr_ = per_hit * sd / std::sqrt(static_cast<double>(reps));
  return out;
}

// ----- serialization -------------------------------------------------------------

// Arm indices are 1-based in serialized form, matching action labels.
inline nlohmann::json family_to_json(const AdversarialFamily& fam) {
  nlohmann::json j;
  j["shape"] = to_string(fam.shape);
  j["epsilon"] = fam.epsilon;
  j["m1"] = fam.m1;
  j["T"] = fam.T;
  j["alpha"] = fam.base.alpha[1];
  j["p"] = fam.base.p();
  j["q"] = fam.base.q();
  nlohmann::json members = nlohmann::json::array();
  for (int arm : fam.member_arms) members.push_back(arm + 1);
  j["members"] = members;
  nlohmann::json hard = nlohmann::json::array();
  for (int arm : fam.hard_set) hard.push_back(arm + 1);
  j["hard_set"] = hard;
  return j;
}

}  // namespace hcb
