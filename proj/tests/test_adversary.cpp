#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hcb/adversary.hpp"
#include "hcb/harness.hpp"
#include "hcb/model.hpp"
#include "oracle.hpp"

using namespace hcb;

namespace {

const std::vector<double> kTenth3{0.1, 0.1, 0.1};

// Always plays do(X_arm = 0); with isolated targets this can never land in
// any member's target set.
class AvoiderPolicy final : public Policy {
 public:
  explicit AvoiderPolicy(int arm) : arm_(arm) {}
  std::string name() const override { return "avoider"; }
  Mode mode() const override { return Mode::Nmc; }
  Action next_action(const History&, int, RandomStream&) override {
    return Action::do_arm(arm_, 0);
  }
  Action final_choice(const History&, RandomStream&) override {
    return Action::do_arm(arm_, 0);
  }

 private:
  int arm_;
};

}  // namespace

TEST_CASE("divergence budget and per-hit cost") {
  CHECK(kl_budget() == std::log(1.05));
  // KL(Ber(1/2) || Ber(0.7)) per hit
  double v = kl_per_hit(0.2);
  CHECK(v == Catch::Approx(0.5 * std::log(25.0 / 21.0)).margin(1e-15));
  CHECK(v == Catch::Approx(0.087177).margin(1e-6));
  CHECK(v <= 16.0 * 0.04 / 3.0);
  CHECK_THROWS_AS(kl_per_hit(0.0), std::invalid_argument);
  CHECK_THROWS_AS(kl_per_hit(0.25), std::invalid_argument);
  CHECK_THROWS_AS(kl_per_hit(-0.1), std::invalid_argument);
}

TEST_CASE("per-hit divergence stays below its quadratic envelope") {
  for (int i = 1; i <= 1000; ++i) {
    double eps = 0.2499 * static_cast<double>(i) / 1000.0;
    double v = kl_per_hit(eps);
    INFO("eps " << eps);
    CHECK(v > 0.0);
    CHECK(v <= 16.0 * eps * eps / 3.0);
  }
}

TEST_CASE("hard index set keeps the lowest-q bump candidates") {
  CHECK(hard_index_set(kTenth3, kTenth3) == std::vector<int>{0});
  // m(p) = 4; all four candidates ranked by q, keep floor(4/2) = 2.
  CHECK(hard_index_set({0.1, 0.1, 0.1, 0.1}, {0.4, 0.3, 0.2, 0.1}) ==
        std::vector<int>{3, 2});
  // Fractional hardness 2.5 keeps floor(2.5/2) = 1 of ceil(2.5) = 3 candidates.
  CHECK(hard_index_set({0.31, 0.35, 0.40, 0.45, 0.49},
                       {0.5, 0.3, 0.4, 0.2, 0.2}) == std::vector<int>{1});
  // Ties keep arm order.
  CHECK(hard_index_set({0.1, 0.1, 0.1, 0.1}, {0.2, 0.2, 0.2, 0.2}) ==
        std::vector<int>{0, 1});

  CHECK_THROWS_AS(hard_index_set({0.2, 0.1, 0.1}, kTenth3),
                  std::invalid_argument);  // unsorted
  CHECK_THROWS_AS(hard_index_set({0.1, 0.1, 0.6}, kTenth3),
                  std::invalid_argument);  // above 1/2
  CHECK_THROWS_AS(hard_index_set({0.4, 0.45}, {0.4, 0.45}),
                  std::invalid_argument);  // m(p) = 2 is not > 2
  CHECK_THROWS_AS(hard_index_set(kTenth3, {0.1, 0.1}), std::invalid_argument);
}

TEST_CASE("family construction sizes the bump to the divergence budget") {
  std::vector<double> p4{0.1, 0.1, 0.1, 0.1}, q4{0.4, 0.3, 0.2, 0.1};
  AdversarialFamily iso =
      build_adversarial_family(0.5, p4, q4, 100, FamilyShape::Isolated);
  CHECK(iso.m1 == 4.0);
  CHECK(iso.epsilon == Catch::Approx(0.011044).margin(1e-6));
  CHECK(iso.epsilon ==
        Catch::Approx(std::sqrt(std::log(1.05)) / 4.0 * std::sqrt(4.0 / 100.0))
            .margin(1e-15));
  REQUIRE(iso.members.size() == 4);
  CHECK(iso.member_arms == std::vector<int>{0, 1, 2, 3});
  CHECK(iso.hard_set == std::vector<int>{3, 2});
  for (int i = 0; i < 4; ++i) {
    const TargetBump& bump = iso.target_of(i);
    CHECK(bump.support == 0b1111u);
    CHECK(bump.pattern == (std::uint64_t{1} << i));
    CHECK(bump.epsilon == iso.epsilon);
    CHECK(iso.members[static_cast<std::size_t>(i)].alpha == iso.base.alpha);
    CHECK(iso.members[static_cast<std::size_t>(i)].cond == iso.base.cond);
  }
  CHECK(std::holds_alternative<ConstantHalf>(iso.base.reward));

  AdversarialFamily coord =
      build_adversarial_family(0.5, p4, q4, 100, FamilyShape::Coordinate);
  CHECK(coord.epsilon == Catch::Approx(0.0055221).margin(1e-6));
  REQUIRE(coord.members.size() == 4);
  CHECK(coord.hard_set == std::vector<int>{0, 1, 2, 3});
  for (int i = 0; i < 4; ++i) {
    const TargetBump& bump = coord.target_of(i);
    CHECK(bump.support == (std::uint64_t{1} << i));
    CHECK(bump.pattern == (std::uint64_t{1} << i));
  }

  // The horizon must cover the bump candidates.
  CHECK_THROWS_AS(build_adversarial_family(0.5, p4, q4, 3, FamilyShape::Isolated),
                  std::invalid_argument);
  CHECK_NOTHROW(build_adversarial_family(0.5, p4, q4, 3, FamilyShape::Coordinate));
}

TEST_CASE("members differ from the base only inside the target set") {
  AdversarialFamily fam = build_adversarial_family(0.5, {0.1, 0.1, 0.1, 0.1},
                                                   {0.4, 0.3, 0.2, 0.1}, 200,
                                                   FamilyShape::Isolated);
  for (std::size_t i = 0; i < fam.members.size(); ++i) {
    const TargetBump& bump = fam.target_of(static_cast<int>(i));
    for (const Action& a : enumerate_actions(fam.base, Mode::Mc)) {
      double member_mu = oracle::mu(fam.members[i], a);
      double base_hit = oracle::hit(fam.base, a, bump.support, bump.pattern);
      INFO("member " << i << " action " << action_label(a));
      CHECK(member_mu == Catch::Approx(0.5 + fam.epsilon * base_hit).margin(1e-12));
    }
  }
}

TEST_CASE("separation of the symmetric three-arm construction") {
  SeparationReport rep = verify_separation(0.5, kTenth3, kTenth3);
  CHECK(rep.ok);
  CHECK(rep.m1 == 3.0);
  CHECK(rep.alpha_over_e == Catch::Approx(0.5 / std::exp(1.0)).margin(1e-15));
  REQUIRE(rep.rows.size() == 3);
  for (const SeparationMemberRow& row : rep.rows) {
    CHECK(row.p_target == Catch::Approx(0.81).margin(1e-12));
    CHECK(row.claim1_ok);
  }
  CHECK(rep.rows[0].in_hard_set);
  CHECK_FALSE(rep.rows[1].in_hard_set);
  CHECK_FALSE(rep.rows[2].in_hard_set);
  // Best alternative for the hard member: forcing a sibling arm to zero.
  CHECK(rep.rows[0].max_other == Catch::Approx(0.09).margin(1e-12));
  CHECK(rep.rows[0].max_other_action == Action::do_arm(1, 0));
  CHECK(rep.rows[0].claim2_ok);

  // Passive observation and arm-off actions stay far below the cap.
  HcbInstance base = binary_instance(0.5, kTenth3, kTenth3, ConstantHalf{});
  CHECK(hit_probability(base, Action::observe(), 0b111, 0b001) ==
        Catch::Approx(0.081).margin(1e-12));
  CHECK(hit_probability(base, Action::do_arm(0, 0), 0b111, 0b001) == 0.0);

  AdversarialFamily fam =
      build_adversarial_family(0.5, kTenth3, kTenth3, 50, FamilyShape::Isolated);
  CHECK(verify_separation(fam).ok);
  AdversarialFamily coord =
      build_adversarial_family(0.5, kTenth3, kTenth3, 50, FamilyShape::Coordinate);
  CHECK_THROWS_AS(verify_separation(coord), std::invalid_argument);
}

TEST_CASE("separation claims hold in closed form across random bases") {
  RandomStream rng(246810);
  int built = 0;
  for (int trial = 0; trial < 200 && built < 25; ++trial) {
    auto child = rng.child("base", static_cast<std::uint64_t>(trial));
    int n = 4 + static_cast<int>(child.uniform(0.0, 7.0));
    std::vector<double> p(static_cast<std::size_t>(n)), q(p);
    for (double& v : p) v = child.uniform(0.05, 0.45);
    for (double& v : q) v = child.uniform(0.05, 0.45);
    std::sort(p.begin(), p.end());
    if (m_value(p) <= 2.0) continue;
    ++built;
    double alpha1 = child.uniform(0.2, 0.8);
    SeparationReport rep = verify_separation(alpha1, p, q);
    INFO("trial " << trial << " n " << n << " alpha " << alpha1);
    CHECK(rep.ok);
    // Cross-check each reported target probability by full enumeration.
    HcbInstance base = binary_instance(alpha1, p, q, ConstantHalf{});
    int M = static_cast<int>(std::ceil(m_value(p)));
    for (const SeparationMemberRow& row : rep.rows) {
      std::uint64_t support = (std::uint64_t{1} << M) - 1;
      std::uint64_t pattern = std::uint64_t{1} << row.arm;
      CHECK(row.p_target ==
            Catch::Approx(oracle::hit(base, Action::do_arm(row.arm, 1), support,
                                      pattern))
                .margin(1e-12));
    }
  }
  REQUIRE(built >= 25);
}

TEST_CASE("hardness thresholds and the four lower-bound regimes") {
  CHECK(hardness_threshold(0.5) == Catch::Approx(57.8936).margin(1e-3));
  CHECK(hardness_threshold(0.5) ==
        Catch::Approx(6.0 * std::exp(1.0) / (3.0 - std::exp(1.0))).margin(1e-12));

  // Neither context hard: small hardness on both sides.
  std::vector<double> p_soft{0.2, 0.2, 0.3, 0.45}, q_soft{0.2, 0.2, 0.3, 0.4};
  LowerBoundReport r4 = theoretical_lower_bound(0.5, p_soft, q_soft, 100);
  CHECK(r4.regime == 4);
  CHECK(r4.m1 == 3.0);
  CHECK(r4.m0 == 3.0);
  CHECK(r4.q_max == 0.4);
  CHECK(r4.m_tilde == 0.25);
  CHECK(r4.bound == Catch::Approx(0.05 / 127.0).margin(1e-15));

  // Only the S=1 side hard: 64 near-zero conditionals.
  std::vector<double> p_hard(64, 0.001), q_easy(64, 0.4);
  LowerBoundReport r2 = theoretical_lower_bound(0.5, p_hard, q_easy, 1000);
  CHECK(r2.regime == 2);
  CHECK(r2.m1 == 64.0);
  CHECK(r2.m0 == 2.5);
  CHECK(r2.m_tilde == 16.0);
  CHECK(r2.bound == Catch::Approx(std::sqrt(16.0 / 1000.0) / 127.0).margin(1e-15));

  LowerBoundReport r3 = theoretical_lower_bound(0.5, q_easy, p_hard, 1000);
  CHECK(r3.regime == 3);
  CHECK(r3.m_tilde == 16.0);

  LowerBoundReport r1 = theoretical_lower_bound(0.5, p_hard, p_hard, 1000);
  CHECK(r1.regime == 1);
  CHECK(r1.m_tilde == 16.0);

  // Asymmetric context weights move the thresholds.
  LowerBoundReport skew = theoretical_lower_bound(0.9, p_hard, q_easy, 1000);
  CHECK(skew.tau1 == Catch::Approx(hardness_threshold(0.9)));
  CHECK(skew.tau0 == Catch::Approx(hardness_threshold(0.1)));
  CHECK(skew.regime == 2);  // 64 >= tau1 ~ 32.2, 2.5 < tau0 ~ 289.5
  CHECK(skew.m_tilde == Catch::Approx(64.0 * 0.81).margin(1e-12));

  CHECK_THROWS_AS(theoretical_lower_bound(0.5, {0.1, 0.1, 0.1}, {0.1, 0.1, 0.1}, 100),
                  std::invalid_argument);  // needs 4 arms
  CHECK_THROWS_AS(theoretical_lower_bound(0.5, p_hard, q_easy, 10),
                  std::invalid_argument);  // T below max hardness
  CHECK_THROWS_AS(theoretical_lower_bound(1.0, p_soft, q_soft, 100),
                  std::invalid_argument);
}

TEST_CASE("history divergence estimates") {
  AdversarialFamily fam =
      build_adversarial_family(0.5, kTenth3, kTenth3, 119, FamilyShape::Isolated);

  SECTION("a policy that avoids the target accrues none") {
    PolicyFactory avoid = [] { return std::make_unique<AvoiderPolicy>(0); };
    KlEstimate est = estimate_history_kl(fam, 0, avoid, 119, 20, RandomStream(3));
    CHECK(est.mean_hits == 0.0);
    CHECK(est.estimate == 0.0);
    CHECK(est.stderr_ == 0.0);
  }

  SECTION("a zero bump accrues none regardless of hits") {
    AdversarialFamily flat;
    flat.shape = FamilyShape::Coordinate;
    flat.epsilon = 0.0;
    flat.m1 = 1.0;
    flat.T = 40;
    flat.base = binary_instance(0.5, {0.3}, {0.4}, ConstantHalf{});
    HcbInstance member = flat.base;
    member.reward = TargetBump{0.0, 1, 1};
    flat.members.push_back(member);
    flat.member_arms.push_back(0);
    flat.hard_set.push_back(0);
    PolicyFactory factory = [] { return uniform_baseline(1, 2, 40, Mode::Nmc); };
    KlEstimate est =
        estimate_history_kl(flat, 0, factory, 40, 10, RandomStream(4));
    CHECK(est.mean_hits > 0.0);
    CHECK(est.estimate == 0.0);
    CHECK(est.stderr_ == 0.0);
  }

  SECTION("the uniform baseline stays within the budget envelope") {
    const int T = 119;
    PolicyFactory factory = [T] { return uniform_baseline(3, 2, T, Mode::Nmc); };
    KlEstimate est =
        estimate_history_kl(fam, 0, factory, T, 400, RandomStream(5));
    // Rounds spent forcing the target arm on, counted off the fixed cycle.
    std::vector<Action> actions = enumerate_actions(3, 2, Mode::Nmc);
    double t_own = 0.0;
    for (int t = 1; t <= T; ++t)
      if (actions[static_cast<std::size_t>((t - 1) % actions.size())] ==
          Action::do_arm(0, 1))
        t_own += 1.0;
    double cap = 16.0 * fam.epsilon * fam.epsilon / 3.0 *
                 ((1.0 - 1.0 / fam.m1) * t_own + static_cast<double>(T) / fam.m1);
    CHECK(est.estimate <= cap + 3.0 * est.stderr_);
    CHECK(est.estimate > 0.0);
  }

  SECTION("argument validation") {
    PolicyFactory factory = [] { return uniform_baseline(3, 2, 119, Mode::Nmc); };
    CHECK_THROWS_AS(estimate_history_kl(fam, 9, factory, 119, 10, RandomStream(1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(estimate_history_kl(fam, 0, factory, 119, 1, RandomStream(1)),
                    std::invalid_argument);
  }
}

TEST_CASE("measured regret dominates the per-member separation wedge") {
  // Eight identical near-zero conditionals: hardness 8, so the wedge
  // alpha/e - 1/m is strictly positive.
  std::vector<double> p8(8, 0.1);
  const int T = 90;
  AdversarialFamily fam =
      build_adversarial_family(0.5, p8, p8, T, FamilyShape::Isolated);
  REQUIRE(fam.m1 == 8.0);
  REQUIRE(verify_separation(fam).ok);
  int hard_arm = fam.hard_set.front();
  const HcbInstance& member = fam.members[static_cast<std::size_t>(hard_arm)];
  PolicyFactory factory = [T] { return uniform_baseline(8, 2, T, Mode::Nmc); };
  RegretReport rep = estimate_simple_regret(member, factory, T, 120, 99);
  // Frequency of the planted best action.
  double rho = 1.0;
  for (std::size_t i = 0; i < rep.actions.size(); ++i)
    if (rep.actions[i] == Action::do_arm(hard_arm, 1)) rho -= rep.freq[i];
  double wedge = fam.epsilon * (0.5 / std::exp(1.0) - 1.0 / fam.m1);
  CHECK(rep.regret_hat >= wedge * rho - 1e-12);
}

TEST_CASE("family serialization uses 1-based arm names") {
  AdversarialFamily fam = build_adversarial_family(0.5, {0.1, 0.1, 0.1, 0.1},
                                                   {0.4, 0.3, 0.2, 0.1}, 100,
                                                   FamilyShape::Isolated);
  nlohmann::json j = family_to_json(fam);
  CHECK(j["shape"] == "isolated");
  CHECK(j["m1"] == 4.0);
  CHECK(j["T"] == 100);
  CHECK(j["alpha"] == 0.5);
  CHECK(j["members"] == nlohmann::json::array({1, 2, 3, 4}));
  CHECK(j["hard_set"] == nlohmann::json::array({4, 3}));
  CHECK(j["p"].size() == 4);
  CHECK(j["epsilon"] == fam.epsilon);
}
