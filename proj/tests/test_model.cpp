#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "hcb/model.hpp"
#include "hcb/rng.hpp"
#include "oracle.hpp"

using namespace hcb;

namespace {

// Random K-context instance small enough for full-joint oracles.
HcbInstance random_small_instance(RandomStream& rng, int reward_kind) {
  int K = 2 + static_cast<int>(rng.uniform(0.0, 2.0));
  int N = 1 + static_cast<int>(rng.uniform(0.0, 6.0));
  std::vector<double> alpha(static_cast<std::size_t>(K));
  double total = 0.0;
  for (double& a : alpha) total += a = rng.uniform(0.2, 1.0);
  for (double& a : alpha) a /= total;
  std::vector<std::vector<double>> cond(static_cast<std::size_t>(K));
  for (auto& row : cond) {
    row.resize(static_cast<std::size_t>(N));
    for (double& c : row) c = rng.uniform(0.05, 0.95);
  }
  RewardFunction reward = ConstantHalf{};
  if (reward_kind == 1) {
    DenseTable d;
    d.values.resize(std::size_t{1} << N);
    for (double& v : d.values) v = rng.uniform();
    reward = d;
  } else if (reward_kind == 2) {
    std::vector<std::pair<int, int>> constraints;
    for (int j = 0; j < N; ++j)
      if (rng.uniform() < 0.5)
        constraints.emplace_back(j, rng.uniform() < 0.5 ? 1 : 0);
    if (constraints.empty()) constraints.emplace_back(0, 1);
    reward = make_target_bump(rng.uniform(0.01, 0.24), constraints);
  }
  return build_instance(K, N, std::move(alpha), std::move(cond),
                        std::move(reward));
}

// The three-arm reference instance: symmetric conditionals with an isolated
// bump on (X1=1, X2=0, X3=0).
HcbInstance three_arm_family_member() {
  return binary_instance(0.5, {0.1, 0.1, 0.1}, {0.1, 0.1, 0.1},
                         make_target_bump(0.1, {{0, 1}, {1, 0}, {2, 0}}));
}

}  // namespace

TEST_CASE("mode names round-trip and reject junk") {
  CHECK(to_string(Mode::Nmc) == "nmc");
  CHECK(to_string(Mode::Mc) == "mc");
  CHECK(parse_mode("nmc") == Mode::Nmc);
  CHECK(parse_mode("mc") == Mode::Mc);
  CHECK_THROWS_AS(parse_mode("manipulable"), std::invalid_argument);
}

TEST_CASE("canonical action order and labels") {
  CHECK(canonical_index(Action::observe(), 5) == 0);
  CHECK(canonical_index(Action::do_arm(0, 0), 5) == 1);
  CHECK(canonical_index(Action::do_arm(0, 1), 5) == 2);
  CHECK(canonical_index(Action::do_arm(3, 1), 5) == 8);
  CHECK(canonical_index(Action::do_context(0), 5) == 11);
  CHECK(canonical_index(Action::do_context(1), 5) == 12);

  CHECK(action_label(Action::observe()) == "do()");
  CHECK(action_label(Action::do_arm(2, 1)) == "do(X3=1)");
  CHECK(action_label(Action::do_arm(0, 0)) == "do(X1=0)");
  CHECK(action_label(Action::do_context(0)) == "do(S=0)");
}

TEST_CASE("action enumeration matches the canonical order") {
  for (Mode mode : {Mode::Nmc, Mode::Mc}) {
    std::vector<Action> actions = enumerate_actions(4, 2, mode);
    CHECK(actions.size() == (mode == Mode::Nmc ? 9u : 11u));
    for (std::size_t i = 0; i < actions.size(); ++i)
      CHECK(canonical_index(actions[i], 4) == static_cast<int>(i));
  }
}

TEST_CASE("instance validation rejects malformed inputs") {
  auto ok = [] {
    return binary_instance(0.5, {0.2, 0.3}, {0.4, 0.5}, ConstantHalf{});
  };
  CHECK_NOTHROW(ok());
  // alpha must be a positive distribution
  CHECK_THROWS_AS(build_instance(2, 1, {0.5, 0.6}, {{0.5}, {0.5}},
                                 ConstantHalf{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_instance(2, 1, {1.0, 0.0}, {{0.5}, {0.5}},
                                 ConstantHalf{}),
                  std::invalid_argument);
  // conditionals strictly inside (0,1)
  CHECK_THROWS_AS(binary_instance(0.5, {0.0}, {0.5}, ConstantHalf{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(binary_instance(0.5, {1.0}, {0.5}, ConstantHalf{}),
                  std::invalid_argument);
  // row shapes
  CHECK_THROWS_AS(build_instance(2, 2, {0.5, 0.5}, {{0.5}, {0.5, 0.5}},
                                 ConstantHalf{}),
                  std::invalid_argument);
  // dense table must cover all configurations
  CHECK_THROWS_AS(binary_instance(0.5, {0.5, 0.5}, {0.5, 0.5},
                                  DenseTable{{0.1, 0.2}}),
                  std::invalid_argument);
  // bump size range
  CHECK_THROWS_AS(binary_instance(0.5, {0.5}, {0.5},
                                  TargetBump{0.3, 1, 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(binary_instance(0.5, {0.5}, {0.5},
                                  TargetBump{0.0, 1, 1}),
                  std::invalid_argument);
  // pattern must sit inside the support
  CHECK_THROWS_AS(binary_instance(0.5, {0.5, 0.5}, {0.5, 0.5},
                                  TargetBump{0.1, 1, 3}),
                  std::invalid_argument);
  // bump support outside the arm range
  CHECK_THROWS_AS(binary_instance(0.5, {0.5}, {0.5},
                                  TargetBump{0.1, 2, 2}),
                  std::invalid_argument);
}

TEST_CASE("binary instances expose p and q by context") {
  HcbInstance inst =
      binary_instance(0.3, {0.2, 0.7}, {0.6, 0.4}, ConstantHalf{});
  CHECK(inst.alpha == std::vector<double>{0.7, 0.3});
  CHECK(inst.p() == std::vector<double>{0.2, 0.7});
  CHECK(inst.q() == std::vector<double>{0.6, 0.4});
}

TEST_CASE("reward means for the three function families") {
  HcbInstance c = binary_instance(0.5, {0.5}, {0.5}, ConstantHalf{});
  CHECK(reward_mean(c, 0) == 0.5);
  CHECK(reward_mean(c, 1) == 0.5);

  HcbInstance d = binary_instance(0.5, {0.5, 0.5}, {0.5, 0.5},
                                  DenseTable{{0.1, 0.2, 0.3, 0.4}});
  CHECK(reward_mean(d, 0b00) == 0.1);
  CHECK(reward_mean(d, 0b01) == 0.2);
  CHECK(reward_mean(d, 0b10) == 0.3);
  CHECK(reward_mean(d, 0b11) == 0.4);

  HcbInstance t = three_arm_family_member();
  CHECK(reward_mean(t, 0b001) == 0.6);  // X1=1, X2=0, X3=0
  CHECK(reward_mean(t, 0b011) == 0.5);
  CHECK(reward_mean(t, 0b000) == 0.5);
}

TEST_CASE("closed-form means on the three-arm reference instance") {
  HcbInstance inst = three_arm_family_member();
  CHECK(exact_mu(inst, Action::observe()) == Catch::Approx(0.5081).margin(1e-15));
  CHECK(exact_mu(inst, Action::do_arm(0, 1)) == Catch::Approx(0.581).margin(1e-15));
  CHECK(exact_mu(inst, Action::do_arm(0, 0)) == 0.5);
  CHECK(hit_probability(inst, Action::do_arm(0, 1), 0b111, 0b001) ==
        Catch::Approx(0.81).margin(1e-15));
  CHECK(hit_probability(inst, Action::observe(), 0b111, 0b001) ==
        Catch::Approx(0.081).margin(1e-15));
  CHECK(hit_probability(inst, Action::do_arm(0, 0), 0b111, 0b001) == 0.0);

  auto [best, best_mu] = optimal_action(inst, Mode::Nmc);
  CHECK(best == Action::do_arm(0, 1));
  CHECK(best_mu == Catch::Approx(0.581).margin(1e-15));
}

TEST_CASE("ties resolve to the earliest action in canonical order") {
  HcbInstance flat =
      binary_instance(0.5, {0.3, 0.4}, {0.5, 0.6}, ConstantHalf{});
  auto [best, best_mu] = optimal_action(flat, Mode::Mc);
  CHECK(best == Action::observe());
  CHECK(best_mu == 0.5);
}

TEST_CASE("exact means agree with full-joint enumeration") {
  RandomStream rng(31337);
  for (int trial = 0; trial < 60; ++trial) {
    auto child = rng.child("inst", static_cast<std::uint64_t>(trial));
    HcbInstance inst = random_small_instance(child, trial % 3);
    for (const Action& a : enumerate_actions(inst, Mode::Mc)) {
      INFO("trial " << trial << " action " << action_label(a));
      CHECK(exact_mu(inst, a) ==
            Catch::Approx(oracle::mu(inst, a)).margin(1e-12));
    }
  }
}

TEST_CASE("hit probabilities agree with full-joint enumeration") {
  RandomStream rng(90210);
  for (int trial = 0; trial < 60; ++trial) {
    auto child = rng.child("inst", static_cast<std::uint64_t>(trial));
    HcbInstance inst = random_small_instance(child, 0);
    std::uint64_t mask = (std::uint64_t{1} << inst.num_arms) - 1;
    std::uint64_t support = child.next_u64() & mask;
    std::uint64_t pattern = child.next_u64() & support;
    for (const Action& a : enumerate_actions(inst, Mode::Mc)) {
      INFO("trial " << trial << " action " << action_label(a));
      CHECK(hit_probability(inst, a, support, pattern) ==
            Catch::Approx(oracle::hit(inst, a, support, pattern)).margin(1e-12));
    }
  }
}

TEST_CASE("joint enumeration is a normalized distribution") {
  RandomStream rng(1123);
  for (int trial = 0; trial < 30; ++trial) {
    auto child = rng.child("inst", static_cast<std::uint64_t>(trial));
    HcbInstance inst = random_small_instance(child, trial % 3);
    for (const Action& a : enumerate_actions(inst, Mode::Mc)) {
      std::vector<double> joint = enumerate_joint(inst, a);
      std::vector<double> expect = oracle::joint(inst, a);
      REQUIRE(joint.size() == expect.size());
      double total = 0.0;
      for (std::size_t i = 0; i < joint.size(); ++i) {
        CHECK(joint[i] == Catch::Approx(expect[i]).margin(1e-12));
        total += joint[i];
      }
      CHECK(total == Catch::Approx(1.0).margin(1e-9));
    }
  }
}

TEST_CASE("conditional reward equals the pinned-arm expectation") {
  RandomStream rng(555888);
  for (int trial = 0; trial < 40; ++trial) {
    auto child = rng.child("inst", static_cast<std::uint64_t>(trial));
    HcbInstance inst = random_small_instance(child, trial % 3);
    for (int s = 0; s < inst.num_contexts; ++s)
      for (int j = 0; j < inst.num_arms; ++j)
        for (int k = 0; k <= 1; ++k) {
          double got = exact_conditional_reward(inst, s, j, k);
          // Reference: renormalized slice of the pinned-arm joint.
          double expect = 0.0;
          std::uint64_t width = std::uint64_t{1} << inst.num_arms;
          for (std::uint64_t x = 0; x < width; ++x)
            expect +=
                oracle::joint_weight(inst, Action::do_arm(j, k), s, x) *
                reward_mean(inst, x);
          expect /= inst.alpha[static_cast<std::size_t>(s)];
          INFO("trial " << trial << " s " << s << " j " << j << " k " << k);
          CHECK(got == Catch::Approx(expect).margin(1e-12));
        }
  }
}

TEST_CASE("forcing an arm mixes conditionals through the context weights") {
  RandomStream rng(424242);
  for (int trial = 0; trial < 40; ++trial) {
    auto child = rng.child("inst", static_cast<std::uint64_t>(trial));
    HcbInstance inst = random_small_instance(child, trial % 3);
    for (int j = 0; j < inst.num_arms; ++j)
      for (int k = 0; k <= 1; ++k) {
        double mix = 0.0;
        for (int s = 0; s < inst.num_contexts; ++s)
          mix += inst.alpha[static_cast<std::size_t>(s)] *
                 exact_conditional_reward(inst, s, j, k);
        CHECK(exact_mu(inst, Action::do_arm(j, k)) ==
              Catch::Approx(mix).margin(1e-12));
      }
  }
}

TEST_CASE("observing an arm reweights contexts by its likelihood") {
  RandomStream rng(6494649);
  for (int trial = 0; trial < 40; ++trial) {
    auto child = rng.child("inst", static_cast<std::uint64_t>(trial));
    HcbInstance inst = random_small_instance(child, trial % 3);
    for (int j = 0; j < inst.num_arms; ++j)
      for (int k = 0; k <= 1; ++k) {
        // E[Y | X_j=k] under passive observation: context posterior times the
        // pinned-arm conditional; the arms are independent given the context.
        double mass = 0.0, mix = 0.0;
        for (int s = 0; s < inst.num_contexts; ++s) {
          double pj = inst.cond[static_cast<std::size_t>(s)]
                               [static_cast<std::size_t>(j)];
          double w = inst.alpha[static_cast<std::size_t>(s)] *
                     (k == 1 ? pj : 1.0 - pj);
          mass += w;
          mix += w * exact_conditional_reward(inst, s, j, k);
        }
        CHECK(oracle::observed_conditional(inst, j, k) ==
              Catch::Approx(mix / mass).margin(1e-12));
      }
  }
}

TEST_CASE("sampling honors interventions and the stream key") {
  HcbInstance inst = binary_instance(0.3, {0.2, 0.7}, {0.6, 0.4},
                                     make_target_bump(0.2, {{0, 1}}));
  RandomStream a(77), b(77);
  for (int t = 0; t < 200; ++t) {
    Observation oa = sample_round(inst, Action::do_arm(1, 1), a);
    Observation ob = sample_round(inst, Action::do_arm(1, 1), b);
    CHECK(((oa.x >> 1) & 1) == 1);
    CHECK(oa.s == ob.s);
    CHECK(oa.x == ob.x);
    CHECK(oa.y == ob.y);
  }
  RandomStream c(9);
  for (int t = 0; t < 50; ++t)
    CHECK(sample_round(inst, Action::do_context(0), c).s == 0);
  CHECK_THROWS_AS(sample_round(inst, Action::do_arm(2, 1), c),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample_round(inst, Action::do_context(2), c),
                  std::invalid_argument);
}

TEST_CASE("sampled frequencies track the exact distribution") {
  HcbInstance inst = binary_instance(0.3, {0.2, 0.7}, {0.6, 0.4},
                                     DenseTable{{0.15, 0.3, 0.45, 0.6}});
  const int n = 40000;
  RandomStream rng(2024);
  double s1 = 0, x1_in_s1 = 0, n_s1 = 0, y = 0;
  for (int t = 0; t < n; ++t) {
    Observation obs = sample_round(inst, Action::observe(), rng);
    if (obs.s == 1) {
      s1 += 1;
      n_s1 += 1;
      x1_in_s1 += static_cast<double>(obs.x & 1);
    }
    y += obs.y;
  }
  CHECK(s1 / n == Catch::Approx(0.3).margin(0.012));
  CHECK(x1_in_s1 / n_s1 == Catch::Approx(0.2).margin(0.015));
  CHECK(y / n == Catch::Approx(exact_mu(inst, Action::observe())).margin(0.012));
}

TEST_CASE("instance files round-trip every reward family") {
  RandomStream rng(808);
  for (int kind = 0; kind < 3; ++kind) {
    auto child = rng.child("inst", static_cast<std::uint64_t>(kind));
    HcbInstance inst = random_small_instance(child, kind);
    HcbInstance back = instance_from_json(instance_to_json(inst));
    CHECK(back.num_contexts == inst.num_contexts);
    CHECK(back.num_arms == inst.num_arms);
    CHECK(back.alpha == inst.alpha);
    CHECK(back.cond == inst.cond);
    for (const Action& a : enumerate_actions(inst, Mode::Mc))
      CHECK(exact_mu(back, a) == exact_mu(inst, a));
  }

  // 1-based arm names in serialized bump targets.
  HcbInstance bump = three_arm_family_member();
  nlohmann::json j = instance_to_json(bump);
  CHECK(j["reward"]["type"] == "target_bump");
  CHECK(j["reward"]["target"][0][0] == 1);
  CHECK(j["reward"]["target"][0][1] == 1);
  CHECK(j["reward"]["target"][1][0] == 2);
  CHECK(j["reward"]["target"][1][1] == 0);

  std::string path = "model_roundtrip_tmp.json";
  save_instance(bump, path);
  HcbInstance loaded = load_instance(path);
  CHECK(exact_mu(loaded, Action::do_arm(0, 1)) ==
        exact_mu(bump, Action::do_arm(0, 1)));
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_instance("no_such_file.json"), std::runtime_error);
}
