#pragma once
// Policies for best-intervention identification, and the episode protocol
// that runs them against the model.
//
// The two-context algorithms and their K-context generalizations share one
// engine built around a fixed stage layout:
//
//   nmc: one observation stage of L = floor(T/(2K+1)) rounds, then 2K refine
//        stages of L rounds each.
//   mc:  one observation stage plus K context-forcing stages (contexts
//        K-1, ..., 0) of A = floor(T/(7K+1)) rounds each, then 2K refine
//        stages of floor(3T/(7K+1)) rounds each.
//
// Rounds left over after the scheduled stages are trailing do() rounds and do
// not feed any estimator. Refine stage r handles the pair (context i, arm
// value k) with contexts descending and k = 1 before k = 0, so at K = 2 the
// order is (1,1), (1,0), (0,1), (0,0) and the layouts reduce to the
// two-context algorithms' splits (T/5, and T/15 with refine blocks of T/5).
//
// Estimator conventions: all estimates are empirical means over their stage;
// any estimate whose denominator count is zero is set to 0. The refine set
// for (i, k=1) is B(p_hat_i, m(p_hat_i)) = { j : p_hat_i[j] < 1/m(p_hat_i) },
// and for k=0 the same with entrywise-complemented p_hat_i; both use
// m(p_hat_i).

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "hcb/complexity.hpp"
#include "hcb/model.hpp"
#include "hcb/rng.hpp"

namespace hcb {

// ----- episode protocol -----------------------------------------------------

struct StepRecord {
  Action action;
  Observation obs;
};
using History = std::vector<StepRecord>;

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  // Action set the policy draws from; do(S=s) is only legal under Mc.
  virtual Mode mode() const = 0;
  // Action for round t (1-based); h is the history of rounds 1..t-1.
  virtual Action next_action(const History& h, int t, RandomStream& rng) = 0;
  virtual Action final_choice(const History& h, RandomStream& rng) = 0;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

struct EpisodeResult {
  Action chosen;
  History history;
};

inline EpisodeResult run_episode(const HcbInstance& inst, Policy& policy,
                                 int T, RandomStream rng) {
  if (T < 1) throw std::invalid_argument("run_episode: T must be >= 1");
  RandomStream env = rng.child("env");
  RandomStream pol = rng.child("policy");
  History h;
  h.reserve(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    Action a = policy.next_action(h, t, pol);
    check_action(inst, a);
    if (a.kind == ActionKind::DoContext && policy.mode() == Mode::Nmc)
      throw std::runtime_error("policy " + policy.name() +
                               " emitted do(S=...) outside manipulable mode");
    Observation obs = sample_round(inst, a, env);
    h.push_back({a, obs});
  }
  Action chosen = policy.final_choice(h, pol);
  check_action(inst, chosen);
  return {chosen, std::move(h)};
}

// ----- error radii and large-T conditions ------------------------------------

// sqrt(x * ln(y t) / t), the concentration radius used throughout the
// analysis; decreasing in t once y t > 1.
inline double error_radius(double x, double y, double t) {
  if (!(x >= 0.0)) throw std::invalid_argument("error_radius: x must be >= 0");
  if (!(y > 0.0) || !(t > 0.0) || !(y * t > 1.0))
    throw std::invalid_argument("error_radius: need y*t > 1");
  if (x == 0.0) return 0.0;
  return std::sqrt(x * std::log(y * t) / t);
}

// Large-T condition under which the identification guarantees hold:
// K=2:  T > 540 * max(m_1/alpha_1, m_0/alpha_0) * ln(NT)
// K>2:  T > 600 * (7K+1) * max_i(m_i/alpha_i) * ln(NT)
// The mode parameter is accepted for interface symmetry; the thresholds do
// not depend on it.
inline bool sample_size_condition(const std::vector<double>& alpha,
                                  const std::vector<double>& m_values,
                                  int num_arms, long long T, Mode /*mode*/) {
  const std::size_t K = alpha.size();
  if (K < 2 || m_values.size() != K)
    throw std::invalid_argument("sample_size_condition: need K >= 2 matching vectors");
  if (num_arms < 1 || T < 1)
    throw std::invalid_argument("sample_size_condition: need N >= 1, T >= 1");
  double worst = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    if (!(alpha[i] > 0.0) || !(m_values[i] >= 0.0))
      throw std::invalid_argument("sample_size_condition: bad alpha or m entry");
    worst = std::max(worst, m_values[i] / alpha[i]);
  }
  double factor = K == 2 ? 540.0 : 600.0 * (7.0 * static_cast<double>(K) + 1.0);
  double threshold = factor * worst *
                     std::log(static_cast<double>(num_arms) * static_cast<double>(T));
  return static_cast<double>(T) > threshold;
}

// ----- refine schedule --------------------------------------------------------

struct RefineBlock {
  int arm = -1;         // arm intervened on throughout the block
  int first_round = 0;  // 1-based, inclusive
  int last_round = 0;   // 1-based, inclusive
};

// Partitions rounds (tau, tau+d] into |B| contiguous blocks of floor(d/|B|)
// rounds, remainder appended to the last block; block i targets B[i].
inline std::vector<RefineBlock> refine_schedule(const std::vector<int>& B,
                                                int tau, int d) {
  const int n = static_cast<int>(B.size());
  if (n < 1 || d < n)
    throw std::invalid_argument("refine_schedule: need d >= |B| >= 1");
  if (tau < 0) throw std::invalid_argument("refine_schedule: tau must be >= 0");
  const int w = d / n;
  std::vector<RefineBlock> blocks(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    blocks[i].arm = B[i];
    blocks[i].first_round = tau + i * w + 1;
    blocks[i].last_round = i + 1 == n ? tau + d : tau + (i + 1) * w;
  }
  return blocks;
}

struct RefineOutcome {
  int arm = -1;
  long long c = 0;  // rounds in the block whose realized context matched
  long long f = 0;  // those among them with y = 1
  double u = 0.0;   // f/c, or 0 when c = 0
};

// Folds a completed history over the blocks: for arm j's block,
// c_j = #{t in block : s_t = s}, f_j = #{t in block : s_t = s, y_t = 1},
// u_j = f_j / c_j with the zero-denominator convention.
inline std::vector<RefineOutcome> refine_estimates(
    const std::vector<RefineBlock>& blocks, int s, const History& h) {
  std::vector<RefineOutcome> out;
  out.reserve(blocks.size());
  for (const RefineBlock& b : blocks) {
    if (b.first_round < 1 || b.last_round > static_cast<int>(h.size()))
      throw std::invalid_argument("refine_estimates: block outside the history");
    RefineOutcome r;
    r.arm = b.arm;
    for (int t = b.first_round; t <= b.last_round; ++t) {
      const Observation& obs = h[static_cast<std::size_t>(t) - 1].obs;
      if (obs.s != s) continue;
      ++r.c;
      r.f += obs.y;
    }
    r.u = r.c > 0 ? static_cast<double>(r.f) / static_cast<double>(r.c) : 0.0;
    out.push_back(r);
  }
  return out;
}

// ----- stage layout -----------------------------------------------------------

struct StageLayout {
  Mode mode = Mode::Nmc;
  int K = 2;
  int T = 0;
  int obs_len = 0;     // observation stage (and each mc context stage)
  int refine_len = 0;  // each of the 2K refine stages
  int refine_base = 0; // rounds before the first refine stage
  int scheduled = 0;   // rounds covered by stages; the rest trail as do()

  int refine_start(int r) const { return refine_base + r * refine_len; }  // exclusive
  // (context, arm value) handled by refine stage r
  std::pair<int, int> refine_pair(int r) const {
    return {K - 1 - r / 2, r % 2 == 0 ? 1 : 0};
  }
};

inline StageLayout make_stage_layout(Mode mode, int K, int T) {
  if (K < 2) throw std::invalid_argument("stage layout: K must be >= 2");
  StageLayout lay;
  lay.mode = mode;
  lay.K = K;
  lay.T = T;
  if (mode == Mode::Nmc) {
    lay.obs_len = T / (2 * K + 1);
    lay.refine_len = lay.obs_len;
    lay.refine_base = lay.obs_len;
  } else {
    lay.obs_len = T / (7 * K + 1);
    lay.refine_len = static_cast<int>(3LL * T / (7 * K + 1));
    lay.refine_base = (K + 1) * lay.obs_len;
  }
  if (lay.obs_len < 1)
    throw std::invalid_argument("stage layout: T too small for the stage split");
  lay.scheduled = lay.refine_base + 2 * K * lay.refine_len;
  return lay;
}

// ----- estimator state --------------------------------------------------------

struct EstimatorState {
  std::vector<double> alpha_hat;           // per context
  std::vector<std::vector<double>> p_hat;  // p_hat[i][j] = est. P(X_j=1|S=i)
  std::vector<double> m_hat;               // m(p_hat[i])
  double mu_obs = 0.0;                     // est. reward mean under do()
  // mu[i][j][k]: estimates of P(Y=1 | S=i, X_j=k); stage1 holds the
  // pre-refine values, final the table used by the final argmax
  std::vector<std::vector<std::array<double, 2>>> mu_stage1;
  std::vector<std::vector<std::array<double, 2>>> mu_final;
  std::vector<std::vector<std::array<bool, 2>>> refined;
  std::vector<std::array<std::vector<int>, 2>> refine_sets;  // [i][k]
  std::vector<double> mu_do_context;       // est. E[Y | do(S=i)] (mc only)
  std::vector<std::array<double, 2>> mu_do_arm;  // final combined per (j,k)
};

// ----- the staged identification engine ---------------------------------------

class KContextPolicy final : public Policy {
 public:
  KContextPolicy(int num_arms, int num_contexts, int T, Mode mode,
                 std::string name)
      : N_(num_arms),
        K_(num_contexts),
        mode_(mode),
        name_(std::move(name)),
        layout_(make_stage_layout(mode, num_contexts, T)) {
    if (N_ < 1) throw std::invalid_argument(name_ + ": need N >= 1");
    cnt_s_.assign(K_, 0);
    sum_y_s_.assign(K_, 0);
    cnt_x1_.assign(K_, std::vector<long long>(N_, 0));
    sum_y_x1_.assign(K_, std::vector<long long>(N_, 0));
    ctx_cnt_x1_ = cnt_x1_;
    ctx_sum_y_x1_ = sum_y_x1_;
    ctx_sum_y_.assign(K_, 0);
  }

  std::string name() const override { return name_; }
  Mode mode() const override { return mode_; }
  const StageLayout& layout() const { return layout_; }

  Action next_action(const History& h, int t, RandomStream&) override {
    if (t != static_cast<int>(h.size()) + 1)
      throw std::logic_error(name_ + ": round index does not match history");
    consume(h);
    if (t > layout_.refine_base && !finalized_) finalize_stage_estimates();
    return scheduled_action(t);
  }

  Action final_choice(const History& h, RandomStream&) override {
    if (static_cast<int>(h.size()) != layout_.T)
      throw std::logic_error(name_ + ": episode history has the wrong length");
    consume(h);
    if (!finalized_) finalize_stage_estimates();
    apply_refinements(h);
    return pick_argmax();
  }

  // Valid once final_choice has run.
  const EstimatorState& estimates() const {
    if (!applied_) throw std::logic_error(name_ + ": estimates read before final_choice");
    return est_;
  }
  // Valid once the observation (and context) stages are complete.
  const std::vector<std::vector<RefineBlock>>& refine_blocks() const {
    if (!finalized_) throw std::logic_error(name_ + ": refine blocks not set yet");
    return blocks_;
  }

 private:
  // Which stage a 1-based round belongs to.
  Action scheduled_action(int t) const {
    if (t <= layout_.obs_len) return Action::observe();
    if (mode_ == Mode::Mc && t <= layout_.refine_base) {
      int stage = (t - layout_.obs_len - 1) / layout_.obs_len;  // 0..K-1
      return Action::do_context(K_ - 1 - stage);
    }
    if (t <= layout_.scheduled) {
      int r = (t - layout_.refine_base - 1) / layout_.refine_len;
      const std::vector<RefineBlock>& blocks = blocks_[static_cast<std::size_t>(r)];
      if (blocks.empty()) return Action::observe();
      int offset = t - layout_.refine_start(r) - 1;  // 0-based within stage
      int w = layout_.refine_len / static_cast<int>(blocks.size());
      int idx = std::min(offset / w, static_cast<int>(blocks.size()) - 1);
      auto [ctx, k] = layout_.refine_pair(r);
      (void)ctx;
      return Action::do_arm(blocks[static_cast<std::size_t>(idx)].arm, k);
    }
    return Action::observe();  // trailing remainder
  }

  void consume(const History& h) {
    if (static_cast<int>(h.size()) < cursor_)
      throw std::logic_error(name_ + ": history shrank between calls");
    for (; cursor_ < static_cast<int>(h.size()); ++cursor_) {
      int t = cursor_ + 1;
      const Observation& obs = h[static_cast<std::size_t>(cursor_)].obs;
      if (t <= layout_.obs_len) {
        ++cnt_s_[obs.s];
        sum_y_ += obs.y;
        sum_y_s_[obs.s] += obs.y;
        for (int j = 0; j < N_; ++j) {
          if ((obs.x >> j) & 1) {
            ++cnt_x1_[obs.s][j];
            sum_y_x1_[obs.s][j] += obs.y;
          }
        }
      } else if (mode_ == Mode::Mc && t <= layout_.refine_base) {
        ctx_sum_y_[obs.s] += obs.y;
        for (int j = 0; j < N_; ++j) {
          if ((obs.x >> j) & 1) {
            ++ctx_cnt_x1_[obs.s][j];
            ctx_sum_y_x1_[obs.s][j] += obs.y;
          }
        }
      }
      // refine and trailing rounds are folded at final_choice
    }
  }

  static double ratio(long long num, long long den) {
    return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
  }

  void finalize_stage_estimates() {
    const long long L = layout_.obs_len;
    est_.alpha_hat.assign(K_, 0.0);
    est_.mu_obs = ratio(sum_y_, L);
    est_.p_hat.assign(K_, std::vector<double>(N_, 0.0));
    est_.m_hat.assign(K_, 0.0);
    est_.mu_stage1.assign(K_, std::vector<std::array<double, 2>>(
                                  N_, std::array<double, 2>{0.0, 0.0}));
    est_.mu_do_context.assign(mode_ == Mode::Mc ? K_ : 0, 0.0);
    for (int i = 0; i < K_; ++i) {
      est_.alpha_hat[i] = ratio(cnt_s_[i], L);
      for (int j = 0; j < N_; ++j) {
        long long c1, f1, c0, f0;
        if (mode_ == Mode::Nmc) {
          c1 = cnt_x1_[i][j];
          f1 = sum_y_x1_[i][j];
          c0 = cnt_s_[i] - c1;
          f0 = sum_y_s_[i] - f1;
          est_.p_hat[i][j] = ratio(c1, cnt_s_[i]);
        } else {
          c1 = ctx_cnt_x1_[i][j];
          f1 = ctx_sum_y_x1_[i][j];
          c0 = L - c1;
          f0 = ctx_sum_y_[i] - f1;
          est_.p_hat[i][j] = ratio(c1, L);
        }
        est_.mu_stage1[i][j][1] = ratio(f1, c1);
        est_.mu_stage1[i][j][0] = ratio(f0, c0);
      }
      if (mode_ == Mode::Mc) est_.mu_do_context[i] = ratio(ctx_sum_y_[i], L);
      est_.m_hat[i] = m_value(est_.p_hat[i]);
    }
    // refine sets and the block plan for each refine stage
    est_.refine_sets.assign(K_, {});
    blocks_.assign(2 * K_, {});
    for (int r = 0; r < 2 * K_; ++r) {
      auto [i, k] = layout_.refine_pair(r);
      std::vector<int> B;
      if (k == 1) {
        B = threshold_set(est_.p_hat[i], est_.m_hat[i]);
      } else {
        std::vector<double> comp(est_.p_hat[i]);
        for (double& v : comp) v = 1.0 - v;
        B = threshold_set(comp, est_.m_hat[i]);
      }
      est_.refine_sets[i][k] = B;
      if (!B.empty() && layout_.refine_len >= static_cast<int>(B.size()))
        blocks_[static_cast<std::size_t>(r)] =
            refine_schedule(B, layout_.refine_start(r), layout_.refine_len);
    }
    finalized_ = true;
  }

  void apply_refinements(const History& h) {
    est_.mu_final = est_.mu_stage1;
    est_.refined.assign(K_, std::vector<std::array<bool, 2>>(
                                N_, std::array<bool, 2>{false, false}));
    for (int r = 0; r < 2 * K_; ++r) {
      const auto& blocks = blocks_[static_cast<std::size_t>(r)];
      if (blocks.empty()) continue;
      auto [i, k] = layout_.refine_pair(r);
      for (const RefineOutcome& o : refine_estimates(blocks, i, h)) {
        est_.mu_final[i][o.arm][k] = o.u;
        est_.refined[i][o.arm][k] = true;
      }
    }
    est_.mu_do_arm.assign(N_, std::array<double, 2>{0.0, 0.0});
    for (int j = 0; j < N_; ++j)
      for (int k = 0; k <= 1; ++k) {
        double mu = 0.0;
        for (int i = 0; i < K_; ++i)
          mu += est_.alpha_hat[i] * est_.mu_final[i][j][k];
        est_.mu_do_arm[j][k] = mu;
      }
    applied_ = true;
  }

  Action pick_argmax() const {
    Action best = Action::observe();
    double best_mu = est_.mu_obs;
    for (int j = 0; j < N_; ++j)
      for (int k = 0; k <= 1; ++k)
        if (est_.mu_do_arm[j][k] > best_mu) {
          best = Action::do_arm(j, k);
          best_mu = est_.mu_do_arm[j][k];
        }
    if (mode_ == Mode::Mc)
      for (int i = 0; i < K_; ++i)
        if (est_.mu_do_context[i] > best_mu) {
          best = Action::do_context(i);
          best_mu = est_.mu_do_context[i];
        }
    return best;
  }

  int N_, K_;
  Mode mode_;
  std::string name_;
  StageLayout layout_;

  int cursor_ = 0;
  bool finalized_ = false;
  bool applied_ = false;
  long long sum_y_ = 0;
  std::vector<long long> cnt_s_, sum_y_s_;
  std::vector<std::vector<long long>> cnt_x1_, sum_y_x1_;
  std::vector<long long> ctx_sum_y_;
  std::vector<std::vector<long long>> ctx_cnt_x1_, ctx_sum_y_x1_;
  std::vector<std::vector<RefineBlock>> blocks_;
  EstimatorState est_;
};

// ----- baseline ----------------------------------------------------------------

class UniformPolicy final : public Policy {
 public:
  UniformPolicy(int num_arms, int num_contexts, int T, Mode mode)
      : num_arms_(num_arms),
        mode_(mode),
        actions_(enumerate_actions(num_arms, num_contexts, mode)) {
    if (T < static_cast<int>(actions_.size()))
      throw std::invalid_argument("uniform: need T >= the action set size");
  }

  std::string name() const override { return "uniform"; }
  Mode mode() const override { return mode_; }

  Action next_action(const History& h, int t, RandomStream&) override {
    if (t != static_cast<int>(h.size()) + 1)
      throw std::logic_error("uniform: round index does not match history");
    return actions_[static_cast<std::size_t>((t - 1) % static_cast<int>(actions_.size()))];
  }

  // Arg max of the per-action empirical mean reward, canonical tie-break.
  Action final_choice(const History& h, RandomStream&) override {
    std::vector<long long> cnt(actions_.size(), 0), wins(actions_.size(), 0);
    for (const StepRecord& rec : h) {
      int idx = canonical_index(rec.action, num_arms_);
      if (idx < 0 || idx >= static_cast<int>(actions_.size())) continue;
      ++cnt[static_cast<std::size_t>(idx)];
      wins[static_cast<std::size_t>(idx)] += rec.obs.y;
    }
    Action best = actions_.front();
    double best_mean = -1.0;
    for (std::size_t i = 0; i < actions_.size(); ++i) {
      double mean = cnt[i] > 0 ? static_cast<double>(wins[i]) / static_cast<double>(cnt[i]) : 0.0;
      if (mean > best_mean) {
        best = actions_[i];
        best_mean = mean;
      }
    }
    return best;
  }

 private:
  int num_arms_;
  Mode mode_;
  std::vector<Action> actions_;
};

// ----- constructors and the name registry ---------------------------------------

inline std::unique_ptr<Policy> alg_nmc(int num_arms, int T) {
  return std::make_unique<KContextPolicy>(num_arms, 2, T, Mode::Nmc, "alg-nmc");
}

inline std::unique_ptr<Policy> alg_mc(int num_arms, int T) {
  return std::make_unique<KContextPolicy>(num_arms, 2, T, Mode::Mc, "alg-mc");
}

inline std::unique_ptr<Policy> alg_k(int num_arms, int num_contexts, int T,
                                     Mode mode) {
  return std::make_unique<KContextPolicy>(
      num_arms, num_contexts, T, mode,
      mode == Mode::Nmc ? "alg-k-nmc" : "alg-k-mc");
}

inline std::unique_ptr<Policy> uniform_baseline(int num_arms, int num_contexts,
                                                int T, Mode mode) {
  return std::make_unique<UniformPolicy>(num_arms, num_contexts, T, mode);
}

// Mode implied by a policy name; uniform runs under the caller's mode.
inline std::unique_ptr<Policy> make_policy(const std::string& name,
                                           int num_arms, int num_contexts,
                                           int T, Mode config_mode) {
  if (name == "alg-nmc" || name == "alg-mc") {
    if (num_contexts != 2)
      throw std::invalid_argument(name + " requires a two-context instance");
    return name == "alg-nmc" ? alg_nmc(num_arms, T) : alg_mc(num_arms, T);
  }
  if (name == "alg-k-nmc") return alg_k(num_arms, num_contexts, T, Mode::Nmc);
  if (name == "alg-k-mc") return alg_k(num_arms, num_contexts, T, Mode::Mc);
  if (name == "uniform")
    return uniform_baseline(num_arms, num_contexts, T, config_mode);
  throw std::invalid_argument("unknown policy \"" + name + "\"");
}

inline Mode policy_mode(const std::string& name, Mode config_mode) {
  if (name == "alg-nmc" || name == "alg-k-nmc") return Mode::Nmc;
  if (name == "alg-mc" || name == "alg-k-mc") return Mode::Mc;
  return config_mode;
}

}  // namespace hcb
