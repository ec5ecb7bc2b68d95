#pragma once

// Evaluation protocols: policies, perturbations (sticky actions, adversarial
// or missing feedback, strict success), episode runner, aggregate reports and
// the named train/eval suites.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridlearn/env.hpp"
#include "gridlearn/model.hpp"
#include "gridlearn/trajectory.hpp"

namespace gridlearn {

enum class PerturbationKind : std::uint8_t {
  none,
  sticky,
  adversarial_random_steps,
  adversarial_replace_lorem,
  adversarial_replace_english,
  missing_feedback,
  strict,
};

std::string_view to_string(PerturbationKind k);
std::optional<PerturbationKind> parse_perturbation_kind(std::string_view s);

struct PerturbationMode {
  PerturbationKind kind = PerturbationKind::none;
  double zeta = 0.25;  // sticky only
  double q = 0.2;      // adversarial_random_steps only

  bool touches_feedback() const;
  /// "sticky(zeta=0.25)" style tag used in reports.
  std::string describe() const;
  void validate() const;
};

/// First step (no previous action) passes `chosen` through. Otherwise returns
/// `prev_executed` with probability zeta.
Action sticky_filter(std::optional<Action> prev_executed, Action chosen, double zeta, Rng& rng);

const std::string& builtin_english_word_text();
/// Bundled common-word list minus every word of the feedback template bank.
const std::vector<std::string>& english_word_bank();
const std::vector<std::string>& lorem_ipsum_words();
/// 4 to 9 words from `bank`, first letter capitalised, ending with a period.
std::string random_sentence(const std::vector<std::string>& bank, Rng& rng);

/// Feedback text the policy sees for one step given the oracle's text.
std::optional<std::string> adversarial_feedback(const PerturbationMode& mode, const std::optional<std::string>& oracle,
                                                Rng& rng);

// ---------------------------------------------------------------------------

struct PolicyInput {
  const Env& env;
  const std::string& mission;
  const std::optional<std::string>& feedback;  // event of the previous executed action
  double last_reward = 0.0;  // reward of the previous step (0 at the first)
  const SymbolicView& view;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  /// Token scheme of a learned policy; nullopt for scripted policies.
  virtual std::optional<TokenScheme> scheme() const { return std::nullopt; }
  virtual void begin_episode(const Env& env) = 0;
  virtual Action act(const PolicyInput& in) = 0;
  /// The action actually executed this step (after sticky filtering).
  virtual void executed(Action chosen, Action executed) { (void)chosen, (void)executed; }
};

/// Replays the optimal plan; replans from the live state whenever the
/// executed action differs from the planned one.
class PlannerPolicy : public Policy {
 public:
  std::string name() const override { return "planner"; }
  void begin_episode(const Env& env) override;
  Action act(const PolicyInput& in) override;
  void executed(Action chosen, Action executed) override;

 private:
  std::vector<Action> plan_;
  std::size_t cursor_ = 0;
  bool stale_ = false;
};

/// Uniform random actions from a stream derived from (seed, episode seed).
class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "random"; }
  void begin_episode(const Env& env) override;
  Action act(const PolicyInput& in) override;

 private:
  std::uint64_t seed_;
  Rng rng_{0};
};

/// Greedy decoding of a trained model. The return-to-go stream starts at
/// `target_return` and is decremented by observed rewards (clipped at 0).
class ModelPolicy : public Policy {
 public:
  ModelPolicy(const Model& model, TokenScheme scheme, double target_return = 1.0);
  std::string name() const override { return "model:" + scheme_.describe(); }
  std::optional<TokenScheme> scheme() const override { return scheme_; }
  void begin_episode(const Env& env) override;
  Action act(const PolicyInput& in) override;
  void executed(Action chosen, Action executed) override;
  /// Return-to-go the next step is conditioned on.
  double current_return() const { return rtg_.current(); }

 private:
  const Model& model_;
  TokenScheme scheme_;
  TextEncoder text_;
  double target_;
  ReturnConditioner rtg_;
  std::optional<InferenceSession> session_;
};

struct EpisodeResult {
  bool success = false;
  double partial = 0.0;  // completed subgoal fraction
  int steps = 0;
  int distractor_pickups = 0;
  int plan_length = 0;  // L* from the planner on the identical scene
  int sticky_steps = 0;
};

/// act -> sticky_filter -> env.step -> feedback perturbation -> next step.
/// SchemeMismatch if the mode perturbs feedback and the policy's scheme reads
/// none.
EpisodeResult run_episode(Policy& policy, const EnvConfig& config, std::uint64_t episode_seed,
                          const PerturbationMode& mode, const RewardConfig& rewards = {});

struct TaskReport {
  std::string task;
  std::string mode;
  std::string policy;
  int episodes = 0;
  double success_rate = 0.0;
  double partial_success_rate = 0.0;
  std::optional<double> onp;  // mean L_hat / L* over successes
  double mean_steps = 0.0;
  int distractor_pickups = 0;
  std::vector<std::uint64_t> seeds;
};

struct EvalReport {
  std::vector<TaskReport> tasks;
  int n_missions = 0;
  std::uint64_t base_seed = 0;

  std::string to_text() const;
  std::string to_csv() const;
};

struct EvalOptions {
  int n_missions = 128;
  int n_seeds = 5;
  std::uint64_t base_seed = 0;
  PerturbationMode mode;
  RewardConfig rewards;
};

/// Mission seed of (task, model seed, mission); disjoint from data generation.
std::uint64_t eval_mission_seed(std::uint64_t base_seed, std::size_t task, int seed_index, int mission);

/// Runs n_missions episodes per (task, seed) with the policy built for each
/// seed index, aggregating in (task, seed, mission) order.
EvalReport evaluate(const std::function<std::unique_ptr<Policy>(int seed_index)>& make_policy,
                    const std::vector<NamedConfig>& tasks, const EvalOptions& options);

// ---------------------------------------------------------------------------

struct Suite {
  std::string name;
  std::string description;
  std::vector<NamedConfig> train;
  std::vector<NamedConfig> eval;
};

/// goto6, systematicity, productivity-{colour, room-size, obstacles, maze,
/// connectors, location}. ConfigError for unknown names.
Suite suite_preset(const std::string& name);
std::vector<std::string> suite_names();

}  // namespace gridlearn
