#pragma once

// Rule-based oracles over privileged state: task feedback, affordance
// feedback, scalar rewards and returns-to-go.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gridlearn/grid.hpp"
#include "gridlearn/mission.hpp"
#include "gridlearn/util.hpp"

namespace gridlearn {

/// Parsed phrase banks. The default bank is the build-embedded copy of
/// assets/feedback_templates.txt.
struct TemplateBank {
  int version = 0;
  std::string hash;  // fnv1a hex of the raw text
  std::vector<std::string> positive;
  std::vector<std::string> negative;
  std::map<std::string, std::string> explanation;  // reach, hold, place_next, distractor_pickup, wrong_anchor
  std::map<std::string, std::string> affordance;   // "<action>.<blocker>"

  /// Every lower-cased word that can appear in generated feedback.
  std::set<std::string> vocabulary() const;

  static TemplateBank parse(const std::string& text);
  static const TemplateBank& builtin();
};

const std::string& builtin_template_text();

/// Lower-cased alphabetic words of `text`.
std::vector<std::string> words_of(const std::string& text);

enum class FeedbackKind : std::uint8_t { task_positive, task_negative, affordance };
std::string_view to_string(FeedbackKind k);

struct FeedbackEvent {
  FeedbackKind kind = FeedbackKind::affordance;
  std::string text;
  int step = 0;  // 1-based index of the action that produced it

  friend bool operator==(const FeedbackEvent&, const FeedbackEvent&) = default;
};

/// Positive iff `completed` (the subgoals this step newly completed) is
/// non-empty; negative iff the step picked up a distractor or dropped the
/// object of a still-pending put-next subgoal next to an object other than
/// its anchor. `progress` is the state after the step. The judgment phrase is
/// drawn from `rng`; the explanation is deterministic.
std::optional<FeedbackEvent> task_feedback(const Scene& scene, Action action, const StepOutcome& outcome,
                                           const std::vector<int>& completed, const SubgoalProgress& progress,
                                           Rng& rng, const TemplateBank& bank = TemplateBank::builtin());

/// Fires iff outcome.had_effect is false; one sentence per (action, blocker).
std::optional<FeedbackEvent> affordance_feedback(const GridState& prev, Action action, const StepOutcome& outcome,
                                                 const TemplateBank& bank = TemplateBank::builtin());

/// Task feedback takes priority; at most one event per step.
std::optional<FeedbackEvent> step_feedback(const Scene& scene, const GridState& prev, Action action,
                                           const StepOutcome& outcome, const std::vector<int>& completed,
                                           const SubgoalProgress& progress, Rng& rng,
                                           const TemplateBank& bank = TemplateBank::builtin());

// ---------------------------------------------------------------------------
// Rewards

enum class RewardMode : std::uint8_t { binary, binary_plus_penalty, dense_plus_penalty };
std::string_view to_string(RewardMode m);
std::optional<RewardMode> parse_reward_mode(std::string_view s);

struct RewardConfig {
  RewardMode mode = RewardMode::dense_plus_penalty;
  double gamma = 0.9;
  double failure_penalty = 0.01;

  void validate() const;
  friend bool operator==(const RewardConfig&, const RewardConfig&) = default;
};

/// 1 - gamma * n / budget on success, 0 on failure. DomainError if n > budget
/// or n < 1 on success.
double terminal_reward(int n, int budget, double gamma, bool success = true);

/// Reward for one step. `step` is the 1-based index of the action,
/// `completed` the subgoals it newly completed and `success` whether the
/// episode is solved after it.
double shaped_reward(int step, int budget, int num_subgoals, const std::vector<int>& completed, bool had_effect,
                     bool success, const RewardConfig& cfg);

/// Undiscounted suffix sums.
std::vector<double> returns_to_go(const std::vector<double>& rewards);

/// Inference-time conditioning stream: starts at the target return and
/// decrements by observed rewards, clipped at zero.
class ReturnConditioner {
 public:
  explicit ReturnConditioner(double target = 1.0) : value_(target) {}
  double current() const { return value_; }
  void observe(double reward);

 private:
  double value_;
};

}  // namespace gridlearn
