#pragma once

// Demonstration trajectories: optimal plan replays and corrected suboptimal
// rollouts, annotated with oracle feedback and rewards.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridlearn/env.hpp"
#include "gridlearn/feedback.hpp"
#include "gridlearn/mission.hpp"

namespace gridlearn {

struct TrajectoryStep {
  SymbolicView observation;  // o_t, seen before the action
  Action action = Action::left;
  double reward = 0.0;
  std::optional<std::string> feedback;  // event produced by this action
  std::optional<FeedbackKind> feedback_kind;
  bool had_effect = false;
  std::optional<int> subgoal_completed;
  bool was_random_injection = false;

  friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct Trajectory {
  std::string task;  // name of the generating config
  std::string mission_text;
  std::uint64_t episode_seed = 0;
  double injection_p = 0.0;  // 0 for optimal demonstrations
  bool suboptimal = false;
  bool success = false;
  int num_subgoals = 0;
  int step_budget = 0;
  int plan_length = 0;  // L* of the start state
  std::vector<TrajectoryStep> steps;

  int length() const { return static_cast<int>(steps.size()); }
  std::vector<double> rewards() const;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Rolls out one episode. Each step executes a uniformly random action with
/// probability `p` (flagged) instead of the planner action and replans after
/// every injected action. `success` may be false.
Trajectory rollout_trajectory(const EnvConfig& config, std::uint64_t episode_seed, double p,
                              const RewardConfig& rewards);

inline constexpr int kRegenerationCap = 20;

struct SlotStats {
  int attempts = 0;
  int discarded = 0;
};

/// First successful rollout over seeds derived from (generator_seed, task,
/// slot, attempt). Throws BudgetExhausted after kRegenerationCap failures.
Trajectory generate_suboptimal_trajectory(const EnvConfig& config, double p, const RewardConfig& rewards,
                                          std::uint64_t generator_seed, std::uint64_t task, std::uint64_t slot,
                                          SlotStats* stats = nullptr);

struct NamedConfig {
  std::string name;
  EnvConfig config;

  friend bool operator==(const NamedConfig&, const NamedConfig&) = default;
};

struct SuboptimalCount {
  double p = 0.5;
  int n = 0;

  friend bool operator==(const SuboptimalCount&, const SuboptimalCount&) = default;
};

struct DatasetCounts {
  int optimal = 0;
  std::vector<SuboptimalCount> suboptimal;

  int per_task_total() const;
  friend bool operator==(const DatasetCounts&, const DatasetCounts&) = default;
};

/// Splits `total` suboptimal trajectories evenly over the given p values
/// (remainder to the first entries).
std::vector<SuboptimalCount> even_split(int total, const std::vector<double>& ps);

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetHeader {
  int format_version = kDatasetFormatVersion;
  std::vector<NamedConfig> tasks;
  RewardConfig reward_config;
  std::string template_hash;
  int template_version = 0;
  int instruction_template_version = kInstructionTemplateVersion;
  DatasetCounts counts;
  std::uint64_t generator_seed = 0;
  int discarded = 0;
  bool feedback_annotated = true;  // false once feedback strings were stripped
  bool rewards_annotated = true;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Trajectory> trajectories;

  bool has_feedback() const;
  /// Removes feedback strings and clears header.feedback_annotated.
  void strip_feedback();
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Exactly `counts` successful trajectories per task, tasks in order.
Dataset generate_dataset(const std::vector<NamedConfig>& tasks, const DatasetCounts& counts,
                         const RewardConfig& rewards, std::uint64_t generator_seed);

}  // namespace gridlearn
