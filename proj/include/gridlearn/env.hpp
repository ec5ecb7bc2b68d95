#pragma once

// Gym-style episode loop over a generated scene with oracle feedback and
// shaped rewards attached to every step.

#include <optional>
#include <string>
#include <vector>

#include "gridlearn/feedback.hpp"
#include "gridlearn/grid.hpp"
#include "gridlearn/mission.hpp"

namespace gridlearn {

struct StepInfo {
  bool had_effect = false;
  int subgoals_done = 0;
  std::vector<int> completed;           // subgoals newly completed by this step
  std::optional<FeedbackEvent> feedback;
  std::vector<StepEvent> events;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;  // task solved
  bool truncated = false;   // budget reached without success
  StepInfo info;
};

struct ResetResult {
  Observation observation;
  std::string mission;
};

struct EnvOptions {
  bool render_rgb = true;  // symbolic views only when false
  int tile_px = kDefaultTilePx;
};

class Env {
 public:
  Env(EnvConfig config, std::uint64_t episode_seed, RewardConfig rewards = {}, EnvOptions options = {});
  Env(Scene scene, std::uint64_t episode_seed, RewardConfig rewards = {}, EnvOptions options = {});

  ResetResult reset();
  /// Throws StepAfterDone once terminated or truncated.
  StepResult step(Action action);

  const Scene& scene() const { return scene_; }
  const GridState& state() const { return state_; }
  const SubgoalProgress& progress() const { return progress_; }
  const MissionSpec& mission() const { return scene_.mission; }
  const RewardConfig& reward_config() const { return rewards_; }
  std::uint64_t episode_seed() const { return seed_; }
  bool done() const { return terminated_ || truncated_; }
  bool success() const { return terminated_; }
  int steps() const { return state_.step_count; }
  int budget() const { return state_.step_budget; }
  Observation observe() const;

 private:
  Scene scene_;
  std::uint64_t seed_;
  RewardConfig rewards_;
  EnvOptions options_;
  GridState state_;
  SubgoalProgress progress_;
  Rng feedback_rng_;
  bool terminated_ = false;
  bool truncated_ = false;
};

Env make_env(const EnvConfig& config, std::uint64_t episode_seed, const RewardConfig& rewards = {},
             const EnvOptions& options = {});

}  // namespace gridlearn
