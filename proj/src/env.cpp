#include "gridlearn/env.hpp"

namespace gridlearn {

namespace {
constexpr std::uint64_t kFeedbackStream = 0xfeedbac;
}

Env::Env(EnvConfig config, std::uint64_t episode_seed, RewardConfig rewards, EnvOptions options)
    : Env(generate_scene(config, episode_seed), episode_seed, rewards, options) {}

Env::Env(Scene scene, std::uint64_t episode_seed, RewardConfig rewards, EnvOptions options)
    : scene_(std::move(scene)),
      seed_(episode_seed),
      rewards_(rewards),
      options_(options),
      feedback_rng_(derive_seed(episode_seed, kFeedbackStream)) {
  rewards_.validate();
  reset();
}

ResetResult Env::reset() {
  state_ = scene_.state;
  progress_ = SubgoalProgress(scene_.mission.num_subgoals());
  feedback_rng_ = Rng(derive_seed(seed_, kFeedbackStream));
  terminated_ = truncated_ = false;
  return {observe(), scene_.mission.instruction_text};
}

Observation Env::observe() const {
  if (options_.render_rgb) return egocentric_view(state_, kDefaultViewSize, options_.tile_px);
  return Observation{symbolic_view(state_), {}};
}

StepResult Env::step(Action action) {
  if (done()) throw Error(ErrorKind::StepAfterDone, "episode already finished");
  const GridState prev = state_;
  StepOutcome outcome = apply_action(state_, action);
  state_ = outcome.next_state;

  StepResult r;
  r.info.had_effect = outcome.had_effect;
  r.info.events = outcome.events;
  r.info.completed = update_progress(progress_, scene_.mission, state_, state_.step_count);
  r.info.subgoals_done = progress_.done_count();
  r.info.feedback =
      step_feedback(scene_, prev, action, outcome, r.info.completed, progress_, feedback_rng_);
  terminated_ = progress_.all_done();
  truncated_ = !terminated_ && state_.step_count >= state_.step_budget;
  r.reward = shaped_reward(state_.step_count, state_.step_budget, scene_.mission.num_subgoals(), r.info.completed,
                           outcome.had_effect, terminated_, rewards_);
  r.terminated = terminated_;
  r.truncated = truncated_;
  r.observation = observe();
  return r;
}

Env make_env(const EnvConfig& config, std::uint64_t episode_seed, const RewardConfig& rewards,
             const EnvOptions& options) {
  config.validate();
  return Env(config, episode_seed, rewards, options);
}

}  // namespace gridlearn
