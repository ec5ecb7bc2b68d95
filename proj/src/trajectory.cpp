#include "gridlearn/trajectory.hpp"

#include "gridlearn/planner.hpp"

namespace gridlearn {

namespace {
constexpr std::uint64_t kInjectionStream = 0x1ec7;
}

std::vector<double> Trajectory::rewards() const {
  std::vector<double> r;
  r.reserve(steps.size());
  for (const auto& s : steps) r.push_back(s.reward);
  return r;
}

Trajectory rollout_trajectory(const EnvConfig& config, std::uint64_t episode_seed, double p,
                              const RewardConfig& rewards) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::DomainError, "injection probability must lie in [0, 1]");
  Env env(config, episode_seed, rewards, EnvOptions{false, kDefaultTilePx});
  Rng injection(derive_seed(episode_seed, kInjectionStream));

  Trajectory traj;
  traj.mission_text = env.mission().instruction_text;
  traj.episode_seed = episode_seed;
  traj.injection_p = p;
  traj.suboptimal = p > 0.0;
  traj.num_subgoals = env.mission().num_subgoals();
  traj.step_budget = env.budget();

  std::vector<Action> plan = plan_bfs(env.scene()).actions;
  traj.plan_length = static_cast<int>(plan.size());
  std::size_t cursor = 0;
  while (!env.done()) {
    TrajectoryStep step;
    step.observation = symbolic_view(env.state(), config.view_size);
    step.was_random_injection = injection.bernoulli(p);
    if (step.was_random_injection) {
      step.action = kAllActions[injection.uniform_index(kNumActions)];
    } else {
      if (cursor >= plan.size()) break;  // planner exhausted without success
      step.action = plan[cursor++];
    }
    const StepResult r = env.step(step.action);
    step.reward = r.reward;
    step.had_effect = r.info.had_effect;
    if (!r.info.completed.empty()) step.subgoal_completed = r.info.completed.front();
    if (r.info.feedback) {
      step.feedback = r.info.feedback->text;
      step.feedback_kind = r.info.feedback->kind;
    }
    traj.steps.push_back(std::move(step));
    if (traj.steps.back().was_random_injection && !env.done()) {
      try {
        plan = plan_bfs(env.state(), env.mission(), env.progress()).actions;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NotReachable) throw;
        break;
      }
      cursor = 0;
    }
  }
  traj.success = env.success();
  return traj;
}

Trajectory generate_suboptimal_trajectory(const EnvConfig& config, double p, const RewardConfig& rewards,
                                          std::uint64_t generator_seed, std::uint64_t task, std::uint64_t slot,
                                          SlotStats* stats) {
  for (int attempt = 0; attempt < kRegenerationCap; ++attempt) {
    const std::uint64_t seed = derive_seed(generator_seed, task, slot, static_cast<std::uint64_t>(attempt));
    Trajectory t = rollout_trajectory(config, seed, p, rewards);
    if (stats) ++stats->attempts;
    if (t.success) return t;
    if (stats) ++stats->discarded;
  }
  throw Error(ErrorKind::BudgetExhausted, "no successful rollout within the regeneration cap");
}

int DatasetCounts::per_task_total() const {
  int n = optimal;
  for (const auto& s : suboptimal) n += s.n;
  return n;
}

std::vector<SuboptimalCount> even_split(int total, const std::vector<double>& ps) {
  std::vector<SuboptimalCount> out;
  if (ps.empty()) return out;
  const int k = static_cast<int>(ps.size());
  for (int i = 0; i < k; ++i) out.push_back({ps[static_cast<std::size_t>(i)], total / k + (i < total % k ? 1 : 0)});
  return out;
}

bool Dataset::has_feedback() const {
  for (const auto& t : trajectories) {
    for (const auto& s : t.steps) {
      if (s.feedback) return true;
    }
  }
  return false;
}

void Dataset::strip_feedback() {
  for (auto& t : trajectories) {
    for (auto& s : t.steps) {
      s.feedback.reset();
      s.feedback_kind.reset();
    }
  }
  header.feedback_annotated = false;
}

Dataset generate_dataset(const std::vector<NamedConfig>& tasks, const DatasetCounts& counts,
                         const RewardConfig& rewards, std::uint64_t generator_seed) {
  if (counts.optimal < 0) throw Error(ErrorKind::ConfigError, "counts must be >= 0");
  for (const auto& s : counts.suboptimal) {
    if (s.n < 0) throw Error(ErrorKind::ConfigError, "counts must be >= 0");
    if (!(s.p >= 0.0 && s.p <= 1.0)) throw Error(ErrorKind::ConfigError, "suboptimal p must lie in [0, 1]");
  }
  rewards.validate();
  Dataset ds;
  ds.header.tasks = tasks;
  ds.header.reward_config = rewards;
  ds.header.template_hash = TemplateBank::builtin().hash;
  ds.header.template_version = TemplateBank::builtin().version;
  ds.header.counts = counts;
  ds.header.generator_seed = generator_seed;

  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    tasks[ti].config.validate();
    std::uint64_t slot = 0;
    SlotStats stats;
    auto emit = [&](double p, int n) {
      for (int i = 0; i < n; ++i, ++slot) {
        Trajectory t = generate_suboptimal_trajectory(tasks[ti].config, p, rewards, generator_seed, ti, slot, &stats);
        t.task = tasks[ti].name;
        ds.trajectories.push_back(std::move(t));
      }
    };
    emit(0.0, counts.optimal);
    for (const auto& s : counts.suboptimal) emit(s.p, s.n);
    ds.header.discarded += stats.discarded;
  }
  return ds;
}

}  // namespace gridlearn
