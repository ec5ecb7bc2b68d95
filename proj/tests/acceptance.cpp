// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. argv[1] is the path of the gridlearn CLI (criterion 11).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <unistd.h>

#include "gridlearn/eval.hpp"
#include "gridlearn/io.hpp"
#include "gridlearn/planner.hpp"
#include "gridlearn/trainer.hpp"

using namespace gridlearn;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kPlannerSeconds = 60.0;
constexpr double kInjectionTolerance = 0.02;
constexpr double kRewardIdentityTolerance = 1e-12;
constexpr double kGradRelTolerance = 1e-4;
constexpr double kGradSeconds = 300.0;
constexpr double kLossAnchorTolerance = 1e-9;
constexpr double kSmokeSuccessBar = 0.80;
constexpr double kSmokeSeconds = 600.0;
constexpr double kStickyTolerance = 0.01;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

EnvConfig single_room(int size, TaskType type, int distractors) {
  EnvConfig c;
  c.room_size = size;
  c.allowed_task_types = {type};
  c.num_distractors = distractors;
  return c;
}

// ---------------------------------------------------------------------------
// 1. Planner optimality against a full-state brute-force BFS written here.

std::string state_key(const GridState& s) {
  std::string k;
  k.reserve(s.cells.size() * 3 + 8);
  for (const auto& c : s.cells) {
    if (!c) {
      k.push_back('.');
      continue;
    }
    k.push_back(static_cast<char>('A' + static_cast<int>(c->kind)));
    k.push_back(static_cast<char>('a' + c->id % 26));
    k.push_back(c->door_state ? static_cast<char>('0' + static_cast<int>(*c->door_state)) : '-');
  }
  k += std::to_string(s.agent_pos.x) + "," + std::to_string(s.agent_pos.y) + "," +
       std::to_string(static_cast<int>(s.agent_dir)) + "," + (s.carrying ? std::to_string(s.carrying->id) : "n");
  return k;
}

bool goal_reached(const GridState& s, TaskType type, int target) {
  if (type == TaskType::pickup) return s.carrying && s.carrying->id == target;
  const Pos f = s.agent_pos + direction_vector(s.agent_dir);
  return s.in_bounds(f) && s.at(f) && s.at(f)->id == target;
}

int brute_force_length(const Scene& scene) {
  const TaskType type = scene.mission.task_type;
  const int target = scene.mission.subgoals.at(0).object_id;
  GridState start = scene.state;
  start.step_count = 0;
  start.step_budget = 1 << 30;
  if (goal_reached(start, type, target)) return 0;
  std::unordered_set<std::string> seen{state_key(start)};
  std::deque<std::pair<GridState, int>> frontier{{start, 0}};
  while (!frontier.empty()) {
    auto [s, d] = std::move(frontier.front());
    frontier.pop_front();
    for (Action a : kAllActions) {
      GridState n = apply_action(s, a).next_state;
      if (goal_reached(n, type, target)) return d + 1;
      n.step_count = 0;
      if (seen.insert(state_key(n)).second) frontier.emplace_back(std::move(n), d + 1);
    }
  }
  return -1;
}

Outcome criterion_planner() {
  const auto t0 = Clock::now();
  int matches = 0, total = 0, longest = 0;
  long long sum = 0;
  std::string first_mismatch;
  for (int i = 0; i < 500; ++i) {
    const EnvConfig c = single_room(5 + i % 2, i % 4 < 2 ? TaskType::pickup : TaskType::go_to, i % 4);
    const Scene scene = generate_scene(c, derive_seed(0xacc1, static_cast<std::uint64_t>(i)));
    const int planned = static_cast<int>(plan_bfs(scene).actions.size());
    const int brute = brute_force_length(scene);
    ++total;
    sum += brute;
    longest = std::max(longest, brute);
    if (planned == brute) {
      ++matches;
    } else if (first_mismatch.empty()) {
      first_mismatch = " first mismatch at instance " + std::to_string(i) + ": planner " + std::to_string(planned) +
                       " vs bfs " + std::to_string(brute);
    }
  }
  const double secs = seconds_since(t0);
  return {matches == total && secs < kPlannerSeconds,
          std::to_string(matches) + "/" + std::to_string(total) + " plan lengths equal brute-force BFS (mean " +
              fmt(static_cast<double>(sum) / total, 3) + ", max " + std::to_string(longest) + ") in " + fmt(secs, 3) +
              " s" + first_mismatch};
}

// ---------------------------------------------------------------------------
// 2. Suboptimality injection frequency and replay.

bool replays(const Trajectory& traj, const EnvConfig& config, const RewardConfig& rewards) {
  Env env(config, traj.episode_seed, rewards, EnvOptions{false, kDefaultTilePx});
  SymbolicView view = env.reset().observation.view;
  for (const auto& s : traj.steps) {
    if (env.done() || !(view == s.observation)) return false;
    const StepResult r = env.step(s.action);
    if (r.reward != s.reward) return false;
    view = r.observation.view;
  }
  return env.success();
}

Outcome criterion_injection() {
  const std::vector<NamedConfig> tasks{{"goto6", single_room(6, TaskType::go_to, 3)},
                                       {"pickup8", single_room(8, TaskType::pickup, 3)}};
  DatasetCounts counts;
  counts.suboptimal = {{0.5, 1000}, {0.75, 1000}};  // 2,000 per p across both tasks
  const RewardConfig rewards;
  const Dataset ds = generate_dataset(tasks, counts, rewards, 0x1a7);
  std::map<double, std::pair<long long, long long>> freq;  // p -> (injected, steps)
  int replay_ok = 0;
  for (const auto& t : ds.trajectories) {
    auto& [inj, steps] = freq[t.injection_p];
    for (const auto& s : t.steps) inj += s.was_random_injection;
    steps += t.length();
    const EnvConfig& c = t.task == "goto6" ? tasks[0].config : tasks[1].config;
    replay_ok += replays(t, c, rewards);
  }
  bool pass = replay_ok == static_cast<int>(ds.trajectories.size()) && ds.trajectories.size() == 4000;
  std::string detail;
  for (const auto& [p, v] : freq) {
    const double f = static_cast<double>(v.first) / static_cast<double>(v.second);
    pass = pass && std::abs(f - p) <= kInjectionTolerance;
    detail += "p=" + fmt(p, 3) + " measured " + fmt(f, 4) + " over " + std::to_string(v.second) + " steps; ";
  }
  pass = pass && freq.size() == 2;
  return {pass, detail + std::to_string(replay_ok) + "/" + std::to_string(ds.trajectories.size()) +
                    " trajectories succeed on replay"};
}

// ---------------------------------------------------------------------------
// 3. Reward anchors: hand replay with the grid transition function.

Outcome criterion_rewards() {
  const double anchor = terminal_reward(10, 64, 0.9);
  bool pass = anchor == 0.859375;
  std::string detail = "terminal_reward(10,64,0.9)=" + fmt(anchor, 17) + "; ";

  const RewardConfig cfg;  // dense_plus_penalty, gamma 0.9, eps 0.01
  std::vector<EnvConfig> configs;
  EnvConfig seq = single_room(8, TaskType::sequence, 2);
  configs.push_back(seq);
  configs.push_back(single_room(8, TaskType::put_next, 2));
  configs.push_back(single_room(7, TaskType::pickup, 3));
  double worst = 0.0;
  int max_k = 0;
  for (int i = 0; i < 50; ++i) {
    const EnvConfig& c = configs[static_cast<std::size_t>(i) % configs.size()];
    const std::uint64_t seed = derive_seed(0x4e3a, static_cast<std::uint64_t>(i));
    const Trajectory traj = rollout_trajectory(c, seed, 0.1 * (i % 5), cfg);
    const Scene scene = generate_scene(c, seed);
    const int K = scene.mission.num_subgoals();
    max_k = std::max(max_k, K);
    const int N = scene.state.step_budget;
    std::vector<bool> done(static_cast<std::size_t>(K), false);
    GridState s = scene.state;
    double expected = 0.0;
    for (int n = 1; n <= traj.length(); ++n) {
      const StepOutcome o = apply_action(s, traj.steps[static_cast<std::size_t>(n - 1)].action);
      s = o.next_state;
      if (!o.had_effect) expected -= cfg.failure_penalty;
      for (bool changed = true; changed;) {
        changed = false;
        for (int j = 0; j < K; ++j) {
          const Subgoal& g = scene.mission.subgoals[static_cast<std::size_t>(j)];
          bool ready = !done[static_cast<std::size_t>(j)];
          for (int pre : g.prerequisites) ready = ready && done[static_cast<std::size_t>(pre)];
          if (ready && subgoal_satisfied(s, g)) {
            done[static_cast<std::size_t>(j)] = true;
            expected += (1.0 - cfg.gamma * n / N) / K;
            changed = true;
          }
        }
      }
    }
    double actual = 0.0;
    for (double r : traj.rewards()) actual += r;
    worst = std::max(worst, std::abs(actual - expected));
  }
  pass = pass && worst <= kRewardIdentityTolerance && max_k >= 2;
  return {pass, detail + "50 scripted episodes (K up to " + std::to_string(max_k) + ") max |total - hand replay| = " +
                    fmt(worst, 3)};
}

// ---------------------------------------------------------------------------
// 4. Returns-to-go under binary rewards; inference starts at G = 1.

Outcome criterion_rtg() {
  RewardConfig binary;
  binary.mode = RewardMode::binary;
  DatasetCounts counts;
  counts.optimal = 100;
  counts.suboptimal = {{0.5, 100}};
  const Dataset ds = generate_dataset({{"goto6", single_room(6, TaskType::go_to, 3)},
                                       {"seq8", single_room(8, TaskType::sequence, 2)}},
                                      counts, binary, 0x47);
  const TextEncoder text(16);
  const TokenScheme scalar{SchemeVariant::scalar, false, false, true, false};
  int constant = 0;
  for (const auto& t : ds.trajectories) {
    const EncodedSequence seq = assemble_sequence(t, scalar, text);
    const double G = seq.rtg.front();
    bool ok = t.success && G > 0.0;
    for (int i = 0; i < seq.T; ++i) {
      ok = ok && seq.rtg[static_cast<std::size_t>(i)] == G;
      ok = ok && seq.reward_target[static_cast<std::size_t>(i)] == (i + 1 < seq.T ? G : 0.0);
    }
    constant += ok;
  }
  ModelConfig mc;
  mc.backbone = {1, 2, 1, 16, 32, 64};
  mc.d_text = 16;
  const Model model(mc, 0);
  ModelPolicy policy(model, scalar);
  const EnvConfig c = single_room(6, TaskType::go_to, 3);
  Env env(c, 1, binary, EnvOptions{false, kDefaultTilePx});
  env.reset();
  policy.begin_episode(env);
  const double start = policy.current_return();
  const bool pass = constant == static_cast<int>(ds.trajectories.size()) && start == 1.0;
  return {pass, std::to_string(constant) + "/" + std::to_string(ds.trajectories.size()) +
                    " successful trajectories have constant returns-to-go; inference stream starts at G=" +
                    fmt(start)};
}

// ---------------------------------------------------------------------------
// 5. Oracle soundness over every (state, action) pair of a 5x5 room.

Outcome criterion_oracle() {
  const Pos door_pos{4, 2};
  std::size_t pairs = 0, affordance = 0, task = 0, violations = 0, both = 0;
  for (ObjectKind kind : {ObjectKind::key, ObjectKind::ball}) {
    for (DoorState ds : {DoorState::open, DoorState::closed, DoorState::locked}) {
      GridState base(5, 5);
      int id = 2;
      for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 5; ++x) {
          if (x == 0 || y == 0 || x == 4 || y == 4) base.at({x, y}) = make_wall(id++);
        }
      }
      base.at(door_pos) = make_door(Color::yellow, ds, 1);
      base.step_budget = 64;
      const WorldObject obj = make_object(kind, Color::yellow, 0);

      Scene scene;
      scene.roles.assign(static_cast<std::size_t>(id), ObjectRole::fixture);
      scene.roles[0] = ObjectRole::goal;
      Clause clause{TaskType::pickup, GoalDescriptor{Color::yellow, kind, std::nullopt}, std::nullopt};
      scene.mission.task_type = TaskType::pickup;
      scene.mission.clauses = {clause};
      scene.mission.subgoals = {Subgoal{SubgoalType::hold, 0, {}, 0, -1}};
      scene.mission.instruction_text = "pick up the " + obj.describe();

      std::vector<Pos> agent_cells;
      for (int y = 1; y < 4; ++y) {
        for (int x = 1; x < 4; ++x) agent_cells.push_back({x, y});
      }
      if (ds == DoorState::open) agent_cells.push_back(door_pos);
      for (Pos ap : agent_cells) {
        // Object placements: carried, or on any free interior cell.
        std::vector<std::optional<Pos>> placements{std::nullopt};
        for (int y = 1; y < 4; ++y) {
          for (int x = 1; x < 4; ++x) {
            if (!(Pos{x, y} == ap)) placements.push_back(Pos{x, y});
          }
        }
        for (const auto& op : placements) {
          for (int d = 0; d < 4; ++d) {
            GridState s = base;
            s.agent_pos = ap;
            s.agent_dir = static_cast<Direction>(d);
            if (op) {
              s.at(*op) = obj;
            } else {
              s.carrying = obj;
            }
            scene.state = s;
            for (Action a : kAllActions) {
              const StepOutcome o = apply_action(s, a);
              SubgoalProgress before(1);
              update_progress(before, scene.mission, s, 0);
              SubgoalProgress after = before;
              const std::vector<int> completed = update_progress(after, scene.mission, o.next_state, 1);
              Rng rng(derive_seed(pairs, 0x5e));
              const auto t = task_feedback(scene, a, o, completed, after, rng);
              const auto f = affordance_feedback(s, a, o);
              const bool unchanged = s.same_content(o.next_state);
              ++pairs;
              affordance += f.has_value();
              task += t.has_value();
              violations += f.has_value() != unchanged;
              both += f.has_value() && t.has_value();
            }
          }
        }
      }
    }
  }
  return {violations == 0 && both == 0 && affordance > 0 && task > 0,
          std::to_string(pairs) + " pairs: " + std::to_string(affordance) + " affordance events, " +
              std::to_string(task) + " task events, " + std::to_string(violations) + " iff violations, " +
              std::to_string(both) + " steps with both"};
}

// ---------------------------------------------------------------------------
// 6. Token pipeline invariants.

Outcome criterion_tokens() {
  const TextEncoder text(16);
  const std::vector<EnvConfig> configs{single_room(6, TaskType::go_to, 3), single_room(8, TaskType::pickup, 3),
                                       single_room(8, TaskType::put_next, 2), single_room(8, TaskType::sequence, 2)};
  std::size_t checked = 0, failures = 0, events = 0;
  for (int i = 0; i < 80; ++i) {
    const Trajectory traj = rollout_trajectory(configs[static_cast<std::size_t>(i) % 4],
                                               derive_seed(0x70c, static_cast<std::uint64_t>(i)), 0.25 * (i % 5), {});
    for (bool repeat : {false, true}) {
      std::map<SchemeVariant, std::set<int>> unmasked;
      for (SchemeVariant v : {SchemeVariant::none, SchemeVariant::scalar, SchemeVariant::lang, SchemeVariant::combo}) {
        const TokenScheme scheme{v, repeat, false, false, false};
        const EncodedSequence seq = assemble_sequence(traj, scheme, text);
        ++checked;
        if (seq.flattened_length() != 5 * traj.length()) ++failures;
        const auto pos = seq.unmasked_positions();
        unmasked[v] = {pos.begin(), pos.end()};
        for (int t = 0; t < seq.T; ++t) {
          const bool event = t > 0 && traj.steps[static_cast<std::size_t>(t - 1)].feedback.has_value();
          const bool slot = unmasked[v].count(kSlotsPerStep * t + kFeedbackSlot) > 0;
          if (slot != (scheme.feedback_input() && event)) ++failures;
          if (scheme.feedback_input() && event && v == SchemeVariant::lang) ++events;
        }
      }
      std::set<int> uni = unmasked[SchemeVariant::scalar];
      uni.insert(unmasked[SchemeVariant::lang].begin(), unmasked[SchemeVariant::lang].end());
      if (uni != unmasked[SchemeVariant::combo]) ++failures;
    }
  }
  return {failures == 0 && events > 0, std::to_string(checked) + " (trajectory, scheme) encodings, " +
                                           std::to_string(events) + " feedback events, " +
                                           std::to_string(failures) + " invariant failures"};
}

// ---------------------------------------------------------------------------
// 7. Finite-difference gradient check with all four losses.

Outcome criterion_gradcheck() {
  const auto t0 = Clock::now();
  EnvConfig c;
  c.allowed_task_types = {TaskType::put_next};
  std::vector<EncodedSequence> seqs;
  ModelConfig mc;
  mc.backbone = {1, 2, 1, 16, 32, 64};
  mc.d_text = 8;
  mc.d_img = 8;
  mc.cnn_channels = 4;
  mc.tile_px = 2;
  const TextEncoder text(mc.d_text);
  const TokenScheme scheme{SchemeVariant::combo, true, true, true, true};
  for (int i = 0; i < 2; ++i) {
    EncodedSequence s = assemble_sequence(rollout_trajectory(c, 10 + i, 0.3, {}), scheme, text);
    const int T = std::min(s.T, 4);
    s.T = T;
    s.observations.resize(T);
    s.actions.resize(T);
    s.rtg.resize(T);
    s.feedback.resize(T);
    s.feedback_target.resize(T);
    s.reward_target.resize(T);
    s.unmasked.resize(T);
    seqs.push_back(std::move(s));
  }
  const EncodedBatch batch = pad_batch(seqs);
  Model model(mc, 1);
  const GradCheckResult r = gradient_check(model, batch, scheme, 1e-4, 1e-6);
  const double secs = seconds_since(t0);
  return {model.parameter_count() <= 10000 && r.max_rel_error < kGradRelTolerance && secs < kGradSeconds &&
              r.checked == model.parameter_count(),
          std::to_string(model.parameter_count()) + " parameters, max rel error " + fmt(r.max_rel_error, 3) + " at " +
              r.worst_parameter + ", " + std::to_string(r.kink_retries) + " kink retries, " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 8. Loss anchors.

Outcome criterion_losses() {
  const Mat zeros = Mat::Zero(3, kNumActions);
  const double ce = loss_action(zeros, {0, 3, 5}, {true, true, true});
  Tape tape;
  const Var ce_tape = tape.cross_entropy(tape.constant(zeros), {1, 2, 4}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  Mat u(2, 4), v(2, 4);
  u << 1, 0, 0, 0, 0.5, -0.5, 0.5, 0.5;
  v = -u;
  const double cos = loss_image(u, v, {true, true});
  const Var cos_tape = tape.cosine_loss(tape.constant(u), v, {0.5, 0.5});
  const bool ce_ok = std::abs(ce - std::log(6.0)) <= kLossAnchorTolerance &&
                     std::abs(ce_tape.scalar() - std::log(6.0)) <= kLossAnchorTolerance;
  const bool cos_ok =
      std::abs(cos - 2.0) <= kLossAnchorTolerance && std::abs(cos_tape.scalar() - 2.0) <= kLossAnchorTolerance;

  // The reward head sees RMS-normalised hidden states times the final gain.
  const Model model(ModelConfig{}, 5);
  const int d = model.config().backbone.d_model;
  const Mat& gain = model.param("norm.final").value;
  Rng rng(0x8e);
  Mat h(100000, d);
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    for (int j = 0; j < d; ++j) h(r, j) = rng.normal();
    h.row(r) = (h.row(r) / std::sqrt(h.row(r).squaredNorm() / d)).cwiseProduct(gain);
  }
  Tape t2;
  const Var out = t2.sigmoid(
      t2.add_row(t2.matmul(t2.constant(h), t2.constant(model.param("head.reward.w").value)),
                 t2.constant(model.param("head.reward.b").value)));
  const double lo = out.value().minCoeff(), hi = out.value().maxCoeff();
  const bool head_ok = lo > 0.0 && hi < 1.0;
  return {ce_ok && cos_ok && head_ok, "uniform CE " + fmt(ce, 12) + " (ln 6 = " + fmt(std::log(6.0), 12) +
                                          "), antiparallel cosine " + fmt(cos, 12) + ", reward head range [" +
                                          fmt(lo, 4) + ", " + fmt(hi, 4) + "] over 1e5 inputs"};
}

// ---------------------------------------------------------------------------
// 9. Smoke training run.

Outcome criterion_smoke() {
  const auto t0 = Clock::now();
  const Suite suite = suite_preset("goto6");
  DatasetCounts counts;
  counts.optimal = 1000;
  counts.suboptimal = {{0.5, 500}, {0.75, 500}};
  const Dataset ds = generate_dataset(suite.train, counts, RewardConfig{}, 0x5a0);
  Model model(model_preset("desk"), 0);
  TrainConfig tc;
  tc.scheme = TokenScheme{SchemeVariant::lang, false, true, false, false};
  tc.adam.lr = 1e-3;
  tc.epochs = 6;
  tc.cosine_decay = true;
  tc.batch_size = 16;
  tc.seed = 0;
  const TrainSummary summary = train(model, ds, tc);
  const double train_secs = seconds_since(t0);

  EvalOptions opt;
  opt.n_missions = 128;
  opt.n_seeds = 1;
  opt.base_seed = 0x5a1;
  const EvalReport learned =
      evaluate([&](int) { return std::make_unique<ModelPolicy>(model, tc.scheme); }, suite.eval, opt);
  const EvalReport random =
      evaluate([&](int) { return std::make_unique<RandomPolicy>(0x5a2); }, suite.eval, opt);
  const double secs = seconds_since(t0);
  const double s_model = learned.tasks.at(0).success_rate, s_random = random.tasks.at(0).success_rate;
  return {s_model >= kSmokeSuccessBar && s_model > s_random && secs < kSmokeSeconds,
          "desk model (" + std::to_string(model.parameter_count()) + " params), " +
              std::to_string(ds.trajectories.size()) + " trajectories, " + std::to_string(summary.updates) +
              " updates in " + fmt(train_secs, 3) + " s; success " + fmt(s_model, 4) + " vs random " +
              fmt(s_random, 4) + " on 128 identical missions; total " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 10. Evaluation harness anchors.

Outcome criterion_eval() {
  std::string detail;
  bool pass = true;
  EvalOptions opt;
  opt.n_missions = 32;
  opt.n_seeds = 1;
  opt.base_seed = 0xe10;
  int task_reports = 0;
  for (const auto& name : suite_names()) {
    const Suite s = suite_preset(name);
    for (const auto* split : {&s.train, &s.eval}) {
      const EvalReport r = evaluate([](int) { return std::make_unique<PlannerPolicy>(); }, *split, opt);
      for (const auto& t : r.tasks) {
        ++task_reports;
        if (t.success_rate != 1.0 || !t.onp || std::abs(*t.onp - 1.0) > 1e-12) {
          pass = false;
          detail += "planner off on " + name + "/" + t.task + "; ";
        }
      }
    }
  }
  detail += "planner success=1 onp=1 on " + std::to_string(task_reports) + " preset task splits; ";

  // Sticky contracts over 1e5 steps.
  constexpr int kSteps = 100000;
  Rng choose(0x571), r0(1), r1(2), r25(3);
  std::optional<Action> p0, p1, p25;
  int zeta0_ok = 0, zeta1_ok = 0, sticky = 0;
  std::optional<Action> first;
  for (int i = 0; i < kSteps; ++i) {
    const Action chosen = kAllActions[choose.uniform_index(kNumActions)];
    if (!first) first = chosen;
    const Action e0 = sticky_filter(p0, chosen, 0.0, r0);
    zeta0_ok += e0 == chosen;
    p0 = e0;
    const Action e1 = sticky_filter(p1, chosen, 1.0, r1);
    zeta1_ok += e1 == *first;
    p1 = e1;
    // Always choose something other than the previous executed action so a
    // repeat identifies a sticky step.
    const Action differ = p25 ? kAllActions[(static_cast<int>(*p25) + 1 + static_cast<int>(choose.uniform_index(5))) %
                                            kNumActions]
                              : chosen;
    const Action e25 = sticky_filter(p25, differ, 0.25, r25);
    if (p25 && e25 == *p25) ++sticky;
    p25 = e25;
  }
  const double freq = static_cast<double>(sticky) / (kSteps - 1);
  const bool sticky_ok = zeta0_ok == kSteps && zeta1_ok == kSteps && std::abs(freq - 0.25) <= kStickyTolerance;
  pass = pass && sticky_ok;
  detail += "sticky zeta=0 identity " + std::to_string(zeta0_ok) + "/1e5, zeta=1 frozen " + std::to_string(zeta1_ok) +
            "/1e5, zeta=0.25 frequency " + fmt(freq, 4) + "; ";

  // Strict success is a subset of normal success on paired episodes.
  const EnvConfig crowded = suite_preset("productivity-obstacles").eval.at(0).config;
  int normal_wins = 0, strict_wins = 0, violations = 0;
  for (int i = 0; i < 500; ++i) {
    const std::uint64_t seed = derive_seed(0x5c7, static_cast<std::uint64_t>(i));
    RandomPolicy a(0x77), b(0x77);
    const bool n = run_episode(a, crowded, seed, {PerturbationKind::none}).success;
    const bool s = run_episode(b, crowded, seed, {PerturbationKind::strict}).success;
    normal_wins += n;
    strict_wins += s;
    violations += s && !n;
  }
  pass = pass && violations == 0 && strict_wins < normal_wins;
  detail += "strict " + std::to_string(strict_wins) + " vs normal " + std::to_string(normal_wins) +
            " successes over 500 paired episodes, " + std::to_string(violations) + " strict-only; ";

  // Adversarial English vocabulary is disjoint from the template bank.
  const std::set<std::string> vocab = TemplateBank::builtin().vocabulary();
  std::size_t shared = 0;
  for (const auto& w : english_word_bank()) shared += vocab.count(w);
  Rng rng(0xe9);
  const PerturbationMode mode{PerturbationKind::adversarial_replace_english};
  for (int i = 0; i < 10000; ++i) {
    for (const auto& w : words_of(*adversarial_feedback(mode, std::string("Well done."), rng))) shared += vocab.count(w);
  }
  pass = pass && shared == 0 && !english_word_bank().empty();
  detail += std::to_string(english_word_bank().size()) + "-word English bank shares " + std::to_string(shared) +
            " words with the template vocabulary";
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 11. CLI determinism.

Outcome criterion_determinism(const std::string& cli) {
  if (cli.empty()) return {false, "CLI path not given"};
  const fs::path dir = fs::temp_directory_path() / ("gridlearn-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  ::unsetenv("GRIDLEARN_CACHE_DIR");
  // Both runs use identical flags and relative paths, each in its own directory.
  auto run = [&](const fs::path& cwd, const std::string& args) {
    const std::string cmd = "cd \"" + cwd.string() + "\" && \"" + cli + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  bool ok = true;
  for (const char* tag : {"a", "b"}) {
    const fs::path cwd = dir / tag;
    fs::create_directories(cwd);
    ok = ok && run(cwd, "gen-data --preset goto6 --optimal 60 --suboptimal 0.5:20,0.75:20 --seed 11 --out data.gld");
    ok = ok && run(cwd, "train --data data.gld --scheme combo --predict feedback,reward,image --size desk --seed 3 "
                        "--epochs 2 --max-updates 12 --out model.ckpt");
    ok = ok && run(cwd, "eval --ckpt model.ckpt --suite goto6 --missions 12 --seeds 2 --base-seed 5 --out report.txt");
  }
  if (!ok) return {false, "a CLI invocation failed"};
  std::string detail;
  bool same = true;
  for (const char* name : {"data.gld", "model.ckpt", "model.ckpt.manifest.json", "report.txt", "report.txt.csv"}) {
    const std::string a = read_file((dir / "a" / name).string()), b = read_file((dir / "b" / name).string());
    const bool eq = a == b && !a.empty();
    same = same && eq;
    if (!detail.empty()) detail += "; ";
    detail += std::string(name) + (eq ? " identical" : " DIFFERS") + " (" + std::to_string(a.size()) + " B)";
  }
  fs::remove_all(dir);
  return {same, "gen-data/train/eval rerun: " + detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? fs::absolute(argv[1]).string() : "";
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"planner optimality", criterion_planner},
      {"suboptimality injection", criterion_injection},
      {"reward formula anchors", criterion_rewards},
      {"returns-to-go conditioning", criterion_rtg},
      {"oracle soundness", criterion_oracle},
      {"token pipeline", criterion_tokens},
      {"gradient check", criterion_gradcheck},
      {"loss anchors", criterion_losses},
      {"smoke training", criterion_smoke},
      {"evaluation harness anchors", criterion_eval},
      {"determinism", [&] { return criterion_determinism(cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(n)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << n << "  " << criteria[i].first
              << ": " << o.detail << " [" << fmt(seconds_since(t0), 3) << " s]" << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
