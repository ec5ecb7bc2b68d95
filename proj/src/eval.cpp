#include "gridlearn/eval.hpp"

#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>

#include "gridlearn/planner.hpp"

namespace gridlearn {

std::string_view to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::none: return "none";
    case PerturbationKind::sticky: return "sticky";
    case PerturbationKind::adversarial_random_steps: return "adversarial_random_steps";
    case PerturbationKind::adversarial_replace_lorem: return "adversarial_replace_lorem";
    case PerturbationKind::adversarial_replace_english: return "adversarial_replace_english";
    case PerturbationKind::missing_feedback: return "missing_feedback";
    case PerturbationKind::strict: return "strict";
  }
  return "?";
}

std::optional<PerturbationKind> parse_perturbation_kind(std::string_view s) {
  for (auto k : {PerturbationKind::none, PerturbationKind::sticky, PerturbationKind::adversarial_random_steps,
                 PerturbationKind::adversarial_replace_lorem, PerturbationKind::adversarial_replace_english,
                 PerturbationKind::missing_feedback, PerturbationKind::strict}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

bool PerturbationMode::touches_feedback() const {
  return kind == PerturbationKind::adversarial_random_steps || kind == PerturbationKind::adversarial_replace_lorem ||
         kind == PerturbationKind::adversarial_replace_english || kind == PerturbationKind::missing_feedback;
}

std::string PerturbationMode::describe() const {
  char buf[64];
  if (kind == PerturbationKind::sticky) {
    std::snprintf(buf, sizeof buf, "sticky(zeta=%g)", zeta);
    return buf;
  }
  if (kind == PerturbationKind::adversarial_random_steps) {
    std::snprintf(buf, sizeof buf, "adversarial_random_steps(q=%g)", q);
    return buf;
  }
  return std::string(to_string(kind));
}

void PerturbationMode::validate() const {
  if (!(zeta >= 0.0 && zeta <= 1.0)) throw Error(ErrorKind::ConfigError, "zeta must lie in [0, 1]");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorKind::ConfigError, "q must lie in [0, 1]");
}

Action sticky_filter(std::optional<Action> prev_executed, Action chosen, double zeta, Rng& rng) {
  if (!prev_executed) return chosen;
  return rng.bernoulli(zeta) ? *prev_executed : chosen;
}

const std::vector<std::string>& english_word_bank() {
  static const std::vector<std::string> bank = [] {
    const std::set<std::string> banned = TemplateBank::builtin().vocabulary();
    std::vector<std::string> out;
    std::istringstream in(builtin_english_word_text());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      for (const auto& w : words_of(line)) {
        if (!banned.count(w) && std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
      }
    }
    return out;
  }();
  return bank;
}

const std::vector<std::string>& lorem_ipsum_words() {
  static const std::vector<std::string> words = {
      "lorem",   "ipsum",    "dolor",  "sit",     "amet",      "consectetur", "adipiscing", "elit",   "sed",
      "do",      "eiusmod",  "tempor", "incididunt", "ut",     "labore",      "et",         "dolore", "magna",
      "aliqua",  "enim",     "ad",     "minim",   "veniam",    "quis",        "nostrud",    "exercitation",
      "ullamco", "laboris",  "nisi",   "aliquip", "ex",        "ea",          "commodo",    "consequat",
      "duis",    "aute",     "irure",  "in",      "reprehenderit", "voluptate", "velit",    "esse",   "cillum",
      "eu",      "fugiat",   "nulla",  "pariatur", "excepteur", "sint",       "occaecat",   "cupidatat",
      "non",     "proident", "sunt",   "culpa",   "qui",       "officia",     "deserunt",   "mollit", "anim",
      "id",      "est",      "laborum"};
  return words;
}

std::string random_sentence(const std::vector<std::string>& bank, Rng& rng) {
  const std::size_t n = 4 + rng.uniform_index(6);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += rng.pick(bank);
  }
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out + ".";
}

std::optional<std::string> adversarial_feedback(const PerturbationMode& mode, const std::optional<std::string>& oracle,
                                                Rng& rng) {
  switch (mode.kind) {
    case PerturbationKind::adversarial_random_steps:
      return rng.bernoulli(mode.q) ? std::optional<std::string>(random_sentence(english_word_bank(), rng)) : oracle;
    case PerturbationKind::adversarial_replace_lorem:
      return oracle ? std::optional<std::string>(random_sentence(lorem_ipsum_words(), rng)) : std::nullopt;
    case PerturbationKind::adversarial_replace_english:
      return oracle ? std::optional<std::string>(random_sentence(english_word_bank(), rng)) : std::nullopt;
    case PerturbationKind::missing_feedback: return std::nullopt;
    default: return oracle;
  }
}

// ---------------------------------------------------------------------------

void PlannerPolicy::begin_episode(const Env& env) {
  plan_ = plan_bfs(env.state(), env.mission(), env.progress()).actions;
  cursor_ = 0;
  stale_ = false;
}

Action PlannerPolicy::act(const PolicyInput& in) {
  if (stale_ || cursor_ >= plan_.size()) {
    plan_ = plan_bfs(in.env.state(), in.env.mission(), in.env.progress()).actions;
    cursor_ = 0;
    stale_ = false;
  }
  return plan_[cursor_];
}

void PlannerPolicy::executed(Action chosen, Action executed) {
  ++cursor_;
  if (chosen != executed) stale_ = true;
}

void RandomPolicy::begin_episode(const Env& env) { rng_ = Rng(derive_seed(seed_, env.episode_seed(), 0x4a4d)); }

Action RandomPolicy::act(const PolicyInput&) { return kAllActions[rng_.uniform_index(kNumActions)]; }

ModelPolicy::ModelPolicy(const Model& model, TokenScheme scheme, double target_return)
    : model_(model),
      scheme_(scheme),
      text_(model.config().d_text, model.config().text_seed),
      target_(target_return),
      rtg_(target_return) {}

void ModelPolicy::begin_episode(const Env&) {
  session_.emplace(model_, scheme_, text_);
  rtg_ = ReturnConditioner(target_);
}

Action ModelPolicy::act(const PolicyInput& in) {
  if (session_->steps() > 0) rtg_.observe(in.last_reward);
  return argmax_action(session_->observe(in.mission, rtg_.current(), in.feedback, in.view));
}

void ModelPolicy::executed(Action, Action executed) { session_->commit(executed); }

// ---------------------------------------------------------------------------

EpisodeResult run_episode(Policy& policy, const EnvConfig& config, std::uint64_t episode_seed,
                          const PerturbationMode& mode, const RewardConfig& rewards) {
  mode.validate();
  if (mode.touches_feedback()) {
    if (const auto s = policy.scheme(); s && !s->feedback_input()) {
      throw Error(ErrorKind::SchemeMismatch, "mode " + mode.describe() + " perturbs language feedback, which scheme " +
                                                 s->describe() + " does not read");
    }
  }
  Env env(config, episode_seed, rewards, EnvOptions{false, kDefaultTilePx});
  const ResetResult start = env.reset();
  EpisodeResult res;
  res.plan_length = static_cast<int>(plan_bfs(env.scene()).actions.size());
  policy.begin_episode(env);

  Rng sticky_rng(derive_seed(episode_seed, 0x571c));
  Rng feedback_rng(derive_seed(episode_seed, 0xadf));
  std::optional<std::string> feedback;
  std::optional<Action> prev;
  SymbolicView view = start.observation.view;
  double last_reward = 0.0;
  bool strict_failure = false;
  while (!env.done()) {
    const Action chosen = policy.act(PolicyInput{env, start.mission, feedback, last_reward, view});
    const Action exec =
        mode.kind == PerturbationKind::sticky ? sticky_filter(prev, chosen, mode.zeta, sticky_rng) : chosen;
    if (exec != chosen) ++res.sticky_steps;
    policy.executed(chosen, exec);
    prev = exec;
    StepResult st = env.step(exec);
    bool distractor = false;
    for (const auto& ev : st.info.events) {
      if (ev.type == StepEvent::Type::picked_up && env.scene().role(ev.object_id) == ObjectRole::distractor) {
        distractor = true;
      }
    }
    if (distractor) {
      ++res.distractor_pickups;
      if (mode.kind == PerturbationKind::strict) {
        strict_failure = true;
        break;
      }
    }
    const std::optional<std::string> oracle =
        st.info.feedback ? std::optional<std::string>(st.info.feedback->text) : std::nullopt;
    feedback = adversarial_feedback(mode, oracle, feedback_rng);
    view = std::move(st.observation.view);
    last_reward = st.reward;
  }
  res.steps = env.steps();
  res.success = env.success() && !strict_failure;
  const int k = static_cast<int>(env.mission().subgoals.size());
  res.partial = k > 0 ? static_cast<double>(env.progress().done_count()) / k : 0.0;
  return res;
}

std::uint64_t eval_mission_seed(std::uint64_t base_seed, std::size_t task, int seed_index, int mission) {
  return derive_seed(derive_seed(base_seed, 0xe7a1), task, static_cast<std::uint64_t>(seed_index),
                     static_cast<std::uint64_t>(mission));
}

EvalReport evaluate(const std::function<std::unique_ptr<Policy>(int seed_index)>& make_policy,
                    const std::vector<NamedConfig>& tasks, const EvalOptions& options) {
  if (options.n_missions < 1 || options.n_seeds < 1) throw Error(ErrorKind::ConfigError, "n_missions and seeds must be >= 1");
  options.mode.validate();
  EvalReport report;
  report.n_missions = options.n_missions;
  report.base_seed = options.base_seed;
  std::vector<std::unique_ptr<Policy>> policies;
  for (int s = 0; s < options.n_seeds; ++s) policies.push_back(make_policy(s));
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    TaskReport tr;
    tr.task = tasks[ti].name;
    tr.mode = options.mode.describe();
    tr.policy = policies.front()->name();
    double succ = 0, partial = 0, steps = 0, onp_sum = 0;
    for (int s = 0; s < options.n_seeds; ++s) {
      tr.seeds.push_back(static_cast<std::uint64_t>(s));
      for (int m = 0; m < options.n_missions; ++m) {
        const EpisodeResult r = run_episode(*policies[static_cast<std::size_t>(s)], tasks[ti].config,
                                            eval_mission_seed(options.base_seed, ti, s, m), options.mode,
                                            options.rewards);
        ++tr.episodes;
        partial += r.partial;
        steps += r.steps;
        tr.distractor_pickups += r.distractor_pickups;
        if (r.success) {
          succ += 1;
          onp_sum += static_cast<double>(r.steps) / r.plan_length;
        }
      }
    }
    tr.success_rate = succ / tr.episodes;
    tr.partial_success_rate = partial / tr.episodes;
    tr.mean_steps = steps / tr.episodes;
    if (succ > 0) tr.onp = onp_sum / succ;
    report.tasks.push_back(std::move(tr));
  }
  return report;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  char buf[512];
  for (const auto& t : tasks) {
    std::snprintf(buf, sizeof buf,
                  "task=%s mode=%s policy=%s episodes=%d success_rate=%.6f partial_success_rate=%.6f onp=%s "
                  "mean_steps=%.4f distractor_pickups=%d missions_per_seed=%d seeds=%zu base_seed=%llu\n",
                  t.task.c_str(), t.mode.c_str(), t.policy.c_str(), t.episodes, t.success_rate, t.partial_success_rate,
                  t.onp ? std::to_string(*t.onp).c_str() : "undefined", t.mean_steps, t.distractor_pickups, n_missions,
                  t.seeds.size(), static_cast<unsigned long long>(base_seed));
    out << buf;
  }
  return out.str();
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "task,mode,policy,episodes,success_rate,partial_success_rate,onp,mean_steps,distractor_pickups,"
         "missions_per_seed,seeds,base_seed\n";
  char buf[512];
  for (const auto& t : tasks) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%d,%.6f,%.6f,%s,%.4f,%d,%d,%zu,%llu\n", t.task.c_str(), t.mode.c_str(),
                  t.policy.c_str(), t.episodes, t.success_rate, t.partial_success_rate,
                  t.onp ? std::to_string(*t.onp).c_str() : "", t.mean_steps, t.distractor_pickups, n_missions,
                  t.seeds.size(), static_cast<unsigned long long>(base_seed));
    out << buf;
  }
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

EnvConfig base(TaskType task, int room_size = 8) {
  EnvConfig c;
  c.room_size = room_size;
  c.allowed_task_types = {task};
  return c;
}

NamedConfig named(std::string name, EnvConfig c) { return {std::move(name), std::move(c)}; }

}  // namespace

Suite suite_preset(const std::string& name) {
  Suite s;
  s.name = name;
  if (name == "goto6") {
    s.description = "GoTo in a single 6x6 room; evaluation uses unseen seeds of the training config";
    s.train = {named("goto6", base(TaskType::go_to, 6))};
    s.eval = s.train;
  } else if (name == "systematicity") {
    s.description = "PickUp with goal colour x shape combinations held out of training";
    EnvConfig a = base(TaskType::pickup), b = a;
    a.goal_colors = {Color::red, Color::green, Color::blue};
    a.goal_kinds = {ObjectKind::ball};
    b.goal_colors = {Color::purple, Color::yellow, Color::grey};
    b.goal_kinds = {ObjectKind::key, ObjectKind::box};
    EnvConfig ea = a, eb = b;
    ea.goal_kinds = {ObjectKind::key, ObjectKind::box};
    eb.goal_kinds = {ObjectKind::ball};
    s.train = {named("pickup-rgb-ball", a), named("pickup-pyg-keybox", b)};
    s.eval = {named("pickup-rgb-keybox", ea), named("pickup-pyg-ball", eb)};
  } else if (name == "productivity-colour") {
    s.description = "PickUp with goal colours never seen during training";
    EnvConfig t = base(TaskType::pickup), e = t;
    t.goal_colors = {Color::red, Color::green, Color::blue, Color::purple};
    e.goal_colors = {Color::yellow, Color::grey};
    s.train = {named("pickup-seen-colours", t)};
    s.eval = {named("pickup-unseen-colours", e)};
  } else if (name == "productivity-room-size") {
    s.description = "GoTo in rooms larger than any training room";
    for (int r : {6, 7, 8}) s.train.push_back(named("goto-room" + std::to_string(r), base(TaskType::go_to, r)));
    s.eval = {named("goto-room10", base(TaskType::go_to, 10))};
  } else if (name == "productivity-obstacles") {
    s.description = "PickUp with more distractors than any training task";
    for (int d : {2, 3, 4}) {
      EnvConfig c = base(TaskType::pickup);
      c.num_distractors = d;
      s.train.push_back(named("pickup-distractors" + std::to_string(d), c));
    }
    EnvConfig e = base(TaskType::pickup);
    e.num_distractors = 8;
    s.eval = {named("pickup-distractors8", e)};
  } else if (name == "productivity-maze") {
    s.description = "GoTo through closed doors in a larger maze than seen in training";
    EnvConfig one = base(TaskType::go_to, 6), two = one, four = one;
    two.rooms_cols = 2;
    two.door_policy = DoorPolicy::closed;
    four.rooms_rows = 2;
    four.rooms_cols = 2;
    four.door_policy = DoorPolicy::closed;
    s.train = {named("goto-1x1", one), named("goto-1x2-closed", two)};
    s.eval = {named("goto-2x2-closed", four)};
  } else if (name == "productivity-connectors") {
    s.description = "Sequence missions whose connector never appears in training";
    EnvConfig a = base(TaskType::sequence), b = a, e = a;
    a.allowed_connectors = {Connector::and_};
    b.allowed_connectors = {Connector::then};
    e.allowed_connectors = {Connector::after};
    s.train = {named("sequence-and", a), named("sequence-then", b)};
    s.eval = {named("sequence-after", e)};
  } else if (name == "productivity-location") {
    s.description = "PickUp with location descriptors absent from training instructions";
    EnvConfig t = base(TaskType::pickup), e = t;
    e.location_language = true;
    s.train = {named("pickup", t)};
    s.eval = {named("pickup-location", e)};
  } else {
    throw Error(ErrorKind::ConfigError, "unknown suite preset: " + name);
  }
  return s;
}

std::vector<std::string> suite_names() {
  return {"goto6",
          "systematicity",
          "productivity-colour",
          "productivity-room-size",
          "productivity-obstacles",
          "productivity-maze",
          "productivity-connectors",
          "productivity-location"};
}

}  // namespace gridlearn
