#include <cmath>

#include "gridlearn/env.hpp"
#include "gridlearn/planner.hpp"
#include "helpers.hpp"

using namespace gridlearn;
using gridlearn::test::walled_room;

TEST_CASE("terminal reward hand values") {
  CHECK(terminal_reward(10, 64, 0.9) == 0.859375);
  CHECK(terminal_reward(64, 64, 0.9) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(terminal_reward(32, 64, 1.0) == 0.5);
  CHECK(terminal_reward(5, 64, 0.9, false) == 0.0);
  CHECK_ERROR_KIND(terminal_reward(65, 64, 0.9), ErrorKind::DomainError);
  CHECK_ERROR_KIND(terminal_reward(0, 64, 0.9), ErrorKind::DomainError);
}

TEST_CASE("shaped reward per mode") {
  RewardConfig binary{RewardMode::binary, 0.9, 0.01};
  RewardConfig penal{RewardMode::binary_plus_penalty, 0.9, 0.01};
  RewardConfig dense{RewardMode::dense_plus_penalty, 0.9, 0.01};
  CHECK(shaped_reward(3, 64, 2, {0}, true, false, binary) == 0.0);
  CHECK(shaped_reward(3, 64, 2, {}, false, false, binary) == 0.0);
  CHECK(shaped_reward(3, 64, 2, {}, false, false, penal) == -0.01);
  CHECK(shaped_reward(8, 64, 1, {0}, true, true, penal) == 1.0 - 0.9 * 8 / 64);
  CHECK(shaped_reward(8, 64, 2, {0}, true, false, dense) == (1.0 - 0.9 * 8 / 64) / 2);
  CHECK(shaped_reward(8, 64, 2, {0, 1}, true, true, dense) == doctest::Approx(1.0 - 0.9 * 8 / 64).epsilon(1e-15));
}

TEST_CASE("reward config validation") {
  RewardConfig r;
  r.gamma = 0.0;
  CHECK_ERROR_KIND(r.validate(), ErrorKind::ConfigError);
  r.gamma = 1.0;
  r.failure_penalty = -1;
  CHECK_ERROR_KIND(r.validate(), ErrorKind::ConfigError);
}

TEST_CASE("returns-to-go are suffix sums") {
  CHECK(returns_to_go({1, 2, 3}) == std::vector<double>{6, 5, 3});
  CHECK(returns_to_go({}).empty());
  ReturnConditioner c;
  CHECK(c.current() == 1.0);
  c.observe(0.25);
  CHECK(c.current() == 0.75);
  c.observe(5.0);
  CHECK(c.current() == 0.0);
}

TEST_CASE("template bank parses the embedded asset") {
  const TemplateBank& b = TemplateBank::builtin();
  CHECK(b.version >= 1);
  CHECK(b.hash == to_hex(fnv1a(builtin_template_text())));
  CHECK_FALSE(b.positive.empty());
  CHECK_FALSE(b.negative.empty());
  for (const char* k : {"reach", "hold", "place_next", "distractor_pickup", "wrong_anchor"}) CHECK(b.explanation.count(k));
  CHECK(b.affordance.count("forward.wall"));
  CHECK(b.vocabulary().count("walls"));
  CHECK_ERROR_KIND(TemplateBank::parse("[positive]\nHi\n"), ErrorKind::ConfigError);
}

TEST_CASE("words_of lower-cases alphabetic runs") {
  CHECK(words_of("You can't walk, Through!") == std::vector<std::string>{"you", "can", "t", "walk", "through"});
}

TEST_CASE("affordance feedback fires exactly for no-effect steps") {
  GridState s = walled_room(5, 5, {1, 1}, Direction::north);
  const StepOutcome bump = apply_action(s, Action::forward);
  const auto f = affordance_feedback(s, Action::forward, bump);
  REQUIRE(f.has_value());
  CHECK(f->kind == FeedbackKind::affordance);
  CHECK(f->text == TemplateBank::builtin().affordance.at("forward.wall"));
  const StepOutcome turn = apply_action(s, Action::left);
  CHECK_FALSE(affordance_feedback(s, Action::left, turn).has_value());
}

TEST_CASE("env step loop: rewards, feedback and termination") {
  EnvConfig c;
  c.allowed_task_types = {TaskType::pickup};
  const RewardConfig r;
  Env env(c, 5, r);
  const ResetResult start = env.reset();
  CHECK(start.mission == env.mission().instruction_text);
  CHECK(start.observation.rgb.width == kDefaultViewSize * kDefaultTilePx);
  const Plan plan = plan_bfs(env.scene());
  double total = 0.0;
  int n = 0;
  for (Action a : plan.actions) {
    const StepResult st = env.step(a);
    total += st.reward;
    ++n;
    if (st.terminated) {
      REQUIRE(st.info.feedback.has_value());
      CHECK(st.info.feedback->kind == FeedbackKind::task_positive);
    }
  }
  CHECK(env.success());
  CHECK(total == doctest::Approx(terminal_reward(n, env.budget(), r.gamma)).epsilon(1e-12));
  CHECK_ERROR_KIND(env.step(Action::left), ErrorKind::StepAfterDone);
}

TEST_CASE("env truncates at the step budget") {
  EnvConfig c;
  c.step_budget = {3, 1};
  Env env(c, 1, {}, EnvOptions{false, kDefaultTilePx});
  env.reset();
  StepResult st;
  int n = 0;
  while (!env.done()) {
    st = env.step(Action::left);
    ++n;
  }
  CHECK(n == env.budget());
  CHECK(st.truncated);
  CHECK_FALSE(env.success());
}

TEST_CASE("distractor pickup yields negative task feedback") {
  EnvConfig c;
  c.allowed_task_types = {TaskType::pickup};
  c.num_distractors = 3;
  int seen = 0;
  for (std::uint64_t seed = 0; seed < 40 && seen < 3; ++seed) {
    Env env(c, seed, {}, EnvOptions{false, kDefaultTilePx});
    env.reset();
    for (int id = 0; id < static_cast<int>(env.scene().roles.size()); ++id) {
      if (env.scene().role(id) != ObjectRole::distractor || !env.state().find_object(id)) continue;
      const Plan p = [&] {
        try {
          return Plan{shortest_path(env.state(), facing_object(id)).actions, 0};
        } catch (const Error&) {
          return Plan{};
        }
      }();
      if (p.actions.empty() && !(env.state().front_pos() == *env.state().find_object(id))) break;
      for (Action a : p.actions) env.step(a);
      if (env.done()) break;
      const StepResult st = env.step(Action::pickup);
      REQUIRE(st.info.feedback.has_value());
      CHECK(st.info.feedback->kind == FeedbackKind::task_negative);
      ++seen;
      break;
    }
  }
  CHECK(seen > 0);
}
