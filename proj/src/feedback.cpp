#include "gridlearn/feedback.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace gridlearn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fill(std::string text, const std::string& key, const std::string& value) {
  const std::string slot = "{" + key + "}";
  for (auto p = text.find(slot); p != std::string::npos; p = text.find(slot, p + value.size())) {
    text.replace(p, slot.size(), value);
  }
  return text;
}

const std::string& lookup(const std::map<std::string, std::string>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw Error(ErrorKind::ConfigError, "feedback template missing: " + key);
  return it->second;
}

std::string describe_id(const GridState& s, int id) {
  if (s.carrying && s.carrying->id == id) return s.carrying->describe();
  if (auto p = s.find_object(id)) return s.at(*p)->describe();
  return "object";
}

}  // namespace

TemplateBank TemplateBank::parse(const std::string& text) {
  TemplateBank bank;
  bank.hash = to_hex(fnv1a(text));
  std::istringstream in(text);
  std::string line;
  std::string section;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    if (section.empty()) {
      if (line.rfind("version", 0) == 0) bank.version = std::stoi(trim(line.substr(7)));
      continue;
    }
    if (section == "positive") {
      bank.positive.push_back(line);
    } else if (section == "negative") {
      bank.negative.push_back(line);
    } else if (section == "explanation" || section == "affordance") {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::ConfigError, "template line lacks '=': " + line);
      auto& target = section == "explanation" ? bank.explanation : bank.affordance;
      target[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    } else {
      throw Error(ErrorKind::ConfigError, "unknown template section: " + section);
    }
  }
  if (bank.version <= 0 || bank.positive.size() < 4 || bank.negative.size() < 4) {
    throw Error(ErrorKind::ConfigError, "template bank needs a version and at least 4 phrases per polarity");
  }
  return bank;
}

const TemplateBank& TemplateBank::builtin() {
  static const TemplateBank bank = parse(builtin_template_text());
  return bank;
}

std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isalpha(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::set<std::string> TemplateBank::vocabulary() const {
  std::set<std::string> vocab;
  auto add = [&](const std::string& s) {
    for (auto& w : words_of(s)) vocab.insert(w);
  };
  for (const auto& s : positive) add(s);
  for (const auto& s : negative) add(s);
  for (const auto& [k, v] : explanation) add(v);
  for (const auto& [k, v] : affordance) add(v);
  // Placeholder fillers.
  for (Color c : kAllColors) add(std::string(to_string(c)));
  for (ObjectKind k : {ObjectKind::key, ObjectKind::ball, ObjectKind::box, ObjectKind::door, ObjectKind::wall}) {
    add(std::string(to_string(k)));
  }
  add("object");
  return vocab;
}

std::string_view to_string(FeedbackKind k) {
  switch (k) {
    case FeedbackKind::task_positive: return "task_positive";
    case FeedbackKind::task_negative: return "task_negative";
    case FeedbackKind::affordance: return "affordance";
  }
  return "?";
}

std::optional<FeedbackEvent> task_feedback(const Scene& scene, Action action, const StepOutcome& outcome,
                                           const std::vector<int>& completed, const SubgoalProgress& progress,
                                           Rng& rng, const TemplateBank& bank) {
  const GridState& next = outcome.next_state;
  const int step = next.step_count;
  if (!completed.empty()) {
    const Subgoal& sg = scene.mission.subgoals[static_cast<std::size_t>(completed.front())];
    std::string key = sg.type == SubgoalType::reach ? "reach" : sg.type == SubgoalType::hold ? "hold" : "place_next";
    std::string text = fill(lookup(bank.explanation, key), "object", describe_id(next, sg.object_id));
    if (sg.type == SubgoalType::place_next) text = fill(text, "anchor", describe_id(next, sg.anchor_id));
    return FeedbackEvent{FeedbackKind::task_positive, rng.pick(bank.positive) + " " + text, step};
  }
  if (!outcome.had_effect) return std::nullopt;

  if (action == Action::pickup && next.carrying && scene.role(next.carrying->id) == ObjectRole::distractor) {
    const std::string text = fill(lookup(bank.explanation, "distractor_pickup"), "object", next.carrying->describe());
    return FeedbackEvent{FeedbackKind::task_negative, rng.pick(bank.negative) + " " + text, step};
  }

  if (action == Action::drop) {
    const int dropped = outcome.events.empty() ? -1 : outcome.events.front().object_id;
    for (int i = 0; i < scene.mission.num_subgoals(); ++i) {
      const Subgoal& sg = scene.mission.subgoals[static_cast<std::size_t>(i)];
      if (sg.type != SubgoalType::place_next || sg.object_id != dropped || progress.done(i)) continue;
      const Pos at = next.front_pos();
      for (Pos d : {Pos{0, -1}, Pos{1, 0}, Pos{0, 1}, Pos{-1, 0}}) {
        const Pos q = at + d;
        if (!next.in_bounds(q) || !next.at(q) || !next.at(q)->carryable() || next.at(q)->id == sg.anchor_id) continue;
        std::string text = fill(lookup(bank.explanation, "wrong_anchor"), "object", describe_id(next, dropped));
        text = fill(text, "anchor", next.at(q)->describe());
        return FeedbackEvent{FeedbackKind::task_negative, rng.pick(bank.negative) + " " + text, step};
      }
    }
  }
  return std::nullopt;
}

std::optional<FeedbackEvent> affordance_feedback(const GridState& prev, Action action, const StepOutcome& outcome,
                                                 const TemplateBank& bank) {
  if (outcome.had_effect) return std::nullopt;
  const Pos f = prev.front_pos();
  const std::optional<WorldObject> front = prev.in_bounds(f) ? prev.at(f) : make_wall(-1);
  std::string blocker;
  std::string object = front ? front->describe() : "";
  std::string color = front ? std::string(to_string(front->color)) : "";

  auto classify_front = [&]() -> std::string {
    if (!front) return "nothing";
    if (front->kind == ObjectKind::wall) return "wall";
    if (front->is_door()) return "door";
    return "object";
  };
  switch (action) {
    case Action::left:
    case Action::right:
      return std::nullopt;  // turns always succeed
    case Action::forward:
      blocker = classify_front();
      if (blocker == "door") blocker = front->door_state == DoorState::locked ? "locked_door" : "closed_door";
      break;
    case Action::pickup:
      blocker = prev.carrying ? "hands_full" : classify_front();
      break;
    case Action::drop:
      blocker = prev.carrying ? classify_front() : "nothing";
      break;
    case Action::toggle:
      blocker = classify_front();
      if (blocker == "door") blocker = "locked_door";
      break;
  }
  std::string text = lookup(bank.affordance, std::string(to_string(action)) + "." + blocker);
  text = fill(text, "object", object);
  text = fill(text, "color", color);
  return FeedbackEvent{FeedbackKind::affordance, text, outcome.next_state.step_count};
}

std::optional<FeedbackEvent> step_feedback(const Scene& scene, const GridState& prev, Action action,
                                           const StepOutcome& outcome, const std::vector<int>& completed,
                                           const SubgoalProgress& progress, Rng& rng, const TemplateBank& bank) {
  if (auto e = task_feedback(scene, action, outcome, completed, progress, rng, bank)) return e;
  return affordance_feedback(prev, action, outcome, bank);
}

// ---------------------------------------------------------------------------

std::string_view to_string(RewardMode m) {
  switch (m) {
    case RewardMode::binary: return "binary";
    case RewardMode::binary_plus_penalty: return "binary_plus_penalty";
    case RewardMode::dense_plus_penalty: return "dense_plus_penalty";
  }
  return "?";
}

std::optional<RewardMode> parse_reward_mode(std::string_view s) {
  for (RewardMode m : {RewardMode::binary, RewardMode::binary_plus_penalty, RewardMode::dense_plus_penalty}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

void RewardConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorKind::ConfigError, "reward gamma must lie in (0, 1]");
  if (!(failure_penalty >= 0.0)) throw Error(ErrorKind::ConfigError, "failure penalty must be >= 0");
}

double terminal_reward(int n, int budget, double gamma, bool success) {
  if (n > budget) throw Error(ErrorKind::DomainError, "step count exceeds budget");
  if (!success) return 0.0;
  if (n < 1) throw Error(ErrorKind::DomainError, "successful episode needs at least one step");
  return 1.0 - gamma * static_cast<double>(n) / static_cast<double>(budget);
}

double shaped_reward(int step, int budget, int num_subgoals, const std::vector<int>& completed, bool had_effect,
                     bool success, const RewardConfig& cfg) {
  double r = 0.0;
  if (cfg.mode == RewardMode::dense_plus_penalty) {
    for (std::size_t j = 0; j < completed.size(); ++j) {
      r += terminal_reward(step, budget, cfg.gamma) / static_cast<double>(num_subgoals);
    }
  } else if (success) {
    r += terminal_reward(step, budget, cfg.gamma);
  }
  if (cfg.mode != RewardMode::binary && !had_effect) r -= cfg.failure_penalty;
  return r;
}

std::vector<double> returns_to_go(const std::vector<double>& rewards) {
  std::vector<double> rtg(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc += rewards[i];
    rtg[i] = acc;
  }
  return rtg;
}

void ReturnConditioner::observe(double reward) { value_ = std::max(0.0, value_ - reward); }

}  // namespace gridlearn
