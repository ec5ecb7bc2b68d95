#include "gridlearn/planner.hpp"

#include <algorithm>
#include <climits>
#include <cstdlib>
#include <deque>
#include <queue>
#include <string>
#include <unordered_set>

namespace gridlearn {

namespace {

int pose_index(const GridState& s, const Pose& p) {
  return (p.pos.y * s.width + p.pos.x) * 4 + static_cast<int>(p.dir);
}

bool carrying_key_for(const GridState& s, Color c) {
  return s.carrying && s.carrying->kind == ObjectKind::key && s.carrying->color == c;
}

}  // namespace

PosePredicate facing_object(int id) {
  return [id](const GridState& s, const Pose& p) {
    const Pos f = p.pos + direction_vector(p.dir);
    return s.in_bounds(f) && s.at(f) && s.at(f)->id == id;
  };
}

PosePath shortest_path(const GridState& state, const PosePredicate& goal, const NavOptions& options) {
  const int n = state.width * state.height * 4;
  std::vector<int> dist(static_cast<std::size_t>(n), INT_MAX);
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  std::vector<Action> via(static_cast<std::size_t>(n), Action::left);
  std::vector<char> crossing(static_cast<std::size_t>(n), 0);

  // (cost, insertion sequence, pose index): FIFO among equal costs keeps the
  // left < right < forward tie-breaking of plain BFS.
  using Item = std::tuple<int, long, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  long seq = 0;
  const Pose start{state.agent_pos, state.agent_dir};
  const int s0 = pose_index(state, start);
  dist[static_cast<std::size_t>(s0)] = 0;
  queue.emplace(0, seq++, s0);

  auto decode = [&](int idx) {
    Pose p;
    p.dir = static_cast<Direction>(idx % 4);
    const int cell = idx / 4;
    p.pos = {cell % state.width, cell / state.width};
    return p;
  };

  int found = -1;
  while (!queue.empty()) {
    auto [d, unused, idx] = queue.top();
    queue.pop();
    if (d != dist[static_cast<std::size_t>(idx)]) continue;
    const Pose pose = decode(idx);
    if (goal(state, pose)) {
      found = idx;
      break;
    }
    auto relax = [&](const Pose& np, Action a, int cost, bool cross) {
      const int ni = pose_index(state, np);
      if (d + cost < dist[static_cast<std::size_t>(ni)]) {
        dist[static_cast<std::size_t>(ni)] = d + cost;
        parent[static_cast<std::size_t>(ni)] = idx;
        via[static_cast<std::size_t>(ni)] = a;
        crossing[static_cast<std::size_t>(ni)] = cross ? 1 : 0;
        queue.emplace(d + cost, seq++, ni);
      }
    };
    relax({pose.pos, turn_left(pose.dir)}, Action::left, 1, false);
    relax({pose.pos, turn_right(pose.dir)}, Action::right, 1, false);
    const Pos f = pose.pos + direction_vector(pose.dir);
    if (!state.in_bounds(f)) continue;
    const auto& cell = state.at(f);
    if (!cell) {
      relax({f, pose.dir}, Action::forward, 1, false);
    } else if (cell->is_door()) {
      switch (*cell->door_state) {
        case DoorState::open: relax({f, pose.dir}, Action::forward, 1, false); break;
        case DoorState::closed:
          if (options.through_closed_doors) relax({f, pose.dir}, Action::forward, 2, true);
          break;
        case DoorState::locked:
          if (options.through_locked_doors && (options.ignore_keys || carrying_key_for(state, cell->color))) {
            relax({f, pose.dir}, Action::forward, 2, true);
          }
          break;
      }
    } else if (cell->carryable() && options.object_cost >= 0) {
      relax({f, pose.dir}, Action::forward, 1 + options.object_cost, true);
    }
  }
  if (found < 0) throw Error(ErrorKind::NotReachable, "no pose satisfies the goal");

  std::vector<int> chain;
  for (int i = found; i != -1; i = parent[static_cast<std::size_t>(i)]) chain.push_back(i);
  std::reverse(chain.begin(), chain.end());
  PosePath path;
  for (std::size_t k = 0; k < chain.size(); ++k) {
    path.poses.push_back(decode(chain[k]));
    if (k == 0) continue;
    const auto ci = static_cast<std::size_t>(chain[k]);
    if (crossing[ci]) {
      const auto& cell = state.at(decode(chain[k]).pos);
      if (cell && cell->is_door()) path.actions.push_back(Action::toggle);
    }
    path.actions.push_back(via[ci]);
  }
  return path;
}

bool replay_succeeds(const GridState& start, const MissionSpec& mission, const std::vector<Action>& actions) {
  GridState s = start;
  SubgoalProgress progress(mission.num_subgoals());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (s.step_count >= s.step_budget) return false;
    s = apply_action(s, actions[i]).next_state;
    update_progress(progress, mission, s, static_cast<int>(i) + 1);
    if (progress.all_done()) return true;
  }
  return progress.all_done();
}

// ---------------------------------------------------------------------------
// Exact search

namespace {

std::string state_key(const GridState& s) {
  std::string key;
  key.reserve(64);
  key.push_back(static_cast<char>(s.agent_pos.x));
  key.push_back(static_cast<char>(s.agent_pos.y));
  key.push_back(static_cast<char>(s.agent_dir));
  const int carried = s.carrying ? s.carrying->id : -1;
  key.append(reinterpret_cast<const char*>(&carried), sizeof(carried));
  for (std::size_t i = 0; i < s.cells.size(); ++i) {
    const auto& c = s.cells[i];
    if (!c || c->kind == ObjectKind::wall) continue;
    const auto idx = static_cast<std::uint16_t>(i);
    key.append(reinterpret_cast<const char*>(&idx), sizeof(idx));
    key.append(reinterpret_cast<const char*>(&c->id), sizeof(c->id));
    key.push_back(c->door_state ? static_cast<char>(*c->door_state) : '\x7f');
  }
  return key;
}

GridState planning_copy(const GridState& s) {
  GridState out = s;
  out.step_count = 0;
  out.step_budget = INT_MAX;
  return out;
}

}  // namespace

std::optional<std::vector<Action>> exact_subgoal_search(const GridState& state, const MissionSpec& mission,
                                                        const SubgoalProgress& progress, int subgoal,
                                                        int node_limit) {
  const Subgoal& sg = mission.subgoals[static_cast<std::size_t>(subgoal)];
  (void)progress;
  struct Node {
    int parent;
    Action action;
  };
  std::vector<Node> nodes{{-1, Action::left}};
  std::unordered_set<std::string> seen;
  std::deque<std::pair<int, GridState>> frontier;
  const GridState root = planning_copy(state);
  if (subgoal_satisfied(root, sg)) return std::vector<Action>{};
  seen.insert(state_key(root));
  frontier.emplace_back(0, root);

  while (!frontier.empty()) {
    auto [idx, s] = std::move(frontier.front());
    frontier.pop_front();
    for (Action a : kAllActions) {
      StepOutcome out = apply_action(s, a);
      if (!out.had_effect) continue;
      if (!seen.insert(state_key(out.next_state)).second) continue;
      nodes.push_back({idx, a});
      const int child = static_cast<int>(nodes.size()) - 1;
      if (subgoal_satisfied(out.next_state, sg)) {
        std::vector<Action> actions;
        for (int i = child; nodes[static_cast<std::size_t>(i)].parent != -1; i = nodes[static_cast<std::size_t>(i)].parent) {
          actions.push_back(nodes[static_cast<std::size_t>(i)].action);
        }
        std::reverse(actions.begin(), actions.end());
        return actions;
      }
      if (static_cast<int>(nodes.size()) > node_limit) return std::nullopt;
      frontier.emplace_back(child, std::move(out.next_state));
    }
  }
  throw Error(ErrorKind::NotReachable, "subgoal unreachable from this state");
}

// ---------------------------------------------------------------------------
// Maneuver chaining for state spaces too large to search exactly.

namespace {

class Maneuver {
 public:
  explicit Maneuver(const GridState& s) : state_(planning_copy(s)) {}

  const GridState& state() const { return state_; }
  const std::vector<Action>& actions() const { return actions_; }

  void exec(Action a) {
    state_ = apply_action(state_, a).next_state;
    actions_.push_back(a);
    if (actions_.size() > 4000) throw Error(ErrorKind::NotReachable, "maneuver chain runaway");
  }

  void exec_all(const std::vector<Action>& as) {
    for (Action a : as) exec(a);
  }

  bool navigate(const PosePredicate& goal, int depth = 0);
  void drop_anywhere(const std::vector<Pos>& avoid);
  void hold(int id, int depth);
  void solve(const Subgoal& sg);

 private:
  bool free_floor(Pos p) const { return state_.in_bounds(p) && !state_.at(p); }
  bool near_door(Pos p) const {
    for (Pos d : {Pos{1, 0}, Pos{-1, 0}, Pos{0, 1}, Pos{0, -1}}) {
      const Pos q = p + d;
      if (state_.in_bounds(q) && state_.at(q) && state_.at(q)->is_door()) return true;
    }
    return false;
  }

  GridState state_;
  std::vector<Action> actions_;
};

bool Maneuver::navigate(const PosePredicate& goal, int depth) {
  if (depth > 6) return false;
  NavOptions direct;
  direct.through_closed_doors = true;
  direct.through_locked_doors = true;
  for (int round = 0; round < 8; ++round) {
    try {
      exec_all(shortest_path(state_, goal, direct).actions);
      return true;
    } catch (const Error&) {
    }
    NavOptions relaxed = direct;
    relaxed.ignore_keys = true;
    PosePath path;
    bool need_objects = false;
    try {
      path = shortest_path(state_, goal, relaxed);
    } catch (const Error&) {
      relaxed.object_cost = 4;
      try {
        path = shortest_path(state_, goal, relaxed);
      } catch (const Error&) {
        return false;
      }
      need_objects = true;
    }
    // First obstacle along the relaxed path.
    std::optional<Pos> obstacle;
    for (std::size_t k = 1; k < path.poses.size(); ++k) {
      const Pos p = path.poses[k].pos;
      const auto& cell = state_.at(p);
      if (!cell) continue;
      if (cell->is_door() && cell->door_state == DoorState::locked && !carrying_key_for(state_, cell->color)) {
        obstacle = p;
        break;
      }
      if (need_objects && cell->carryable()) {
        obstacle = p;
        break;
      }
    }
    if (!obstacle) return false;
    const WorldObject blocker = *state_.at(*obstacle);
    if (blocker.is_door()) {
      int key_id = -1;
      for (const auto& c : state_.cells) {
        if (c && c->kind == ObjectKind::key && c->color == blocker.color) {
          key_id = c->id;
          break;
        }
      }
      if (key_id < 0) return false;
      hold(key_id, depth + 1);
    } else {
      std::vector<Pos> avoid;
      for (const Pose& p : path.poses) avoid.push_back(p.pos);
      if (state_.carrying) drop_anywhere(avoid);
      if (!navigate(facing_object(blocker.id), depth + 1)) return false;
      exec(Action::pickup);
      drop_anywhere(avoid);
    }
  }
  return false;
}

void Maneuver::drop_anywhere(const std::vector<Pos>& avoid) {
  if (!state_.carrying) return;
  auto ok = [&](const GridState& s, const Pose& p) {
    const Pos f = p.pos + direction_vector(p.dir);
    if (!s.in_bounds(f) || s.at(f) || f == s.agent_pos) return false;
    if (near_door(f)) return false;
    return std::find(avoid.begin(), avoid.end(), f) == avoid.end();
  };
  NavOptions opts;
  opts.through_closed_doors = true;
  opts.through_locked_doors = true;
  PosePath path;
  try {
    path = shortest_path(state_, ok, opts);
  } catch (const Error&) {
    path = shortest_path(state_, [&](const GridState& s, const Pose& p) {
      const Pos f = p.pos + direction_vector(p.dir);
      return s.in_bounds(f) && !s.at(f);
    }, opts);
  }
  exec_all(path.actions);
  exec(Action::drop);
}

void Maneuver::hold(int id, int depth) {
  // Navigation may itself pick up a door key, so retry once doors are open.
  for (int round = 0; round < 4 && !state_.is_carrying(id); ++round) {
    if (state_.carrying) drop_anywhere({});
    if (!navigate(facing_object(id), depth)) throw Error(ErrorKind::NotReachable, "object unreachable");
    if (!state_.carrying) exec(Action::pickup);
  }
}

void Maneuver::solve(const Subgoal& sg) {
  switch (sg.type) {
    case SubgoalType::reach:
      if (state_.is_carrying(sg.object_id)) drop_anywhere({});
      if (!navigate(facing_object(sg.object_id))) throw Error(ErrorKind::NotReachable, "goal unreachable");
      break;
    case SubgoalType::hold: hold(sg.object_id, 0); break;
    case SubgoalType::place_next: {
      const int anchor = sg.anchor_id;
      auto ok = [anchor](const GridState& s, const Pose& p) {
        const Pos f = p.pos + direction_vector(p.dir);
        if (!s.in_bounds(f) || s.at(f) || f == s.agent_pos) return false;
        const auto a = s.find_object(anchor);
        return a && std::abs(a->x - f.x) + std::abs(a->y - f.y) == 1;
      };
      for (int round = 0; round < 4 && !subgoal_satisfied(state_, sg); ++round) {
        hold(sg.object_id, 0);
        if (!navigate(ok)) throw Error(ErrorKind::NotReachable, "anchor unreachable");
        if (state_.is_carrying(sg.object_id)) exec(Action::drop);
      }
      break;
    }
  }
  if (!subgoal_satisfied(state_, sg)) throw Error(ErrorKind::NotReachable, "maneuver did not reach the subgoal");
}

std::vector<Action> solve_subgoal(const GridState& state, const MissionSpec& mission, const SubgoalProgress& progress,
                                  int subgoal, const PlannerOptions& options) {
  // Exact search only pays off on single-room-sized grids.
  if (state.width * state.height <= options.exact_max_cells) {
    if (auto exact = exact_subgoal_search(state, mission, progress, subgoal, options.exact_node_limit)) return *exact;
  }
  Maneuver m(state);
  m.solve(mission.subgoals[static_cast<std::size_t>(subgoal)]);
  return m.actions();
}

void topological_orders(const MissionSpec& mission, const SubgoalProgress& progress, std::vector<int>& current,
                        std::vector<char>& used, std::vector<std::vector<int>>& out) {
  const int n = mission.num_subgoals();
  if (out.size() >= 24) return;
  bool any = false;
  for (int i = 0; i < n; ++i) {
    if (used[static_cast<std::size_t>(i)] || progress.done(i)) continue;
    bool ready = true;
    for (int p : mission.subgoals[static_cast<std::size_t>(i)].prerequisites) {
      if (!progress.done(p) && !used[static_cast<std::size_t>(p)]) ready = false;
    }
    if (!ready) continue;
    any = true;
    used[static_cast<std::size_t>(i)] = 1;
    current.push_back(i);
    topological_orders(mission, progress, current, used, out);
    current.pop_back();
    used[static_cast<std::size_t>(i)] = 0;
  }
  if (!any) out.push_back(current);
}

}  // namespace

Plan plan_bfs(const GridState& state, const MissionSpec& mission, const SubgoalProgress& progress,
              const PlannerOptions& options) {
  std::vector<std::vector<int>> orders;
  std::vector<int> current;
  std::vector<char> used(static_cast<std::size_t>(mission.num_subgoals()), 0);
  topological_orders(mission, progress, current, used, orders);

  std::optional<std::vector<Action>> best;
  for (const auto& order : orders) {
    GridState s = planning_copy(state);
    SubgoalProgress prog = progress;
    std::vector<Action> actions;
    bool ok = true;
    try {
      for (int idx : order) {
        if (prog.done(idx)) continue;
        for (Action a : solve_subgoal(s, mission, prog, idx, options)) {
          s = apply_action(s, a).next_state;
          actions.push_back(a);
          update_progress(prog, mission, s, static_cast<int>(actions.size()));
        }
        if (!prog.done(idx)) {
          ok = false;
          break;
        }
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NotReachable) throw;
      ok = false;
    }
    if (ok && prog.all_done() && (!best || actions.size() < best->size())) best = std::move(actions);
  }
  if (!best) throw Error(ErrorKind::NotReachable, "no subgoal order is plannable");
  Plan plan;
  plan.actions = std::move(*best);
  plan.expected_length = static_cast<int>(plan.actions.size());
  return plan;
}

Plan plan_bfs(const Scene& scene, const PlannerOptions& options) {
  return plan_bfs(scene.state, scene.mission, SubgoalProgress(scene.mission.num_subgoals()), options);
}

}  // namespace gridlearn
