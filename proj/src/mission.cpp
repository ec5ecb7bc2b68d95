#include "gridlearn/mission.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "gridlearn/planner.hpp"

namespace gridlearn {

std::string_view to_string(TaskType t) {
  switch (t) {
    case TaskType::go_to: return "goto";
    case TaskType::pickup: return "pickup";
    case TaskType::put_next: return "putnext";
    case TaskType::sequence: return "sequence";
  }
  return "?";
}

std::string_view to_string(Connector c) {
  switch (c) {
    case Connector::and_: return "and";
    case Connector::then: return "then";
    case Connector::after: return "after";
  }
  return "?";
}

std::string_view to_string(DoorPolicy p) {
  switch (p) {
    case DoorPolicy::none: return "none";
    case DoorPolicy::open: return "open";
    case DoorPolicy::closed: return "closed";
    case DoorPolicy::locked: return "locked";
  }
  return "?";
}

std::string_view to_string(LocationDesc l) {
  switch (l) {
    case LocationDesc::left: return "left";
    case LocationDesc::right: return "right";
    case LocationDesc::front: return "front";
    case LocationDesc::behind: return "behind";
  }
  return "?";
}

std::optional<TaskType> parse_task_type(std::string_view s) {
  for (auto t : {TaskType::go_to, TaskType::pickup, TaskType::put_next, TaskType::sequence}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

std::optional<Connector> parse_connector(std::string_view s) {
  for (auto c : {Connector::and_, Connector::then, Connector::after}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::optional<DoorPolicy> parse_door_policy(std::string_view s) {
  for (auto p : {DoorPolicy::none, DoorPolicy::open, DoorPolicy::closed, DoorPolicy::locked}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

namespace {

bool is_placeable(ObjectKind k) {
  return k == ObjectKind::key || k == ObjectKind::ball || k == ObjectKind::box;
}

std::vector<TaskType> clause_types(const EnvConfig& config) {
  std::vector<TaskType> out;
  for (auto t : config.allowed_task_types) {
    if (t != TaskType::sequence) out.push_back(t);
  }
  // A sequence-only config composes every primitive clause type.
  if (out.empty()) out = {TaskType::go_to, TaskType::pickup, TaskType::put_next};
  return out;
}

}  // namespace

void EnvConfig::validate() const {
  if (room_size < 5) throw Error(ErrorKind::ConfigError, "room_size must be >= 5");
  if (rooms_rows < 1 || rooms_cols < 1) throw Error(ErrorKind::ConfigError, "rooms_rows/rooms_cols must be >= 1");
  if (num_distractors < 0) throw Error(ErrorKind::ConfigError, "num_distractors must be >= 0");
  if (view_size < 3 || view_size % 2 == 0) throw Error(ErrorKind::ConfigError, "view_size must be odd and >= 3");
  if (step_budget.base < 1 || step_budget.per_subgoal < 0) {
    throw Error(ErrorKind::ConfigError, "step budget must be positive");
  }
  if (allowed_task_types.empty()) throw Error(ErrorKind::EmptyValueSet, "allowed_task_types is empty");
  if (goal_colors.empty()) throw Error(ErrorKind::EmptyValueSet, "goal_colors is empty");
  if (goal_kinds.empty()) throw Error(ErrorKind::EmptyValueSet, "goal_kinds is empty");
  for (auto k : goal_kinds) {
    if (!is_placeable(k)) throw Error(ErrorKind::ConfigError, "goal kinds must be key, ball or box");
  }
  for (auto k : distractor_kinds) {
    if (!is_placeable(k)) throw Error(ErrorKind::ConfigError, "distractor kinds must be key, ball or box");
  }
  if (num_distractors > 0 && (distractor_colors.empty() || distractor_kinds.empty())) {
    throw Error(ErrorKind::EmptyValueSet, "distractor value sets are empty");
  }
  const bool wants_sequence =
      std::find(allowed_task_types.begin(), allowed_task_types.end(), TaskType::sequence) != allowed_task_types.end();
  if (wants_sequence) {
    if (allowed_connectors.empty()) throw Error(ErrorKind::EmptyValueSet, "allowed_connectors is empty");
    }
  const bool wants_pair =
      wants_sequence ||
      std::find(allowed_task_types.begin(), allowed_task_types.end(), TaskType::put_next) != allowed_task_types.end();
  if (wants_pair && goal_colors.size() * goal_kinds.size() < 2) {
    throw Error(ErrorKind::EmptyValueSet, "put-next and sequence missions need >= 2 goal combinations");
  }
  if (location_language && num_distractors < 1) {
    throw Error(ErrorKind::ConfigError, "location language needs at least one distractor for the twin object");
  }
}

std::string GoalDescriptor::phrase() const {
  std::string out = "the ";
  out += to_string(color);
  out += ' ';
  out += to_string(kind);
  if (location) {
    switch (*location) {
      case LocationDesc::left: out += " on your left"; break;
      case LocationDesc::right: out += " on your right"; break;
      case LocationDesc::front: out += " in front of you"; break;
      case LocationDesc::behind: out += " behind you"; break;
    }
  }
  return out;
}

std::string clause_text(const Clause& clause) {
  switch (clause.type) {
    case TaskType::go_to: return "go to " + clause.target.phrase();
    case TaskType::pickup: return "pick up " + clause.target.phrase();
    case TaskType::put_next: return "put " + clause.target.phrase() + " next to " + clause.anchor->phrase();
    case TaskType::sequence: break;
  }
  throw Error(ErrorKind::DomainError, "sequence is not a clause type");
}

MissionSpec sample_mission(const EnvConfig& config, Rng& rng) {
  config.validate();
  MissionSpec mission;
  mission.task_type = rng.pick(config.allowed_task_types);

  std::vector<TaskType> types;
  if (mission.task_type == TaskType::sequence) {
    mission.connector = rng.pick(config.allowed_connectors);
    const auto pool = clause_types(config);
    types = {rng.pick(pool), rng.pick(pool)};
  } else {
    types = {mission.task_type};
  }

  // All referents of one mission carry distinct (color, kind) pairs.
  std::set<std::pair<Color, ObjectKind>> used;
  auto draw = [&](bool allow_location) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      GoalDescriptor d;
      d.color = rng.pick(config.goal_colors);
      d.kind = rng.pick(config.goal_kinds);
      if (used.count({d.color, d.kind})) continue;
      used.insert({d.color, d.kind});
      if (allow_location && config.location_language) {
        static constexpr LocationDesc locs[] = {LocationDesc::left, LocationDesc::right, LocationDesc::front,
                                                LocationDesc::behind};
        d.location = locs[rng.uniform_index(4)];
      }
      return d;
    }
    throw Error(ErrorKind::EmptyValueSet, "not enough distinct goal combinations for this mission");
  };

  for (std::size_t c = 0; c < types.size(); ++c) {
    Clause clause;
    clause.type = types[c];
    clause.target = draw(clause.type != TaskType::put_next);
    if (clause.type == TaskType::put_next) clause.anchor = draw(false);
    mission.clauses.push_back(clause);
  }

  // Subgoals: clause-internal order is always enforced.
  std::vector<std::vector<int>> clause_subgoals(mission.clauses.size());
  for (std::size_t c = 0; c < mission.clauses.size(); ++c) {
    const Clause& clause = mission.clauses[c];
    auto add = [&](SubgoalType type, std::vector<int> prereq) {
      Subgoal s;
      s.type = type;
      s.clause = static_cast<int>(c);
      s.prerequisites = std::move(prereq);
      mission.subgoals.push_back(s);
      const int idx = static_cast<int>(mission.subgoals.size()) - 1;
      clause_subgoals[c].push_back(idx);
      return idx;
    };
    switch (clause.type) {
      case TaskType::go_to: add(SubgoalType::reach, {}); break;
      case TaskType::pickup: add(SubgoalType::hold, {}); break;
      case TaskType::put_next: {
        const int h = add(SubgoalType::hold, {});
        add(SubgoalType::place_next, {h});
        break;
      }
      case TaskType::sequence: break;
    }
  }
  if (mission.connector && *mission.connector != Connector::and_) {
    const int before = *mission.connector == Connector::then ? 0 : 1;
    const int later = 1 - before;
    auto& first_later = mission.subgoals[static_cast<std::size_t>(clause_subgoals[later].front())];
    for (int idx : clause_subgoals[before]) first_later.prerequisites.push_back(idx);
  }

  if (mission.task_type == TaskType::sequence) {
    const std::string a = clause_text(mission.clauses[0]);
    const std::string b = clause_text(mission.clauses[1]);
    switch (*mission.connector) {
      case Connector::and_: mission.instruction_text = a + " and " + b; break;
      case Connector::then: mission.instruction_text = a + ", then " + b; break;
      case Connector::after: mission.instruction_text = a + " after you " + b; break;
    }
  } else {
    mission.instruction_text = clause_text(mission.clauses[0]);
  }
  return mission;
}

std::optional<LocationDesc> relative_location(Pos agent, Direction dir, Pos target) {
  const Pos v = target - agent;
  const Pos f = direction_vector(dir);
  const Pos r = direction_vector(turn_right(dir));
  const int fwd = v.x * f.x + v.y * f.y;
  const int lat = v.x * r.x + v.y * r.y;
  if (fwd > std::abs(lat)) return LocationDesc::front;
  if (-fwd > std::abs(lat)) return LocationDesc::behind;
  if (lat > std::abs(fwd)) return LocationDesc::right;
  if (-lat > std::abs(fwd)) return LocationDesc::left;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

struct RoomRect {
  int x0, y0, size;
  bool contains_interior(Pos p) const {
    return p.x > x0 && p.x < x0 + size - 1 && p.y > y0 && p.y < y0 + size - 1;
  }
};

struct Layout {
  std::vector<RoomRect> rooms;
  std::vector<std::pair<int, int>> edges;  // door edges between rooms
  std::vector<Pos> door_cells;
};

int room_of(const Layout& layout, Pos p) {
  for (std::size_t i = 0; i < layout.rooms.size(); ++i) {
    if (layout.rooms[i].contains_interior(p)) return static_cast<int>(i);
  }
  return -1;
}

// Rooms on the tree path from `start` to the near side of edge `e`. A key
// placed there is reachable using only keys of doors closer to the start.
std::vector<int> rooms_before_edge(const Layout& layout, int start, std::size_t e) {
  const std::size_t n = layout.rooms.size();
  std::vector<int> parent(n, -1), depth(n, -1);
  std::vector<int> queue{start};
  depth[static_cast<std::size_t>(start)] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int r = queue[head];
    for (auto [a, b] : layout.edges) {
      const int other = a == r ? b : b == r ? a : -1;
      if (other >= 0 && depth[static_cast<std::size_t>(other)] < 0) {
        depth[static_cast<std::size_t>(other)] = depth[static_cast<std::size_t>(r)] + 1;
        parent[static_cast<std::size_t>(other)] = r;
        queue.push_back(other);
      }
    }
  }
  auto [a, b] = layout.edges[e];
  int r = depth[static_cast<std::size_t>(a)] <= depth[static_cast<std::size_t>(b)] ? a : b;
  std::vector<int> out;
  for (; r >= 0; r = parent[static_cast<std::size_t>(r)]) out.push_back(r);
  std::sort(out.begin(), out.end());
  return out;
}

class SceneBuilder {
 public:
  SceneBuilder(const MissionSpec& mission, const EnvConfig& config, Rng& rng)
      : mission_(mission), config_(config), rng_(rng) {}

  std::optional<Scene> attempt();

 private:
  int next_id() { return next_id_++; }
  void add_role(int id, ObjectRole role) {
    if (static_cast<int>(scene_.roles.size()) <= id) scene_.roles.resize(static_cast<std::size_t>(id) + 1, ObjectRole::fixture);
    scene_.roles[static_cast<std::size_t>(id)] = role;
  }
  bool near_door(Pos p) const;
  std::optional<Pos> random_cell(const std::function<bool(Pos)>& ok);
  Layout build_layout();

  const MissionSpec& mission_;
  const EnvConfig& config_;
  Rng& rng_;
  Scene scene_;
  Layout layout_;
  int next_id_ = 0;
};

bool SceneBuilder::near_door(Pos p) const {
  for (const Pos& d : layout_.door_cells) {
    if (std::abs(d.x - p.x) + std::abs(d.y - p.y) <= 1) return true;
  }
  return false;
}

std::optional<Pos> SceneBuilder::random_cell(const std::function<bool(Pos)>& ok) {
  const GridState& s = scene_.state;
  std::vector<Pos> candidates;
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const Pos p{x, y};
      if (s.at(p) || p == s.agent_pos || room_of(layout_, p) < 0 || near_door(p)) continue;
      if (ok(p)) candidates.push_back(p);
    }
  }
  if (candidates.empty()) return std::nullopt;
  return candidates[rng_.uniform_index(candidates.size())];
}

Layout SceneBuilder::build_layout() {
  Layout layout;
  const int rs = config_.room_size;
  for (int r = 0; r < config_.rooms_rows; ++r) {
    for (int c = 0; c < config_.rooms_cols; ++c) layout.rooms.push_back({c * (rs - 1), r * (rs - 1), rs});
  }
  GridState& s = scene_.state;
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      if (x % (rs - 1) == 0 || y % (rs - 1) == 0) s.at({x, y}) = make_wall(next_id());
    }
  }
  // Random spanning tree over the room grid (randomised DFS).
  const int n = static_cast<int>(layout.rooms.size());
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> stack{static_cast<int>(rng_.uniform_index(static_cast<std::size_t>(n)))};
  seen[static_cast<std::size_t>(stack.back())] = 1;
  while (!stack.empty()) {
    const int r = stack.back();
    const int rr = r / config_.rooms_cols, rc = r % config_.rooms_cols;
    std::vector<int> next;
    const int nbrs[4][2] = {{rr - 1, rc}, {rr + 1, rc}, {rr, rc - 1}, {rr, rc + 1}};
    for (const auto& nb : nbrs) {
      if (nb[0] < 0 || nb[1] < 0 || nb[0] >= config_.rooms_rows || nb[1] >= config_.rooms_cols) continue;
      const int o = nb[0] * config_.rooms_cols + nb[1];
      if (!seen[static_cast<std::size_t>(o)]) next.push_back(o);
    }
    if (next.empty()) {
      stack.pop_back();
      continue;
    }
    const int o = next[rng_.uniform_index(next.size())];
    seen[static_cast<std::size_t>(o)] = 1;
    layout.edges.emplace_back(std::min(r, o), std::max(r, o));
    stack.push_back(o);
  }
  for (auto [a, b] : layout.edges) {
    const RoomRect& ra = layout.rooms[static_cast<std::size_t>(a)];
    const RoomRect& rb = layout.rooms[static_cast<std::size_t>(b)];
    Pos door;
    const int offset = 1 + static_cast<int>(rng_.uniform_index(static_cast<std::size_t>(rs - 2)));
    if (ra.y0 == rb.y0) {
      door = {rb.x0, ra.y0 + offset};
    } else {
      door = {ra.x0 + offset, rb.y0};
    }
    layout.door_cells.push_back(door);
  }
  return layout;
}

std::optional<Scene> SceneBuilder::attempt() {
  scene_ = Scene{};
  next_id_ = 0;
  scene_.mission = mission_;
  scene_.state = GridState(config_.grid_width(), config_.grid_height());
  GridState& s = scene_.state;
  layout_ = build_layout();

  // Door colors. Keys of a locked door must never share a goal key color.
  std::vector<Color> door_palette;
  for (Color c : kAllColors) {
    bool goal_key = false;
    for (const Clause& cl : mission_.clauses) {
      if (cl.target.kind == ObjectKind::key && cl.target.color == c) goal_key = true;
      if (cl.anchor && cl.anchor->kind == ObjectKind::key && cl.anchor->color == c) goal_key = true;
    }
    if (!goal_key) door_palette.push_back(c);
  }
  for (std::size_t i = door_palette.size(); i > 1; --i) std::swap(door_palette[i - 1], door_palette[rng_.uniform_index(i)]);
  std::vector<int> door_ids;
  for (std::size_t i = 0; i < layout_.door_cells.size(); ++i) {
    const Pos p = layout_.door_cells[i];
    if (config_.door_policy == DoorPolicy::none) {
      s.at(p).reset();
      door_ids.push_back(-1);
      continue;
    }
    const DoorState ds = config_.door_policy == DoorPolicy::open     ? DoorState::open
                         : config_.door_policy == DoorPolicy::closed ? DoorState::closed
                                                                     : DoorState::locked;
    const Color c = door_palette[i % door_palette.size()];
    const int id = next_id();
    s.at(p) = make_door(c, ds, id);
    door_ids.push_back(id);
  }
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const auto& cell = s.at({x, y});
      if (cell) add_role(cell->id, ObjectRole::fixture);
    }
  }

  // Agent pose.
  scene_.start_room = static_cast<int>(rng_.uniform_index(layout_.rooms.size()));
  {
    std::vector<Pos> cells;
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        const Pos p{x, y};
        if (!s.at(p) && room_of(layout_, p) == scene_.start_room) cells.push_back(p);
      }
    }
    s.agent_pos = cells[rng_.uniform_index(cells.size())];
    s.agent_dir = static_cast<Direction>(rng_.uniform_index(4));
  }

  // Goal objects, one per distinct descriptor.
  struct Placed {
    GoalDescriptor desc;
    int id;
  };
  std::vector<Placed> placed;
  auto place_goal = [&](const GoalDescriptor& d) -> std::optional<int> {
    for (const Placed& p : placed) {
      if (p.desc.color == d.color && p.desc.kind == d.kind) return p.id;
    }
    auto cell = random_cell([&](Pos p) {
      if (config_.multi_room() && room_of(layout_, p) == scene_.start_room) return false;
      if (d.location) return relative_location(s.agent_pos, s.agent_dir, p) == d.location;
      return true;
    });
    if (!cell) return std::nullopt;
    const int id = next_id();
    s.at(*cell) = make_object(d.kind, d.color, id);
    add_role(id, ObjectRole::goal);
    placed.push_back({d, id});
    return id;
  };
  std::vector<int> target_ids, anchor_ids;
  for (const Clause& cl : mission_.clauses) {
    auto t = place_goal(cl.target);
    if (!t) return std::nullopt;
    target_ids.push_back(*t);
    int a = -1;
    if (cl.anchor) {
      auto ai = place_goal(*cl.anchor);
      if (!ai) return std::nullopt;
      a = *ai;
    }
    anchor_ids.push_back(a);
  }

  // Distractors. Located descriptors first get a same-looking twin elsewhere.
  int remaining = config_.num_distractors;
  for (const Placed& p : placed) {
    if (!p.desc.location || remaining == 0) continue;
    auto cell = random_cell([&](Pos q) {
      auto loc = relative_location(s.agent_pos, s.agent_dir, q);
      return loc && loc != p.desc.location;
    });
    if (!cell) return std::nullopt;
    const int id = next_id();
    s.at(*cell) = make_object(p.desc.kind, p.desc.color, id);
    add_role(id, ObjectRole::distractor);
    --remaining;
  }
  std::vector<std::pair<Color, ObjectKind>> combos;
  for (Color c : config_.distractor_colors) {
    for (ObjectKind k : config_.distractor_kinds) {
      bool clash = false;
      for (const Placed& p : placed) clash |= p.desc.color == c && p.desc.kind == k;
      if (!clash) combos.emplace_back(c, k);
    }
  }
  if (remaining > 0 && combos.empty()) {
    throw Error(ErrorKind::EmptyValueSet, "every distractor combination collides with a goal descriptor");
  }
  for (; remaining > 0; --remaining) {
    const auto [c, k] = combos[rng_.uniform_index(combos.size())];
    auto cell = random_cell([](Pos) { return true; });
    if (!cell) return std::nullopt;
    const int id = next_id();
    s.at(*cell) = make_object(k, c, id);
    add_role(id, ObjectRole::distractor);
  }

  // Keys for locked doors, reachable without crossing their own door.
  if (config_.door_policy == DoorPolicy::locked) {
    for (std::size_t e = 0; e < layout_.edges.size(); ++e) {
      const auto side = rooms_before_edge(layout_, scene_.start_room, e);
      const int room = side[rng_.uniform_index(side.size())];
      auto cell = random_cell([&](Pos p) { return room_of(layout_, p) == room; });
      if (!cell) return std::nullopt;
      const int id = next_id();
      s.at(*cell) = make_object(ObjectKind::key, s.at(layout_.door_cells[e])->color, id);
      add_role(id, ObjectRole::support);
    }
  }

  // Resolve subgoal referents.
  for (Subgoal& sg : scene_.mission.subgoals) {
    sg.object_id = target_ids[static_cast<std::size_t>(sg.clause)];
    if (sg.type == SubgoalType::place_next) sg.anchor_id = anchor_ids[static_cast<std::size_t>(sg.clause)];
  }
  if (static_cast<int>(scene_.roles.size()) < next_id_) scene_.roles.resize(static_cast<std::size_t>(next_id_), ObjectRole::fixture);

  s.step_count = 0;
  s.step_budget = config_.step_budget.base + config_.step_budget.per_subgoal * mission_.num_subgoals();

  // No subgoal may hold before the first action.
  SubgoalProgress probe(scene_.mission.num_subgoals());
  if (!update_progress(probe, scene_.mission, s, 0).empty()) return std::nullopt;

  // Solvability by the planner, verified by replay.
  try {
    const Plan plan = plan_bfs(scene_);
    if (!replay_succeeds(s, scene_.mission, plan.actions)) return std::nullopt;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NotReachable) return std::nullopt;
    throw;
  }
  return scene_;
}

}  // namespace

Scene build_scene(const MissionSpec& mission, const EnvConfig& config, Rng& rng) {
  config.validate();
  SceneBuilder builder(mission, config, rng);
  for (int attempt = 0; attempt < kSceneRetries; ++attempt) {
    if (auto scene = builder.attempt()) return *scene;
  }
  throw Error(ErrorKind::SceneInfeasible, "no feasible scene for '" + mission.instruction_text + "'");
}

Scene generate_scene(const EnvConfig& config, std::uint64_t episode_seed) {
  Rng rng(derive_seed(config.seed, episode_seed, 0x5ce7e));
  const MissionSpec mission = sample_mission(config, rng);
  Scene scene = build_scene(mission, config, rng);
  scene.state.rng_seed = episode_seed;
  return scene;
}

// ---------------------------------------------------------------------------

bool subgoal_satisfied(const GridState& state, const Subgoal& subgoal) {
  switch (subgoal.type) {
    case SubgoalType::reach: {
      const Pos f = state.front_pos();
      return state.in_bounds(f) && state.at(f) && state.at(f)->id == subgoal.object_id;
    }
    case SubgoalType::hold: return state.is_carrying(subgoal.object_id);
    case SubgoalType::place_next: {
      const auto a = state.find_object(subgoal.object_id);
      const auto b = state.find_object(subgoal.anchor_id);
      return a && b && std::abs(a->x - b->x) + std::abs(a->y - b->y) == 1;
    }
  }
  return false;
}

int SubgoalProgress::done_count() const {
  return static_cast<int>(std::count_if(completed_at.begin(), completed_at.end(), [](int s) { return s >= 0; }));
}

bool SubgoalProgress::available(const MissionSpec& mission, int i) const {
  for (int p : mission.subgoals[static_cast<std::size_t>(i)].prerequisites) {
    if (!done(p)) return false;
  }
  return true;
}

std::vector<int> update_progress(SubgoalProgress& progress, const MissionSpec& mission, const GridState& state,
                                 int step_index) {
  std::vector<int> fresh;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int i = 0; i < mission.num_subgoals(); ++i) {
      if (progress.done(i) || !progress.available(mission, i)) continue;
      if (subgoal_satisfied(state, mission.subgoals[static_cast<std::size_t>(i)])) {
        progress.completed_at[static_cast<std::size_t>(i)] = step_index;
        fresh.push_back(i);
        changed = true;
      }
    }
  }
  return fresh;
}

}  // namespace gridlearn
