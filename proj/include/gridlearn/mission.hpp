#pragma once

// Procedural mission generation: a mission is sampled first and the scene is
// then constructed around it so that every generated instance requires the
// configured skill set.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridlearn/grid.hpp"
#include "gridlearn/util.hpp"

namespace gridlearn {

enum class TaskType : std::uint8_t { go_to, pickup, put_next, sequence };
enum class Connector : std::uint8_t { and_, then, after };
enum class DoorPolicy : std::uint8_t { none, open, closed, locked };
enum class LocationDesc : std::uint8_t { left, right, front, behind };

std::string_view to_string(TaskType t);
std::string_view to_string(Connector c);
std::string_view to_string(DoorPolicy p);
std::string_view to_string(LocationDesc l);
std::optional<TaskType> parse_task_type(std::string_view s);
std::optional<Connector> parse_connector(std::string_view s);
std::optional<DoorPolicy> parse_door_policy(std::string_view s);

struct StepBudgetRule {
  int base = 64;
  int per_subgoal = 64;

  friend bool operator==(const StepBudgetRule&, const StepBudgetRule&) = default;
};

struct EnvConfig {
  int room_size = 8;
  int rooms_rows = 1;
  int rooms_cols = 1;
  DoorPolicy door_policy = DoorPolicy::none;
  int num_distractors = 3;
  std::vector<Color> goal_colors{kAllColors.begin(), kAllColors.end()};
  std::vector<ObjectKind> goal_kinds{ObjectKind::key, ObjectKind::ball, ObjectKind::box};
  std::vector<Color> distractor_colors{kAllColors.begin(), kAllColors.end()};
  std::vector<ObjectKind> distractor_kinds{ObjectKind::key, ObjectKind::ball, ObjectKind::box};
  std::vector<TaskType> allowed_task_types{TaskType::pickup};
  std::vector<Connector> allowed_connectors{Connector::and_, Connector::then, Connector::after};
  bool location_language = false;
  StepBudgetRule step_budget;
  std::uint64_t seed = 0;
  int view_size = kDefaultViewSize;

  int grid_width() const { return (room_size - 1) * rooms_cols + 1; }
  int grid_height() const { return (room_size - 1) * rooms_rows + 1; }
  bool multi_room() const { return rooms_rows * rooms_cols > 1; }

  /// Throws ConfigError / EmptyValueSet when the config cannot produce missions.
  void validate() const;

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

struct GoalDescriptor {
  Color color = Color::red;
  ObjectKind kind = ObjectKind::ball;
  std::optional<LocationDesc> location;

  std::string phrase() const;  // "the red ball on your left"
  friend bool operator==(const GoalDescriptor&, const GoalDescriptor&) = default;
};

/// One instruction clause. `anchor` is set for put-next clauses only.
struct Clause {
  TaskType type = TaskType::pickup;
  GoalDescriptor target;
  std::optional<GoalDescriptor> anchor;

  friend bool operator==(const Clause&, const Clause&) = default;
};

enum class SubgoalType : std::uint8_t { reach, hold, place_next };

struct Subgoal {
  SubgoalType type = SubgoalType::hold;
  int clause = 0;
  std::vector<int> prerequisites;  // subgoal indices that must complete first
  int object_id = -1;              // resolved by build_scene
  int anchor_id = -1;              // place_next only

  friend bool operator==(const Subgoal&, const Subgoal&) = default;
};

struct MissionSpec {
  TaskType task_type = TaskType::pickup;
  std::vector<Clause> clauses;
  std::optional<Connector> connector;
  std::vector<Subgoal> subgoals;
  std::string instruction_text;

  int num_subgoals() const { return static_cast<int>(subgoals.size()); }
  friend bool operator==(const MissionSpec&, const MissionSpec&) = default;
};

/// Instruction templates; bumped whenever any template string changes.
inline constexpr int kInstructionTemplateVersion = 1;

std::string clause_text(const Clause& clause);

MissionSpec sample_mission(const EnvConfig& config, Rng& rng);

enum class ObjectRole : std::uint8_t { goal, distractor, support, fixture };

struct Scene {
  GridState state;
  MissionSpec mission;                 // subgoal object ids resolved
  std::vector<ObjectRole> roles;       // indexed by object id
  int start_room = 0;

  ObjectRole role(int id) const {
    return id >= 0 && id < static_cast<int>(roles.size()) ? roles[id] : ObjectRole::fixture;
  }
};

inline constexpr int kSceneRetries = 100;

/// Lays out rooms, doors, goal objects, distractors and keys. Retries up to
/// kSceneRetries times before throwing SceneInfeasible.
Scene build_scene(const MissionSpec& mission, const EnvConfig& config, Rng& rng);

/// Samples a mission and builds its scene from a single episode seed.
Scene generate_scene(const EnvConfig& config, std::uint64_t episode_seed);

// ---------------------------------------------------------------------------
// Subgoal progress

bool subgoal_satisfied(const GridState& state, const Subgoal& subgoal);

struct SubgoalProgress {
  std::vector<int> completed_at;  // step index (1-based) or -1 while pending

  explicit SubgoalProgress(int n = 0) : completed_at(static_cast<std::size_t>(n), -1) {}
  int done_count() const;
  bool all_done() const { return done_count() == static_cast<int>(completed_at.size()); }
  bool done(int i) const { return completed_at[static_cast<std::size_t>(i)] >= 0; }
  bool available(const MissionSpec& mission, int i) const;

  friend bool operator==(const SubgoalProgress&, const SubgoalProgress&) = default;
};

/// Marks every available subgoal whose predicate holds in `state`, repeating
/// until no more complete. Returns the newly completed indices in order.
std::vector<int> update_progress(SubgoalProgress& progress, const MissionSpec& mission,
                                 const GridState& state, int step_index);

/// Location region of `target` relative to the agent pose, if unambiguous.
std::optional<LocationDesc> relative_location(Pos agent, Direction dir, Pos target);

}  // namespace gridlearn
