#pragma once

// BFS planning for optimal demonstrations and probabilistic corruption for
// suboptimal ones.

#include <functional>
#include <optional>
#include <vector>

#include "gridlearn/grid.hpp"
#include "gridlearn/mission.hpp"

namespace gridlearn {

struct Pose {
  Pos pos;
  Direction dir = Direction::north;

  friend bool operator==(const Pose&, const Pose&) = default;
};

using PosePredicate = std::function<bool(const GridState&, const Pose&)>;

struct NavOptions {
  bool through_closed_doors = false;   // toggle + forward, cost 2
  bool through_locked_doors = false;   // only with a matching key unless `ignore_keys`
  bool ignore_keys = false;            // treat every locked door as openable
  int object_cost = -1;                // >= 0: carryable objects become passable at this extra cost
};

struct PosePath {
  std::vector<Pose> poses;       // includes the start pose
  std::vector<Action> actions;   // left / right / forward, plus toggles when doors are crossed
};

/// Minimum-step pose path from the agent pose to the first pose satisfying
/// `goal`. Plain BFS over (cell, direction) with traversable-cell adjacency
/// and tie-breaking left < right < forward; `options` switches to a
/// Dijkstra over extra door/object costs. Throws NotReachable.
PosePath shortest_path(const GridState& state, const PosePredicate& goal, const NavOptions& options = {});

/// Convenience predicate: the front cell of the pose holds the object `id`.
PosePredicate facing_object(int id);

struct Plan {
  std::vector<Action> actions;
  int expected_length = 0;
};

struct PlannerOptions {
  /// Exact full-state BFS is attempted per subgoal up to this many expanded
  /// states before falling back to maneuver chaining.
  int exact_node_limit = 60000;
  /// Grids with more cells skip the exact search.
  int exact_max_cells = 100;
};

/// Plans all pending subgoals of `mission` from `state`. Throws NotReachable.
Plan plan_bfs(const GridState& state, const MissionSpec& mission, const SubgoalProgress& progress,
              const PlannerOptions& options = {});
Plan plan_bfs(const Scene& scene, const PlannerOptions& options = {});

/// Replays `actions` and reports whether every subgoal completed within budget.
bool replay_succeeds(const GridState& start, const MissionSpec& mission, const std::vector<Action>& actions);

/// Exact uniform-cost search over full world states for one subgoal
/// (nullopt if `node_limit` expansions are exceeded). Throws NotReachable if
/// the reachable state space is exhausted.
std::optional<std::vector<Action>> exact_subgoal_search(const GridState& state, const MissionSpec& mission,
                                                        const SubgoalProgress& progress, int subgoal,
                                                        int node_limit);

}  // namespace gridlearn
