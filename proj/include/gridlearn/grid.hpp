#pragma once

// Deterministic gridworld core: object vocabulary, world state, the six-action
// transition function, egocentric partial views and pixel rendering.
//
// Conventions (also recorded in every dataset header):
//   * x grows to the right, y grows downwards; cells are stored row-major.
//   * Direction: north = 0, east = 1, south = 2, west = 3; `right` adds one.
//   * Egocentric view: V x V, row 0 is farthest from the agent, the agent sits
//     at (V / 2, V - 1) facing up (towards row 0).

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gridlearn {

enum class ObjectKind : std::uint8_t { key, ball, box, door, wall };
enum class Color : std::uint8_t { red, green, blue, purple, yellow, grey };
enum class DoorState : std::uint8_t { open, closed, locked };
enum class Direction : std::uint8_t { north, east, south, west };
enum class Action : std::uint8_t { left, right, forward, pickup, drop, toggle };

inline constexpr int kNumActions = 6;
inline constexpr int kNumColors = 6;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::left, Action::right, Action::forward, Action::pickup, Action::drop, Action::toggle};
inline constexpr std::array<Color, kNumColors> kAllColors = {
    Color::red, Color::green, Color::blue, Color::purple, Color::yellow, Color::grey};

std::string_view to_string(ObjectKind kind);
std::string_view to_string(Color color);
std::string_view to_string(DoorState state);
std::string_view to_string(Direction dir);
std::string_view to_string(Action action);

std::optional<ObjectKind> parse_object_kind(std::string_view text);
std::optional<Color> parse_color(std::string_view text);
std::optional<Action> parse_action(std::string_view text);

struct Pos {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pos&, const Pos&) = default;
  Pos operator+(const Pos& o) const { return {x + o.x, y + o.y}; }
  Pos operator-(const Pos& o) const { return {x - o.x, y - o.y}; }
};

Pos direction_vector(Direction dir);
Direction turn_left(Direction dir);
Direction turn_right(Direction dir);

struct WorldObject {
  ObjectKind kind = ObjectKind::ball;
  Color color = Color::red;
  std::optional<DoorState> door_state;  // set iff kind == door
  int id = -1;

  bool carryable() const {
    return kind == ObjectKind::key || kind == ObjectKind::ball || kind == ObjectKind::box;
  }
  bool is_door() const { return kind == ObjectKind::door; }
  /// Walls and closed or locked doors block both movement and sight.
  bool opaque() const {
    return kind == ObjectKind::wall || (is_door() && door_state != DoorState::open);
  }
  std::string describe() const;  // "red ball"

  friend bool operator==(const WorldObject&, const WorldObject&) = default;
};

WorldObject make_wall(int id);
WorldObject make_door(Color color, DoorState state, int id);
WorldObject make_object(ObjectKind kind, Color color, int id);

struct GridState {
  int width = 0;
  int height = 0;
  std::vector<std::optional<WorldObject>> cells;
  Pos agent_pos;
  Direction agent_dir = Direction::north;
  std::optional<WorldObject> carrying;
  int step_count = 0;
  int step_budget = 1;
  std::uint64_t rng_seed = 0;

  GridState() = default;
  GridState(int w, int h);

  bool in_bounds(Pos p) const { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; }
  const std::optional<WorldObject>& at(Pos p) const { return cells[index(p)]; }
  std::optional<WorldObject>& at(Pos p) { return cells[index(p)]; }
  std::size_t index(Pos p) const { return static_cast<std::size_t>(p.y * width + p.x); }
  Pos front_pos() const { return agent_pos + direction_vector(agent_dir); }
  /// Cell the agent may stand on: empty floor or an open door.
  bool traversable(Pos p) const;

  /// Location of the object with the given id; nullopt when it is carried or absent.
  std::optional<Pos> find_object(int id) const;
  bool is_carrying(int id) const { return carrying && carrying->id == id; }

  /// Grid content, pose and carried object; step counter excluded.
  bool same_content(const GridState& other) const;
  friend bool operator==(const GridState&, const GridState&) = default;
};

struct StepEvent {
  enum class Type : std::uint8_t { moved, turned, picked_up, dropped, door_opened, door_closed, blocked };
  Type type = Type::blocked;
  int object_id = -1;

  friend bool operator==(const StepEvent&, const StepEvent&) = default;
};

struct StepOutcome {
  GridState next_state;
  bool had_effect = false;
  std::vector<StepEvent> events;
};

/// Applies one action with MiniGrid/BabyAI semantics. Invalid attempts never
/// fail; they report had_effect = false and a `blocked` event.
StepOutcome apply_action(const GridState& state, Action action);

// ---------------------------------------------------------------------------
// Observations

enum class CellType : std::uint8_t { unseen, empty, wall, door, key, ball, box };

struct ViewCell {
  CellType type = CellType::unseen;
  Color color = Color::red;
  DoorState door_state = DoorState::open;

  friend bool operator==(const ViewCell&, const ViewCell&) = default;
};

struct SymbolicView {
  int size = 0;
  std::vector<ViewCell> cells;  // row-major, size * size

  const ViewCell& at(int col, int row) const { return cells[static_cast<std::size_t>(row * size + col)]; }
  ViewCell& at(int col, int row) { return cells[static_cast<std::size_t>(row * size + col)]; }
  int agent_col() const { return size / 2; }
  int agent_row() const { return size - 1; }

  friend bool operator==(const SymbolicView&, const SymbolicView&) = default;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // height * width * 3, row-major

  std::array<std::uint8_t, 3> pixel(int x, int y) const;
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

struct Observation {
  SymbolicView view;
  RgbImage rgb;
};

inline constexpr int kDefaultViewSize = 7;
inline constexpr int kDefaultTilePx = 8;

/// Partial egocentric symbolic view with MiniGrid visibility propagation.
SymbolicView symbolic_view(const GridState& state, int view_size = kDefaultViewSize);

/// Symbolic view plus its rendering at `tile_px`.
Observation egocentric_view(const GridState& state, int view_size = kDefaultViewSize,
                            int tile_px = kDefaultTilePx);

// Palette (RGB).
inline constexpr std::array<std::uint8_t, 3> kBackgroundRgb = {48, 48, 48};
inline constexpr std::array<std::uint8_t, 3> kOccludedRgb = {0, 0, 0};
inline constexpr std::array<std::uint8_t, 3> kWallRgb = {170, 170, 170};
inline constexpr std::array<std::uint8_t, 3> kAgentRgb = {255, 255, 255};
std::array<std::uint8_t, 3> color_rgb(Color color);

RgbImage render_view(const SymbolicView& view, int tile_px = kDefaultTilePx);
RgbImage render_rgb(const Observation& obs, int tile_px = kDefaultTilePx);

/// Full top-down ASCII dump of a state (used by the inspector).
std::string ascii_grid(const GridState& state);

}  // namespace gridlearn
