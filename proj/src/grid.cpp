#include "gridlearn/grid.hpp"

#include <algorithm>
#include <sstream>

#include "gridlearn/util.hpp"

namespace gridlearn {

std::string_view to_string(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::key: return "key";
    case ObjectKind::ball: return "ball";
    case ObjectKind::box: return "box";
    case ObjectKind::door: return "door";
    case ObjectKind::wall: return "wall";
  }
  return "?";
}

std::string_view to_string(Color color) {
  switch (color) {
    case Color::red: return "red";
    case Color::green: return "green";
    case Color::blue: return "blue";
    case Color::purple: return "purple";
    case Color::yellow: return "yellow";
    case Color::grey: return "grey";
  }
  return "?";
}

std::string_view to_string(DoorState state) {
  switch (state) {
    case DoorState::open: return "open";
    case DoorState::closed: return "closed";
    case DoorState::locked: return "locked";
  }
  return "?";
}

std::string_view to_string(Direction dir) {
  switch (dir) {
    case Direction::north: return "north";
    case Direction::east: return "east";
    case Direction::south: return "south";
    case Direction::west: return "west";
  }
  return "?";
}

std::string_view to_string(Action action) {
  switch (action) {
    case Action::left: return "left";
    case Action::right: return "right";
    case Action::forward: return "forward";
    case Action::pickup: return "pickup";
    case Action::drop: return "drop";
    case Action::toggle: return "toggle";
  }
  return "?";
}

std::optional<ObjectKind> parse_object_kind(std::string_view text) {
  for (auto k : {ObjectKind::key, ObjectKind::ball, ObjectKind::box, ObjectKind::door, ObjectKind::wall}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::optional<Color> parse_color(std::string_view text) {
  for (auto c : kAllColors) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

std::optional<Action> parse_action(std::string_view text) {
  for (auto a : kAllActions) {
    if (to_string(a) == text) return a;
  }
  return std::nullopt;
}

Pos direction_vector(Direction dir) {
  switch (dir) {
    case Direction::north: return {0, -1};
    case Direction::east: return {1, 0};
    case Direction::south: return {0, 1};
    case Direction::west: return {-1, 0};
  }
  return {0, 0};
}

Direction turn_left(Direction dir) {
  return static_cast<Direction>((static_cast<int>(dir) + 3) % 4);
}

Direction turn_right(Direction dir) {
  return static_cast<Direction>((static_cast<int>(dir) + 1) % 4);
}

std::string WorldObject::describe() const {
  std::string out(to_string(color));
  out += ' ';
  out += to_string(kind);
  return out;
}

WorldObject make_wall(int id) { return WorldObject{ObjectKind::wall, Color::grey, std::nullopt, id}; }

WorldObject make_door(Color color, DoorState state, int id) {
  return WorldObject{ObjectKind::door, color, state, id};
}

WorldObject make_object(ObjectKind kind, Color color, int id) {
  return WorldObject{kind, color, std::nullopt, id};
}

GridState::GridState(int w, int h) : width(w), height(h), cells(static_cast<std::size_t>(w * h)) {}

bool GridState::traversable(Pos p) const {
  if (!in_bounds(p)) return false;
  const auto& cell = at(p);
  return !cell || (cell->is_door() && cell->door_state == DoorState::open);
}

std::optional<Pos> GridState::find_object(int id) const {
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto& cell = cells[static_cast<std::size_t>(y * width + x)];
      if (cell && cell->id == id) return Pos{x, y};
    }
  }
  return std::nullopt;
}

bool GridState::same_content(const GridState& other) const {
  return width == other.width && height == other.height && cells == other.cells &&
         agent_pos == other.agent_pos && agent_dir == other.agent_dir && carrying == other.carrying;
}

StepOutcome apply_action(const GridState& state, Action action) {
  if (state.step_count >= state.step_budget) {
    throw Error(ErrorKind::DomainError, "apply_action called with exhausted step budget");
  }
  StepOutcome out{state, false, {}};
  GridState& next = out.next_state;
  next.step_count += 1;

  auto blocked = [&] { out.events.push_back({StepEvent::Type::blocked, -1}); };
  const Pos front = state.front_pos();
  const bool front_ok = state.in_bounds(front);

  switch (action) {
    case Action::left:
      next.agent_dir = turn_left(state.agent_dir);
      out.events.push_back({StepEvent::Type::turned, -1});
      out.had_effect = true;
      break;
    case Action::right:
      next.agent_dir = turn_right(state.agent_dir);
      out.events.push_back({StepEvent::Type::turned, -1});
      out.had_effect = true;
      break;
    case Action::forward:
      if (state.traversable(front)) {
        next.agent_pos = front;
        out.events.push_back({StepEvent::Type::moved, -1});
        out.had_effect = true;
      } else {
        blocked();
      }
      break;
    case Action::pickup:
      if (!state.carrying && front_ok && state.at(front) && state.at(front)->carryable()) {
        next.carrying = state.at(front);
        next.at(front).reset();
        out.events.push_back({StepEvent::Type::picked_up, next.carrying->id});
        out.had_effect = true;
      } else {
        blocked();
      }
      break;
    case Action::drop:
      if (state.carrying && front_ok && !state.at(front)) {
        next.at(front) = state.carrying;
        next.carrying.reset();
        out.events.push_back({StepEvent::Type::dropped, state.carrying->id});
        out.had_effect = true;
      } else {
        blocked();
      }
      break;
    case Action::toggle: {
      if (!front_ok || !state.at(front) || !state.at(front)->is_door()) {
        blocked();
        break;
      }
      auto& door = *next.at(front);
      switch (*door.door_state) {
        case DoorState::open:
          door.door_state = DoorState::closed;
          out.events.push_back({StepEvent::Type::door_closed, door.id});
          out.had_effect = true;
          break;
        case DoorState::closed:
          door.door_state = DoorState::open;
          out.events.push_back({StepEvent::Type::door_opened, door.id});
          out.had_effect = true;
          break;
        case DoorState::locked:
          if (state.carrying && state.carrying->kind == ObjectKind::key &&
              state.carrying->color == door.color) {
            door.door_state = DoorState::open;
            out.events.push_back({StepEvent::Type::door_opened, door.id});
            out.had_effect = true;
          } else {
            blocked();
          }
          break;
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::array<std::uint8_t, 3> RgbImage::pixel(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {data[i], data[i + 1], data[i + 2]};
}

namespace {

ViewCell view_cell_of(const std::optional<WorldObject>& obj) {
  if (!obj) return ViewCell{CellType::empty, Color::red, DoorState::open};
  ViewCell cell;
  cell.color = obj->color;
  switch (obj->kind) {
    case ObjectKind::wall: cell.type = CellType::wall; break;
    case ObjectKind::door:
      cell.type = CellType::door;
      cell.door_state = *obj->door_state;
      break;
    case ObjectKind::key: cell.type = CellType::key; break;
    case ObjectKind::ball: cell.type = CellType::ball; break;
    case ObjectKind::box: cell.type = CellType::box; break;
  }
  return cell;
}

bool view_cell_opaque(const ViewCell& c) {
  return c.type == CellType::wall || c.type == CellType::unseen ||
         (c.type == CellType::door && c.door_state != DoorState::open);
}

}  // namespace

SymbolicView symbolic_view(const GridState& state, int view_size) {
  if (view_size < 3 || view_size % 2 == 0) {
    throw Error(ErrorKind::DomainError, "view_size must be odd and >= 3");
  }
  SymbolicView view;
  view.size = view_size;
  view.cells.resize(static_cast<std::size_t>(view_size * view_size));
  const Pos fwd = direction_vector(state.agent_dir);
  const Pos rgt = direction_vector(turn_right(state.agent_dir));
  const int ac = view.agent_col();
  const int ar = view.agent_row();

  for (int row = 0; row < view_size; ++row) {
    for (int col = 0; col < view_size; ++col) {
      const int f = ar - row;
      const int l = col - ac;
      const Pos world{state.agent_pos.x + fwd.x * f + rgt.x * l, state.agent_pos.y + fwd.y * f + rgt.y * l};
      if (!state.in_bounds(world)) {
        view.at(col, row) = ViewCell{CellType::unseen, Color::red, DoorState::open};
      } else if (row == ar && col == ac) {
        view.at(col, row) = view_cell_of(state.carrying);
      } else {
        view.at(col, row) = view_cell_of(state.at(world));
      }
    }
  }

  // Backward visibility propagation from the agent cell (MiniGrid process_vis).
  std::vector<char> mask(view.cells.size(), 0);
  auto m = [&](int col, int row) -> char& { return mask[static_cast<std::size_t>(row * view_size + col)]; };
  m(ac, ar) = 1;
  for (int row = view_size - 1; row >= 0; --row) {
    for (int col = 0; col < view_size - 1; ++col) {
      if (!m(col, row)) continue;
      if (!(col == ac && row == ar) && view_cell_opaque(view.at(col, row))) continue;
      m(col + 1, row) = 1;
      if (row > 0) {
        m(col + 1, row - 1) = 1;
        m(col, row - 1) = 1;
      }
    }
    for (int col = view_size - 1; col > 0; --col) {
      if (!m(col, row)) continue;
      if (!(col == ac && row == ar) && view_cell_opaque(view.at(col, row))) continue;
      m(col - 1, row) = 1;
      if (row > 0) {
        m(col - 1, row - 1) = 1;
        m(col, row - 1) = 1;
      }
    }
  }
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) view.cells[i] = ViewCell{CellType::unseen, Color::red, DoorState::open};
  }
  return view;
}

Observation egocentric_view(const GridState& state, int view_size, int tile_px) {
  Observation obs;
  obs.view = symbolic_view(state, view_size);
  obs.rgb = render_view(obs.view, tile_px);
  return obs;
}

std::array<std::uint8_t, 3> color_rgb(Color color) {
  switch (color) {
    case Color::red: return {255, 0, 0};
    case Color::green: return {0, 255, 0};
    case Color::blue: return {0, 0, 255};
    case Color::purple: return {112, 39, 195};
    case Color::yellow: return {255, 255, 0};
    case Color::grey: return {100, 100, 100};
  }
  return {0, 0, 0};
}

namespace {

using Rgb = std::array<std::uint8_t, 3>;
constexpr Rgb kDark = {16, 16, 16};

bool in_rect(double u, double v, double x0, double y0, double x1, double y1) {
  return u >= x0 && u <= x1 && v >= y0 && v <= y1;
}

bool in_circle(double u, double v, double cx, double cy, double r) {
  return (u - cx) * (u - cx) + (v - cy) * (v - cy) <= r * r;
}

// Point-in-triangle for the upward agent marker.
bool in_agent_triangle(double u, double v) {
  // Small enough that box and door marks stay visible under the agent at 4 px.
  const double ax = 0.5, ay = 0.2, bx = 0.2, by = 0.8, cx = 0.8, cy = 0.8;
  auto sign = [](double px, double py, double x1, double y1, double x2, double y2) {
    return (px - x2) * (y1 - y2) - (x1 - x2) * (py - y2);
  };
  const double d1 = sign(u, v, ax, ay, bx, by);
  const double d2 = sign(u, v, bx, by, cx, cy);
  const double d3 = sign(u, v, cx, cy, ax, ay);
  const bool neg = d1 < 0 || d2 < 0 || d3 < 0;
  const bool pos = d1 > 0 || d2 > 0 || d3 > 0;
  return !(neg && pos);
}

// Color of the cell content at tile-relative coordinates (u, v) in [0, 1).
Rgb shade(const ViewCell& cell, double u, double v) {
  const Rgb col = color_rgb(cell.color);
  switch (cell.type) {
    case CellType::unseen: return kOccludedRgb;
    case CellType::empty: return kBackgroundRgb;
    case CellType::wall: return kWallRgb;
    case CellType::ball: return in_circle(u, v, 0.5, 0.5, 0.45) ? col : kBackgroundRgb;
    case CellType::box:
      if (in_rect(u, v, 0.3, 0.3, 0.7, 0.7)) return kDark;
      return in_rect(u, v, 0.1, 0.1, 0.9, 0.9) ? col : kBackgroundRgb;
    case CellType::key:
      if (in_circle(u, v, 0.5, 0.3, 0.22)) return in_circle(u, v, 0.5, 0.3, 0.09) ? kBackgroundRgb : col;
      if (in_rect(u, v, 0.42, 0.3, 0.58, 0.9)) return col;
      if (in_rect(u, v, 0.58, 0.68, 0.76, 0.8)) return col;
      return kBackgroundRgb;
    case CellType::door:
      switch (cell.door_state) {
        case DoorState::open:
          return in_rect(u, v, 0.15, 0.15, 0.85, 0.85) ? kBackgroundRgb : col;
        // Marks span at least one pixel centre for tile_px >= 4.
        case DoorState::closed:
          return in_rect(u, v, 0.6, 0.35, 0.9, 0.65) ? kDark : col;
        case DoorState::locked:
          return in_rect(u, v, 0.2, 0.35, 0.6, 0.65) ? kDark : col;
      }
  }
  return kBackgroundRgb;
}

}  // namespace

RgbImage render_view(const SymbolicView& view, int tile_px) {
  if (tile_px < 1) throw Error(ErrorKind::DomainError, "tile_px must be >= 1");
  RgbImage img;
  img.width = view.size * tile_px;
  img.height = view.size * tile_px;
  img.data.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int row = 0; row < view.size; ++row) {
    for (int col = 0; col < view.size; ++col) {
      const ViewCell& cell = view.at(col, row);
      const bool agent = row == view.agent_row() && col == view.agent_col();
      for (int py = 0; py < tile_px; ++py) {
        for (int px = 0; px < tile_px; ++px) {
          const double u = (px + 0.5) / tile_px;
          const double v = (py + 0.5) / tile_px;
          Rgb c = shade(cell, u, v);
          if (agent && in_agent_triangle(u, v)) c = kAgentRgb;
          const std::size_t i =
              (static_cast<std::size_t>(row * tile_px + py) * img.width + col * tile_px + px) * 3;
          img.data[i] = c[0];
          img.data[i + 1] = c[1];
          img.data[i + 2] = c[2];
        }
      }
    }
  }
  return img;
}

RgbImage render_rgb(const Observation& obs, int tile_px) { return render_view(obs.view, tile_px); }

std::string ascii_grid(const GridState& state) {
  std::ostringstream out;
  for (int y = 0; y < state.height; ++y) {
    for (int x = 0; x < state.width; ++x) {
      const Pos p{x, y};
      if (p == state.agent_pos) {
        static constexpr const char* arrows[] = {"^^", ">>", "vv", "<<"};
        out << arrows[static_cast<int>(state.agent_dir)];
        continue;
      }
      const auto& cell = state.at(p);
      if (!cell) {
        out << " .";
        continue;
      }
      const char c = to_string(cell->color)[0];
      switch (cell->kind) {
        case ObjectKind::wall: out << "##"; break;
        case ObjectKind::key: out << c << 'K'; break;
        case ObjectKind::ball: out << c << 'B'; break;
        case ObjectKind::box: out << c << 'X'; break;
        case ObjectKind::door:
          out << c
              << (cell->door_state == DoorState::open ? '_' : cell->door_state == DoorState::closed ? 'D' : 'L');
          break;
      }
    }
    out << '\n';
  }
  if (state.carrying) out << "carrying: " << state.carrying->describe() << '\n';
  return out.str();
}

}  // namespace gridlearn
