#include "gridlearn/grid.hpp"

#include "helpers.hpp"

using namespace gridlearn;
using gridlearn::test::walled_room;

TEST_CASE("turning is a cyclic group of order four") {
  for (int d = 0; d < 4; ++d) {
    const auto dir = static_cast<Direction>(d);
    CHECK(turn_left(turn_right(dir)) == dir);
    CHECK(turn_right(turn_right(turn_right(turn_right(dir)))) == dir);
  }
  CHECK(direction_vector(Direction::north) == Pos{0, -1});
  CHECK(direction_vector(Direction::east) == Pos{1, 0});
}

TEST_CASE("forward into a wall is a no-op apart from the step counter") {
  const GridState s = walled_room(5, 5, {1, 1}, Direction::north);
  const StepOutcome o = apply_action(s, Action::forward);
  CHECK_FALSE(o.had_effect);
  CHECK(o.next_state.same_content(s));
  CHECK(o.next_state.step_count == s.step_count + 1);
  REQUIRE(o.events.size() == 1);
  CHECK(o.events[0].type == StepEvent::Type::blocked);
}

TEST_CASE("forward moves onto empty floor and open doors only") {
  GridState s = walled_room(6, 5, {2, 2}, Direction::east);
  CHECK(apply_action(s, Action::forward).next_state.agent_pos == Pos{3, 2});
  s.at({3, 2}) = make_door(Color::red, DoorState::closed, 7);
  CHECK_FALSE(apply_action(s, Action::forward).had_effect);
  s.at({3, 2}) = make_door(Color::red, DoorState::open, 7);
  CHECK(apply_action(s, Action::forward).next_state.agent_pos == Pos{3, 2});
  s.at({3, 2}) = make_object(ObjectKind::ball, Color::red, 8);
  CHECK_FALSE(apply_action(s, Action::forward).had_effect);
}

TEST_CASE("pickup then drop returns the object to the front cell") {
  GridState s = walled_room(5, 5, {2, 2}, Direction::south);
  const WorldObject box = make_object(ObjectKind::box, Color::blue, 3);
  s.at({2, 3}) = box;
  const StepOutcome up = apply_action(s, Action::pickup);
  REQUIRE(up.had_effect);
  CHECK(up.next_state.is_carrying(3));
  CHECK_FALSE(up.next_state.at({2, 3}).has_value());
  CHECK_FALSE(apply_action(up.next_state, Action::pickup).had_effect);  // hands full
  const StepOutcome down = apply_action(up.next_state, Action::drop);
  REQUIRE(down.had_effect);
  CHECK(down.next_state.same_content(s));
  CHECK_FALSE(apply_action(s, Action::drop).had_effect);  // nothing carried
}

TEST_CASE("walls and doors cannot be picked up") {
  GridState s = walled_room(5, 5, {1, 1}, Direction::west);
  CHECK_FALSE(apply_action(s, Action::pickup).had_effect);
  s.agent_dir = Direction::east;
  s.at({2, 1}) = make_door(Color::green, DoorState::open, 4);
  CHECK_FALSE(apply_action(s, Action::pickup).had_effect);
}

TEST_CASE("toggle cycles doors and unlocks only with a matching key") {
  GridState s = walled_room(5, 5, {1, 2}, Direction::east);
  s.at({2, 2}) = make_door(Color::purple, DoorState::locked, 5);
  CHECK_FALSE(apply_action(s, Action::toggle).had_effect);
  s.carrying = make_object(ObjectKind::key, Color::yellow, 6);
  CHECK_FALSE(apply_action(s, Action::toggle).had_effect);
  s.carrying = make_object(ObjectKind::ball, Color::purple, 6);
  CHECK_FALSE(apply_action(s, Action::toggle).had_effect);
  s.carrying = make_object(ObjectKind::key, Color::purple, 6);
  const GridState opened = apply_action(s, Action::toggle).next_state;
  CHECK(opened.at({2, 2})->door_state == DoorState::open);
  const GridState closed = apply_action(opened, Action::toggle).next_state;
  CHECK(closed.at({2, 2})->door_state == DoorState::closed);
  CHECK(apply_action(closed, Action::toggle).next_state.at({2, 2})->door_state == DoorState::open);
  s.at({2, 2}).reset();
  CHECK_FALSE(apply_action(s, Action::toggle).had_effect);
}

TEST_CASE("apply_action refuses to run past the budget") {
  GridState s = walled_room(5, 5, {1, 1}, Direction::east);
  s.step_budget = 1;
  const GridState after = apply_action(s, Action::left).next_state;
  CHECK_ERROR_KIND(apply_action(after, Action::left), ErrorKind::DomainError);
}

TEST_CASE("egocentric view places an object d cells ahead at the same view cell in every heading") {
  for (int d = 0; d < 4; ++d) {
    const auto dir = static_cast<Direction>(d);
    GridState s = walled_room(9, 9, {4, 4}, dir);
    const Pos ahead = s.agent_pos + direction_vector(dir) + direction_vector(dir);
    s.at(ahead) = make_object(ObjectKind::ball, Color::green, 1);
    const SymbolicView v = symbolic_view(s);
    CHECK(v.at(v.agent_col(), v.agent_row() - 2).type == CellType::ball);
    CHECK(v.at(v.agent_col(), v.agent_row() - 2).color == Color::green);
    // Object to the right of the agent appears right of the centre column.
    GridState r = walled_room(9, 9, {4, 4}, dir);
    r.at(r.agent_pos + direction_vector(turn_right(dir))) = make_object(ObjectKind::key, Color::red, 2);
    const SymbolicView vr = symbolic_view(r);
    CHECK(vr.at(vr.agent_col() + 1, vr.agent_row()).type == CellType::key);
  }
}

TEST_CASE("cells behind a solid wall row are unseen") {
  GridState s = walled_room(7, 7, {3, 5}, Direction::north);
  for (int x = 1; x < 6; ++x) s.at({x, 3}) = make_wall(50 + x);
  s.at({3, 2}) = make_object(ObjectKind::box, Color::red, 1);
  const SymbolicView v = symbolic_view(s);
  CHECK(v.at(3, 6 - 3).type == CellType::unseen);
  CHECK(v.at(3, 6 - 2).type == CellType::wall);
  CHECK(v.at(3, 6 - 1).type == CellType::empty);
  // Out of bounds is unseen as well.
  CHECK(v.at(0, 0).type == CellType::unseen);
}

TEST_CASE("the agent cell of the view shows the carried object") {
  GridState s = walled_room(5, 5, {2, 2}, Direction::north);
  CHECK(symbolic_view(s).at(3, 6).type == CellType::empty);
  s.carrying = make_object(ObjectKind::key, Color::blue, 9);
  CHECK(symbolic_view(s).at(3, 6).type == CellType::key);
}

TEST_CASE("view size must be odd and at least three") {
  const GridState s = walled_room(5, 5, {2, 2}, Direction::north);
  CHECK_ERROR_KIND(symbolic_view(s, 4), ErrorKind::DomainError);
  CHECK(symbolic_view(s, 5).cells.size() == 25);
}

TEST_CASE("rendered view dimensions and palette") {
  GridState s = walled_room(7, 7, {3, 5}, Direction::north);
  s.at({3, 4}) = make_object(ObjectKind::box, Color::blue, 1);
  const Observation obs = egocentric_view(s, 7, 8);
  REQUIRE(obs.rgb.width == 56);
  REQUIRE(obs.rgb.height == 56);
  CHECK(obs.rgb.data.size() == 56u * 56u * 3u);
  CHECK(obs.rgb == render_view(obs.view, 8));
  // Some pixel of the box tile (col 3, row 5) carries the blue palette colour.
  bool blue = false;
  for (int y = 40; y < 48; ++y) {
    for (int x = 24; x < 32; ++x) blue = blue || obs.rgb.pixel(x, y) == color_rgb(Color::blue);
  }
  CHECK(blue);
  CHECK(obs.rgb.pixel(0, 0) == kOccludedRgb);
}

TEST_CASE("enum names round-trip") {
  for (Action a : kAllActions) CHECK(parse_action(to_string(a)) == a);
  for (Color c : kAllColors) CHECK(parse_color(to_string(c)) == c);
  for (ObjectKind k : {ObjectKind::key, ObjectKind::ball, ObjectKind::box, ObjectKind::door, ObjectKind::wall}) {
    CHECK(parse_object_kind(to_string(k)) == k);
  }
  CHECK_FALSE(parse_action("jump").has_value());
}

TEST_CASE("ascii dump has one line per grid row") {
  const GridState s = walled_room(6, 4, {2, 2}, Direction::east);
  const std::string a = ascii_grid(s);
  CHECK(std::count(a.begin(), a.end(), '\n') == 4);
}
