#pragma once

#include <doctest.h>

#include "gridlearn/grid.hpp"
#include "gridlearn/util.hpp"

// Checks that `expr` throws gridlearn::Error of the given kind.
#define CHECK_ERROR_KIND(expr, expected_kind)                                   \
  do {                                                                          \
    bool thrown_ = false;                                                       \
    try {                                                                       \
      (void)(expr);                                                             \
    } catch (const gridlearn::Error& e_) {                                      \
      thrown_ = true;                                                           \
      CHECK_MESSAGE(e_.kind() == (expected_kind), e_.what());                   \
    }                                                                           \
    CHECK_MESSAGE(thrown_, "expected gridlearn::Error from " #expr);            \
  } while (false)

namespace gridlearn::test {

// Bordered w x h grid with the agent at `pos` facing `dir`.
inline GridState walled_room(int w, int h, Pos pos, Direction dir) {
  GridState s(w, h);
  int id = 100;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x == 0 || y == 0 || x == w - 1 || y == h - 1) s.at({x, y}) = make_wall(id++);
    }
  }
  s.agent_pos = pos;
  s.agent_dir = dir;
  s.step_budget = 1000;
  return s;
}

}  // namespace gridlearn::test
