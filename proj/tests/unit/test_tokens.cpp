#include <map>
#include <set>
#include <tuple>

#include "gridlearn/trajectory.hpp"
#include "gridlearn/tokens.hpp"
#include "helpers.hpp"

using namespace gridlearn;

TEST_CASE("text encoder output is unit length and deterministic") {
  const TextEncoder a(64, 3), b(64, 3), other(64, 4);
  const Vec v = a.encode("pick up the red ball");
  CHECK(v.size() == 64);
  CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v == b.encode("pick up the red ball"));
  CHECK((v - other.encode("pick up the red ball")).norm() > 1e-3);
  CHECK(a.encode("pick up the red ball").dot(a.encode("pick up the blue ball")) < 1.0 - 1e-6);
  // Word order matters through bigram and position features.
  CHECK((a.encode("red ball") - a.encode("ball red")).norm() > 1e-6);
  CHECK(a.version() != other.version());
}

TEST_CASE("tile codes are injective over rendered content") {
  // Colour matters for doors and objects only; door state for doors only.
  std::map<std::uint16_t, std::tuple<CellType, int, int, bool>> seen;
  for (CellType t : {CellType::unseen, CellType::empty, CellType::wall, CellType::door, CellType::key, CellType::ball,
                     CellType::box}) {
    for (Color c : kAllColors) {
      for (DoorState d : {DoorState::open, DoorState::closed, DoorState::locked}) {
        for (bool agent : {false, true}) {
          const bool coloured = t == CellType::door || t == CellType::key || t == CellType::ball || t == CellType::box;
          const auto canonical = std::make_tuple(t, coloured ? static_cast<int>(c) : -1,
                                                 t == CellType::door ? static_cast<int>(d) : -1, agent);
          const std::uint16_t code = tile_code(ViewCell{t, c, d}, agent);
          CHECK(code < kNumTileCodes);
          const auto [it, fresh] = seen.emplace(code, canonical);
          CHECK(it->second == canonical);
        }
      }
    }
  }
  CHECK(seen.size() == 2u * (3 + 3 * kNumColors + 3 * kNumColors));
  const Mat book = tile_codebook(kDefaultTilePx);
  CHECK(book.rows() == kNumTileCodes);
  CHECK(book.cols() == 3 * kDefaultTilePx * kDefaultTilePx);
  CHECK(book.minCoeff() >= 0.0);
  CHECK(book.maxCoeff() <= 1.0);
  // Distinct content renders distinctly down to 4 px tiles.
  for (int px : {4, kDefaultTilePx}) {
    const Mat rows = tile_codebook(px);
    for (auto a = seen.begin(); a != seen.end(); ++a) {
      for (auto b = std::next(a); b != seen.end(); ++b) CHECK(rows.row(a->first) != rows.row(b->first));
    }
  }
}

TEST_CASE("project_text checks dimensions") {
  const Mat W = Mat::Ones(4, 3);
  const Vec f = Vec::Ones(4);
  CHECK(project_text(f, W) == Vec::Constant(3, 4.0));
  CHECK_ERROR_KIND(project_text(Vec::Ones(5), W), ErrorKind::DimensionMismatch);
}

namespace {

Trajectory sample(std::uint64_t seed, double p = 0.4) {
  EnvConfig c;
  c.allowed_task_types = {TaskType::sequence};
  return rollout_trajectory(c, seed, p, RewardConfig{});
}

}  // namespace

TEST_CASE("mission slot: first step only unless repeated") {
  const TextEncoder text(16);
  const Trajectory t = sample(1);
  const auto once = assemble_sequence(t, TokenScheme{}, text);
  TokenScheme rep;
  rep.repeat_mission = true;
  const auto every = assemble_sequence(t, rep, text);
  for (int i = 0; i < once.T; ++i) {
    CHECK(once.unmasked[static_cast<std::size_t>(i)][kMissionSlot] == (i == 0));
    CHECK(every.unmasked[static_cast<std::size_t>(i)][kMissionSlot]);
    CHECK(once.unmasked[static_cast<std::size_t>(i)][kObservationSlot]);
    CHECK(once.unmasked[static_cast<std::size_t>(i)][kActionSlot]);
    CHECK_FALSE(once.unmasked[static_cast<std::size_t>(i)][kRtgSlot]);
  }
}

TEST_CASE("feedback slot at t carries the event of action t-1; targets carry the event of action t") {
  const TextEncoder text(16);
  const TokenScheme lang{SchemeVariant::lang, false, true, false, false};
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Trajectory t = sample(s);
    const auto seq = assemble_sequence(t, lang, text);
    for (int i = 0; i < seq.T; ++i) {
      const auto& step = t.steps[static_cast<std::size_t>(i)];
      CHECK(seq.feedback_target[static_cast<std::size_t>(i)].has_value() == step.feedback.has_value());
      if (step.feedback) CHECK(*seq.feedback_target[static_cast<std::size_t>(i)] == text.encode(*step.feedback));
      if (i > 0 && t.steps[static_cast<std::size_t>(i - 1)].feedback) {
        CHECK(*seq.feedback[static_cast<std::size_t>(i)] == text.encode(*t.steps[static_cast<std::size_t>(i - 1)].feedback));
      }
    }
    CHECK_FALSE(seq.feedback[0].has_value());
  }
}

TEST_CASE("reward targets are the next-step returns-to-go") {
  const TextEncoder text(16);
  const Trajectory t = sample(3);
  const auto seq = assemble_sequence(t, TokenScheme{SchemeVariant::scalar}, text);
  const auto rtg = returns_to_go(t.rewards());
  for (int i = 0; i + 1 < seq.T; ++i) CHECK(seq.reward_target[static_cast<std::size_t>(i)] == rtg[static_cast<std::size_t>(i + 1)]);
  CHECK(seq.reward_target.back() == 0.0);
}

TEST_CASE("masking is idempotent") {
  const TextEncoder text(16);
  const TokenScheme combo{SchemeVariant::combo, true, false, false, false};
  auto seq = assemble_sequence(sample(4), combo, text);
  const auto before = seq.unmasked;
  apply_scheme_mask(seq, combo);
  apply_scheme_mask(seq, combo);
  CHECK(seq.unmasked == before);
}

TEST_CASE("missing annotations are rejected") {
  const TextEncoder text(16);
  const Trajectory t = sample(5);
  CHECK_ERROR_KIND(assemble_sequence(t, TokenScheme{SchemeVariant::lang}, text, false, true),
                   ErrorKind::MissingAnnotation);
  CHECK_ERROR_KIND(assemble_sequence(t, TokenScheme{SchemeVariant::none, false, false, true, false}, text, true, false),
                   ErrorKind::MissingAnnotation);
  CHECK_NOTHROW(assemble_sequence(t, TokenScheme{}, text, false, false));
}

TEST_CASE("padding masks padded slots and keeps flattened positions") {
  const TextEncoder text(16);
  std::vector<EncodedSequence> seqs;
  for (std::uint64_t s = 0; s < 3; ++s) seqs.push_back(assemble_sequence(sample(s, 0.9), TokenScheme{}, text));
  const EncodedBatch b = pad_batch(seqs);
  int longest = 0;
  for (const auto& s : seqs) longest = std::max(longest, s.T);
  CHECK(b.T_max == longest);
  for (int r = 0; r < b.batch_size(); ++r) {
    const auto& seq = b.rows[static_cast<std::size_t>(r)];
    CHECK(b.padded_slots(r) == kSlotsPerStep * (b.T_max - seq.T));
    const auto pos = seq.unmasked_positions();
    int count = 0;
    for (int i = 0; i < kSlotsPerStep * b.T_max; ++i) {
      const bool on = b.attention_mask[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
      count += on;
      CHECK(b.position_ids[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] == i);
      CHECK(b.timestep_ids[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] == i / kSlotsPerStep);
      if (i >= seq.flattened_length()) CHECK_FALSE(on);
    }
    CHECK(count == static_cast<int>(pos.size()));
    CHECK(count == seq.unmasked_count());
    for (int t = 0; t < b.T_max; ++t) CHECK(b.step_valid[static_cast<std::size_t>(r)][static_cast<std::size_t>(t)] == (t < seq.T));
  }
  CHECK_ERROR_KIND(pad_batch({}), ErrorKind::DomainError);
}
