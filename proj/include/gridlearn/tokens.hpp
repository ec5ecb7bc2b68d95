#pragma once

// Trajectories to flattened, masked, padded token sequences.
//
// Per timestep the slot order is (mission, rtg, feedback, observation,
// action). The feedback slot at step t carries the event produced by action
// a_{t-1}; step 1 never has one.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "gridlearn/autograd.hpp"
#include "gridlearn/grid.hpp"
#include "gridlearn/trajectory.hpp"

namespace gridlearn {

enum class SchemeVariant : std::uint8_t { none, scalar, lang, combo };
std::string_view to_string(SchemeVariant v);
std::optional<SchemeVariant> parse_scheme_variant(std::string_view s);

struct TokenScheme {
  SchemeVariant variant = SchemeVariant::none;
  bool repeat_mission = false;
  bool predict_feedback = false;
  bool predict_reward = false;
  bool predict_image = false;

  bool rtg_input() const { return variant == SchemeVariant::scalar || variant == SchemeVariant::combo; }
  bool feedback_input() const { return variant == SchemeVariant::lang || variant == SchemeVariant::combo; }
  bool needs_feedback() const { return feedback_input() || predict_feedback; }
  bool needs_rewards() const { return rtg_input() || predict_reward; }
  /// "lang+fp" style summary: variant plus predicted channels.
  std::string describe() const;

  friend bool operator==(const TokenScheme&, const TokenScheme&) = default;
};

enum Slot : int { kMissionSlot = 0, kRtgSlot = 1, kFeedbackSlot = 2, kObservationSlot = 3, kActionSlot = 4 };
inline constexpr int kSlotsPerStep = 5;

/// Frozen stand-in for a sentence encoder: hashed unigram, bigram and
/// word-position features, each a seeded Gaussian vector, summed and
/// normalised to unit length.
class TextEncoder {
 public:
  explicit TextEncoder(int dim = 64, std::uint64_t seed = 0);
  Vec encode(const std::string& sentence) const;
  int dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  std::string version() const;

 private:
  int dim_;
  std::uint64_t seed_;
};

/// Observations enter the image encoder as per-cell tile codes; every tile of
/// the rendering depends only on its cell content and on whether the agent
/// occupies it.
inline constexpr int kNumTileCodes = 7 * kNumColors * 3 * 2;
std::uint16_t tile_code(const ViewCell& cell, bool agent);
std::vector<std::uint16_t> tile_codes(const SymbolicView& view);
/// kNumTileCodes x (3 * tile_px^2) matrix of rendered tiles, channels last, in [0, 1].
Mat tile_codebook(int tile_px);

struct EncodedSequence {
  int T = 0;
  Vec mission;                                // d_text
  std::vector<double> rtg;                    // R_t input per step (0 when unused)
  std::vector<std::optional<Vec>> feedback;   // feedback slot content per step
  std::vector<std::vector<std::uint16_t>> observations;
  std::vector<int> actions;
  std::vector<std::array<bool, kSlotsPerStep>> unmasked;
  // Next-step targets read at step t.
  std::vector<std::optional<Vec>> feedback_target;  // event produced by a_t
  std::vector<double> reward_target;                // G_{t+1}, with G_{T+1} = 0

  int flattened_length() const { return kSlotsPerStep * T; }
  int unmasked_count() const;
  /// Flattened positions (5 (t - 1) + slot) of unmasked slots, ascending.
  std::vector<int> unmasked_positions() const;
};

/// Throws MissingAnnotation when the scheme needs a channel the trajectory
/// does not carry.
EncodedSequence assemble_sequence(const Trajectory& traj, const TokenScheme& scheme, const TextEncoder& text,
                                  bool has_feedback_annotation = true, bool has_reward_annotation = true);

/// Re-applies the scheme's masking rules; idempotent.
void apply_scheme_mask(EncodedSequence& seq, const TokenScheme& scheme);

/// W^T-style linear map features (d_text) -> d_model with W of shape d_text x d_model.
Vec project_text(const Vec& features, const Mat& W);

struct EncodedBatch {
  std::vector<EncodedSequence> rows;
  int T_max = 0;
  std::vector<std::vector<bool>> attention_mask;  // B x 5 T_max, false on masked and padded slots
  std::vector<std::vector<int>> position_ids;     // B x 5 T_max, flattened index
  std::vector<std::vector<int>> timestep_ids;     // B x 5 T_max, 0-based step
  std::vector<std::vector<bool>> step_valid;      // B x T_max
  std::vector<std::vector<bool>> feedback_valid;  // B x T_max
  std::vector<std::vector<bool>> image_valid;     // B x T_max (t < T)

  int batch_size() const { return static_cast<int>(rows.size()); }
  int padded_slots(int b) const;
};

/// Right-pads to the longest sequence. Throws DomainError on an empty list.
EncodedBatch pad_batch(std::vector<EncodedSequence> seqs);

}  // namespace gridlearn
