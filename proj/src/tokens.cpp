#include "gridlearn/tokens.hpp"

#include <algorithm>
#include <unordered_map>

#include "gridlearn/feedback.hpp"

namespace gridlearn {

std::string_view to_string(SchemeVariant v) {
  switch (v) {
    case SchemeVariant::none: return "none";
    case SchemeVariant::scalar: return "scalar";
    case SchemeVariant::lang: return "lang";
    case SchemeVariant::combo: return "combo";
  }
  return "?";
}

std::optional<SchemeVariant> parse_scheme_variant(std::string_view s) {
  for (auto v : {SchemeVariant::none, SchemeVariant::scalar, SchemeVariant::lang, SchemeVariant::combo}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::string TokenScheme::describe() const {
  std::string out(to_string(variant));
  if (repeat_mission) out += "+repeat";
  if (predict_feedback) out += "+pf";
  if (predict_reward) out += "+pr";
  if (predict_image) out += "+pi";
  return out;
}

// ---------------------------------------------------------------------------

TextEncoder::TextEncoder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw Error(ErrorKind::DimensionMismatch, "text encoder dim must be >= 1");
}

std::string TextEncoder::version() const {
  return "hash-ngram-v1/d" + std::to_string(dim_) + "/s" + std::to_string(seed_);
}

Vec TextEncoder::encode(const std::string& sentence) const {
  static thread_local std::unordered_map<std::string, Vec> cache;
  const std::string key = version() + "\n" + sentence;
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  std::vector<std::string> features;
  const auto words = words_of(sentence);
  for (std::size_t i = 0; i < words.size(); ++i) {
    features.push_back("u:" + words[i]);
    features.push_back("p:" + std::to_string(i) + ":" + words[i]);
    if (i + 1 < words.size()) features.push_back("b:" + words[i] + " " + words[i + 1]);
  }
  if (features.empty()) features.push_back("<empty>");
  Vec v = Vec::Zero(dim_);
  for (const auto& f : features) {
    Rng rng(derive_seed(seed_, fnv1a(f)));
    for (int j = 0; j < dim_; ++j) v(j) += rng.normal();
  }
  v /= v.norm();
  if (cache.size() > 100000) cache.clear();
  cache.emplace(key, v);
  return v;
}

// ---------------------------------------------------------------------------

std::uint16_t tile_code(const ViewCell& cell, bool agent) {
  int color = static_cast<int>(cell.color);
  int door = static_cast<int>(cell.door_state);
  if (cell.type == CellType::unseen || cell.type == CellType::empty || cell.type == CellType::wall) color = 0;
  if (cell.type != CellType::door) door = 0;
  return static_cast<std::uint16_t>(((static_cast<int>(cell.type) * kNumColors + color) * 3 + door) * 2 + (agent ? 1 : 0));
}

std::vector<std::uint16_t> tile_codes(const SymbolicView& view) {
  std::vector<std::uint16_t> out(static_cast<std::size_t>(view.size * view.size));
  for (int row = 0; row < view.size; ++row) {
    for (int col = 0; col < view.size; ++col) {
      const bool agent = row == view.agent_row() && col == view.agent_col();
      out[static_cast<std::size_t>(row * view.size + col)] = tile_code(view.at(col, row), agent);
    }
  }
  return out;
}

Mat tile_codebook(int tile_px) {
  const int feat = 3 * tile_px * tile_px;
  Mat book = Mat::Zero(kNumTileCodes, feat);
  for (int code = 0; code < kNumTileCodes; ++code) {
    const bool agent = code % 2 == 1;
    int rest = code / 2;
    ViewCell cell;
    cell.door_state = static_cast<DoorState>(rest % 3);
    rest /= 3;
    cell.color = static_cast<Color>(rest % kNumColors);
    cell.type = static_cast<CellType>(rest / kNumColors);
    // A 1 x 1 view puts the agent on its only cell; a 3 x 3 view keeps (0, 0) agent-free.
    SymbolicView view;
    view.size = agent ? 1 : 3;
    view.cells.resize(agent ? 1u : 9u);
    view.at(0, 0) = cell;
    const RgbImage img = render_view(view, tile_px);
    for (int py = 0; py < tile_px; ++py) {
      for (int px = 0; px < tile_px; ++px) {
        const auto p = img.pixel(px, py);
        for (int ch = 0; ch < 3; ++ch) book(code, (py * tile_px + px) * 3 + ch) = p[static_cast<std::size_t>(ch)] / 255.0;
      }
    }
  }
  return book;
}

// ---------------------------------------------------------------------------

int EncodedSequence::unmasked_count() const {
  int n = 0;
  for (const auto& u : unmasked) n += static_cast<int>(std::count(u.begin(), u.end(), true));
  return n;
}

std::vector<int> EncodedSequence::unmasked_positions() const {
  std::vector<int> out;
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < kSlotsPerStep; ++s) {
      if (unmasked[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)]) out.push_back(kSlotsPerStep * t + s);
    }
  }
  return out;
}

void apply_scheme_mask(EncodedSequence& seq, const TokenScheme& scheme) {
  seq.unmasked.assign(static_cast<std::size_t>(seq.T), {});
  for (int t = 0; t < seq.T; ++t) {
    auto& u = seq.unmasked[static_cast<std::size_t>(t)];
    u[kMissionSlot] = t == 0 || scheme.repeat_mission;
    u[kRtgSlot] = scheme.rtg_input();
    u[kFeedbackSlot] = scheme.feedback_input() && seq.feedback[static_cast<std::size_t>(t)].has_value();
    u[kObservationSlot] = true;
    u[kActionSlot] = true;
  }
}

EncodedSequence assemble_sequence(const Trajectory& traj, const TokenScheme& scheme, const TextEncoder& text,
                                  bool has_feedback_annotation, bool has_reward_annotation) {
  if (scheme.needs_feedback() && !has_feedback_annotation) {
    throw Error(ErrorKind::MissingAnnotation, "scheme " + scheme.describe() + " needs feedback annotations");
  }
  if (scheme.needs_rewards() && !has_reward_annotation) {
    throw Error(ErrorKind::MissingAnnotation, "scheme " + scheme.describe() + " needs reward annotations");
  }
  EncodedSequence seq;
  seq.T = traj.length();
  seq.mission = text.encode(traj.mission_text);
  const auto T = static_cast<std::size_t>(seq.T);
  const std::vector<double> rtg = returns_to_go(traj.rewards());
  seq.rtg = rtg;
  seq.feedback.resize(T);
  seq.feedback_target.resize(T);
  seq.reward_target.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    const TrajectoryStep& st = traj.steps[t];
    seq.observations.push_back(tile_codes(st.observation));
    seq.actions.push_back(static_cast<int>(st.action));
    if (t > 0 && traj.steps[t - 1].feedback) seq.feedback[t] = text.encode(*traj.steps[t - 1].feedback);
    if (st.feedback) seq.feedback_target[t] = text.encode(*st.feedback);
    seq.reward_target[t] = t + 1 < T ? rtg[t + 1] : 0.0;
  }
  apply_scheme_mask(seq, scheme);
  return seq;
}

Vec project_text(const Vec& features, const Mat& W) {
  if (features.size() != W.rows()) throw Error(ErrorKind::DimensionMismatch, "text features do not match W rows");
  return W.transpose() * features;
}

// ---------------------------------------------------------------------------

int EncodedBatch::padded_slots(int b) const {
  return kSlotsPerStep * (T_max - rows[static_cast<std::size_t>(b)].T);
}

EncodedBatch pad_batch(std::vector<EncodedSequence> seqs) {
  if (seqs.empty()) throw Error(ErrorKind::DomainError, "pad_batch needs at least one sequence");
  EncodedBatch batch;
  for (const auto& s : seqs) batch.T_max = std::max(batch.T_max, s.T);
  const int L = kSlotsPerStep * batch.T_max;
  for (const auto& s : seqs) {
    std::vector<bool> mask(static_cast<std::size_t>(L), false);
    std::vector<int> pos(static_cast<std::size_t>(L)), step(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i) {
      const int t = i / kSlotsPerStep;
      pos[static_cast<std::size_t>(i)] = i;
      step[static_cast<std::size_t>(i)] = t;
      mask[static_cast<std::size_t>(i)] =
          t < s.T && s.unmasked[static_cast<std::size_t>(t)][static_cast<std::size_t>(i % kSlotsPerStep)];
    }
    std::vector<bool> valid(static_cast<std::size_t>(batch.T_max)), fb(valid.size()), img(valid.size());
    for (int t = 0; t < batch.T_max; ++t) {
      valid[static_cast<std::size_t>(t)] = t < s.T;
      fb[static_cast<std::size_t>(t)] = t < s.T && s.feedback_target[static_cast<std::size_t>(t)].has_value();
      img[static_cast<std::size_t>(t)] = t + 1 < s.T;
    }
    batch.attention_mask.push_back(std::move(mask));
    batch.position_ids.push_back(std::move(pos));
    batch.timestep_ids.push_back(std::move(step));
    batch.step_valid.push_back(std::move(valid));
    batch.feedback_valid.push_back(std::move(fb));
    batch.image_valid.push_back(std::move(img));
  }
  batch.rows = std::move(seqs);
  return batch;
}

}  // namespace gridlearn
