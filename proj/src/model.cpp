#include "gridlearn/model.hpp"

#include <algorithm>
#include <cmath>

namespace gridlearn {

void BackboneConfig::validate() const {
  if (n_layers < 1 || n_heads < 1 || n_kv_heads < 1 || d_model < 1 || d_ff < 1 || max_timesteps < 1) {
    throw Error(ErrorKind::ConfigError, "backbone sizes must be positive");
  }
  if (d_model % n_heads != 0) throw Error(ErrorKind::ConfigError, "d_model must be divisible by n_heads");
  if (n_heads % n_kv_heads != 0) throw Error(ErrorKind::ConfigError, "n_heads must be divisible by n_kv_heads");
  if ((d_model / n_heads) % 2 != 0) throw Error(ErrorKind::ConfigError, "head dimension must be even for RoPE");
}

void ModelConfig::validate() const {
  backbone.validate();
  if (d_text < 1 || d_img < 1 || cnn_channels < 1 || tile_px < 1) throw Error(ErrorKind::ConfigError, "model sizes must be positive");
  if (view_size < 3 || view_size % 2 == 0) throw Error(ErrorKind::ConfigError, "view_size must be odd and >= 3");
}

ModelConfig model_preset(const std::string& name) {
  ModelConfig c;
  if (name == "desk") return c;
  auto big = [&](int layers, int d, int heads, int kv) {
    c.backbone = {layers, heads, kv, d, 4 * d, 256};
    c.d_text = 768;
    c.d_img = 128;
    c.cnn_channels = 32;
    return c;
  };
  if (name == "tiny") return big(4, 384, 6, 2);
  if (name == "small") return big(8, 512, 8, 4);
  if (name == "base") return big(10, 768, 12, 4);
  throw Error(ErrorKind::ConfigError, "unknown model size preset: " + name);
}

std::vector<std::string> model_preset_names() { return {"desk", "tiny", "small", "base"}; }

// ---------------------------------------------------------------------------

namespace {

Mat randn(Rng& rng, int rows, int cols, double std) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal() * std;
  }
  return m;
}

// Neighbour rows of a 3 x 3 same-padded convolution over V x V cells.
RowIndex im2col_index(int n_images, int V) {
  RowIndex idx;
  idx.reserve(static_cast<std::size_t>(n_images * V * V * 9));
  for (int o = 0; o < n_images; ++o) {
    for (int r = 0; r < V; ++r) {
      for (int c = 0; c < V; ++c) {
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = r + dr, cc = c + dc;
            idx.push_back(rr < 0 || cc < 0 || rr >= V || cc >= V ? -1 : o * V * V + rr * V + cc);
          }
        }
      }
    }
  }
  return idx;
}

const double kLossWeightInit = std::log(std::exp(1.0) - 1.0);  // softplus^-1(1)

}  // namespace

Parameter& Model::add(const std::string& name, Mat value, bool trainable) {
  params_.emplace_back(name, std::move(value));
  params_.back().trainable = trainable;
  by_name_[name] = &params_.back();
  return params_.back();
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(derive_seed(seed, 0x30de1));
  const auto& bb = cfg_.backbone;
  const int d = bb.d_model, C = cfg_.cnn_channels, V = cfg_.view_size;
  const int dh = d / bb.n_heads, kvd = dh * bb.n_kv_heads;
  const int patch = 3 * cfg_.tile_px * cfg_.tile_px;
  auto lin = [&](int in, int out, double gain = 1.0) { return randn(rng, in, out, gain / std::sqrt(static_cast<double>(in))); };

  add("img.conv1.w", lin(patch, C, std::sqrt(2.0)));
  add("img.conv1.b", Mat::Constant(1, C, 0.01));  // off the ReLU kink for blank tiles
  add("img.conv2.w", lin(9 * C, C, std::sqrt(2.0)));
  add("img.conv2.b", Mat::Constant(1, C, 0.01));  // off the ReLU kink for blank tiles
  add("img.conv3.w", lin(9 * C, C, std::sqrt(2.0)));
  add("img.conv3.b", Mat::Constant(1, C, 0.01));  // off the ReLU kink for blank tiles
  add("img.fc.w", lin(V * V * C, cfg_.d_img));
  add("img.fc.b", Mat::Zero(1, cfg_.d_img));

  add("proj.text.w", randn(rng, cfg_.d_text, d, 1.0));
  add("proj.image.w", lin(cfg_.d_img, d));
  add("proj.image.b", Mat::Zero(1, d));
  add("proj.rtg.w", randn(rng, 1, d, 1.0));
  add("proj.rtg.b", Mat::Zero(1, d));
  add("emb.action", randn(rng, kNumActions, d, 1.0));
  add("emb.timestep", randn(rng, bb.max_timesteps, d, 0.1));
  add("emb.slot", randn(rng, kSlotsPerStep, d, 0.5));
  add("norm.input", Mat::Ones(1, d));

  const double out_gain = 1.0 / std::sqrt(2.0 * bb.n_layers);
  for (int l = 0; l < bb.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    add(p + "attn_norm", Mat::Ones(1, d));
    add(p + "wq", lin(d, d));
    add(p + "wk", lin(d, kvd));
    add(p + "wv", lin(d, kvd));
    add(p + "wo", lin(d, d, out_gain));
    add(p + "ffn_norm", Mat::Ones(1, d));
    add(p + "w_gate", lin(d, bb.d_ff));
    add(p + "w_up", lin(d, bb.d_ff));
    add(p + "w_down", lin(bb.d_ff, d, out_gain));
  }
  add("norm.final", Mat::Ones(1, d));

  add("head.action.w", lin(d, kNumActions, 0.5));
  add("head.action.b", Mat::Zero(1, kNumActions));
  add("head.feedback.w", lin(d, cfg_.d_text));
  add("head.feedback.b", Mat::Zero(1, cfg_.d_text));
  add("head.reward.w", lin(d, 1));
  add("head.reward.b", Mat::Zero(1, 1));
  add("head.image.w", lin(d, cfg_.d_img));
  add("head.image.b", Mat::Constant(1, cfg_.d_img, 0.1));

  add("loss.u_feedback", Mat::Constant(1, 1, kLossWeightInit));
  add("loss.u_reward", Mat::Constant(1, 1, kLossWeightInit));
  add("loss.u_image", Mat::Constant(1, 1, kLossWeightInit));

  codebook_ = tile_codebook(cfg_.tile_px);
}

Parameter& Model::param(const std::string& name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error(ErrorKind::ConfigError, "no parameter named " + name);
  return *it->second;
}

const Parameter& Model::param(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error(ErrorKind::ConfigError, "no parameter named " + name);
  return *it->second;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void Model::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

Var Model::encode_images(Tape& tape, const std::vector<const std::vector<std::uint16_t>*>& observations) const {
  auto P = [&](const char* name) { return tape.param(const_cast<Parameter&>(param(name))); };
  const int V = cfg_.view_size, cells = V * V;
  const int n = static_cast<int>(observations.size());
  // Patchify convolution (kernel = stride = tile) evaluated once per distinct tile.
  Var c1 = tape.relu(tape.add_row(tape.matmul(tape.constant(codebook_), P("img.conv1.w")), P("img.conv1.b")));
  RowIndex codes;
  codes.reserve(static_cast<std::size_t>(n * cells));
  for (const auto* obs : observations) {
    if (static_cast<int>(obs->size()) != cells) throw Error(ErrorKind::DimensionMismatch, "observation size differs from view_size");
    for (auto c : *obs) codes.push_back(c);
  }
  Var x = tape.gather(c1, codes, 1);
  const RowIndex im = im2col_index(n, V);
  x = tape.relu(tape.add_row(tape.matmul(tape.gather(x, im, 9), P("img.conv2.w")), P("img.conv2.b")));
  x = tape.relu(tape.add_row(tape.matmul(tape.gather(x, im, 9), P("img.conv3.w")), P("img.conv3.b")));
  RowIndex flat(static_cast<std::size_t>(n * cells));
  for (int i = 0; i < n * cells; ++i) flat[static_cast<std::size_t>(i)] = i;
  return tape.add_row(tape.matmul(tape.gather(x, flat, cells), P("img.fc.w")), P("img.fc.b"));
}

ForwardOutput Model::forward(Tape& tape, const EncodedBatch& batch) const {
  auto P = [&](const std::string& name) { return tape.param(const_cast<Parameter&>(param(name))); };
  const auto& bb = cfg_.backbone;
  const int dh = bb.d_model / bb.n_heads;
  ForwardOutput out;

  // Valid steps, batch-major.
  std::vector<std::vector<int>> step_index(batch.rows.size());
  std::vector<const std::vector<std::uint16_t>*> observations;
  for (std::size_t b = 0; b < batch.rows.size(); ++b) {
    const auto& s = batch.rows[b];
    if (s.T > bb.max_timesteps) throw Error(ErrorKind::ContextOverflow, "sequence longer than max_context");
    for (int t = 0; t < s.T; ++t) {
      step_index[b].push_back(static_cast<int>(out.step_rows.size()));
      out.step_rows.emplace_back(static_cast<int>(b), t);
      observations.push_back(&s.observations[static_cast<std::size_t>(t)]);
    }
  }
  if (out.step_rows.empty()) throw Error(ErrorKind::EmptyMask, "batch has no valid steps");
  out.image_embedding = encode_images(tape, observations);

  // Compact token list: only unmasked slots are materialised.
  enum Kind { kText, kRtg, kObs, kAct };
  std::vector<Vec> text_rows;
  std::vector<double> rtg_rows;
  RowIndex obs_rows, act_rows;
  struct Tok {
    Kind kind;
    int src;
  };
  std::vector<Tok> toks;
  std::vector<int> segments, positions, timesteps, slots;
  std::vector<int> obs_token(out.step_rows.size()), act_token(out.step_rows.size());
  for (std::size_t b = 0; b < batch.rows.size(); ++b) {
    const auto& s = batch.rows[b];
    int count = 0;
    for (int t = 0; t < s.T; ++t) {
      const auto& u = s.unmasked[static_cast<std::size_t>(t)];
      const int step = step_index[b][static_cast<std::size_t>(t)];
      for (int slot = 0; slot < kSlotsPerStep; ++slot) {
        if (!u[static_cast<std::size_t>(slot)]) continue;
        switch (slot) {
          case kMissionSlot:
            toks.push_back({kText, static_cast<int>(text_rows.size())});
            text_rows.push_back(s.mission);
            break;
          case kRtgSlot:
            toks.push_back({kRtg, static_cast<int>(rtg_rows.size())});
            rtg_rows.push_back(s.rtg[static_cast<std::size_t>(t)]);
            break;
          case kFeedbackSlot:
            toks.push_back({kText, static_cast<int>(text_rows.size())});
            text_rows.push_back(*s.feedback[static_cast<std::size_t>(t)]);
            break;
          case kObservationSlot:
            obs_token[static_cast<std::size_t>(step)] = static_cast<int>(toks.size());
            toks.push_back({kObs, static_cast<int>(obs_rows.size())});
            obs_rows.push_back(step);
            break;
          case kActionSlot:
            act_token[static_cast<std::size_t>(step)] = static_cast<int>(toks.size());
            toks.push_back({kAct, static_cast<int>(act_rows.size())});
            act_rows.push_back(s.actions[static_cast<std::size_t>(t)]);
            break;
        }
        positions.push_back(kSlotsPerStep * t + slot);
        timesteps.push_back(t);
        slots.push_back(slot);
        ++count;
      }
    }
    segments.push_back(count);
  }

  std::vector<Var> pieces;
  std::vector<int> piece_offset(4, 0);
  int offset = 0;
  auto add_piece = [&](Kind k, Var v) {
    piece_offset[k] = offset;
    offset += static_cast<int>(v.rows());
    pieces.push_back(v);
  };
  if (!text_rows.empty()) {
    Mat T(static_cast<Eigen::Index>(text_rows.size()), cfg_.d_text);
    for (std::size_t i = 0; i < text_rows.size(); ++i) {
      if (text_rows[i].size() != cfg_.d_text) throw Error(ErrorKind::DimensionMismatch, "text feature size differs from d_text");
      T.row(static_cast<Eigen::Index>(i)) = text_rows[i].transpose();
    }
    add_piece(kText, tape.matmul(tape.constant(std::move(T)), P("proj.text.w")));
  }
  if (!rtg_rows.empty()) {
    Mat R = Eigen::Map<const Mat>(rtg_rows.data(), static_cast<Eigen::Index>(rtg_rows.size()), 1);
    add_piece(kRtg, tape.add_row(tape.matmul(tape.constant(std::move(R)), P("proj.rtg.w")), P("proj.rtg.b")));
  }
  add_piece(kObs, tape.add_row(tape.matmul(tape.gather(out.image_embedding, obs_rows, 1), P("proj.image.w")),
                               P("proj.image.b")));
  add_piece(kAct, tape.gather(P("emb.action"), act_rows, 1));
  RowIndex order;
  order.reserve(toks.size());
  for (const Tok& t : toks) order.push_back(piece_offset[t.kind] + t.src);
  Var x = tape.gather(tape.concat_rows(pieces), order, 1);
  x = tape.add(x, tape.gather(P("emb.timestep"), timesteps, 1));
  x = tape.add(x, tape.gather(P("emb.slot"), slots, 1));
  x = tape.rmsnorm(x, P("norm.input"));

  for (int l = 0; l < bb.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Var h = tape.rmsnorm(x, P(p + "attn_norm"));
    Var q = tape.rope(tape.matmul(h, P(p + "wq")), positions, dh, cfg_.rope_base);
    Var k = tape.rope(tape.matmul(h, P(p + "wk")), positions, dh, cfg_.rope_base);
    Var v = tape.matmul(h, P(p + "wv"));
    Var a = tape.attention(q, k, v, segments, bb.n_heads, bb.n_kv_heads);
    x = tape.add(x, tape.matmul(a, P(p + "wo")));
    Var h2 = tape.rmsnorm(x, P(p + "ffn_norm"));
    Var f = tape.mul(tape.silu(tape.matmul(h2, P(p + "w_gate"))), tape.matmul(h2, P(p + "w_up")));
    x = tape.add(x, tape.matmul(f, P(p + "w_down")));
  }
  x = tape.rmsnorm(x, P("norm.final"));

  Var h_obs = tape.gather(x, obs_token, 1);
  Var h_act = tape.gather(x, act_token, 1);
  out.logits = tape.add_row(tape.matmul(h_obs, P("head.action.w")), P("head.action.b"));
  out.feedback_pred = tape.gelu(tape.add_row(tape.matmul(h_act, P("head.feedback.w")), P("head.feedback.b")));
  out.reward_pred = tape.sigmoid(tape.add_row(tape.matmul(h_act, P("head.reward.w")), P("head.reward.b")));
  out.image_pred = tape.relu(tape.add_row(tape.matmul(h_act, P("head.image.w")), P("head.image.b")));
  return out;
}

std::vector<double> sequence_mean_weights(const std::vector<std::pair<int, int>>& rows, const std::vector<bool>& valid) {
  std::map<int, int> per_seq;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (valid[i]) ++per_seq[rows[i].first];
  }
  if (per_seq.empty()) throw Error(ErrorKind::EmptyMask, "no valid positions");
  const double seqs = static_cast<double>(per_seq.size());
  std::vector<double> w(rows.size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (valid[i]) w[i] = 1.0 / (seqs * per_seq[rows[i].first]);
  }
  return w;
}

Var Model::loss(Tape& tape, const EncodedBatch& batch, const ForwardOutput& out, const TokenScheme& scheme,
                LossTerms* terms) const {
  auto P = [&](const std::string& name) { return tape.param(const_cast<Parameter&>(param(name))); };
  const auto& rows = out.step_rows;
  const std::size_t n = rows.size();
  std::vector<Var> losses, weights;

  std::vector<int> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    targets[i] = batch.rows[static_cast<std::size_t>(rows[i].first)].actions[static_cast<std::size_t>(rows[i].second)];
  }
  Var la = tape.cross_entropy(out.logits, targets, sequence_mean_weights(rows, std::vector<bool>(n, true)));
  losses.push_back(la);
  weights.push_back(tape.constant(Mat::Constant(1, 1, 1.0)));
  if (terms) terms->action = la.scalar();

  auto has_valid = [](const std::vector<bool>& v) { return std::find(v.begin(), v.end(), true) != v.end(); };
  if (scheme.predict_feedback) {
    std::vector<bool> valid(n);
    Mat target = Mat::Zero(static_cast<Eigen::Index>(n), cfg_.d_text);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& f = batch.rows[static_cast<std::size_t>(rows[i].first)].feedback_target[static_cast<std::size_t>(rows[i].second)];
      valid[i] = f.has_value();
      if (f) target.row(static_cast<Eigen::Index>(i)) = f->transpose();
    }
    if (has_valid(valid)) {
      Var l = tape.mse(out.feedback_pred, target, sequence_mean_weights(rows, valid));
      losses.push_back(l);
      Var w = tape.softplus(P("loss.u_feedback"));
      weights.push_back(w);
      if (terms) {
        terms->feedback = l.scalar();
        terms->weights["feedback"] = w.scalar();
      }
    }
  }
  if (scheme.predict_reward) {
    Mat target(static_cast<Eigen::Index>(n), 1);
    for (std::size_t i = 0; i < n; ++i) {
      target(static_cast<Eigen::Index>(i), 0) =
          batch.rows[static_cast<std::size_t>(rows[i].first)].reward_target[static_cast<std::size_t>(rows[i].second)];
    }
    Var l = tape.mse(out.reward_pred, target, sequence_mean_weights(rows, std::vector<bool>(n, true)));
    losses.push_back(l);
    Var w = tape.softplus(P("loss.u_reward"));
    weights.push_back(w);
    if (terms) {
      terms->reward = l.scalar();
      terms->weights["reward"] = w.scalar();
    }
  }
  if (scheme.predict_image) {
    std::vector<bool> valid(n, false);
    Mat target = Mat::Zero(static_cast<Eigen::Index>(n), cfg_.d_img);
    const Mat& emb = out.image_target ? *out.image_target : out.image_embedding.value();  // detached target
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (rows[i + 1].first == rows[i].first) {
        valid[i] = true;
        target.row(static_cast<Eigen::Index>(i)) = emb.row(static_cast<Eigen::Index>(i + 1));
      }
    }
    if (has_valid(valid)) {
      Var l = tape.cosine_loss(out.image_pred, target, sequence_mean_weights(rows, valid));
      losses.push_back(l);
      Var w = tape.softplus(P("loss.u_image"));
      weights.push_back(w);
      if (terms) {
        terms->image = l.scalar();
        terms->weights["image"] = w.scalar();
      }
    }
  }
  Var total = tape.weighted_average(losses, weights);
  if (terms) terms->total = total.scalar();
  return total;
}

// ---------------------------------------------------------------------------

namespace {

void require_mask(const std::vector<bool>& mask, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(mask.size()) != rows) throw Error(ErrorKind::DimensionMismatch, "mask length differs");
  if (std::find(mask.begin(), mask.end(), true) == mask.end()) throw Error(ErrorKind::EmptyMask, "no valid positions");
}

}  // namespace

double loss_action(const Mat& logits, const std::vector<int>& targets, const std::vector<bool>& mask) {
  require_mask(mask, logits.rows());
  double sum = 0;
  int n = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    if (!mask[static_cast<std::size_t>(r)]) continue;
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    sum += lse - logits(r, targets[static_cast<std::size_t>(r)]);
    ++n;
  }
  return sum / n;
}

double loss_mse(const Mat& pred, const Mat& target, const std::vector<bool>& mask) {
  require_mask(mask, pred.rows());
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw Error(ErrorKind::DimensionMismatch, "mse shapes");
  double sum = 0;
  int n = 0;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    if (!mask[static_cast<std::size_t>(r)]) continue;
    sum += (pred.row(r) - target.row(r)).squaredNorm() / static_cast<double>(pred.cols());
    ++n;
  }
  return sum / n;
}

double loss_image(const Mat& pred, const Mat& target, const std::vector<bool>& mask) {
  require_mask(mask, pred.rows());
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw Error(ErrorKind::DimensionMismatch, "cosine shapes");
  double sum = 0;
  int n = 0;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    if (!mask[static_cast<std::size_t>(r)]) continue;
    const double np = pred.row(r).norm(), nt = target.row(r).norm();
    if (np == 0.0 || nt == 0.0) throw Error(ErrorKind::ZeroVector, "cosine of a zero vector");
    sum += 1.0 - pred.row(r).dot(target.row(r)) / (np * nt);
    ++n;
  }
  return sum / n;
}

double loss_total(const std::vector<double>& losses, const std::vector<double>& weights) {
  if (losses.empty() || losses.size() != weights.size()) throw Error(ErrorKind::DimensionMismatch, "loss_total lengths");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    num += weights[i] * losses[i];
    den += weights[i];
  }
  return num / den;
}

// ---------------------------------------------------------------------------

namespace {

Vec rms_row(const Vec& x, const Mat& gain, double eps = 1e-6) {
  const double inv = 1.0 / std::sqrt(x.squaredNorm() / static_cast<double>(x.size()) + eps);
  return (x * inv).cwiseProduct(gain.row(0).transpose());
}

Vec silu_vec(const Vec& x) {
  return x.unaryExpr([](double v) { return v >= 0 ? v / (1.0 + std::exp(-v)) : v * std::exp(v) / (1.0 + std::exp(v)); });
}

}  // namespace

InferenceSession::InferenceSession(const Model& model, TokenScheme scheme, const TextEncoder& text)
    : m_(model), scheme_(scheme), text_(text) {
  if (text.dim() != model.config().d_text) throw Error(ErrorKind::DimensionMismatch, "text encoder dim differs from d_text");
  const auto& bb = model.config().backbone;
  const int kvd = bb.d_model / bb.n_heads * bb.n_kv_heads;
  k_cache_.assign(static_cast<std::size_t>(bb.n_layers), Mat(bb.max_context(), kvd));
  v_cache_.assign(static_cast<std::size_t>(bb.n_layers), Mat(bb.max_context(), kvd));
}

Vec InferenceSession::run_token(const Vec& embedding, int position) {
  const auto& cfg = m_.config();
  const auto& bb = cfg.backbone;
  const int dh = bb.d_model / bb.n_heads, group = bb.n_heads / bb.n_kv_heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  Vec x = rms_row(embedding, m_.param("norm.input").value);
  const std::vector<int> pos{position};
  for (int l = 0; l < bb.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    const Vec h = rms_row(x, m_.param(p + "attn_norm").value);
    const Mat q = rope_rotate(h.transpose() * m_.param(p + "wq").value, pos, dh, cfg.rope_base, 1.0);
    const Mat k = rope_rotate(h.transpose() * m_.param(p + "wk").value, pos, dh, cfg.rope_base, 1.0);
    auto& K = k_cache_[static_cast<std::size_t>(l)];
    auto& Vc = v_cache_[static_cast<std::size_t>(l)];
    K.row(n_) = k.row(0);
    Vc.row(n_) = h.transpose() * m_.param(p + "wv").value;
    Vec a(bb.d_model);
    for (int hd = 0; hd < bb.n_heads; ++hd) {
      const int kv = hd / group;
      Vec s = K.block(0, kv * dh, n_ + 1, dh) * q.block(0, hd * dh, 1, dh).transpose() * sc;
      s = (s.array() - s.maxCoeff()).exp().matrix();
      s /= s.sum();
      a.segment(hd * dh, dh) = Vc.block(0, kv * dh, n_ + 1, dh).transpose() * s;
    }
    x += (a.transpose() * m_.param(p + "wo").value).transpose();
    const Vec h2 = rms_row(x, m_.param(p + "ffn_norm").value);
    const Vec gate = silu_vec((h2.transpose() * m_.param(p + "w_gate").value).transpose());
    const Vec up = (h2.transpose() * m_.param(p + "w_up").value).transpose();
    x += (gate.cwiseProduct(up).transpose() * m_.param(p + "w_down").value).transpose();
  }
  ++n_;
  return rms_row(x, m_.param("norm.final").value);
}

Vec InferenceSession::observe(const std::string& mission, double rtg, const std::optional<std::string>& feedback,
                              const SymbolicView& view) {
  const auto& cfg = m_.config();
  if (t_ >= cfg.backbone.max_timesteps) throw Error(ErrorKind::ContextOverflow, "episode longer than max_context");
  auto extras = [&](int slot) -> Vec {
    return (m_.param("emb.timestep").value.row(t_) + m_.param("emb.slot").value.row(slot)).transpose();
  };
  const Mat& Wt = m_.param("proj.text.w").value;
  if (t_ == 0 || scheme_.repeat_mission) {
    run_token(project_text(text_.encode(mission), Wt) + extras(kMissionSlot), kSlotsPerStep * t_ + kMissionSlot);
  }
  if (scheme_.rtg_input()) {
    const Vec e = (rtg * m_.param("proj.rtg.w").value + m_.param("proj.rtg.b").value).transpose();
    run_token(e + extras(kRtgSlot), kSlotsPerStep * t_ + kRtgSlot);
  }
  if (scheme_.feedback_input() && feedback && t_ > 0) {
    run_token(project_text(text_.encode(*feedback), Wt) + extras(kFeedbackSlot), kSlotsPerStep * t_ + kFeedbackSlot);
  }
  Tape tape;
  const auto codes = tile_codes(view);
  const Vec img = m_.encode_images(tape, {&codes}).value().row(0).transpose();
  const Vec e = (img.transpose() * m_.param("proj.image.w").value + m_.param("proj.image.b").value).transpose();
  const Vec h = run_token(e + extras(kObservationSlot), kSlotsPerStep * t_ + kObservationSlot);
  return (h.transpose() * m_.param("head.action.w").value + m_.param("head.action.b").value).transpose();
}

void InferenceSession::commit(Action action) {
  const Vec e = (m_.param("emb.action").value.row(static_cast<int>(action)) + m_.param("emb.timestep").value.row(t_) +
                 m_.param("emb.slot").value.row(kActionSlot))
                    .transpose();
  run_token(e, kSlotsPerStep * t_ + kActionSlot);
  ++t_;
}

Action argmax_action(const Vec& logits) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i) {
    if (logits(i) > logits(best)) best = i;
  }
  return static_cast<Action>(best);
}

// ---------------------------------------------------------------------------

GradCheckResult gradient_check(Model& model, const EncodedBatch& batch, const TokenScheme& scheme, double h,
                               double floor) {
  Mat image_target;
  std::uint64_t gates = 0;
  model.zero_grad();
  {
    Tape tape;
    const ForwardOutput out = model.forward(tape, batch);
    image_target = out.image_embedding.value();
    tape.backward(model.loss(tape, batch, out, scheme));
    gates = tape.gate_signature();
  }
  // Loss with the image target pinned; flags a change of ReLU piece.
  auto total = [&](bool& same_piece) {
    Tape tape;
    ForwardOutput out = model.forward(tape, batch);
    out.image_target = image_target;
    const double v = model.loss(tape, batch, out, scheme).scalar();
    same_piece = same_piece && tape.gate_signature() == gates;
    return v;
  };
  GradCheckResult res;
  for (auto& p : model.parameters()) {
    if (!p.trainable) continue;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double& v = p.value.data()[i];
      const double saved = v;
      double numeric = 0.0;
      for (int attempt = 0; attempt < 4; ++attempt) {
        const double step = h * std::pow(0.1, attempt);
        bool smooth = true;
        v = saved + step;
        const double fp = total(smooth);
        v = saved - step;
        const double fm = total(smooth);
        v = saved;
        numeric = (fp - fm) / (2.0 * step);
        if (smooth) break;
        if (attempt == 0) ++res.kink_retries;
      }
      const double analytic = p.grad.data()[i];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      ++res.checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_parameter = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace gridlearn
