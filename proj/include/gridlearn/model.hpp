#pragma once

// Causal decoder policy over flattened trajectory tokens: a small CNN image
// encoder, modality projections, a Llama-style backbone (RMSNorm, RoPE,
// grouped-query attention, SwiGLU) and four prediction heads.

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridlearn/autograd.hpp"
#include "gridlearn/tokens.hpp"

namespace gridlearn {

struct BackboneConfig {
  int n_layers = 2;
  int n_heads = 4;
  int n_kv_heads = 2;
  int d_model = 64;
  int d_ff = 256;
  int max_timesteps = 256;  // max_context = 5 * max_timesteps

  int max_context() const { return kSlotsPerStep * max_timesteps; }
  void validate() const;
  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

struct ModelConfig {
  BackboneConfig backbone;
  int d_text = 64;
  int d_img = 32;
  int cnn_channels = 16;
  int view_size = kDefaultViewSize;
  int tile_px = kDefaultTilePx;
  double rope_base = 10000.0;
  std::uint64_t text_seed = 0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// desk (default), tiny (~10M), small (~30M), base (~90M).
ModelConfig model_preset(const std::string& name);
std::vector<std::string> model_preset_names();

struct LossTerms {
  std::optional<double> action, feedback, reward, image;
  double total = 0.0;
  std::map<std::string, double> weights;  // softplus-transformed loss weights
};

struct ForwardOutput {
  Var logits;                        // one row per valid step, batch-major
  Var feedback_pred, reward_pred, image_pred;  // rows as logits
  Var image_embedding;               // encoder output per valid step (same row order)
  std::vector<std::pair<int, int>> step_rows;  // (b, t) of each output row
  Var total;                         // set by the loss
  /// Overrides the (stop-gradient) next-image target; used by gradient_check.
  std::optional<Mat> image_target;
};

class Model {
 public:
  explicit Model(ModelConfig cfg, std::uint64_t seed = 0);

  const ModelConfig& config() const { return cfg_; }
  std::deque<Parameter>& parameters() { return params_; }
  const std::deque<Parameter>& parameters() const { return params_; }
  Parameter& param(const std::string& name);
  const Parameter& param(const std::string& name) const;
  std::size_t parameter_count() const;
  void zero_grad();

  /// Full forward over every valid step of the batch. ContextOverflow if a
  /// sequence exceeds max_context.
  ForwardOutput forward(Tape& tape, const EncodedBatch& batch) const;

  /// Active losses for `scheme` plus their learnable weighted average.
  Var loss(Tape& tape, const EncodedBatch& batch, const ForwardOutput& out, const TokenScheme& scheme,
           LossTerms* terms = nullptr) const;

  /// Image encoder output for the given observations (one row each).
  Var encode_images(Tape& tape, const std::vector<const std::vector<std::uint16_t>*>& observations) const;

 private:
  Parameter& add(const std::string& name, Mat value, bool trainable = true);

  ModelConfig cfg_;
  std::deque<Parameter> params_;
  std::map<std::string, Parameter*> by_name_;
  Mat codebook_;
  friend class InferenceSession;
};

/// Mean-of-per-sequence-means row weights for the valid rows; EmptyMask if
/// none is valid.
std::vector<double> sequence_mean_weights(const std::vector<std::pair<int, int>>& rows,
                                          const std::vector<bool>& valid);

// Standalone loss functions (plain values, same definitions as the tape ops).
double loss_action(const Mat& logits, const std::vector<int>& targets, const std::vector<bool>& mask);
double loss_mse(const Mat& pred, const Mat& target, const std::vector<bool>& mask);
/// Throws ZeroVector when a valid row has zero norm.
double loss_image(const Mat& pred, const Mat& target, const std::vector<bool>& mask);
/// Σ w_i L_i / Σ w_i.
double loss_total(const std::vector<double>& losses, const std::vector<double>& weights);

/// Incremental inference with a key/value cache; produces the same logits as
/// Model::forward on the same context.
class InferenceSession {
 public:
  InferenceSession(const Model& model, TokenScheme scheme, const TextEncoder& text);

  /// Adds the step-t tokens up to the observation and returns action logits.
  /// `feedback` is the event produced by the previous action, if any.
  Vec observe(const std::string& mission, double rtg, const std::optional<std::string>& feedback,
              const SymbolicView& view);
  /// Appends the action token of the current step.
  void commit(Action action);
  int steps() const { return t_; }
  int tokens() const { return n_; }

 private:
  Vec run_token(const Vec& embedding, int position);

  const Model& m_;
  TokenScheme scheme_;
  const TextEncoder& text_;
  std::vector<Mat> k_cache_, v_cache_;
  int n_ = 0;  // cached tokens
  int t_ = 0;  // completed steps
};

/// Greedy action from logits (lowest index wins ties).
Action argmax_action(const Vec& logits);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
  /// Entries whose ±h step crossed a ReLU kink and were re-measured with a
  /// smaller step (down to h / 1000).
  std::size_t kink_retries = 0;
};

/// Central differences (step h) of the total loss against the analytic
/// gradient for every trainable scalar. Relative error is
/// |a - n| / max(|a|, |n|, floor). The next-image target stays fixed at its
/// unperturbed value, matching the stop-gradient used in training.
GradCheckResult gradient_check(Model& model, const EncodedBatch& batch, const TokenScheme& scheme, double h = 1e-4,
                               double floor = 1e-6);

}  // namespace gridlearn
