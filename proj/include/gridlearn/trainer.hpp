#pragma once

// Offline imitation training (Adam, global-norm clipping, deterministic
// batching) and the checkpoint container.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gridlearn/model.hpp"
#include "gridlearn/trajectory.hpp"

namespace gridlearn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  /// One update of every trainable parameter from its accumulated grad.
  /// Returns the pre-clipping global gradient norm.
  double step(std::deque<Parameter>& params);
  long long steps() const { return t_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  long long t_ = 0;
  std::map<std::string, std::pair<Mat, Mat>> moments_;
};

struct TrainConfig {
  TokenScheme scheme;
  AdamConfig adam;
  int batch_size = 16;
  int epochs = 1;
  int max_updates = 0;  // 0: run all epochs
  std::uint64_t seed = 0;
  /// Cosine decay of the learning rate from adam.lr to 0 over the planned
  /// number of updates; constant when false.
  bool cosine_decay = false;
  /// Invoked after every update with (update index, loss terms).
  std::function<void(long long, const LossTerms&)> on_update;
};

struct TrainSummary {
  long long updates = 0;
  int epochs_run = 0;
  LossTerms first, last;
  double mean_loss_last_epoch = 0.0;
  std::map<std::string, double> loss_weights_initial, loss_weights_final;
};

/// Fails with SchemeMismatch when the scheme needs annotations the dataset
/// lacks (feedback stripped, or rewards absent).
void check_scheme_compatible(const DatasetHeader& header, const TokenScheme& scheme);

/// Trains in place. Batches are drawn from a per-epoch permutation seeded by
/// (seed, epoch); the run is bit-reproducible for fixed inputs.
TrainSummary train(Model& model, const Dataset& data, const TrainConfig& cfg);

/// Softplus-transformed loss weights currently held by the model.
std::map<std::string, double> loss_weights(const Model& model);

// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'G', 'L', 'C', 'K', 'P', 'T', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  TokenScheme scheme;
  std::string manifest_json;  // free-form run record (hashes, hyperparameters)
  std::vector<std::pair<std::string, Mat>> tensors;

  /// Content hash of the serialized bytes (hex).
  std::string hash() const;
  /// Rebuilds the model; ConfigError if tensors and config disagree.
  Model build_model() const;
};

Checkpoint make_checkpoint(const Model& model, const TokenScheme& scheme, std::string manifest_json);
std::string serialize_checkpoint(const Checkpoint& ckpt);
/// CorruptDataset on bad magic, truncated body or hash mismatch.
Checkpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
/// IoError if the file cannot be read.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gridlearn
