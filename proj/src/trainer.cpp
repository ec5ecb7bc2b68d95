#include "gridlearn/trainer.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>

#include "gridlearn/io.hpp"

namespace gridlearn {

double Adam::step(std::deque<Parameter>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (p.trainable) sq += p.grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  const double scale = cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm ? cfg_.clip_norm / norm : 1.0;
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& p : params) {
    if (!p.trainable) continue;
    auto [it, fresh] = moments_.try_emplace(p.name);
    auto& [m, v] = it->second;
    if (fresh) {
      m = Mat::Zero(p.value.rows(), p.value.cols());
      v = Mat::Zero(p.value.rows(), p.value.cols());
    }
    const Mat g = p.grad * scale;
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    p.value.array() -= cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
  }
  return norm;
}

void check_scheme_compatible(const DatasetHeader& header, const TokenScheme& scheme) {
  if (scheme.needs_feedback() && !header.feedback_annotated) {
    throw Error(ErrorKind::SchemeMismatch, "scheme " + scheme.describe() +
                                               " reads or predicts language feedback, but the dataset has no feedback "
                                               "annotations; regenerate it without --no-feedback or use --scheme none/scalar "
                                               "without feedback prediction");
  }
  if (scheme.needs_rewards() && !header.rewards_annotated) {
    throw Error(ErrorKind::SchemeMismatch, "scheme " + scheme.describe() +
                                               " needs reward annotations, which the dataset lacks; use --scheme none/lang "
                                               "without reward prediction");
  }
}

std::map<std::string, double> loss_weights(const Model& model) {
  std::map<std::string, double> out;
  for (const char* k : {"feedback", "reward", "image"}) {
    const double u = model.param(std::string("loss.u_") + k).value(0, 0);
    out[k] = u > 30 ? u : std::log1p(std::exp(u));
  }
  return out;
}

TrainSummary train(Model& model, const Dataset& data, const TrainConfig& cfg) {
  check_scheme_compatible(data.header, cfg.scheme);
  if (data.trajectories.empty()) throw Error(ErrorKind::DomainError, "dataset is empty");
  if (cfg.batch_size < 1 || cfg.epochs < 1) throw Error(ErrorKind::ConfigError, "batch_size and epochs must be >= 1");
  const TextEncoder text(model.config().d_text, model.config().text_seed);
  Adam adam(cfg.adam);
  TrainSummary summary;
  summary.loss_weights_initial = loss_weights(model);

  const std::size_t n = data.trajectories.size();
  const auto per_epoch = static_cast<long long>((n + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                                static_cast<std::size_t>(cfg.batch_size));
  long long planned = per_epoch * cfg.epochs;
  if (cfg.max_updates > 0) planned = std::min<long long>(planned, cfg.max_updates);
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, 0x7a1, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);
    double epoch_loss = 0.0;
    int epoch_batches = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      if (cfg.max_updates > 0 && summary.updates >= cfg.max_updates) break;
      std::vector<EncodedSequence> seqs;
      for (std::size_t k = start; k < std::min(n, start + static_cast<std::size_t>(cfg.batch_size)); ++k) {
        seqs.push_back(assemble_sequence(data.trajectories[order[k]], cfg.scheme, text, data.header.feedback_annotated,
                                         data.header.rewards_annotated));
      }
      const EncodedBatch batch = pad_batch(std::move(seqs));
      model.zero_grad();
      Tape tape;
      const ForwardOutput out = model.forward(tape, batch);
      LossTerms terms;
      tape.backward(model.loss(tape, batch, out, cfg.scheme, &terms));
      if (cfg.cosine_decay) {
        adam.set_lr(cfg.adam.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(summary.updates) /
                                                        static_cast<double>(planned))));
      }
      adam.step(model.parameters());
      if (summary.updates == 0) summary.first = terms;
      summary.last = terms;
      ++summary.updates;
      epoch_loss += terms.total;
      ++epoch_batches;
      if (cfg.on_update) cfg.on_update(summary.updates, terms);
    }
    if (epoch_batches == 0) break;
    summary.epochs_run = epoch + 1;
    summary.mean_loss_last_epoch = epoch_loss / epoch_batches;
  }
  summary.loss_weights_final = loss_weights(model);
  return summary;
}

// ---------------------------------------------------------------------------

Checkpoint make_checkpoint(const Model& model, const TokenScheme& scheme, std::string manifest_json) {
  Checkpoint c;
  c.model = model.config();
  c.scheme = scheme;
  c.manifest_json = std::move(manifest_json);
  for (const auto& p : model.parameters()) c.tensors.emplace_back(p.name, p.value);
  return c;
}

Model Checkpoint::build_model() const {
  Model m(model, 0);
  if (tensors.size() != m.parameters().size()) throw Error(ErrorKind::ConfigError, "checkpoint tensor count differs from config");
  for (const auto& [name, value] : tensors) {
    Parameter& p = m.param(name);
    if (p.value.rows() != value.rows() || p.value.cols() != value.cols()) {
      throw Error(ErrorKind::ConfigError, "checkpoint tensor " + name + " has the wrong shape");
    }
    p.value = value;
  }
  return m;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.raw(std::string_view(kCheckpointMagic, 8));
  w.u32(kCheckpointVersion);
  w.str(Json{{"model", ckpt.model}, {"scheme", ckpt.scheme}}.dump());
  w.str(ckpt.manifest_json);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, value] : ckpt.tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(value.rows()));
    w.u32(static_cast<std::uint32_t>(value.cols()));
    for (Eigen::Index i = 0; i < value.size(); ++i) w.f64(value.data()[i]);
  }
  Fnv1a h;
  h.update(w.bytes());
  w.u64(h.digest());
  return w.take();
}

std::string Checkpoint::hash() const {
  const std::string bytes = serialize_checkpoint(*this);
  return to_hex(fnv1a(bytes));
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw Error(ErrorKind::CorruptDataset, "not a checkpoint file");
  }
  Fnv1a h;
  h.update(std::string_view(bytes).substr(0, bytes.size() - 8));
  if (ByteReader(std::string_view(bytes).substr(bytes.size() - 8)).u64() != h.digest()) {
    throw Error(ErrorKind::CorruptDataset, "checkpoint hash mismatch");
  }
  ByteReader r(std::string_view(bytes).substr(8, bytes.size() - 16));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw Error(ErrorKind::CorruptDataset, "unsupported checkpoint version");
  Checkpoint c;
  try {
    const Json cfg = Json::parse(r.str());
    c.model = cfg.at("model").get<ModelConfig>();
    c.scheme = cfg.at("scheme").get<TokenScheme>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptDataset, std::string("malformed checkpoint config: ") + e.what());
  }
  c.manifest_json = r.str();
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    const std::uint32_t rows = r.u32(), cols = r.u32();
    Mat value(rows, cols);
    for (Eigen::Index k = 0; k < value.size(); ++k) value.data()[k] = r.f64();
    c.tensors.emplace_back(std::move(name), std::move(value));
  }
  if (!r.at_end()) throw Error(ErrorKind::CorruptDataset, "trailing bytes in checkpoint");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_file(path, serialize_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace gridlearn
