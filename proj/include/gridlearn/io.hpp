#pragma once

// Serialization: JSON forms of every config, the binary dataset container
// with its line-delimited text export, and small file helpers.
//
// Dataset binary layout (all integers little-endian):
//   "GLDATA01"  u32 format_version  u64 len + header JSON
//   u64 n_records, then per record: u64 len + record bytes
//   u64 FNV-1a of every preceding byte
// Record: str task, str mission, u64 episode_seed, f64 injection_p,
//   u8 suboptimal, u8 success, i32 num_subgoals, i32 step_budget,
//   i32 plan_length, u32 n_steps, then per step:
//   u8 view_size, view_size^2 x (u8 type, u8 color, u8 door_state),
//   u8 action, f64 reward, u8 has_feedback [str feedback], u8 feedback_kind
//   (255 = none), u8 had_effect, i32 subgoal_completed (-1 = none),
//   u8 was_random_injection.
// Strings are u32 length + UTF-8 bytes.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gridlearn/model.hpp"
#include "gridlearn/trajectory.hpp"

namespace gridlearn {

using Json = nlohmann::json;

void to_json(Json& j, const StepBudgetRule& r);
void from_json(const Json& j, StepBudgetRule& r);
void to_json(Json& j, const EnvConfig& c);
void from_json(const Json& j, EnvConfig& c);
void to_json(Json& j, const RewardConfig& c);
void from_json(const Json& j, RewardConfig& c);
void to_json(Json& j, const NamedConfig& c);
void from_json(const Json& j, NamedConfig& c);
void to_json(Json& j, const DatasetCounts& c);
void from_json(const Json& j, DatasetCounts& c);
void to_json(Json& j, const DatasetHeader& h);
void from_json(const Json& j, DatasetHeader& h);
void to_json(Json& j, const BackboneConfig& c);
void from_json(const Json& j, BackboneConfig& c);
void to_json(Json& j, const ModelConfig& c);
void from_json(const Json& j, ModelConfig& c);
void to_json(Json& j, const TokenScheme& s);
void from_json(const Json& j, TokenScheme& s);

/// FNV-1a hex of the canonical (sorted-key) dump.
std::string json_hash(const Json& j);

/// Parses a task file: one EnvConfig object, {"name", "config"}, or
/// {"tasks": [...]} of either. ConfigError on malformed input.
std::vector<NamedConfig> parse_task_configs(const std::string& text);

// -- byte streams ------------------------------------------------------------

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v);
  void str(std::string_view s);
  void raw(std::string_view s) { out_.append(s); }
  const std::string& bytes() const { return out_; }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

/// Bounds-checked reader; throws CorruptDataset on overrun.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : in_(bytes) {}
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64();
  std::string str();
  std::string_view raw(std::size_t n);
  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

// -- datasets ---------------------------------------------------------------

inline constexpr char kDatasetMagic[8] = {'G', 'L', 'D', 'A', 'T', 'A', '0', '1'};

std::string serialize_dataset(const Dataset& ds);
/// CorruptDataset on bad magic, hash mismatch, malformed records or a header
/// whose config hash does not match its task configs.
Dataset deserialize_dataset(const std::string& bytes);
void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

/// Lossless text export: header JSON on the first line, one trajectory per line.
std::string dataset_to_jsonl(const Dataset& ds);
Dataset dataset_from_jsonl(const std::string& text);

/// Rendered RGB frames of every step ("GLRGB001", u32 tile_px, then per
/// trajectory u32 n_steps and per frame u32 w, u32 h, w*h*3 bytes).
std::string rgb_sidecar(const Dataset& ds, int tile_px);

// -- files ------------------------------------------------------------------

/// IoError when the file cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);
bool file_exists(const std::string& path);
/// $GRIDLEARN_CACHE_DIR, else ".gridlearn-cache" under the working directory.
std::string cache_dir();

}  // namespace gridlearn
