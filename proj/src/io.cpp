#include "gridlearn/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace gridlearn {

namespace {

template <typename E, typename Parse>
E parse_enum(const Json& j, Parse parse, const char* what) {
  if (!j.is_string()) throw Error(ErrorKind::ConfigError, std::string(what) + " must be a string");
  const auto v = parse(j.get<std::string>());
  if (!v) throw Error(ErrorKind::ConfigError, std::string("unknown ") + what + ": " + j.get<std::string>());
  return *v;
}

template <typename E>
Json enum_list(const std::vector<E>& v) {
  Json a = Json::array();
  for (const E& e : v) a.push_back(std::string(to_string(e)));
  return a;
}

template <typename E, typename Parse>
std::vector<E> parse_enum_list(const Json& j, Parse parse, const char* what) {
  if (!j.is_array()) throw Error(ErrorKind::ConfigError, std::string(what) + " must be a list");
  std::vector<E> out;
  for (const auto& x : j) out.push_back(parse_enum<E>(x, parse, what));
  return out;
}

template <typename T>
void get_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void to_json(Json& j, const StepBudgetRule& r) { j = Json{{"base", r.base}, {"per_subgoal", r.per_subgoal}}; }
void from_json(const Json& j, StepBudgetRule& r) {
  get_if(j, "base", r.base);
  get_if(j, "per_subgoal", r.per_subgoal);
}

void to_json(Json& j, const EnvConfig& c) {
  j = Json{{"room_size", c.room_size},
           {"rooms_rows", c.rooms_rows},
           {"rooms_cols", c.rooms_cols},
           {"door_policy", std::string(to_string(c.door_policy))},
           {"num_distractors", c.num_distractors},
           {"goal_colors", enum_list(c.goal_colors)},
           {"goal_kinds", enum_list(c.goal_kinds)},
           {"distractor_colors", enum_list(c.distractor_colors)},
           {"distractor_kinds", enum_list(c.distractor_kinds)},
           {"task_types", enum_list(c.allowed_task_types)},
           {"connectors", enum_list(c.allowed_connectors)},
           {"location_language", c.location_language},
           {"step_budget", c.step_budget},
           {"seed", c.seed},
           {"view_size", c.view_size}};
}

void from_json(const Json& j, EnvConfig& c) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, "env config must be an object");
  static const char* known[] = {"room_size",         "rooms_rows",       "rooms_cols", "door_policy", "num_distractors",
                                "goal_colors",       "goal_kinds",       "distractor_colors", "distractor_kinds",
                                "task_types",        "connectors",       "location_language", "step_budget",
                                "seed",              "view_size"};
  for (const auto& [k, _] : j.items()) {
    if (std::find(std::begin(known), std::end(known), k) == std::end(known)) {
      throw Error(ErrorKind::ConfigError, "unknown env config key: " + k);
    }
  }
  try {
    get_if(j, "room_size", c.room_size);
    get_if(j, "rooms_rows", c.rooms_rows);
    get_if(j, "rooms_cols", c.rooms_cols);
    if (j.contains("door_policy")) c.door_policy = parse_enum<DoorPolicy>(j["door_policy"], parse_door_policy, "door_policy");
    get_if(j, "num_distractors", c.num_distractors);
    if (j.contains("goal_colors")) c.goal_colors = parse_enum_list<Color>(j["goal_colors"], parse_color, "color");
    if (j.contains("goal_kinds")) c.goal_kinds = parse_enum_list<ObjectKind>(j["goal_kinds"], parse_object_kind, "kind");
    if (j.contains("distractor_colors")) {
      c.distractor_colors = parse_enum_list<Color>(j["distractor_colors"], parse_color, "color");
    }
    if (j.contains("distractor_kinds")) {
      c.distractor_kinds = parse_enum_list<ObjectKind>(j["distractor_kinds"], parse_object_kind, "kind");
    }
    if (j.contains("task_types")) c.allowed_task_types = parse_enum_list<TaskType>(j["task_types"], parse_task_type, "task type");
    if (j.contains("connectors")) c.allowed_connectors = parse_enum_list<Connector>(j["connectors"], parse_connector, "connector");
    get_if(j, "location_language", c.location_language);
    get_if(j, "step_budget", c.step_budget);
    get_if(j, "seed", c.seed);
    get_if(j, "view_size", c.view_size);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed env config: ") + e.what());
  }
}

void to_json(Json& j, const RewardConfig& c) {
  j = Json{{"mode", std::string(to_string(c.mode))}, {"gamma", c.gamma}, {"failure_penalty", c.failure_penalty}};
}
void from_json(const Json& j, RewardConfig& c) {
  if (j.contains("mode")) c.mode = parse_enum<RewardMode>(j["mode"], parse_reward_mode, "reward mode");
  get_if(j, "gamma", c.gamma);
  get_if(j, "failure_penalty", c.failure_penalty);
}

void to_json(Json& j, const NamedConfig& c) { j = Json{{"name", c.name}, {"config", c.config}}; }
void from_json(const Json& j, NamedConfig& c) {
  c.name = j.at("name").get<std::string>();
  c.config = j.at("config").get<EnvConfig>();
}

void to_json(Json& j, const DatasetCounts& c) {
  Json sub = Json::array();
  for (const auto& s : c.suboptimal) sub.push_back({{"p", s.p}, {"n", s.n}});
  j = Json{{"optimal", c.optimal}, {"suboptimal", sub}};
}
void from_json(const Json& j, DatasetCounts& c) {
  c.optimal = j.at("optimal").get<int>();
  c.suboptimal.clear();
  for (const auto& s : j.at("suboptimal")) c.suboptimal.push_back({s.at("p").get<double>(), s.at("n").get<int>()});
}

void to_json(Json& j, const DatasetHeader& h) {
  j = Json{{"format_version", h.format_version},
           {"tasks", h.tasks},
           {"config_hash", json_hash(Json(h.tasks))},
           {"reward_config", h.reward_config},
           {"template_hash", h.template_hash},
           {"template_version", h.template_version},
           {"instruction_template_version", h.instruction_template_version},
           {"counts", h.counts},
           {"generator_seed", h.generator_seed},
           {"discarded", h.discarded},
           {"feedback_annotated", h.feedback_annotated},
           {"rewards_annotated", h.rewards_annotated},
           {"conventions", "x right, y down; north=0 east=1 south=2 west=3, right turn adds 1; "
                           "view row 0 farthest, agent at (V/2, V-1) facing row 0"}};
}
void from_json(const Json& j, DatasetHeader& h) {
  h.format_version = j.at("format_version").get<int>();
  h.tasks = j.at("tasks").get<std::vector<NamedConfig>>();
  h.reward_config = j.at("reward_config").get<RewardConfig>();
  h.template_hash = j.at("template_hash").get<std::string>();
  h.template_version = j.at("template_version").get<int>();
  h.instruction_template_version = j.at("instruction_template_version").get<int>();
  h.counts = j.at("counts").get<DatasetCounts>();
  h.generator_seed = j.at("generator_seed").get<std::uint64_t>();
  h.discarded = j.at("discarded").get<int>();
  h.feedback_annotated = j.at("feedback_annotated").get<bool>();
  h.rewards_annotated = j.at("rewards_annotated").get<bool>();
  if (j.contains("config_hash") && j["config_hash"].get<std::string>() != json_hash(Json(h.tasks))) {
    throw Error(ErrorKind::CorruptDataset, "header config hash does not match its task configs");
  }
}

void to_json(Json& j, const BackboneConfig& c) {
  j = Json{{"n_layers", c.n_layers}, {"n_heads", c.n_heads}, {"n_kv_heads", c.n_kv_heads},
           {"d_model", c.d_model},   {"d_ff", c.d_ff},       {"max_timesteps", c.max_timesteps}};
}
void from_json(const Json& j, BackboneConfig& c) {
  get_if(j, "n_layers", c.n_layers);
  get_if(j, "n_heads", c.n_heads);
  get_if(j, "n_kv_heads", c.n_kv_heads);
  get_if(j, "d_model", c.d_model);
  get_if(j, "d_ff", c.d_ff);
  get_if(j, "max_timesteps", c.max_timesteps);
}

void to_json(Json& j, const ModelConfig& c) {
  j = Json{{"backbone", c.backbone},   {"d_text", c.d_text},       {"d_img", c.d_img},
           {"cnn_channels", c.cnn_channels}, {"view_size", c.view_size}, {"tile_px", c.tile_px},
           {"rope_base", c.rope_base}, {"text_seed", c.text_seed}};
}
void from_json(const Json& j, ModelConfig& c) {
  get_if(j, "backbone", c.backbone);
  get_if(j, "d_text", c.d_text);
  get_if(j, "d_img", c.d_img);
  get_if(j, "cnn_channels", c.cnn_channels);
  get_if(j, "view_size", c.view_size);
  get_if(j, "tile_px", c.tile_px);
  get_if(j, "rope_base", c.rope_base);
  get_if(j, "text_seed", c.text_seed);
}

void to_json(Json& j, const TokenScheme& s) {
  j = Json{{"variant", std::string(to_string(s.variant))},
           {"repeat_mission", s.repeat_mission},
           {"predict_feedback", s.predict_feedback},
           {"predict_reward", s.predict_reward},
           {"predict_image", s.predict_image}};
}
void from_json(const Json& j, TokenScheme& s) {
  s.variant = parse_enum<SchemeVariant>(j.at("variant"), parse_scheme_variant, "scheme");
  get_if(j, "repeat_mission", s.repeat_mission);
  get_if(j, "predict_feedback", s.predict_feedback);
  get_if(j, "predict_reward", s.predict_reward);
  get_if(j, "predict_image", s.predict_image);
}

std::string json_hash(const Json& j) { return to_hex(fnv1a(j.dump())); }

std::vector<NamedConfig> parse_task_configs(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  auto one = [](const Json& x, std::size_t i) {
    NamedConfig nc;
    if (x.contains("config")) {
      nc.name = x.value("name", "task" + std::to_string(i));
      nc.config = x.at("config").get<EnvConfig>();
    } else {
      nc.name = "task" + std::to_string(i);
      nc.config = x.get<EnvConfig>();
    }
    nc.config.validate();
    return nc;
  };
  std::vector<NamedConfig> out;
  try {
    if (j.is_object() && j.contains("tasks")) {
      for (std::size_t i = 0; i < j["tasks"].size(); ++i) out.push_back(one(j["tasks"][i], i));
    } else {
      out.push_back(one(j, 0));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed task config: ") + e.what());
  }
  if (out.empty()) throw Error(ErrorKind::ConfigError, "config lists no tasks");
  return out;
}

// ---------------------------------------------------------------------------

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.append(s);
}

std::string_view ByteReader::raw(std::size_t n) {
  if (n > in_.size() - pos_) throw Error(ErrorKind::CorruptDataset, "unexpected end of data");
  const auto s = in_.substr(pos_, n);
  pos_ += n;
  return s;
}
std::uint8_t ByteReader::u8() { return static_cast<std::uint8_t>(raw(1)[0]); }
std::uint32_t ByteReader::u32() {
  const auto s = raw(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(s[static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}
std::uint64_t ByteReader::u64() {
  const auto s = raw(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(s[static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}
double ByteReader::f64() { return std::bit_cast<double>(u64()); }
std::string ByteReader::str() { return std::string(raw(u32())); }

// ---------------------------------------------------------------------------

namespace {

void corrupt_unless(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::CorruptDataset, what);
}

std::string encode_record(const Trajectory& t) {
  ByteWriter w;
  w.str(t.task);
  w.str(t.mission_text);
  w.u64(t.episode_seed);
  w.f64(t.injection_p);
  w.u8(t.suboptimal);
  w.u8(t.success);
  w.i32(t.num_subgoals);
  w.i32(t.step_budget);
  w.i32(t.plan_length);
  w.u32(static_cast<std::uint32_t>(t.steps.size()));
  for (const auto& s : t.steps) {
    w.u8(static_cast<std::uint8_t>(s.observation.size));
    for (const auto& c : s.observation.cells) {
      w.u8(static_cast<std::uint8_t>(c.type));
      w.u8(static_cast<std::uint8_t>(c.color));
      w.u8(static_cast<std::uint8_t>(c.door_state));
    }
    w.u8(static_cast<std::uint8_t>(s.action));
    w.f64(s.reward);
    w.u8(s.feedback.has_value());
    if (s.feedback) w.str(*s.feedback);
    w.u8(s.feedback_kind ? static_cast<std::uint8_t>(*s.feedback_kind) : 255);
    w.u8(s.had_effect);
    w.i32(s.subgoal_completed.value_or(-1));
    w.u8(s.was_random_injection);
  }
  return w.take();
}

Trajectory decode_record(std::string_view bytes) {
  ByteReader r(bytes);
  Trajectory t;
  t.task = r.str();
  t.mission_text = r.str();
  t.episode_seed = r.u64();
  t.injection_p = r.f64();
  t.suboptimal = r.u8() != 0;
  t.success = r.u8() != 0;
  t.num_subgoals = r.i32();
  t.step_budget = r.i32();
  t.plan_length = r.i32();
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    TrajectoryStep s;
    s.observation.size = r.u8();
    s.observation.cells.resize(static_cast<std::size_t>(s.observation.size * s.observation.size));
    for (auto& c : s.observation.cells) {
      const auto type = r.u8(), color = r.u8(), door = r.u8();
      corrupt_unless(type <= static_cast<int>(CellType::box) && color < kNumColors && door <= 2, "bad view cell");
      c = {static_cast<CellType>(type), static_cast<Color>(color), static_cast<DoorState>(door)};
    }
    const auto action = r.u8();
    corrupt_unless(action < kNumActions, "bad action");
    s.action = static_cast<Action>(action);
    s.reward = r.f64();
    if (r.u8()) s.feedback = r.str();
    const auto kind = r.u8();
    corrupt_unless(kind == 255 || kind <= static_cast<int>(FeedbackKind::affordance), "bad feedback kind");
    if (kind != 255) s.feedback_kind = static_cast<FeedbackKind>(kind);
    s.had_effect = r.u8() != 0;
    const int sub = r.i32();
    if (sub >= 0) s.subgoal_completed = sub;
    s.was_random_injection = r.u8() != 0;
    t.steps.push_back(std::move(s));
  }
  corrupt_unless(r.at_end(), "trailing bytes in record");
  return t;
}

}  // namespace

std::string serialize_dataset(const Dataset& ds) {
  ByteWriter w;
  w.raw(std::string_view(kDatasetMagic, 8));
  w.u32(static_cast<std::uint32_t>(ds.header.format_version));
  w.str(Json(ds.header).dump());
  w.u64(ds.trajectories.size());
  for (const auto& t : ds.trajectories) {
    const std::string rec = encode_record(t);
    w.u64(rec.size());
    w.raw(rec);
  }
  Fnv1a h;
  h.update(w.bytes());
  w.u64(h.digest());
  return w.take();
}

Dataset deserialize_dataset(const std::string& bytes) {
  corrupt_unless(bytes.size() >= 8 + 8 && std::memcmp(bytes.data(), kDatasetMagic, 8) == 0, "not a dataset file");
  Fnv1a h;
  h.update(std::string_view(bytes).substr(0, bytes.size() - 8));
  ByteReader tail(std::string_view(bytes).substr(bytes.size() - 8));
  corrupt_unless(tail.u64() == h.digest(), "content hash mismatch");
  ByteReader r(std::string_view(bytes).substr(8, bytes.size() - 16));
  Dataset ds;
  const std::uint32_t version = r.u32();
  corrupt_unless(version == kDatasetFormatVersion, "unsupported dataset format version " + std::to_string(version));
  try {
    ds.header = Json::parse(r.str()).get<DatasetHeader>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptDataset, std::string("malformed header: ") + e.what());
  }
  const std::uint64_t n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t len = r.u64();
    ds.trajectories.push_back(decode_record(r.raw(len)));
  }
  corrupt_unless(r.at_end(), "trailing bytes after records");
  return ds;
}

void write_dataset(const std::string& path, const Dataset& ds) { write_file(path, serialize_dataset(ds)); }
Dataset read_dataset(const std::string& path) { return deserialize_dataset(read_file(path)); }

std::string dataset_to_jsonl(const Dataset& ds) {
  std::string out = Json(ds.header).dump() + "\n";
  for (const auto& t : ds.trajectories) {
    Json steps = Json::array();
    for (const auto& s : t.steps) {
      std::string cells;
      for (const auto& c : s.observation.cells) {
        cells += static_cast<char>('0' + static_cast<int>(c.type));
        cells += static_cast<char>('0' + static_cast<int>(c.color));
        cells += static_cast<char>('0' + static_cast<int>(c.door_state));
      }
      Json js{{"view_size", s.observation.size},
              {"view", cells},
              {"action", std::string(to_string(s.action))},
              {"reward", s.reward},
              {"had_effect", s.had_effect},
              {"random", s.was_random_injection}};
      js["feedback"] = s.feedback ? Json(*s.feedback) : Json(nullptr);
      js["feedback_kind"] = s.feedback_kind ? Json(std::string(to_string(*s.feedback_kind))) : Json(nullptr);
      js["subgoal_completed"] = s.subgoal_completed ? Json(*s.subgoal_completed) : Json(nullptr);
      steps.push_back(std::move(js));
    }
    Json jt{{"task", t.task},
            {"mission", t.mission_text},
            {"episode_seed", t.episode_seed},
            {"injection_p", t.injection_p},
            {"suboptimal", t.suboptimal},
            {"success", t.success},
            {"num_subgoals", t.num_subgoals},
            {"step_budget", t.step_budget},
            {"plan_length", t.plan_length},
            {"steps", steps}};
    out += jt.dump() + "\n";
  }
  return out;
}

Dataset dataset_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Dataset ds;
  try {
    corrupt_unless(static_cast<bool>(std::getline(in, line)), "empty export");
    ds.header = Json::parse(line).get<DatasetHeader>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const Json jt = Json::parse(line);
      Trajectory t;
      t.task = jt.at("task").get<std::string>();
      t.mission_text = jt.at("mission").get<std::string>();
      t.episode_seed = jt.at("episode_seed").get<std::uint64_t>();
      t.injection_p = jt.at("injection_p").get<double>();
      t.suboptimal = jt.at("suboptimal").get<bool>();
      t.success = jt.at("success").get<bool>();
      t.num_subgoals = jt.at("num_subgoals").get<int>();
      t.step_budget = jt.at("step_budget").get<int>();
      t.plan_length = jt.at("plan_length").get<int>();
      for (const auto& js : jt.at("steps")) {
        TrajectoryStep s;
        s.observation.size = js.at("view_size").get<int>();
        const std::string cells = js.at("view").get<std::string>();
        corrupt_unless(cells.size() == static_cast<std::size_t>(3 * s.observation.size * s.observation.size), "bad view");
        for (std::size_t i = 0; i < cells.size(); i += 3) {
          s.observation.cells.push_back({static_cast<CellType>(cells[i] - '0'), static_cast<Color>(cells[i + 1] - '0'),
                                         static_cast<DoorState>(cells[i + 2] - '0')});
        }
        const auto a = parse_action(js.at("action").get<std::string>());
        corrupt_unless(a.has_value(), "bad action");
        s.action = *a;
        s.reward = js.at("reward").get<double>();
        s.had_effect = js.at("had_effect").get<bool>();
        s.was_random_injection = js.at("random").get<bool>();
        if (!js.at("feedback").is_null()) s.feedback = js["feedback"].get<std::string>();
        if (!js.at("feedback_kind").is_null()) {
          const std::string k = js["feedback_kind"].get<std::string>();
          for (auto fk : {FeedbackKind::task_positive, FeedbackKind::task_negative, FeedbackKind::affordance}) {
            if (to_string(fk) == k) s.feedback_kind = fk;
          }
          corrupt_unless(s.feedback_kind.has_value(), "bad feedback kind");
        }
        if (!js.at("subgoal_completed").is_null()) s.subgoal_completed = js["subgoal_completed"].get<int>();
        t.steps.push_back(std::move(s));
      }
      ds.trajectories.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptDataset, std::string("malformed export: ") + e.what());
  }
  return ds;
}

std::string rgb_sidecar(const Dataset& ds, int tile_px) {
  ByteWriter w;
  w.raw("GLRGB001");
  w.u32(static_cast<std::uint32_t>(tile_px));
  for (const auto& t : ds.trajectories) {
    w.u32(static_cast<std::uint32_t>(t.steps.size()));
    for (const auto& s : t.steps) {
      const RgbImage img = render_view(s.observation, tile_px);
      w.u32(static_cast<std::uint32_t>(img.width));
      w.u32(static_cast<std::uint32_t>(img.height));
      w.raw(std::string_view(reinterpret_cast<const char*>(img.data.data()), img.data.size()));
    }
  }
  return w.take();
}

// ---------------------------------------------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path);
}

bool file_exists(const std::string& path) { return std::filesystem::is_regular_file(path); }

std::string cache_dir() {
  if (const char* env = std::getenv("GRIDLEARN_CACHE_DIR"); env && *env) return env;
  return ".gridlearn-cache";
}

}  // namespace gridlearn
