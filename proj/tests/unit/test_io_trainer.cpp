#include <filesystem>

#include "gridlearn/io.hpp"
#include "gridlearn/trainer.hpp"
#include "helpers.hpp"

using namespace gridlearn;

namespace {

Dataset small_dataset(std::uint64_t seed = 9) {
  EnvConfig goto6;
  goto6.room_size = 6;
  goto6.allowed_task_types = {TaskType::go_to};
  EnvConfig seq;
  seq.allowed_task_types = {TaskType::sequence};
  DatasetCounts counts;
  counts.optimal = 4;
  counts.suboptimal = {{0.5, 3}, {0.75, 2}};
  return generate_dataset({{"goto6", goto6}, {"seq", seq}}, counts, RewardConfig{}, seed);
}

ModelConfig tiny_model() {
  ModelConfig mc;
  mc.backbone = {1, 2, 1, 16, 32, 256};
  mc.d_text = 16;
  mc.d_img = 8;
  mc.cnn_channels = 4;
  return mc;
}

}  // namespace

TEST_CASE("dataset generation honours the requested counts") {
  const Dataset ds = small_dataset();
  CHECK(ds.trajectories.size() == 2u * 9u);
  int subopt = 0;
  for (const auto& t : ds.trajectories) {
    CHECK(t.success);
    subopt += t.suboptimal;
    if (!t.suboptimal) {
      CHECK(t.length() == t.plan_length);
      for (const auto& s : t.steps) CHECK_FALSE(s.was_random_injection);
    }
  }
  CHECK(subopt == 10);
  CHECK(ds.header.counts.per_task_total() == 9);
  CHECK(small_dataset() == ds);
  CHECK_FALSE(small_dataset(10) == ds);
}

TEST_CASE("even_split spreads the remainder over the first entries") {
  const auto s = even_split(5, {0.5, 0.75});
  REQUIRE(s.size() == 2);
  CHECK(s[0].n == 3);
  CHECK(s[1].n == 2);
}

TEST_CASE("binary dataset round-trip and corruption detection") {
  const Dataset ds = small_dataset();
  const std::string bytes = serialize_dataset(ds);
  CHECK(deserialize_dataset(bytes) == ds);
  CHECK(serialize_dataset(deserialize_dataset(bytes)) == bytes);
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x20;
  CHECK_ERROR_KIND(deserialize_dataset(flipped), ErrorKind::CorruptDataset);
  CHECK_ERROR_KIND(deserialize_dataset(bytes.substr(0, bytes.size() - 9)), ErrorKind::CorruptDataset);
  CHECK_ERROR_KIND(deserialize_dataset("nonsense"), ErrorKind::CorruptDataset);
}

TEST_CASE("jsonl export round-trips losslessly") {
  const Dataset ds = small_dataset();
  CHECK(dataset_from_jsonl(dataset_to_jsonl(ds)) == ds);
}

TEST_CASE("stripping feedback survives serialisation and blocks feedback schemes") {
  Dataset ds = small_dataset();
  ds.strip_feedback();
  CHECK_FALSE(ds.has_feedback());
  const Dataset back = deserialize_dataset(serialize_dataset(ds));
  CHECK_FALSE(back.header.feedback_annotated);
  CHECK_ERROR_KIND(check_scheme_compatible(back.header, TokenScheme{SchemeVariant::lang}), ErrorKind::SchemeMismatch);
  CHECK_ERROR_KIND(check_scheme_compatible(back.header, TokenScheme{SchemeVariant::none, false, true, false, false}),
                   ErrorKind::SchemeMismatch);
  CHECK_NOTHROW(check_scheme_compatible(back.header, TokenScheme{SchemeVariant::scalar}));
}

TEST_CASE("config JSON: round-trip and strictness") {
  EnvConfig c;
  c.room_size = 7;
  c.goal_colors = {Color::yellow};
  c.allowed_task_types = {TaskType::go_to, TaskType::sequence};
  c.door_policy = DoorPolicy::locked;
  const Json j = c;
  CHECK(j.get<EnvConfig>() == c);
  Json bad = j;
  bad["room_sise"] = 7;
  CHECK_ERROR_KIND(bad.get<EnvConfig>(), ErrorKind::ConfigError);
  Json bad_enum = j;
  bad_enum["goal_colors"] = {"magenta"};
  CHECK_ERROR_KIND(bad_enum.get<EnvConfig>(), ErrorKind::ConfigError);

  const auto one = parse_task_configs(j.dump());
  REQUIRE(one.size() == 1);
  CHECK(one[0].config == c);
  const auto many = parse_task_configs(R"({"tasks": [{"name": "a", "config": {"room_size": 6}},
                                                     {"name": "b", "config": {"num_distractors": 1}}]})");
  REQUIRE(many.size() == 2);
  CHECK(many[0].name == "a");
  CHECK(many[0].config.room_size == 6);
  CHECK(many[1].config.num_distractors == 1);
  CHECK_ERROR_KIND(parse_task_configs("{not json"), ErrorKind::ConfigError);
  CHECK_ERROR_KIND(parse_task_configs(R"({"room_size": 3})"), ErrorKind::ConfigError);
}

TEST_CASE("json_hash ignores key order") {
  CHECK(json_hash(Json::parse(R"({"a":1,"b":2})")) == json_hash(Json::parse(R"({"b":2,"a":1})")));
  CHECK(json_hash(Json::parse(R"({"a":1})")) != json_hash(Json::parse(R"({"a":2})")));
}

TEST_CASE("file helpers report IoError") {
  CHECK_ERROR_KIND(read_file("/nonexistent/dir/file.bin"), ErrorKind::IoError);
  const auto dir = std::filesystem::temp_directory_path() / "gridlearn-unit-io";
  std::filesystem::remove_all(dir);
  write_file((dir / "nested" / "x.bin").string(), "abc");
  CHECK(read_file((dir / "nested" / "x.bin").string()) == "abc");
  std::filesystem::remove_all(dir);
}

TEST_CASE("rgb sidecar holds one frame per step") {
  const Dataset ds = small_dataset();
  long long steps = 0;
  for (const auto& t : ds.trajectories) steps += t.length();
  const std::string side = rgb_sidecar(ds, 4);
  const long long frame = 7LL * 4 * 7 * 4 * 3;
  CHECK(static_cast<long long>(side.size()) > steps * frame);
  CHECK(side.compare(0, 8, "GLRGB001") == 0);
}

TEST_CASE("Adam first step moves each coordinate by lr against the gradient sign") {
  std::deque<Parameter> params;
  params.emplace_back("w", Mat{{1.0, -2.0, 0.5}});
  params[0].grad = Mat{{0.3, -4.0, 0.0}};
  Adam adam(AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
  adam.step(params);
  CHECK(params[0].value(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(params[0].value(0, 1) == doctest::Approx(-1.9).epsilon(1e-7));
  CHECK(params[0].value(0, 2) == 0.5);
}

TEST_CASE("Adam clips the global gradient norm") {
  std::deque<Parameter> params;
  params.emplace_back("w", Mat{{0.0, 0.0}});
  params[0].grad = Mat{{3.0, 4.0}};
  Adam adam(AdamConfig{0.1, 0.9, 0.999, 1e-8, 1.0});
  CHECK(adam.step(params) == 5.0);
}

TEST_CASE("training lowers the loss on a small dataset") {
  const Dataset ds = small_dataset();
  Model m(tiny_model(), 0);
  TrainConfig tc;
  tc.scheme = TokenScheme{SchemeVariant::combo, false, true, true, true};
  tc.adam.lr = 3e-3;
  tc.batch_size = 6;
  tc.epochs = 12;
  const TrainSummary s = train(m, ds, tc);
  CHECK(s.updates == 12 * 3);
  CHECK(s.epochs_run == 12);
  CHECK(s.last.total < s.first.total);
  CHECK(s.loss_weights_final.at("feedback") != s.loss_weights_initial.at("feedback"));

  TrainConfig capped = tc;
  capped.max_updates = 5;
  Model m2(tiny_model(), 0);
  CHECK(train(m2, ds, capped).updates == 5);
}

TEST_CASE("checkpoint round-trip preserves parameters and detects corruption") {
  Model m(tiny_model(), 7);
  const TokenScheme sc{SchemeVariant::lang, true, true, false, false};
  const Checkpoint c = make_checkpoint(m, sc, R"({"note":"unit"})");
  const std::string bytes = serialize_checkpoint(c);
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.scheme == sc);
  CHECK(back.model == m.config());
  CHECK(back.manifest_json == c.manifest_json);
  const Model rebuilt = back.build_model();
  for (const auto& p : m.parameters()) CHECK(rebuilt.param(p.name).value == p.value);
  CHECK(back.hash() == c.hash());
  std::string bad = bytes;
  bad[bytes.size() / 3] ^= 1;
  CHECK_ERROR_KIND(deserialize_checkpoint(bad), ErrorKind::CorruptDataset);
  CHECK_ERROR_KIND(load_checkpoint("/nonexistent/model.ckpt"), ErrorKind::IoError);
}
