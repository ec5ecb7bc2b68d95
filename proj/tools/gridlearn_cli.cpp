// gridlearn command-line entry point: gen-data, train, eval, inspect, presets.
// Exit codes: 0 success, 2 configuration error, 3 data error.

#include <png.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "gridlearn/eval.hpp"
#include "gridlearn/io.hpp"
#include "gridlearn/planner.hpp"
#include "gridlearn/trainer.hpp"

using namespace gridlearn;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::CorruptDataset:
    case ErrorKind::IoError:
    case ErrorKind::MissingAnnotation: return kExitData;
    default: return kExitConfig;
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<SuboptimalCount> parse_suboptimal(const std::string& list) {
  std::vector<SuboptimalCount> out;
  for (const auto& part : split(list, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) throw Error(ErrorKind::ConfigError, "--suboptimal entries look like p:n, got " + part);
    try {
      out.push_back({std::stod(part.substr(0, colon)), std::stoi(part.substr(colon + 1))});
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConfigError, "cannot parse --suboptimal entry " + part);
    }
  }
  return out;
}

TokenScheme parse_scheme(const std::string& variant, const std::string& predict, bool repeat_mission) {
  TokenScheme s;
  const auto v = parse_scheme_variant(variant);
  if (!v) throw Error(ErrorKind::ConfigError, "--scheme must be none, scalar, lang or combo");
  s.variant = *v;
  s.repeat_mission = repeat_mission;
  for (const auto& p : split(predict, ',')) {
    if (p == "feedback") {
      s.predict_feedback = true;
    } else if (p == "reward") {
      s.predict_reward = true;
    } else if (p == "image") {
      s.predict_image = true;
    } else {
      throw Error(ErrorKind::ConfigError, "--predict accepts feedback, reward, image; got " + p);
    }
  }
  return s;
}

void write_png(const std::string& path, const RgbImage& img) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw Error(ErrorKind::IoError, "cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error(ErrorKind::IoError, "libpng failed writing " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(img.data.data() + static_cast<std::size_t>(y * img.width * 3)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

std::vector<NamedConfig> load_tasks(const std::string& config_path, const std::string& preset, const std::string& split_name) {
  if (!config_path.empty() && !preset.empty()) throw Error(ErrorKind::ConfigError, "give either --config or --preset");
  if (!config_path.empty()) {
    std::string text;
    try {
      text = read_file(config_path);
    } catch (const Error&) {
      throw Error(ErrorKind::ConfigError, "cannot read config file " + config_path);
    }
    return parse_task_configs(text);
  }
  if (preset.empty()) throw Error(ErrorKind::ConfigError, "gen-data needs --config FILE or --preset NAME");
  const Suite s = suite_preset(preset);
  if (split_name == "train") return s.train;
  if (split_name == "eval") return s.eval;
  throw Error(ErrorKind::ConfigError, "--split must be train or eval");
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string config, preset, split = "train", out, suboptimal, jsonl, reward_mode = "dense_plus_penalty";
  int optimal = 0;
  std::uint64_t seed = 0;
  double gamma = 0.9, penalty = 0.01;
  bool no_feedback = false, rgb = false, use_cache = false;
};

int run_gen(const GenArgs& a) {
  const auto tasks = load_tasks(a.config, a.preset, a.split);
  DatasetCounts counts;
  counts.optimal = a.optimal;
  counts.suboptimal = parse_suboptimal(a.suboptimal);
  RewardConfig rewards;
  const auto mode = parse_reward_mode(a.reward_mode);
  if (!mode) throw Error(ErrorKind::ConfigError, "unknown --reward-mode " + a.reward_mode);
  rewards.mode = *mode;
  rewards.gamma = a.gamma;
  rewards.failure_penalty = a.penalty;
  rewards.validate();

  const Json key{{"tasks", tasks},      {"counts", counts},       {"rewards", rewards},
                 {"seed", a.seed},      {"no_feedback", a.no_feedback}, {"format", kDatasetFormatVersion},
                 {"templates", TemplateBank::builtin().hash}};
  const bool cache = a.use_cache || std::getenv("GRIDLEARN_CACHE_DIR");
  const std::string cached = cache_dir() + "/datasets/" + json_hash(key) + ".gld";
  Dataset ds;
  std::string bytes;
  if (cache && file_exists(cached)) {
    bytes = read_file(cached);
    ds = deserialize_dataset(bytes);
    std::cout << "cache hit: " << cached << "\n";
  } else {
    ds = generate_dataset(tasks, counts, rewards, a.seed);
    if (a.no_feedback) ds.strip_feedback();
    bytes = serialize_dataset(ds);
    if (cache) write_file(cached, bytes);
  }
  write_file(a.out, bytes);
  if (!a.jsonl.empty()) write_file(a.jsonl, dataset_to_jsonl(ds));
  if (a.rgb) write_file(a.out + ".rgb", rgb_sidecar(ds, kDefaultTilePx));

  std::map<std::string, int> per_task;
  long long steps = 0;
  for (const auto& t : ds.trajectories) {
    ++per_task[t.task];
    steps += t.length();
  }
  std::cout << "wrote " << a.out << " (" << ds.trajectories.size() << " trajectories, " << steps << " steps, hash "
            << to_hex(fnv1a(bytes)) << ")\n";
  for (const auto& nc : tasks) std::cout << "  task " << nc.name << ": " << per_task[nc.name] << "\n";
  std::cout << "  discarded rollouts: " << ds.header.discarded << "\n";
  return 0;
}

struct TrainArgs {
  std::string data, scheme = "none", predict, size = "desk", out;
  bool repeat_mission = false, cosine = false;
  std::uint64_t seed = 0;
  int epochs = 10, batch_size = 16, max_updates = 0, log_every = 0;
  double lr = 3e-4, clip = 1.0;
};

int run_train(const TrainArgs& a) {
  const TokenScheme scheme = parse_scheme(a.scheme, a.predict, a.repeat_mission);
  const std::string bytes = read_file(a.data);
  const Dataset ds = deserialize_dataset(bytes);
  check_scheme_compatible(ds.header, scheme);
  ModelConfig mc = model_preset(a.size);
  Model model(mc, a.seed);
  TrainConfig tc;
  tc.scheme = scheme;
  tc.adam.lr = a.lr;
  tc.adam.clip_norm = a.clip;
  tc.batch_size = a.batch_size;
  tc.epochs = a.epochs;
  tc.max_updates = a.max_updates;
  tc.cosine_decay = a.cosine;
  tc.seed = a.seed;
  if (a.log_every > 0) {
    tc.on_update = [&](long long u, const LossTerms& t) {
      if (u % a.log_every == 0) std::cout << "update " << u << " loss " << t.total << "\n";
    };
  }
  const TrainSummary s = train(model, ds, tc);
  auto terms = [](const LossTerms& t) {
    Json j{{"total", t.total}};
    if (t.action) j["action"] = *t.action;
    if (t.feedback) j["feedback"] = *t.feedback;
    if (t.reward) j["reward"] = *t.reward;
    if (t.image) j["image"] = *t.image;
    return j;
  };
  const TextEncoder text(mc.d_text, mc.text_seed);
  Json manifest{{"dataset", {{"path", std::filesystem::path(a.data).filename().string()},
                             {"hash", to_hex(fnv1a(bytes))},
                             {"config_hash", json_hash(Json(ds.header.tasks))},
                             {"template_hash", ds.header.template_hash},
                             {"generator_seed", ds.header.generator_seed},
                             {"trajectories", ds.trajectories.size()}}},
                {"model", mc},
                {"size", a.size},
                {"parameters", model.parameter_count()},
                {"scheme", scheme},
                {"text_encoder", text.version()},
                {"hyperparameters", {{"lr", a.lr}, {"clip_norm", a.clip}, {"batch_size", a.batch_size},
                                     {"epochs", a.epochs}, {"max_updates", a.max_updates},
                                     {"cosine_decay", a.cosine}, {"seed", a.seed},
                                     {"beta1", tc.adam.beta1}, {"beta2", tc.adam.beta2}, {"eps", tc.adam.eps}}},
                {"updates", s.updates},
                {"epochs_run", s.epochs_run},
                {"loss_first", terms(s.first)},
                {"loss_last", terms(s.last)},
                {"mean_loss_last_epoch", s.mean_loss_last_epoch},
                {"loss_weights_initial", s.loss_weights_initial},
                {"loss_weights_final", s.loss_weights_final}};
  const Checkpoint ckpt = make_checkpoint(model, scheme, manifest.dump());
  const std::string ckpt_bytes = serialize_checkpoint(ckpt);
  write_file(a.out, ckpt_bytes);
  manifest["checkpoint_hash"] = to_hex(fnv1a(ckpt_bytes));
  write_file(a.out + ".manifest.json", manifest.dump(2) + "\n");
  std::cout << "trained " << s.updates << " updates over " << s.epochs_run << " epochs; final loss "
            << s.last.total << "\nwrote " << a.out << " (hash " << manifest["checkpoint_hash"].get<std::string>()
            << ")\n";
  const std::map<std::string, bool> active{
      {"feedback", scheme.predict_feedback}, {"reward", scheme.predict_reward}, {"image", scheme.predict_image}};
  for (const auto& [k, w] : s.loss_weights_final) {
    if (active.at(k)) std::cout << "  loss weight " << k << ": " << s.loss_weights_initial.at(k) << " -> " << w << "\n";
  }
  return 0;
}

struct EvalArgs {
  std::vector<std::string> ckpts;
  std::string suite = "goto6", split = "eval", mode = "none", policy = "model", out;
  int missions = 128, seeds = 5;
  double zeta = 0.25, q = 0.2, target_return = 1.0;
  std::uint64_t base_seed = 0;
};

int run_eval(const EvalArgs& a) {
  EvalOptions opt;
  opt.n_missions = a.missions;
  opt.n_seeds = a.seeds;
  opt.base_seed = a.base_seed;
  const auto kind = parse_perturbation_kind(a.mode);
  if (!kind) throw Error(ErrorKind::ConfigError, "unknown --mode " + a.mode);
  opt.mode = {*kind, a.zeta, a.q};
  const Suite suite = suite_preset(a.suite);
  const auto& tasks = a.split == "train" ? suite.train : suite.eval;
  if (a.split != "train" && a.split != "eval") throw Error(ErrorKind::ConfigError, "--split must be train or eval");

  std::vector<std::pair<Model, TokenScheme>> models;
  std::vector<std::string> hashes;
  if (a.policy == "model") {
    if (a.ckpts.empty()) throw Error(ErrorKind::ConfigError, "--policy model needs --ckpt");
    for (const auto& path : a.ckpts) {
      const std::string bytes = read_file(path);
      const Checkpoint c = deserialize_checkpoint(bytes);
      models.emplace_back(c.build_model(), c.scheme);
      hashes.push_back(to_hex(fnv1a(bytes)));
    }
  } else if (a.policy != "planner" && a.policy != "random") {
    throw Error(ErrorKind::ConfigError, "--policy must be model, planner or random");
  }
  auto make = [&](int s) -> std::unique_ptr<Policy> {
    if (a.policy == "planner") return std::make_unique<PlannerPolicy>();
    if (a.policy == "random") return std::make_unique<RandomPolicy>(derive_seed(a.base_seed, 0x4a4d, s));
    const auto& [m, sc] = models[static_cast<std::size_t>(s) % models.size()];
    return std::make_unique<ModelPolicy>(m, sc, a.target_return);
  };
  const EvalReport report = evaluate(make, tasks, opt);
  std::ostringstream text;
  text << "# suite=" << a.suite << " split=" << a.split << " mode=" << opt.mode.describe() << " policy=" << a.policy
       << " target_return=" << a.target_return;
  for (const auto& h : hashes) text << " ckpt=" << h;
  text << "\n" << report.to_text();
  std::cout << text.str();
  if (!a.out.empty()) {
    write_file(a.out, text.str());
    write_file(a.out + ".csv", report.to_csv());
  }
  return 0;
}

struct InspectArgs {
  std::string data, render, export_jsonl;
  int episode = -1;
};

int run_inspect(const InspectArgs& a) {
  const std::string bytes = read_file(a.data);
  const Dataset ds = deserialize_dataset(bytes);
  const auto& h = ds.header;
  long long steps = 0;
  for (const auto& t : ds.trajectories) steps += t.length();
  std::cout << "format_version " << h.format_version << "\n"
            << "hash " << to_hex(fnv1a(bytes)) << "\n"
            << "config_hash " << json_hash(Json(h.tasks)) << "\n"
            << "template " << h.template_hash << " v" << h.template_version << "\n"
            << "rewards " << Json(h.reward_config).dump() << "\n"
            << "generator_seed " << h.generator_seed << "\n"
            << "counts " << Json(h.counts).dump() << " per task\n"
            << "annotations feedback=" << h.feedback_annotated << " rewards=" << h.rewards_annotated << "\n"
            << "discarded " << h.discarded << "\n";
  for (const auto& t : h.tasks) std::cout << "task " << t.name << " " << Json(t.config).dump() << "\n";
  std::cout << "OK " << ds.trajectories.size() << " trajectories, " << steps << " steps\n";
  if (!a.export_jsonl.empty()) write_file(a.export_jsonl, dataset_to_jsonl(ds));
  if (a.episode < 0) return 0;

  if (a.episode >= static_cast<int>(ds.trajectories.size())) throw Error(ErrorKind::ConfigError, "--episode out of range");
  const Trajectory& traj = ds.trajectories[static_cast<std::size_t>(a.episode)];
  const EnvConfig* config = nullptr;
  for (const auto& t : h.tasks) {
    if (t.name == traj.task) config = &t.config;
  }
  if (!config) throw Error(ErrorKind::CorruptDataset, "trajectory task " + traj.task + " not in header");
  Env env(*config, traj.episode_seed, h.reward_config, EnvOptions{false, kDefaultTilePx});
  const ResetResult start = env.reset();
  auto mismatch = [&](int t, const std::string& what) {
    throw Error(ErrorKind::CorruptDataset, "replay of episode " + std::to_string(a.episode) + " diverges at step " +
                                               std::to_string(t) + ": " + what);
  };
  if (start.mission != traj.mission_text) mismatch(0, "mission text");
  std::cout << "\nepisode " << a.episode << " task " << traj.task << " seed " << traj.episode_seed
            << (traj.suboptimal ? " suboptimal p=" + std::to_string(traj.injection_p) : " optimal") << "\nmission: "
            << traj.mission_text << "\n";
  if (!a.render.empty()) std::filesystem::create_directories(a.render);
  SymbolicView view = start.observation.view;
  for (int t = 0; t < traj.length(); ++t) {
    const TrajectoryStep& s = traj.steps[static_cast<std::size_t>(t)];
    if (!(view == s.observation)) mismatch(t, "observation");
    std::cout << "\nstep " << t << "\n" << ascii_grid(env.state());
    if (!a.render.empty()) {
      char name[64];
      std::snprintf(name, sizeof name, "/episode%04d_step%04d.png", a.episode, t);
      write_png(a.render + name, render_view(s.observation, kDefaultTilePx));
    }
    const StepResult r = env.step(s.action);
    if (r.reward != s.reward) mismatch(t, "reward");
    if (h.feedback_annotated) {
      const std::optional<std::string> fb = r.info.feedback ? std::optional(r.info.feedback->text) : std::nullopt;
      if (fb != s.feedback) mismatch(t, "feedback");
    }
    std::cout << "action " << to_string(s.action) << (s.was_random_injection ? " (random)" : "") << "  reward "
              << s.reward << "  feedback " << (s.feedback ? "\"" + *s.feedback + "\"" : "-") << "\n";
    view = r.observation.view;
  }
  if (env.success() != traj.success) mismatch(traj.length(), "success flag");
  std::cout << "\nreplay OK: " << traj.length() << " steps, stored rewards reproduced exactly\n";
  return 0;
}

int run_presets() {
  std::cout << "suites:\n";
  for (const auto& n : suite_names()) {
    const Suite s = suite_preset(n);
    std::cout << "  " << n << ": " << s.description << "\n";
    for (const auto& t : s.train) std::cout << "    train " << t.name << " " << Json(t.config).dump() << "\n";
    for (const auto& t : s.eval) std::cout << "    eval  " << t.name << " " << Json(t.config).dump() << "\n";
  }
  std::cout << "model sizes:\n";
  for (const auto& n : model_preset_names()) {
    std::cout << "  " << n << ": " << Model(model_preset(n), 0).parameter_count() << " parameters "
              << Json(model_preset(n)).dump() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridlearn: language-feedback imitation learning in procedurally generated gridworlds"};
  app.require_subcommand(1);

  GenArgs g;
  auto* gen = app.add_subcommand("gen-data", "Generate a trajectory dataset");
  gen->add_option("--config", g.config, "Task config JSON file");
  gen->add_option("--preset", g.preset, "Suite preset name instead of --config");
  gen->add_option("--split", g.split, "Preset split: train or eval")->capture_default_str();
  gen->add_option("--optimal", g.optimal, "Optimal trajectories per task")->capture_default_str();
  gen->add_option("--suboptimal", g.suboptimal, "Suboptimal counts per task as p:n[,p:n]");
  gen->add_option("--out", g.out, "Output dataset file")->required();
  gen->add_option("--seed", g.seed, "Generator seed")->capture_default_str();
  gen->add_option("--reward-mode", g.reward_mode, "binary, binary_plus_penalty or dense_plus_penalty")->capture_default_str();
  gen->add_option("--gamma", g.gamma, "Reward decay factor")->capture_default_str();
  gen->add_option("--penalty", g.penalty, "Penalty for steps without effect")->capture_default_str();
  gen->add_flag("--no-feedback", g.no_feedback, "Strip language feedback annotations");
  gen->add_option("--jsonl", g.jsonl, "Also write the line-delimited text export");
  gen->add_flag("--rgb", g.rgb, "Also write rendered frames to OUT.rgb");
  gen->add_flag("--cache", g.use_cache, "Reuse datasets from the cache directory (also on when GRIDLEARN_CACHE_DIR is set)");

  TrainArgs t;
  auto* tr = app.add_subcommand("train", "Train a policy on a dataset");
  tr->add_option("--data", t.data, "Dataset file")->required();
  tr->add_option("--scheme", t.scheme, "none, scalar, lang or combo")->capture_default_str();
  tr->add_option("--predict", t.predict, "Comma list of auxiliary predictions: feedback, reward, image");
  tr->add_flag("--repeat-mission", t.repeat_mission, "Unmask the mission token at every step");
  tr->add_option("--size", t.size, "desk, tiny, small or base")->capture_default_str();
  tr->add_option("--seed", t.seed, "Model and batching seed")->capture_default_str();
  tr->add_option("--out", t.out, "Checkpoint file")->required();
  tr->add_option("--epochs", t.epochs)->capture_default_str();
  tr->add_option("--batch-size", t.batch_size)->capture_default_str();
  tr->add_option("--max-updates", t.max_updates, "Stop after this many updates (0: no limit)")->capture_default_str();
  tr->add_option("--lr", t.lr)->capture_default_str();
  tr->add_flag("--cosine", t.cosine, "Cosine-decay the learning rate to zero over the planned updates");
  tr->add_option("--clip", t.clip, "Global gradient norm clip (<= 0 disables)")->capture_default_str();
  tr->add_option("--log-every", t.log_every, "Print the loss every N updates");

  EvalArgs e;
  auto* ev = app.add_subcommand("eval", "Evaluate a policy on a suite");
  ev->add_option("--ckpt", e.ckpts, "Checkpoint file(s); seed index s uses checkpoint s mod count")->delimiter(',');
  ev->add_option("--suite", e.suite, "Suite preset")->capture_default_str();
  ev->add_option("--split", e.split, "train or eval tasks of the suite")->capture_default_str();
  ev->add_option("--mode", e.mode,
                 "none, sticky, adversarial_random_steps, adversarial_replace_lorem, adversarial_replace_english, "
                 "missing_feedback or strict")
      ->capture_default_str();
  ev->add_option("--zeta", e.zeta, "Stickiness for --mode sticky")->capture_default_str();
  ev->add_option("--q", e.q, "Injection rate for adversarial_random_steps")->capture_default_str();
  ev->add_option("--missions", e.missions)->capture_default_str();
  ev->add_option("--seeds", e.seeds)->capture_default_str();
  ev->add_option("--base-seed", e.base_seed)->capture_default_str();
  ev->add_option("--policy", e.policy, "model, planner or random")->capture_default_str();
  ev->add_option("--target-return", e.target_return, "Initial return-to-go")->capture_default_str();
  ev->add_option("--out", e.out, "Report file (a .csv table is written alongside)");

  InspectArgs in;
  auto* ins = app.add_subcommand("inspect", "Validate a dataset and optionally replay an episode");
  ins->add_option("--data", in.data, "Dataset file")->required();
  ins->add_option("--episode", in.episode, "Replay this trajectory index");
  ins->add_option("--render", in.render, "Directory for PNG frames of the replayed episode");
  ins->add_option("--export-jsonl", in.export_jsonl, "Write the line-delimited text export");

  auto* pre = app.add_subcommand("presets", "List suite and model size presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitConfig;
  }
  try {
    if (gen->parsed()) return run_gen(g);
    if (tr->parsed()) return run_train(t);
    if (ev->parsed()) return run_eval(e);
    if (ins->parsed()) return run_inspect(in);
    if (pre->parsed()) return run_presets();
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_code_for(err.kind());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
