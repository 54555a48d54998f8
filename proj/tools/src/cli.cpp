#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "dixon/eval/inference.hpp"
#include "dixon/eval/metrics.hpp"
#include "dixon/eval/swapmap.hpp"
#include "dixon/parallel.hpp"
#include "dixon/sim/corpus.hpp"
#include "dixon/train/trainer.hpp"
#include "dixon/volume_io.hpp"
#include "json.hpp"

namespace dixon::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "0.3.0";

// One RunManifest per command, written next to the outputs.
class RunManifest {
 public:
  explicit RunManifest(std::string command) : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["tool_version"] = kToolVersion;
    doc_["threads"] = configured_threads();
    doc_["config"] = ordered_json::object();
    doc_["inputs"] = ordered_json::object();
    doc_["outputs"] = ordered_json::object();
  }

  void seed(std::uint64_t s) { doc_["seed"] = s; }
  void config(const std::string& key, ordered_json value) { doc_["config"][key] = std::move(value); }
  void input(const std::string& key, const fs::path& p) { doc_["inputs"][key] = p.generic_string(); }
  void output(const std::string& key, const fs::path& p) { doc_["outputs"][key] = p.generic_string(); }
  void extra(const std::string& key, ordered_json value) { doc_[key] = std::move(value); }

  fs::path write(const fs::path& dir) {
    doc_["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const fs::path path = dir / "run_manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
    out << doc_.dump(2) << "\n";
    return path;
  }

 private:
  std::chrono::steady_clock::time_point start_;
  ordered_json doc_;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create directory " + dir.string());
}

bool has_channel(const fs::path& dir, const char* name) { return fs::is_regular_file(dir / (std::string(name) + ".dvol")); }

bool is_study_dir(const fs::path& dir) {
  for (const char* n : {"ip", "op", "fat", "water", "fat_hat", "water_hat"}) {
    if (has_channel(dir, n)) return true;
  }
  return false;
}

// Scale that maps a reference study into the normalized domain, following
// the same pooled-percentile rule as training.
double reference_scale(const DixonStudy& s) {
  std::vector<const Volume*> present;
  for (const Volume* v : {&s.ip, &s.op, &s.fat, &s.water}) {
    if (v->size() != 0) present.push_back(v);
  }
  switch (present.size()) {
    case 0: fail(ErrorCode::kInput, "study has no channels");
    case 1: return joint_scale({present[0]});
    case 2: return joint_scale({present[0], present[1]});
    case 3: return joint_scale({present[0], present[1], present[2]});
    default: return joint_scale({present[0], present[1], present[2], present[3]});
  }
}

// Pairs two subject lists by id; any id present on one side only is a usage error.
std::vector<std::pair<SubjectDir, SubjectDir>> match_subjects(const std::vector<SubjectDir>& a,
                                                              const std::vector<SubjectDir>& b, const char* a_name,
                                                              const char* b_name) {
  std::map<std::string, fs::path> bm;
  for (const auto& s : b) bm[s.id] = s.dir;
  std::set<std::string> seen;
  std::vector<std::string> missing;
  std::vector<std::pair<SubjectDir, SubjectDir>> out;
  for (const auto& s : a) {
    seen.insert(s.id);
    auto it = bm.find(s.id);
    if (it == bm.end()) {
      missing.push_back(s.id + " (no " + b_name + ")");
    } else {
      out.push_back({s, {s.id, it->second}});
    }
  }
  for (const auto& s : b) {
    if (!seen.count(s.id)) missing.push_back(s.id + " (no " + a_name + ")");
  }
  if (!missing.empty()) {
    std::string msg = "subject sets differ:";
    for (const auto& m : missing) msg += " " + m;
    fail(ErrorCode::kInput, msg);
  }
  if (out.empty()) fail(ErrorCode::kInput, "no subjects found");
  return out;
}

// Reads the reference fat/water and the prediction, both mapped to the
// normalized domain with the reference scale.
struct ScaledPair {
  Volume ref_fat, ref_water, pred_fat, pred_water;
};

ScaledPair load_scaled_pair(const fs::path& ref_dir, const fs::path& pred_dir) {
  const DixonStudy ref = read_study(ref_dir, false);
  if (ref.fat.size() == 0 || ref.water.size() == 0) fail(ErrorCode::kInput, ref_dir.string() + " lacks fat/water");
  const DixonStudy pred = read_fat_water(pred_dir);
  if (!pred.fat.same_grid(ref.fat) || !pred.water.same_grid(ref.water)) {
    fail(ErrorCode::kInput, "prediction grid in " + pred_dir.string() + " differs from " + ref_dir.string());
  }
  const double scale = reference_scale(ref);
  return {apply_scale(ref.fat, scale), apply_scale(ref.water, scale), apply_scale(pred.fat, scale),
          apply_scale(pred.water, scale)};
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string spec;
  std::string out;
  int n = 0;
  double swap_rate = 0.0;
  std::uint64_t seed = 0;
  int dims = 48;
};

int cmd_simulate(const SimulateArgs& a) {
  if (a.n < 1) fail(ErrorCode::kConfig, "-n must be at least 1");
  if (a.swap_rate < 0.0 || a.swap_rate > 1.0) fail(ErrorCode::kConfig, "--swap-rate must be in [0, 1]");
  sim::PhantomSpec base;
  if (a.spec.empty()) {
    base = sim::default_torso_phantom(Index3::cube(a.dims), a.seed);
  } else {
    try {
      base = sim::load_phantom_spec(a.spec);
      base.validate();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kIo) throw;
      fail(ErrorCode::kConfig, std::string("invalid phantom spec: ") + e.what());
    }
  }
  RunManifest rm("simulate");
  rm.seed(a.seed);
  rm.config("n", a.n);
  rm.config("swap_rate", a.swap_rate);
  if (a.spec.empty()) {
    rm.config("dims", a.dims);
  } else {
    rm.input("spec", a.spec);
  }
  const auto manifest = sim::generate_corpus(base, a.n, a.swap_rate, a.seed, a.out);
  const fs::path mpath = fs::path(a.out) / "manifest.json";
  rm.output("corpus_manifest", mpath);
  rm.write(a.out);
  std::cout << mpath.generic_string() << "\n";
  (void)manifest;
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string out;
  std::string corpus;
  std::optional<std::uint64_t> seed;
  std::optional<int> folds;
};

int cmd_train(const TrainArgs& a) {
  KeyValueConfig kv = KeyValueConfig::load(a.config);
  if (!a.corpus.empty()) kv.set("corpus", a.corpus);
  if (!a.out.empty()) kv.set("out", a.out);
  if (a.seed) kv.set("seed", std::to_string(*a.seed));
  if (a.folds) kv.set("folds", std::to_string(*a.folds));
  const train::TrainConfig cfg = train::TrainConfig::from_key_values(kv);
  cfg.validate();
  if (cfg.corpus_manifest.empty()) fail(ErrorCode::kConfig, "no corpus given (config key corpus or --corpus)");
  if (cfg.out_dir.empty()) fail(ErrorCode::kConfig, "no output directory given (config key out or --out)");
  fs::path corpus_path = cfg.corpus_manifest;
  if (fs::is_directory(corpus_path)) corpus_path /= "manifest.json";
  if (!fs::is_regular_file(corpus_path)) fail(ErrorCode::kInput, "corpus manifest " + corpus_path.string() + " not found");
  ensure_dir(cfg.out_dir);

  RunManifest rm("train");
  rm.seed(cfg.seed);
  const KeyValueConfig snapshot = cfg.to_key_values();
  for (const auto& [k, v] : snapshot.values()) rm.config(k, v);
  rm.input("config", a.config);
  rm.input("corpus", corpus_path);

  const auto corpus = train::load_training_corpus(sim::read_corpus_manifest(corpus_path));
  if (cfg.folds) {
    const auto cv = train::run_cross_validation(cfg, corpus, *cfg.folds);
    const fs::path report = cfg.out_dir / "cross_validation.txt";
    std::ofstream(report, std::ios::binary) << cv.report();
    rm.output("report", report);
    ordered_json folds = ordered_json::array();
    for (const auto& f : cv.folds) folds.push_back({{"train", f.train_ids}, {"test", f.test_ids}});
    rm.extra("folds", folds);
    rm.write(cfg.out_dir);
    std::cout << cv.report();
    return kExitOk;
  }
  try {
    const auto result = train::run_training(cfg, corpus);
    rm.output("checkpoint", result.final_checkpoint);
    rm.output("training_csv", cfg.out_dir / "training.csv");
    rm.output("epochs_csv", cfg.out_dir / "epochs.csv");
    ordered_json timings = ordered_json::array();
    for (const auto& e : result.record.epochs) timings.push_back(e.seconds);
    rm.extra("epoch_seconds", timings);
    rm.extra("train_subjects", result.train_ids);
    rm.extra("validation_subjects", result.validation_ids);
    rm.write(cfg.out_dir);
    std::cout << result.final_checkpoint.generic_string() << "\n";
  } catch (const DivergenceError& e) {
    rm.extra("diverged_at_step", e.step());
    rm.write(cfg.out_dir);
    throw;
  }
  return kExitOk;
}

// ----------------------------------------------------------------- predict

struct PredictArgs {
  std::string checkpoint;
  std::string study;
  std::string out;
  std::string input_mode;
  int tile = 0;
};

int cmd_predict(const PredictArgs& a) {
  const nn::Checkpoint ck = nn::read_checkpoint(a.checkpoint);
  const train::GanModels models = train::from_checkpoint(ck);
  const auto& gcfg = models.generator.config();
  if (!a.input_mode.empty() && model::parse_input_mode(a.input_mode) != gcfg.input_mode) {
    fail(ErrorCode::kConfig, "--input-mode " + a.input_mode + " does not match the checkpoint (" +
                                 std::string(model::to_string(gcfg.input_mode)) + ")");
  }
  const Index3 tile = a.tile > 0 ? Index3::cube(a.tile) : gcfg.crop_size;
  const auto subjects = discover_subjects(a.study, "scanner");
  const bool single = subjects.size() == 1 && fs::equivalent(subjects[0].dir, a.study);
  RunManifest rm("predict");
  rm.input("checkpoint", a.checkpoint);
  rm.input("study", a.study);
  rm.config("input_mode", std::string(model::to_string(gcfg.input_mode)));
  rm.config("tile", to_string(tile));
  const auto predictor = eval::generator_predictor(models.generator);
  ordered_json seconds = ordered_json::object();
  for (const auto& s : subjects) {
    const auto t0 = std::chrono::steady_clock::now();
    DixonStudy study = read_study(s.dir, false);
    if (gcfg.input_mode == model::InputMode::SingleIp) study.op = Volume();
    const auto in = eval::prepare_inputs(study, gcfg.input_mode);
    eval::FatWater fw = eval::predict_full(predictor, in.channels, tile);
    for (double& v : fw.fat.data()) v *= in.scale;
    for (double& v : fw.water.data()) v *= in.scale;
    const fs::path dst = single ? fs::path(a.out) : fs::path(a.out) / s.id;
    ensure_dir(dst);
    write_volume(fw.fat, dst / "fat_hat.dvol");
    write_volume(fw.water, dst / "water_hat.dvol");
    seconds[s.id] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  rm.output("predictions", a.out);
  rm.extra("prediction_seconds", seconds);
  ensure_dir(a.out);
  rm.write(a.out);
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string pred;
  std::string truth;
  std::string out;
  std::string reference = "scanner";
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto pairs = match_subjects(discover_subjects(a.pred), discover_subjects(a.truth, a.reference), "truth",
                                    "prediction");
  eval::MetricsReport report;
  report.subjects.resize(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto& [pred, ref] = pairs[i];
    const ScaledPair p = load_scaled_pair(ref.dir, pred.dir);
    report.subjects[i] = eval::evaluate_subject(pred.id, p.ref_fat, p.ref_water, p.pred_fat, p.pred_water);
  });
  report.sort();
  const fs::path out = a.out;
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  report.write_csv(out);
  RunManifest rm("evaluate");
  rm.input("pred", a.pred);
  rm.input("truth", a.truth);
  rm.config("reference", a.reference);
  rm.output("csv", out);
  rm.extra("summary", report.summary_line());
  rm.write(out.has_parent_path() ? out.parent_path() : fs::path("."));
  std::cout << report.summary_line() << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- swapmap

struct SwapmapArgs {
  std::string original;
  std::string pred;
  std::string out;
  double threshold = eval::kDefaultSwapThreshold;
  int min_cluster = eval::kDefaultMinCluster;
};

int cmd_swapmap(const SwapmapArgs& a) {
  if (!(a.threshold > 0.0)) fail(ErrorCode::kConfig, "--threshold must be positive");
  if (a.min_cluster < 1) fail(ErrorCode::kConfig, "--min-cluster must be at least 1");
  const auto pairs = match_subjects(discover_subjects(a.pred), discover_subjects(a.original, "scanner"), "original",
                                    "prediction");
  ensure_dir(a.out);
  std::vector<eval::SwapLabelMap> maps(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto& [pred, orig] = pairs[i];
    const ScaledPair p = load_scaled_pair(orig.dir, pred.dir);
    maps[i] = eval::swap_label_map(p.ref_fat, p.ref_water, p.pred_fat, p.pred_water, a.threshold, a.min_cluster);
    write_volume(maps[i].mask, fs::path(a.out) / (pred.id + "_swapmap.dvol"));
  });
  const auto stats = eval::fp_statistics(maps);
  ordered_json per = ordered_json::object();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    per[pairs[i].first.id] = {{"clusters", maps[i].clusters.size()}, {"voxels", maps[i].voxel_count()}};
  }
  ordered_json doc = ordered_json::parse(stats.to_json());
  doc["threshold"] = a.threshold;
  doc["min_cluster"] = a.min_cluster;
  doc["summary"] = stats.to_string();
  doc["subjects_detail"] = per;
  const fs::path json_path = fs::path(a.out) / "swap_statistics.json";
  std::ofstream(json_path, std::ios::binary) << doc.dump(2) << "\n";
  RunManifest rm("swapmap");
  rm.input("original", a.original);
  rm.input("pred", a.pred);
  rm.config("threshold", a.threshold);
  rm.config("min_cluster", a.min_cluster);
  rm.output("statistics", json_path);
  rm.write(a.out);
  std::cout << stats.to_string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ report

struct ReportArgs {
  std::string original;
  std::string pred;
  std::string out;
  int axial = -1;    // z index
  int coronal = -1;  // y index
};

std::vector<double> slice_xy(const Volume& v, int k) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(v.dims().x) * static_cast<std::size_t>(v.dims().y));
  for (int j = 0; j < v.dims().y; ++j) {
    for (int i = 0; i < v.dims().x; ++i) out.push_back(v.at(i, j, k));
  }
  return out;
}

// Coronal rows run from the top slice down so the head end is up.
std::vector<double> slice_xz(const Volume& v, int j) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(v.dims().x) * static_cast<std::size_t>(v.dims().z));
  for (int k = v.dims().z - 1; k >= 0; --k) {
    for (int i = 0; i < v.dims().x; ++i) out.push_back(v.at(i, j, k));
  }
  return out;
}

int cmd_report(const ReportArgs& a) {
  const auto pairs = match_subjects(discover_subjects(a.pred), discover_subjects(a.original, "scanner"), "original",
                                    "prediction");
  ensure_dir(a.out);
  RunManifest rm("report");
  rm.input("original", a.original);
  rm.input("pred", a.pred);
  std::string summary;
  for (const auto& [pred, orig] : pairs) {
    const ScaledPair p = load_scaled_pair(orig.dir, pred.dir);
    const Index3 d = p.ref_fat.dims();
    const int k = a.axial >= 0 ? a.axial : d.z / 2;
    const int j = a.coronal >= 0 ? a.coronal : d.y / 2;
    if (k >= d.z || j >= d.y) fail(ErrorCode::kConfig, "slice index outside the volume " + to_string(d));
    double max_diff = 0.0;
    auto emit = [&](const char* channel, const Volume& ref, const Volume& hat) {
      Volume diff(d, ref.spacing());
      for (std::size_t n = 0; n < diff.size(); ++n) {
        diff[n] = std::abs(ref[n] - hat[n]);
        max_diff = std::max(max_diff, diff[n]);
      }
      const std::string stem = pred.id + "_" + channel;
      const fs::path dir = a.out;
      write_pgm(dir / (stem + "_original_axial.pgm"), d.x, d.y, slice_xy(ref, k));
      write_pgm(dir / (stem + "_predicted_axial.pgm"), d.x, d.y, slice_xy(hat, k));
      write_pgm(dir / (stem + "_difference_axial.pgm"), d.x, d.y, slice_xy(diff, k));
      write_pgm(dir / (stem + "_original_coronal.pgm"), d.x, d.z, slice_xz(ref, j));
      write_pgm(dir / (stem + "_predicted_coronal.pgm"), d.x, d.z, slice_xz(hat, j));
      write_pgm(dir / (stem + "_difference_coronal.pgm"), d.x, d.z, slice_xz(diff, j));
    };
    emit("fat", p.ref_fat, p.pred_fat);
    emit("water", p.ref_water, p.pred_water);
    char line[160];
    std::snprintf(line, sizeof(line), "%s axial z=%d coronal y=%d max |difference| %.4f\n", pred.id.c_str(), k, j,
                  max_diff);
    summary += line;
  }
  const fs::path summary_path = fs::path(a.out) / "summary.txt";
  std::ofstream(summary_path, std::ios::binary) << summary;
  rm.output("summary", summary_path);
  rm.write(a.out);
  std::cout << summary;
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDivergence: return kExitDivergence;
    case ErrorCode::kConfig:
    case ErrorCode::kInput:
    case ErrorCode::kDirective:
    case ErrorCode::kDegeneratePhantom: return kExitUsage;
    default: return kExitFailure;
  }
}

}  // namespace

std::vector<SubjectDir> discover_subjects(const fs::path& dir, const std::string& variant) {
  if (!fs::is_directory(dir)) fail(ErrorCode::kInput, dir.string() + " is not a directory");
  if (fs::is_regular_file(dir / "manifest.json")) {
    const auto m = sim::read_corpus_manifest(dir / "manifest.json");
    std::vector<SubjectDir> out;
    for (const auto& e : m.studies) {
      out.push_back({e.subject_id, variant == "truth" ? m.truth_dir(e) : m.scanner_dir(e)});
    }
    return out;
  }
  if (is_study_dir(dir)) {
    const fs::path canon = fs::weakly_canonical(dir);
    std::string id = canon.filename().string();
    // A scanner/ or truth/ leaf is named after its subject directory.
    if ((id == "scanner" || id == "truth") && canon.has_parent_path()) id = canon.parent_path().filename().string();
    return {{id, dir}};
  }
  std::vector<SubjectDir> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    const fs::path sub = entry.path();
    if (fs::is_directory(sub / variant) && is_study_dir(sub / variant)) {
      out.push_back({sub.filename().string(), sub / variant});
    } else if (is_study_dir(sub)) {
      out.push_back({sub.filename().string(), sub});
    }
  }
  std::sort(out.begin(), out.end(), [](const SubjectDir& x, const SubjectDir& y) { return x.id < y.id; });
  if (out.empty()) fail(ErrorCode::kInput, "no studies found under " + dir.string());
  return out;
}

DixonStudy read_fat_water(const fs::path& dir) {
  DixonStudy s;
  const bool hat = has_channel(dir, "fat_hat") && has_channel(dir, "water_hat");
  if (!hat && !(has_channel(dir, "fat") && has_channel(dir, "water"))) {
    fail(ErrorCode::kInput, dir.string() + " has no fat/water volumes");
  }
  s.fat = read_volume(dir / (hat ? "fat_hat.dvol" : "fat.dvol"), Channel::Fat);
  s.water = read_volume(dir / (hat ? "water_hat.dvol" : "water.dvol"), Channel::Water);
  return s;
}

void write_pgm(const fs::path& path, int width, int height, const std::vector<double>& values) {
  if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    fail(ErrorCode::kShape, "image size does not match " + std::to_string(width) + "x" + std::to_string(height));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << "P5\n" << width << " " << height << "\n255\n";
  std::string row;
  row.reserve(values.size());
  for (double v : values) {
    const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    row.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
  }
  out.write(row.data(), static_cast<std::streamsize>(row.size()));
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Volumetric two-point Dixon fat/water toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic corpus of phantom studies");
  sim_cmd->add_option("--spec", sim_args.spec, "Phantom spec JSON (default: built-in torso phantom)");
  sim_cmd->add_option("--out", sim_args.out, "Output directory")->required();
  sim_cmd->add_option("-n,--count", sim_args.n, "Number of studies")->required();
  sim_cmd->add_option("--swap-rate", sim_args.swap_rate, "Fraction of studies with induced swaps");
  sim_cmd->add_option("--seed", sim_args.seed, "Corpus seed");
  sim_cmd->add_option("--dims", sim_args.dims, "Cube edge of the built-in phantom")->check(CLI::PositiveNumber);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a generator/discriminator pair");
  train_cmd->add_option("--config", train_args.config, "key=value config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_args.out, "Output directory (overrides config)");
  train_cmd->add_option("--corpus", train_args.corpus, "Corpus manifest or directory (overrides config)");
  train_cmd->add_option("--seed", train_args.seed, "Seed (overrides config)");
  train_cmd->add_option("--folds", train_args.folds, "Run k-fold cross-validation instead of one model");

  PredictArgs pred_args;
  auto* pred_cmd = app.add_subcommand("predict", "Predict fat/water for one study or a corpus");
  pred_cmd->add_option("--checkpoint", pred_args.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--study", pred_args.study, "Study directory or corpus root")->required();
  pred_cmd->add_option("--out", pred_args.out, "Output directory")->required();
  pred_cmd->add_option("--input-mode", pred_args.input_mode, "Expected input mode (SINGLE_IP or DUAL)");
  pred_cmd->add_option("--tile", pred_args.tile, "Tile edge (default: training crop)");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "SSIM/PSNR of predictions against reference studies");
  eval_cmd->add_option("--pred", eval_args.pred, "Prediction directory")->required();
  eval_cmd->add_option("--truth", eval_args.truth, "Reference directory or corpus root")->required();
  eval_cmd->add_option("--out", eval_args.out, "Output CSV")->required();
  eval_cmd->add_option("--reference", eval_args.reference, "Corpus variant used as reference")
      ->check(CLI::IsMember({"scanner", "truth"}));

  SwapmapArgs swap_args;
  auto* swap_cmd = app.add_subcommand("swapmap", "Swap label maps and false-positive cluster statistics");
  swap_cmd->add_option("--original", swap_args.original, "Original (scanner) studies")->required();
  swap_cmd->add_option("--pred", swap_args.pred, "Prediction directory")->required();
  swap_cmd->add_option("--out", swap_args.out, "Output directory")->required();
  swap_cmd->add_option("--threshold", swap_args.threshold, "Absolute difference threshold");
  swap_cmd->add_option("--min-cluster", swap_args.min_cluster, "Smallest kept cluster in voxels");

  ReportArgs rep_args;
  auto* rep_cmd = app.add_subcommand("report", "Export mid-slice graymaps of original, predicted and difference");
  rep_cmd->add_option("--original", rep_args.original, "Original studies")->required();
  rep_cmd->add_option("--pred", rep_args.pred, "Prediction directory")->required();
  rep_cmd->add_option("--out", rep_args.out, "Output directory")->required();
  rep_cmd->add_option("--axial", rep_args.axial, "Axial slice index (default: middle)");
  rep_cmd->add_option("--coronal", rep_args.coronal, "Coronal slice index (default: middle)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sim_cmd) return cmd_simulate(sim_args);
    if (*train_cmd) return cmd_train(train_args);
    if (*pred_cmd) return cmd_predict(pred_args);
    if (*eval_cmd) return cmd_evaluate(eval_args);
    if (*swap_cmd) return cmd_swapmap(swap_args);
    if (*rep_cmd) return cmd_report(rep_args);
  } catch (const Error& e) {
    std::cerr << "dixon: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "dixon: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"dixon"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace dixon::cli
