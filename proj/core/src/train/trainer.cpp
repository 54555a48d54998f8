#include "dixon/train/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "dixon/eval/inference.hpp"
#include "dixon/nn/ops.hpp"

namespace dixon::train {

namespace {

const char* const kKnownKeys[] = {"corpus", "out", "batch_size", "lr", "epochs", "steps_per_epoch", "seed", "folds",
                                  "validation_subjects", "epoch_checkpoints", "input_mode", "loss", "dixon_norm",
                                  "levels", "filters", "crop", "norm", "disc_strides", "disc_filters",
                                  "disc_receptive_field", "disc_conditioned", "lambda"};

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.8g", v);
  return buf;
}

void set_trainable(nn::ParameterSet<float>& ps, bool on) {
  for (auto& e : ps.entries()) e.var.node()->requires_grad = on;
}

void check_finite(const model::LossBundle& b, std::int64_t step) {
  if (!b.finite()) {
    throw DivergenceError(step, "non-finite loss (adv_d " + num(b.adv_d) + ", adv_g " + num(b.adv_g) + ", recon " +
                                    num(b.recon) + ")");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) fail(ErrorCode::kConfig, "batch_size must be >= 1");
  if (epochs < 1) fail(ErrorCode::kConfig, "epochs must be >= 1");
  if (steps_per_epoch < 0) fail(ErrorCode::kConfig, "steps_per_epoch must be >= 0");
  if (!(lr > 0.0)) fail(ErrorCode::kConfig, "lr must be positive");
  if (folds && *folds < 2) fail(ErrorCode::kConfig, "folds must be >= 2");
  if (validation_subjects < 0) fail(ErrorCode::kConfig, "validation_subjects must be >= 0");
  model.validate();
}

KeyValueConfig TrainConfig::to_key_values() const {
  KeyValueConfig kv = model.to_key_values();
  kv.set("corpus", corpus_manifest.generic_string());
  kv.set("out", out_dir.generic_string());
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("lr", num(lr));
  kv.set("epochs", std::to_string(epochs));
  kv.set("steps_per_epoch", std::to_string(steps_per_epoch));
  kv.set("seed", std::to_string(seed));
  if (folds) kv.set("folds", std::to_string(*folds));
  kv.set("validation_subjects", std::to_string(validation_subjects));
  kv.set("epoch_checkpoints", write_epoch_checkpoints ? "true" : "false");
  return kv;
}

TrainConfig TrainConfig::from_key_values(const KeyValueConfig& kv) {
  for (const auto& [key, value] : kv.values()) {
    if (std::find(std::begin(kKnownKeys), std::end(kKnownKeys), key) == std::end(kKnownKeys)) {
      fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
    }
  }
  TrainConfig c;
  model::ModelConfig defaults;
  defaults.generator.levels = 3;
  defaults.generator.filters = {8, 16, 32};
  defaults.generator.crop_size = Index3::cube(16);
  defaults.discriminator.filters = {8, 16};
  c.model = model::ModelConfig::from_key_values(kv, defaults);
  c.corpus_manifest = kv.get_string("corpus", "");
  c.out_dir = kv.get_string("out", "");
  c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
  c.lr = kv.get_double("lr", c.lr);
  c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
  c.steps_per_epoch = static_cast<int>(kv.get_int("steps_per_epoch", c.steps_per_epoch));
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  if (kv.contains("folds")) c.folds = static_cast<int>(kv.get_int("folds", 4));
  c.validation_subjects = static_cast<int>(kv.get_int("validation_subjects", c.validation_subjects));
  c.write_epoch_checkpoints = kv.get_bool("epoch_checkpoints", c.write_epoch_checkpoints);
  return c;
}

std::vector<std::size_t> TrainingCorpus::all_indices() const {
  std::vector<std::size_t> v(subjects.size());
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::size_t TrainingCorpus::find(const std::string& id) const {
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].id == id) return i;
  }
  fail(ErrorCode::kInput, "subject " + id + " is not in the corpus");
}

TrainingCorpus load_training_corpus(const sim::CorpusManifest& manifest, bool swap_free_only) {
  TrainingCorpus c;
  for (const auto& e : manifest.studies) {
    if (swap_free_only && e.swapped) continue;
    DixonStudy s = read_study(manifest.scanner_dir(e));
    s.subject_id = e.subject_id;
    s.provenance = Provenance::SimulatedScanner;
    c.subjects.push_back({e.subject_id, normalize_study(s)});
  }
  if (c.subjects.empty()) fail(ErrorCode::kInput, "corpus has no usable subjects");
  return c;
}

Batch sample_batch(const TrainingCorpus& corpus, const std::vector<std::size_t>& pool, Index3 crop, int batch_size,
                   model::InputMode mode, bool with_labels, std::mt19937_64& rng) {
  if (pool.empty()) fail(ErrorCode::kConfig, "cannot sample from an empty subject pool");
  if (batch_size < 1) fail(ErrorCode::kConfig, "batch_size must be >= 1");
  for (std::size_t s : pool) {
    const Index3 d = corpus.subjects.at(s).data.study.ip.dims();
    if (crop.x > d.x || crop.y > d.y || crop.z > d.z) {
      fail(ErrorCode::kConfig, "crop " + to_string(crop) + " does not fit subject " + corpus.subjects[s].id +
                                   " of dims " + to_string(d));
    }
  }
  const int in_ch = model::input_channels(mode);
  const int b = batch_size;
  Batch out;
  out.inputs = nn::Tensor<float>({b, in_ch, crop.x, crop.y, crop.z});
  out.ip = nn::Tensor<float>({b, 1, crop.x, crop.y, crop.z});
  out.op = nn::Tensor<float>({b, 1, crop.x, crop.y, crop.z});
  if (with_labels) out.labels = nn::Tensor<float>({b, 2, crop.x, crop.y, crop.z});
  const std::size_t block = crop.count();
  auto put = [&](nn::Tensor<float>& t, int bi, int c, const Volume& v) {
    float* dst = t.data() + (static_cast<std::size_t>(bi) * static_cast<std::size_t>(t.channels()) +
                             static_cast<std::size_t>(c)) *
                                block;
    for (double x : v.data()) *dst++ = static_cast<float>(x);
  };
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int bi = 0; bi < b; ++bi) {
    const std::size_t s = pool[pick(rng)];
    const DixonStudy& st = corpus.subjects[s].data.study;
    const Index3 d = st.ip.dims();
    Index3 origin;
    for (int a = 0; a < 3; ++a) origin[a] = std::uniform_int_distribution<int>(0, d[a] - crop[a])(rng);
    out.subjects.push_back(s);
    out.origins.push_back(origin);
    const Volume ip = dixon::crop(st.ip, origin, crop);
    const Volume op = dixon::crop(st.op, origin, crop);
    put(out.ip, bi, 0, ip);
    put(out.op, bi, 0, op);
    put(out.inputs, bi, 0, ip);
    if (in_ch == 2) put(out.inputs, bi, 1, op);
    if (with_labels) {
      put(*out.labels, bi, 0, dixon::crop(st.fat, origin, crop));
      put(*out.labels, bi, 1, dixon::crop(st.water, origin, crop));
    }
  }
  return out;
}

GanModels::GanModels(const model::ModelConfig& c, std::uint64_t seed, double lr)
    : cfg(c),
      generator(c.generator, seed * 2 + 1),
      discriminator(c.discriminator, model::input_channels(c.generator.input_mode), seed * 2 + 2) {
  cfg.validate();
  nn::AdamHyper h;
  h.lr = lr;
  g_opt = nn::make_adam_state(generator.params(), h);
  d_opt = nn::make_adam_state(discriminator.params(), h);
}

nn::Checkpoint to_checkpoint(const GanModels& m) {
  nn::Checkpoint ck;
  ck.config = m.cfg.to_key_values().to_text();
  ck.step = m.step;
  nn::export_parameters(m.generator.params(), "generator.", ck);
  nn::export_parameters(m.discriminator.params(), "discriminator.", ck);
  ck.optimizers.push_back({"generator", m.g_opt});
  ck.optimizers.push_back({"discriminator", m.d_opt});
  return ck;
}

GanModels from_checkpoint(const nn::Checkpoint& ck) {
  const auto cfg = model::ModelConfig::from_key_values(KeyValueConfig::parse(ck.config));
  GanModels m(cfg, 0);
  nn::import_parameters(ck, "generator.", m.generator.params());
  nn::import_parameters(ck, "discriminator.", m.discriminator.params());
  if (const auto* g = ck.optimizer("generator")) m.g_opt = *g;
  if (const auto* d = ck.optimizer("discriminator")) m.d_opt = *d;
  if (m.g_opt.first_moment.size() != m.generator.params().total_size() ||
      m.d_opt.first_moment.size() != m.discriminator.params().total_size()) {
    fail(ErrorCode::kFormat, "checkpoint optimizer state does not match the model");
  }
  m.step = ck.step;
  return m;
}

model::LossBundle train_step(GanModels& m, const Batch& batch, const Batch* reference, const StepOptions& opt) {
  using nn::Var;
  const bool dixon = m.cfg.recon == model::ReconMode::Dixon;
  const std::int64_t step = m.step;
  if (!dixon && !batch.labels) fail(ErrorCode::kInput, "L1 training needs labelled batches");
  if (dixon && batch.labels) fail(ErrorCode::kInput, "Dixon generator batches must not carry labels");
  const Batch& real_src = dixon ? (reference ? *reference : batch) : batch;
  if (dixon && (!reference || !reference->labels)) {
    fail(ErrorCode::kInput, "Dixon training needs a labelled reference batch for the discriminator");
  }

  const auto cond = Var<float>::constant(batch.inputs);
  const auto real_cond = Var<float>::constant(real_src.inputs);
  const auto real_fw = Var<float>::constant(*real_src.labels);

  // Generator forward once; its detached value feeds the discriminator update.
  set_trainable(m.generator.params(), !opt.freeze_generator);
  const Var<float> fake = m.generator.forward(cond);

  // Discriminator phase.
  set_trainable(m.discriminator.params(), true);
  m.discriminator.params().zero_grad();
  const Var<float> d_real = m.discriminator.forward(real_cond, real_fw);
  const Var<float> d_fake = m.discriminator.forward(cond, fake.detach());
  const Var<float> loss_d = model::discriminator_loss(d_real, d_fake);
  const double adv_d = loss_d.item();
  if (!std::isfinite(adv_d)) throw DivergenceError(step, "non-finite discriminator loss");
  nn::backward(loss_d);
  nn::adam_step(m.discriminator.params(), m.d_opt);

  // Generator phase against the updated discriminator, whose weights are
  // held fixed here.
  set_trainable(m.discriminator.params(), false);
  const Var<float> d_fake_g = m.discriminator.forward(cond, fake);
  const Var<float> adv_g = model::generator_adversarial_loss(d_fake_g);
  model::ReconInputs<float> rin;
  rin.pred_fat = nn::slice_channels(fake, 0, 1);
  rin.pred_water = nn::slice_channels(fake, 1, 1);
  if (dixon) {
    rin.ip = Var<float>::constant(batch.ip);
    rin.op = Var<float>::constant(batch.op);
  } else {
    const auto labels = Var<float>::constant(*batch.labels);
    rin.true_fat = nn::slice_channels(labels, 0, 1);
    rin.true_water = nn::slice_channels(labels, 1, 1);
  }
  const Var<float> recon = model::reconstruction_loss(rin, m.cfg.recon, m.cfg.dixon_norm);
  const Var<float> total = model::generator_objective(adv_g, recon, m.cfg.lambda);
  const model::LossBundle bundle = model::combine_losses(adv_g.item(), adv_d, recon.item(), m.cfg.lambda);
  check_finite(bundle, step);
  if (!opt.freeze_generator) {
    m.generator.params().zero_grad();
    nn::backward(total);
    nn::adam_step(m.generator.params(), m.g_opt);
  }
  set_trainable(m.discriminator.params(), true);
  set_trainable(m.generator.params(), true);
  m.step += 1;
  return bundle;
}

std::string TrainRecord::losses_csv() const {
  std::string out = "step,adv_d,adv_g,recon,total_g\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& b = history[i];
    out += std::to_string(i) + "," + fixed(b.adv_d) + "," + fixed(b.adv_g) + "," + fixed(b.recon) + "," +
           fixed(b.total_g) + "\n";
  }
  return out;
}

std::string TrainRecord::epochs_csv() const {
  std::string out = "epoch,ssim_w,ssim_f,psnr_w,psnr_f\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch);
    if (e.validation) {
      const auto& r = *e.validation;
      auto cell = [](const eval::MeanSd& m) { return m.infinite ? std::string("inf") : fixed(m.mean); };
      out += "," + cell(r.ssim_w()) + "," + cell(r.ssim_f()) + "," + cell(r.psnr_w()) + "," + cell(r.psnr_f());
    } else {
      out += ",,,,";
    }
    out += "\n";
  }
  return out;
}

eval::MetricsReport evaluate_generator(const model::Generator<float>& g, const TrainingCorpus& corpus,
                                       const std::vector<std::size_t>& subjects) {
  eval::MetricsReport report;
  const auto predictor = eval::generator_predictor(g);
  for (std::size_t s : subjects) {
    const DixonStudy& st = corpus.subjects.at(s).data.study;
    std::vector<Volume> inputs{st.ip};
    if (g.config().input_mode == model::InputMode::DualIpOp) inputs.push_back(st.op);
    const eval::FatWater pred = eval::predict_full(predictor, inputs, g.config().crop_size);
    report.subjects.push_back(eval::evaluate_subject(corpus.subjects[s].id, st.fat, st.water, pred.fat, pred.water));
  }
  report.sort();
  return report;
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::FILE* f = std::fopen(p.string().c_str(), "wb");
  if (!f) fail(ErrorCode::kIo, "cannot write " + p.string());
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  std::fclose(f);
  if (!ok) fail(ErrorCode::kIo, "cannot write " + p.string());
}

}  // namespace

TrainResult run_training(const TrainConfig& cfg, const TrainingCorpus& corpus, std::vector<std::size_t> subjects) {
  cfg.validate();
  if (subjects.empty()) subjects = corpus.all_indices();
  std::mt19937_64 rng(cfg.seed);

  TrainResult result;
  std::vector<std::size_t> pool = subjects;
  std::vector<std::size_t> validation;
  if (cfg.validation_subjects > 0 && pool.size() > static_cast<std::size_t>(cfg.validation_subjects) + 1) {
    std::vector<std::size_t> shuffled = pool;
    std::mt19937_64 split(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
    std::shuffle(shuffled.begin(), shuffled.end(), split);
    validation.assign(shuffled.begin(), shuffled.begin() + cfg.validation_subjects);
    std::sort(validation.begin(), validation.end());
    pool.erase(std::remove_if(pool.begin(), pool.end(),
                              [&](std::size_t s) { return std::binary_search(validation.begin(), validation.end(), s); }),
               pool.end());
  }
  for (std::size_t s : pool) result.train_ids.push_back(corpus.subjects.at(s).id);
  for (std::size_t s : validation) result.validation_ids.push_back(corpus.subjects[s].id);

  const int steps = cfg.steps_per_epoch > 0
                        ? cfg.steps_per_epoch
                        : std::max(1, static_cast<int>(pool.size()) / cfg.batch_size);
  GanModels models(cfg.model, cfg.seed, cfg.lr);
  const bool dixon = cfg.model.recon == model::ReconMode::Dixon;
  const Index3 crop = cfg.model.generator.crop_size;
  const auto mode = cfg.model.generator.input_mode;

  if (!cfg.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) fail(ErrorCode::kIo, "cannot create " + cfg.out_dir.string());
  }
  auto flush_csv = [&] {
    if (cfg.out_dir.empty()) return;
    write_text(cfg.out_dir / "training.csv", result.record.losses_csv());
    write_text(cfg.out_dir / "epochs.csv", result.record.epochs_csv());
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      for (int s = 0; s < steps; ++s) {
        // Dixon-mode generator batches are drawn without labels; the
        // discriminator's real examples come from an independent draw.
        const Batch batch = sample_batch(corpus, pool, crop, cfg.batch_size, mode, !dixon, rng);
        std::optional<Batch> reference;
        if (dixon) reference = sample_batch(corpus, pool, crop, cfg.batch_size, mode, true, rng);
        result.record.history.push_back(train_step(models, batch, reference ? &*reference : nullptr));
      }
    } catch (const DivergenceError&) {
      flush_csv();
      throw;
    }
    EpochRecord er;
    er.epoch = epoch;
    if (!validation.empty()) er.validation = evaluate_generator(models.generator, corpus, validation);
    er.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.record.epochs.push_back(std::move(er));
    if (!cfg.out_dir.empty() && cfg.write_epoch_checkpoints) {
      char name[48];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%03d.dckp", epoch);
      nn::write_checkpoint(to_checkpoint(models), cfg.out_dir / name);
    }
    flush_csv();
  }
  result.checkpoint = to_checkpoint(models);
  if (!cfg.out_dir.empty()) {
    result.final_checkpoint = cfg.out_dir / "final.dckp";
    nn::write_checkpoint(result.checkpoint, result.final_checkpoint);
  }
  return result;
}

TrainResult run_training(const TrainConfig& cfg) {
  cfg.validate();
  const auto manifest = sim::read_corpus_manifest(cfg.corpus_manifest);
  return run_training(cfg, load_training_corpus(manifest));
}

std::vector<std::vector<std::size_t>> partition_folds(std::size_t subjects, int folds, std::uint64_t seed) {
  if (folds < 2) fail(ErrorCode::kConfig, "need at least two folds");
  if (subjects < static_cast<std::size_t>(folds)) {
    fail(ErrorCode::kConfig, "corpus of " + std::to_string(subjects) + " subjects is smaller than " +
                                 std::to_string(folds) + " folds");
  }
  std::vector<std::size_t> order(subjects);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t base = subjects / static_cast<std::size_t>(folds);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  for (std::size_t f = 0; f < out.size(); ++f) {
    const std::size_t begin = f * base;
    const std::size_t end = f + 1 == out.size() ? subjects : begin + base;
    out[f].assign(order.begin() + static_cast<std::ptrdiff_t>(begin), order.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(out[f].begin(), out[f].end());
  }
  return out;
}

std::string CrossValidationResult::report() const {
  std::string out;
  eval::MetricsReport all;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    out += "Fold " + std::to_string(f + 1) + " (train " + std::to_string(folds[f].train_ids.size()) + ", test " +
           std::to_string(folds[f].test_ids.size()) + "): " + folds[f].report.summary_line() + "\n";
    all.subjects.insert(all.subjects.end(), folds[f].report.subjects.begin(), folds[f].report.subjects.end());
  }
  all.sort();
  out += "All folds: " + all.summary_line() + "\n";
  return out;
}

CrossValidationResult run_cross_validation(const TrainConfig& cfg, const TrainingCorpus& corpus, int folds) {
  const auto parts = partition_folds(corpus.subjects.size(), folds, cfg.seed);
  CrossValidationResult result;
  for (std::size_t f = 0; f < parts.size(); ++f) {
    std::vector<std::size_t> train;
    for (std::size_t g = 0; g < parts.size(); ++g) {
      if (g != f) train.insert(train.end(), parts[g].begin(), parts[g].end());
    }
    std::sort(train.begin(), train.end());
    TrainConfig fold_cfg = cfg;
    fold_cfg.validation_subjects = 0;
    fold_cfg.seed = cfg.seed + f;
    if (!cfg.out_dir.empty()) fold_cfg.out_dir = cfg.out_dir / ("fold_" + std::to_string(f + 1));
    TrainResult tr = run_training(fold_cfg, corpus, train);
    const GanModels m = from_checkpoint(tr.checkpoint);
    Fold fold;
    for (std::size_t s : train) fold.train_ids.push_back(corpus.subjects[s].id);
    for (std::size_t s : parts[f]) fold.test_ids.push_back(corpus.subjects[s].id);
    fold.report = evaluate_generator(m.generator, corpus, parts[f]);
    result.folds.push_back(std::move(fold));
  }
  return result;
}

CrossValidationResult run_cross_validation(const TrainConfig& cfg, int folds) {
  const auto manifest = sim::read_corpus_manifest(cfg.corpus_manifest);
  return run_cross_validation(cfg, load_training_corpus(manifest), folds);
}

}  // namespace dixon::train
