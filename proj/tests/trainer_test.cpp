#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dixon/sim/corpus.hpp"
#include "dixon/train/trainer.hpp"
#include "temp_dir.hpp"

namespace dixon::train {
namespace {

using testing::TempDir;

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kState;
}

// Channel blocks laid out like volumes, x fastest.
float at5(const nn::Tensor<float>& t, int b, int c, int i, int j, int k) {
  const auto sp = t.spatial();
  const std::size_t block = t.spatial_size();
  return t[(static_cast<std::size_t>(b) * t.channels() + c) * block + i + sp[0] * (j + static_cast<std::size_t>(sp[1]) * k)];
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

model::ModelConfig toy_model(model::InputMode in = model::InputMode::DualIpOp,
                             model::ReconMode recon = model::ReconMode::L1) {
  model::ModelConfig m;
  m.generator.input_mode = in;
  m.generator.levels = 3;
  m.generator.filters = {8, 16, 32};
  m.generator.crop_size = Index3::cube(16);
  m.discriminator.filters = {8, 16};
  m.recon = recon;
  return m;
}

class TrainerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    manifest_ = new sim::CorpusManifest(
        sim::generate_corpus(sim::default_torso_phantom(Index3::cube(24)), 8, 0.0, 11, dir_->path() / "corpus"));
    corpus_ = new TrainingCorpus(load_training_corpus(*manifest_));
  }
  static void TearDownTestSuite() {
    delete corpus_;
    delete manifest_;
    delete dir_;
  }

  TrainConfig toy_config(const std::filesystem::path& out = {}) const {
    TrainConfig c;
    c.corpus_manifest = manifest_->root / "manifest.json";
    c.out_dir = out;
    c.model = toy_model();
    c.lr = 1e-3;
    c.epochs = 1;
    c.steps_per_epoch = 2;
    c.seed = 5;
    return c;
  }

  static TempDir* dir_;
  static sim::CorpusManifest* manifest_;
  static TrainingCorpus* corpus_;
};

TempDir* TrainerTest::dir_ = nullptr;
sim::CorpusManifest* TrainerTest::manifest_ = nullptr;
TrainingCorpus* TrainerTest::corpus_ = nullptr;

TEST_F(TrainerTest, CorpusIsNormalized) {
  ASSERT_EQ(corpus_->subjects.size(), 8u);
  for (const auto& s : corpus_->subjects) {
    EXPECT_GT(s.data.scale, 0.0);
    EXPECT_EQ(s.data.study.ip.dims(), Index3::cube(24));
  }
  EXPECT_EQ(corpus_->find(corpus_->subjects[3].id), 3u);
  EXPECT_EQ(code_of([&] { corpus_->find("nobody"); }), ErrorCode::kInput);
}

TEST_F(TrainerTest, BatchShapesAndLabels) {
  std::mt19937_64 rng(1);
  const Batch b = sample_batch(*corpus_, corpus_->all_indices(), Index3::cube(16), 2, model::InputMode::DualIpOp,
                               true, rng);
  EXPECT_EQ(b.inputs.shape(), (std::vector<int>{2, 2, 16, 16, 16}));
  EXPECT_EQ(b.ip.shape(), (std::vector<int>{2, 1, 16, 16, 16}));
  ASSERT_TRUE(b.labels.has_value());
  EXPECT_EQ(b.labels->shape(), (std::vector<int>{2, 2, 16, 16, 16}));
  // Element 0: fat is channel 0, water channel 1, inputs are ip then op.
  const DixonStudy& st = corpus_->subjects[b.subjects[0]].data.study;
  const Index3 o = b.origins[0];
  for (int k = 0; k < 16; k += 5)
    for (int j = 0; j < 16; j += 3)
      for (int i = 0; i < 16; i += 7) {
        EXPECT_FLOAT_EQ(at5(*b.labels, 0, 0, i, j, k), static_cast<float>(st.fat.at(o.x + i, o.y + j, o.z + k)));
        EXPECT_FLOAT_EQ(at5(*b.labels, 0, 1, i, j, k), static_cast<float>(st.water.at(o.x + i, o.y + j, o.z + k)));
        EXPECT_FLOAT_EQ(at5(b.inputs, 0, 1, i, j, k), static_cast<float>(st.op.at(o.x + i, o.y + j, o.z + k)));
        EXPECT_FLOAT_EQ(at5(b.inputs, 0, 0, i, j, k), at5(b.ip, 0, 0, i, j, k));
      }

  const Batch single = sample_batch(*corpus_, {0}, Index3::cube(8), 1, model::InputMode::SingleIp, false, rng);
  EXPECT_EQ(single.inputs.shape()[1], 1);
  EXPECT_FALSE(single.labels.has_value());
}

TEST_F(TrainerTest, FullSizeCropHasOneOrigin) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 5; ++t) {
    const Batch b = sample_batch(*corpus_, corpus_->all_indices(), Index3::cube(24), 1, model::InputMode::SingleIp,
                                 false, rng);
    EXPECT_EQ(b.origins[0], (Index3{0, 0, 0}));
  }
  EXPECT_EQ(code_of([&] {
              sample_batch(*corpus_, corpus_->all_indices(), {25, 8, 8}, 1, model::InputMode::SingleIp, false, rng);
            }),
            ErrorCode::kConfig);
}

TEST_F(TrainerTest, SameSeedSameBatches) {
  std::mt19937_64 a(3), b(3);
  for (int t = 0; t < 4; ++t) {
    const Batch x = sample_batch(*corpus_, corpus_->all_indices(), Index3::cube(8), 2, model::InputMode::DualIpOp,
                                 true, a);
    const Batch y = sample_batch(*corpus_, corpus_->all_indices(), Index3::cube(8), 2, model::InputMode::DualIpOp,
                                 true, b);
    EXPECT_EQ(x.subjects, y.subjects);
    EXPECT_EQ(x.origins, y.origins);
    EXPECT_TRUE(std::equal(x.inputs.values().begin(), x.inputs.values().end(), y.inputs.values().begin()));
  }
}

TEST_F(TrainerTest, SubjectAndOriginDrawsAreUniform) {
  std::mt19937_64 rng(4);
  const std::vector<std::size_t> pool{1, 2, 5, 6};
  std::map<std::size_t, int> counts;
  std::vector<int> x_counts(9, 0);  // crop 16 in 24: origins 0..8
  for (int t = 0; t < 10000; ++t) {
    const Batch b = sample_batch(*corpus_, pool, {16, 2, 2}, 1, model::InputMode::SingleIp, false, rng);
    ++counts[b.subjects[0]];
    ++x_counts[static_cast<std::size_t>(b.origins[0].x)];
  }
  ASSERT_EQ(counts.size(), 4u);
  double chi = 0;
  for (const auto& [s, c] : counts) {
    EXPECT_NEAR(c, 2500, 200) << s;
    chi += (c - 2500.0) * (c - 2500.0) / 2500.0;
  }
  EXPECT_LT(chi, 16.27);  // 3 dof, p = 0.001
  double chi_x = 0;
  const double e = 10000.0 / 9.0;
  for (int c : x_counts) chi_x += (c - e) * (c - e) / e;
  EXPECT_LT(chi_x, 26.12);  // 8 dof, p = 0.001
}

TEST_F(TrainerTest, DiscriminatorLearnsAgainstFrozenGenerator) {
  model::ModelConfig cfg = toy_model();
  cfg.lambda = 0.0;
  GanModels m(cfg, 7, 2e-4);
  std::mt19937_64 rng(8);
  const Batch b = sample_batch(*corpus_, corpus_->all_indices(), Index3::cube(16), 2, model::InputMode::DualIpOp,
                               true, rng);
  const auto snapshot = [&] {
    const auto v = m.generator.params().entries().front().var.value().values();
    return std::vector<float>(v.begin(), v.end());
  };
  const auto before = snapshot();
  std::vector<double> adv_d;
  for (int s = 0; s < 20; ++s) adv_d.push_back(train_step(m, b, nullptr, {.freeze_generator = true}).adv_d);
  EXPECT_EQ(snapshot(), before);
  // Two cross-entropy terms, each ln 2 at zero logits.
  EXPECT_NEAR(adv_d.front(), 2.0 * std::log(2.0), 0.15);
  EXPECT_LT(adv_d.back(), adv_d.front() - 0.2);
  int rises = 0;
  for (std::size_t s = 1; s < adv_d.size(); ++s) rises += adv_d[s] > adv_d[s - 1];
  EXPECT_LE(rises, 2);
}

TEST_F(TrainerTest, ReconstructionDominatedL1Converges) {
  model::ModelConfig cfg = toy_model();
  cfg.lambda = 1e6;
  GanModels m(cfg, 9, 1e-3);
  std::mt19937_64 rng(10);
  const std::vector<std::size_t> pool{0, 1};
  double first = 0, last = 0;
  for (int s = 0; s < 200; ++s) {
    const Batch b = sample_batch(*corpus_, pool, Index3::cube(16), 2, model::InputMode::DualIpOp, true, rng);
    const double r = train_step(m, b, nullptr).recon;
    if (s < 10) first += r / 10;
    if (s >= 190) last += r / 10;
  }
  EXPECT_LT(last, 0.5 * first);
}

// Smooth fat/water fields with exactly consistent echoes.
TrainingCorpus smooth_consistent_corpus() {
  TrainingCorpus c;
  for (int s = 0; s < 2; ++s) {
    Subject sub;
    sub.id = "smooth" + std::to_string(s);
    DixonStudy& st = sub.data.study;
    st.ip = Volume(Index3::cube(24), {1, 1, 1});
    st.op = st.fat = st.water = st.ip;
    for (int k = 0; k < 24; ++k)
      for (int j = 0; j < 24; ++j)
        for (int i = 0; i < 24; ++i) {
          const double w = 0.45 + 0.25 * std::sin(0.3 * i + s) * std::cos(0.2 * j);
          const double f = 0.2 + 0.15 * std::cos(0.25 * k - s);
          st.water.at(i, j, k) = w;
          st.fat.at(i, j, k) = f;
          st.ip.at(i, j, k) = w + f;
          st.op.at(i, j, k) = std::abs(w - f);
        }
    c.subjects.push_back(std::move(sub));
  }
  return c;
}

TEST(TrainStep, DixonReconstructionConverges) {
  const TrainingCorpus corpus = smooth_consistent_corpus();
  const model::ModelConfig cfg = toy_model(model::InputMode::DualIpOp, model::ReconMode::Dixon);
  GanModels m(cfg, 12, 1e-3);
  std::mt19937_64 rng(13);
  const auto pool = corpus.all_indices();
  double first = 0, last = 0;
  for (int s = 0; s < 500; ++s) {
    const Batch b = sample_batch(corpus, pool, Index3::cube(16), 2, model::InputMode::DualIpOp, false, rng);
    const Batch ref = sample_batch(corpus, pool, Index3::cube(16), 2, model::InputMode::DualIpOp, true, rng);
    const double r = train_step(m, b, &ref).recon;
    if (s == 0) first = r;
    if (s >= 490) last += r / 10;
  }
  EXPECT_GT(first, 0.5);
  EXPECT_LT(last, 0.05);
}

TEST_F(TrainerTest, DixonStepRejectsLabelsAndNeedsReference) {
  const model::ModelConfig cfg = toy_model(model::InputMode::DualIpOp, model::ReconMode::Dixon);
  GanModels m(cfg, 1, 1e-3);
  std::mt19937_64 rng(14);
  const auto pool = corpus_->all_indices();
  const Batch labelled = sample_batch(*corpus_, pool, Index3::cube(16), 2, model::InputMode::DualIpOp, true, rng);
  const Batch blind = sample_batch(*corpus_, pool, Index3::cube(16), 2, model::InputMode::DualIpOp, false, rng);
  EXPECT_EQ(code_of([&] { train_step(m, labelled, &labelled); }), ErrorCode::kInput);
  EXPECT_EQ(code_of([&] { train_step(m, blind, nullptr); }), ErrorCode::kInput);
}

TEST_F(TrainerTest, NonFiniteInputRaisesDivergence) {
  GanModels m(toy_model(), 1, 1e-3);
  std::mt19937_64 rng(15);
  Batch b = sample_batch(*corpus_, corpus_->all_indices(), Index3::cube(16), 2, model::InputMode::DualIpOp, true, rng);
  b.inputs.values()[100] = std::numeric_limits<float>::quiet_NaN();
  try {
    train_step(m, b, nullptr);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDivergence);
    EXPECT_EQ(e.step(), 0);
  }
}

TEST_F(TrainerTest, ShortRunHistoryAndArtifacts) {
  TempDir out;
  TrainConfig c = toy_config(out.path());
  c.epochs = 2;
  const TrainResult r = run_training(c, *corpus_);
  EXPECT_EQ(r.record.history.size(), 4u);
  ASSERT_EQ(r.record.epochs.size(), 2u);
  ASSERT_TRUE(r.record.epochs[0].validation.has_value());
  EXPECT_EQ(r.validation_ids.size(), 2u);
  EXPECT_EQ(r.train_ids.size(), 6u);
  for (const auto& v : r.validation_ids) {
    EXPECT_EQ(std::count(r.train_ids.begin(), r.train_ids.end(), v), 0);
  }
  EXPECT_TRUE(std::filesystem::exists(out / "checkpoint_epoch_001.dckp"));
  EXPECT_TRUE(std::filesystem::exists(out / "checkpoint_epoch_002.dckp"));
  EXPECT_EQ(r.final_checkpoint, out / "final.dckp");
  EXPECT_EQ(r.checkpoint.step, 4);
  const std::string csv = slurp(out / "training.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,adv_d,adv_g,recon,total_g");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  const std::string ep = slurp(out / "epochs.csv");
  EXPECT_EQ(ep.substr(0, ep.find('\n')), "epoch,ssim_w,ssim_f,psnr_w,psnr_f");
  for (const auto& l : r.record.history) {
    EXPECT_GE(l.adv_d, 0.0);
    EXPECT_GE(l.adv_g, 0.0);
  }
}

TEST_F(TrainerTest, DefaultStepsAreCorpusOverBatch) {
  TrainConfig c = toy_config();
  c.steps_per_epoch = 0;
  c.validation_subjects = 0;
  EXPECT_EQ(run_training(c, *corpus_).record.history.size(), 4u);
}

TEST_F(TrainerTest, RerunGivesIdenticalCheckpointBytes) {
  TempDir a, b;
  run_training(toy_config(a.path()), *corpus_);
  run_training(toy_config(b.path()), *corpus_);
  const std::string x = slurp(a / "final.dckp");
  EXPECT_FALSE(x.empty());
  EXPECT_EQ(x, slurp(b / "final.dckp"));
  EXPECT_EQ(slurp(a / "training.csv"), slurp(b / "training.csv"));
  EXPECT_EQ(slurp(a / "epochs.csv"), slurp(b / "epochs.csv"));
}

TEST_F(TrainerTest, CheckpointRoundTrip) {
  const TrainResult r = run_training(toy_config(), *corpus_);
  const GanModels m = from_checkpoint(r.checkpoint);
  EXPECT_EQ(m.step, 2);
  const nn::Checkpoint again = to_checkpoint(m);
  EXPECT_EQ(again.config, r.checkpoint.config);
  TempDir t;
  nn::write_checkpoint(r.checkpoint, t / "a.dckp");
  nn::write_checkpoint(again, t / "b.dckp");
  EXPECT_EQ(slurp(t / "a.dckp"), slurp(t / "b.dckp"));
}

TEST_F(TrainerTest, ManifestEntryPoint) {
  TrainConfig c = toy_config();
  c.validation_subjects = 0;
  EXPECT_EQ(run_training(c).record.history.size(), 2u);
}

TEST(TrainConfig, KeyValueRoundTripAndDefaults) {
  TrainConfig c;
  EXPECT_DOUBLE_EQ(c.lr, 0.0002);
  EXPECT_EQ(c.batch_size, 2);
  EXPECT_EQ(c.epochs, 100);
  EXPECT_DOUBLE_EQ(c.model.lambda, 100.0);
  c.corpus_manifest = "x/manifest.json";
  c.out_dir = "runs/a";
  c.model = toy_model(model::InputMode::SingleIp);
  c.seed = 42;
  c.folds = 4;
  c.lr = 3e-4;
  const TrainConfig d = TrainConfig::from_key_values(c.to_key_values());
  EXPECT_EQ(d.to_key_values().to_text(), c.to_key_values().to_text());
  EXPECT_EQ(d.seed, 42u);
  EXPECT_EQ(d.folds, 4);
  EXPECT_DOUBLE_EQ(d.lr, 3e-4);
  EXPECT_EQ(d.model.generator.input_mode, model::InputMode::SingleIp);
}

TEST(TrainConfig, Rejections) {
  KeyValueConfig kv;
  kv.set("mystery", "1");
  EXPECT_EQ(code_of([&] { TrainConfig::from_key_values(kv); }), ErrorCode::kConfig);
  TrainConfig c;
  c.model = toy_model();
  c.batch_size = 0;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kConfig);
  c.batch_size = 2;
  c.model = toy_model(model::InputMode::SingleIp, model::ReconMode::Dixon);
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kConfig);
}

TEST(Folds, DisjointExhaustiveStable) {
  for (std::size_t n : {8u, 10u, 13u}) {
    const auto parts = partition_folds(n, 4, 21);
    ASSERT_EQ(parts.size(), 4u);
    std::set<std::size_t> seen;
    for (std::size_t f = 0; f < 4; ++f) {
      EXPECT_EQ(parts[f].size(), f < 3 ? n / 4 : n - 3 * (n / 4));
      for (std::size_t s : parts[f]) EXPECT_TRUE(seen.insert(s).second);
    }
    EXPECT_EQ(seen.size(), n);
    EXPECT_EQ(partition_folds(n, 4, 21), parts);
  }
  EXPECT_NE(partition_folds(12, 4, 1), partition_folds(12, 4, 2));
  EXPECT_EQ(code_of([] { partition_folds(3, 4, 0); }), ErrorCode::kConfig);
}

TEST_F(TrainerTest, CrossValidationReport) {
  TrainConfig c = toy_config();
  c.steps_per_epoch = 1;
  const CrossValidationResult cv = run_cross_validation(c, *corpus_, 4);
  ASSERT_EQ(cv.folds.size(), 4u);
  std::set<std::string> tested;
  for (const auto& f : cv.folds) {
    EXPECT_EQ(f.train_ids.size(), 6u);
    EXPECT_EQ(f.test_ids.size(), 2u);
    EXPECT_EQ(f.report.subjects.size(), 2u);
    for (const auto& id : f.test_ids) {
      EXPECT_TRUE(tested.insert(id).second);
      EXPECT_EQ(std::count(f.train_ids.begin(), f.train_ids.end(), id), 0);
    }
  }
  EXPECT_EQ(tested.size(), 8u);
  const std::string rep = cv.report();
  std::istringstream lines(rep);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    ++n;
    const std::string head = n <= 4 ? "Fold " + std::to_string(n) + " (train 6, test 2): SSIM W " : "All folds: SSIM W ";
    EXPECT_EQ(line.rfind(head, 0), 0u) << line;
    EXPECT_NE(line.find(" ± "), std::string::npos);
    EXPECT_NE(line.find("| PSNR F "), std::string::npos);
  }
  EXPECT_EQ(n, 5);
}

}  // namespace
}  // namespace dixon::train
