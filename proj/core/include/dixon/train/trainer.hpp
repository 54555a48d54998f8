#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dixon/config_file.hpp"
#include "dixon/eval/metrics.hpp"
#include "dixon/model/networks.hpp"
#include "dixon/model/objective.hpp"
#include "dixon/nn/checkpoint.hpp"
#include "dixon/sim/corpus.hpp"
#include "dixon/study.hpp"

namespace dixon::train {

struct TrainConfig {
  std::filesystem::path corpus_manifest;
  std::filesystem::path out_dir;
  model::ModelConfig model;
  int batch_size = 2;
  double lr = 2e-4;
  int epochs = 100;
  int steps_per_epoch = 0;  // 0: corpus size / batch size
  std::uint64_t seed = 0;
  std::optional<int> folds;
  int validation_subjects = 2;  // held out of the training pool for per-epoch SSIM/PSNR
  bool write_epoch_checkpoints = true;

  void validate() const;
  KeyValueConfig to_key_values() const;
  // Unknown keys are rejected with kConfig.
  static TrainConfig from_key_values(const KeyValueConfig& kv);
};

// Normalized scanner channels of one subject held in memory.
struct Subject {
  std::string id;
  NormalizedStudy data;
};

struct TrainingCorpus {
  std::vector<Subject> subjects;

  std::vector<std::size_t> all_indices() const;
  std::size_t find(const std::string& id) const;  // throws kInput when absent
};

// Loads the scanner studies of the manifest. With `swap_free_only` the
// swapped subjects are skipped.
TrainingCorpus load_training_corpus(const sim::CorpusManifest& manifest, bool swap_free_only = true);

// One mini-batch of crops, channels first: inputs (B, 1|2, crop), ip and op
// (B, 1, crop) and, when requested, labels (B, 2, crop) with fat then water.
struct Batch {
  nn::Tensor<float> inputs;
  nn::Tensor<float> ip;
  nn::Tensor<float> op;
  std::optional<nn::Tensor<float>> labels;
  std::vector<std::size_t> subjects;
  std::vector<Index3> origins;
};

// Each element: a uniformly random subject from `pool` and a uniformly random
// crop origin. Throws kConfig when the crop does not fit a subject.
Batch sample_batch(const TrainingCorpus& corpus, const std::vector<std::size_t>& pool, Index3 crop, int batch_size,
                   model::InputMode mode, bool with_labels, std::mt19937_64& rng);

struct GanModels {
  model::ModelConfig cfg;
  model::Generator<float> generator;
  model::Discriminator<float> discriminator;
  nn::AdamState g_opt;
  nn::AdamState d_opt;
  std::int64_t step = 0;

  GanModels(const model::ModelConfig& cfg, std::uint64_t seed, double lr = 2e-4);
};

nn::Checkpoint to_checkpoint(const GanModels& models);
GanModels from_checkpoint(const nn::Checkpoint& ck);

struct StepOptions {
  bool freeze_generator = false;
};

// One discriminator update (real vs generated pair) then one generator update
// (adv_g + lambda * recon). In Dixon mode `batch` carries no labels and the
// discriminator's real pairs come from the separately drawn `reference` batch.
// A non-finite loss raises DivergenceError with the step index.
model::LossBundle train_step(GanModels& models, const Batch& batch, const Batch* reference,
                             const StepOptions& opt = {});

struct EpochRecord {
  int epoch = 0;
  double seconds = 0.0;
  std::optional<eval::MetricsReport> validation;
};

struct TrainRecord {
  std::vector<model::LossBundle> history;
  std::vector<EpochRecord> epochs;

  // step,adv_d,adv_g,recon,total_g
  std::string losses_csv() const;
  std::string epochs_csv() const;  // no timings, so reruns give equal bytes
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  TrainRecord record;
  std::filesystem::path final_checkpoint;  // empty when out_dir is empty
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
};

// Trains on the given subjects (all swap-free subjects when empty).
TrainResult run_training(const TrainConfig& cfg, const TrainingCorpus& corpus,
                         std::vector<std::size_t> subjects = {});
TrainResult run_training(const TrainConfig& cfg);

// Predicts every listed subject with tiles of the generator's crop size and
// scores against its normalized scanner fat/water.
eval::MetricsReport evaluate_generator(const model::Generator<float>& g, const TrainingCorpus& corpus,
                                       const std::vector<std::size_t>& subjects);

struct Fold {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  eval::MetricsReport report;
};

// Seeded shuffle, then `folds` consecutive slices; the remainder goes to the
// last fold. Throws kConfig when there are fewer subjects than folds.
std::vector<std::vector<std::size_t>> partition_folds(std::size_t subjects, int folds, std::uint64_t seed);

struct CrossValidationResult {
  std::vector<Fold> folds;
  std::string report() const;  // one "Fold k: SSIM W m ± sd | ..." line per fold plus "All"
};

CrossValidationResult run_cross_validation(const TrainConfig& cfg, int folds = 4);
CrossValidationResult run_cross_validation(const TrainConfig& cfg, const TrainingCorpus& corpus, int folds);

}  // namespace dixon::train
