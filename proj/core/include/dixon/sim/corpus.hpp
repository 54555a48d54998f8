#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dixon/sim/phantom.hpp"

namespace dixon::sim {

// Per-study randomization of the base phantom.
struct CorpusOptions {
  double center_jitter = 0.03;       // fraction of the volume extent
  double radius_jitter = 0.08;       // relative
  double fat_fraction_jitter = 0.6;  // scaled by 4 ff (1 - ff) so near-pure tissue stays near-pure
  double density_jitter = 0.05;      // relative, never applied to bodies with proton density 1
  int max_directives = 3;
};

struct CorpusEntry {
  std::string subject_id;
  bool swapped = false;
  std::size_t swap_voxels = 0;
  std::vector<std::string> directive_kinds;
  // Relative to the manifest directory.
  std::string truth_dir;
  std::string scanner_dir;
  std::string swap_mask;
  std::string spec_file;
};

struct CorpusManifest {
  std::filesystem::path root;  // directory holding manifest.json
  std::uint64_t seed = 0;
  double swap_rate = 0.0;
  std::string base_spec_json;
  std::vector<CorpusEntry> studies;

  std::filesystem::path truth_dir(const CorpusEntry& e) const { return root / e.truth_dir; }
  std::filesystem::path scanner_dir(const CorpusEntry& e) const { return root / e.scanner_dir; }
  std::filesystem::path swap_mask_path(const CorpusEntry& e) const { return root / e.swap_mask; }
};

// Seed derived from (seed, index) only, so each study is independent of the
// order in which studies are produced.
std::mt19937_64 study_rng(std::uint64_t seed, std::uint64_t index);

PhantomSpec randomize_spec(const PhantomSpec& base, std::mt19937_64& rng, const CorpusOptions& opt = {});
SwapDirective random_directive(Index3 dims, std::mt19937_64& rng);

// Writes n studies under out_dir and out_dir/manifest.json. Exactly
// lround(swap_rate * n) studies, picked by a seeded shuffle, get 1 to
// max_directives random swap directives.
CorpusManifest generate_corpus(const PhantomSpec& base, int n, double swap_rate, std::uint64_t seed,
                               const std::filesystem::path& out_dir, const CorpusOptions& opt = {});

void write_corpus_manifest(const CorpusManifest& m, const std::filesystem::path& path);
CorpusManifest read_corpus_manifest(const std::filesystem::path& path);

}  // namespace dixon::sim
