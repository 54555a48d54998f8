#include "dixon/sim/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dixon/parallel.hpp"
#include "dixon/volume_io.hpp"
#include "json.hpp"

namespace dixon::sim {

using nlohmann::json;

std::mt19937_64 study_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0xD1C0U};
  return std::mt19937_64(seq);
}

PhantomSpec randomize_spec(const PhantomSpec& base, std::mt19937_64& rng, const CorpusOptions& opt) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PhantomSpec s = base;
  // One global shift keeps nested bodies (fat shell around muscle) aligned.
  std::array<double, 3> shift{};
  for (int a = 0; a < 3; ++a) shift[static_cast<std::size_t>(a)] = u(rng) * opt.center_jitter * (s.dims[a] - 1);
  const double global_scale = 1.0 + u(rng) * opt.radius_jitter;
  for (auto& b : s.bodies) {
    for (int a = 0; a < 3; ++a) {
      const auto ai = static_cast<std::size_t>(a);
      b.shape.center[ai] = std::clamp(b.shape.center[ai] + shift[ai], 0.0, static_cast<double>(s.dims[a] - 1));
      b.shape.radii[ai] *= global_scale;
    }
    const double ff = b.fat_fraction;
    b.fat_fraction = std::clamp(ff + u(rng) * opt.fat_fraction_jitter * 4.0 * ff * (1.0 - ff), 0.0, 1.0);
    if (b.proton_density != 1.0) b.proton_density *= 1.0 + u(rng) * opt.density_jitter;
  }
  s.seed = rng();
  s.swaps.clear();
  return s;
}

SwapDirective random_directive(Index3 dims, std::mt19937_64& rng) {
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, std::max(lo, hi))(rng); };
  switch (uniform_int(0, 3)) {
    case 0: {
      const int len = uniform_int(3, std::max(3, dims.z / 4));
      const int z0 = uniform_int(0, dims.z - len);
      return FullSlab{z0, z0 + len - 1};
    }
    case 1: {
      const int len = uniform_int(3, std::max(3, dims.z / 3));
      const int z0 = uniform_int(0, std::max(0, dims.z / 3 - len));
      return HalfLeg{uniform_int(0, 1) == 0 ? Side::Left : Side::Right, z0, z0 + len - 1};
    }
    case 2: {
      std::uniform_real_distribution<double> frac(0.3, 0.7);
      const double r = std::max(3.0, std::uniform_real_distribution<double>(3.0, std::max(3.0, dims.z / 6.0))(rng));
      return Blob{{frac(rng) * (dims.x - 1), frac(rng) * (dims.y - 1), frac(rng) * (dims.z - 1)}, r};
    }
    default:
      return BoundaryShell{uniform_int(2, 4)};
  }
}

namespace {

json manifest_to_json(const CorpusManifest& m) {
  json j;
  j["seed"] = m.seed;
  j["swap_rate"] = m.swap_rate;
  j["count"] = m.studies.size();
  j["base_spec"] = json::parse(m.base_spec_json.empty() ? "null" : m.base_spec_json);
  json studies = json::array();
  for (const auto& e : m.studies) {
    json s;
    s["subject_id"] = e.subject_id;
    s["swapped"] = e.swapped;
    s["swap_voxels"] = e.swap_voxels;
    s["directives"] = e.directive_kinds;
    s["truth"] = {{"ip", e.truth_dir + "/ip.dvol"},
                  {"op", e.truth_dir + "/op.dvol"},
                  {"fat", e.truth_dir + "/fat.dvol"},
                  {"water", e.truth_dir + "/water.dvol"}};
    s["scanner"] = {{"ip", e.scanner_dir + "/ip.dvol"},
                    {"op", e.scanner_dir + "/op.dvol"},
                    {"fat", e.scanner_dir + "/fat.dvol"},
                    {"water", e.scanner_dir + "/water.dvol"}};
    s["swap_mask"] = e.swap_mask;
    s["spec"] = e.spec_file;
    studies.push_back(std::move(s));
  }
  j["studies"] = std::move(studies);
  return j;
}

std::string parent_of(const std::string& p) {
  const auto slash = p.rfind('/');
  return slash == std::string::npos ? std::string{} : p.substr(0, slash);
}

}  // namespace

CorpusManifest generate_corpus(const PhantomSpec& base, int n, double swap_rate, std::uint64_t seed,
                               const std::filesystem::path& out_dir, const CorpusOptions& opt) {
  if (n < 1) fail(ErrorCode::kConfig, "corpus size must be at least 1");
  if (!(swap_rate >= 0.0 && swap_rate <= 1.0)) fail(ErrorCode::kConfig, "swap_rate must lie in [0, 1]");
  base.validate();

  const auto quota = static_cast<std::size_t>(std::lround(swap_rate * n));
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 pick = study_rng(seed, ~std::uint64_t{0});
  std::shuffle(order.begin(), order.end(), pick);
  std::vector<bool> swapped(static_cast<std::size_t>(n), false);
  for (std::size_t i = 0; i < quota; ++i) swapped[order[i]] = true;

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + out_dir.string() + ": " + ec.message());

  CorpusManifest m;
  m.root = out_dir;
  m.seed = seed;
  m.swap_rate = swap_rate;
  m.base_spec_json = phantom_spec_to_json(base);
  m.studies.resize(static_cast<std::size_t>(n));

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t idx) {
    std::mt19937_64 rng = study_rng(seed, idx);
    PhantomSpec spec = randomize_spec(base, rng, opt);
    if (swapped[idx]) {
      const int count = std::uniform_int_distribution<int>(1, std::max(1, opt.max_directives))(rng);
      for (int d = 0; d < count; ++d) spec.swaps.push_back(random_directive(spec.dims, rng));
    }
    char id[32];
    std::snprintf(id, sizeof(id), "subject_%04zu", idx);
    const StudyPair pair = make_study(spec, id);

    CorpusEntry& e = m.studies[idx];
    e.subject_id = id;
    e.truth_dir = std::string(id) + "/truth";
    e.scanner_dir = std::string(id) + "/scanner";
    e.swap_mask = std::string(id) + "/swap_mask.dvol";
    e.spec_file = std::string(id) + "/phantom.json";
    for (const auto& d : spec.swaps) e.directive_kinds.push_back(directive_kind(d));
    for (double v : pair.swap_mask.data()) e.swap_voxels += v != 0.0 ? 1 : 0;
    e.swapped = e.swap_voxels > 0 || !spec.swaps.empty();

    write_study(pair.truth, out_dir / e.truth_dir);
    write_study(pair.scanner, out_dir / e.scanner_dir);
    write_volume(pair.swap_mask, out_dir / e.swap_mask);
    std::ofstream sf(out_dir / e.spec_file, std::ios::trunc);
    sf << phantom_spec_to_json(spec) << '\n';
    if (!sf) fail(ErrorCode::kIo, "cannot write " + (out_dir / e.spec_file).string());
  });

  write_corpus_manifest(m, out_dir / "manifest.json");
  return m;
}

void write_corpus_manifest(const CorpusManifest& m, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorCode::kIo, "cannot write manifest " + path.string());
  f << manifest_to_json(m).dump(2) << '\n';
  if (!f) fail(ErrorCode::kIo, "cannot write manifest " + path.string());
}

CorpusManifest read_corpus_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::kIo, "cannot open manifest " + path.string());
  CorpusManifest m;
  m.root = path.parent_path();
  try {
    const json j = json::parse(f);
    m.seed = j.value("seed", std::uint64_t{0});
    m.swap_rate = j.value("swap_rate", 0.0);
    if (j.contains("base_spec") && !j.at("base_spec").is_null()) m.base_spec_json = j.at("base_spec").dump();
    for (const auto& s : j.at("studies")) {
      CorpusEntry e;
      e.subject_id = s.at("subject_id").get<std::string>();
      e.swapped = s.value("swapped", false);
      e.swap_voxels = s.value("swap_voxels", std::size_t{0});
      e.directive_kinds = s.value("directives", std::vector<std::string>{});
      e.truth_dir = parent_of(s.at("truth").at("ip").get<std::string>());
      e.scanner_dir = parent_of(s.at("scanner").at("ip").get<std::string>());
      e.swap_mask = s.value("swap_mask", std::string{});
      e.spec_file = s.value("spec", std::string{});
      m.studies.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, "manifest " + path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace dixon::sim
