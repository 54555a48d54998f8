#include "dixon/eval/swapmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dixon/eval/metrics.hpp"
#include "json.hpp"

namespace dixon::eval {

std::size_t SwapLabelMap::voxel_count() const {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.size;
  return n;
}

std::vector<Cluster> connected_components(const Volume& mask, std::vector<int>* labels_out) {
  const Index3 d = mask.dims();
  std::vector<int> labels(mask.size(), 0);
  std::vector<Cluster> clusters;
  std::vector<std::size_t> stack;
  for (int k = 0; k < d.z; ++k) {
    for (int j = 0; j < d.y; ++j) {
      for (int i = 0; i < d.x; ++i) {
        const std::size_t seed = mask.index(i, j, k);
        if (mask[seed] == 0.0 || labels[seed] != 0) continue;
        const int id = static_cast<int>(clusters.size()) + 1;
        Cluster c{0, {i, j, k}, {i, j, k}};
        labels[seed] = id;
        stack.push_back(seed);
        while (!stack.empty()) {
          const std::size_t n = stack.back();
          stack.pop_back();
          const int x = static_cast<int>(n % static_cast<std::size_t>(d.x));
          const int y = static_cast<int>((n / static_cast<std::size_t>(d.x)) % static_cast<std::size_t>(d.y));
          const int z = static_cast<int>(n / (static_cast<std::size_t>(d.x) * static_cast<std::size_t>(d.y)));
          ++c.size;
          c.bbox_min = {std::min(c.bbox_min.x, x), std::min(c.bbox_min.y, y), std::min(c.bbox_min.z, z)};
          c.bbox_max = {std::max(c.bbox_max.x, x), std::max(c.bbox_max.y, y), std::max(c.bbox_max.z, z)};
          for (int dz = -1; dz <= 1; ++dz) {
            for (int dy = -1; dy <= 1; ++dy) {
              for (int dx = -1; dx <= 1; ++dx) {
                if (!mask.contains(x + dx, y + dy, z + dz)) continue;
                const std::size_t m = mask.index(x + dx, y + dy, z + dz);
                if (mask[m] != 0.0 && labels[m] == 0) {
                  labels[m] = id;
                  stack.push_back(m);
                }
              }
            }
          }
        }
        clusters.push_back(c);
      }
    }
  }
  if (labels_out) *labels_out = std::move(labels);
  return clusters;
}

SwapLabelMap swap_label_map(const Volume& original_fat, const Volume& original_water, const Volume& pred_fat,
                            const Volume& pred_water, double threshold, int min_cluster) {
  for (const Volume* v : {&original_water, &pred_fat, &pred_water}) {
    if (v->dims() != original_fat.dims()) fail(ErrorCode::kShape, "swap_label_map inputs are not co-registered");
  }
  Volume candidates(original_fat.dims(), original_fat.spacing());
  for (std::size_t n = 0; n < candidates.size(); ++n) {
    const bool fat_off = std::abs(original_fat[n] - pred_fat[n]) > threshold;
    const bool water_off = std::abs(original_water[n] - pred_water[n]) > threshold;
    candidates[n] = fat_off && water_off ? 1.0 : 0.0;
  }
  std::vector<int> labels;
  const auto all = connected_components(candidates, &labels);
  SwapLabelMap map;
  map.threshold = threshold;
  map.min_cluster = min_cluster;
  map.mask = Volume(original_fat.dims(), original_fat.spacing());
  std::vector<bool> keep(all.size() + 1, false);
  for (std::size_t c = 0; c < all.size(); ++c) {
    if (all[c].size >= static_cast<std::size_t>(std::max(min_cluster, 1))) {
      keep[c + 1] = true;
      map.clusters.push_back(all[c]);
    }
  }
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] != 0 && keep[static_cast<std::size_t>(labels[n])]) map.mask[n] = 1.0;
  }
  return map;
}

std::string thousands(double value) {
  const long long v = std::llround(value);
  std::string digits = std::to_string(v < 0 ? -v : v);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return v < 0 ? "-" + out : out;
}

FpSummary fp_statistics(const std::vector<SwapLabelMap>& maps) {
  if (maps.empty()) fail(ErrorCode::kInput, "fp_statistics needs at least one label map");
  FpSummary s;
  s.subjects = maps.size();
  std::vector<double> voxels;
  std::size_t clusters = 0;
  for (const auto& m : maps) {
    clusters += m.clusters.size();
    const std::size_t v = m.voxel_count();
    voxels.push_back(static_cast<double>(v));
    s.total_voxels_flagged += v;
    s.total_voxels += m.mask.size();
  }
  const MeanSd ms = mean_sd(voxels);
  s.mean_clusters = static_cast<double>(clusters) / static_cast<double>(maps.size());
  s.mean_voxels = ms.mean;
  s.sd_voxels = ms.sd;
  s.rate = s.total_voxels ? static_cast<double>(s.total_voxels_flagged) / static_cast<double>(s.total_voxels) : 0.0;
  return s;
}

std::string FpSummary::to_string() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%.2f clusters per subject, %s ± %s voxels per subject (%.3f%% of all voxels)",
                mean_clusters, thousands(mean_voxels).c_str(), thousands(sd_voxels).c_str(), rate * 100.0);
  return buf;
}

std::string FpSummary::to_json() const {
  nlohmann::json j;
  j["subjects"] = subjects;
  j["mean_clusters"] = mean_clusters;
  j["mean_voxels"] = mean_voxels;
  j["sd_voxels"] = sd_voxels;
  j["total_voxels_flagged"] = total_voxels_flagged;
  j["total_voxels"] = total_voxels;
  j["rate"] = rate;
  j["rate_percent"] = rate * 100.0;
  j["summary"] = to_string();
  return j.dump(2);
}

}  // namespace dixon::eval
