#pragma once

#include <string>
#include <vector>

#include "dixon/volume.hpp"

namespace dixon::eval {

inline constexpr double kDefaultSwapThreshold = 0.9;
inline constexpr int kDefaultMinCluster = 27;

struct Cluster {
  std::size_t size = 0;
  Index3 bbox_min;
  Index3 bbox_max;  // inclusive
};

struct SwapLabelMap {
  Volume mask;  // 1 on kept cluster voxels
  std::vector<Cluster> clusters;
  double threshold = kDefaultSwapThreshold;
  int min_cluster = kDefaultMinCluster;

  std::size_t voxel_count() const;
};

// Candidates are voxels where |F - F'| > threshold and |W - W'| > threshold;
// 26-connected components smaller than min_cluster are discarded.
SwapLabelMap swap_label_map(const Volume& original_fat, const Volume& original_water, const Volume& pred_fat,
                            const Volume& pred_water, double threshold = kDefaultSwapThreshold,
                            int min_cluster = kDefaultMinCluster);

// 26-connected components of the non-zero voxels of `mask`, in order of their
// first voxel (x-fastest scan). `labels` receives 1-based component ids.
std::vector<Cluster> connected_components(const Volume& mask, std::vector<int>* labels = nullptr);

struct FpSummary {
  std::size_t subjects = 0;
  double mean_clusters = 0.0;
  double mean_voxels = 0.0;
  double sd_voxels = 0.0;
  std::size_t total_voxels_flagged = 0;
  std::size_t total_voxels = 0;
  double rate = 0.0;  // flagged / total, background included

  // "4.29 clusters per subject, 10,803 ± 9,400 voxels per subject (0.074% of all voxels)"
  std::string to_string() const;
  std::string to_json() const;
};

FpSummary fp_statistics(const std::vector<SwapLabelMap>& maps);

// 12345.6 -> "12,346"
std::string thousands(double value);

}  // namespace dixon::eval
