#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include "dixon/volume.hpp"

namespace dixon {

enum class Provenance : std::uint8_t { SimulatedTruth, SimulatedScanner, Predicted };

std::string_view to_string(Provenance p);

// Four co-registered channels of one subject.
struct DixonStudy {
  Volume ip;
  Volume op;
  Volume fat;
  Volume water;
  Provenance provenance = Provenance::SimulatedTruth;
  std::string subject_id;

  // Throws kShape when channels disagree on grid or carry the wrong tag.
  void validate() const;
};

struct NormalizedStudy {
  DixonStudy study;
  double scale = 1.0;
};

// Nearest-rank percentile: sorted[ceil(p/100 * n) - 1] with p an integer percent.
double nearest_rank_percentile(std::vector<double> values, int percent);

// Divides every channel by the 99th percentile of the pooled intensities of all
// four channels and clamps into [0, 1]. Throws kDegenerateScale when that
// percentile is not strictly positive.
NormalizedStudy normalize_study(const DixonStudy& s);

// Same scale rule over an arbitrary set of channels (used at inference time
// when fat/water are not available).
double joint_scale(std::initializer_list<const Volume*> channels);

// Divides by `scale` and clamps into [0, 1].
Volume apply_scale(const Volume& v, double scale);

// Reads <dir>/{ip,op,fat,water}.dvol. Missing channels are left empty only
// when `require_all` is false.
DixonStudy read_study(const std::filesystem::path& dir, bool require_all = true);
void write_study(const DixonStudy& s, const std::filesystem::path& dir);

}  // namespace dixon
