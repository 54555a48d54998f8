#include "dixon/study.hpp"

#include <algorithm>

#include "dixon/volume_io.hpp"

namespace dixon {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::SimulatedTruth: return "SIMULATED_TRUTH";
    case Provenance::SimulatedScanner: return "SIMULATED_SCANNER";
    case Provenance::Predicted: return "PREDICTED";
  }
  return "SIMULATED_TRUTH";
}

void DixonStudy::validate() const {
  const Volume* channels[] = {&ip, &op, &fat, &water};
  const Channel tags[] = {Channel::IP, Channel::OP, Channel::Fat, Channel::Water};
  for (int c = 0; c < 4; ++c) {
    if (!channels[c]->same_grid(ip)) {
      fail(ErrorCode::kShape, std::string(to_string(tags[c])) + " channel grid differs from IP in study " + subject_id);
    }
    if (channels[c]->tag() != tags[c]) {
      fail(ErrorCode::kShape, "channel tag mismatch for " + std::string(to_string(tags[c])) + " in study " +
                                  subject_id);
    }
  }
}

double nearest_rank_percentile(std::vector<double> values, int percent) {
  if (values.empty()) fail(ErrorCode::kInput, "percentile of an empty set");
  const std::size_t n = values.size();
  // ceil(percent * n / 100) in integer arithmetic.
  std::size_t rank = (static_cast<std::size_t>(percent) * n + 99) / 100;
  rank = std::clamp<std::size_t>(rank, 1, n);
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(values.begin(), nth, values.end());
  return *nth;
}

double joint_scale(std::initializer_list<const Volume*> channels) {
  std::vector<double> pooled;
  for (const Volume* v : channels) {
    if (v != nullptr) pooled.insert(pooled.end(), v->data().begin(), v->data().end());
  }
  if (pooled.empty()) fail(ErrorCode::kDegenerateScale, "no intensities to normalize");
  const double scale = nearest_rank_percentile(std::move(pooled), 99);
  if (!(scale > 0.0)) {
    fail(ErrorCode::kDegenerateScale, "99th percentile of pooled intensities is " + std::to_string(scale));
  }
  return scale;
}

Volume apply_scale(const Volume& v, double scale) {
  Volume out = v;
  for (double& x : out.data()) x = std::clamp(x / scale, 0.0, 1.0);
  return out;
}

NormalizedStudy normalize_study(const DixonStudy& s) {
  s.validate();
  const double scale = joint_scale({&s.ip, &s.op, &s.fat, &s.water});
  NormalizedStudy out{s, scale};
  out.study.ip = apply_scale(s.ip, scale);
  out.study.op = apply_scale(s.op, scale);
  out.study.fat = apply_scale(s.fat, scale);
  out.study.water = apply_scale(s.water, scale);
  return out;
}

DixonStudy read_study(const std::filesystem::path& dir, bool require_all) {
  DixonStudy s;
  s.subject_id = dir.filename().string();
  auto load = [&](const char* name, Channel tag, Volume& dst) {
    const auto p = dir / (std::string(name) + ".dvol");
    if (!std::filesystem::exists(p)) {
      if (require_all) fail(ErrorCode::kIo, "missing channel file " + p.string());
      return;
    }
    dst = read_volume(p, tag);
  };
  load("ip", Channel::IP, s.ip);
  load("op", Channel::OP, s.op);
  load("fat", Channel::Fat, s.fat);
  load("water", Channel::Water, s.water);
  if (require_all) s.validate();
  return s;
}

void write_study(const DixonStudy& s, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  write_volume(s.ip, dir / "ip.dvol");
  write_volume(s.op, dir / "op.dvol");
  write_volume(s.fat, dir / "fat.dvol");
  write_volume(s.water, dir / "water.dvol");
}

}  // namespace dixon
