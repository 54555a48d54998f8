#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dixon/volume.hpp"

namespace dixon::eval {

// 10 log10(mpi^2 / mse). Identical volumes have no finite PSNR and return
// nullopt.
std::optional<double> psnr(const Volume& reference, const Volume& test, double mpi = 1.0);

double mean_squared_error(const Volume& a, const Volume& b);

struct SsimConfig {
  Index3 window{11, 11, 11};
  double c1 = 1e-4;  // (0.01 L)^2, L = 1
  double c2 = 9e-4;  // (0.03 L)^2

  void validate() const;
};

// Mean SSIM over every fully interior window, population statistics.
double ssim(const Volume& reference, const Volume& test, const SsimConfig& cfg = {});

struct SubjectMetrics {
  std::string subject_id;
  double ssim_w = 0.0;
  double ssim_f = 0.0;
  std::optional<double> psnr_w;
  std::optional<double> psnr_f;
};

SubjectMetrics evaluate_subject(const std::string& subject_id, const Volume& ref_fat, const Volume& ref_water,
                                const Volume& pred_fat, const Volume& pred_water, const SsimConfig& cfg = {});

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single value
  std::size_t count = 0;
  bool infinite = false;  // every value was an infinite PSNR
};

MeanSd mean_sd(const std::vector<double>& values);

struct MetricsReport {
  std::vector<SubjectMetrics> subjects;  // sorted by subject_id

  MeanSd ssim_w() const;
  MeanSd ssim_f() const;
  MeanSd psnr_w() const;  // finite values only
  MeanSd psnr_f() const;

  void sort();
  // "SSIM W 0.961 ± 0.006 | SSIM F ... | PSNR W 29.47 ± 1.20 dB | PSNR F ..."
  std::string summary_line() const;
  // subject_id,ssim_w,ssim_f,psnr_w,psnr_f rows plus mean and sd rows.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

std::string format_mean_sd(const MeanSd& m, int decimals);

}  // namespace dixon::eval
