#include "dixon/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace dixon::eval {

namespace {

void require_same_grid(const Volume& a, const Volume& b, const char* what) {
  if (a.dims() != b.dims()) {
    fail(ErrorCode::kShape, std::string(what) + ": dims " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  }
}

// Sums of `src` over the window [i, i + w) along one axis, for every valid i.
// Input dims `in`, output dims equal except along `axis` (n - w + 1).
std::vector<double> window_sums(const std::vector<double>& src, Index3 in, int axis, int w, Index3& out) {
  out = in;
  out[axis] = in[axis] - w + 1;
  std::vector<double> dst(out.count());
  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(in.x);
  const std::size_t sz = static_cast<std::size_t>(in.x) * static_cast<std::size_t>(in.y);
  const std::size_t step = axis == 0 ? sx : (axis == 1 ? sy : sz);
  std::size_t n = 0;
  for (int k = 0; k < out.z; ++k) {
    for (int j = 0; j < out.y; ++j) {
      for (int i = 0; i < out.x; ++i, ++n) {
        const double* p = src.data() + static_cast<std::size_t>(i) * sx + static_cast<std::size_t>(j) * sy +
                          static_cast<std::size_t>(k) * sz;
        double s = 0.0;
        for (int t = 0; t < w; ++t) s += p[static_cast<std::size_t>(t) * step];
        dst[n] = s;
      }
    }
  }
  return dst;
}

std::vector<double> box_sums(std::vector<double> v, Index3 dims, Index3 window) {
  for (int a = 0; a < 3; ++a) {
    Index3 out;
    v = window_sums(v, dims, a, window[a], out);
    dims = out;
  }
  return v;
}

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v, 6) : "inf"; }

}  // namespace

double mean_squared_error(const Volume& a, const Volume& b) {
  require_same_grid(a, b, "mse");
  if (a.size() == 0) fail(ErrorCode::kSize, "mse of empty volumes");
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) s += (a[n] - b[n]) * (a[n] - b[n]);
  return s / static_cast<double>(a.size());
}

std::optional<double> psnr(const Volume& reference, const Volume& test, double mpi) {
  const double mse = mean_squared_error(reference, test);
  if (mse == 0.0) return std::nullopt;
  return 10.0 * std::log10(mpi * mpi / mse);
}

void SsimConfig::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (window[a] < 1 || window[a] % 2 == 0) fail(ErrorCode::kConfig, "SSIM window must be odd and positive");
  }
  if (!(c1 > 0.0) || !(c2 > 0.0)) fail(ErrorCode::kConfig, "SSIM constants must be positive");
}

double ssim(const Volume& reference, const Volume& test, const SsimConfig& cfg) {
  cfg.validate();
  require_same_grid(reference, test, "ssim");
  const Index3 d = reference.dims();
  for (int a = 0; a < 3; ++a) {
    if (d[a] < cfg.window[a]) {
      fail(ErrorCode::kSize, "volume " + to_string(d) + " is smaller than the SSIM window " + to_string(cfg.window));
    }
  }
  const std::size_t n = reference.size();
  std::vector<double> x(reference.data().begin(), reference.data().end());
  std::vector<double> y(test.data().begin(), test.data().end());
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto sx = box_sums(std::move(x), d, cfg.window);
  const auto sy = box_sums(std::move(y), d, cfg.window);
  const auto sxx = box_sums(std::move(xx), d, cfg.window);
  const auto syy = box_sums(std::move(yy), d, cfg.window);
  const auto sxy = box_sums(std::move(xy), d, cfg.window);
  const double inv = 1.0 / static_cast<double>(cfg.window.count());
  double total = 0.0;
  for (std::size_t w = 0; w < sx.size(); ++w) {
    const double mx = sx[w] * inv;
    const double my = sy[w] * inv;
    const double vx = sxx[w] * inv - mx * mx;
    const double vy = syy[w] * inv - my * my;
    const double cxy = sxy[w] * inv - mx * my;
    total += ((2 * mx * my + cfg.c1) * (2 * cxy + cfg.c2)) / ((mx * mx + my * my + cfg.c1) * (vx + vy + cfg.c2));
  }
  return total / static_cast<double>(sx.size());
}

SubjectMetrics evaluate_subject(const std::string& subject_id, const Volume& ref_fat, const Volume& ref_water,
                                const Volume& pred_fat, const Volume& pred_water, const SsimConfig& cfg) {
  SubjectMetrics m;
  m.subject_id = subject_id;
  m.ssim_w = ssim(ref_water, pred_water, cfg);
  m.ssim_f = ssim(ref_fat, pred_fat, cfg);
  m.psnr_w = psnr(ref_water, pred_water);
  m.psnr_f = psnr(ref_fat, pred_fat);
  return m;
}

MeanSd mean_sd(const std::vector<double>& values) {
  MeanSd r;
  r.count = values.size();
  if (values.empty()) return r;
  double s = 0.0;
  for (double v : values) s += v;
  r.mean = s / static_cast<double>(values.size());
  if (values.size() > 1) {
    double q = 0.0;
    for (double v : values) q += (v - r.mean) * (v - r.mean);
    r.sd = std::sqrt(q / static_cast<double>(values.size() - 1));
  }
  return r;
}

namespace {

template <typename Get>
MeanSd collect(const std::vector<SubjectMetrics>& subjects, Get get) {
  std::vector<double> v;
  for (const auto& s : subjects) v.push_back(get(s));
  return mean_sd(v);
}

template <typename Get>
MeanSd collect_finite(const std::vector<SubjectMetrics>& subjects, Get get) {
  std::vector<double> v;
  for (const auto& s : subjects) {
    if (auto x = get(s)) v.push_back(*x);
  }
  MeanSd r = mean_sd(v);
  r.infinite = v.empty() && !subjects.empty();
  return r;
}

}  // namespace

MeanSd MetricsReport::ssim_w() const { return collect(subjects, [](const auto& s) { return s.ssim_w; }); }
MeanSd MetricsReport::ssim_f() const { return collect(subjects, [](const auto& s) { return s.ssim_f; }); }
MeanSd MetricsReport::psnr_w() const { return collect_finite(subjects, [](const auto& s) { return s.psnr_w; }); }
MeanSd MetricsReport::psnr_f() const { return collect_finite(subjects, [](const auto& s) { return s.psnr_f; }); }

void MetricsReport::sort() {
  std::sort(subjects.begin(), subjects.end(),
            [](const SubjectMetrics& a, const SubjectMetrics& b) { return a.subject_id < b.subject_id; });
}

std::string format_mean_sd(const MeanSd& m, int decimals) {
  if (m.infinite) return "inf";
  return fmt(m.mean, decimals) + " ± " + fmt(m.sd, decimals);
}

std::string MetricsReport::summary_line() const {
  return "SSIM W " + format_mean_sd(ssim_w(), 3) + " | SSIM F " + format_mean_sd(ssim_f(), 3) + " | PSNR W " +
         format_mean_sd(psnr_w(), 2) + " dB | PSNR F " + format_mean_sd(psnr_f(), 2) + " dB";
}

std::string MetricsReport::to_csv() const {
  std::string out = "subject_id,ssim_w,ssim_f,psnr_w,psnr_f\n";
  for (const auto& s : subjects) {
    out += s.subject_id + "," + fmt(s.ssim_w, 6) + "," + fmt(s.ssim_f, 6) + "," + fmt_opt(s.psnr_w) + "," +
           fmt_opt(s.psnr_f) + "\n";
  }
  auto cell = [](const MeanSd& m, bool sd) { return m.infinite ? std::string("inf") : fmt(sd ? m.sd : m.mean, 6); };
  out += "mean," + cell(ssim_w(), false) + "," + cell(ssim_f(), false) + "," + cell(psnr_w(), false) + "," +
         cell(psnr_f(), false) + "\n";
  out += "sd," + cell(ssim_w(), true) + "," + cell(ssim_f(), true) + "," + cell(psnr_w(), true) + "," +
         cell(psnr_f(), true) + "\n";
  return out;
}

void MetricsReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorCode::kIo, "cannot write " + path.string());
  f << to_csv();
  if (!f) fail(ErrorCode::kIo, "cannot write " + path.string());
}

}  // namespace dixon::eval
