#include "dixon/model/config.hpp"

#include <algorithm>
#include <cctype>

namespace dixon::model {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

std::string to_string(InputMode m) { return m == InputMode::SingleIp ? "single_ip" : "dual"; }
std::string to_string(ReconMode m) { return m == ReconMode::L1 ? "l1" : "dixon"; }

InputMode parse_input_mode(const std::string& s) {
  const std::string v = lower(s);
  if (v == "single" || v == "single_ip" || v == "ip") return InputMode::SingleIp;
  if (v == "dual" || v == "dual_ip_op" || v == "ip_op") return InputMode::DualIpOp;
  fail(ErrorCode::kConfig, "unknown input mode '" + s + "' (single_ip | dual)");
}

ReconMode parse_recon_mode(const std::string& s) {
  const std::string v = lower(s);
  if (v == "l1") return ReconMode::L1;
  if (v == "dixon") return ReconMode::Dixon;
  fail(ErrorCode::kConfig, "unknown loss mode '" + s + "' (l1 | dixon)");
}

void GeneratorConfig::validate() const {
  if (levels < 1) fail(ErrorCode::kConfig, "generator needs at least one level");
  if (static_cast<int>(filters.size()) != levels) {
    fail(ErrorCode::kConfig, "filter schedule has " + std::to_string(filters.size()) + " entries for " +
                                 std::to_string(levels) + " levels");
  }
  for (int f : filters) {
    if (f < 1) fail(ErrorCode::kConfig, "filter counts must be positive");
  }
  if (output_channels != 2) fail(ErrorCode::kConfig, "generator predicts exactly two channels");
  const int div = 1 << levels;
  for (int a = 0; a < 3; ++a) {
    if (crop_size[a] < div || crop_size[a] % div != 0) {
      fail(ErrorCode::kConfig, "crop size " + to_string(crop_size) + " is not divisible by 2^" +
                                   std::to_string(levels) + " = " + std::to_string(div));
    }
  }
}

std::vector<int> paper_scale_filters(int levels) {
  const std::vector<int> ref{64, 128, 256, 512, 512, 512, 512, 512};
  std::vector<int> out;
  for (int l = 0; l < levels; ++l) out.push_back(ref[static_cast<std::size_t>(std::min(l, 7))]);
  return out;
}

int receptive_field(const std::vector<int>& strides, int kernel) {
  int r = 1;
  int jump = 1;
  for (int s : strides) {
    r += (kernel - 1) * jump;
    jump *= s;
  }
  return r;
}

void DiscriminatorConfig::validate() const {
  if (strides.empty()) fail(ErrorCode::kConfig, "discriminator needs at least one layer");
  for (int s : strides) {
    if (s != 1 && s != 2) fail(ErrorCode::kConfig, "discriminator strides must be 1 or 2");
  }
  if (filters.size() + 1 != strides.size()) {
    fail(ErrorCode::kConfig, "discriminator has " + std::to_string(strides.size()) + " layers but " +
                                 std::to_string(filters.size()) + " hidden filter counts");
  }
  for (int f : filters) {
    if (f < 1) fail(ErrorCode::kConfig, "filter counts must be positive");
  }
  const int rf = receptive_field(strides);
  if (rf != expected_receptive_field) {
    fail(ErrorCode::kConfig, "discriminator receptive field is " + std::to_string(rf) + "^3, expected " +
                                 std::to_string(expected_receptive_field) + "^3");
  }
}

void check_objective(InputMode input, ReconMode recon) {
  if (input == InputMode::SingleIp && recon == ReconMode::Dixon) {
    fail(ErrorCode::kConfig, "the Dixon loss needs both IP and OP inputs; single-input models have trivial minimisers");
  }
}

void ModelConfig::validate() const {
  generator.validate();
  discriminator.validate();
  check_objective(generator.input_mode, recon);
  if (!(lambda >= 0.0)) fail(ErrorCode::kConfig, "lambda must be >= 0");
}

KeyValueConfig ModelConfig::to_key_values() const {
  KeyValueConfig kv;
  kv.set("input_mode", to_string(generator.input_mode));
  kv.set("loss", to_string(recon));
  kv.set("dixon_norm", dixon_norm == nn::DixonNorm::Rms ? "rms" : "mean_square");
  kv.set("levels", std::to_string(generator.levels));
  kv.set("filters", join(generator.filters));
  kv.set("crop", join({generator.crop_size.x, generator.crop_size.y, generator.crop_size.z}));
  kv.set("norm", generator.norm == nn::NormMode::Instance ? "instance" : "batch");
  kv.set("disc_strides", join(discriminator.strides));
  kv.set("disc_filters", join(discriminator.filters));
  kv.set("disc_receptive_field", std::to_string(discriminator.expected_receptive_field));
  kv.set("disc_conditioned", discriminator.conditioned ? "true" : "false");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", lambda);
  kv.set("lambda", buf);
  return kv;
}

ModelConfig ModelConfig::from_key_values(const KeyValueConfig& kv, const ModelConfig& defaults) {
  ModelConfig c = defaults;
  if (auto v = kv.get("input_mode")) c.generator.input_mode = parse_input_mode(*v);
  if (auto v = kv.get("loss")) c.recon = parse_recon_mode(*v);
  if (auto v = kv.get("dixon_norm")) {
    const std::string s = lower(*v);
    if (s == "rms") {
      c.dixon_norm = nn::DixonNorm::Rms;
    } else if (s == "mean_square" || s == "ms") {
      c.dixon_norm = nn::DixonNorm::MeanSquare;
    } else {
      fail(ErrorCode::kConfig, "dixon_norm must be rms or mean_square");
    }
  }
  c.generator.levels = static_cast<int>(kv.get_int("levels", c.generator.levels));
  c.generator.filters = kv.get_int_list("filters", c.generator.filters);
  if (!kv.contains("filters") && static_cast<int>(c.generator.filters.size()) != c.generator.levels) {
    c.generator.filters.resize(static_cast<std::size_t>(c.generator.levels),
                               c.generator.filters.empty() ? 16 : c.generator.filters.back());
  }
  if (kv.contains("crop")) {
    auto crop = kv.get_int_list("crop", {});
    if (crop.size() == 1) crop = {crop[0], crop[0], crop[0]};
    if (crop.size() != 3) fail(ErrorCode::kConfig, "crop takes one or three integers");
    c.generator.crop_size = {crop[0], crop[1], crop[2]};
  }
  if (auto v = kv.get("norm")) {
    const std::string s = lower(*v);
    if (s == "instance") {
      c.generator.norm = nn::NormMode::Instance;
    } else if (s == "batch") {
      c.generator.norm = nn::NormMode::Batch;
    } else {
      fail(ErrorCode::kConfig, "norm must be instance or batch");
    }
    c.discriminator.norm = c.generator.norm;
  }
  c.discriminator.strides = kv.get_int_list("disc_strides", c.discriminator.strides);
  c.discriminator.filters = kv.get_int_list("disc_filters", c.discriminator.filters);
  c.discriminator.expected_receptive_field =
      static_cast<int>(kv.get_int("disc_receptive_field", c.discriminator.expected_receptive_field));
  c.discriminator.conditioned = kv.get_bool("disc_conditioned", c.discriminator.conditioned);
  c.lambda = kv.get_double("lambda", c.lambda);
  return c;
}

}  // namespace dixon::model
