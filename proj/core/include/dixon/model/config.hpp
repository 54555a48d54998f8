#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dixon/config_file.hpp"
#include "dixon/nn/ops.hpp"
#include "dixon/volume.hpp"

namespace dixon::model {

enum class InputMode : std::uint8_t { SingleIp, DualIpOp };
enum class ReconMode : std::uint8_t { L1, Dixon };

std::string to_string(InputMode m);
std::string to_string(ReconMode m);
InputMode parse_input_mode(const std::string& s);
ReconMode parse_recon_mode(const std::string& s);

inline int input_channels(InputMode m) { return m == InputMode::SingleIp ? 1 : 2; }

struct GeneratorConfig {
  InputMode input_mode = InputMode::DualIpOp;
  int levels = 6;
  std::vector<int> filters{16, 32, 64, 64, 64, 64};
  int output_channels = 2;  // channel 0 fat, channel 1 water
  Index3 crop_size{128, 128, 128};
  nn::NormMode norm = nn::NormMode::Instance;

  // Throws kConfig on an indivisible crop or a filter list of the wrong length.
  void validate() const;
};

// Filter schedule preset matching the full-size reference network.
std::vector<int> paper_scale_filters(int levels);

struct DiscriminatorConfig {
  std::vector<int> strides{2, 1, 1};  // the last entry produces the 1-channel logit map
  std::vector<int> filters{16, 32};   // one per hidden layer: strides.size() - 1 entries
  int expected_receptive_field = 16;
  bool conditioned = true;  // prepend IP (and OP) to the judged (F, W) pair
  nn::NormMode norm = nn::NormMode::Instance;

  void validate() const;
};

// r <- r + (k - 1) * jump, jump <- jump * stride, starting from r = jump = 1.
int receptive_field(const std::vector<int>& strides, int kernel = 4);

// The SINGLE_IP + DIXON combination admits trivial minimisers and is refused.
void check_objective(InputMode input, ReconMode recon);

struct ModelConfig {
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  ReconMode recon = ReconMode::L1;
  nn::DixonNorm dixon_norm = nn::DixonNorm::Rms;
  double lambda = 100.0;

  void validate() const;
  // key=value round trip (stored in checkpoints).
  KeyValueConfig to_key_values() const;
  static ModelConfig from_key_values(const KeyValueConfig& kv, const ModelConfig& defaults);
  static ModelConfig from_key_values(const KeyValueConfig& kv) { return from_key_values(kv, ModelConfig{}); }
};

}  // namespace dixon::model
