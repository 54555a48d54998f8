#pragma once

#include <array>
#include <functional>
#include <vector>

#include "dixon/model/networks.hpp"
#include "dixon/study.hpp"
#include "dixon/tiling.hpp"

namespace dixon::eval {

struct FatWater {
  Volume fat;
  Volume water;
};

// Maps input crops ({ip} or {ip, op}, normalized) to (fat, water) crops of
// the same dims.
using TilePredictor = std::function<FatWater(const std::vector<Volume>& inputs)>;

// plan_tiles + per-tile prediction + reassembly. `inputs` share one grid.
FatWater predict_full(const TilePredictor& predictor, const std::vector<Volume>& inputs, Index3 tile,
                      Blend blend = Blend::Average);

// Inference through a generator without recording a graph.
TilePredictor generator_predictor(const model::Generator<float>& generator);

// Normalized IP (and OP for dual models) of a study, as the generator sees it.
// The scale is the joint 99th percentile of every channel present.
struct ModelInputs {
  std::vector<Volume> channels;
  double scale = 1.0;
};
ModelInputs prepare_inputs(const DixonStudy& study, model::InputMode mode);

// Converts between volumes and (1, C, x, y, z) tensors.
nn::Tensor<float> to_tensor(const std::vector<Volume>& channels);
Volume channel_volume(const nn::Tensor<float>& t, int batch, int channel, Spacing spacing, Channel tag);

}  // namespace dixon::eval
