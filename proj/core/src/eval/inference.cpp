#include "dixon/eval/inference.hpp"

#include <algorithm>

#include "dixon/parallel.hpp"

namespace dixon::eval {

nn::Tensor<float> to_tensor(const std::vector<Volume>& channels) {
  if (channels.empty()) fail(ErrorCode::kInput, "no input channels");
  const Index3 d = channels.front().dims();
  nn::Tensor<float> t({1, static_cast<int>(channels.size()), d.x, d.y, d.z});
  const std::size_t block = d.count();
  for (std::size_t c = 0; c < channels.size(); ++c) {
    if (channels[c].dims() != d) fail(ErrorCode::kShape, "input channels are not co-registered");
    const auto src = channels[c].data();
    std::transform(src.begin(), src.end(), t.data() + c * block, [](double v) { return static_cast<float>(v); });
  }
  return t;
}

Volume channel_volume(const nn::Tensor<float>& t, int batch, int channel, Spacing spacing, Channel tag) {
  const auto sp = t.spatial();
  const Index3 d{sp[0], sp[1], sp[2]};
  const std::size_t block = d.count();
  const float* src = t.data() + (static_cast<std::size_t>(batch) * static_cast<std::size_t>(t.channels()) +
                                 static_cast<std::size_t>(channel)) *
                                    block;
  return Volume(d, spacing, std::vector<double>(src, src + block), tag);
}

FatWater predict_full(const TilePredictor& predictor, const std::vector<Volume>& inputs, Index3 tile, Blend blend) {
  if (inputs.empty()) fail(ErrorCode::kInput, "no input channels");
  const Index3 dims = inputs.front().dims();
  for (const auto& v : inputs) {
    if (!v.same_grid(inputs.front())) fail(ErrorCode::kShape, "input channels are not co-registered");
  }
  const TileLayout layout = plan_tiles(dims, tile, blend);
  std::vector<std::vector<Volume>> per_channel;
  for (const auto& v : inputs) per_channel.push_back(crop_tiles(v, layout));
  std::vector<Volume> fat(layout.origins.size());
  std::vector<Volume> water(layout.origins.size());
  parallel_for(layout.origins.size(), [&](std::size_t t) {
    std::vector<Volume> crops;
    for (auto& c : per_channel) crops.push_back(c[t]);
    FatWater out = predictor(crops);
    if (out.fat.dims() != tile || out.water.dims() != tile) {
      fail(ErrorCode::kShape, "predictor returned " + to_string(out.fat.dims()) + " for tile " + to_string(tile));
    }
    fat[t] = std::move(out.fat);
    water[t] = std::move(out.water);
  });
  FatWater result{reassemble(layout, fat), reassemble(layout, water)};
  result.fat.set_tag(Channel::Fat);
  result.water.set_tag(Channel::Water);
  return result;
}

TilePredictor generator_predictor(const model::Generator<float>& generator) {
  return [&generator](const std::vector<Volume>& inputs) {
    nn::NoGradGuard no_grad;
    const auto x = nn::Var<float>::constant(to_tensor(inputs));
    const nn::Tensor<float> y = generator.forward(x).value();
    const Spacing sp = inputs.front().spacing();
    return FatWater{channel_volume(y, 0, 0, sp, Channel::Fat), channel_volume(y, 0, 1, sp, Channel::Water)};
  };
}

ModelInputs prepare_inputs(const DixonStudy& study, model::InputMode mode) {
  if (study.ip.size() == 0) fail(ErrorCode::kInput, "study has no in-phase channel");
  const bool dual = mode == model::InputMode::DualIpOp;
  if (dual && study.op.size() == 0) fail(ErrorCode::kInput, "dual-input model needs the opposed-phase channel");
  std::vector<const Volume*> present{&study.ip};
  for (const Volume* v : {&study.op, &study.fat, &study.water}) {
    if (v->size() != 0) present.push_back(v);
  }
  double scale = 0.0;
  switch (present.size()) {
    case 1: scale = joint_scale({present[0]}); break;
    case 2: scale = joint_scale({present[0], present[1]}); break;
    case 3: scale = joint_scale({present[0], present[1], present[2]}); break;
    default: scale = joint_scale({present[0], present[1], present[2], present[3]}); break;
  }
  ModelInputs in;
  in.scale = scale;
  in.channels.push_back(apply_scale(study.ip, scale));
  if (dual) in.channels.push_back(apply_scale(study.op, scale));
  return in;
}

}  // namespace dixon::eval
