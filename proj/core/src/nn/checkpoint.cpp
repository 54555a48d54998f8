#include "dixon/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "dixon/binary_io.hpp"

namespace dixon::nn {

namespace {

constexpr char kMagic[4] = {'D', 'C', 'K', 'P'};

}  // namespace

const AdamState* Checkpoint::optimizer(const std::string& name) const {
  for (const auto& o : optimizers) {
    if (o.name == name) return &o.state;
  }
  return nullptr;
}

void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  io::put<std::uint32_t>(os, kCheckpointVersion);
  io::put_string(os, ck.config);
  io::put<std::int64_t>(os, ck.step);

  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(ck.params.size()));
  for (const auto& p : ck.params) {
    io::put_string(os, p.name);
    io::put<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rank()));
    for (int d : p.value.shape()) io::put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    for (float v : p.value.values()) io::put<float>(os, v);
  }

  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(ck.optimizers.size()));
  for (const auto& o : ck.optimizers) {
    io::put_string(os, o.name);
    const auto& s = o.state;
    io::put<double>(os, s.hyper.lr);
    io::put<double>(os, s.hyper.beta1);
    io::put<double>(os, s.hyper.beta2);
    io::put<double>(os, s.hyper.epsilon);
    io::put<std::int64_t>(os, s.step);
    io::put<std::uint64_t>(os, s.first_moment.size());
    for (double v : s.first_moment) io::put<double>(os, v);
    for (double v : s.second_moment) io::put<double>(os, v);
  }
  os.flush();
  if (!os) fail(ErrorCode::kIo, "write to " + path.string() + " failed");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorCode::kFormat, path.string() + " is not a DCKP checkpoint");
  }
  const auto version = io::get<std::uint32_t>(is);
  if (version != kCheckpointVersion) fail(ErrorCode::kFormat, "unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  ck.config = io::get_string(is);
  ck.step = io::get<std::int64_t>(is);

  const auto n_params = io::get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    NamedTensor p;
    p.name = io::get_string(is, 4096);
    const auto rank = io::get<std::uint32_t>(is);
    if (rank > 8) fail(ErrorCode::kFormat, "parameter " + p.name + " has implausible rank");
    std::vector<int> shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = static_cast<int>(io::get<std::uint32_t>(is));
      count *= static_cast<std::size_t>(d);
    }
    if (count > (std::size_t{1} << 30)) fail(ErrorCode::kFormat, "parameter " + p.name + " is implausibly large");
    std::vector<float> data(count);
    for (auto& v : data) v = io::get<float>(is, ErrorCode::kLength);
    p.value = Tensor<float>(std::move(shape), std::move(data));
    ck.params.push_back(std::move(p));
  }

  const auto n_opt = io::get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_opt; ++i) {
    NamedOptimizer o;
    o.name = io::get_string(is, 4096);
    o.state.hyper.lr = io::get<double>(is);
    o.state.hyper.beta1 = io::get<double>(is);
    o.state.hyper.beta2 = io::get<double>(is);
    o.state.hyper.epsilon = io::get<double>(is);
    o.state.step = io::get<std::int64_t>(is);
    const auto n = io::get<std::uint64_t>(is);
    if (n > (std::uint64_t{1} << 30)) fail(ErrorCode::kFormat, "optimizer state is implausibly large");
    o.state.first_moment.resize(n);
    o.state.second_moment.resize(n);
    for (auto& v : o.state.first_moment) v = io::get<double>(is, ErrorCode::kLength);
    for (auto& v : o.state.second_moment) v = io::get<double>(is, ErrorCode::kLength);
    ck.optimizers.push_back(std::move(o));
  }
  return ck;
}

void export_parameters(const ParameterSet<float>& set, const std::string& prefix, Checkpoint& ck) {
  for (const auto& e : set.entries()) ck.params.push_back({prefix + e.name, e.var.value()});
}

void import_parameters(const Checkpoint& ck, const std::string& prefix, ParameterSet<float>& set) {
  for (auto& e : set.entries()) {
    const std::string key = prefix + e.name;
    const NamedTensor* found = nullptr;
    for (const auto& p : ck.params) {
      if (p.name == key) {
        found = &p;
        break;
      }
    }
    if (!found) fail(ErrorCode::kFormat, "checkpoint lacks parameter " + key);
    if (found->value.shape() != e.var.value().shape()) {
      fail(ErrorCode::kShape, "parameter " + key + ": checkpoint shape " + found->value.shape_string() +
                                  " vs model " + e.var.value().shape_string());
    }
    e.var.mutable_value() = found->value;
  }
}

}  // namespace dixon::nn
