#include "dixon/sim/phantom.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"

namespace dixon::sim {

using nlohmann::json;

bool Ellipsoid::contains(double x, double y, double z) const noexcept {
  const double dx = (x - center[0]) / radii[0];
  const double dy = (y - center[1]) / radii[1];
  const double dz = (z - center[2]) / radii[2];
  return dx * dx + dy * dy + dz * dz <= 1.0;
}

double eval_poly2(const Poly2& c, double u, double v, double w) noexcept {
  return c[0] + c[1] * u + c[2] * v + c[3] * w + c[4] * u * u + c[5] * v * v + c[6] * w * w + c[7] * u * v +
         c[8] * u * w + c[9] * v * w;
}

namespace {

double normalized_coord(int i, int n) { return n > 1 ? 2.0 * i / (n - 1) - 1.0 : 0.0; }

struct KindVisitor {
  std::string operator()(const FullSlab&) const { return "full_slab"; }
  std::string operator()(const HalfLeg&) const { return "half_leg"; }
  std::string operator()(const Blob&) const { return "blob"; }
  std::string operator()(const BoundaryShell&) const { return "boundary_shell"; }
};

}  // namespace

std::string directive_kind(const SwapDirective& d) { return std::visit(KindVisitor{}, d); }

Volume directive_mask(const SwapDirective& d, Index3 dims, Spacing spacing) {
  Volume mask(dims, spacing);
  std::size_t hits = 0;
  for (int k = 0; k < dims.z; ++k) {
    for (int j = 0; j < dims.y; ++j) {
      for (int i = 0; i < dims.x; ++i) {
        bool in = false;
        if (const auto* s = std::get_if<FullSlab>(&d)) {
          in = k >= s->z_first && k <= s->z_last;
        } else if (const auto* h = std::get_if<HalfLeg>(&d)) {
          const bool left = i < dims.x / 2;
          in = (h->side == Side::Left) == left && k >= h->z_first && k <= h->z_last;
        } else if (const auto* b = std::get_if<Blob>(&d)) {
          const double dx = i - b->center[0];
          const double dy = j - b->center[1];
          const double dz = k - b->center[2];
          in = std::sqrt(dx * dx + dy * dy + dz * dz) < b->radius;
        } else if (const auto* sh = std::get_if<BoundaryShell>(&d)) {
          const int t = sh->thickness;
          in = i < t || j < t || i >= dims.x - t || j >= dims.y - t;
        }
        if (in) {
          mask.at(i, j, k) = 1.0;
          ++hits;
        }
      }
    }
  }
  if (hits == 0) fail(ErrorCode::kDirective, directive_kind(d) + " directive selects no voxels");
  return mask;
}

void PhantomSpec::validate() const {
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0) fail(ErrorCode::kConfig, "phantom dims must be positive");
  if (!(spacing.x > 0) || !(spacing.y > 0) || !(spacing.z > 0)) {
    fail(ErrorCode::kConfig, "phantom spacing must be positive");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail(ErrorCode::kConfig, "noise_sigma must be >= 0");
  if (bodies.empty()) fail(ErrorCode::kDegeneratePhantom, "phantom has no tissue bodies");
  for (const auto& b : bodies) {
    if (!(b.fat_fraction >= 0.0 && b.fat_fraction <= 1.0)) {
      fail(ErrorCode::kConfig, "body '" + b.label + "': fat_fraction outside [0, 1]");
    }
    if (!(b.proton_density >= 0.0) || !std::isfinite(b.proton_density)) {
      fail(ErrorCode::kConfig, "body '" + b.label + "': proton_density must be >= 0");
    }
    for (int a = 0; a < 3; ++a) {
      if (!(b.shape.radii[a] > 0.0)) fail(ErrorCode::kConfig, "body '" + b.label + "': radii must be positive");
      if (!(b.shape.center[a] >= 0.0 && b.shape.center[a] <= dims[a] - 1)) {
        fail(ErrorCode::kDegeneratePhantom, "body '" + b.label + "' is centred outside the volume");
      }
    }
  }
}

PhantomSpec default_torso_phantom(Index3 dims, std::uint64_t seed) {
  PhantomSpec s;
  s.seed = seed;
  s.dims = dims;
  const double nx = dims.x - 1;
  const double ny = dims.y - 1;
  const double nz = dims.z - 1;
  auto body = [&](std::string label, std::array<double, 3> c, std::array<double, 3> r, double pd, double ff) {
    s.bodies.push_back({std::move(label),
                        Ellipsoid{{c[0] * nx, c[1] * ny, c[2] * nz}, {r[0] * nx, r[1] * ny, r[2] * nz}}, pd, ff});
  };
  // Legs: fat shell then muscle.
  body("left_leg_fat", {0.3, 0.5, 0.16}, {0.17, 0.2, 0.2}, 1.0, 0.99);
  body("right_leg_fat", {0.7, 0.5, 0.16}, {0.17, 0.2, 0.2}, 1.0, 0.99);
  body("left_leg_muscle", {0.3, 0.5, 0.16}, {0.1, 0.12, 0.19}, 0.7, 0.05);
  body("right_leg_muscle", {0.7, 0.5, 0.16}, {0.1, 0.12, 0.19}, 0.7, 0.05);
  // Torso.
  body("torso_fat", {0.5, 0.5, 0.62}, {0.46, 0.36, 0.4}, 1.0, 0.99);
  body("torso_muscle", {0.5, 0.5, 0.62}, {0.36, 0.26, 0.37}, 0.7, 0.08);
  body("visceral_fat", {0.5, 0.55, 0.52}, {0.22, 0.14, 0.14}, 0.9, 0.85);
  body("liver", {0.36, 0.48, 0.74}, {0.17, 0.15, 0.12}, 0.9, 0.12);
  body("left_kidney", {0.36, 0.64, 0.6}, {0.06, 0.06, 0.08}, 0.7, 0.03);
  body("right_kidney", {0.64, 0.64, 0.6}, {0.06, 0.06, 0.08}, 0.7, 0.03);
  body("marrow", {0.5, 0.72, 0.62}, {0.04, 0.04, 0.34}, 0.9, 0.7);
  s.field.psi_coeffs = {5.0, 10.0, -6.0, 8.0, 25.0, 25.0, 15.0, 0.0, 0.0, 0.0};
  s.field.delta_te = 2.3e-3;
  s.field.phi0_coeffs = {0.4, 0.3, 0.0, -0.2, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0};
  s.noise_sigma = 0.01;
  return s;
}

TissueVolumes render_truth(const PhantomSpec& spec) {
  spec.validate();
  TissueVolumes out{Volume(spec.dims, spec.spacing, Channel::Water), Volume(spec.dims, spec.spacing, Channel::Fat)};
  for (int k = 0; k < spec.dims.z; ++k) {
    for (int j = 0; j < spec.dims.y; ++j) {
      for (int i = 0; i < spec.dims.x; ++i) {
        // Painter's order: the last body containing the voxel wins.
        for (auto it = spec.bodies.rbegin(); it != spec.bodies.rend(); ++it) {
          if (it->shape.contains(i, j, k)) {
            const std::size_t n = out.water.index(i, j, k);
            out.water[n] = it->proton_density * (1.0 - it->fat_fraction);
            out.fat[n] = it->proton_density * it->fat_fraction;
            break;
          }
        }
      }
    }
  }
  return out;
}

PhaseMaps phase_maps(const FieldMapParams& field, Index3 dims) {
  PhaseMaps m;
  m.phi.resize(dims.count());
  m.phi0.resize(dims.count());
  std::size_t n = 0;
  for (int k = 0; k < dims.z; ++k) {
    const double w = normalized_coord(k, dims.z);
    for (int j = 0; j < dims.y; ++j) {
      const double v = normalized_coord(j, dims.y);
      for (int i = 0; i < dims.x; ++i, ++n) {
        const double u = normalized_coord(i, dims.x);
        m.phi[n] = 2.0 * std::numbers::pi * eval_poly2(field.psi_coeffs, u, v, w) * field.delta_te;
        m.phi0[n] = eval_poly2(field.phi0_coeffs, u, v, w);
      }
    }
  }
  return m;
}

ComplexEchoes synthesize_complex_echoes(const Volume& water, const Volume& fat, const FieldMapParams& field,
                                        double noise_sigma, std::uint64_t seed) {
  if (!water.same_grid(fat)) fail(ErrorCode::kShape, "water and fat are not co-registered");
  if (!(noise_sigma >= 0.0)) fail(ErrorCode::kConfig, "noise_sigma must be >= 0");
  const PhaseMaps phase = phase_maps(field, water.dims());
  ComplexEchoes e{water.dims(), water.spacing(), {}, {}};
  e.ip.resize(water.size());
  e.op.resize(water.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t n = 0; n < water.size(); ++n) {
    const double w = water[n];
    const double f = fat[n];
    e.ip[n] = (w + f) * std::polar(1.0, -phase.phi0[n]);
    e.op[n] = (w - f) * std::polar(1.0, -(phase.phi0[n] + phase.phi[n]));
    if (noise_sigma > 0.0) {
      const double a = gauss(rng);
      const double b = gauss(rng);
      const double c = gauss(rng);
      const double d = gauss(rng);
      e.ip[n] += noise_sigma * std::complex<double>(a, b);
      e.op[n] += noise_sigma * std::complex<double>(c, d);
    }
  }
  return e;
}

EchoMagnitudes magnitudes(const ComplexEchoes& e) {
  EchoMagnitudes m{Volume(e.dims, e.spacing, Channel::IP), Volume(e.dims, e.spacing, Channel::OP)};
  for (std::size_t n = 0; n < e.ip.size(); ++n) {
    m.ip[n] = std::abs(e.ip[n]);
    m.op[n] = std::abs(e.op[n]);
  }
  return m;
}

EchoMagnitudes synthesize_echoes(const Volume& water, const Volume& fat, const FieldMapParams& field,
                                 double noise_sigma, std::uint64_t seed) {
  return magnitudes(synthesize_complex_echoes(water, fat, field, noise_sigma, seed));
}

void apply_swap(Volume& fat, Volume& water, const SwapDirective& d) {
  if (!fat.same_grid(water)) fail(ErrorCode::kShape, "fat and water are not co-registered");
  const Volume mask = directive_mask(d, fat.dims(), fat.spacing());
  for (std::size_t n = 0; n < mask.size(); ++n) {
    if (mask[n] != 0.0) std::swap(fat[n], water[n]);
  }
}

TissueVolumes scanner_separation(const Volume& ip, const Volume& op, const std::vector<SwapDirective>& swaps) {
  if (!ip.same_grid(op)) fail(ErrorCode::kShape, "ip and op are not co-registered");
  TissueVolumes out{Volume(ip.dims(), ip.spacing(), Channel::Water), Volume(ip.dims(), ip.spacing(), Channel::Fat)};
  for (std::size_t n = 0; n < ip.size(); ++n) {
    out.water[n] = std::max(0.0, (ip[n] + op[n]) / 2.0);
    out.fat[n] = std::max(0.0, (ip[n] - op[n]) / 2.0);
  }
  for (const auto& d : swaps) apply_swap(out.fat, out.water, d);
  return out;
}

TissueVolumes scanner_separation(const ComplexEchoes& echoes, const std::vector<double>& phi,
                                 const std::vector<SwapDirective>& swaps) {
  if (phi.size() != echoes.ip.size()) fail(ErrorCode::kShape, "phase map does not match the echoes");
  TissueVolumes out{Volume(echoes.dims, echoes.spacing, Channel::Water),
                    Volume(echoes.dims, echoes.spacing, Channel::Fat)};
  for (std::size_t n = 0; n < echoes.ip.size(); ++n) {
    const double ip = std::abs(echoes.ip[n]);
    double signed_op = 0.0;
    if (ip > 0.0) signed_op = std::real(echoes.op[n] * std::polar(1.0, phi[n]) * std::conj(echoes.ip[n])) / ip;
    out.water[n] = std::max(0.0, (ip + signed_op) / 2.0);
    out.fat[n] = std::max(0.0, (ip - signed_op) / 2.0);
  }
  for (const auto& d : swaps) apply_swap(out.fat, out.water, d);
  return out;
}

StudyPair make_study(const PhantomSpec& spec, const std::string& subject_id) {
  TissueVolumes truth = render_truth(spec);
  const double signal_scale = [&] {
    double m = 0.0;
    for (const auto& b : spec.bodies) m = std::max(m, b.proton_density);
    return m > 0.0 ? m : 1.0;
  }();
  const ComplexEchoes echoes =
      synthesize_complex_echoes(truth.water, truth.fat, spec.field, spec.noise_sigma * signal_scale, spec.seed);
  EchoMagnitudes mag = magnitudes(echoes);
  const PhaseMaps phase = phase_maps(spec.field, spec.dims);
  TissueVolumes scanner = scanner_separation(echoes, phase.phi, spec.swaps);

  StudyPair out;
  out.swap_mask = Volume(spec.dims, spec.spacing);
  for (const auto& d : spec.swaps) {
    const Volume m = directive_mask(d, spec.dims, spec.spacing);
    for (std::size_t n = 0; n < m.size(); ++n) {
      if (m[n] != 0.0) out.swap_mask[n] = 1.0 - out.swap_mask[n];
    }
  }
  out.truth = DixonStudy{mag.ip, mag.op, std::move(truth.fat), std::move(truth.water), Provenance::SimulatedTruth,
                         subject_id};
  out.scanner = DixonStudy{std::move(mag.ip), std::move(mag.op), std::move(scanner.fat), std::move(scanner.water),
                           Provenance::SimulatedScanner, subject_id};
  return out;
}

// --- JSON --------------------------------------------------------------------

namespace {

json directive_to_json(const SwapDirective& d) {
  json j;
  j["kind"] = directive_kind(d);
  if (const auto* s = std::get_if<FullSlab>(&d)) {
    j["z_first"] = s->z_first;
    j["z_last"] = s->z_last;
  } else if (const auto* h = std::get_if<HalfLeg>(&d)) {
    j["side"] = h->side == Side::Left ? "left" : "right";
    j["z_first"] = h->z_first;
    j["z_last"] = h->z_last;
  } else if (const auto* b = std::get_if<Blob>(&d)) {
    j["center"] = b->center;
    j["radius"] = b->radius;
  } else if (const auto* sh = std::get_if<BoundaryShell>(&d)) {
    j["thickness"] = sh->thickness;
  }
  return j;
}

SwapDirective directive_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "full_slab") return FullSlab{j.at("z_first").get<int>(), j.at("z_last").get<int>()};
  if (kind == "half_leg") {
    const std::string side = j.at("side").get<std::string>();
    if (side != "left" && side != "right") fail(ErrorCode::kConfig, "half_leg side must be left or right");
    return HalfLeg{side == "left" ? Side::Left : Side::Right, j.at("z_first").get<int>(), j.at("z_last").get<int>()};
  }
  if (kind == "blob") return Blob{j.at("center").get<std::array<double, 3>>(), j.at("radius").get<double>()};
  if (kind == "boundary_shell") return BoundaryShell{j.at("thickness").get<int>()};
  fail(ErrorCode::kConfig, "unknown swap directive kind '" + kind + "'");
}

}  // namespace

std::string phantom_spec_to_json(const PhantomSpec& spec) {
  json j;
  j["seed"] = spec.seed;
  j["dims"] = {spec.dims.x, spec.dims.y, spec.dims.z};
  j["spacing"] = {spec.spacing.x, spec.spacing.y, spec.spacing.z};
  j["noise_sigma"] = spec.noise_sigma;
  j["field"] = {{"psi_coeffs", spec.field.psi_coeffs},
                {"delta_te", spec.field.delta_te},
                {"phi0_coeffs", spec.field.phi0_coeffs}};
  json bodies = json::array();
  for (const auto& b : spec.bodies) {
    bodies.push_back({{"label", b.label},
                      {"center", b.shape.center},
                      {"radii", b.shape.radii},
                      {"proton_density", b.proton_density},
                      {"fat_fraction", b.fat_fraction}});
  }
  j["bodies"] = std::move(bodies);
  json swaps = json::array();
  for (const auto& d : spec.swaps) swaps.push_back(directive_to_json(d));
  j["swaps"] = std::move(swaps);
  return j.dump(2);
}

PhantomSpec phantom_spec_from_json(const std::string& text) {
  PhantomSpec s;
  try {
    const json j = json::parse(text);
    s.seed = j.value("seed", std::uint64_t{0});
    const auto dims = j.at("dims").get<std::array<int, 3>>();
    s.dims = {dims[0], dims[1], dims[2]};
    if (j.contains("spacing")) {
      const auto sp = j.at("spacing").get<std::array<float, 3>>();
      s.spacing = {sp[0], sp[1], sp[2]};
    }
    s.noise_sigma = j.value("noise_sigma", 0.0);
    if (j.contains("field")) {
      const json& f = j.at("field");
      if (f.contains("psi_coeffs")) s.field.psi_coeffs = f.at("psi_coeffs").get<Poly2>();
      s.field.delta_te = f.value("delta_te", s.field.delta_te);
      if (f.contains("phi0_coeffs")) s.field.phi0_coeffs = f.at("phi0_coeffs").get<Poly2>();
    }
    for (const auto& b : j.at("bodies")) {
      TissueBody body;
      body.label = b.value("label", std::string{});
      body.shape.center = b.at("center").get<std::array<double, 3>>();
      body.shape.radii = b.at("radii").get<std::array<double, 3>>();
      body.proton_density = b.at("proton_density").get<double>();
      body.fat_fraction = b.at("fat_fraction").get<double>();
      s.bodies.push_back(std::move(body));
    }
    if (j.contains("swaps")) {
      for (const auto& d : j.at("swaps")) s.swaps.push_back(directive_from_json(d));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("phantom spec: ") + e.what());
  }
  s.validate();
  return s;
}

PhantomSpec load_phantom_spec(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::kIo, "cannot open phantom spec " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return phantom_spec_from_json(ss.str());
}

}  // namespace dixon::sim
