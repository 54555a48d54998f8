#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "dixon/study.hpp"

namespace dixon::sim {

// Axis-aligned ellipsoid in voxel coordinates.
struct Ellipsoid {
  std::array<double, 3> center{};
  std::array<double, 3> radii{};

  bool contains(double x, double y, double z) const noexcept;
};

struct TissueBody {
  std::string label;
  Ellipsoid shape;
  double proton_density = 1.0;
  double fat_fraction = 0.0;
};

// Second-order polynomial in normalized coordinates u, v, w in [-1, 1]:
//   c0 + c1 u + c2 v + c3 w + c4 u^2 + c5 v^2 + c6 w^2 + c7 uv + c8 uw + c9 vw
using Poly2 = std::array<double, 10>;

double eval_poly2(const Poly2& c, double u, double v, double w) noexcept;

struct FieldMapParams {
  Poly2 psi_coeffs{};   // off-resonance in Hz
  double delta_te = 1.15e-3;  // seconds between the opposed- and in-phase echoes
  Poly2 phi0_coeffs{};  // common phase in radians
};

enum class Side : std::uint8_t { Left, Right };

struct FullSlab {
  int z_first = 0;
  int z_last = 0;  // inclusive
};
struct HalfLeg {
  Side side = Side::Left;  // Left is x < nx / 2
  int z_first = 0;
  int z_last = 0;
};
struct Blob {
  std::array<double, 3> center{};
  double radius = 0.0;  // voxels; a voxel is inside when its distance is < radius
};
struct BoundaryShell {
  int thickness = 1;  // voxels from the x and y faces
};

using SwapDirective = std::variant<FullSlab, HalfLeg, Blob, BoundaryShell>;

std::string directive_kind(const SwapDirective& d);

// Mask (values 0/1) of the voxels a directive exchanges. Throws kDirective
// when the mask is empty.
Volume directive_mask(const SwapDirective& d, Index3 dims, Spacing spacing);

struct PhantomSpec {
  std::uint64_t seed = 0;
  Index3 dims{48, 48, 48};
  Spacing spacing{2.23F, 2.23F, 3.0F};
  std::vector<TissueBody> bodies;
  FieldMapParams field;
  double noise_sigma = 0.01;  // per real/imaginary part, relative to the largest proton density
  std::vector<SwapDirective> swaps;

  // Throws kConfig on bad dims, noise or fat fractions, kDegeneratePhantom when
  // there are no bodies or a body centre lies outside the volume.
  void validate() const;
};

// Torso-like default: subcutaneous fat shells around a muscular torso and two
// legs, with liver, kidneys and a marrow column.
PhantomSpec default_torso_phantom(Index3 dims = {48, 48, 48}, std::uint64_t seed = 0);

struct TissueVolumes {
  Volume water;
  Volume fat;
};

TissueVolumes render_truth(const PhantomSpec& spec);

// Off-resonance phase 2 pi psi dTE and the common phase, sampled per voxel.
struct PhaseMaps {
  std::vector<double> phi;
  std::vector<double> phi0;
};
PhaseMaps phase_maps(const FieldMapParams& field, Index3 dims);

// Complex echoes before magnitude export.
struct ComplexEchoes {
  Index3 dims;
  Spacing spacing;
  std::vector<std::complex<double>> ip;
  std::vector<std::complex<double>> op;
};

// IP = (W + F) e^{-i phi0}, OP = (W - F) e^{-i (phi0 + phi)}, plus complex
// Gaussian noise of std `noise_sigma` per component.
ComplexEchoes synthesize_complex_echoes(const Volume& water, const Volume& fat, const FieldMapParams& field,
                                        double noise_sigma, std::uint64_t seed);

struct EchoMagnitudes {
  Volume ip;
  Volume op;
};

EchoMagnitudes magnitudes(const ComplexEchoes& e);

EchoMagnitudes synthesize_echoes(const Volume& water, const Volume& fat, const FieldMapParams& field,
                                 double noise_sigma, std::uint64_t seed);

// Exchanges fat and water inside the directive's mask. Applying the same
// directive twice restores the input.
void apply_swap(Volume& fat, Volume& water, const SwapDirective& d);

// Magnitude-only separation: water = (ip + op) / 2, fat = (ip - op) / 2,
// clamped at 0, followed by the directive swaps. This is exact only where
// water dominates; fat-dominant voxels come out exchanged.
TissueVolumes scanner_separation(const Volume& ip, const Volume& op, const std::vector<SwapDirective>& swaps);

// Phase-resolved separation used for the emulated scanner: the signed
// opposed-phase signal Re(OP e^{i phi} conj(IP)) / |IP| replaces the magnitude
// so fat-dominant voxels separate correctly, then directives are applied.
TissueVolumes scanner_separation(const ComplexEchoes& echoes, const std::vector<double>& phi,
                                 const std::vector<SwapDirective>& swaps);

struct StudyPair {
  DixonStudy truth;
  DixonStudy scanner;
  Volume swap_mask;  // 1 where the scanner fat/water are exchanged w.r.t. truth
};

StudyPair make_study(const PhantomSpec& spec, const std::string& subject_id = "subject");

std::string phantom_spec_to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const std::string& text);
PhantomSpec load_phantom_spec(const std::filesystem::path& path);

}  // namespace dixon::sim
