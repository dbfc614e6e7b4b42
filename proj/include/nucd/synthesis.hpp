#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nucd/biasfield.hpp"
#include "nucd/image.hpp"

namespace nucd {

/// Axis-aligned box: top-left (x, y) and extents (w, h) in pixels.
struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long area() const noexcept { return static_cast<long>(w) * h; }
  bool valid_in(int width, int height) const noexcept {
    return w >= 1 && h >= 1 && x >= 0 && y >= 0 && x + w <= width && y + h <= height;
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Y = C + k * B(coeffs), pixelwise and unclamped.
GrayImage synthesize_degraded(const GrayImage& clear, const CoeffVector& coeffs, double k,
                              CoordNorm coord = {});

enum class BackgroundKind { kFlat, kGradient, kCloudNoise, kStructured };

std::string to_string(BackgroundKind kind);
BackgroundKind background_kind_from_string(const std::string& name);

/// Deterministic procedural stand-in for a clear infrared scene.
///   flat        constant 0.3
///   gradient    linear ramp in [0.2, 0.5] along a random direction
///   cloud-noise three-octave value noise (16 px base cell), blurred, with its
///               degree-5 polynomial trend removed, at 0.35 +- ~0.03, plus
///               Gaussian pixel grain (sigma 0.003)
///   structured  the same sky at 0.3 with rectangular "buildings" rising from
///               the bottom edge
GrayImage make_background(BackgroundKind kind, std::uint64_t seed, int width, int height);

/// ceil(sigma * sqrt(2 ln 10)) with sigma = radius / 2: half the side of the
/// 10%-of-peak box around a blob.
int target_half_extent(double radius);

/// Adds contrast * exp(-r^2 / 2 sigma^2), sigma = radius / 2, centered on the
/// pixel (cx, cy). Returns the box bounding the 10%-of-peak contour. Throws
/// ParameterError when contrast is zero or the box leaves the image.
std::pair<GrayImage, BBox> inject_target(const GrayImage& img, int cx, int cy, double radius,
                                         double contrast);

/// Radius that produces a 10%-contour box of exactly `side` pixels (side even).
double radius_for_side(int side);

/// Scale bins for target box sides: [2,10), [10,20), [20,30), [30,40).
inline constexpr std::array<int, 5> kScaleBinEdges = {2, 10, 20, 30, 40};

struct SceneConfig {
  int width = 640;
  int height = 512;
  int degree = 3;
  double k = 10.0;
  CoordNorm coord{};
  AmplitudeSpec amplitude = AmplitudeSpec::defaults();
  /// Relative weights of flat, gradient, cloud-noise, structured.
  std::array<double, 4> background_mix = {0.0, 0.0, 0.6, 0.4};
  int min_targets = 1;
  int max_targets = 3;
  /// Relative frequency of each scale bin.
  std::array<double, 4> scale_mix = {9852, 16406, 3110, 632};
  double min_contrast = 0.1;
  double max_contrast = 0.3;
};

/// One synthetic sample.
struct SceneRecord {
  GrayImage clear;
  CoeffVector coeffs;
  CoordNorm coord;
  double severity = 0.0;
  GrayImage degraded;
  std::vector<BBox> annotations;
  BackgroundKind background = BackgroundKind::kFlat;
  std::uint64_t seed = 0;
};

/// Seed of sample `index` in a corpus seeded with `corpus_seed`.
std::uint64_t scene_seed(std::uint64_t corpus_seed, std::uint64_t index);

/// Builds one scene: background, targets injected into the clear image, then
/// degradation with freshly sampled coefficients. Pure function of its inputs.
SceneRecord make_scene(const SceneConfig& config, std::uint64_t seed);

}  // namespace nucd
