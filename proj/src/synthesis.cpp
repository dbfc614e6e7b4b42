#include "nucd/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nucd/errors.hpp"
#include "nucd/estimation.hpp"

namespace nucd {

namespace {

constexpr double kTenPercentRadius = 2.1459660262893472;  // sqrt(2 ln 10)
constexpr int kTargetSpacing = 5;  // keeps clutter rings of neighbours disjoint
constexpr int kDetrendDegree = 5;
constexpr int kCloudCell = 16;
constexpr int kCloudOctaves = 3;
constexpr double kCloudAmplitude = 0.015;
constexpr double kGrainSigma = 0.003;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  template <std::size_t N>
  std::size_t pick(const std::array<double, N>& weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double u = uniform() * total;
    for (std::size_t i = 0; i < N; ++i) {
      if (u < weights[i]) return i;
      u -= weights[i];
    }
    return N - 1;
  }
  // Box-Muller on our own uniforms so streams do not depend on the standard
  // library's distribution implementation.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(1.0 - uniform()));
    const double angle = 2.0 * M_PI * uniform();
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double smoothstep(double f) { return f * f * (3.0 - 2.0 * f); }

// Sum of octaves of lattice value noise; amplitude halves with the cell size.
// Values lie in [-sum(amplitudes), +sum(amplitudes)].
GrayImage value_noise(Rng& rng, int width, int height, int base_cell, int octaves) {
  GrayImage out(width, height);
  double amplitude = 1.0;
  int cell = base_cell;
  for (int o = 0; o < octaves; ++o, amplitude *= 0.5, cell = std::max(1, cell / 2)) {
    const int gw = width / cell + 2;
    const int gh = height / cell + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
    for (double& v : lattice) v = rng.uniform(-1.0, 1.0);
    for (int y = 0; y < height; ++y) {
      const double gy = static_cast<double>(y) / cell;
      const int j = static_cast<int>(gy);
      const double fy = smoothstep(gy - j);
      for (int x = 0; x < width; ++x) {
        const double gx = static_cast<double>(x) / cell;
        const int i = static_cast<int>(gx);
        const double fx = smoothstep(gx - i);
        const double v00 = lattice[j * gw + i];
        const double v10 = lattice[j * gw + i + 1];
        const double v01 = lattice[(j + 1) * gw + i];
        const double v11 = lattice[(j + 1) * gw + i + 1];
        const double top = v00 + fx * (v10 - v00);
        const double bottom = v01 + fx * (v11 - v01);
        out(x, y) += amplitude * (top + fy * (bottom - top));
      }
    }
  }
  return out;
}

// Removes the least-squares polynomial trend up to `degree`.
void detrend(GrayImage& img, int degree) {
  if (img.size() < static_cast<std::size_t>(coeff_count(degree))) return;
  const FitResult trend = fit_paired(img, GrayImage(img.width(), img.height()), degree);
  img = correct(img, trend);
}

// Smooth value-noise clouds with no trend up to kDetrendDegree, plus pixel
// grain, around `level`.
GrayImage cloud_sky(Rng& rng, int width, int height, double level) {
  GrayImage sky = gaussian_blur(value_noise(rng, width, height, kCloudCell, kCloudOctaves), 2.0);
  detrend(sky, kDetrendDegree);
  for (double& v : sky.pixels()) {
    v = std::clamp(level + kCloudAmplitude * v + kGrainSigma * rng.gaussian(), 0.0, 1.0);
  }
  return sky;
}

bool boxes_conflict(const BBox& a, const BBox& b, int gap) {
  return a.x < b.x + b.w + gap && b.x < a.x + a.w + gap && a.y < b.y + b.h + gap &&
         b.y < a.y + a.h + gap;
}

}  // namespace

GrayImage synthesize_degraded(const GrayImage& clear, const CoeffVector& coeffs, double k,
                              CoordNorm coord) {
  GrayImage out = eval_bias_field(coeffs, clear.width(), clear.height(), coord);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.pixels()[i] = clear.pixels()[i] + k * out.pixels()[i];
  }
  return out;
}

std::string to_string(BackgroundKind kind) {
  switch (kind) {
    case BackgroundKind::kFlat: return "flat";
    case BackgroundKind::kGradient: return "gradient";
    case BackgroundKind::kCloudNoise: return "cloud-noise";
    case BackgroundKind::kStructured: return "structured";
  }
  return "flat";
}

BackgroundKind background_kind_from_string(const std::string& name) {
  if (name == "flat") return BackgroundKind::kFlat;
  if (name == "gradient") return BackgroundKind::kGradient;
  if (name == "cloud-noise") return BackgroundKind::kCloudNoise;
  if (name == "structured") return BackgroundKind::kStructured;
  throw ParameterError("unknown background kind '" + name + "'");
}

GrayImage make_background(BackgroundKind kind, std::uint64_t seed, int width, int height) {
  Rng rng(splitmix64(seed ^ 0x6261636b67726e64ULL));
  switch (kind) {
    case BackgroundKind::kFlat:
      return GrayImage(width, height, 0.3);

    case BackgroundKind::kGradient: {
      const double angle = rng.uniform(0.0, 2.0 * M_PI);
      const double cx = std::cos(angle);
      const double cy = std::sin(angle);
      const double span = std::abs(cx) * std::max(1, width - 1) + std::abs(cy) * std::max(1, height - 1);
      const double origin = std::min(0.0, cx * (width - 1)) + std::min(0.0, cy * (height - 1));
      GrayImage out(width, height);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) out(x, y) = 0.2 + 0.3 * (cx * x + cy * y - origin) / span;
      }
      return out;
    }

    case BackgroundKind::kCloudNoise:
      return cloud_sky(rng, width, height, 0.35);

    case BackgroundKind::kStructured: {
      GrayImage out = cloud_sky(rng, width, height, 0.3);
      const int buildings = rng.uniform_int(3, 8);
      for (int b = 0; b < buildings; ++b) {
        const int bw = std::min(width, rng.uniform_int(20, 120));
        const int bh = std::min(height, rng.uniform_int(30, std::max(30, height * 2 / 5)));
        const int x0 = rng.uniform_int(0, width - bw);
        const double step = rng.uniform(0.05, 0.2);
        for (int y = height - bh; y < height; ++y) {
          for (int x = x0; x < x0 + bw; ++x) out(x, y) = std::min(out(x, y) + step, 1.0);
        }
      }
      return out;
    }
  }
  throw ParameterError("unknown background kind");
}

int target_half_extent(double radius) {
  return static_cast<int>(std::ceil(radius / 2.0 * kTenPercentRadius));
}

double radius_for_side(int side) {
  if (side < 2 || side % 2 != 0) throw ParameterError("target side must be even and >= 2");
  return 2.0 * (side / 2 - 0.5) / kTenPercentRadius;
}

std::pair<GrayImage, BBox> inject_target(const GrayImage& img, int cx, int cy, double radius,
                                         double contrast) {
  if (!(radius > 0.0)) throw ParameterError("target radius must be positive");
  if (contrast == 0.0 || !std::isfinite(contrast)) {
    throw ParameterError("zero-contrast target has no 10% contour");
  }
  const int half = target_half_extent(radius);
  const BBox box{cx - half, cy - half, 2 * half, 2 * half};
  if (!box.valid_in(img.width(), img.height())) {
    throw ParameterError("target box leaves the image");
  }
  const double sigma = radius / 2.0;
  const int reach = static_cast<int>(std::ceil(5.0 * sigma)) + 1;
  GrayImage out = img;
  for (int y = std::max(0, cy - reach); y <= std::min(img.height() - 1, cy + reach); ++y) {
    for (int x = std::max(0, cx - reach); x <= std::min(img.width() - 1, cx + reach); ++x) {
      const double r2 = static_cast<double>((x - cx) * (x - cx) + (y - cy) * (y - cy));
      out(x, y) += contrast * std::exp(-r2 / (2.0 * sigma * sigma));
    }
  }
  return {std::move(out), box};
}

std::uint64_t scene_seed(std::uint64_t corpus_seed, std::uint64_t index) {
  return splitmix64(splitmix64(corpus_seed) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}

SceneRecord make_scene(const SceneConfig& config, std::uint64_t seed) {
  if (config.width < 1 || config.height < 1) throw ParameterError("scene size must be positive");
  if (config.min_targets < 0 || config.max_targets < config.min_targets) {
    throw ParameterError("invalid target count range");
  }
  if (!(config.min_contrast > 0.0) || config.max_contrast < config.min_contrast) {
    throw ParameterError("invalid target contrast range");
  }
  if (!(config.k >= 0.0)) throw ParameterError("severity k must be non-negative");
  Rng rng(seed);

  const auto kind = static_cast<BackgroundKind>(rng.pick(config.background_mix));
  GrayImage clear = make_background(kind, rng.next(), config.width, config.height);

  std::vector<BBox> boxes;
  const int wanted = rng.uniform_int(config.min_targets, config.max_targets);
  for (int t = 0; t < wanted; ++t) {
    const std::size_t bin = rng.pick(config.scale_mix);
    const int lo = kScaleBinEdges[bin];
    const int hi = kScaleBinEdges[bin + 1];
    const int side = 2 * rng.uniform_int(lo / 2, (hi - 1) / 2);
    const double contrast = rng.uniform(config.min_contrast, config.max_contrast);
    const int half = side / 2;
    const int margin = kTargetSpacing + half;
    if (config.width < 2 * margin + 1 || config.height < 2 * margin + 1) continue;
    for (int attempt = 0; attempt < 50; ++attempt) {
      const int cx = rng.uniform_int(margin, config.width - margin);
      const int cy = rng.uniform_int(margin, config.height - margin);
      const BBox candidate{cx - half, cy - half, side, side};
      const bool clash = std::any_of(boxes.begin(), boxes.end(), [&](const BBox& b) {
        return boxes_conflict(b, candidate, 2 * kTargetSpacing);
      });
      if (clash) continue;
      auto [with_target, box] = inject_target(clear, cx, cy, radius_for_side(side), contrast);
      clear = std::move(with_target);
      boxes.push_back(box);
      break;
    }
  }

  for (double& v : clear.pixels()) v = std::clamp(v, 0.0, 1.0);

  CoeffVector coeffs = sample_coeffs(rng.next(), config.degree, config.amplitude);
  GrayImage degraded = synthesize_degraded(clear, coeffs, config.k, config.coord);
  return SceneRecord{std::move(clear), std::move(coeffs), config.coord, config.k,
                     std::move(degraded), std::move(boxes), kind, seed};
}

}  // namespace nucd
