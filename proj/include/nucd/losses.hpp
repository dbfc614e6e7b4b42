#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "nucd/image.hpp"
#include "nucd/synthesis.hpp"

namespace nucd {

/// Per-pixel {0,1} mask, row-major.
class BinaryMask {
 public:
  BinaryMask(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool operator()(int x, int y) const noexcept { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) noexcept { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  std::size_t popcount() const noexcept;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

/// A single-channel feature map is stored like an image.
using FeatureMap = GrayImage;

/// Exactly four backbone stages.
using FeatureStack = std::array<FeatureMap, 4>;

inline constexpr double kProbabilityEpsilon = 1e-7;

/// 1 on the union of the boxes, 0 elsewhere. Boxes are clipped to the mask.
BinaryMask make_mask(std::span<const BBox> boxes, int width, int height);

/// Max-pooling over the source preimage of each output cell.
BinaryMask resize_mask(const BinaryMask& mask, int width, int height);

/// Pixel-mean binary cross-entropy of `features` (clamped to [eps, 1-eps])
/// against `mask`, which must have the same size.
double bce(const BinaryMask& mask, const FeatureMap& features);

/// (1/4) sum_i BCE(resize(M, stage_i), F_i).
double tebs_loss(const BinaryMask& mask, const FeatureStack& features);

/// Multi-channel variant: the per-channel TEBS losses are averaged.
double tebs_loss(const BinaryMask& mask, std::span<const FeatureStack> channels);

/// Cosine similarity of the flattened maps. Throws DegenerateError for a
/// zero-norm map and ParameterError for a shape mismatch.
double cos_sim(const FeatureMap& a, const FeatureMap& b);

/// Row-wise similarity matrix: entry (i, j) = A_i . B_j / (|A_i| |B_j|),
/// computed as (A B^T) ./ (n_A n_B^T).
Eigen::MatrixXd cos_sim_matrix(const FeatureMap& a, const FeatureMap& b);

/// (1/4) sum_i (1 - cos_sim(clear_i, corrected_i)), in [0, 2].
double br_loss(const FeatureStack& clear, const FeatureStack& corrected);

/// Multi-channel variant: the per-channel BR losses are averaged.
double br_loss(std::span<const FeatureStack> clear, std::span<const FeatureStack> corrected);

/// 1.0 for the first 20 epochs (1-based, inclusive), 0.01 afterwards.
double lambda_schedule(int epoch);

struct DetectionLossTerms {
  double cls = 0.0;
  double reg = 0.0;
  double tebs = 0.0;
  int epoch = 1;
};

/// cls + reg + lambda(epoch) * tebs + br.
double union_loss(const DetectionLossTerms& det, double br);

}  // namespace nucd
