#include "nucd/losses.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nucd/errors.hpp"

namespace nucd {

BinaryMask::BinaryMask(int width, int height) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw ParameterError("mask dimensions must be positive");
  bits_.assign(static_cast<std::size_t>(width) * height, 0);
}

std::size_t BinaryMask::popcount() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

BinaryMask make_mask(std::span<const BBox> boxes, int width, int height) {
  BinaryMask mask(width, height);
  for (const BBox& b : boxes) {
    for (int y = std::max(0, b.y); y < std::min(height, b.y + b.h); ++y) {
      for (int x = std::max(0, b.x); x < std::min(width, b.x + b.w); ++x) mask.set(x, y, true);
    }
  }
  return mask;
}

BinaryMask resize_mask(const BinaryMask& mask, int width, int height) {
  BinaryMask out(width, height);
  const long sw = mask.width();
  const long sh = mask.height();
  for (int y = 0; y < height; ++y) {
    // Source rows [y*sh/height, ceil((y+1)*sh/height)) intersect output row y.
    const int y0 = static_cast<int>(y * sh / height);
    const int y1 = std::max(y0 + 1, static_cast<int>(((y + 1) * sh + height - 1) / height));
    for (int x = 0; x < width; ++x) {
      const int x0 = static_cast<int>(x * sw / width);
      const int x1 = std::max(x0 + 1, static_cast<int>(((x + 1) * sw + width - 1) / width));
      bool any = false;
      for (int sy = y0; sy < y1 && !any; ++sy) {
        for (int sx = x0; sx < x1; ++sx) {
          if (mask(sx, sy)) {
            any = true;
            break;
          }
        }
      }
      out.set(x, y, any);
    }
  }
  return out;
}

double bce(const BinaryMask& mask, const FeatureMap& features) {
  if (mask.width() != features.width() || mask.height() != features.height()) {
    throw ParameterError("bce: mask and feature map sizes differ");
  }
  double acc = 0.0;
  for (int y = 0; y < features.height(); ++y) {
    for (int x = 0; x < features.width(); ++x) {
      if (!std::isfinite(features(x, y))) throw ParameterError("bce: non-finite feature value");
      const double f = std::clamp(features(x, y), kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
      acc -= mask(x, y) ? std::log(f) : std::log(1.0 - f);
    }
  }
  return acc / static_cast<double>(features.size());
}

double tebs_loss(const BinaryMask& mask, const FeatureStack& features) {
  double total = 0.0;
  for (const FeatureMap& stage : features) {
    total += bce(resize_mask(mask, stage.width(), stage.height()), stage);
  }
  return total / 4.0;
}

double tebs_loss(const BinaryMask& mask, std::span<const FeatureStack> channels) {
  if (channels.empty()) throw ParameterError("tebs_loss: no channels");
  double total = 0.0;
  for (const FeatureStack& c : channels) total += tebs_loss(mask, c);
  return total / static_cast<double>(channels.size());
}

double cos_sim(const FeatureMap& a, const FeatureMap& b) {
  if (!a.same_shape(b)) throw ParameterError("cos_sim: feature map shapes differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a.pixels()[i] * b.pixels()[i];
    na += a.pixels()[i] * a.pixels()[i];
    nb += b.pixels()[i] * b.pixels()[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateError(DegenerateKind::kFeature, "cos_sim: zero-norm feature map");
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

Eigen::MatrixXd cos_sim_matrix(const FeatureMap& a, const FeatureMap& b) {
  if (!a.same_shape(b)) throw ParameterError("cos_sim_matrix: feature map shapes differ");
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> ma(a.pixels().data(), a.height(), a.width());
  const Eigen::Map<const RowMajor> mb(b.pixels().data(), b.height(), b.width());
  const Eigen::VectorXd norm_a = ma.rowwise().norm();
  const Eigen::VectorXd norm_b = mb.rowwise().norm();
  for (Eigen::Index i = 0; i < norm_a.size(); ++i) {
    if (norm_a(i) == 0.0 || norm_b(i) == 0.0) {
      throw DegenerateError(DegenerateKind::kFeature,
                            "cos_sim_matrix: zero row " + std::to_string(i) + " in " +
                                (norm_a(i) == 0.0 ? "first" : "second") + " map");
    }
  }
  const Eigen::MatrixXd dots = ma * mb.transpose();
  const Eigen::MatrixXd norms = norm_a * norm_b.transpose();
  return dots.cwiseQuotient(norms);
}

double br_loss(const FeatureStack& clear, const FeatureStack& corrected) {
  double total = 0.0;
  for (std::size_t i = 0; i < clear.size(); ++i) {
    try {
      total += 1.0 - cos_sim(clear[i], corrected[i]);
    } catch (const Error& e) {
      throw ParameterError("br_loss stage " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return total / 4.0;
}

double br_loss(std::span<const FeatureStack> clear, std::span<const FeatureStack> corrected) {
  if (clear.empty() || clear.size() != corrected.size()) {
    throw ParameterError("br_loss: channel counts differ or are zero");
  }
  double total = 0.0;
  for (std::size_t c = 0; c < clear.size(); ++c) total += br_loss(clear[c], corrected[c]);
  return total / static_cast<double>(clear.size());
}

double lambda_schedule(int epoch) {
  if (epoch < 1) throw ParameterError("epochs are counted from 1");
  return epoch <= 20 ? 1.0 : 0.01;
}

double union_loss(const DetectionLossTerms& det, double br) {
  for (double v : {det.cls, det.reg, det.tebs, br}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ParameterError("union_loss: loss components must be finite and non-negative");
    }
  }
  return det.cls + det.reg + lambda_schedule(det.epoch) * det.tebs + br;
}

}  // namespace nucd
