#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nucd/image.hpp"

namespace nucd {

/// Number of monomials x^t y^s with t + s <= degree: (D+1)(D+2)/2.
int coeff_count(int degree);

/// Position of a_{t,s} in the canonical ordering: t outer (0..D), s inner
/// (0..D-t). index(t,s) = t(D+1) - t(t-1)/2 + s.
int coeff_index(int t, int s, int degree);

/// Bivariate polynomial coefficients a_{t,s} in canonical order.
class CoeffVector {
 public:
  explicit CoeffVector(int degree);  // all zero
  CoeffVector(int degree, std::vector<double> coeffs);

  int degree() const noexcept { return degree_; }
  std::size_t size() const noexcept { return coeffs_.size(); }
  std::span<const double> values() const noexcept { return coeffs_; }
  std::span<double> values() noexcept { return coeffs_; }

  double at(int t, int s) const { return coeffs_[coeff_index(t, s, degree_)]; }
  double& at(int t, int s) { return coeffs_[coeff_index(t, s, degree_)]; }

  friend bool operator==(const CoeffVector&, const CoeffVector&) = default;

 private:
  int degree_;
  std::vector<double> coeffs_;
};

CoeffVector operator+(const CoeffVector& a, const CoeffVector& b);
CoeffVector operator*(double s, const CoeffVector& a);

enum class CoordMode { kUnitCentered, kPixelRaw };

std::string to_string(CoordMode mode);
CoordMode coord_mode_from_string(const std::string& name);

/// Maps pixel positions onto model coordinates. Positions are continuous so
/// that pooled grids can be addressed at their block centers.
struct CoordNorm {
  CoordMode mode = CoordMode::kUnitCentered;

  /// Unit-centered maps 0..extent-1 affinely onto [-1,1]; a one-pixel extent
  /// maps to 0. Pixel-raw is the identity.
  double map(double pos, int extent) const noexcept {
    if (mode == CoordMode::kPixelRaw) return pos;
    return extent > 1 ? 2.0 * pos / (extent - 1) - 1.0 : 0.0;
  }
};

/// m[index(t,s)] = x^t y^s.
std::vector<double> monomial_basis(double x, double y, int degree);

/// Powers p^0..p^degree for each entry of `positions`, laid out as
/// powers[t][i].
std::vector<std::vector<double>> axis_powers(std::span<const double> positions, int degree);

GrayImage eval_bias_field(const CoeffVector& coeffs, int width, int height,
                          CoordNorm coord = {});

/// Per-total-order magnitude bounds for random coefficients. bounds[n] applies
/// to every a_{t,s} with t + s == n; orders past the end reuse the last bound.
struct AmplitudeSpec {
  std::vector<double> bounds;
  /// When set, a_{0,0} is replaced after sampling so the field integrates to
  /// zero over the model square [-1,1]^2; only the spatially varying part is
  /// random.
  bool zero_mean = true;

  double bound(int order) const;
  /// 0.08 for order 0, 0.04/n for order n >= 1.
  static AmplitudeSpec defaults();
};

/// Draws every coefficient uniformly from [-bound(t+s), +bound(t+s)] with a
/// seeded 64-bit Mersenne twister. Negative or non-finite bounds are rejected.
CoeffVector sample_coeffs(std::uint64_t seed, int degree, const AmplitudeSpec& spec);

}  // namespace nucd
