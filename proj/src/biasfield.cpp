#include "nucd/biasfield.hpp"

#include <cmath>
#include <random>

#include "nucd/errors.hpp"

namespace nucd {

namespace {

void check_degree(int degree) {
  if (degree < 1) {
    throw ParameterError("polynomial degree must be >= 1, got " + std::to_string(degree));
  }
}

double uniform_symmetric(std::mt19937_64& rng, double bound) {
  // 53 random mantissa bits -> [0,1), then affine onto [-bound, bound).
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return bound * (2.0 * u - 1.0);
}

}  // namespace

int coeff_count(int degree) {
  check_degree(degree);
  return (degree + 1) * (degree + 2) / 2;
}

int coeff_index(int t, int s, int degree) {
  if (t < 0 || s < 0 || t + s > degree) {
    throw ParameterError("no coefficient a_{" + std::to_string(t) + "," + std::to_string(s) +
                         "} at degree " + std::to_string(degree));
  }
  return t * (degree + 1) - t * (t - 1) / 2 + s;
}

CoeffVector::CoeffVector(int degree)
    : degree_(degree), coeffs_(static_cast<std::size_t>(coeff_count(degree)), 0.0) {}

CoeffVector::CoeffVector(int degree, std::vector<double> coeffs)
    : degree_(degree), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != static_cast<std::size_t>(coeff_count(degree))) {
    throw ParameterError("degree " + std::to_string(degree) + " needs " +
                         std::to_string(coeff_count(degree)) + " coefficients, got " +
                         std::to_string(coeffs_.size()));
  }
  for (double c : coeffs_) {
    if (!std::isfinite(c)) throw ParameterError("non-finite polynomial coefficient");
  }
}

CoeffVector operator+(const CoeffVector& a, const CoeffVector& b) {
  if (a.degree() != b.degree()) throw ParameterError("coefficient degree mismatch");
  CoeffVector out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += b.values()[i];
  return out;
}

CoeffVector operator*(double s, const CoeffVector& a) {
  CoeffVector out = a;
  for (double& c : out.values()) c *= s;
  return out;
}

std::string to_string(CoordMode mode) {
  return mode == CoordMode::kUnitCentered ? "unit-centered" : "pixel-raw";
}

CoordMode coord_mode_from_string(const std::string& name) {
  if (name == "unit-centered") return CoordMode::kUnitCentered;
  if (name == "pixel-raw") return CoordMode::kPixelRaw;
  throw ParameterError("unknown coordinate mode '" + name + "'");
}

std::vector<double> monomial_basis(double x, double y, int degree) {
  std::vector<double> m(static_cast<std::size_t>(coeff_count(degree)));
  double xt = 1.0;
  std::size_t k = 0;
  for (int t = 0; t <= degree; ++t) {
    double ys = 1.0;
    for (int s = 0; s <= degree - t; ++s) {
      m[k++] = xt * ys;
      ys *= y;
    }
    xt *= x;
  }
  return m;
}

std::vector<std::vector<double>> axis_powers(std::span<const double> positions, int degree) {
  std::vector<std::vector<double>> powers(degree + 1, std::vector<double>(positions.size(), 1.0));
  for (int t = 1; t <= degree; ++t) {
    for (std::size_t i = 0; i < positions.size(); ++i) {
      powers[t][i] = powers[t - 1][i] * positions[i];
    }
  }
  return powers;
}

GrayImage eval_bias_field(const CoeffVector& coeffs, int width, int height, CoordNorm coord) {
  const int degree = coeffs.degree();
  std::vector<double> xs(width), ys(height);
  for (int i = 0; i < width; ++i) xs[i] = coord.map(i, width);
  for (int j = 0; j < height; ++j) ys[j] = coord.map(j, height);
  const auto ypow = axis_powers(ys, degree);

  GrayImage field(width, height);
  std::vector<double> row_poly(degree + 1);
  for (int j = 0; j < height; ++j) {
    // Collapse the y-dependence first: p_t(y) = sum_s a_{t,s} y^s.
    for (int t = 0; t <= degree; ++t) {
      double acc = 0.0;
      for (int s = 0; s <= degree - t; ++s) acc += coeffs.at(t, s) * ypow[s][j];
      row_poly[t] = acc;
    }
    auto out = field.row(j);
    for (int i = 0; i < width; ++i) {
      double v = row_poly[degree];
      for (int t = degree - 1; t >= 0; --t) v = v * xs[i] + row_poly[t];
      out[i] = v;
    }
  }
  return field;
}

double AmplitudeSpec::bound(int order) const {
  if (bounds.empty()) return 0.0;
  return bounds[std::min<std::size_t>(order, bounds.size() - 1)];
}

AmplitudeSpec AmplitudeSpec::defaults() {
  AmplitudeSpec spec;
  spec.bounds = {0.08};
  for (int n = 1; n <= 8; ++n) spec.bounds.push_back(0.04 / n);
  return spec;
}

CoeffVector sample_coeffs(std::uint64_t seed, int degree, const AmplitudeSpec& spec) {
  CoeffVector out(degree);
  if (spec.bounds.empty()) throw ParameterError("amplitude spec has no bounds");
  for (double b : spec.bounds) {
    if (!(b >= 0.0) || !std::isfinite(b)) {
      throw ParameterError("amplitude bounds must be finite and non-negative");
    }
  }
  std::mt19937_64 rng(seed);
  for (int t = 0; t <= degree; ++t) {
    for (int s = 0; s <= degree - t; ++s) {
      out.at(t, s) = uniform_symmetric(rng, spec.bound(t + s));
    }
  }
  if (spec.zero_mean) {
    // Mean of x^t over [-1,1] is 1/(t+1) for even t, 0 for odd t.
    double mean = 0.0;
    for (int t = 0; t <= degree; t += 2) {
      for (int s = 0; s <= degree - t; s += 2) {
        if (t == 0 && s == 0) continue;
        mean += out.at(t, s) / ((t + 1.0) * (s + 1.0));
      }
    }
    out.at(0, 0) = -mean;
  }
  return out;
}

}  // namespace nucd
