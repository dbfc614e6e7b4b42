#include "nucd/estimation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <tuple>

#include "nucd/errors.hpp"

namespace nucd {

namespace {

constexpr double kMaxEquilibratedCondition = 1e12;
constexpr double kTukeyC = 4.685;
constexpr double kMadToSigma = 1.4826;

// Basis functions of the form X_t(i) * Y_s(j) on a W x H grid.
struct SeparableDesign {
  int degree = 0;
  std::vector<std::vector<double>> xcols;  // [t][i]
  std::vector<std::vector<double>> ycols;  // [s][j]

  int width() const { return static_cast<int>(xcols.front().size()); }
  int height() const { return static_cast<int>(ycols.front().size()); }
};

Eigen::MatrixXd normal_matrix(const SeparableDesign& d, const GrayImage* weights) {
  const int deg = d.degree;
  const int n = coeff_count(deg);
  const int w = d.width();
  const int h = d.height();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd row_moments(deg + 1, deg + 1);
  for (int j = 0; j < h; ++j) {
    // row_moments(t, t') = sum_i w_ij X_t(i) X_t'(i)
    for (int t = 0; t <= deg; ++t) {
      for (int u = t; u <= deg; ++u) {
        double acc = 0.0;
        const double* xt = d.xcols[t].data();
        const double* xu = d.xcols[u].data();
        if (weights != nullptr) {
          const auto wr = weights->row(j);
          for (int i = 0; i < w; ++i) acc += wr[i] * xt[i] * xu[i];
        } else {
          for (int i = 0; i < w; ++i) acc += xt[i] * xu[i];
        }
        row_moments(t, u) = row_moments(u, t) = acc;
      }
    }
    for (int t = 0; t <= deg; ++t) {
      for (int s = 0; s <= deg - t; ++s) {
        const int a = coeff_index(t, s, deg);
        const double ys = d.ycols[s][j];
        for (int u = 0; u <= deg; ++u) {
          for (int v = 0; v <= deg - u; ++v) {
            const int b = coeff_index(u, v, deg);
            if (b < a) continue;
            g(a, b) += row_moments(t, u) * ys * d.ycols[v][j];
          }
        }
      }
    }
  }
  g.triangularView<Eigen::StrictlyLower>() = g.transpose().triangularView<Eigen::StrictlyLower>();
  return g;
}

Eigen::VectorXd moment_vector(const SeparableDesign& d, const GrayImage& target,
                              const GrayImage* weights) {
  const int deg = d.degree;
  const int w = d.width();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(coeff_count(deg));
  std::vector<double> row_sums(deg + 1);
  for (int j = 0; j < d.height(); ++j) {
    const auto z = target.row(j);
    for (int t = 0; t <= deg; ++t) {
      const double* xt = d.xcols[t].data();
      double acc = 0.0;
      if (weights != nullptr) {
        const auto wr = weights->row(j);
        for (int i = 0; i < w; ++i) acc += wr[i] * xt[i] * z[i];
      } else {
        for (int i = 0; i < w; ++i) acc += xt[i] * z[i];
      }
      row_sums[t] = acc;
    }
    for (int t = 0; t <= deg; ++t) {
      for (int s = 0; s <= deg - t; ++s) {
        b(coeff_index(t, s, deg)) += row_sums[t] * d.ycols[s][j];
      }
    }
  }
  return b;
}

// Evaluates sum a_{t,s} X_t(i) Y_s(j) on the design grid.
GrayImage evaluate_design(const SeparableDesign& d, const Eigen::VectorXd& a) {
  const int deg = d.degree;
  GrayImage out(d.width(), d.height());
  std::vector<double> row_poly(deg + 1);
  for (int j = 0; j < d.height(); ++j) {
    for (int t = 0; t <= deg; ++t) {
      double acc = 0.0;
      for (int s = 0; s <= deg - t; ++s) acc += a(coeff_index(t, s, deg)) * d.ycols[s][j];
      row_poly[t] = acc;
    }
    auto dst = out.row(j);
    for (int i = 0; i < d.width(); ++i) {
      double v = 0.0;
      for (int t = 0; t <= deg; ++t) v += row_poly[t] * d.xcols[t][i];
      dst[i] = v;
    }
  }
  return out;
}

double condition_of(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

// Cholesky of the Jacobi-equilibrated normal matrix.
class SpdSolver {
 public:
  explicit SpdSolver(const Eigen::MatrixXd& g) : condition_(condition_of(g)) {
    const Eigen::VectorXd diag = g.diagonal();
    if ((diag.array() <= 0.0).any()) {
      throw NumericalError("rank-deficient normal equations: a basis function vanishes on the grid",
                           std::numeric_limits<double>::infinity());
    }
    scale_ = diag.array().rsqrt();
    const Eigen::MatrixXd equilibrated = scale_.asDiagonal() * g * scale_.asDiagonal();
    const double eq_cond = condition_of(equilibrated);
    llt_.compute(equilibrated);
    if (llt_.info() != Eigen::Success || !(eq_cond < kMaxEquilibratedCondition)) {
      throw NumericalError("rank-deficient normal equations (condition estimate " +
                               std::to_string(condition_) + ")",
                           condition_);
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    return scale_.asDiagonal() * llt_.solve(scale_.asDiagonal() * b);
  }

  double condition() const { return condition_; }

 private:
  double condition_;
  Eigen::VectorXd scale_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

std::vector<double> grid_positions(int extent, CoordNorm coord) {
  std::vector<double> pos(extent);
  for (int i = 0; i < extent; ++i) pos[i] = coord.map(i, extent);
  return pos;
}

SeparableDesign monomial_design(int width, int height, int degree, CoordNorm coord) {
  SeparableDesign d;
  d.degree = degree;
  d.xcols = axis_powers(grid_positions(width, coord), degree);
  d.ycols = axis_powers(grid_positions(height, coord), degree);
  return d;
}

// Read-mostly cache of the unweighted factorization for a grid.
class GramCache {
 public:
  struct Entry {
    SeparableDesign design;
    SpdSolver solver;
  };

  std::shared_ptr<const Entry> get(int width, int height, int degree, CoordNorm coord) {
    const Key key{width, height, degree, static_cast<int>(coord.mode)};
    {
      std::shared_lock lock(mutex_);
      if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    }
    auto design = monomial_design(width, height, degree, coord);
    SpdSolver solver(normal_matrix(design, nullptr));
    auto entry = std::make_shared<const Entry>(Entry{std::move(design), std::move(solver)});
    std::unique_lock lock(mutex_);
    return entries_.try_emplace(key, std::move(entry)).first->second;
  }

 private:
  using Key = std::tuple<int, int, int, int>;
  std::shared_mutex mutex_;
  std::map<Key, std::shared_ptr<const Entry>> entries_;
};

GramCache& gram_cache() {
  static GramCache cache;
  return cache;
}

CoeffVector to_coeffs(int degree, const Eigen::VectorXd& a) {
  return CoeffVector(degree, std::vector<double>(a.data(), a.data() + a.size()));
}

double rms(const GrayImage& img) {
  double acc = 0.0;
  for (double v : img.pixels()) acc += v * v;
  return std::sqrt(acc / static_cast<double>(img.size()));
}

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  }
  return m;
}

// Column positions of a (possibly pooled) grid, expressed as full-resolution
// pixel indices. Pooling averages the monomials of the pooled pixels, so the
// design carries the pooled powers rather than powers of the block center.
std::vector<std::vector<double>> pooled_axis(int full_extent, int block, int out_extent,
                                             int degree, CoordNorm coord) {
  std::vector<std::vector<double>> cols(degree + 1, std::vector<double>(out_extent, 0.0));
  for (int i = 0; i < out_extent; ++i) {
    for (int k = 0; k < block; ++k) {
      const double p = coord.map(i * block + k, full_extent);
      double pk = 1.0;
      for (int t = 0; t <= degree; ++t) {
        cols[t][i] += pk / block;
        pk *= p;
      }
    }
  }
  return cols;
}

}  // namespace

std::string to_string(FitMethod method) {
  return method == FitMethod::kPaired ? "paired" : "blind";
}

FitResult fit_paired(const GrayImage& degraded, const GrayImage& clear, int degree,
                     CoordNorm coord) {
  if (!degraded.same_shape(clear)) {
    throw ParameterError("paired fit needs images of identical size");
  }
  const int n = coeff_count(degree);
  if (degraded.size() < static_cast<std::size_t>(n)) {
    throw ParameterError("too few pixels for a degree-" + std::to_string(degree) + " fit");
  }
  const auto entry = gram_cache().get(degraded.width(), degraded.height(), degree, coord);

  GrayImage diff(degraded.width(), degraded.height());
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff.pixels()[i] = degraded.pixels()[i] - clear.pixels()[i];
  }
  const Eigen::VectorXd a = entry->solver.solve(moment_vector(entry->design, diff, nullptr));

  GrayImage residual = evaluate_design(entry->design, a);
  for (std::size_t i = 0; i < diff.size(); ++i) {
    residual.pixels()[i] = diff.pixels()[i] - residual.pixels()[i];
  }

  FitResult fit{to_coeffs(degree, a), coord, degraded.width(), degraded.height(),
                rms(residual), entry->solver.condition(), FitMethod::kPaired, 0.0};
  return fit;
}

FitResult fit_blind(const GrayImage& degraded, int degree, CoordNorm coord,
                    const BlindParams& params) {
  const int n = coeff_count(degree);
  if (params.robust_iters < 0) throw ParameterError("robust-iters must be >= 0");
  if (!(params.blur_sigma > 0.0)) throw ParameterError("blur sigma must be positive");

  const int full_w = degraded.width();
  const int full_h = degraded.height();
  const bool pool = params.downsample_first;
  GrayImage work = pool ? downsample2(degraded).image : degraded;
  const int bx = pool && full_w > 1 ? 2 : 1;
  const int by = pool && full_h > 1 ? 2 : 1;
  if (work.size() < static_cast<std::size_t>(n)) {
    throw ParameterError("too few pixels after preprocessing for a degree-" +
                         std::to_string(degree) + " fit");
  }

  const double sigma = pool ? params.blur_sigma / 2.0 : params.blur_sigma;
  const GrayImage blurred = gaussian_blur(work, sigma);

  // The same pooling and blur applied to the basis keeps a pure polynomial
  // field exactly representable after preprocessing.
  const auto kernel = gaussian_kernel(sigma);
  SeparableDesign design;
  design.degree = degree;
  design.xcols = pooled_axis(full_w, bx, work.width(), degree, coord);
  design.ycols = pooled_axis(full_h, by, work.height(), degree, coord);
  for (auto& col : design.xcols) col = convolve_replicate(col, kernel);
  for (auto& col : design.ycols) col = convolve_replicate(col, kernel);

  GrayImage weights(work.width(), work.height(), 1.0);
  const GrayImage* wptr = nullptr;  // unit weights on the first pass
  Eigen::VectorXd a;
  GrayImage residual(work.width(), work.height());
  double condition = 0.0;
  for (int iter = 0;; ++iter) {
    const Eigen::MatrixXd g = normal_matrix(design, wptr);
    SpdSolver solver(g);
    condition = solver.condition();
    a = solver.solve(moment_vector(design, blurred, wptr));

    residual = evaluate_design(design, a);
    for (std::size_t i = 0; i < residual.size(); ++i) {
      residual.pixels()[i] = blurred.pixels()[i] - residual.pixels()[i];
    }
    if (iter == params.robust_iters) break;

    std::vector<double> r(residual.pixels().begin(), residual.pixels().end());
    const double med = median_of(r);
    for (double& v : r) v = std::abs(v - med);
    const double c = kTukeyC * kMadToSigma * median_of(std::move(r));
    if (!(c > 0.0)) break;  // exact fit; reweighting has nothing to reject

    double total = 0.0;
    for (std::size_t i = 0; i < residual.size(); ++i) {
      const double u = residual.pixels()[i] / c;
      const double wi = std::abs(u) < 1.0 ? (1.0 - u * u) * (1.0 - u * u) : 0.0;
      weights.pixels()[i] = wi;
      total += wi;
    }
    if (!(total > 0.0)) throw NumericalError("all robust weights vanished");
    wptr = &weights;
  }

  CoeffVector coeffs = to_coeffs(degree, a);
  // Replace a_{0,0} so the field has zero mean on the full-resolution grid.
  const auto xmean = axis_powers(grid_positions(full_w, coord), degree);
  const auto ymean = axis_powers(grid_positions(full_h, coord), degree);
  auto mean_of = [](const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
  };
  double varying_mean = 0.0;
  for (int t = 0; t <= degree; ++t) {
    for (int s = 0; s <= degree - t; ++s) {
      if (t == 0 && s == 0) continue;
      varying_mean += coeffs.at(t, s) * mean_of(xmean[t]) * mean_of(ymean[s]);
    }
  }
  const double removed = coeffs.at(0, 0);
  coeffs.at(0, 0) = -varying_mean;

  FitResult fit{std::move(coeffs), coord, full_w, full_h, rms(residual), condition,
                FitMethod::kBlind, removed};
  return fit;
}

GrayImage correct(const GrayImage& degraded, const FitResult& fit) {
  if (degraded.width() != fit.width || degraded.height() != fit.height) {
    throw ParameterError("fit was made for a " + std::to_string(fit.width) + "x" +
                         std::to_string(fit.height) + " image");
  }
  GrayImage out = eval_bias_field(fit.coeffs, fit.width, fit.height, fit.coord);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.pixels()[i] = degraded.pixels()[i] - out.pixels()[i];
  }
  return out;
}

}  // namespace nucd
