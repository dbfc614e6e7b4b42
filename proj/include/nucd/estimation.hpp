#pragma once

#include "nucd/biasfield.hpp"
#include "nucd/image.hpp"

namespace nucd {

enum class FitMethod { kPaired, kBlind };

std::string to_string(FitMethod method);

/// Estimated bias field. Coefficients are expressed in the coordinate system
/// of the full-resolution image the fit was made for.
struct FitResult {
  CoeffVector coeffs;
  CoordNorm coord;
  int width = 0;
  int height = 0;
  double residual_rms = 0.0;
  /// lambda_max / lambda_min of the (unweighted for paired, final weighted
  /// for blind) normal matrix.
  double condition_estimate = 0.0;
  FitMethod method = FitMethod::kPaired;
  /// Blind fits only: the fitted a_{0,0} before it was replaced by the value
  /// that makes the field zero-mean over the image grid.
  double removed_constant = 0.0;
};

/// Least-squares fit of Y - C onto the monomial basis (normal equations,
/// Cholesky on the Jacobi-equilibrated system). Throws NumericalError on a
/// rank-deficient system.
FitResult fit_paired(const GrayImage& degraded, const GrayImage& clear, int degree,
                     CoordNorm coord = {});

struct BlindParams {
  /// Full-resolution blur; halved when the image is downsampled first.
  double blur_sigma = 25.0;
  bool downsample_first = true;
  int robust_iters = 3;
};

/// Fits the bias field from the degraded image alone:
///   optional 2x2 pooling -> Gaussian blur -> weighted least squares of the
///   blurred image onto the identically pooled and blurred basis, with
///   Tukey-biweight reweighting (c = 4.685 * 1.4826 * MAD).
/// The constant term is unidentifiable; the result is normalized to a
/// zero-mean field so correction preserves the image mean.
FitResult fit_blind(const GrayImage& degraded, int degree, CoordNorm coord = {},
                    const BlindParams& params = {});

/// R = Y - B(fit). Throws ParameterError if the fit was made for another size.
GrayImage correct(const GrayImage& degraded, const FitResult& fit);

}  // namespace nucd
