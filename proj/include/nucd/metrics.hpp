#pragma once

#include <limits>

#include "nucd/biasfield.hpp"
#include "nucd/image.hpp"
#include "nucd/synthesis.hpp"

namespace nucd {

/// Returned by psnr() for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE) in dB.
double psnr(const GrayImage& a, const GrayImage& b, double peak = 1.0);

/// Mean SSIM over all valid 11x11 Gaussian (sigma 1.5) windows, computed on
/// unclamped intensities with C1 = (0.01 peak)^2 and C2 = (0.03 peak)^2.
double ssim(const GrayImage& a, const GrayImage& b, double peak = 1.0);

/// (1/N) * ||predicted - truth||_2^2 over the N coefficients.
double coeff_loss(const CoeffVector& predicted, const CoeffVector& truth);

/// (1/N) * ||predicted - truth||_1, the literal mean-absolute-error reading.
double coeff_loss_l1(const CoeffVector& predicted, const CoeffVector& truth);

/// Target box plus the width d of the surrounding clutter ring.
struct ScrSpec {
  BBox bbox;
  int ring = 5;
};

struct ScrStats {
  double target_mean = 0.0;
  double background_mean = 0.0;
  double background_std = 0.0;  // population
  std::size_t background_pixels = 0;
};

/// Region statistics behind SCR. The ring is clipped to the image.
ScrStats scr_stats(const GrayImage& img, const ScrSpec& spec);

/// |mu_t - mu_b| / sigma_b. Throws DegenerateError when sigma_b == 0.
double scr(const GrayImage& img, const ScrSpec& spec);

/// SCR(corrected) / SCR(original).
double scrg(const GrayImage& original, const GrayImage& corrected, const ScrSpec& spec);

}  // namespace nucd
