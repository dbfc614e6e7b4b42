#include "nucd/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "nucd/errors.hpp"

namespace nucd {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

void require_same_shape(const GrayImage& a, const GrayImage& b, const char* what) {
  if (!a.same_shape(b)) throw ParameterError(std::string(what) + ": image dimensions differ");
}

std::vector<double> ssim_taps() {
  std::vector<double> taps(kSsimWindow);
  const int r = kSsimWindow / 2;
  double z = 0.0;
  for (int i = -r; i <= r; ++i) z += taps[i + r] = std::exp(-(i * i) / (2.0 * kSsimSigma * kSsimSigma));
  for (double& t : taps) t /= z;
  return taps;
}

// Separable filtering restricted to positions where the window fits.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h,
                                 const std::vector<double>& taps) {
  const int n = static_cast<int>(taps.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> horizontal(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    const double* row = src.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += taps[k] * row[x + k];
      horizontal[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh, 0.0);
  for (int y = 0; y < oh; ++y) {
    double* dst = out.data() + static_cast<std::size_t>(y) * ow;
    for (int k = 0; k < n; ++k) {
      const double* src_row = horizontal.data() + static_cast<std::size_t>(y + k) * ow;
      for (int x = 0; x < ow; ++x) dst[x] += taps[k] * src_row[x];
    }
  }
  return out;
}

}  // namespace

double psnr(const GrayImage& a, const GrayImage& b, double peak) {
  require_same_shape(a, b, "psnr");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.pixels()[i] - b.pixels()[i];
    sse += d * d;
  }
  if (sse == 0.0) return kPsnrIdentical;
  const double mse = sse / static_cast<double>(a.size());
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const GrayImage& a, const GrayImage& b, double peak) {
  require_same_shape(a, b, "ssim");
  if (a.width() < kSsimWindow || a.height() < kSsimWindow) {
    throw ParameterError("ssim needs images of at least 11x11 pixels");
  }
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const int w = a.width();
  const int h = a.height();
  const auto taps = ssim_taps();

  std::vector<double> pa(a.pixels().begin(), a.pixels().end());
  std::vector<double> pb(b.pixels().begin(), b.pixels().end());
  std::vector<double> aa(pa.size()), bb(pa.size()), ab(pa.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    aa[i] = pa[i] * pa[i];
    bb[i] = pb[i] * pb[i];
    ab[i] = pa[i] * pb[i];
  }
  const auto mu_a = filter_valid(pa, w, h, taps);
  const auto mu_b = filter_valid(pb, w, h, taps);
  const auto s_aa = filter_valid(aa, w, h, taps);
  const auto s_bb = filter_valid(bb, w, h, taps);
  const auto s_ab = filter_valid(ab, w, h, taps);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double var_a = s_aa[i] - ma * ma;
    const double var_b = s_bb[i] - mb * mb;
    const double cov = s_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

double coeff_loss(const CoeffVector& predicted, const CoeffVector& truth) {
  if (predicted.degree() != truth.degree()) throw ParameterError("coeff_loss: degree mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = predicted.values()[i] - truth.values()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(truth.size());
}

double coeff_loss_l1(const CoeffVector& predicted, const CoeffVector& truth) {
  if (predicted.degree() != truth.degree()) throw ParameterError("coeff_loss: degree mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    acc += std::abs(predicted.values()[i] - truth.values()[i]);
  }
  return acc / static_cast<double>(truth.size());
}

ScrStats scr_stats(const GrayImage& img, const ScrSpec& spec) {
  const BBox& t = spec.bbox;
  if (!t.valid_in(img.width(), img.height())) throw ParameterError("scr: target box outside image");
  if (spec.ring < 1) throw ParameterError("scr: ring width must be >= 1");
  const int x0 = std::max(0, t.x - spec.ring);
  const int y0 = std::max(0, t.y - spec.ring);
  const int x1 = std::min(img.width(), t.x + t.w + spec.ring);
  const int y1 = std::min(img.height(), t.y + t.h + spec.ring);

  double target_sum = 0.0;
  double bg_sum = 0.0;
  std::size_t bg_n = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool inside = x >= t.x && x < t.x + t.w && y >= t.y && y < t.y + t.h;
      if (inside) {
        target_sum += img(x, y);
      } else {
        bg_sum += img(x, y);
        ++bg_n;
      }
    }
  }
  if (bg_n == 0) throw ParameterError("scr: background ring is empty");

  ScrStats stats;
  stats.target_mean = target_sum / static_cast<double>(t.area());
  stats.background_mean = bg_sum / static_cast<double>(bg_n);
  stats.background_pixels = bg_n;
  double sq = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool inside = x >= t.x && x < t.x + t.w && y >= t.y && y < t.y + t.h;
      if (!inside) {
        const double d = img(x, y) - stats.background_mean;
        sq += d * d;
      }
    }
  }
  stats.background_std = std::sqrt(sq / static_cast<double>(bg_n));
  return stats;
}

double scr(const GrayImage& img, const ScrSpec& spec) {
  const ScrStats s = scr_stats(img, spec);
  if (s.background_std == 0.0) {
    throw DegenerateError(DegenerateKind::kBackground, "scr: constant background ring");
  }
  return std::abs(s.target_mean - s.background_mean) / s.background_std;
}

double scrg(const GrayImage& original, const GrayImage& corrected, const ScrSpec& spec) {
  require_same_shape(original, corrected, "scrg");
  const double in = scr(original, spec);
  if (in == 0.0) throw DegenerateError(DegenerateKind::kGain, "scrg: input SCR is zero");
  return scr(corrected, spec) / in;
}

}  // namespace nucd
