#include "nucd/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nucd/errors.hpp"

namespace nucd {

GrayImage::GrayImage(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw ParameterError("image dimensions must be positive, got " +
                         std::to_string(width) + "x" + std::to_string(height));
  }
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    throw ParameterError("image dimensions must be positive, got " +
                         std::to_string(width) + "x" + std::to_string(height));
  }
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw ParameterError("pixel buffer length does not match width*height");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw ParameterError("image contains non-finite intensity");
  }
}

double GrayImage::mean() const noexcept {
  return std::accumulate(data_.begin(), data_.end(), 0.0) /
         static_cast<double>(data_.size());
}

double GrayImage::min() const noexcept {
  return *std::min_element(data_.begin(), data_.end());
}

double GrayImage::max() const noexcept {
  return *std::max_element(data_.begin(), data_.end());
}

Downsampled downsample2(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  const bool truncated = (w > 1 && w % 2 == 1) || (h > 1 && h % 2 == 1);
  const int bw = w == 1 ? 1 : 2;
  const int bh = h == 1 ? 1 : 2;
  const int ow = w == 1 ? 1 : w / 2;
  const int oh = h == 1 ? 1 : h / 2;
  const double inv = 1.0 / (bw * bh);

  GrayImage out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double sum = 0.0;
      for (int dy = 0; dy < bh; ++dy) {
        for (int dx = 0; dx < bw; ++dx) sum += img(x * bw + dx, y * bh + dy);
      }
      out(x, y) = sum * inv;
    }
  }
  return {std::move(out), truncated};
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ParameterError("gaussian sigma must be positive");
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  }
  const double z = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= z;
  return taps;
}

std::vector<double> convolve_replicate(std::span<const double> signal,
                                       std::span<const double> kernel) {
  const int n = static_cast<int>(signal.size());
  const int r = static_cast<int>(kernel.size()) / 2;
  std::vector<double> padded(n + 2 * r);
  for (int i = 0; i < n + 2 * r; ++i) {
    padded[i] = signal[std::clamp(i - r, 0, n - 1)];
  }
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* p = padded.data() + i;
    double acc = 0.0;
    for (std::size_t k = 0; k < kernel.size(); ++k) acc += kernel[k] * p[k];
    out[i] = acc;
  }
  return out;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  const std::vector<double> kernel = gaussian_kernel(sigma);
  const int r = static_cast<int>(kernel.size()) / 2;
  const int w = img.width();
  const int h = img.height();

  GrayImage horizontal(w, h);
  for (int y = 0; y < h; ++y) {
    const auto blurred = convolve_replicate(img.row(y), kernel);
    std::copy(blurred.begin(), blurred.end(), horizontal.row(y).begin());
  }

  // Vertical pass accumulates whole rows to stay cache friendly.
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    auto dst = out.row(y);
    for (int k = -r; k <= r; ++k) {
      const double wk = kernel[k + r];
      const auto src = horizontal.row(std::clamp(y + k, 0, h - 1));
      for (int x = 0; x < w; ++x) dst[x] += wk * src[x];
    }
  }
  return out;
}

}  // namespace nucd
