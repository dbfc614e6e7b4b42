#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nucd {

/// Single-channel image of 64-bit intensities, row-major, top-left origin.
/// x indexes columns, y indexes rows. Values are nominally in [0,1] but are
/// never clamped here; clamping happens only when writing files.
class GrayImage {
 public:
  GrayImage(int width, int height, double fill = 0.0);
  GrayImage(int width, int height, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  double operator()(int x, int y) const noexcept {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  double& operator()(int x, int y) noexcept {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  std::span<const double> pixels() const noexcept { return data_; }
  std::span<double> pixels() noexcept { return data_; }
  std::span<const double> row(int y) const noexcept {
    return pixels().subspan(static_cast<std::size_t>(y) * width_, width_);
  }
  std::span<double> row(int y) noexcept {
    return pixels().subspan(static_cast<std::size_t>(y) * width_, width_);
  }

  bool same_shape(const GrayImage& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  double mean() const noexcept;
  double min() const noexcept;
  double max() const noexcept;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_;
  int height_;
  std::vector<double> data_;
};

struct Downsampled {
  GrayImage image;
  // Set when an odd trailing row or column was dropped before pooling.
  bool truncated = false;
};

/// 2x2 mean pooling. Odd trailing rows/columns are dropped (and flagged); a
/// dimension of 1 is kept as 1.
Downsampled downsample2(const GrayImage& img);

/// Normalized 1-D Gaussian taps of radius ceil(3*sigma); index r is the center.
std::vector<double> gaussian_kernel(double sigma);

/// Convolves a 1-D signal with `kernel` (odd length), replicating edges.
std::vector<double> convolve_replicate(std::span<const double> signal,
                                       std::span<const double> kernel);

/// Separable Gaussian blur with edge replication. Throws ParameterError for
/// sigma <= 0.
GrayImage gaussian_blur(const GrayImage& img, double sigma);

}  // namespace nucd
