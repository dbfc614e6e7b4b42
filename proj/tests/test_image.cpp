#include <gtest/gtest.h>
#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "nucd/errors.hpp"
#include "nucd/image.hpp"
#include "nucd/image_io.hpp"

using namespace nucd;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "nucd_test_image";
  fs::create_directories(dir);
  return dir / name;
}

GrayImage ramp(int w, int h) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img(x, y) = static_cast<double>(x + w * y) / (w * h);
  }
  return img;
}

void write_rgb_png(const fs::path& path) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  ASSERT_NE(fp, nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, fp);
  png_set_IHDR(png, info, 4, 3, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(12, 128);
  for (int y = 0; y < 3; ++y) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

IoErrorKind load_error_kind(const fs::path& path) {
  try {
    load_image(path);
  } catch (const IoError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "load_image did not throw for " << path;
  return IoErrorKind::kWrite;
}

}  // namespace

TEST(GrayImage, ValidatesConstruction) {
  EXPECT_THROW(GrayImage(0, 3), ParameterError);
  EXPECT_THROW(GrayImage(2, 2, std::vector<double>(3)), ParameterError);
  EXPECT_THROW(GrayImage(1, 1, std::vector<double>{NAN}), ParameterError);
  const GrayImage img(3, 2, std::vector<double>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(img(2, 1), 6.0);
  EXPECT_EQ(img.row(1)[0], 4.0);
  EXPECT_EQ(img.mean(), 3.5);
  EXPECT_EQ(img.min(), 1.0);
  EXPECT_EQ(img.max(), 6.0);
}

TEST(Downsample2, MeanPoolsAndFlagsTruncation) {
  const GrayImage img(4, 2, std::vector<double>{0, 2, 4, 6, 2, 4, 6, 8});
  const Downsampled d = downsample2(img);
  EXPECT_FALSE(d.truncated);
  ASSERT_EQ(d.image.width(), 2);
  ASSERT_EQ(d.image.height(), 1);
  EXPECT_EQ(d.image(0, 0), 2.0);
  EXPECT_EQ(d.image(1, 0), 6.0);

  const Downsampled odd = downsample2(ramp(5, 3));
  EXPECT_TRUE(odd.truncated);
  EXPECT_EQ(odd.image.width(), 2);
  EXPECT_EQ(odd.image.height(), 1);

  const Downsampled line = downsample2(GrayImage(1, 6, 1.0));
  EXPECT_EQ(line.image.width(), 1);
  EXPECT_EQ(line.image.height(), 3);
}

TEST(GaussianKernel, RadiusAndNormalization) {
  for (double sigma : {0.5, 1.5, 2.0, 12.5}) {
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(std::ceil(3 * sigma));
    ASSERT_EQ(static_cast<int>(k.size()), 2 * r + 1);
    double sum = 0.0;
    for (double v : k) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-15);
    EXPECT_NEAR(k[r + 1] / k[r], std::exp(-1.0 / (2 * sigma * sigma)), 1e-14);
    EXPECT_EQ(k[r - 1], k[r + 1]);
  }
  EXPECT_THROW(gaussian_kernel(0.0), ParameterError);
}

TEST(ConvolveReplicate, ReplicatesEdges) {
  const std::vector<double> signal = {1, 2, 3};
  const std::vector<double> kernel = {0.25, 0.5, 0.25};
  const auto out = convolve_replicate(signal, kernel);
  EXPECT_DOUBLE_EQ(out[0], 0.25 * 1 + 0.5 * 1 + 0.25 * 2);
  EXPECT_DOUBLE_EQ(out[1], 2.0);
  EXPECT_DOUBLE_EQ(out[2], 0.25 * 2 + 0.5 * 3 + 0.25 * 3);
}

TEST(GaussianBlur, PreservesConstantsAndMatchesDirectSum) {
  const GrayImage flat(9, 7, 0.4);
  const GrayImage blurred_flat = gaussian_blur(flat, 1.3);
  for (double v : blurred_flat.pixels()) EXPECT_NEAR(v, 0.4, 1e-15);

  std::mt19937 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GrayImage img(11, 8);
  for (double& v : img.pixels()) v = u(gen);
  const double sigma = 1.0;
  const GrayImage b = gaussian_blur(img, sigma);
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double sum = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int sx = std::clamp(x + dx, 0, img.width() - 1);
          const int sy = std::clamp(y + dy, 0, img.height() - 1);
          sum += k[dx + r] * k[dy + r] * img(sx, sy);
        }
      }
      EXPECT_NEAR(b(x, y), sum, 1e-14);
    }
  }
}

TEST(ImageIo, Png16RoundTripWithinHalfStep) {
  const GrayImage img = ramp(37, 21);
  const fs::path path = temp_path("ramp16.png");
  save_image(img, path);
  const GrayImage back = load_image(path);
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i) {
    EXPECT_LE(std::abs(back.pixels()[i] - img.pixels()[i]), 0.5 / 65535 + 1e-15);
  }
}

TEST(ImageIo, Png8AndPgmRoundTrip) {
  const GrayImage img = ramp(16, 9);
  for (const char* name : {"ramp8.png", "ramp8.pgm"}) {
    const fs::path path = temp_path(name);
    save_image(img, path, BitDepth::k8);
    const GrayImage back = load_image(path);
    for (std::size_t i = 0; i < img.size(); ++i) {
      EXPECT_LE(std::abs(back.pixels()[i] - img.pixels()[i]), 0.5 / 255 + 1e-15) << name;
    }
  }
  const fs::path pgm16 = temp_path("ramp16.pgm");
  save_image(img, pgm16, BitDepth::k16);
  const fs::path png16 = temp_path("ramp16_small.png");
  save_image(img, png16, BitDepth::k16);
  EXPECT_EQ(load_image(pgm16), load_image(png16));
}

TEST(ImageIo, SavingClampsToUnitRange) {
  const GrayImage img(2, 1, std::vector<double>{-0.5, 1.5});
  const fs::path path = temp_path("clamped.png");
  save_image(img, path);
  const GrayImage back = load_image(path);
  EXPECT_EQ(back(0, 0), 0.0);
  EXPECT_EQ(back(1, 0), 1.0);
}

TEST(ImageIo, SavingIsByteStable) {
  const GrayImage img = ramp(20, 20);
  save_image(img, temp_path("stable_a.png"));
  save_image(img, temp_path("stable_b.png"));
  EXPECT_EQ(read_bytes(temp_path("stable_a.png")), read_bytes(temp_path("stable_b.png")));
}

TEST(ImageIo, ErrorKinds) {
  EXPECT_EQ(load_error_kind(temp_path("does_not_exist.png")), IoErrorKind::kNotFound);

  const fs::path rgb = temp_path("rgb.png");
  write_rgb_png(rgb);
  EXPECT_EQ(load_error_kind(rgb), IoErrorKind::kMultiChannel);

  const fs::path p6 = temp_path("color.ppm");
  write_bytes(p6, std::string("P6\n1 1\n255\n") + std::string(3, '\x10'));
  EXPECT_EQ(load_error_kind(p6), IoErrorKind::kMultiChannel);

  const fs::path text = temp_path("notes.png");
  write_bytes(text, "just some text");
  EXPECT_EQ(load_error_kind(text), IoErrorKind::kUnsupportedFormat);

  save_image(ramp(64, 64), temp_path("whole.png"));
  const std::string bytes = read_bytes(temp_path("whole.png"));
  const fs::path cut = temp_path("cut.png");
  write_bytes(cut, bytes.substr(0, bytes.size() / 2));
  EXPECT_EQ(load_error_kind(cut), IoErrorKind::kTruncated);

  const fs::path short_pgm = temp_path("short.pgm");
  write_bytes(short_pgm, std::string("P5\n4 4\n255\n") + std::string(5, '\x20'));
  EXPECT_EQ(load_error_kind(short_pgm), IoErrorKind::kTruncated);
}

TEST(ImageIo, UnwritablePathIsWriteError) {
  try {
    save_image(ramp(2, 2), "/nonexistent_dir_for_nucd/x.png");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.kind(), IoErrorKind::kWrite);
    EXPECT_EQ(e.exit_code(), 3);
  }
}
