#include "nucd/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "nucd/errors.hpp"

namespace nucd {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrorKind::kNotFound, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::kWrite, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(IoErrorKind::kWrite, "short write to " + path.string());
}

std::uint16_t quantize(double v, double maxval) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(c * maxval));
}

// ---- PNG ------------------------------------------------------------------

struct MemoryReader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t offset;
  bool* eof;  // lives outside the setjmp frame
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t count) {
  auto* reader = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (reader->offset + count > reader->size) {
    *reader->eof = true;
    png_error(png, "unexpected end of file");
  }
  std::memcpy(out, reader->data + reader->offset, count);
  reader->offset += count;
}

void png_silent_warning(png_structp, png_const_charp) {}

[[noreturn]] void png_silent_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }

struct PngHeader {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
};

// libpng reports errors through longjmp, so the decode path keeps only
// trivially destructible state between setjmp and the png_* calls.
bool decode_png(const std::uint8_t* bytes, std::size_t size, PngHeader* header,
                std::vector<png_byte>* raw, bool* truncated) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_silent_error, png_silent_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  *truncated = false;
  MemoryReader reader{bytes, size, 0, truncated};
  png_bytep* volatile rows = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    delete[] rows;
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &reader, png_read_from_memory);
  png_read_info(png, info);
  header->width = png_get_image_width(png, info);
  header->height = png_get_image_height(png, info);
  header->bit_depth = png_get_bit_depth(png, info);
  header->color_type = png_get_color_type(png, info);
  if (header->color_type != PNG_COLOR_TYPE_GRAY ||
      (header->bit_depth != 8 && header->bit_depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    return true;  // caller classifies the header
  }
  const std::size_t stride = static_cast<std::size_t>(header->width) * (header->bit_depth / 8);
  raw->resize(stride * header->height);
  rows = new png_bytep[header->height];
  for (png_uint_32 y = 0; y < header->height; ++y) rows[y] = raw->data() + y * stride;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  delete[] rows;
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

GrayImage load_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  PngHeader header;
  std::vector<png_byte> raw;
  bool truncated = false;
  if (!decode_png(bytes.data(), bytes.size(), &header, &raw, &truncated)) {
    if (truncated) throw IoError(IoErrorKind::kTruncated, "truncated PNG: " + name);
    throw IoError(IoErrorKind::kMalformed, "corrupt PNG: " + name);
  }
  if (header.color_type != PNG_COLOR_TYPE_GRAY) {
    throw IoError(IoErrorKind::kMultiChannel, "PNG is not single-channel grayscale: " + name);
  }
  if (header.bit_depth != 8 && header.bit_depth != 16) {
    throw IoError(IoErrorKind::kUnsupportedFormat,
                  "unsupported PNG bit depth " + std::to_string(header.bit_depth) + ": " + name);
  }
  const int w = static_cast<int>(header.width);
  const int h = static_cast<int>(header.height);
  std::vector<double> data(static_cast<std::size_t>(w) * h);
  if (header.bit_depth == 8) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = raw[i] / 255.0;
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) {
      data[i] = ((raw[2 * i] << 8) | raw[2 * i + 1]) / 65535.0;
    }
  }
  return GrayImage(w, h, std::move(data));
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

bool encode_png(const std::vector<png_byte>& raw, int w, int h, int depth,
                std::vector<std::uint8_t>* out) {
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_silent_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  png_bytep* volatile rows = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    delete[] rows;
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, w, h, depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(w) * (depth / 8);
  rows = new png_bytep[h];
  for (int y = 0; y < h; ++y) rows[y] = const_cast<png_bytep>(raw.data() + y * stride);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  delete[] rows;
  png_destroy_write_struct(&png, &info);
  return true;
}

std::vector<png_byte> pack_samples(const GrayImage& img, BitDepth depth) {
  const auto px = img.pixels();
  std::vector<png_byte> raw;
  if (depth == BitDepth::k8) {
    raw.resize(px.size());
    for (std::size_t i = 0; i < px.size(); ++i) raw[i] = static_cast<png_byte>(quantize(px[i], 255.0));
  } else {
    raw.resize(2 * px.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
      const std::uint16_t q = quantize(px[i], 65535.0);
      raw[2 * i] = static_cast<png_byte>(q >> 8);
      raw[2 * i + 1] = static_cast<png_byte>(q & 0xff);
    }
  }
  return raw;
}

// ---- PGM ------------------------------------------------------------------

class PgmHeaderParser {
 public:
  PgmHeaderParser(const std::vector<std::uint8_t>& bytes, const std::string& name)
      : bytes_(bytes), name_(name) {}

  long next_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) throw IoError(IoErrorKind::kTruncated, "truncated PGM header: " + name_);
    if (!std::isdigit(bytes_[pos_])) throw IoError(IoErrorKind::kMalformed, "malformed PGM header: " + name_);
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1L << 30)) throw IoError(IoErrorKind::kMalformed, "PGM header value overflow: " + name_);
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size()) throw IoError(IoErrorKind::kTruncated, "truncated PGM header: " + name_);
    return pos_ + 1;
  }

  void seek(std::size_t pos) { pos_ = pos; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  const std::string& name_;
  std::size_t pos_ = 0;
};

GrayImage load_pgm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  PgmHeaderParser parser(bytes, name);
  parser.seek(2);
  const long w = parser.next_int();
  const long h = parser.next_int();
  const long maxval = parser.next_int();
  if (w < 1 || h < 1) throw IoError(IoErrorKind::kMalformed, "PGM with empty raster: " + name);
  if (maxval != 255 && maxval != 65535) {
    throw IoError(IoErrorKind::kUnsupportedFormat,
                  "unsupported PGM maxval " + std::to_string(maxval) + ": " + name);
  }
  const std::size_t offset = parser.raster_offset();
  const std::size_t bpp = maxval == 255 ? 1 : 2;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() < offset + n * bpp) {
    throw IoError(IoErrorKind::kTruncated, "truncated PGM raster: " + name);
  }
  std::vector<double> data(n);
  const std::uint8_t* p = bytes.data() + offset;
  if (bpp == 1) {
    for (std::size_t i = 0; i < n; ++i) data[i] = p[i] / 255.0;
  } else {
    for (std::size_t i = 0; i < n; ++i) data[i] = ((p[2 * i] << 8) | p[2 * i + 1]) / 65535.0;
  }
  return GrayImage(static_cast<int>(w), static_cast<int>(h), std::move(data));
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img, BitDepth depth) {
  const std::string header = "P5\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n" +
                             (depth == BitDepth::k8 ? "255" : "65535") + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto raw = pack_samples(img, depth);
  out.insert(out.end(), raw.begin(), raw.end());
  return out;
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

GrayImage load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::string name = path.string();
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) {
    return load_png(bytes, name);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P') {
    switch (bytes[1]) {
      case '5': return load_pgm(bytes, name);
      case '3':
      case '6': throw IoError(IoErrorKind::kMultiChannel, "PPM color image: " + name);
      default: break;
    }
  }
  if (bytes.empty()) throw IoError(IoErrorKind::kTruncated, "empty file: " + name);
  throw IoError(IoErrorKind::kUnsupportedFormat, "not a PNG or binary PGM: " + name);
}

void save_image(const GrayImage& img, const std::filesystem::path& path, BitDepth depth) {
  const std::string ext = lower_extension(path);
  std::vector<std::uint8_t> bytes;
  if (ext == ".png") {
    if (!encode_png(pack_samples(img, depth), img.width(), img.height(),
                    static_cast<int>(depth), &bytes)) {
      throw IoError(IoErrorKind::kWrite, "PNG encoding failed: " + path.string());
    }
  } else if (ext == ".pgm") {
    bytes = encode_pgm(img, depth);
  } else {
    throw IoError(IoErrorKind::kUnsupportedFormat,
                  "unsupported output extension '" + ext + "' (use .png or .pgm)");
  }
  write_file(path, bytes);
}

}  // namespace nucd
