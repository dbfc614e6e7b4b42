#pragma once

#include <filesystem>

#include "nucd/image.hpp"

namespace nucd {

enum class BitDepth { k8 = 8, k16 = 16 };

/// Loads an 8- or 16-bit single-channel PNG or binary PGM (P5). Intensities are
/// normalized by 255 or 65535. The format is sniffed from the file content.
/// Throws IoError with a kind describing the failure.
GrayImage load_image(const std::filesystem::path& path);

/// Writes `img` after clamping to [0,1] and rounding to the given depth. The
/// container is chosen from the extension (.png or .pgm).
void save_image(const GrayImage& img, const std::filesystem::path& path,
                BitDepth depth = BitDepth::k16);

}  // namespace nucd
