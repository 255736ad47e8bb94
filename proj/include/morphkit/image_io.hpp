#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "morphkit/image.hpp"

namespace morphkit {

// 16-bit PNG, grayscale or RGB depending on img.channels. Deterministic
// bytes for identical pixel content.
void write_png(const std::filesystem::path& path, const Image& img);

// Reads 8/16-bit gray/rgb/palette PNGs; alpha is dropped. Samples map to
// [0, 1] as value / (2^depth - 1).
Image read_png(const std::filesystem::path& path);

// Row-major grid of frames with a small per-cell label strip rendering the
// alpha value. Throws validation_error on an empty frame list.
Image contact_sheet(const std::vector<Image>& frames, const std::vector<double>& alphas, int columns);

}  // namespace morphkit
