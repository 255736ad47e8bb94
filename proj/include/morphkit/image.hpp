#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace morphkit {

// Row-major float image, values in [0, 1]. channels is 1 (gray) or 3 (rgb).
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> px;  // size = width * height * channels

    Image() = default;
    Image(int w, int h, int c) : width(w), height(h), channels(c), px(static_cast<size_t>(w) * h * c, 0.0) {}

    double& at(int y, int x, int c = 0) { return px[(static_cast<size_t>(y) * width + x) * channels + c]; }
    double at(int y, int x, int c = 0) const { return px[(static_cast<size_t>(y) * width + x) * channels + c]; }

    size_t size() const { return px.size(); }
};

// Snap every sample to the 16-bit grid used by the PNG codec, so distances
// measured in memory are identical to distances recomputed from disk.
Image quantize16(const Image& img);

// Grayscale conversion (Rec. 601 weights), identity for single-channel input.
Image to_gray(const Image& img);

// Box-filter resize to exactly (w, h) after an aspect-preserving center crop.
Image resize_center_crop(const Image& img, int w, int h);

// Perceptual distance callback contract shared by search and metrics.
using ImageMetric = std::function<double(const Image&, const Image&)>;

}  // namespace morphkit
