#include "morphkit/image.hpp"

#include <algorithm>
#include <cmath>

#include "morphkit/errors.hpp"

namespace morphkit {

Image quantize16(const Image& img) {
    Image out = img;
    for (double& v : out.px) {
        v = std::round(std::clamp(v, 0.0, 1.0) * 65535.0) / 65535.0;
    }
    return out;
}

Image to_gray(const Image& img) {
    if (img.channels == 1) return img;
    if (img.channels != 3) {
        throw validation_error("to_gray: expected 1 or 3 channels");
    }
    Image out(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            out.at(y, x) = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
        }
    return out;
}

Image resize_center_crop(const Image& img, int w, int h) {
    if (img.width <= 0 || img.height <= 0 || w <= 0 || h <= 0) {
        throw validation_error("resize_center_crop: empty image or target");
    }
    // Aspect-preserving crop around the center, then box-filter resample.
    const double target_aspect = static_cast<double>(w) / h;
    const double src_aspect = static_cast<double>(img.width) / img.height;
    int crop_w = img.width;
    int crop_h = img.height;
    if (src_aspect > target_aspect) {
        crop_w = std::max(1, static_cast<int>(std::round(img.height * target_aspect)));
    } else {
        crop_h = std::max(1, static_cast<int>(std::round(img.width / target_aspect)));
    }
    const int x0 = (img.width - crop_w) / 2;
    const int y0 = (img.height - crop_h) / 2;

    Image out(w, h, img.channels);
    for (int c = 0; c < img.channels; ++c)
        for (int oy = 0; oy < h; ++oy)
            for (int ox = 0; ox < w; ++ox) {
                const double sy0 = y0 + static_cast<double>(oy) * crop_h / h;
                const double sy1 = y0 + static_cast<double>(oy + 1) * crop_h / h;
                const double sx0 = x0 + static_cast<double>(ox) * crop_w / w;
                const double sx1 = x0 + static_cast<double>(ox + 1) * crop_w / w;
                double acc = 0.0;
                double area = 0.0;
                for (int sy = static_cast<int>(std::floor(sy0)); sy < static_cast<int>(std::ceil(sy1)); ++sy)
                    for (int sx = static_cast<int>(std::floor(sx0)); sx < static_cast<int>(std::ceil(sx1)); ++sx) {
                        const double wy = std::min<double>(sy + 1, sy1) - std::max<double>(sy, sy0);
                        const double wx = std::min<double>(sx + 1, sx1) - std::max<double>(sx, sx0);
                        const int cy = std::clamp(sy, 0, img.height - 1);
                        const int cx = std::clamp(sx, 0, img.width - 1);
                        acc += wy * wx * img.at(cy, cx, c);
                        area += wy * wx;
                    }
                out.at(oy, ox, c) = acc / area;
            }
    return out;
}

}  // namespace morphkit
