#include "morphkit/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include <png.h>

#include "morphkit/errors.hpp"

namespace morphkit {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// 3x5 digit glyphs for the contact-sheet labels.
constexpr uint16_t kGlyphs[12] = {
    0b111101101101111,  // 0
    0b010110010010111,  // 1
    0b111001111100111,  // 2
    0b111001111001111,  // 3
    0b101101111001001,  // 4
    0b111100111001111,  // 5
    0b111100111101111,  // 6
    0b111001001001001,  // 7
    0b111101111101111,  // 8
    0b111101111001111,  // 9
    0b000000000000010,  // .
    0b000000000000000,  // space
};

void stamp_glyph(Image& img, int y0, int x0, int glyph, double value) {
    const uint16_t bits = kGlyphs[glyph];
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 3; ++x) {
            if (bits & (1u << (14 - (y * 3 + x)))) {
                for (int c = 0; c < img.channels; ++c) {
                    if (y0 + y < img.height && x0 + x < img.width) img.at(y0 + y, x0 + x, c) = value;
                }
            }
        }
}

void stamp_label(Image& img, int y0, int x0, const std::string& text, double value) {
    int x = x0;
    for (char ch : text) {
        int glyph;
        if (ch >= '0' && ch <= '9') {
            glyph = ch - '0';
        } else if (ch == '.') {
            glyph = 10;
        } else {
            glyph = 11;
        }
        stamp_glyph(img, y0, x, glyph, value);
        x += 4;
    }
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& img) {
    if (img.width <= 0 || img.height <= 0 || (img.channels != 1 && img.channels != 3)) {
        throw validation_error("write_png: image must be non-empty with 1 or 3 channels");
    }
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) {
        throw validation_error("write_png: cannot open '" + path.string() + "' for writing");
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw numeric_error("write_png: libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw numeric_error("write_png: libpng error while writing '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, img.width, img.height, 16,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<unsigned char> row(static_cast<size_t>(img.width) * img.channels * 2);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width * img.channels; ++x) {
            const double v = std::clamp(img.px[static_cast<size_t>(y) * img.width * img.channels + x], 0.0, 1.0);
            const auto q = static_cast<uint16_t>(std::lround(v * 65535.0));
            row[2 * x] = static_cast<unsigned char>(q >> 8);
            row[2 * x + 1] = static_cast<unsigned char>(q & 0xff);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) {
        throw validation_error("read_png: cannot open '" + path.string() + "'");
    }
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw validation_error("read_png: '" + path.string() + "' is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw numeric_error("read_png: libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw validation_error("read_png: libpng error while reading '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw validation_error("read_png: unsupported channel count in '" + path.string() + "'");
    }

    Image img(width, height, channels);
    const double denom = depth == 16 ? 65535.0 : 255.0;
    std::vector<unsigned char> row(static_cast<size_t>(width) * channels * (depth == 16 ? 2 : 1));
    for (int y = 0; y < height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < width * channels; ++x) {
            const double v = depth == 16 ? static_cast<double>((row[2 * x] << 8) | row[2 * x + 1])
                                         : static_cast<double>(row[x]);
            img.px[static_cast<size_t>(y) * width * channels + x] = v / denom;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

Image contact_sheet(const std::vector<Image>& frames, const std::vector<double>& alphas, int columns) {
    if (frames.empty()) {
        throw validation_error("contact_sheet: no frames");
    }
    if (columns < 1) {
        throw validation_error("contact_sheet: columns must be >= 1");
    }
    if (alphas.size() != frames.size()) {
        throw validation_error("contact_sheet: alphas/frames length mismatch");
    }
    const int cell_w = frames[0].width;
    const int cell_h = frames[0].height;
    const int channels = frames[0].channels;
    for (const Image& f : frames) {
        if (f.width != cell_w || f.height != cell_h || f.channels != channels) {
            throw validation_error("contact_sheet: frames must share one shape");
        }
    }
    const int label_h = 7;
    const int rows = (static_cast<int>(frames.size()) + columns - 1) / columns;
    Image sheet(columns * (cell_w + 1) - 1, rows * (cell_h + label_h + 1) - 1, channels);

    for (size_t i = 0; i < frames.size(); ++i) {
        const int r = static_cast<int>(i) / columns;
        const int c = static_cast<int>(i) % columns;
        const int ox = c * (cell_w + 1);
        const int oy = r * (cell_h + label_h + 1);
        char label[16];
        std::snprintf(label, sizeof label, "%.3f", alphas[i]);
        stamp_label(sheet, oy + 1, ox + 1, label, 1.0);
        for (int y = 0; y < cell_h; ++y)
            for (int x = 0; x < cell_w; ++x)
                for (int ch = 0; ch < channels; ++ch) {
                    sheet.at(oy + label_h + y, ox + x, ch) = frames[i].at(y, x, ch);
                }
    }
    return sheet;
}

}  // namespace morphkit
