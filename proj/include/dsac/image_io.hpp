#pragma once

// 8-bit PNG read/write through libpng. Reads are normalized to 8-bit
// gray/RGB/RGBA (palette and 16-bit inputs are expanded); writes are
// deterministic for identical pixel data.

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsac {

struct ImageU8 {
    int width = 0, height = 0, channels = 0;
    std::vector<uint8_t> data;  // interleaved rows

    ImageU8() = default;
    ImageU8(int w, int h, int c)
        : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, 0) {}

    uint8_t at(int u, int v, int c) const {
        return data[(static_cast<size_t>(v) * width + u) * channels + c];
    }
    uint8_t& at(int u, int v, int c) {
        return data[(static_cast<size_t>(v) * width + u) * channels + c];
    }
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

inline std::vector<char> encode_png(const ImageU8& img) {
    if (img.channels != 1 && img.channels != 3 && img.channels != 4)
        throw std::invalid_argument("encode_png: unsupported channel count");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("encode_png: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("encode_png: png_create_info_struct failed");
    }
    std::vector<char> out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("encode_png: libpng error");
    }
    png_set_write_fn(
        png, &out,
        [](png_structp p, png_bytep data, png_size_t n) {
            auto* sink = static_cast<std::vector<char>*>(png_get_io_ptr(p));
            sink->insert(sink->end(), reinterpret_cast<char*>(data),
                         reinterpret_cast<char*>(data) + n);
        },
        [](png_structp) {});
    const int color = img.channels == 1   ? PNG_COLOR_TYPE_GRAY
                      : img.channels == 3 ? PNG_COLOR_TYPE_RGB
                                          : PNG_COLOR_TYPE_RGBA;
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(img.height));
    for (int v = 0; v < img.height; ++v)
        rows[static_cast<size_t>(v)] = const_cast<png_bytep>(
            img.data.data() + static_cast<size_t>(v) * img.width * img.channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

inline void write_png(const std::string& path, const ImageU8& img) {
    const std::vector<char> bytes = encode_png(img);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_png: cannot open " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write_png: write failed for " + path);
}

inline ImageU8 read_png(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("read_png: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("read_png: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("read_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: libpng error reading " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_packing(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);

    ImageU8 img(static_cast<int>(png_get_image_width(png, info)),
                static_cast<int>(png_get_image_height(png, info)),
                static_cast<int>(png_get_channels(png, info)));
    std::vector<png_bytep> rows(static_cast<size_t>(img.height));
    for (int v = 0; v < img.height; ++v)
        rows[static_cast<size_t>(v)] =
            img.data.data() + static_cast<size_t>(v) * img.width * img.channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace dsac
