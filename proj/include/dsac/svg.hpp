#pragma once

// Per-instance SVG overlays: patch embedded as a base64 PNG raster, ground
// truth in solid green, initialization in dash-dot blue, prediction in
// dashed yellow.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dsac/dataset.hpp"
#include "dsac/geometry.hpp"
#include "dsac/image_io.hpp"

namespace dsac {

namespace detail {

inline std::string base64_encode(const std::vector<char>& bytes) {
    static const char tab[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 2 < bytes.size()) {
        const uint32_t v = (static_cast<uint8_t>(bytes[i]) << 16) |
                           (static_cast<uint8_t>(bytes[i + 1]) << 8) |
                           static_cast<uint8_t>(bytes[i + 2]);
        out += tab[(v >> 18) & 63];
        out += tab[(v >> 12) & 63];
        out += tab[(v >> 6) & 63];
        out += tab[v & 63];
        i += 3;
    }
    if (i + 1 == bytes.size()) {
        const uint32_t v = static_cast<uint8_t>(bytes[i]) << 16;
        out += tab[(v >> 18) & 63];
        out += tab[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == bytes.size()) {
        const uint32_t v = (static_cast<uint8_t>(bytes[i]) << 16) |
                           (static_cast<uint8_t>(bytes[i + 1]) << 8);
        out += tab[(v >> 18) & 63];
        out += tab[(v >> 12) & 63];
        out += tab[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

inline std::string polygon_points(const Contour& c) {
    char buf[64];
    std::string out;
    for (const Vec2& p : c.nodes) {
        std::snprintf(buf, sizeof(buf), "%.3f,%.3f ", p.u, p.v);
        out += buf;
    }
    if (!out.empty()) out.pop_back();
    return out;
}

}  // namespace detail

inline constexpr const char* kGtColor = "#00FF00";
inline constexpr const char* kInitColor = "#0000FF";
inline constexpr const char* kPredColor = "#FFFF00";

inline std::string render_overlay_svg(const Instance& inst, const Contour* pred) {
    const int U = inst.patch.width, V = inst.patch.height;
    const std::vector<char> png_bytes = encode_png(patch_to_image(inst.patch));

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" "
           "xmlns:xlink=\"http://www.w3.org/1999/xlink\" version=\"1.1\" width=\"" +
           std::to_string(U) + "\" height=\"" + std::to_string(V) + "\" viewBox=\"-0.5 -0.5 " +
           std::to_string(U) + " " + std::to_string(V) + "\">\n";
    svg += "  <image x=\"-0.5\" y=\"-0.5\" width=\"" + std::to_string(U) + "\" height=\"" +
           std::to_string(V) + "\" xlink:href=\"data:image/png;base64," +
           detail::base64_encode(png_bytes) + "\"/>\n";
    svg += "  <polygon points=\"" + detail::polygon_points(inst.gt) +
           "\" fill=\"none\" stroke=\"" + kGtColor + "\" stroke-width=\"1\"/>\n";
    svg += "  <polygon points=\"" + detail::polygon_points(inst.init) +
           "\" fill=\"none\" stroke=\"" + kInitColor +
           "\" stroke-width=\"1\" stroke-dasharray=\"6,2,1,2\"/>\n";
    if (pred && pred->size() >= 4)
        svg += "  <polygon points=\"" + detail::polygon_points(*pred) +
               "\" fill=\"none\" stroke=\"" + std::string(kPredColor) +
               "\" stroke-width=\"1\" stroke-dasharray=\"4,3\"/>\n";
    svg += "</svg>\n";
    return svg;
}

inline void render_overlay(const Instance& inst, const Contour* pred, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("render_overlay: cannot write " + path);
    f << render_overlay_svg(inst, pred);
}

}  // namespace dsac
