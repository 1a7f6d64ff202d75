#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "volume.hpp"

namespace uafuse {

inline void write_pgm(const std::string& path, const std::vector<std::uint8_t>& pixels, int width, int height) {
    if (static_cast<std::size_t>(width) * height != pixels.size())
        throw std::invalid_argument("pgm: pixel count does not match " + std::to_string(width) + "x" + std::to_string(height));
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("pgm: cannot write '" + path + "'");
    f << "P5\n" << width << " " << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

inline std::string slice_name(int z) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "slice_%04d.pgm", z);
    return buf;
}

/// One 8-bit PGM per axial slice with the fixed class-to-gray map
/// gray = 255 * class / (num_classes - 1).
inline void export_axial_slices(const GridI& labels, int num_classes, const std::string& dir) {
    if (num_classes < 2) throw std::invalid_argument("slices: need at least 2 classes for the gray map");
    std::filesystem::create_directories(dir);
    const auto& d = labels.dims;
    std::vector<std::uint8_t> pix(static_cast<std::size_t>(d[1]) * d[2]);
    for (int z = 0; z < d[0]; ++z) {
        for (int y = 0; y < d[1]; ++y)
            for (int x = 0; x < d[2]; ++x) {
                const std::int32_t v = std::clamp(labels.at(z, y, x), 0, num_classes - 1);
                pix[static_cast<std::size_t>(y) * d[2] + x] =
                    static_cast<std::uint8_t>((255 * v) / (num_classes - 1));
            }
        write_pgm(dir + "/" + slice_name(z), pix, d[2], d[1]);
    }
}

/// Scalar volumes (intensities, uncertainty fields) are min-max scaled.
inline void export_axial_slices(const GridF& values, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const auto& d = values.dims;
    float lo = values.data.empty() ? 0.0f : values.data[0];
    float hi = lo;
    for (float v : values.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const float span = hi - lo;
    std::vector<std::uint8_t> pix(static_cast<std::size_t>(d[1]) * d[2]);
    for (int z = 0; z < d[0]; ++z) {
        for (int y = 0; y < d[1]; ++y)
            for (int x = 0; x < d[2]; ++x) {
                const float v = values.at(z, y, x);
                const float t = span > 0.0f ? (v - lo) / span : 0.5f;
                pix[static_cast<std::size_t>(y) * d[2] + x] = static_cast<std::uint8_t>(std::clamp(t, 0.0f, 1.0f) * 255.0f + 0.5f);
            }
        write_pgm(dir + "/" + slice_name(z), pix, d[2], d[1]);
    }
}

} // namespace uafuse
