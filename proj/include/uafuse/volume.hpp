#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace uafuse {

inline std::int64_t grid_numel(const std::array<int, 3>& dims) {
    return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
}

/// One 3D scalar grid, row-major with the last axis fastest.
struct GridF {
    std::array<int, 3> dims{0, 0, 0};
    std::vector<float> data;

    GridF() = default;
    explicit GridF(std::array<int, 3> d, float fill = 0.0f) : dims(d), data(static_cast<std::size_t>(grid_numel(d)), fill) {}
    bool empty() const { return data.empty(); }
    float& at(int z, int y, int x) { return data[(static_cast<std::size_t>(z) * dims[1] + y) * dims[2] + x]; }
    float at(int z, int y, int x) const { return data[(static_cast<std::size_t>(z) * dims[1] + y) * dims[2] + x]; }
};

/// One 3D integer grid (labels, masks).
struct GridI {
    std::array<int, 3> dims{0, 0, 0};
    std::vector<std::int32_t> data;

    GridI() = default;
    explicit GridI(std::array<int, 3> d, std::int32_t fill = 0) : dims(d), data(static_cast<std::size_t>(grid_numel(d)), fill) {}
    bool empty() const { return data.empty(); }
    std::int32_t& at(int z, int y, int x) { return data[(static_cast<std::size_t>(z) * dims[1] + y) * dims[2] + x]; }
    std::int32_t at(int z, int y, int x) const { return data[(static_cast<std::size_t>(z) * dims[1] + y) * dims[2] + x]; }
};

/// A multi-modality image stack: per-modality scalar grids over identical
/// dims, an optional integer label grid, and voxel spacing in mm.
struct Volume {
    std::vector<GridF> modalities;
    std::vector<std::string> modality_names;
    GridI label; // empty when absent (inference input)
    std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};

    bool has_label() const { return !label.empty(); }
    std::array<int, 3> dims() const { return modalities.empty() ? std::array<int, 3>{0, 0, 0} : modalities[0].dims; }

    void validate(int num_classes = -1) const {
        if (modalities.empty()) throw std::invalid_argument("volume: no modalities");
        for (const auto& m : modalities)
            if (m.dims != modalities[0].dims) throw std::invalid_argument("volume: modality dims disagree");
        if (has_label()) {
            if (label.dims != modalities[0].dims) throw std::invalid_argument("volume: label dims disagree");
            if (num_classes > 0)
                for (std::int32_t v : label.data)
                    if (v < 0 || v >= num_classes)
                        throw std::invalid_argument("volume: label " + std::to_string(v) + " outside [0," +
                                                    std::to_string(num_classes) + ")");
        }
        for (float s : spacing)
            if (!(s > 0.0f)) throw std::invalid_argument("volume: spacing must be positive");
    }
};

/// Per-modality z-score over the nonzero support; zero voxels stay zero and
/// a constant grid maps to all zeros.
inline GridF normalize(const GridF& g) {
    GridF out = g;
    double sum = 0, sumsq = 0;
    std::int64_t n = 0;
    for (float v : g.data) {
        if (v == 0.0f) continue;
        sum += v;
        sumsq += static_cast<double>(v) * v;
        ++n;
    }
    if (n == 0) return out;
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sumsq / static_cast<double>(n) - mean * mean);
    const double sd = std::sqrt(var);
    for (auto& v : out.data) {
        if (v == 0.0f) continue;
        v = sd < 1e-12 ? 0.0f : static_cast<float>((v - mean) / sd);
    }
    return out;
}

inline Volume normalize(const Volume& vol) {
    Volume out = vol;
    for (auto& m : out.modalities) m = normalize(m);
    return out;
}

} // namespace uafuse
