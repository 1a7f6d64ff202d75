#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"
#include "volume.hpp"

namespace uafuse {

/// Optional degradation of one modality inside a spherical region, either
/// by swapping the class contrast assignment or by replacing the signal
/// with noise. Stands in for a locally unreliable imaging sequence.
struct CorruptionSpec {
    int modality = 1;
    std::string mode = "swap-contrast"; // or "noise"
    std::array<float, 3> center{0.5f, 0.5f, 0.5f}; // fractional coordinates
    float radius = 0.25f;                          // fraction of the smallest extent
};

/// Recipe for one synthetic labeled multi-modality volume.
struct PhantomSpec {
    std::array<int, 3> dims{64, 64, 64};
    int num_classes = 5; // background + 4 structures
    std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};
    std::vector<std::string> modality_names{"modal1", "modal2"};
    std::vector<std::vector<std::array<float, 2>>> contrast; // [modality][class] = {mean, std}
    int blobs_per_class = 2;
    bool has_corruption = false;
    CorruptionSpec corruption;

    /// Two modalities with inverted contrast ramps, like in-/opposed-phase
    /// sequences of the same anatomy.
    static PhantomSpec defaults() {
        PhantomSpec s;
        s.contrast.resize(2);
        for (int k = 0; k < s.num_classes; ++k) {
            s.contrast[0].push_back({0.15f + 0.17f * static_cast<float>(k), 0.03f});
            s.contrast[1].push_back({0.15f + 0.17f * static_cast<float>(s.num_classes - 1 - k), 0.03f});
        }
        return s;
    }

    void validate() const {
        if (num_classes < 2) throw std::invalid_argument("phantom: need at least one foreground class");
        for (int d : dims)
            if (d < 8) throw std::invalid_argument("phantom: extents below 8 voxels are not useful");
        if (modality_names.empty()) throw std::invalid_argument("phantom: no modalities");
        if (contrast.size() != modality_names.size())
            throw std::invalid_argument("phantom: contrast table covers " + std::to_string(contrast.size()) +
                                        " modalities, expected " + std::to_string(modality_names.size()));
        for (const auto& table : contrast)
            if (static_cast<int>(table.size()) != num_classes)
                throw std::invalid_argument("phantom: contrast table missing a class (" +
                                            std::to_string(table.size()) + " entries for " +
                                            std::to_string(num_classes) + " classes)");
        if (blobs_per_class < 1) throw std::invalid_argument("phantom: blobs_per_class must be positive");
        if (has_corruption) {
            if (corruption.modality < 0 || corruption.modality >= static_cast<int>(modality_names.size()))
                throw std::invalid_argument("phantom: corruption modality out of range");
            if (corruption.mode != "swap-contrast" && corruption.mode != "noise")
                throw std::invalid_argument("phantom: unknown corruption mode '" + corruption.mode + "'");
            if (!(corruption.radius > 0.0f)) throw std::invalid_argument("phantom: corruption radius must be positive");
        }
    }
};

struct Phantom {
    Volume volume;
    GridI region; // corrupted-region mask; all zero when no corruption
};

namespace phantom_detail {

// smooth wobbly ellipsoid
inline void paint_blob(GridI& label, std::int32_t cls, const std::array<double, 3>& c,
                       const std::array<double, 3>& r, const std::array<double, 3>& phase, double wobble) {
    const auto& dims = label.dims;
    const int zlo = std::max(0, static_cast<int>(std::floor(c[0] - r[0] * (1 + wobble))));
    const int zhi = std::min(dims[0], static_cast<int>(std::ceil(c[0] + r[0] * (1 + wobble))) + 1);
    const int ylo = std::max(0, static_cast<int>(std::floor(c[1] - r[1] * (1 + wobble))));
    const int yhi = std::min(dims[1], static_cast<int>(std::ceil(c[1] + r[1] * (1 + wobble))) + 1);
    const int xlo = std::max(0, static_cast<int>(std::floor(c[2] - r[2] * (1 + wobble))));
    const int xhi = std::min(dims[2], static_cast<int>(std::ceil(c[2] + r[2] * (1 + wobble))) + 1);
    for (int z = zlo; z < zhi; ++z)
        for (int y = ylo; y < yhi; ++y)
            for (int x = xlo; x < xhi; ++x) {
                const double dz = (z - c[0]) / r[0];
                const double dy = (y - c[1]) / r[1];
                const double dx = (x - c[2]) / r[2];
                const double d = dz * dz + dy * dy + dx * dx;
                const double thr =
                    1.0 + wobble * std::sin(0.35 * z + phase[0]) * std::sin(0.35 * y + phase[1]) * std::sin(0.35 * x + phase[2]);
                if (d <= thr) label.at(z, y, x) = cls;
            }
}

inline GridI make_region_mask(const std::array<int, 3>& dims, const CorruptionSpec& c) {
    GridI mask(dims, 0);
    const double cz = c.center[0] * dims[0];
    const double cy = c.center[1] * dims[1];
    const double cx = c.center[2] * dims[2];
    const double rad = static_cast<double>(c.radius) * std::min({dims[0], dims[1], dims[2]});
    for (int z = 0; z < dims[0]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[2]; ++x) {
                const double d2 = (z - cz) * (z - cz) + (y - cy) * (y - cy) + (x - cx) * (x - cx);
                if (d2 <= rad * rad) mask.at(z, y, x) = 1;
            }
    return mask;
}

} // namespace phantom_detail

/// Deterministic synthetic volume: nested/adjacent smooth blobs for the
/// label grid (every class present), per-class Gaussian intensities from
/// the contrast table, and the configured corruption if any.
inline Phantom generate_phantom(const PhantomSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(mix_seed(seed ^ 0x7068616e746f6dULL));
    const auto& dims = spec.dims;
    const double min_dim = static_cast<double>(std::min({dims[0], dims[1], dims[2]}));

    GridI label(dims, 0);
    for (std::int32_t cls = 1; cls < spec.num_classes; ++cls) {
        for (int b = 0; b < spec.blobs_per_class; ++b) {
            std::array<double, 3> c, r, phase;
            for (int a = 0; a < 3; ++a) {
                c[static_cast<std::size_t>(a)] = rng.uniform(0.2, 0.8) * dims[a];
                r[static_cast<std::size_t>(a)] = rng.uniform(0.16, 0.28) * dims[a];
                phase[static_cast<std::size_t>(a)] = rng.uniform(0.0, 6.283185307179586);
            }
            phantom_detail::paint_blob(label, cls, c, r, phase, 0.15);
        }
    }

    // later blobs may bury an earlier class entirely; repaint until every
    // class is present
    for (int pass = 0; pass < 10; ++pass) {
        std::vector<bool> present(static_cast<std::size_t>(spec.num_classes), false);
        for (std::int32_t v : label.data) present[static_cast<std::size_t>(v)] = true;
        bool all = true;
        for (std::int32_t cls = 1; cls < spec.num_classes; ++cls) {
            if (present[static_cast<std::size_t>(cls)]) continue;
            all = false;
            std::array<double, 3> c;
            for (int a = 0; a < 3; ++a) c[static_cast<std::size_t>(a)] = rng.uniform(0.25, 0.75) * dims[a];
            const double rad = std::max(2.0, 0.06 * min_dim);
            phantom_detail::paint_blob(label, cls, c, {rad, rad, rad}, {0, 0, 0}, 0.0);
        }
        if (all) break;
    }
    {
        std::vector<bool> present(static_cast<std::size_t>(spec.num_classes), false);
        for (std::int32_t v : label.data) present[static_cast<std::size_t>(v)] = true;
        for (std::int32_t cls = 0; cls < spec.num_classes; ++cls)
            if (!present[static_cast<std::size_t>(cls)])
                throw std::runtime_error("phantom: failed to place class " + std::to_string(cls));
    }

    Phantom out;
    out.region = spec.has_corruption ? phantom_detail::make_region_mask(dims, spec.corruption) : GridI(dims, 0);
    out.volume.spacing = spec.spacing;
    out.volume.modality_names = spec.modality_names;
    out.volume.label = label;

    const std::int64_t n = grid_numel(dims);
    for (std::size_t m = 0; m < spec.modality_names.size(); ++m) {
        GridF g(dims);
        const bool corrupt_here = spec.has_corruption && spec.corruption.modality == static_cast<int>(m);
        for (std::int64_t v = 0; v < n; ++v) {
            const double eta = rng.next_normal();
            std::int32_t cls = label.data[static_cast<std::size_t>(v)];
            double mean, sd;
            if (corrupt_here && out.region.data[static_cast<std::size_t>(v)]) {
                if (spec.corruption.mode == "swap-contrast") {
                    cls = (cls + 1) % spec.num_classes;
                    mean = spec.contrast[m][static_cast<std::size_t>(cls)][0];
                    sd = spec.contrast[m][static_cast<std::size_t>(cls)][1];
                } else {
                    mean = 0.5;
                    sd = 0.5;
                }
            } else {
                mean = spec.contrast[m][static_cast<std::size_t>(cls)][0];
                sd = spec.contrast[m][static_cast<std::size_t>(cls)][1];
            }
            g.data[static_cast<std::size_t>(v)] = static_cast<float>(mean + sd * eta);
        }
        out.volume.modalities.push_back(std::move(g));
    }
    out.volume.validate(spec.num_classes);
    return out;
}

} // namespace uafuse
