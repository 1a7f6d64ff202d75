#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"
#include "volume.hpp"

namespace uafuse {

/// Deterministic patch start coordinates for one volume, with per-patch
/// target annotations filled in by `annotate_patches`.
struct PatchGrid {
    std::array<int, 3> patch_size{32, 32, 32};
    std::array<int, 3> stride{14, 14, 14};
    std::vector<std::array<int, 3>> starts;
    std::vector<std::uint8_t> keep;       // patch window contains >= 1 foreground voxel
    std::vector<std::int32_t> dominant;   // most frequent foreground class, -1 if none
};

/// Starts per axis: 0, s, 2s, ... with the final start clamped to
/// dim - patch, so the union of windows covers every voxel.
inline std::vector<int> axis_starts(int dim, int patch, int stride) {
    if (patch <= 0 || stride <= 0) throw std::invalid_argument("patch grid: patch and stride must be positive");
    if (patch > dim)
        throw std::invalid_argument("patch grid: patch " + std::to_string(patch) + " larger than volume extent " +
                                    std::to_string(dim));
    if (stride > patch)
        throw std::invalid_argument("patch grid: stride " + std::to_string(stride) + " exceeds patch " +
                                    std::to_string(patch) + "; the grid would leave gaps");
    std::vector<int> starts;
    for (int s = 0; s + patch <= dim; s += stride) starts.push_back(s);
    if (starts.back() != dim - patch) starts.push_back(dim - patch);
    return starts;
}

inline PatchGrid build_patch_grid(const std::array<int, 3>& dims, const std::array<int, 3>& patch_size,
                                  const std::array<int, 3>& stride) {
    PatchGrid grid;
    grid.patch_size = patch_size;
    grid.stride = stride;
    std::array<std::vector<int>, 3> axes;
    for (int a = 0; a < 3; ++a) axes[a] = axis_starts(dims[a], patch_size[a], stride[a]);
    for (int z : axes[0])
        for (int y : axes[1])
            for (int x : axes[2]) grid.starts.push_back({z, y, x});
    return grid;
}

/// Mark patches whose label window holds at least one non-background voxel
/// and record each kept patch's dominant foreground class (smallest id on
/// ties).
inline void annotate_patches(PatchGrid& grid, const GridI& label) {
    grid.keep.assign(grid.starts.size(), 0);
    grid.dominant.assign(grid.starts.size(), -1);
    std::vector<std::int64_t> counts;
    for (std::size_t p = 0; p < grid.starts.size(); ++p) {
        const auto& s = grid.starts[p];
        counts.assign(counts.size(), 0);
        std::int32_t max_label = 0;
        for (int z = s[0]; z < s[0] + grid.patch_size[0]; ++z)
            for (int y = s[1]; y < s[1] + grid.patch_size[1]; ++y)
                for (int x = s[2]; x < s[2] + grid.patch_size[2]; ++x) {
                    const std::int32_t l = label.at(z, y, x);
                    if (l <= 0) continue;
                    if (l > max_label) max_label = l;
                    if (static_cast<std::size_t>(l) >= counts.size()) counts.resize(static_cast<std::size_t>(l) + 1, 0);
                    ++counts[static_cast<std::size_t>(l)];
                }
        if (max_label == 0) continue;
        grid.keep[p] = 1;
        std::int32_t best = -1;
        std::int64_t best_count = 0;
        for (std::size_t c = 1; c < counts.size(); ++c)
            if (counts[c] > best_count) {
                best_count = counts[c];
                best = static_cast<std::int32_t>(c);
            }
        grid.dominant[p] = best;
    }
}

enum class SamplingMode { TargetOnly, ClassBalanced };

inline SamplingMode sampling_mode_from_string(const std::string& s) {
    if (s == "target-only") return SamplingMode::TargetOnly;
    if (s == "class-balanced") return SamplingMode::ClassBalanced;
    throw std::invalid_argument("unknown sampling mode '" + s + "'");
}

inline std::string to_string(SamplingMode m) {
    return m == SamplingMode::TargetOnly ? "target-only" : "class-balanced";
}

/// Draws patch indices for training epochs. Target-only mode shuffles the
/// kept patches; class-balanced mode draws a uniformly random foreground
/// class first, then a patch dominated by it (with replacement, so minority
/// classes are resampled).
class PatchSampler {
public:
    static PatchSampler make(const PatchGrid& grid, SamplingMode mode) {
        if (grid.keep.size() != grid.starts.size())
            throw std::logic_error("sampler: grid has not been annotated");
        PatchSampler s;
        s.mode_ = mode;
        for (std::size_t p = 0; p < grid.starts.size(); ++p) {
            if (!grid.keep[p]) continue;
            s.kept_.push_back(static_cast<int>(p));
            s.buckets_[grid.dominant[p]].push_back(static_cast<int>(p));
        }
        if (s.kept_.empty())
            throw std::runtime_error("sampler: no patch contains any target; the volume appears to be background-only");
        for (const auto& [cls, patches] : s.buckets_) s.classes_.push_back(cls);
        return s;
    }

    const std::vector<int>& kept() const { return kept_; }
    const std::vector<std::int32_t>& foreground_classes() const { return classes_; }

    int draw(Rng& rng) const {
        if (mode_ == SamplingMode::TargetOnly) return kept_[rng.next_index(kept_.size())];
        const auto cls = classes_[rng.next_index(classes_.size())];
        const auto& bucket = buckets_.at(cls);
        return bucket[rng.next_index(bucket.size())];
    }

    /// One epoch worth of patch indices; n <= 0 means one pass over the kept
    /// patches.
    std::vector<int> epoch_schedule(Rng& rng, int n = 0) const {
        const std::size_t want = n > 0 ? static_cast<std::size_t>(n) : kept_.size();
        std::vector<int> order;
        if (mode_ == SamplingMode::TargetOnly && want == kept_.size()) {
            order = kept_;
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[rng.next_index(i)]);
            return order;
        }
        order.reserve(want);
        for (std::size_t i = 0; i < want; ++i) order.push_back(draw(rng));
        return order;
    }

private:
    SamplingMode mode_ = SamplingMode::TargetOnly;
    std::vector<int> kept_;
    std::vector<std::int32_t> classes_;
    std::map<std::int32_t, std::vector<int>> buckets_;
};

template <typename T>
inline Tensor<T> extract_patch(const GridF& grid, const std::array<int, 3>& start, const std::array<int, 3>& size) {
    Tensor<T> t({1, size[0], size[1], size[2]});
    std::int64_t at = 0;
    for (int z = start[0]; z < start[0] + size[0]; ++z)
        for (int y = start[1]; y < start[1] + size[1]; ++y)
            for (int x = start[2]; x < start[2] + size[2]; ++x) t[at++] = static_cast<T>(grid.at(z, y, x));
    return t;
}

inline std::vector<std::int32_t> extract_label_patch(const GridI& grid, const std::array<int, 3>& start,
                                                     const std::array<int, 3>& size) {
    std::vector<std::int32_t> out;
    out.reserve(static_cast<std::size_t>(size[0]) * size[1] * size[2]);
    for (int z = start[0]; z < start[0] + size[0]; ++z)
        for (int y = start[1]; y < start[1] + size[1]; ++y)
            for (int x = start[2]; x < start[2] + size[2]; ++x) out.push_back(grid.at(z, y, x));
    return out;
}

/// Mean of the per-patch probability maps over every covering window.
/// Requires one prediction per grid start, in order.
template <typename T>
inline Tensor<T> stitch(const std::vector<Tensor<T>>& predictions, const PatchGrid& grid,
                        const std::array<int, 3>& dims) {
    if (predictions.size() != grid.starts.size())
        throw std::invalid_argument("stitch: " + std::to_string(predictions.size()) + " predictions for " +
                                    std::to_string(grid.starts.size()) + " patches");
    if (predictions.empty()) throw std::invalid_argument("stitch: no predictions");
    const auto& ps = grid.patch_size;
    int C = -1;
    for (const auto& p : predictions) {
        if (!p.defined())
            throw std::invalid_argument("stitch: missing patch prediction");
        if (p.shape.size() != 4 || p.shape[1] != ps[0] || p.shape[2] != ps[1] || p.shape[3] != ps[2])
            dim_error("stitch: prediction shape " + shape_str(p.shape) + " does not match patch size");
        if (C < 0) C = p.shape[0];
        if (p.shape[0] != C) dim_error("stitch: class count differs between patches");
    }

    const std::int64_t vol = grid_numel(dims);
    Tensor<T> out({C, dims[0], dims[1], dims[2]});
    std::vector<std::int32_t> cover(static_cast<std::size_t>(vol), 0);

    const std::int64_t pvol = static_cast<std::int64_t>(ps[0]) * ps[1] * ps[2];
    for (std::size_t p = 0; p < predictions.size(); ++p) {
        const auto& s = grid.starts[p];
        const T* src = predictions[p].ptr();
        std::int64_t at = 0;
        for (int z = 0; z < ps[0]; ++z)
            for (int y = 0; y < ps[1]; ++y)
                for (int x = 0; x < ps[2]; ++x, ++at) {
                    const std::int64_t dst =
                        (static_cast<std::int64_t>(s[0] + z) * dims[1] + (s[1] + y)) * dims[2] + (s[2] + x);
                    for (int c = 0; c < C; ++c) out[c * vol + dst] += src[c * pvol + at];
                    ++cover[static_cast<std::size_t>(dst)];
                }
    }
    for (std::int64_t v = 0; v < vol; ++v) {
        if (cover[static_cast<std::size_t>(v)] == 0)
            throw std::logic_error("stitch: voxel " + std::to_string(v) + " never covered");
        const T inv = T(1) / static_cast<T>(cover[static_cast<std::size_t>(v)]);
        for (int c = 0; c < C; ++c) out[c * vol + v] *= inv;
    }
    return out;
}

/// Label volume from a stitched probability map (argmax per voxel, smallest
/// class id on ties).
template <typename T>
inline GridI argmax_labels(const Tensor<T>& prob) {
    if (prob.shape.size() != 4) dim_error("argmax: expected [C,M,N,D], got " + shape_str(prob.shape));
    const int C = prob.shape[0];
    GridI out({prob.shape[1], prob.shape[2], prob.shape[3]});
    const std::int64_t vol = grid_numel(out.dims);
    for (std::int64_t v = 0; v < vol; ++v) {
        int best = 0;
        T best_val = prob[v];
        for (int c = 1; c < C; ++c)
            if (prob[c * vol + v] > best_val) {
                best_val = prob[c * vol + v];
                best = c;
            }
        out.data[static_cast<std::size_t>(v)] = best;
    }
    return out;
}

} // namespace uafuse
