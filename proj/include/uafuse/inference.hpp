#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fusion.hpp"
#include "patches.hpp"
#include "volume.hpp"

namespace uafuse {

template <typename T>
struct InferenceResult {
    Tensor<T> prob;                 // stitched [C,M,N,D] probability map
    GridI labels;                   // argmax segmentation
    std::vector<GridF> uncertainty; // stitched per-stream U fields (when requested)
};

/// Full sliding-window inference: normalize, run the model on every patch
/// of the grid, average overlapping probability maps, argmax. Patches run
/// sequentially in grid order so stitching is schedule independent.
template <typename T>
inline InferenceResult<T> predict_volume(const Model<T>& model, const Volume& raw,
                                         const std::array<int, 3>& patch_size, const std::array<int, 3>& stride,
                                         bool emit_uncertainty = false) {
    if (static_cast<int>(raw.modalities.size()) != model.cfg.num_modalities)
        dim_error("predict: volume holds " + std::to_string(raw.modalities.size()) + " modalities, model expects " +
                  std::to_string(model.cfg.num_modalities));
    const Volume vol = normalize(raw);
    const auto dims = vol.dims();
    auto grid = build_patch_grid(dims, patch_size, stride);

    const bool want_u = emit_uncertainty && model.cfg.variant == ModelVariant::Gated;
    std::vector<Tensor<T>> preds;
    preds.reserve(grid.starts.size());
    std::vector<std::vector<Tensor<T>>> upatches(model.streams.size());

    for (const auto& start : grid.starts) {
        std::vector<Tensor<T>> mods;
        mods.reserve(vol.modalities.size());
        for (const auto& m : vol.modalities) mods.push_back(extract_patch<T>(m, start, patch_size));
        auto out = model.forward(mods, true);
        preds.push_back(std::move(out.y_final));
        if (want_u)
            for (std::size_t s = 0; s < out.u.size(); ++s)
                if (out.u[s].values.defined()) upatches[s].push_back(std::move(out.u[s].values));
    }

    InferenceResult<T> result;
    result.prob = stitch(preds, grid, dims);
    result.labels = argmax_labels(result.prob);
    if (want_u) {
        for (std::size_t s = 0; s < upatches.size(); ++s) {
            if (upatches[s].size() != grid.starts.size()) continue;
            auto ustitched = stitch(upatches[s], grid, dims);
            GridF g(dims);
            for (std::int64_t i = 0; i < ustitched.numel(); ++i)
                g.data[static_cast<std::size_t>(i)] = static_cast<float>(ustitched[i]);
            result.uncertainty.push_back(std::move(g));
        }
    }
    return result;
}

} // namespace uafuse
