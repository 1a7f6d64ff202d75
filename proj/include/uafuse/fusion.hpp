#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nn.hpp"
#include "ops.hpp"
#include "tensor.hpp"

namespace uafuse {

/// Per-voxel prediction uncertainty of one stream: 1 at the uniform class
/// distribution, 0 where any class probability vanishes.
template <typename T>
struct UncertaintyField {
    Tensor<T> values;       // [1,M,N,D], each in [0,1]
    int source_stream = -1; // which stream's prediction produced it
};

/// U = (prod_i y_i) / (1/C)^C per voxel, evaluated in log space with a
/// kProbEps floor and clamped to [0,1]. The default is a pure routing
/// signal: no gradient flows into y through U. With `differentiable` the
/// same value is built from taped ops instead.
template <typename T>
inline UncertaintyField<T> compute_uncertainty(const Tensor<T>& prob, int source_stream = -1,
                                               bool differentiable = false) {
    if (prob.shape.size() < 2 || prob.shape[0] < 2)
        dim_error("uncertainty: need a probability map [C,...] with C >= 2, got " + shape_str(prob.shape));
    const int C = prob.shape[0];
    const std::int64_t S = detail::spatial_numel(prob);
    const T* p = prob.ptr();
    for (std::int64_t v = 0; v < S; ++v) {
        double sum = 0;
        for (int c = 0; c < C; ++c) sum += static_cast<double>(p[c * S + v]);
        if (std::abs(sum - 1.0) > 1e-4)
            throw std::domain_error("uncertainty: probabilities at voxel " + std::to_string(v) + " sum to " +
                                    std::to_string(sum) + ", not 1");
    }

    UncertaintyField<T> u;
    u.source_stream = source_stream;
    const double log_cc = static_cast<double>(C) * std::log(static_cast<double>(C));

    if (differentiable) {
        u.values = clamp01(exp_op(affine(sum_channels(log_eps(prob)), T(1), static_cast<T>(log_cc))));
        return u;
    }

    std::vector<int> shape = prob.shape;
    shape[0] = 1;
    u.values = Tensor<T>(shape);
    T* uv = u.values.ptr();
    std::vector<double> ys(static_cast<std::size_t>(C));
    for (std::int64_t v = 0; v < S; ++v) {
        bool exact_zero = false;
        for (int c = 0; c < C; ++c) {
            ys[static_cast<std::size_t>(c)] = static_cast<double>(p[c * S + v]);
            if (ys[static_cast<std::size_t>(c)] <= 0.0) exact_zero = true;
        }
        if (exact_zero) {
            uv[v] = T(0);
            continue;
        }
        // summing in sorted order makes U exactly permutation invariant
        std::sort(ys.begin(), ys.end());
        double log_prod = 0;
        for (double y : ys) log_prod += std::log(std::max(y, kProbEps));
        const double val = std::exp(log_prod + log_cc);
        uv[v] = static_cast<T>(std::min(1.0, std::max(0.0, val)));
    }
    return u;
}

/// Voxel-wise (1 - U) weighting of a stream's feature maps; trustworthy
/// voxels pass through, ambiguous ones are suppressed. Applied before the
/// adaptation layer.
template <typename T>
inline std::vector<Tensor<T>> gate_features(const std::vector<Tensor<T>>& levels, const UncertaintyField<T>& u) {
    auto keep = one_minus(u.values);
    std::vector<Tensor<T>> gated;
    gated.reserve(levels.size());
    for (const auto& lvl : levels) gated.push_back(mul_field(lvl, keep));
    return gated;
}

/// Adaptation per stream, cross-stream concatenation (stream 1 first), and
/// the fused softmax head.
template <typename T>
inline Tensor<T> fuse_and_predict(const std::vector<std::vector<Tensor<T>>>& gated_levels,
                                  const FusionHeadParams<T>& p) {
    if (gated_levels.size() != p.adapt.size())
        dim_error("fuse: " + std::to_string(gated_levels.size()) + " streams for " +
                  std::to_string(p.adapt.size()) + " adaptation layers");
    std::vector<Tensor<T>> adapted;
    for (std::size_t s = 0; s < gated_levels.size(); ++s) {
        auto cat = gated_levels[s].size() == 1 ? gated_levels[s][0] : concat_channels(gated_levels[s]);
        adapted.push_back(conv3d(cat, p.adapt[s].w, p.adapt[s].b, p.adapt[s].dilation));
    }
    auto fused = concat_channels(adapted);
    return softmax_classes(conv3d(fused, p.head.w, p.head.b, p.head.dilation));
}

template <typename T>
struct ModelOutput {
    std::vector<Tensor<T>> y_stream;    // per-stream probability maps (undefined when inactive)
    std::vector<UncertaintyField<T>> u; // per-stream uncertainty (values undefined when not computed)
    Tensor<T> y_final;
    bool has_final = false;
};

/// The whole network: self-contained per-modality streams plus the
/// uncertainty-gated fusion path. Pure function of (inputs, params); safe
/// to evaluate different patches concurrently with shared parameters.
template <typename T>
struct Model {
    NetworkConfig cfg;
    std::vector<StreamParams<T>> streams;
    FusionHeadParams<T> fusion;

    static Model init(const NetworkConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        Model m;
        m.cfg = cfg;
        Rng rng(mix_seed(seed ^ 0x6d6f64656cULL));
        for (int s = 0; s < cfg.num_modalities; ++s) m.streams.push_back(make_stream<T>(cfg, rng));
        m.fusion = make_fusion_head<T>(cfg, rng);
        return m;
    }

    std::vector<int> active_streams() const {
        switch (cfg.variant) {
            case ModelVariant::Single1: return {0};
            case ModelVariant::Single2: return {1};
            default: {
                std::vector<int> all(streams.size());
                for (std::size_t i = 0; i < streams.size(); ++i) all[i] = static_cast<int>(i);
                return all;
            }
        }
    }

    bool fused_variant() const { return cfg.variant == ModelVariant::Gated || cfg.variant == ModelVariant::Plain; }

    /// Copy whose parameters are gradient-accumulating leaves of `tape`.
    Model tracked(Tape<T>& tape) const {
        Model m = *this;
        m.visit_params([&](const std::string&, Tensor<T>& t) { t = tape.leaf(t); });
        return m;
    }

    template <typename Fn>
    void visit_params(Fn&& fn) {
        visit_impl(*this, fn);
    }
    template <typename Fn>
    void visit_params(Fn&& fn) const {
        visit_impl(*this, fn);
    }

    /// Forward over one multi-modality patch. `with_fusion` false skips the
    /// fusion path entirely (stage-1 training).
    ModelOutput<T> forward(const std::vector<Tensor<T>>& modalities, bool with_fusion = true) const {
        if (static_cast<int>(modalities.size()) != cfg.num_modalities)
            dim_error("forward: expected " + std::to_string(cfg.num_modalities) + " modalities, got " +
                      std::to_string(modalities.size()));
        for (const auto& m : modalities) {
            if (m.shape.size() != 4 || m.shape[0] != 1)
                dim_error("forward: each modality must be [1,M,N,D], got " + shape_str(m.shape));
            if (m.shape != modalities[0].shape) dim_error("forward: modalities disagree on dims");
            for (int d = 1; d < 4; ++d)
                if (m.shape[d] < cfg.min_input_dim)
                    dim_error("forward: spatial dims " + shape_str(m.shape) + " below the configured minimum " +
                              std::to_string(cfg.min_input_dim));
        }

        ModelOutput<T> out;
        out.y_stream.resize(streams.size());
        out.u.resize(streams.size());

        std::vector<std::vector<Tensor<T>>> levels(streams.size());
        for (int s : active_streams()) {
            auto so = stream_forward(modalities[static_cast<std::size_t>(s)], streams[static_cast<std::size_t>(s)]);
            levels[static_cast<std::size_t>(s)] = std::move(so.levels);
            out.y_stream[static_cast<std::size_t>(s)] = std::move(so.y);
        }

        if (!fused_variant()) {
            const int s = active_streams()[0];
            out.y_final = out.y_stream[static_cast<std::size_t>(s)];
            out.has_final = true;
            return out;
        }
        if (!with_fusion) return out;

        std::vector<Tensor<T>> per_stream_features;
        for (int s : active_streams()) {
            auto& lv = levels[static_cast<std::size_t>(s)];
            auto cat = lv.size() == 1 ? lv[0] : concat_channels(lv);
            if (cfg.variant == ModelVariant::Gated) {
                out.u[static_cast<std::size_t>(s)] =
                    compute_uncertainty(out.y_stream[static_cast<std::size_t>(s)], s, cfg.uncertainty_grad);
                cat = mul_field(cat, one_minus(out.u[static_cast<std::size_t>(s)].values));
            }
            per_stream_features.push_back(std::move(cat));
        }

        std::vector<Tensor<T>> adapted;
        for (std::size_t i = 0; i < per_stream_features.size(); ++i)
            adapted.push_back(conv3d(per_stream_features[i], fusion.adapt[i].w, fusion.adapt[i].b, fusion.adapt[i].dilation));
        out.y_final = softmax_classes(concat_then_head(adapted));
        out.has_final = true;
        return out;
    }

private:
    Tensor<T> concat_then_head(const std::vector<Tensor<T>>& adapted) const {
        auto fused = adapted.size() == 1 ? adapted[0] : concat_channels(adapted);
        return conv3d(fused, fusion.head.w, fusion.head.b, fusion.head.dilation);
    }

    template <typename Self, typename Fn>
    static void visit_impl(Self& self, Fn& fn) {
        for (std::size_t s = 0; s < self.streams.size(); ++s) {
            const std::string prefix = "stream" + std::to_string(s) + ".";
            auto& st = self.streams[s];
            fn(prefix + "stem.w", st.stem.w);
            fn(prefix + "stem.b", st.stem.b);
            for (std::size_t bi = 0; bi < st.blocks.size(); ++bi) {
                const std::string bp = prefix + "block" + std::to_string(bi) + ".";
                std::visit(
                    [&](auto& blk) {
                        using B = std::decay_t<decltype(blk)>;
                        if constexpr (std::is_same_v<B, SEResBlockParams<T>>) {
                            fn(bp + "conv1.w", blk.conv1.w);
                            fn(bp + "conv1.b", blk.conv1.b);
                            fn(bp + "conv2.w", blk.conv2.w);
                            fn(bp + "conv2.b", blk.conv2.b);
                            fn(bp + "se.fc1.w", blk.fc1_w);
                            fn(bp + "se.fc1.b", blk.fc1_b);
                            fn(bp + "se.fc2.w", blk.fc2_w);
                            fn(bp + "se.fc2.b", blk.fc2_b);
                        } else {
                            for (std::size_t br = 0; br < blk.branches.size(); ++br) {
                                fn(bp + "branch" + std::to_string(br) + ".w", blk.branches[br].w);
                                fn(bp + "branch" + std::to_string(br) + ".b", blk.branches[br].b);
                            }
                            fn(bp + "proj.w", blk.projection.w);
                            fn(bp + "proj.b", blk.projection.b);
                        }
                    },
                    st.blocks[bi]);
            }
            fn(prefix + "head.w", st.head.w);
            fn(prefix + "head.b", st.head.b);
        }
        for (std::size_t s = 0; s < self.fusion.adapt.size(); ++s) {
            fn("fusion.adapt" + std::to_string(s) + ".w", self.fusion.adapt[s].w);
            fn("fusion.adapt" + std::to_string(s) + ".b", self.fusion.adapt[s].b);
        }
        fn("fusion.head.w", self.fusion.head.w);
        fn("fusion.head.b", self.fusion.head.b);
    }
};

} // namespace uafuse
