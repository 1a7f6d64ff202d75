#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "conv3d.hpp"
#include "ops.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace uafuse {

enum class ModelVariant { Gated, Plain, Single1, Single2 };

inline std::string to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::Gated: return "gated";
        case ModelVariant::Plain: return "plain";
        case ModelVariant::Single1: return "single1";
        case ModelVariant::Single2: return "single2";
    }
    return "gated";
}

inline ModelVariant model_variant_from_string(const std::string& s) {
    if (s == "gated") return ModelVariant::Gated;
    if (s == "plain") return ModelVariant::Plain;
    if (s == "single1") return ModelVariant::Single1;
    if (s == "single2") return ModelVariant::Single2;
    throw std::invalid_argument("unknown model variant '" + s + "'");
}

/// Architecture hyperparameters. Every knob of the network lives here.
struct NetworkConfig {
    int num_classes = 5; // background + 4 foreground classes
    int num_modalities = 2;
    int trunk_channels = 16;
    int adapt_channels = 16;
    int se_reduction = 4;
    std::vector<int> dilations = {1, 2, 4, 8};
    int aspp_branch_channels = 0; // 0 = trunk_channels
    std::vector<std::string> blocks = {"se-res", "se-res", "dense-aspp", "se-res"};
    std::vector<int> taps;        // block indices emitting a feature level; empty = all
    int min_input_dim = 32;
    ModelVariant variant = ModelVariant::Gated;
    bool uncertainty_grad = false; // gate signal joins the gradient graph when true

    int branch_channels() const { return aspp_branch_channels > 0 ? aspp_branch_channels : trunk_channels; }

    std::vector<int> tap_indices() const {
        if (!taps.empty()) return taps;
        std::vector<int> all(blocks.size());
        for (std::size_t i = 0; i < blocks.size(); ++i) all[i] = static_cast<int>(i);
        return all;
    }

    void validate() const {
        if (num_classes < 2) throw std::invalid_argument("config: num_classes must be at least 2");
        if (num_modalities < 1) throw std::invalid_argument("config: num_modalities must be positive");
        if (trunk_channels < 1 || adapt_channels < 1) throw std::invalid_argument("config: channel counts must be positive");
        if (se_reduction < 1 || trunk_channels % se_reduction != 0)
            throw std::invalid_argument("config: se_reduction must divide trunk_channels");
        if (dilations.empty()) throw std::invalid_argument("config: dilation set must be nonempty");
        for (std::size_t i = 0; i < dilations.size(); ++i) {
            if (dilations[i] < 1) throw std::invalid_argument("config: dilations must be positive");
            if (i > 0 && dilations[i] <= dilations[i - 1])
                throw std::invalid_argument("config: dilations must be strictly increasing");
        }
        if (blocks.empty()) throw std::invalid_argument("config: block list must be nonempty");
        for (const auto& b : blocks)
            if (b != "se-res" && b != "dense-aspp")
                throw std::invalid_argument("config: unknown block kind '" + b + "'");
        for (int t : taps)
            if (t < 0 || t >= static_cast<int>(blocks.size()))
                throw std::invalid_argument("config: tap index out of range");
        if ((variant == ModelVariant::Single2) && num_modalities < 2)
            throw std::invalid_argument("config: single2 requires two modalities");
    }
};

template <typename T>
struct Conv3dParams {
    Tensor<T> w; // [C_out, C_in, k, k, k]
    Tensor<T> b; // [C_out]
    int dilation = 1;
};

template <typename T>
struct SEResBlockParams {
    Conv3dParams<T> conv1, conv2; // 3x3x3, C -> C
    Tensor<T> fc1_w, fc1_b;       // C -> C/r
    Tensor<T> fc2_w, fc2_b;       // C/r -> C
    int reduction = 4;
};

template <typename T>
struct DenseASPPBlockParams {
    std::vector<Conv3dParams<T>> branches; // dilations strictly increasing
    Conv3dParams<T> projection;            // 1x1x1 back to C
};

template <typename T>
using BlockParams = std::variant<SEResBlockParams<T>, DenseASPPBlockParams<T>>;

template <typename T>
struct StreamParams {
    Conv3dParams<T> stem; // 1 -> C
    std::vector<BlockParams<T>> blocks;
    std::vector<int> taps;
    Conv3dParams<T> head; // levels*C -> num_classes, 1x1x1
};

template <typename T>
struct FusionHeadParams {
    std::vector<Conv3dParams<T>> adapt; // per stream, 1x1x1 to adapt_channels
    Conv3dParams<T> head;               // streams*adapt_channels -> num_classes
};

namespace detail {

// fan-in-scaled uniform weights, zero biases
template <typename T>
inline Conv3dParams<T> init_conv(int cin, int cout, int k, int dilation, Rng& rng) {
    Conv3dParams<T> p;
    p.w = Tensor<T>({cout, cin, k, k, k});
    p.b = Tensor<T>({cout});
    p.dilation = dilation;
    const double bound = std::sqrt(6.0 / (static_cast<double>(cin) * k * k * k));
    for (std::int64_t i = 0; i < p.w.numel(); ++i) p.w[i] = static_cast<T>(rng.uniform(-bound, bound));
    return p;
}

template <typename T>
inline void init_fc(Tensor<T>& w, Tensor<T>& b, int cin, int cout, Rng& rng) {
    w = Tensor<T>({cout, cin});
    b = Tensor<T>({cout});
    const double bound = std::sqrt(6.0 / cin);
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(rng.uniform(-bound, bound));
}

} // namespace detail

/// Residual conv pair with squeeze-and-excitation channel reweighting:
/// out = relu(x + s .* f(x)), f = conv-relu-conv, s = per-channel sigmoid
/// gate from the pooled f(x).
template <typename T>
inline Tensor<T> se_res_forward(const Tensor<T>& x, const SEResBlockParams<T>& p) {
    auto f = conv3d(relu(conv3d(x, p.conv1.w, p.conv1.b, p.conv1.dilation)), p.conv2.w, p.conv2.b, p.conv2.dilation);
    auto pooled = global_avg_pool(f);
    auto s = sigmoid(fully_connected(relu(fully_connected(pooled, p.fc1_w, p.fc1_b)), p.fc2_w, p.fc2_b));
    return relu(add(x, mul_channel(f, s)));
}

/// Densely wired dilated convolutions. Branch i consumes the concatenation
/// of the block input and all previous branch outputs; a 1x1x1 projection
/// maps the final concatenation back to the trunk width. Branches and
/// projection are linear.
template <typename T>
inline Tensor<T> dense_aspp_forward(const Tensor<T>& x, const DenseASPPBlockParams<T>& p) {
    if (p.branches.empty()) dim_error("dense-aspp: branch list must be nonempty");
    std::vector<Tensor<T>> feats{x};
    for (const auto& br : p.branches) {
        auto inp = feats.size() == 1 ? feats[0] : concat_channels(feats);
        feats.push_back(conv3d(inp, br.w, br.b, br.dilation));
    }
    return conv3d(concat_channels(feats), p.projection.w, p.projection.b, p.projection.dilation);
}

template <typename T>
struct StreamOutput {
    std::vector<Tensor<T>> levels; // tapped feature maps, input spatial dims
    Tensor<T> y;                   // per-voxel class probabilities
};

/// One self-contained modality stream: stem, block trunk with taps, and a
/// softmax head over the concatenated multi-level features.
template <typename T>
inline StreamOutput<T> stream_forward(const Tensor<T>& modality, const StreamParams<T>& p) {
    StreamOutput<T> out;
    auto h = relu(conv3d(modality, p.stem.w, p.stem.b, p.stem.dilation));
    for (std::size_t i = 0; i < p.blocks.size(); ++i) {
        h = std::visit([&](const auto& block) { return block_apply(h, block); }, p.blocks[i]);
        for (int t : p.taps)
            if (t == static_cast<int>(i)) out.levels.push_back(h);
    }
    if (out.levels.empty()) out.levels.push_back(h);
    auto cat = out.levels.size() == 1 ? out.levels[0] : concat_channels(out.levels);
    out.y = softmax_classes(conv3d(cat, p.head.w, p.head.b, p.head.dilation));
    return out;
}

template <typename T>
inline Tensor<T> block_apply(const Tensor<T>& x, const SEResBlockParams<T>& p) {
    return se_res_forward(x, p);
}

template <typename T>
inline Tensor<T> block_apply(const Tensor<T>& x, const DenseASPPBlockParams<T>& p) {
    return dense_aspp_forward(x, p);
}

template <typename T>
inline StreamParams<T> make_stream(const NetworkConfig& cfg, Rng& rng) {
    StreamParams<T> p;
    const int C = cfg.trunk_channels;
    p.stem = detail::init_conv<T>(1, C, 3, 1, rng);
    for (const auto& kind : cfg.blocks) {
        if (kind == "se-res") {
            SEResBlockParams<T> b;
            b.conv1 = detail::init_conv<T>(C, C, 3, 1, rng);
            b.conv2 = detail::init_conv<T>(C, C, 3, 1, rng);
            b.reduction = cfg.se_reduction;
            detail::init_fc(b.fc1_w, b.fc1_b, C, C / cfg.se_reduction, rng);
            detail::init_fc(b.fc2_w, b.fc2_b, C / cfg.se_reduction, C, rng);
            p.blocks.push_back(std::move(b));
        } else {
            DenseASPPBlockParams<T> b;
            int in_ch = C;
            for (int d : cfg.dilations) {
                b.branches.push_back(detail::init_conv<T>(in_ch, cfg.branch_channels(), 3, d, rng));
                in_ch += cfg.branch_channels();
            }
            b.projection = detail::init_conv<T>(in_ch, C, 1, 1, rng);
            p.blocks.push_back(std::move(b));
        }
    }
    p.taps = cfg.tap_indices();
    p.head = detail::init_conv<T>(static_cast<int>(p.taps.size()) * C, cfg.num_classes, 1, 1, rng);
    return p;
}

template <typename T>
inline FusionHeadParams<T> make_fusion_head(const NetworkConfig& cfg, Rng& rng) {
    FusionHeadParams<T> p;
    const int level_ch = static_cast<int>(cfg.tap_indices().size()) * cfg.trunk_channels;
    for (int s = 0; s < cfg.num_modalities; ++s)
        p.adapt.push_back(detail::init_conv<T>(level_ch, cfg.adapt_channels, 1, 1, rng));
    p.head = detail::init_conv<T>(cfg.num_modalities * cfg.adapt_channels, cfg.num_classes, 1, 1, rng);
    return p;
}

} // namespace uafuse
