#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "uafuse/fusion.hpp"

using namespace uafuse;

namespace {

// Independent scalar oracle: the direct product form, no log space.
double uncertainty_direct(const std::vector<double>& y) {
    const double C = static_cast<double>(y.size());
    double prod = 1.0;
    for (double v : y) prod *= v;
    return prod * std::pow(C, C);
}

template <typename T>
Tensor<T> prob_voxel(const std::vector<double>& y) {
    Tensor<T> t({static_cast<int>(y.size()), 1, 1, 1});
    for (std::size_t i = 0; i < y.size(); ++i) t[static_cast<std::int64_t>(i)] = static_cast<T>(y[i]);
    return t;
}

std::vector<double> random_prob(Rng& rng, int C) {
    std::vector<double> y(static_cast<std::size_t>(C));
    double sum = 0;
    for (auto& v : y) {
        v = rng.uniform(1e-6, 1.0);
        sum += v;
    }
    for (auto& v : y) v /= sum;
    return y;
}

} // namespace

TEST_CASE("uncertainty of the uniform distribution is 1") {
    for (int C : {2, 3, 4, 5}) {
        std::vector<double> y(static_cast<std::size_t>(C), 1.0 / C);
        auto u = compute_uncertainty(prob_voxel<double>(y));
        CHECK(std::abs(u.values[0] - 1.0) < 1e-9);
    }
}

TEST_CASE("uncertainty of a one-hot distribution is exactly 0") {
    std::vector<double> y = {1.0, 0.0, 0.0};
    auto u = compute_uncertainty(prob_voxel<double>(y));
    CHECK(u.values[0] == 0.0);
}

TEST_CASE("worked value: U(0.5, 0.25, 0.25) = 0.84375") {
    std::vector<double> y = {0.5, 0.25, 0.25};
    CHECK(uncertainty_direct(y) == Catch::Approx(0.84375).margin(1e-15));
    auto u = compute_uncertainty(prob_voxel<double>(y));
    CHECK(std::abs(u.values[0] - 0.84375) < 1e-9);
}

TEST_CASE("uncertainty is exactly permutation invariant") {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const int C = 2 + static_cast<int>(rng.next_index(4));
        auto y = random_prob(rng, C);
        auto u0 = compute_uncertainty(prob_voxel<double>(y)).values[0];
        for (int p = 0; p < 5; ++p) {
            const std::size_t i = rng.next_index(static_cast<std::uint64_t>(C));
            const std::size_t j = rng.next_index(static_cast<std::uint64_t>(C));
            std::swap(y[i], y[j]);
            CHECK(compute_uncertainty(prob_voxel<double>(y)).values[0] == u0);
        }
    }
}

TEST_CASE("uncertainty stays in [0,1] over 1e5 random probability vectors") {
    Rng rng(22);
    for (int C = 2; C <= 5; ++C) {
        for (int trial = 0; trial < 25000; ++trial) {
            auto y = random_prob(rng, C);
            const double u = compute_uncertainty(prob_voxel<double>(y)).values[0];
            REQUIRE(u >= 0.0);
            REQUIRE(u <= 1.0);
            if (u >= 1.0) {
                for (double v : y) REQUIRE(std::abs(v - 1.0 / C) < 1e-9);
            }
        }
    }
}

TEST_CASE("uncertainty increases strictly from one-hot to uniform") {
    for (int C : {2, 3, 5}) {
        double prev = -1.0;
        for (int i = 1; i <= 100; ++i) {
            const double t = static_cast<double>(i) / 100.0;
            std::vector<double> y(static_cast<std::size_t>(C), t / C);
            y[0] = (1.0 - t) + t / C;
            const double u = compute_uncertainty(prob_voxel<double>(y)).values[0];
            CHECK(u > prev);
            prev = u;
        }
        CHECK(prev == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("log-space evaluation agrees with the direct product") {
    Rng rng(23);
    for (int trial = 0; trial < 2000; ++trial) {
        const int C = 2 + static_cast<int>(rng.next_index(4));
        auto y = random_prob(rng, C);
        const double direct = uncertainty_direct(y);
        if (direct <= 1e-30) continue;
        const double impl = compute_uncertainty(prob_voxel<double>(y)).values[0];
        CHECK(impl == Catch::Approx(std::min(1.0, direct)).epsilon(1e-6));
    }
}

TEST_CASE("invalid probability maps are rejected") {
    Tensor<double> bad({3, 1, 1, 1}, {0.5, 0.5, 0.2});
    REQUIRE_THROWS_AS(compute_uncertainty(bad), std::domain_error);
    Tensor<double> one_class({1, 2, 2, 2}, 1.0);
    REQUIRE_THROWS_AS(compute_uncertainty(one_class), std::invalid_argument);
}

TEST_CASE("uncertainty over a full map matches per-voxel evaluation") {
    Rng rng(24);
    const int C = 4;
    Tensor<float> prob({C, 3, 3, 3});
    const std::int64_t S = 27;
    std::vector<std::vector<double>> voxels;
    for (std::int64_t v = 0; v < S; ++v) {
        auto y = random_prob(rng, C);
        voxels.push_back(y);
        for (int c = 0; c < C; ++c) prob[c * S + v] = static_cast<float>(y[c]);
    }
    auto u = compute_uncertainty(prob, 0);
    CHECK(u.source_stream == 0);
    REQUIRE(u.values.shape == std::vector<int>{1, 3, 3, 3});
    for (std::int64_t v = 0; v < S; ++v) {
        // float storage of the map quantizes the inputs; compare loosely
        CHECK(u.values[v] == Catch::Approx(std::min(1.0, uncertainty_direct(voxels[static_cast<std::size_t>(v)]))).margin(2e-4));
    }
}

TEST_CASE("gating passes features through where U = 0") {
    Rng rng(25);
    Tensor<float> lvl({3, 4, 4, 4});
    for (std::int64_t i = 0; i < lvl.numel(); ++i) lvl[i] = static_cast<float>(rng.next_normal());
    UncertaintyField<float> u;
    u.values = Tensor<float>({1, 4, 4, 4}, 0.0f);
    auto gated = gate_features(std::vector<Tensor<float>>{lvl}, u);
    REQUIRE(gated.size() == 1);
    for (std::int64_t i = 0; i < lvl.numel(); ++i) CHECK(gated[0][i] == lvl[i]);
}

TEST_CASE("gating suppresses features where U = 1") {
    Tensor<float> lvl({2, 3, 3, 3}, 2.5f);
    UncertaintyField<float> u;
    u.values = Tensor<float>({1, 3, 3, 3}, 1.0f);
    auto gated = gate_features(std::vector<Tensor<float>>{lvl}, u);
    for (std::int64_t i = 0; i < lvl.numel(); ++i) CHECK(gated[0][i] == 0.0f);
}

TEST_CASE("gating halves a feature at U = 0.5") {
    Tensor<float> lvl({1, 2, 2, 2}, 2.0f);
    UncertaintyField<float> u;
    u.values = Tensor<float>({1, 2, 2, 2}, 0.5f);
    auto gated = gate_features(std::vector<Tensor<float>>{lvl}, u);
    for (std::int64_t i = 0; i < lvl.numel(); ++i) CHECK(gated[0][i] == 1.0f);
}

TEST_CASE("gated magnitude never exceeds the ungated magnitude") {
    Rng rng(26);
    Tensor<float> lvl({4, 5, 5, 5});
    for (std::int64_t i = 0; i < lvl.numel(); ++i) lvl[i] = static_cast<float>(rng.next_normal() * 3);
    UncertaintyField<float> u;
    u.values = Tensor<float>({1, 5, 5, 5});
    for (std::int64_t i = 0; i < u.values.numel(); ++i) u.values[i] = static_cast<float>(rng.next_double());
    auto gated = gate_features(std::vector<Tensor<float>>{lvl, lvl}, u);
    for (const auto& g : gated)
        for (std::int64_t i = 0; i < g.numel(); ++i) CHECK(std::abs(g[i]) <= std::abs(lvl[i]));
}

TEST_CASE("gating rejects a mismatched field") {
    Tensor<float> lvl({2, 3, 3, 3});
    UncertaintyField<float> u;
    u.values = Tensor<float>({1, 3, 3, 4});
    REQUIRE_THROWS_AS(gate_features(std::vector<Tensor<float>>{lvl}, u), std::invalid_argument);
}

TEST_CASE("fused prediction is a probability map") {
    Rng rng(27);
    FusionHeadParams<float> p;
    p.adapt.push_back(detail::init_conv<float>(4, 3, 1, 1, rng));
    p.adapt.push_back(detail::init_conv<float>(4, 3, 1, 1, rng));
    p.head = detail::init_conv<float>(6, 4, 1, 1, rng);

    auto mk = [&](float v) {
        Tensor<float> t({4, 3, 3, 3});
        for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = v * static_cast<float>(rng.next_normal());
        return t;
    };
    std::vector<std::vector<Tensor<float>>> gated = {{mk(1.0f)}, {mk(2.0f)}};
    auto y = fuse_and_predict(gated, p);
    REQUIRE(y.shape == std::vector<int>{4, 3, 3, 3});
    for (std::int64_t v = 0; v < 27; ++v) {
        double sum = 0;
        for (int c = 0; c < 4; ++c) sum += y[c * 27 + v];
        CHECK(sum == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("fused concat is stream-1 first (marker channel)") {
    // adaptation collapses each stream to a constant marker channel; the head
    // reads only fused channel 0, so logit 0 carries stream 1's marker.
    FusionHeadParams<double> p;
    p.adapt.push_back(Conv3dParams<double>{Tensor<double>({1, 2, 1, 1, 1}, 0.0), Tensor<double>({1}, {5.0}), 1});
    p.adapt.push_back(Conv3dParams<double>{Tensor<double>({1, 2, 1, 1, 1}, 0.0), Tensor<double>({1}, {-5.0}), 1});
    p.head.w = Tensor<double>({2, 2, 1, 1, 1}, 0.0);
    p.head.b = Tensor<double>({2});
    p.head.w[0] = 1.0; // class 0 logit = fused channel 0
    p.head.dilation = 1;

    std::vector<std::vector<Tensor<double>>> gated = {{Tensor<double>({2, 2, 2, 2}, 0.0)},
                                                      {Tensor<double>({2, 2, 2, 2}, 0.0)}};
    auto y = fuse_and_predict(gated, p);
    // logit0 = +5 (stream 1 marker), logit1 = 0; swapped order would give -5
    CHECK(y[0] == Catch::Approx(1.0 / (1.0 + std::exp(-5.0))).epsilon(1e-9));
    CHECK(y[0] > 0.99);
}

TEST_CASE("fuse_and_predict matches a straight-line composition of the primitives") {
    Rng rng(28);
    FusionHeadParams<double> p;
    p.adapt.push_back(detail::init_conv<double>(3, 2, 1, 1, rng));
    p.adapt.push_back(detail::init_conv<double>(3, 2, 1, 1, rng));
    p.head = detail::init_conv<double>(4, 3, 1, 1, rng);

    auto mk = [&](std::uint64_t seed) {
        Rng r2(seed);
        Tensor<double> t({3, 4, 3, 2});
        for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = r2.next_normal();
        return t;
    };
    auto g1 = mk(100), g2 = mk(200);

    auto a1 = conv3d(g1, p.adapt[0].w, p.adapt[0].b, 1);
    auto a2 = conv3d(g2, p.adapt[1].w, p.adapt[1].b, 1);
    auto expected = softmax_classes(conv3d(concat_channels(a1, a2), p.head.w, p.head.b, 1));

    auto y = fuse_and_predict({{g1}, {g2}}, p);
    REQUIRE(y.shape == expected.shape);
    for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == expected[i]);
}

TEST_CASE("differentiable uncertainty tracks gradients and matches the detached value") {
    Rng rng(29);
    Tensor<double> prob({3, 2, 2, 2});
    const std::int64_t S = 8;
    for (std::int64_t v = 0; v < S; ++v) {
        auto y = random_prob(rng, 3);
        for (int c = 0; c < 3; ++c) prob[c * S + v] = y[c];
    }
    auto detached = compute_uncertainty(prob, 0, false);
    CHECK_FALSE(detached.values.requires_grad());

    Tape<double> tape;
    auto tracked = tape.leaf(prob);
    auto diff = compute_uncertainty(tracked, 0, true);
    CHECK(diff.values.requires_grad());
    for (std::int64_t v = 0; v < S; ++v)
        CHECK(diff.values[v] == Catch::Approx(detached.values[v]).margin(1e-9));

    auto loss = sum_all(diff.values);
    tape.backward(loss);
    auto g = tape.grad(tracked);
    double norm = 0;
    for (double v : g) norm += std::abs(v);
    CHECK(norm > 0.0);
}

TEST_CASE("full model forward: gated fusion produces all three outputs") {
    NetworkConfig cfg;
    cfg.num_classes = 3;
    cfg.num_modalities = 2;
    cfg.trunk_channels = 4;
    cfg.adapt_channels = 4;
    cfg.se_reduction = 2;
    cfg.dilations = {1, 2};
    cfg.blocks = {"se-res", "dense-aspp"};
    cfg.min_input_dim = 6;
    auto model = Model<float>::init(cfg, 5);

    Rng rng(30);
    std::vector<Tensor<float>> mods;
    for (int m = 0; m < 2; ++m) {
        Tensor<float> t({1, 6, 6, 6});
        for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.next_normal());
        mods.push_back(t);
    }

    auto out = model.forward(mods, true);
    REQUIRE(out.has_final);
    REQUIRE(out.y_stream[0].defined());
    REQUIRE(out.y_stream[1].defined());
    REQUIRE(out.u[0].values.defined());
    REQUIRE(out.u[1].values.defined());
    for (std::int64_t i = 0; i < out.u[0].values.numel(); ++i) {
        CHECK(out.u[0].values[i] >= 0.0f);
        CHECK(out.u[0].values[i] <= 1.0f);
    }

    auto stage1 = model.forward(mods, false);
    CHECK_FALSE(stage1.has_final);
    CHECK(stage1.y_stream[0].defined());

    cfg.variant = ModelVariant::Single2;
    auto single = Model<float>::init(cfg, 5);
    auto sout = single.forward(mods, true);
    REQUIRE(sout.has_final);
    CHECK_FALSE(sout.y_stream[0].defined());
    CHECK(sout.y_stream[1].defined());
    CHECK_FALSE(sout.u[1].values.defined());
}
