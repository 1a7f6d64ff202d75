#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "uafuse/ops.hpp"
#include "uafuse/rng.hpp"

using namespace uafuse;

namespace {

template <typename T>
Tensor<T> random_tensor(std::vector<int> shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    Tensor<T> t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

} // namespace

TEST_CASE("softmax of all-zero logits is uniform") {
    Tensor<double> logits({3, 2, 2, 2}, 0.0);
    auto p = softmax_classes(logits);
    for (std::int64_t i = 0; i < p.numel(); ++i) CHECK(p[i] == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax of (0, ln 2) gives (1/3, 2/3)") {
    Tensor<double> logits({2, 1, 1, 1}, {0.0, std::log(2.0)});
    auto p = softmax_classes(logits);
    CHECK(p[0] == Catch::Approx(1.0 / 3.0).margin(1e-12));
    CHECK(p[1] == Catch::Approx(2.0 / 3.0).margin(1e-12));
}

TEST_CASE("softmax is invariant to a constant logit shift") {
    auto logits = random_tensor<double>({4, 3, 3, 3}, 7);
    auto p1 = softmax_classes(logits);
    auto shifted = affine(logits, 1.0, 100.0);
    auto p2 = softmax_classes(shifted);
    for (std::int64_t i = 0; i < p1.numel(); ++i) CHECK(std::abs(p1[i] - p2[i]) < 1e-12);
}

TEST_CASE("softmax output is a probability map in single precision") {
    auto logits = random_tensor<float>({5, 4, 4, 4}, 11, -4.0, 4.0);
    auto p = softmax_classes(logits);
    const std::int64_t S = 64;
    for (std::int64_t v = 0; v < S; ++v) {
        double sum = 0;
        for (int c = 0; c < 5; ++c) {
            const float x = p[c * S + v];
            CHECK(x > 0.0f);
            CHECK(x < 1.0f);
            sum += x;
        }
        CHECK(sum == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("cross entropy of a perfect one-hot prediction is (almost) zero") {
    const int C = 3;
    Tensor<double> prob({C, 2, 2, 2}, 0.0);
    std::vector<std::int32_t> labels(8);
    for (int v = 0; v < 8; ++v) {
        labels[static_cast<std::size_t>(v)] = v % C;
        prob[(v % C) * 8 + v] = 1.0;
    }
    auto loss = cross_entropy(prob, labels);
    CHECK(loss[0] >= 0.0);
    CHECK(loss[0] <= -std::log(1.0 - kProbEps) + 1e-12);
}

TEST_CASE("cross entropy of the uniform map over 4 classes is ln 4") {
    Tensor<double> prob({4, 2, 2, 2}, 0.25);
    std::vector<std::int32_t> labels(8, 2);
    auto loss = cross_entropy(prob, labels);
    CHECK(loss[0] == Catch::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy single-voxel worked value") {
    Tensor<double> prob({2, 1, 1, 1}, {0.25, 0.75});
    std::vector<std::int32_t> labels{1};
    auto loss = cross_entropy(prob, labels);
    CHECK(loss[0] == Catch::Approx(-std::log(0.75)).epsilon(1e-12));
}

TEST_CASE("cross entropy names the offending voxel for a bad label") {
    Tensor<double> prob({2, 2, 2, 2}, 0.5);
    std::vector<std::int32_t> labels(8, 0);
    labels[5] = 7; // voxel (1,0,1)
    REQUIRE_THROWS_WITH(cross_entropy(prob, labels),
                        Catch::Matchers::ContainsSubstring("label 7") &&
                            Catch::Matchers::ContainsSubstring("(1,0,1)"));
}

TEST_CASE("sigmoid of zero is one half") {
    Tensor<double> x({1}, {0.0});
    CHECK(sigmoid(x)[0] == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("relu clips negatives only") {
    Tensor<double> x({4}, {-2.0, -0.5, 0.0, 3.0});
    auto y = relu(x);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 0.0);
    CHECK(y[3] == 3.0);
}

TEST_CASE("channel concat keeps first operand first") {
    Tensor<float> a({2, 4, 4, 4}, 1.0f);
    Tensor<float> b({3, 4, 4, 4}, 2.0f);
    auto c = concat_channels(a, b);
    REQUIRE(c.shape == std::vector<int>{5, 4, 4, 4});
    const std::int64_t S = 64;
    for (std::int64_t i = 0; i < 2 * S; ++i) CHECK(c[i] == 1.0f);
    for (std::int64_t i = 2 * S; i < 5 * S; ++i) CHECK(c[i] == 2.0f);
}

TEST_CASE("concat rejects mismatched spatial dims") {
    Tensor<float> a({2, 4, 4, 4});
    Tensor<float> b({3, 4, 4, 5});
    REQUIRE_THROWS_AS(concat_channels(a, b), std::invalid_argument);
}

TEST_CASE("global average pool of a constant field returns the constant") {
    Tensor<double> x({3, 4, 5, 6});
    for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<double>(i / 120 + 1); // channel-constant
    auto p = global_avg_pool(x);
    REQUIRE(p.shape == std::vector<int>{3});
    CHECK(p[0] == Catch::Approx(1.0));
    CHECK(p[1] == Catch::Approx(2.0));
    CHECK(p[2] == Catch::Approx(3.0));
}

TEST_CASE("mul_field broadcasts one scalar field across channels") {
    auto x = random_tensor<double>({3, 2, 2, 2}, 3);
    Tensor<double> f({1, 2, 2, 2});
    for (int i = 0; i < 8; ++i) f[i] = 0.5 * i;
    auto y = mul_field(x, f);
    for (int c = 0; c < 3; ++c)
        for (int v = 0; v < 8; ++v) CHECK(y[c * 8 + v] == Catch::Approx(x[c * 8 + v] * f[v]));
}

TEST_CASE("mul_field rejects a field with wrong spatial dims") {
    Tensor<double> x({3, 2, 2, 2});
    Tensor<double> f({1, 2, 2, 3});
    REQUIRE_THROWS_AS(mul_field(x, f), std::invalid_argument);
}

TEST_CASE("mul_channel scales each channel by its own weight") {
    Tensor<double> x({2, 2, 2, 2}, 1.0);
    Tensor<double> s({2}, {2.0, -3.0});
    auto y = mul_channel(x, s);
    for (int v = 0; v < 8; ++v) {
        CHECK(y[v] == 2.0);
        CHECK(y[8 + v] == -3.0);
    }
}

TEST_CASE("elementwise add and mul shape checks") {
    Tensor<double> a({2, 3});
    Tensor<double> b({3, 2});
    REQUIRE_THROWS_AS(add(a, b), std::invalid_argument);
    REQUIRE_THROWS_AS(mul(a, b), std::invalid_argument);
}

TEST_CASE("fully_connected computes W x + b") {
    Tensor<double> x({2}, {1.0, 2.0});
    Tensor<double> w({2, 2}, {1.0, 0.0, 3.0, -1.0});
    Tensor<double> b({2}, {0.5, 0.0});
    auto y = fully_connected(x, w, b);
    CHECK(y[0] == Catch::Approx(1.5));
    CHECK(y[1] == Catch::Approx(1.0));
}

TEST_CASE("tensor invariants") {
    Tensor<float> t({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK_FALSE(t.requires_grad());
    CHECK(Tensor<float>::precision() == Precision::Single);
    CHECK(Tensor<double>::precision() == Precision::Double);
    REQUIRE_THROWS_AS(Tensor<double>({2, 2}, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("forward ops stay finite on finite inputs") {
    auto x = random_tensor<float>({4, 6, 6, 6}, 99, -50.0, 50.0);
    auto checked = [](const Tensor<float>& t) {
        for (std::int64_t i = 0; i < t.numel(); ++i) REQUIRE(std::isfinite(static_cast<double>(t[i])));
    };
    checked(softmax_classes(x));
    checked(sigmoid(x));
    checked(relu(x));
    checked(log_eps(relu(x)));
}
