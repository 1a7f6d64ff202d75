#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <set>

#include "uafuse/patches.hpp"
#include "uafuse/phantom.hpp"
#include "uafuse/volume.hpp"

using namespace uafuse;

TEST_CASE("axis starts: 60/32/14 gives {0,14,28}") {
    auto s = axis_starts(60, 32, 14);
    CHECK(s == std::vector<int>{0, 14, 28});
    auto grid = build_patch_grid({60, 60, 60}, {32, 32, 32}, {14, 14, 14});
    CHECK(grid.starts.size() == 27);
}

TEST_CASE("axis starts: exact fit gives a single start") {
    CHECK(axis_starts(32, 32, 14) == std::vector<int>{0});
}

TEST_CASE("axis starts: 40/32/14 clamps the final start to 8") {
    CHECK(axis_starts(40, 32, 14) == std::vector<int>{0, 8});
}

TEST_CASE("patch larger than the volume is an error") {
    REQUIRE_THROWS_AS(build_patch_grid({30, 40, 40}, {32, 32, 32}, {14, 14, 14}), std::invalid_argument);
}

TEST_CASE("patch grid covers every voxel (randomized dims up to 64)") {
    Rng rng(41);
    for (int trial = 0; trial < 40; ++trial) {
        std::array<int, 3> dims, patch, stride;
        for (int a = 0; a < 3; ++a) {
            dims[a] = 8 + static_cast<int>(rng.next_index(57));            // 8..64
            patch[a] = 2 + static_cast<int>(rng.next_index(static_cast<std::uint64_t>(dims[a]) - 1)); // 2..dims
            stride[a] = 1 + static_cast<int>(rng.next_index(static_cast<std::uint64_t>(patch[a]))); // 1..patch
        }
        auto grid = build_patch_grid(dims, patch, stride);
        std::vector<std::uint8_t> covered(static_cast<std::size_t>(grid_numel(dims)), 0);
        for (const auto& s : grid.starts) {
            REQUIRE(s[0] + patch[0] <= dims[0]);
            REQUIRE(s[1] + patch[1] <= dims[1]);
            REQUIRE(s[2] + patch[2] <= dims[2]);
            for (int z = s[0]; z < s[0] + patch[0]; ++z)
                for (int y = s[1]; y < s[1] + patch[1]; ++y)
                    for (int x = s[2]; x < s[2] + patch[2]; ++x)
                        covered[(static_cast<std::size_t>(z) * dims[1] + y) * dims[2] + x] = 1;
        }
        for (auto c : covered) REQUIRE(c == 1);
    }
}

TEST_CASE("target filtering keeps exactly the windows covering a lone voxel") {
    GridI label({20, 20, 20}, 0);
    label.at(0, 0, 0) = 2;
    auto grid = build_patch_grid(label.dims, {8, 8, 8}, {4, 4, 4});
    annotate_patches(grid, label);
    for (std::size_t p = 0; p < grid.starts.size(); ++p) {
        const bool covers = grid.starts[p] == std::array<int, 3>{0, 0, 0};
        CHECK(static_cast<bool>(grid.keep[p]) == covers);
        if (grid.keep[p]) CHECK(grid.dominant[p] == 2);
    }
}

TEST_CASE("a background-only volume raises the advisory error") {
    GridI label({16, 16, 16}, 0);
    auto grid = build_patch_grid(label.dims, {8, 8, 8}, {8, 8, 8});
    annotate_patches(grid, label);
    REQUIRE_THROWS_WITH(PatchSampler::make(grid, SamplingMode::TargetOnly),
                        Catch::Matchers::ContainsSubstring("background-only"));
}

TEST_CASE("dominant class is the most frequent foreground label") {
    GridI label({8, 8, 8}, 0);
    for (int x = 0; x < 5; ++x) label.at(0, 0, x) = 1;
    for (int x = 0; x < 3; ++x) label.at(1, 0, x) = 3;
    auto grid = build_patch_grid(label.dims, {8, 8, 8}, {8, 8, 8});
    annotate_patches(grid, label);
    REQUIRE(grid.starts.size() == 1);
    CHECK(grid.dominant[0] == 1);
}

TEST_CASE("class-balanced sampling equalizes a 90/10 imbalance") {
    // 90 patches dominated by class 1, 10 by class 2
    GridI label({10, 10, 100}, 0);
    for (int x = 0; x < 100; ++x) label.at(0, 0, x) = x < 90 ? 1 : 2;
    PatchGrid grid;
    grid.patch_size = {10, 10, 1};
    grid.stride = {10, 10, 1};
    for (int x = 0; x < 100; ++x) grid.starts.push_back({0, 0, x});
    annotate_patches(grid, label);
    auto sampler = PatchSampler::make(grid, SamplingMode::ClassBalanced);
    REQUIRE(sampler.foreground_classes().size() == 2);

    Rng rng(42);
    int class1 = 0;
    for (int draw = 0; draw < 1000; ++draw) {
        const int p = sampler.draw(rng);
        if (grid.dominant[static_cast<std::size_t>(p)] == 1) ++class1;
    }
    CHECK(class1 >= 450);
    CHECK(class1 <= 550);
}

TEST_CASE("target-only schedule visits every kept patch once") {
    GridI label({10, 10, 10}, 1);
    auto grid = build_patch_grid(label.dims, {5, 5, 5}, {5, 5, 5});
    annotate_patches(grid, label);
    auto sampler = PatchSampler::make(grid, SamplingMode::TargetOnly);
    Rng rng(43);
    auto sched = sampler.epoch_schedule(rng);
    CHECK(sched.size() == grid.starts.size());
    std::set<int> unique(sched.begin(), sched.end());
    CHECK(unique.size() == sched.size());
}

TEST_CASE("normalize: constant grid becomes all zeros") {
    GridF g({4, 4, 4}, 3.5f);
    auto n = normalize(g);
    for (float v : n.data) CHECK(v == 0.0f);
}

TEST_CASE("normalize: zero mean and unit std over the nonzero support") {
    GridF g({4, 4, 4}, 0.0f);
    for (int i = 0; i < 8; ++i) g.data[static_cast<std::size_t>(i)] = static_cast<float>(i + 1);
    auto n = normalize(g);
    double sum = 0, sumsq = 0;
    for (int i = 0; i < 8; ++i) {
        sum += n.data[static_cast<std::size_t>(i)];
        sumsq += static_cast<double>(n.data[static_cast<std::size_t>(i)]) * n.data[static_cast<std::size_t>(i)];
    }
    CHECK(std::abs(sum / 8.0) < 1e-6);
    CHECK(sumsq / 8.0 == Catch::Approx(1.0).epsilon(1e-5));
    for (std::size_t i = 8; i < n.data.size(); ++i) CHECK(n.data[i] == 0.0f);
}

TEST_CASE("normalize is idempotent on the support") {
    Rng rng(44);
    GridF g({6, 6, 6});
    for (auto& v : g.data) v = static_cast<float>(rng.uniform(0.5, 2.0));
    auto once = normalize(g);
    auto twice = normalize(once);
    for (std::size_t i = 0; i < g.data.size(); ++i)
        CHECK(std::abs(once.data[i] - twice.data[i]) < 1e-5f);
}

TEST_CASE("stitch: a single exact-fit patch passes through") {
    PatchGrid grid;
    grid.patch_size = {4, 4, 4};
    grid.starts = {{0, 0, 0}};
    Tensor<float> pred({2, 4, 4, 4});
    Rng rng(45);
    for (std::int64_t i = 0; i < pred.numel(); ++i) pred[i] = static_cast<float>(rng.next_double());
    auto full = stitch(std::vector<Tensor<float>>{pred}, grid, {4, 4, 4});
    for (std::int64_t i = 0; i < pred.numel(); ++i) CHECK(full[i] == pred[i]);
}

TEST_CASE("stitch: half-overlapping constant patches average to (p+q)/2") {
    PatchGrid grid;
    grid.patch_size = {2, 2, 4};
    grid.starts = {{0, 0, 0}, {0, 0, 2}};
    Tensor<float> p({1, 2, 2, 4}, 0.2f);
    Tensor<float> q({1, 2, 2, 4}, 0.8f);
    auto full = stitch(std::vector<Tensor<float>>{p, q}, grid, {2, 2, 6});
    // columns 0-1 only p, 2-3 overlap, 4-5 only q
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 2; ++y) {
            CHECK(full[(z * 2 + y) * 6 + 0] == 0.2f);
            CHECK(full[(z * 2 + y) * 6 + 2] == Catch::Approx(0.5f));
            CHECK(full[(z * 2 + y) * 6 + 5] == 0.8f);
        }
}

TEST_CASE("stitch matches a brute-force per-voxel accumulation oracle") {
    Rng rng(46);
    const std::array<int, 3> dims{11, 9, 10};
    const std::array<int, 3> patch{5, 4, 6};
    const std::array<int, 3> stride{3, 2, 4};
    auto grid = build_patch_grid(dims, patch, stride);
    const int C = 3;
    std::vector<Tensor<float>> preds;
    for (std::size_t p = 0; p < grid.starts.size(); ++p) {
        Tensor<float> t({C, patch[0], patch[1], patch[2]});
        for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.next_double());
        preds.push_back(t);
    }
    auto full = stitch(preds, grid, dims);

    // oracle: accumulate sums and counts voxel by voxel
    const std::int64_t vol = grid_numel(dims);
    std::vector<double> sum(static_cast<std::size_t>(C * vol), 0.0);
    std::vector<int> cnt(static_cast<std::size_t>(vol), 0);
    const std::int64_t pvol = static_cast<std::int64_t>(patch[0]) * patch[1] * patch[2];
    for (std::size_t p = 0; p < grid.starts.size(); ++p) {
        const auto& s = grid.starts[p];
        for (int z = 0; z < patch[0]; ++z)
            for (int y = 0; y < patch[1]; ++y)
                for (int x = 0; x < patch[2]; ++x) {
                    const std::int64_t src = (static_cast<std::int64_t>(z) * patch[1] + y) * patch[2] + x;
                    const std::int64_t dst = (static_cast<std::int64_t>(s[0] + z) * dims[1] + s[1] + y) * dims[2] + s[2] + x;
                    for (int c = 0; c < C; ++c) sum[static_cast<std::size_t>(c * vol + dst)] += preds[p][c * pvol + src];
                    ++cnt[static_cast<std::size_t>(dst)];
                }
    }
    for (std::int64_t v = 0; v < vol; ++v) {
        REQUIRE(cnt[static_cast<std::size_t>(v)] > 0);
        for (int c = 0; c < C; ++c) {
            const float expect = static_cast<float>(sum[static_cast<std::size_t>(c * vol + v)] / cnt[static_cast<std::size_t>(v)]);
            REQUIRE(full[c * vol + v] == Catch::Approx(expect).margin(1e-6));
        }
    }
}

TEST_CASE("stitch conserves probability mass") {
    Rng rng(47);
    const std::array<int, 3> dims{10, 10, 10};
    auto grid = build_patch_grid(dims, {6, 6, 6}, {4, 4, 4});
    const int C = 4;
    std::vector<Tensor<float>> preds;
    for (std::size_t p = 0; p < grid.starts.size(); ++p) {
        Tensor<float> t({C, 6, 6, 6});
        for (std::int64_t v = 0; v < 216; ++v) {
            double sum = 0;
            for (int c = 0; c < C; ++c) {
                const double u = rng.uniform(0.05, 1.0);
                t[c * 216 + v] = static_cast<float>(u);
                sum += u;
            }
            for (int c = 0; c < C; ++c) t[c * 216 + v] = static_cast<float>(t[c * 216 + v] / sum);
        }
        preds.push_back(t);
    }
    auto full = stitch(preds, grid, dims);
    for (std::int64_t v = 0; v < 1000; ++v) {
        double sum = 0;
        for (int c = 0; c < C; ++c) sum += full[c * 1000 + v];
        CHECK(sum == Catch::Approx(1.0).margin(1e-5));
    }
}

TEST_CASE("stitch rejects a missing prediction") {
    PatchGrid grid;
    grid.patch_size = {2, 2, 2};
    grid.starts = {{0, 0, 0}, {0, 0, 2}};
    std::vector<Tensor<float>> preds{Tensor<float>({1, 2, 2, 2}, 0.5f)};
    REQUIRE_THROWS_AS(stitch(preds, grid, {2, 2, 4}), std::invalid_argument);
    preds.push_back(Tensor<float>());
    REQUIRE_THROWS_AS(stitch(preds, grid, {2, 2, 4}), std::invalid_argument);
}

TEST_CASE("phantom generation is bit-deterministic in the seed") {
    auto spec = PhantomSpec::defaults();
    spec.dims = {24, 24, 24};
    auto a = generate_phantom(spec, 7);
    auto b = generate_phantom(spec, 7);
    CHECK(a.volume.label.data == b.volume.label.data);
    for (std::size_t m = 0; m < a.volume.modalities.size(); ++m)
        CHECK(std::memcmp(a.volume.modalities[m].data.data(), b.volume.modalities[m].data.data(),
                          a.volume.modalities[m].data.size() * sizeof(float)) == 0);
    auto c = generate_phantom(spec, 8);
    CHECK(c.volume.label.data != a.volume.label.data);
}

TEST_CASE("phantom label grid uses every class") {
    auto spec = PhantomSpec::defaults();
    spec.dims = {32, 32, 32};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto ph = generate_phantom(spec, seed);
        std::set<std::int32_t> seen(ph.volume.label.data.begin(), ph.volume.label.data.end());
        for (int cls = 0; cls < spec.num_classes; ++cls) REQUIRE(seen.count(cls) == 1);
    }
}

TEST_CASE("phantom contrast table must cover every class") {
    auto spec = PhantomSpec::defaults();
    spec.contrast[1].pop_back();
    REQUIRE_THROWS_WITH(generate_phantom(spec, 1), Catch::Matchers::ContainsSubstring("missing a class"));
}

TEST_CASE("swap-contrast corruption shifts statistics inside the region by > 2 std") {
    auto spec = PhantomSpec::defaults();
    spec.dims = {48, 48, 48};
    spec.has_corruption = true;
    spec.corruption.modality = 1;
    spec.corruption.mode = "swap-contrast";
    spec.corruption.center = {0.5f, 0.5f, 0.5f};
    spec.corruption.radius = 0.3f;
    auto ph = generate_phantom(spec, 11);

    const auto& grid = ph.volume.modalities[1];
    const auto& label = ph.volume.label;
    const std::int64_t n = grid_numel(spec.dims);
    // per class: mean inside vs outside the region
    for (std::int32_t cls = 0; cls < spec.num_classes; ++cls) {
        double in_sum = 0, out_sum = 0;
        std::int64_t in_n = 0, out_n = 0;
        for (std::int64_t v = 0; v < n; ++v) {
            if (label.data[static_cast<std::size_t>(v)] != cls) continue;
            if (ph.region.data[static_cast<std::size_t>(v)]) {
                in_sum += grid.data[static_cast<std::size_t>(v)];
                ++in_n;
            } else {
                out_sum += grid.data[static_cast<std::size_t>(v)];
                ++out_n;
            }
        }
        if (in_n < 30 || out_n < 30) continue; // too few voxels for a stable statistic
        const double sd = spec.contrast[1][static_cast<std::size_t>(cls)][1];
        CHECK(std::abs(in_sum / in_n - out_sum / out_n) > 2.0 * sd);
    }

    // modality 0 is untouched: statistics agree inside and outside
    const auto& clean = ph.volume.modalities[0];
    for (std::int32_t cls = 0; cls < spec.num_classes; ++cls) {
        double in_sum = 0, out_sum = 0;
        std::int64_t in_n = 0, out_n = 0;
        for (std::int64_t v = 0; v < n; ++v) {
            if (label.data[static_cast<std::size_t>(v)] != cls) continue;
            if (ph.region.data[static_cast<std::size_t>(v)]) {
                in_sum += clean.data[static_cast<std::size_t>(v)];
                ++in_n;
            } else {
                out_sum += clean.data[static_cast<std::size_t>(v)];
                ++out_n;
            }
        }
        if (in_n < 30 || out_n < 30) continue;
        const double sd = spec.contrast[0][static_cast<std::size_t>(cls)][1];
        CHECK(std::abs(in_sum / in_n - out_sum / out_n) < sd);
    }
}
