#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "conv3d.hpp"
#include "ops.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace uafuse {

// Central finite-difference verification of every registered autodiff op.
// Runs in double precision; each op is checked against (f(x+h)-f(x-h))/2h
// through a fixed random projection of its output.

struct GradCheckReport {
    std::string op;
    bool pass = false;
    double max_err = 0.0;
    int seeds = 0;
};

namespace gradcheck_detail {

using DTensor = Tensor<double>;

struct Case {
    std::vector<DTensor> inputs;
    std::function<DTensor(const std::vector<DTensor>&)> forward;
};

struct OpSpec {
    std::string name;
    std::function<Case(Rng&)> make_case;
};

inline DTensor randn(Rng& rng, std::vector<int> shape, double scale = 1.0) {
    DTensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.next_normal();
    return t;
}

// values bounded away from zero, for ops with a kink at the origin
inline DTensor rand_away_from_zero(Rng& rng, std::vector<int> shape) {
    DTensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        const double mag = rng.uniform(0.2, 1.2);
        t[i] = rng.next_double() < 0.5 ? -mag : mag;
    }
    return t;
}

inline DTensor rand_prob_map(Rng& rng, int classes, std::vector<int> spatial) {
    std::vector<int> shape = {classes};
    shape.insert(shape.end(), spatial.begin(), spatial.end());
    DTensor t(shape);
    std::int64_t S = 1;
    for (int d : spatial) S *= d;
    for (std::int64_t v = 0; v < S; ++v) {
        double sum = 0;
        for (int c = 0; c < classes; ++c) {
            const double u = rng.uniform(0.1, 1.0);
            t[c * S + v] = u;
            sum += u;
        }
        for (int c = 0; c < classes; ++c) t[c * S + v] /= sum;
    }
    return t;
}

inline const std::vector<OpSpec>& registry() {
    static const std::vector<OpSpec> ops = [] {
        std::vector<OpSpec> r;
        auto unary = [&](std::string name, std::function<DTensor(const DTensor&)> f, bool away_from_zero = false) {
            r.push_back({std::move(name), [f, away_from_zero](Rng& rng) {
                             Case c;
                             std::vector<int> shape = {2, 3, 2, 4};
                             c.inputs = {away_from_zero ? rand_away_from_zero(rng, shape) : randn(rng, shape)};
                             c.forward = [f](const std::vector<DTensor>& in) { return f(in[0]); };
                             return c;
                         }});
        };
        unary("relu", [](const DTensor& x) { return relu(x); }, true);
        unary("sigmoid", [](const DTensor& x) { return sigmoid(x); });
        unary("exp", [](const DTensor& x) { return exp_op(x); });
        unary("affine", [](const DTensor& x) { return affine(x, 1.7, -0.3); });
        r.push_back({"log_eps", [](Rng& rng) {
                         Case c;
                         DTensor x({2, 3, 2, 4});
                         for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(0.05, 1.0);
                         c.inputs = {x};
                         c.forward = [](const std::vector<DTensor>& in) { return log_eps(in[0]); };
                         return c;
                     }});
        r.push_back({"clamp01", [](Rng& rng) {
                         Case c;
                         DTensor x({2, 3, 2, 4});
                         for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(0.05, 0.95);
                         c.inputs = {x};
                         c.forward = [](const std::vector<DTensor>& in) { return clamp01(in[0]); };
                         return c;
                     }});
        r.push_back({"add", [](Rng& rng) {
                         Case c;
                         c.inputs = {randn(rng, {3, 2, 2, 3}), randn(rng, {3, 2, 2, 3})};
                         c.forward = [](const std::vector<DTensor>& in) { return add(in[0], in[1]); };
                         return c;
                     }});
        r.push_back({"mul", [](Rng& rng) {
                         Case c;
                         c.inputs = {randn(rng, {3, 2, 2, 3}), randn(rng, {3, 2, 2, 3})};
                         c.forward = [](const std::vector<DTensor>& in) { return mul(in[0], in[1]); };
                         return c;
                     }});
        r.push_back({"mul_channel", [](Rng& rng) {
                         Case c;
                         c.inputs = {randn(rng, {4, 3, 2, 2}), randn(rng, {4})};
                         c.forward = [](const std::vector<DTensor>& in) { return mul_channel(in[0], in[1]); };
                         return c;
                     }});
        r.push_back({"mul_field", [](Rng& rng) {
                         Case c;
                         c.inputs = {randn(rng, {4, 3, 2, 2}), randn(rng, {1, 3, 2, 2})};
                         c.forward = [](const std::vector<DTensor>& in) { return mul_field(in[0], in[1]); };
                         return c;
                     }});
        r.push_back({"concat", [](Rng& rng) {
                         Case c;
                         c.inputs = {randn(rng, {2, 3, 2, 2}), randn(rng, {3, 3, 2, 2})};
                         c.forward = [](const std::vector<DTensor>& in) { return concat_channels(in[0], in[1]); };
                         return c;
                     }});
        r.push_back({"global_avg_pool", [](Rng& rng) {
                         Case c;
                         c.inputs = {randn(rng, {4, 3, 3, 2})};
                         c.forward = [](const std::vector<DTensor>& in) { return global_avg_pool(in[0]); };
                         return c;
                     }});
        r.push_back({"fully_connected", [](Rng& rng) {
                         Case c;
                         c.inputs = {randn(rng, {6}), randn(rng, {4, 6}), randn(rng, {4})};
                         c.forward = [](const std::vector<DTensor>& in) { return fully_connected(in[0], in[1], in[2]); };
                         return c;
                     }});
        r.push_back({"softmax_classes", [](Rng& rng) {
                         Case c;
                         c.inputs = {randn(rng, {4, 2, 3, 2})};
                         c.forward = [](const std::vector<DTensor>& in) { return softmax_classes(in[0]); };
                         return c;
                     }});
        r.push_back({"cross_entropy", [](Rng& rng) {
                         Case c;
                         c.inputs = {rand_prob_map(rng, 4, {2, 3, 2})};
                         auto labels = std::make_shared<std::vector<std::int32_t>>();
                         for (int v = 0; v < 12; ++v) labels->push_back(static_cast<std::int32_t>(rng.next_index(4)));
                         c.forward = [labels](const std::vector<DTensor>& in) { return cross_entropy(in[0], *labels); };
                         return c;
                     }});
        r.push_back({"sum_channels", [](Rng& rng) {
                         Case c;
                         c.inputs = {randn(rng, {3, 2, 3, 2})};
                         c.forward = [](const std::vector<DTensor>& in) { return sum_channels(in[0]); };
                         return c;
                     }});
        r.push_back({"sum_all", [](Rng& rng) {
                         Case c;
                         c.inputs = {randn(rng, {2, 3, 2, 2})};
                         c.forward = [](const std::vector<DTensor>& in) { return sum_all(in[0]); };
                         return c;
                     }});
        auto conv_case = [](Rng& rng, int k, int dil) {
            Case c;
            c.inputs = {randn(rng, {2, 4, 5, 4}), randn(rng, {3, 2, k, k, k}, 0.5), randn(rng, {3}, 0.5)};
            c.forward = [dil](const std::vector<DTensor>& in) { return conv3d(in[0], in[1], in[2], dil); };
            return c;
        };
        r.push_back({"conv3d", [conv_case](Rng& rng) { return conv_case(rng, 3, 1); }});
        r.push_back({"conv3d_dilated", [conv_case](Rng& rng) { return conv_case(rng, 3, 2); }});
        r.push_back({"conv3d_1x1", [conv_case](Rng& rng) { return conv_case(rng, 1, 1); }});
        return r;
    }();
    return ops;
}

inline double projected_loss(const Case& c, const DTensor& proj) {
    DTensor out = c.forward(c.inputs);
    double acc = 0;
    for (std::int64_t i = 0; i < out.numel(); ++i) acc += static_cast<double>(out[i]) * proj[i];
    return acc;
}

} // namespace gradcheck_detail

/// Check one registered op over `seeds` random instances. Error metric is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradCheckReport gradcheck_op(const std::string& name, int seeds = 20, double step = 1e-4,
                                    double rel_tol = 1e-3, std::uint64_t base_seed = 42) {
    using namespace gradcheck_detail;
    const OpSpec* spec = nullptr;
    for (const auto& s : registry())
        if (s.name == name) spec = &s;
    if (!spec) throw std::invalid_argument("gradcheck: unknown op '" + name + "'");

    GradCheckReport report{name, true, 0.0, seeds};
    for (int seed = 0; seed < seeds; ++seed) {
        Rng rng(mix_seed(base_seed + static_cast<std::uint64_t>(seed) * 1000003ULL));
        Case c = spec->make_case(rng);

        DTensor probe_out = c.forward(c.inputs);
        DTensor proj(probe_out.shape);
        for (std::int64_t i = 0; i < proj.numel(); ++i) proj[i] = rng.uniform(0.5, 1.5) * (rng.next_double() < 0.5 ? -1 : 1);

        // analytic gradients
        Tape<double> tape;
        std::vector<DTensor> tracked;
        tracked.reserve(c.inputs.size());
        for (auto& in : c.inputs) tracked.push_back(tape.leaf(in));
        DTensor out = c.forward(tracked);
        DTensor loss = sum_all(mul(out, proj));
        tape.backward(loss);
        std::vector<std::vector<double>> analytic;
        for (auto& t : tracked) analytic.push_back(tape.grad(t));

        // numeric gradients
        for (std::size_t i = 0; i < c.inputs.size(); ++i) {
            DTensor& x = c.inputs[i];
            for (std::int64_t j = 0; j < x.numel(); ++j) {
                const double orig = x[j];
                x[j] = orig + step;
                const double fp = projected_loss(c, proj);
                x[j] = orig - step;
                const double fm = projected_loss(c, proj);
                x[j] = orig;
                const double numeric = (fp - fm) / (2 * step);
                const double a = analytic[i][static_cast<std::size_t>(j)];
                const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4});
                report.max_err = std::max(report.max_err, err);
                if (err > rel_tol) report.pass = false;
            }
        }
    }
    return report;
}

/// Run the whole registry (or a single op when `only` is nonempty).
inline std::vector<GradCheckReport> run_gradcheck(int seeds = 20, double step = 1e-4, double rel_tol = 1e-3,
                                                  const std::string& only = "") {
    std::vector<GradCheckReport> reports;
    for (const auto& spec : gradcheck_detail::registry()) {
        if (!only.empty() && spec.name != only) continue;
        reports.push_back(gradcheck_op(spec.name, seeds, step, rel_tol));
    }
    if (!only.empty() && reports.empty())
        throw std::invalid_argument("gradcheck: unknown op '" + only + "'");
    return reports;
}

inline std::vector<std::string> gradcheck_op_names() {
    std::vector<std::string> names;
    for (const auto& s : gradcheck_detail::registry()) names.push_back(s.name);
    return names;
}

} // namespace uafuse
