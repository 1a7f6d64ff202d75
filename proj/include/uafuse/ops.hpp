#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tensor.hpp"

namespace uafuse {

// Probability floor applied before any log.
inline constexpr double kProbEps = 1e-7;

namespace detail {

template <typename T>
inline std::int64_t spatial_numel(const Tensor<T>& x) {
    std::int64_t s = 1;
    for (std::size_t i = 1; i < x.shape.size(); ++i) s *= x.shape[i];
    return s;
}

template <typename T>
inline void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape != b.shape)
        dim_error(std::string(op) + ": shapes " + shape_str(a.shape) + " and " + shape_str(b.shape) + " differ");
}

} // namespace detail

template <typename T>
inline Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> out(x.shape);
    const T* in = x.ptr();
    T* o = out.ptr();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) o[i] = in[i] > T(0) ? in[i] : T(0);
    if (Tape<T>* tape = common_tape<T>({&x})) {
        out.tape = tape;
        out.node = tape->record(
            [x](Tape<T>& tp, const std::vector<T>& g) {
                std::vector<T> gx(g.size());
                const T* in = x.ptr();
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] = in[i] > T(0) ? g[i] : T(0);
                tp.accumulate(x.node, gx.data(), static_cast<std::int64_t>(gx.size()));
            },
            out.numel());
    }
    check_finite(out, "relu");
    return out;
}

template <typename T>
inline Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> out(x.shape);
    const T* in = x.ptr();
    T* o = out.ptr();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(in[i]);
        o[i] = static_cast<T>(v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)));
    }
    if (Tape<T>* tape = common_tape<T>({&x})) {
        auto y = out.data;
        out.tape = tape;
        out.node = tape->record(
            [x, y](Tape<T>& tp, const std::vector<T>& g) {
                std::vector<T> gx(g.size());
                const T* yv = y->data();
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * yv[i] * (T(1) - yv[i]);
                tp.accumulate(x.node, gx.data(), static_cast<std::int64_t>(gx.size()));
            },
            out.numel());
    }
    check_finite(out, "sigmoid");
    return out;
}

template <typename T>
inline Tensor<T> exp_op(const Tensor<T>& x) {
    Tensor<T> out(x.shape);
    const T* in = x.ptr();
    T* o = out.ptr();
    for (std::int64_t i = 0; i < x.numel(); ++i) o[i] = static_cast<T>(std::exp(static_cast<double>(in[i])));
    if (Tape<T>* tape = common_tape<T>({&x})) {
        auto y = out.data;
        out.tape = tape;
        out.node = tape->record(
            [x, y](Tape<T>& tp, const std::vector<T>& g) {
                std::vector<T> gx(g.size());
                const T* yv = y->data();
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * yv[i];
                tp.accumulate(x.node, gx.data(), static_cast<std::int64_t>(gx.size()));
            },
            out.numel());
    }
    check_finite(out, "exp");
    return out;
}

/// log(max(x, eps)). Constant (zero gradient) below the floor.
template <typename T>
inline Tensor<T> log_eps(const Tensor<T>& x, double eps = kProbEps) {
    Tensor<T> out(x.shape);
    const T* in = x.ptr();
    T* o = out.ptr();
    for (std::int64_t i = 0; i < x.numel(); ++i)
        o[i] = static_cast<T>(std::log(std::max(static_cast<double>(in[i]), eps)));
    if (Tape<T>* tape = common_tape<T>({&x})) {
        out.tape = tape;
        out.node = tape->record(
            [x, eps](Tape<T>& tp, const std::vector<T>& g) {
                std::vector<T> gx(g.size());
                const T* in = x.ptr();
                for (std::size_t i = 0; i < g.size(); ++i)
                    gx[i] = static_cast<double>(in[i]) > eps ? static_cast<T>(g[i] / in[i]) : T(0);
                tp.accumulate(x.node, gx.data(), static_cast<std::int64_t>(gx.size()));
            },
            out.numel());
    }
    check_finite(out, "log_eps");
    return out;
}

/// a*x + b, elementwise with scalar coefficients.
template <typename T>
inline Tensor<T> affine(const Tensor<T>& x, T a, T b) {
    Tensor<T> out(x.shape);
    const T* in = x.ptr();
    T* o = out.ptr();
    for (std::int64_t i = 0; i < x.numel(); ++i) o[i] = a * in[i] + b;
    if (Tape<T>* tape = common_tape<T>({&x})) {
        out.tape = tape;
        out.node = tape->record(
            [x, a](Tape<T>& tp, const std::vector<T>& g) {
                std::vector<T> gx(g.size());
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] = a * g[i];
                tp.accumulate(x.node, gx.data(), static_cast<std::int64_t>(gx.size()));
            },
            out.numel());
    }
    check_finite(out, "affine");
    return out;
}

template <typename T>
inline Tensor<T> scale(const Tensor<T>& x, T a) {
    return affine(x, a, T(0));
}

template <typename T>
inline Tensor<T> one_minus(const Tensor<T>& x) {
    return affine(x, T(-1), T(1));
}

template <typename T>
inline Tensor<T> clamp01(const Tensor<T>& x) {
    Tensor<T> out(x.shape);
    const T* in = x.ptr();
    T* o = out.ptr();
    for (std::int64_t i = 0; i < x.numel(); ++i) o[i] = std::min(T(1), std::max(T(0), in[i]));
    if (Tape<T>* tape = common_tape<T>({&x})) {
        out.tape = tape;
        out.node = tape->record(
            [x](Tape<T>& tp, const std::vector<T>& g) {
                std::vector<T> gx(g.size());
                const T* in = x.ptr();
                for (std::size_t i = 0; i < g.size(); ++i)
                    gx[i] = (in[i] > T(0) && in[i] < T(1)) ? g[i] : T(0);
                tp.accumulate(x.node, gx.data(), static_cast<std::int64_t>(gx.size()));
            },
            out.numel());
    }
    return out;
}

template <typename T>
inline Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "add");
    Tensor<T> out(a.shape);
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* o = out.ptr();
    for (std::int64_t i = 0; i < a.numel(); ++i) o[i] = pa[i] + pb[i];
    if (Tape<T>* tape = common_tape<T>({&a, &b})) {
        const int na = a.node, nb = b.node;
        out.tape = tape;
        out.node = tape->record(
            [na, nb](Tape<T>& tp, const std::vector<T>& g) {
                if (na >= 0) tp.accumulate(na, g.data(), static_cast<std::int64_t>(g.size()));
                if (nb >= 0) tp.accumulate(nb, g.data(), static_cast<std::int64_t>(g.size()));
            },
            out.numel());
    }
    check_finite(out, "add");
    return out;
}

template <typename T>
inline Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "mul");
    Tensor<T> out(a.shape);
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* o = out.ptr();
    for (std::int64_t i = 0; i < a.numel(); ++i) o[i] = pa[i] * pb[i];
    if (Tape<T>* tape = common_tape<T>({&a, &b})) {
        out.tape = tape;
        out.node = tape->record(
            [a, b](Tape<T>& tp, const std::vector<T>& g) {
                std::vector<T> buf(g.size());
                if (a.node >= 0) {
                    const T* pb = b.ptr();
                    for (std::size_t i = 0; i < g.size(); ++i) buf[i] = g[i] * pb[i];
                    tp.accumulate(a.node, buf.data(), static_cast<std::int64_t>(buf.size()));
                }
                if (b.node >= 0) {
                    const T* pa = a.ptr();
                    for (std::size_t i = 0; i < g.size(); ++i) buf[i] = g[i] * pa[i];
                    tp.accumulate(b.node, buf.data(), static_cast<std::int64_t>(buf.size()));
                }
            },
            out.numel());
    }
    check_finite(out, "mul");
    return out;
}

/// x[C,spatial...] scaled per channel by s[C].
template <typename T>
inline Tensor<T> mul_channel(const Tensor<T>& x, const Tensor<T>& s) {
    if (x.shape.empty() || s.shape.size() != 1 || s.shape[0] != x.shape[0])
        dim_error("mul_channel: scale shape " + shape_str(s.shape) + " does not match channels of " + shape_str(x.shape));
    const int C = x.shape[0];
    const std::int64_t S = detail::spatial_numel(x);
    Tensor<T> out(x.shape);
    const T* in = x.ptr();
    const T* sv = s.ptr();
    T* o = out.ptr();
    for (int c = 0; c < C; ++c) {
        const T w = sv[c];
        for (std::int64_t i = 0; i < S; ++i) o[c * S + i] = w * in[c * S + i];
    }
    if (Tape<T>* tape = common_tape<T>({&x, &s})) {
        out.tape = tape;
        out.node = tape->record(
            [x, s, C, S](Tape<T>& tp, const std::vector<T>& g) {
                if (x.node >= 0) {
                    std::vector<T> gx(g.size());
                    const T* sv = s.ptr();
                    for (int c = 0; c < C; ++c)
                        for (std::int64_t i = 0; i < S; ++i) gx[c * S + i] = g[c * S + i] * sv[c];
                    tp.accumulate(x.node, gx.data(), static_cast<std::int64_t>(gx.size()));
                }
                if (s.node >= 0) {
                    std::vector<T> gs(static_cast<std::size_t>(C), T(0));
                    const T* in = x.ptr();
                    for (int c = 0; c < C; ++c) {
                        T acc = T(0);
                        for (std::int64_t i = 0; i < S; ++i) acc += g[c * S + i] * in[c * S + i];
                        gs[static_cast<std::size_t>(c)] = acc;
                    }
                    tp.accumulate(s.node, gs.data(), C);
                }
            },
            out.numel());
    }
    check_finite(out, "mul_channel");
    return out;
}

/// x[C,spatial...] multiplied voxel-wise by a scalar field f[1,spatial...],
/// broadcast across channels.
template <typename T>
inline Tensor<T> mul_field(const Tensor<T>& x, const Tensor<T>& f) {
    const std::int64_t S = detail::spatial_numel(x);
    bool ok = f.shape.size() == x.shape.size() && f.shape[0] == 1;
    for (std::size_t i = 1; ok && i < x.shape.size(); ++i) ok = f.shape[i] == x.shape[i];
    if (!ok)
        dim_error("mul_field: field shape " + shape_str(f.shape) + " does not broadcast over " + shape_str(x.shape));
    const int C = x.shape[0];
    Tensor<T> out(x.shape);
    const T* in = x.ptr();
    const T* fv = f.ptr();
    T* o = out.ptr();
    for (int c = 0; c < C; ++c)
        for (std::int64_t i = 0; i < S; ++i) o[c * S + i] = in[c * S + i] * fv[i];
    if (Tape<T>* tape = common_tape<T>({&x, &f})) {
        out.tape = tape;
        out.node = tape->record(
            [x, f, C, S](Tape<T>& tp, const std::vector<T>& g) {
                if (x.node >= 0) {
                    std::vector<T> gx(g.size());
                    const T* fv = f.ptr();
                    for (int c = 0; c < C; ++c)
                        for (std::int64_t i = 0; i < S; ++i) gx[c * S + i] = g[c * S + i] * fv[i];
                    tp.accumulate(x.node, gx.data(), static_cast<std::int64_t>(gx.size()));
                }
                if (f.node >= 0) {
                    std::vector<T> gf(static_cast<std::size_t>(S), T(0));
                    const T* in = x.ptr();
                    for (int c = 0; c < C; ++c)
                        for (std::int64_t i = 0; i < S; ++i) gf[static_cast<std::size_t>(i)] += g[c * S + i] * in[c * S + i];
                    tp.accumulate(f.node, gf.data(), S);
                }
            },
            out.numel());
    }
    check_finite(out, "mul_field");
    return out;
}

/// Channel concatenation, first operand first.
template <typename T>
inline Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) dim_error("concat: no operands");
    std::vector<int> shape = parts[0].shape;
    int channels = 0;
    for (const auto& p : parts) {
        if (p.shape.size() != shape.size())
            dim_error("concat: rank mismatch");
        for (std::size_t i = 1; i < shape.size(); ++i)
            if (p.shape[i] != shape[i])
                dim_error("concat: spatial dims " + shape_str(p.shape) + " vs " + shape_str(shape));
        channels += p.shape[0];
    }
    shape[0] = channels;
    Tensor<T> out(shape);
    T* o = out.ptr();
    std::int64_t at = 0;
    for (const auto& p : parts) {
        std::copy(p.ptr(), p.ptr() + p.numel(), o + at);
        at += p.numel();
    }
    Tape<T>* tape = nullptr;
    for (const auto& p : parts)
        if (p.requires_grad()) {
            if (tape && tape != p.tape) throw std::invalid_argument("concat: operands on different tapes");
            tape = p.tape;
        }
    if (tape) {
        std::vector<std::pair<int, std::int64_t>> slices; // node, numel
        for (const auto& p : parts) slices.push_back({p.node, p.numel()});
        out.tape = tape;
        out.node = tape->record(
            [slices](Tape<T>& tp, const std::vector<T>& g) {
                std::int64_t at = 0;
                for (const auto& [node, n] : slices) {
                    if (node >= 0) tp.accumulate(node, g.data() + at, n);
                    at += n;
                }
            },
            out.numel());
    }
    check_finite(out, "concat");
    return out;
}

template <typename T>
inline Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    return concat_channels(std::vector<Tensor<T>>{a, b});
}

/// Spatial mean per channel: [C,spatial...] -> [C].
template <typename T>
inline Tensor<T> global_avg_pool(const Tensor<T>& x) {
    if (x.shape.size() < 2) dim_error("global_avg_pool: expected channel + spatial dims, got " + shape_str(x.shape));
    const int C = x.shape[0];
    const std::int64_t S = detail::spatial_numel(x);
    Tensor<T> out({C});
    const T* in = x.ptr();
    for (int c = 0; c < C; ++c) {
        double acc = 0;
        for (std::int64_t i = 0; i < S; ++i) acc += static_cast<double>(in[c * S + i]);
        out[c] = static_cast<T>(acc / static_cast<double>(S));
    }
    if (Tape<T>* tape = common_tape<T>({&x})) {
        out.tape = tape;
        out.node = tape->record(
            [x, C, S](Tape<T>& tp, const std::vector<T>& g) {
                std::vector<T> gx(static_cast<std::size_t>(C * S));
                const T inv = T(1) / static_cast<T>(S);
                for (int c = 0; c < C; ++c)
                    for (std::int64_t i = 0; i < S; ++i) gx[c * S + i] = g[static_cast<std::size_t>(c)] * inv;
                tp.accumulate(x.node, gx.data(), static_cast<std::int64_t>(gx.size()));
            },
            out.numel());
    }
    check_finite(out, "global_avg_pool");
    return out;
}

/// Dense map on a channel vector: y = W x + b with W[C_out,C_in].
template <typename T>
inline Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.shape.size() != 1 || w.shape.size() != 2 || b.shape.size() != 1)
        dim_error("fully_connected: expected x[C_in], w[C_out,C_in], b[C_out]");
    const int cin = x.shape[0];
    const int cout = w.shape[0];
    if (w.shape[1] != cin || b.shape[0] != cout)
        dim_error("fully_connected: w " + shape_str(w.shape) + ", b " + shape_str(b.shape) + " incompatible with x " + shape_str(x.shape));
    Tensor<T> out({cout});
    const T* xv = x.ptr();
    const T* wv = w.ptr();
    for (int o = 0; o < cout; ++o) {
        double acc = static_cast<double>(b[o]);
        for (int i = 0; i < cin; ++i) acc += static_cast<double>(wv[o * cin + i]) * static_cast<double>(xv[i]);
        out[o] = static_cast<T>(acc);
    }
    if (Tape<T>* tape = common_tape<T>({&x, &w, &b})) {
        out.tape = tape;
        out.node = tape->record(
            [x, w, b, cin, cout](Tape<T>& tp, const std::vector<T>& g) {
                if (x.node >= 0) {
                    std::vector<T> gx(static_cast<std::size_t>(cin), T(0));
                    const T* wv = w.ptr();
                    for (int o = 0; o < cout; ++o)
                        for (int i = 0; i < cin; ++i) gx[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(o)] * wv[o * cin + i];
                    tp.accumulate(x.node, gx.data(), cin);
                }
                if (w.node >= 0) {
                    std::vector<T> gw(static_cast<std::size_t>(cout * cin));
                    const T* xv = x.ptr();
                    for (int o = 0; o < cout; ++o)
                        for (int i = 0; i < cin; ++i) gw[static_cast<std::size_t>(o * cin + i)] = g[static_cast<std::size_t>(o)] * xv[i];
                    tp.accumulate(w.node, gw.data(), cout * cin);
                }
                if (b.node >= 0) tp.accumulate(b.node, g.data(), cout);
            },
            out.numel());
    }
    check_finite(out, "fully_connected");
    return out;
}

/// Softmax over the class dimension (dim 0), per voxel. Stabilized by
/// max subtraction; every voxel's outputs sum to 1.
template <typename T>
inline Tensor<T> softmax_classes(const Tensor<T>& logits) {
    if (logits.shape.empty() || logits.shape[0] < 2)
        dim_error("softmax: need at least 2 classes, got shape " + shape_str(logits.shape));
    const int C = logits.shape[0];
    const std::int64_t S = detail::spatial_numel(logits);
    Tensor<T> out(logits.shape);
    const T* in = logits.ptr();
    T* o = out.ptr();
    for (std::int64_t v = 0; v < S; ++v) {
        double mx = static_cast<double>(in[v]);
        for (int c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(in[c * S + v]));
        double sum = 0;
        for (int c = 0; c < C; ++c) {
            const double e = std::exp(static_cast<double>(in[c * S + v]) - mx);
            o[c * S + v] = static_cast<T>(e);
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (int c = 0; c < C; ++c) o[c * S + v] = static_cast<T>(static_cast<double>(o[c * S + v]) * inv);
    }
    if (Tape<T>* tape = common_tape<T>({&logits})) {
        auto y = out.data;
        const int node = logits.node;
        out.tape = tape;
        out.node = tape->record(
            [y, node, C, S](Tape<T>& tp, const std::vector<T>& g) {
                std::vector<T> gx(g.size());
                const T* yv = y->data();
                for (std::int64_t v = 0; v < S; ++v) {
                    double dot = 0;
                    for (int c = 0; c < C; ++c) dot += static_cast<double>(g[c * S + v]) * static_cast<double>(yv[c * S + v]);
                    for (int c = 0; c < C; ++c)
                        gx[c * S + v] = static_cast<T>(static_cast<double>(yv[c * S + v]) * (static_cast<double>(g[c * S + v]) - dot));
                }
                tp.accumulate(node, gx.data(), static_cast<std::int64_t>(gx.size()));
            },
            out.numel());
    }
    check_finite(out, "softmax");
    return out;
}

/// Mean over voxels of -log(prob at the true class), probabilities floored
/// at kProbEps before the log. Labels must lie in [0, C).
template <typename T>
inline Tensor<T> cross_entropy(const Tensor<T>& prob, const std::vector<std::int32_t>& labels) {
    if (prob.shape.empty()) dim_error("cross_entropy: scalar probability map");
    const int C = prob.shape[0];
    const std::int64_t S = detail::spatial_numel(prob);
    if (static_cast<std::int64_t>(labels.size()) != S)
        dim_error("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(S) + " voxels");
    const T* p = prob.ptr();
    double acc = 0;
    for (std::int64_t v = 0; v < S; ++v) {
        const std::int32_t lbl = labels[static_cast<std::size_t>(v)];
        if (lbl < 0 || lbl >= C) {
            std::int64_t rest = v;
            std::vector<std::int64_t> coord;
            for (std::size_t d = prob.shape.size() - 1; d >= 1; --d) {
                coord.push_back(rest % prob.shape[d]);
                rest /= prob.shape[d];
            }
            std::string where;
            for (auto it = coord.rbegin(); it != coord.rend(); ++it)
                where += (where.empty() ? "(" : ",") + std::to_string(*it);
            throw std::out_of_range("cross_entropy: label " + std::to_string(lbl) + " out of range [0," +
                                    std::to_string(C) + ") at voxel " + where + ")");
        }
        acc -= std::log(std::max(static_cast<double>(p[lbl * S + v]), kProbEps));
    }
    Tensor<T> out({1});
    out[0] = static_cast<T>(acc / static_cast<double>(S));
    if (Tape<T>* tape = common_tape<T>({&prob})) {
        out.tape = tape;
        out.node = tape->record(
            [prob, labels, C, S](Tape<T>& tp, const std::vector<T>& g) {
                std::vector<T> gp(static_cast<std::size_t>(prob.numel()), T(0));
                const T* p = prob.ptr();
                const double w = static_cast<double>(g[0]) / static_cast<double>(S);
                for (std::int64_t v = 0; v < S; ++v) {
                    const std::int64_t at = labels[static_cast<std::size_t>(v)] * S + v;
                    const double pv = static_cast<double>(p[at]);
                    if (pv > kProbEps) gp[static_cast<std::size_t>(at)] = static_cast<T>(-w / pv);
                }
                tp.accumulate(prob.node, gp.data(), prob.numel());
            },
            out.numel());
    }
    check_finite(out, "cross_entropy");
    return out;
}

/// Per-voxel sum over channels: [C,spatial...] -> [1,spatial...].
template <typename T>
inline Tensor<T> sum_channels(const Tensor<T>& x) {
    if (x.shape.size() < 2) dim_error("sum_channels: expected channel + spatial dims");
    const int C = x.shape[0];
    const std::int64_t S = detail::spatial_numel(x);
    std::vector<int> shape = x.shape;
    shape[0] = 1;
    Tensor<T> out(shape);
    const T* in = x.ptr();
    T* o = out.ptr();
    for (std::int64_t v = 0; v < S; ++v) {
        double acc = 0;
        for (int c = 0; c < C; ++c) acc += static_cast<double>(in[c * S + v]);
        o[v] = static_cast<T>(acc);
    }
    if (Tape<T>* tape = common_tape<T>({&x})) {
        const int node = x.node;
        out.tape = tape;
        out.node = tape->record(
            [node, C, S](Tape<T>& tp, const std::vector<T>& g) {
                std::vector<T> gx(static_cast<std::size_t>(C * S));
                for (int c = 0; c < C; ++c)
                    for (std::int64_t v = 0; v < S; ++v) gx[c * S + v] = g[static_cast<std::size_t>(v)];
                tp.accumulate(node, gx.data(), static_cast<std::int64_t>(gx.size()));
            },
            out.numel());
    }
    return out;
}

/// Sum of all entries, as a scalar tensor.
template <typename T>
inline Tensor<T> sum_all(const Tensor<T>& x) {
    Tensor<T> out({1});
    double acc = 0;
    const T* in = x.ptr();
    for (std::int64_t i = 0; i < x.numel(); ++i) acc += static_cast<double>(in[i]);
    out[0] = static_cast<T>(acc);
    if (Tape<T>* tape = common_tape<T>({&x})) {
        const int node = x.node;
        const std::int64_t n = x.numel();
        out.tape = tape;
        out.node = tape->record(
            [node, n](Tape<T>& tp, const std::vector<T>& g) {
                std::vector<T> gx(static_cast<std::size_t>(n), g[0]);
                tp.accumulate(node, gx.data(), n);
            },
            out.numel());
    }
    return out;
}

} // namespace uafuse
