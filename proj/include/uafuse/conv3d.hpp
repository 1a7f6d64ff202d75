#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "parallel.hpp"
#include "tensor.hpp"

namespace uafuse {

namespace detail {

// Fixed-order partial-sum reduction; vectorizes without reassociation flags
// and is bit-identical for a fixed length.
template <typename T>
inline T sum_fixed(const T* a, std::int64_t n) {
    constexpr int L = 16;
    T lanes[L] = {};
    std::int64_t i = 0;
    for (; i + L <= n; i += L)
        for (int j = 0; j < L; ++j) lanes[j] += a[i + j];
    T tail = T(0);
    for (; i < n; ++i) tail += a[i];
    T acc = tail;
    for (int j = 0; j < L; ++j) acc += lanes[j];
    return acc;
}

// Copy of the input with rows zero-padded by P columns on each side. Turns
// every x-tap into a full-width pass with no boundary branches.
template <typename T>
inline std::vector<T> pad_rows(const T* in, int C, int Z, int Y, int X, int P) {
    const int Xp = X + 2 * P;
    std::vector<T> padded(static_cast<std::size_t>(C) * Z * Y * Xp, T(0));
    const std::int64_t rows = static_cast<std::int64_t>(C) * Z * Y;
    for (std::int64_t rw = 0; rw < rows; ++rw)
        std::copy(in + rw * X, in + rw * X + X, padded.data() + rw * Xp + P);
    return padded;
}

// All k x-taps of one padded input row folded into an output-row
// accumulator in a single full-width pass.
template <typename T>
inline void conv3d_row_taps(T* __restrict acc, const T* __restrict pr, const T* __restrict wrow,
                            int X, int k, int dil) {
    if (k == 3) {
        const T w0 = wrow[0], w1 = wrow[1], w2 = wrow[2];
        const T* r1 = pr + dil;
        const T* r2 = pr + 2 * dil;
        for (int x = 0; x < X; ++x) acc[x] += w0 * pr[x] + w1 * r1[x] + w2 * r2[x];
        return;
    }
    if (k == 1) {
        const T w0 = wrow[0];
        for (int x = 0; x < X; ++x) acc[x] += w0 * pr[x];
        return;
    }
    for (int kx = 0; kx < k; ++kx) {
        const T wv = wrow[kx];
        const T* src = pr + kx * dil;
        for (int x = 0; x < X; ++x) acc[x] += wv * src[x];
    }
}

// Direct cross-correlation with holes, zero padding chosen so output
// spatial dims equal input's. Parallel over output channels; every output
// element is produced by exactly one chunk in a fixed tap order. Output
// channels are processed in blocks of four so each input row fetched from
// L2 is reused four times.
template <typename T>
inline void conv3d_forward_kernel(const T* in, const T* w, const T* bias, T* out,
                                  int cin, int cout, int Z, int Y, int X, int k, int dil) {
    const int r = (k - 1) / 2;
    const int P = r * dil;
    const int Xp = X + 2 * P;
    const std::int64_t plane = static_cast<std::int64_t>(Y) * X;
    const std::int64_t vol = static_cast<std::int64_t>(Z) * plane;
    const std::vector<T> padded = pad_rows(in, cin, Z, Y, X, P);
    const T* pin = padded.data();

#ifndef UAFUSE_CONV_BLOCK
    constexpr int CB = 4;
#else
    constexpr int CB = UAFUSE_CONV_BLOCK;
#endif
    parallel_chunks(cout, [&](std::int64_t co_begin, std::int64_t co_end) {
        std::vector<T> accbuf(static_cast<std::size_t>(CB) * X);
        for (std::int64_t cb = co_begin; cb < co_end; cb += CB) {
            const int jb = static_cast<int>(std::min<std::int64_t>(CB, co_end - cb));
            for (int z = 0; z < Z; ++z) {
                for (int y = 0; y < Y; ++y) {
                    for (int j = 0; j < jb; ++j) {
                        const T bv = bias ? bias[cb + j] : T(0);
                        T* acc = accbuf.data() + j * X;
                        for (int x = 0; x < X; ++x) acc[x] = bv;
                    }
                    for (int ci = 0; ci < cin; ++ci) {
                        for (int kz = 0; kz < k; ++kz) {
                            const int zi = z + (kz - r) * dil;
                            if (zi < 0 || zi >= Z) continue;
                            for (int ky = 0; ky < k; ++ky) {
                                const int yi = y + (ky - r) * dil;
                                if (yi < 0 || yi >= Y) continue;
                                const T* pr = pin + (static_cast<std::int64_t>(ci) * Z + zi) * Y * Xp +
                                              static_cast<std::int64_t>(yi) * Xp;
                                for (int j = 0; j < jb; ++j) {
                                    const T* wrow = w + (((cb + j) * cin + ci) * static_cast<std::int64_t>(k) * k +
                                                         static_cast<std::int64_t>(kz) * k + ky) * k;
                                    conv3d_row_taps(accbuf.data() + j * X, pr, wrow, X, k, dil);
                                }
                            }
                        }
                    }
                    for (int j = 0; j < jb; ++j)
                        std::copy(accbuf.data() + j * X, accbuf.data() + (j + 1) * X,
                                  out + (cb + j) * vol + z * plane + static_cast<std::int64_t>(y) * X);
                }
            }
        }
    });
}

// d(loss)/d(weight): shifted dot products of the output gradient against the
// padded input. Lane accumulators persist across the whole (z,y) sweep of a
// tap row so the horizontal reduction happens once per weight. Parallel over
// output channels (disjoint weight slices).
template <typename T>
inline void conv3d_weight_grad_kernel(const T* in, const T* gout, T* gw,
                                      int cin, int cout, int Z, int Y, int X, int k, int dil) {
    constexpr int L = 16;
    const int r = (k - 1) / 2;
    const int P = r * dil;
    const int Xp = X + 2 * P;
    const std::int64_t plane = static_cast<std::int64_t>(Y) * X;
    const std::int64_t vol = static_cast<std::int64_t>(Z) * plane;
    const std::vector<T> padded = pad_rows(in, cin, Z, Y, X, P);
    const T* pin = padded.data();

    parallel_chunks(cout, [&](std::int64_t co_begin, std::int64_t co_end) {
        std::vector<T> lanebuf(static_cast<std::size_t>(k) * L);
        for (std::int64_t co = co_begin; co < co_end; ++co) {
            const T* gc = gout + co * vol;
            for (int ci = 0; ci < cin; ++ci) {
                for (int kz = 0; kz < k; ++kz) {
                    const int sz = (kz - r) * dil;
                    const int zlo = std::max(0, -sz);
                    const int zhi = std::min(Z, Z - sz);
                    for (int ky = 0; ky < k; ++ky) {
                        const int sy = (ky - r) * dil;
                        const int ylo = std::max(0, -sy);
                        const int yhi = std::min(Y, Y - sy);
                        std::fill(lanebuf.begin(), lanebuf.end(), T(0));
                        if (k == 3) {
                            T l0[L] = {}, l1[L] = {}, l2[L] = {};
                            for (int z = zlo; z < zhi; ++z) {
                                for (int y = ylo; y < yhi; ++y) {
                                    const T* __restrict g = gc + z * plane + static_cast<std::int64_t>(y) * X;
                                    const T* __restrict p0 = pin + (static_cast<std::int64_t>(ci) * Z + z + sz) * Y * Xp +
                                                             static_cast<std::int64_t>(y + sy) * Xp;
                                    const T* __restrict p1 = p0 + dil;
                                    const T* __restrict p2 = p0 + 2 * dil;
                                    int x = 0;
                                    for (; x + L <= X; x += L)
                                        for (int j = 0; j < L; ++j) {
                                            l0[j] += g[x + j] * p0[x + j];
                                            l1[j] += g[x + j] * p1[x + j];
                                            l2[j] += g[x + j] * p2[x + j];
                                        }
                                    for (; x < X; ++x) {
                                        const int j = x & (L - 1);
                                        l0[j] += g[x] * p0[x];
                                        l1[j] += g[x] * p1[x];
                                        l2[j] += g[x] * p2[x];
                                    }
                                }
                            }
                            std::copy(l0, l0 + L, lanebuf.data());
                            std::copy(l1, l1 + L, lanebuf.data() + L);
                            std::copy(l2, l2 + L, lanebuf.data() + 2 * L);
                        } else {
                            for (int z = zlo; z < zhi; ++z) {
                                for (int y = ylo; y < yhi; ++y) {
                                    const T* __restrict g = gc + z * plane + static_cast<std::int64_t>(y) * X;
                                    const T* pbase = pin + (static_cast<std::int64_t>(ci) * Z + z + sz) * Y * Xp +
                                                     static_cast<std::int64_t>(y + sy) * Xp;
                                    for (int kx = 0; kx < k; ++kx) {
                                        const T* __restrict p = pbase + kx * dil;
                                        T* __restrict lanes = lanebuf.data() + kx * L;
                                        int x = 0;
                                        for (; x + L <= X; x += L)
                                            for (int j = 0; j < L; ++j) lanes[j] += g[x + j] * p[x + j];
                                        for (; x < X; ++x) lanes[x & (L - 1)] += g[x] * p[x];
                                    }
                                }
                            }
                        }
                        for (int kx = 0; kx < k; ++kx) {
                            T acc = T(0);
                            const T* lanes = lanebuf.data() + kx * L;
                            for (int j = 0; j < L; ++j) acc += lanes[j];
                            gw[((co * cin + ci) * k * k + static_cast<std::int64_t>(kz) * k + ky) * k + kx] = acc;
                        }
                    }
                }
            }
        }
    });
}

} // namespace detail

/// 3D "same" convolution (cross-correlation) with dilation. Input
/// [C_in,M,N,D], weight [C_out,C_in,k,k,k] with k odd, bias [C_out].
/// Output spatial dims equal the input's for every (k, dilation).
template <typename T>
inline Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int dilation = 1) {
    if (x.shape.size() != 4)
        dim_error("conv3d: input must be [C,M,N,D], got " + shape_str(x.shape));
    if (w.shape.size() != 5)
        dim_error("conv3d: weight must be [C_out,C_in,k,k,k], got " + shape_str(w.shape));
    const int cin = x.shape[0];
    const int cout = w.shape[0];
    const int k = w.shape[2];
    if (w.shape[1] != cin)
        dim_error("conv3d: input has " + std::to_string(cin) + " channels but weight expects " + std::to_string(w.shape[1]));
    if (w.shape[3] != k || w.shape[4] != k)
        dim_error("conv3d: kernel must be cubic, got " + shape_str(w.shape));
    if (k % 2 == 0) dim_error("conv3d: kernel size must be odd, got " + std::to_string(k));
    if (b.shape.size() != 1 || b.shape[0] != cout)
        dim_error("conv3d: bias " + shape_str(b.shape) + " does not match " + std::to_string(cout) + " output channels");
    if (dilation < 1) dim_error("conv3d: dilation must be positive");

    const int Z = x.shape[1], Y = x.shape[2], X = x.shape[3];
    Tensor<T> out({cout, Z, Y, X});
    detail::conv3d_forward_kernel(x.ptr(), w.ptr(), b.ptr(), out.ptr(), cin, cout, Z, Y, X, k, dilation);

    if (Tape<T>* tape = common_tape<T>({&x, &w, &b})) {
        out.tape = tape;
        out.node = tape->record(
            [x, w, b, cin, cout, Z, Y, X, k, dilation](Tape<T>& tp, const std::vector<T>& g) {
                const std::int64_t vol = static_cast<std::int64_t>(Z) * Y * X;
                if (x.node >= 0) {
                    // transpose and flip the kernel, then reuse the forward path
                    std::vector<T> wt(static_cast<std::size_t>(cin) * cout * k * k * k);
                    const T* wv = w.ptr();
                    for (int co = 0; co < cout; ++co)
                        for (int ci = 0; ci < cin; ++ci)
                            for (int t = 0; t < k * k * k; ++t) {
                                const int kz = t / (k * k), ky = (t / k) % k, kx = t % k;
                                const int ft = ((k - 1 - kz) * k + (k - 1 - ky)) * k + (k - 1 - kx);
                                wt[(static_cast<std::size_t>(ci) * cout + co) * k * k * k + ft] =
                                    wv[(static_cast<std::size_t>(co) * cin + ci) * k * k * k + t];
                            }
                    std::vector<T> gx(static_cast<std::size_t>(cin) * vol);
                    detail::conv3d_forward_kernel(g.data(), wt.data(), static_cast<const T*>(nullptr), gx.data(),
                                                  cout, cin, Z, Y, X, k, dilation);
                    tp.accumulate(x.node, gx.data(), static_cast<std::int64_t>(gx.size()));
                }
                if (w.node >= 0) {
                    std::vector<T> gw(static_cast<std::size_t>(w.numel()));
                    detail::conv3d_weight_grad_kernel(x.ptr(), g.data(), gw.data(), cin, cout, Z, Y, X, k, dilation);
                    tp.accumulate(w.node, gw.data(), w.numel());
                }
                if (b.node >= 0) {
                    std::vector<T> gb(static_cast<std::size_t>(cout));
                    for (int co = 0; co < cout; ++co) gb[static_cast<std::size_t>(co)] = detail::sum_fixed(g.data() + co * vol, vol);
                    tp.accumulate(b.node, gb.data(), cout);
                }
            },
            out.numel());
    }
    check_finite(out, "conv3d");
    return out;
}

} // namespace uafuse
