// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "efgn/core_types.hpp"
#include "efgn/tensor.hpp"

namespace efgn {

/// Catmull-Rom cubic kernel (a = -0.5), evaluated at |d|.
template <typename T>
T cubic_kernel(T d) {
    d = std::abs(d);
    if (d < T(1)) return ((T(1.5) * d - T(2.5)) * d) * d + T(1);
    if (d < T(2)) return ((T(-0.5) * d + T(2.5)) * d - T(4)) * d + T(2);
    return T(0);
}

/// Symmetric reflection of index i into [0, n).
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

namespace detail {

template <typename T>
struct ResampleTap {
    int idx[4];
    T w[4];
};

// Half-pixel-centered source coordinate: src = (o + 0.5) * in/out - 0.5,
// sampled at the four integer taps around it.
template <typename T>
std::vector<ResampleTap<T>> make_taps(int in, int out) {
    std::vector<ResampleTap<T>> taps(static_cast<std::size_t>(out));
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (int o = 0; o < out; ++o) {
        const double src = (o + 0.5) * ratio - 0.5;
        const int i0 = static_cast<int>(std::floor(src));
        const T f = static_cast<T>(src - i0);
        ResampleTap<T>& t = taps[static_cast<std::size_t>(o)];
        for (int k = 0; k < 4; ++k) t.idx[k] = reflect_index(i0 - 1 + k, in);
        t.w[0] = cubic_kernel(T(1) + f);
        t.w[1] = cubic_kernel(f);
        t.w[2] = cubic_kernel(T(1) - f);
        t.w[3] = cubic_kernel(T(2) - f);
    }
    return taps;
}

}  // namespace detail

/// Per-plane separable bicubic resize of the last two axes (width pass, then
/// height pass). Works on [C, H, W] and [B, C, H, W] alike.
template <typename T>
Tensor<T> bicubic_resize_nd(const Tensor<T>& x, int out_h, int out_w) {
    require(x.ndim() >= 2, "resize needs at least 2-D input");
    require(out_h >= 1 && out_w >= 1, "resize target must be at least 1x1");
    const int in_h = x.dim(x.ndim() - 2);
    const int in_w = x.dim(x.ndim() - 1);
    std::size_t planes = 1;
    for (int i = 0; i < x.ndim() - 2; ++i) planes *= static_cast<std::size_t>(x.dim(i));

    const auto wtaps = detail::make_taps<T>(in_w, out_w);
    const auto htaps = detail::make_taps<T>(in_h, out_h);

    std::vector<int> oshape = x.shape;
    oshape[oshape.size() - 2] = out_h;
    oshape[oshape.size() - 1] = out_w;
    Tensor<T> out(oshape);

    std::vector<T> mid(static_cast<std::size_t>(in_h) * out_w);
    for (std::size_t p = 0; p < planes; ++p) {
        const T* src = &x.data[p * static_cast<std::size_t>(in_h) * in_w];
        for (int y = 0; y < in_h; ++y) {
            const T* row = src + static_cast<std::size_t>(y) * in_w;
            T* mrow = &mid[static_cast<std::size_t>(y) * out_w];
            for (int o = 0; o < out_w; ++o) {
                const auto& t = wtaps[static_cast<std::size_t>(o)];
                mrow[o] = t.w[0] * row[t.idx[0]] + t.w[1] * row[t.idx[1]] +
                          t.w[2] * row[t.idx[2]] + t.w[3] * row[t.idx[3]];
            }
        }
        T* dst = &out.data[p * static_cast<std::size_t>(out_h) * out_w];
        for (int o = 0; o < out_h; ++o) {
            const auto& t = htaps[static_cast<std::size_t>(o)];
            const T* r0 = &mid[static_cast<std::size_t>(t.idx[0]) * out_w];
            const T* r1 = &mid[static_cast<std::size_t>(t.idx[1]) * out_w];
            const T* r2 = &mid[static_cast<std::size_t>(t.idx[2]) * out_w];
            const T* r3 = &mid[static_cast<std::size_t>(t.idx[3]) * out_w];
            T* orow = dst + static_cast<std::size_t>(o) * out_w;
            for (int xcol = 0; xcol < out_w; ++xcol) {
                orow[xcol] = t.w[0] * r0[xcol] + t.w[1] * r1[xcol] + t.w[2] * r2[xcol] +
                             t.w[3] * r3[xcol];
            }
        }
    }
    return out;
}

inline HSICube bicubic_resize(const HSICube& cube, int out_h, int out_w) {
    HSICube out = cube;
    out.data = bicubic_resize_nd(cube.data, out_h, out_w);
    return out;
}

inline HSICube degrade(const HSICube& hr, int s) {
    require(s >= 1, "scale must be at least 1");
    require(hr.height() % s == 0 && hr.width() % s == 0,
            "cube dimensions not divisible by scale");
    return bicubic_resize(hr, hr.height() / s, hr.width() / s);
}

}  // namespace efgn
