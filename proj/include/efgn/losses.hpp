// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "efgn/autograd.hpp"
#include "efgn/tensor.hpp"

namespace efgn {

inline constexpr double kSpectralCosineClamp = 1e-7;

namespace detail {

template <typename T>
inline T sign_of(T v) {
    return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

// Forward differences along band, height, and width with replicate edge:
// the final slice along each axis differences to zero.
template <typename T>
void forward_diffs(const Tensor<T>& x, Tensor<T>& dc, Tensor<T>& dh, Tensor<T>& dw) {
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    dc = Tensor<T>::zeros(x.shape);
    dh = Tensor<T>::zeros(x.shape);
    dw = Tensor<T>::zeros(x.shape);
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            for (int y = 0; y < H; ++y) {
                for (int xo = 0; xo < W; ++xo) {
                    const T v = x.at4(b, c, y, xo);
                    if (c + 1 < C) dc.at4(b, c, y, xo) = x.at4(b, c + 1, y, xo) - v;
                    if (y + 1 < H) dh.at4(b, c, y, xo) = x.at4(b, c, y + 1, xo) - v;
                    if (xo + 1 < W) dw.at4(b, c, y, xo) = x.at4(b, c, y, xo + 1) - v;
                }
            }
        }
    }
}

// Accumulates the adjoint of a forward-difference field back onto x.
template <typename T>
void scatter_diff_grad_c(const Tensor<T>& gd, Tensor<T>& gx) {
    const int B = gd.dim(0), C = gd.dim(1), H = gd.dim(2), W = gd.dim(3);
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c + 1 < C; ++c) {
            for (int y = 0; y < H; ++y) {
                for (int xo = 0; xo < W; ++xo) {
                    const T g = gd.at4(b, c, y, xo);
                    gx.at4(b, c + 1, y, xo) += g;
                    gx.at4(b, c, y, xo) -= g;
                }
            }
        }
    }
}

template <typename T>
void scatter_diff_grad_h(const Tensor<T>& gd, Tensor<T>& gx) {
    const int B = gd.dim(0), C = gd.dim(1), H = gd.dim(2), W = gd.dim(3);
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            for (int y = 0; y + 1 < H; ++y) {
                for (int xo = 0; xo < W; ++xo) {
                    const T g = gd.at4(b, c, y, xo);
                    gx.at4(b, c, y + 1, xo) += g;
                    gx.at4(b, c, y, xo) -= g;
                }
            }
        }
    }
}

template <typename T>
void scatter_diff_grad_w(const Tensor<T>& gd, Tensor<T>& gx) {
    const int B = gd.dim(0), C = gd.dim(1), H = gd.dim(2), W = gd.dim(3);
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            for (int y = 0; y < H; ++y) {
                for (int xo = 0; xo + 1 < W; ++xo) {
                    const T g = gd.at4(b, c, y, xo);
                    gx.at4(b, c, y, xo + 1) += g;
                    gx.at4(b, c, y, xo) -= g;
                }
            }
        }
    }
}

}  // namespace detail

/// Per-element gradient magnitude sqrt(dh^2 + dw^2 + dc^2) with forward
/// differences and replicate edges. Accepts [C, H, W] or [B, C, H, W].
template <typename T>
Tensor<T> gradient_map(const Tensor<T>& x) {
    require(x.ndim() == 3 || x.ndim() == 4, "gradient map expects a 3-D or 4-D array");
    Tensor<T> v = x;
    const bool batched = x.ndim() == 4;
    if (!batched) v.shape = {1, x.dim(0), x.dim(1), x.dim(2)};
    Tensor<T> dc, dh, dw;
    detail::forward_diffs(v, dc, dh, dw);
    Tensor<T> m(v.shape);
    for (std::size_t i = 0; i < m.numel(); ++i) {
        m.data[i] = std::sqrt(dc.data[i] * dc.data[i] + dh.data[i] * dh.data[i] +
                              dw.data[i] * dw.data[i]);
    }
    if (!batched) m.shape = x.shape;
    return m;
}

// ---------------------------------------------------------------------------
// Fused scalar loss nodes over [B, C, H, W] batches.
// ---------------------------------------------------------------------------

/// Mean absolute difference over all elements.
template <typename T>
Var<T> l1_loss(Var<T> sr, Var<T> hr) {
    require(sr.val().same_shape(hr.val()), "loss inputs must have identical shapes");
    Tape<T>& t = *sr.tape;
    const Tensor<T>& a = sr.val();
    const Tensor<T>& b = hr.val();
    const T inv_n = T(1) / static_cast<T>(a.numel());
    T acc = T(0);
    for (std::size_t i = 0; i < a.numel(); ++i) acc += std::abs(a.data[i] - b.data[i]);
    Tensor<T> out({1}, acc * inv_n);
    int pa = sr.id, pb = hr.id;
    int id = t.make_node(std::move(out), {pa, pb}, [pa, pb, inv_n](Tape<T>& tp, int self) {
        const T g = tp.grad_view(self).data[0] * inv_n;
        const Tensor<T>& av = tp.val(pa);
        const Tensor<T>& bv = tp.val(pb);
        Tensor<T>* ga = tp.needs_grad(pa) ? &tp.grad(pa) : nullptr;
        Tensor<T>* gb = tp.needs_grad(pb) ? &tp.grad(pb) : nullptr;
        for (std::size_t i = 0; i < av.numel(); ++i) {
            const T s = detail::sign_of(av.data[i] - bv.data[i]) * g;
            if (ga) ga->data[i] += s;
            if (gb) gb->data[i] -= s;
        }
    });
    return {&t, id};
}

/// Mean per-pixel spectral angle in [0, 1]: arccos of the clamped cosine
/// between the SR and HR spectra, divided by pi. Pixels whose spectrum has
/// exactly zero norm in either input are excluded; their count is reported
/// through excluded_count. With cosine_form the clamped cosine itself is
/// averaged (divided by pi) instead of the angle.
template <typename T>
Var<T> spectral_loss(Var<T> sr, Var<T> hr, bool cosine_form = false,
                     int* excluded_count = nullptr) {
    require(sr.val().same_shape(hr.val()), "loss inputs must have identical shapes");
    Tape<T>& t = *sr.tape;
    const Tensor<T>& a = sr.val();
    const Tensor<T>& b = hr.val();
    const int B = a.dim(0), C = a.dim(1), H = a.dim(2), W = a.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const T lo = T(-1) + static_cast<T>(kSpectralCosineClamp);
    const T hi = T(1) - static_cast<T>(kSpectralCosineClamp);
    const T pi = static_cast<T>(M_PI);

    T acc = T(0);
    long long used = 0;
    for (int bi = 0; bi < B; ++bi) {
        for (std::size_t px = 0; px < plane; ++px) {
            const std::size_t base = static_cast<std::size_t>(bi) * C * plane + px;
            T dot = T(0), na = T(0), nb = T(0);
            for (int c = 0; c < C; ++c) {
                const T u = a.data[base + static_cast<std::size_t>(c) * plane];
                const T v = b.data[base + static_cast<std::size_t>(c) * plane];
                dot += u * v;
                na += u * u;
                nb += v * v;
            }
            if (na == T(0) || nb == T(0)) continue;
            ++used;
            T cosv = dot / (std::sqrt(na) * std::sqrt(nb));
            cosv = std::min(hi, std::max(lo, cosv));
            acc += cosine_form ? cosv / pi : std::acos(cosv) / pi;
        }
    }
    if (excluded_count) {
        *excluded_count =
            static_cast<int>(static_cast<long long>(B) * static_cast<long long>(plane) - used);
    }
    Tensor<T> out({1}, used > 0 ? acc / static_cast<T>(used) : T(0));
    int pa = sr.id, pb = hr.id;
    int id = t.make_node(
        std::move(out), {pa, pb},
        [pa, pb, B, C, plane, lo, hi, pi, used, cosine_form](Tape<T>& tp, int self) {
            if (used == 0) return;
            const T g = tp.grad_view(self).data[0] / static_cast<T>(used);
            const Tensor<T>& av = tp.val(pa);
            const Tensor<T>& bv = tp.val(pb);
            Tensor<T>* ga = tp.needs_grad(pa) ? &tp.grad(pa) : nullptr;
            Tensor<T>* gb = tp.needs_grad(pb) ? &tp.grad(pb) : nullptr;
            for (int bi = 0; bi < B; ++bi) {
                for (std::size_t px = 0; px < plane; ++px) {
                    const std::size_t base = static_cast<std::size_t>(bi) * C * plane + px;
                    T dot = T(0), na = T(0), nb = T(0);
                    for (int c = 0; c < C; ++c) {
                        const T u = av.data[base + static_cast<std::size_t>(c) * plane];
                        const T v = bv.data[base + static_cast<std::size_t>(c) * plane];
                        dot += u * v;
                        na += u * u;
                        nb += v * v;
                    }
                    if (na == T(0) || nb == T(0)) continue;
                    const T sa = std::sqrt(na), sb = std::sqrt(nb);
                    const T cosv = dot / (sa * sb);
                    if (cosv < lo || cosv > hi) continue;  // clamp kills the gradient
                    T dcos;
                    if (cosine_form) {
                        dcos = g / pi;
                    } else {
                        dcos = -g / (pi * std::sqrt(std::max(T(1) - cosv * cosv, T(0))));
                    }
                    for (int c = 0; c < C; ++c) {
                        const std::size_t ix = base + static_cast<std::size_t>(c) * plane;
                        const T u = av.data[ix];
                        const T v = bv.data[ix];
                        if (ga) ga->data[ix] += dcos * (v / (sa * sb) - cosv * u / na);
                        if (gb) gb->data[ix] += dcos * (u / (sa * sb) - cosv * v / nb);
                    }
                }
            }
        });
    return {&t, id};
}

/// Mean absolute difference between the gradient-magnitude maps of the two
/// inputs.
template <typename T>
Var<T> gradient_loss(Var<T> sr, Var<T> hr) {
    require(sr.val().same_shape(hr.val()), "loss inputs must have identical shapes");
    Tape<T>& t = *sr.tape;
    Tensor<T> ma = gradient_map(sr.val());
    Tensor<T> mb = gradient_map(hr.val());
    const T inv_n = T(1) / static_cast<T>(ma.numel());
    T acc = T(0);
    for (std::size_t i = 0; i < ma.numel(); ++i) acc += std::abs(ma.data[i] - mb.data[i]);
    Tensor<T> out({1}, acc * inv_n);
    int pa = sr.id, pb = hr.id;
    int id = t.make_node(std::move(out), {pa, pb}, [pa, pb, inv_n](Tape<T>& tp, int self) {
        const T g = tp.grad_view(self).data[0] * inv_n;
        // d|m(x) - m(o)| / dx = sign(m(x) - m(o)) * diffs(x) / m(x), scattered
        // back through the forward differences; m(x) = 0 pins the subgradient
        // at zero.
        auto backprop = [&](int primary, int other) {
            if (!tp.needs_grad(primary)) return;
            const Tensor<T>& x = tp.val(primary);
            Tensor<T> dc, dh, dw;
            detail::forward_diffs(x, dc, dh, dw);
            Tensor<T> mx = gradient_map(x);
            Tensor<T> mo = gradient_map(tp.val(other));
            Tensor<T> gdc = Tensor<T>::zeros(x.shape);
            Tensor<T> gdh = Tensor<T>::zeros(x.shape);
            Tensor<T> gdw = Tensor<T>::zeros(x.shape);
            for (std::size_t i = 0; i < mx.numel(); ++i) {
                if (mx.data[i] == T(0)) continue;
                const T s = g * detail::sign_of(mx.data[i] - mo.data[i]) / mx.data[i];
                gdc.data[i] = s * dc.data[i];
                gdh.data[i] = s * dh.data[i];
                gdw.data[i] = s * dw.data[i];
            }
            Tensor<T>& gx = tp.grad(primary);
            detail::scatter_diff_grad_c(gdc, gx);
            detail::scatter_diff_grad_h(gdh, gx);
            detail::scatter_diff_grad_w(gdw, gx);
        };
        backprop(pa, pb);
        backprop(pb, pa);
    });
    return {&t, id};
}

/// Spatial-spectral total variation: mean over all elements of the summed
/// absolute forward differences along band, height, and width.
template <typename T>
Var<T> sstv_loss(Var<T> sr) {
    Tape<T>& t = *sr.tape;
    Tensor<T> dc, dh, dw;
    detail::forward_diffs(sr.val(), dc, dh, dw);
    const T inv_n = T(1) / static_cast<T>(sr.val().numel());
    T acc = T(0);
    for (std::size_t i = 0; i < dc.numel(); ++i) {
        acc += std::abs(dc.data[i]) + std::abs(dh.data[i]) + std::abs(dw.data[i]);
    }
    Tensor<T> out({1}, acc * inv_n);
    int pa = sr.id;
    int id = t.make_node(std::move(out), {pa}, [pa, inv_n](Tape<T>& tp, int self) {
        const T g = tp.grad_view(self).data[0] * inv_n;
        const Tensor<T>& x = tp.val(pa);
        Tensor<T> dc, dh, dw;
        detail::forward_diffs(x, dc, dh, dw);
        for (std::size_t i = 0; i < dc.numel(); ++i) {
            dc.data[i] = g * detail::sign_of(dc.data[i]);
            dh.data[i] = g * detail::sign_of(dh.data[i]);
            dw.data[i] = g * detail::sign_of(dw.data[i]);
        }
        Tensor<T>& gx = tp.grad(pa);
        detail::scatter_diff_grad_c(dc, gx);
        detail::scatter_diff_grad_h(dh, gx);
        detail::scatter_diff_grad_w(dw, gx);
    });
    return {&t, id};
}

/// Fixed linear combination of scalar nodes.
template <typename T>
Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<T>& weights) {
    require(!terms.empty() && terms.size() == weights.size(), "weighted sum arity mismatch");
    Tape<T>& t = *terms[0].tape;
    T acc = T(0);
    std::vector<int> parents;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        require(terms[i].val().numel() == 1, "weighted sum expects scalar terms");
        acc += weights[i] * terms[i].val().data[0];
        parents.push_back(terms[i].id);
    }
    Tensor<T> out({1}, acc);
    int id = t.make_node(std::move(out), parents, [parents, weights](Tape<T>& tp, int self) {
        const T g = tp.grad_view(self).data[0];
        for (std::size_t i = 0; i < parents.size(); ++i) {
            if (tp.needs_grad(parents[i])) tp.grad(parents[i]).data[0] += g * weights[i];
        }
    });
    return {&t, id};
}

struct LossWeights {
    double spectral = 0.5;
    double gradient = 0.1;
    double sstv = 1e-3;
};

struct LossReport {
    double l1 = 0.0;
    double l_spe = 0.0;
    double l_gra = 0.0;
    double l_sstv = 0.0;
    double total = 0.0;
    int spectral_excluded = 0;  // zero-norm pixels skipped by the spectral term
};

/// Builds all four terms plus the weighted total on the tape and reports
/// their values. The total node is returned for backward().
template <typename T>
std::pair<Var<T>, LossReport> total_loss(Var<T> sr, Var<T> hr, const LossWeights& w,
                                         bool cosine_form = false) {
    LossReport report;
    int excluded = 0;
    Var<T> l1 = l1_loss(sr, hr);
    Var<T> spe = spectral_loss(sr, hr, cosine_form, &excluded);
    Var<T> gra = gradient_loss(sr, hr);
    Var<T> tv = sstv_loss(sr);
    Var<T> total = weighted_sum<T>(
        {l1, spe, gra, tv},
        {T(1), static_cast<T>(w.spectral), static_cast<T>(w.gradient), static_cast<T>(w.sstv)});
    report.l1 = static_cast<double>(l1.val().data[0]);
    report.l_spe = static_cast<double>(spe.val().data[0]);
    report.l_gra = static_cast<double>(gra.val().data[0]);
    report.l_sstv = static_cast<double>(tv.val().data[0]);
    report.total = static_cast<double>(total.val().data[0]);
    report.spectral_excluded = excluded;
    return {total, report};
}

}  // namespace efgn
