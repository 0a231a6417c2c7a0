// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <vector>

#include "efgn/autograd.hpp"
#include "efgn/tensor.hpp"

namespace efgn {

/// Convolutions are stride-1 with symmetric zero padding of
/// ((k - 1) * dilation) / 2 per spatial axis, so odd kernels preserve the
/// spatial size. Weights are [out, in/groups, k...]; bias is [out] and may
/// be an empty tensor to skip.

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                         int groups, int dil_h, int dil_w) {
    require(x.ndim() == 4 && w.ndim() == 4, "conv2d: expected 4-D input and weight");
    const int B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = w.dim(0), Cg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    require(groups >= 1 && Cin % groups == 0 && Cout % groups == 0,
            "conv2d: channels not divisible by groups");
    require(Cg == Cin / groups, "conv2d: weight in-channel dim mismatch");
    require(bias.data.empty() || (bias.ndim() == 1 && bias.dim(0) == Cout),
            "conv2d: bias shape mismatch");
    const int ph = ((kh - 1) * dil_h) / 2;
    const int pw = ((kw - 1) * dil_w) / 2;
    const int OH = H + 2 * ph - dil_h * (kh - 1);
    const int OW = W + 2 * pw - dil_w * (kw - 1);
    require(OH > 0 && OW > 0, "conv2d: kernel larger than padded input");

    Tensor<T> out({B, Cout, OH, OW});
    const int co_per = Cout / groups;
    for (int b = 0; b < B; ++b) {
        for (int co = 0; co < Cout; ++co) {
            const int ci0 = (co / co_per) * Cg;
            const T bv = bias.data.empty() ? T(0) : bias.data[static_cast<std::size_t>(co)];
            for (int oy = 0; oy < OH; ++oy) {
                T* orow = &out.data[((static_cast<std::size_t>(b) * Cout + co) * OH + oy) * OW];
                for (int ox = 0; ox < OW; ++ox) orow[ox] = bv;
                for (int cg = 0; cg < Cg; ++cg) {
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy - ph + ky * dil_h;
                        if (iy < 0 || iy >= H) continue;
                        const T* xrow =
                            &x.data[((static_cast<std::size_t>(b) * Cin + ci0 + cg) * H + iy) * W];
                        const T* wrow =
                            &w.data[((static_cast<std::size_t>(co) * Cg + cg) * kh + ky) * kw];
                        for (int kx = 0; kx < kw; ++kx) {
                            const int off = -pw + kx * dil_w;
                            const int lo = std::max(0, -off);
                            const int hi = std::min(OW, W - off);
                            const T wv = wrow[kx];
                            for (int ox = lo; ox < hi; ++ox) orow[ox] += wv * xrow[ox + off];
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, int groups, int dil_h, int dil_w,
                     const Tensor<T>& gout, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
    const int B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = w.dim(0), Cg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int ph = ((kh - 1) * dil_h) / 2;
    const int pw = ((kw - 1) * dil_w) / 2;
    const int OH = gout.dim(2), OW = gout.dim(3);
    const int co_per = Cout / groups;
    for (int b = 0; b < B; ++b) {
        for (int co = 0; co < Cout; ++co) {
            const int ci0 = (co / co_per) * Cg;
            for (int oy = 0; oy < OH; ++oy) {
                const T* grow =
                    &gout.data[((static_cast<std::size_t>(b) * Cout + co) * OH + oy) * OW];
                if (gb) {
                    T s = T(0);
                    for (int ox = 0; ox < OW; ++ox) s += grow[ox];
                    gb->data[static_cast<std::size_t>(co)] += s;
                }
                for (int cg = 0; cg < Cg; ++cg) {
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy - ph + ky * dil_h;
                        if (iy < 0 || iy >= H) continue;
                        const std::size_t xoff =
                            ((static_cast<std::size_t>(b) * Cin + ci0 + cg) * H + iy) * W;
                        const std::size_t woff =
                            ((static_cast<std::size_t>(co) * Cg + cg) * kh + ky) * kw;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int off = -pw + kx * dil_w;
                            const int lo = std::max(0, -off);
                            const int hi = std::min(OW, W - off);
                            if (gx) {
                                T* gxrow = &gx->data[xoff];
                                const T wv = w.data[woff + kx];
                                for (int ox = lo; ox < hi; ++ox) {
                                    gxrow[ox + off] += wv * grow[ox];
                                }
                            }
                            if (gw) {
                                const T* xrow = &x.data[xoff];
                                T s = T(0);
                                for (int ox = lo; ox < hi; ++ox) s += grow[ox] * xrow[ox + off];
                                gw->data[woff + kx] += s;
                            }
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                         int groups, int dil_d, int dil_h, int dil_w) {
    require(x.ndim() == 5 && w.ndim() == 5, "conv3d: expected 5-D input and weight");
    const int B = x.dim(0), Cin = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
    const int Cout = w.dim(0), Cg = w.dim(1), kd = w.dim(2), kh = w.dim(3), kw = w.dim(4);
    require(groups >= 1 && Cin % groups == 0 && Cout % groups == 0,
            "conv3d: channels not divisible by groups");
    require(Cg == Cin / groups, "conv3d: weight in-channel dim mismatch");
    require(bias.data.empty() || (bias.ndim() == 1 && bias.dim(0) == Cout),
            "conv3d: bias shape mismatch");
    const int pd = ((kd - 1) * dil_d) / 2;
    const int ph = ((kh - 1) * dil_h) / 2;
    const int pw = ((kw - 1) * dil_w) / 2;
    const int OD = D + 2 * pd - dil_d * (kd - 1);
    const int OH = H + 2 * ph - dil_h * (kh - 1);
    const int OW = W + 2 * pw - dil_w * (kw - 1);
    require(OD > 0 && OH > 0 && OW > 0, "conv3d: kernel larger than padded input");

    Tensor<T> out({B, Cout, OD, OH, OW});
    const int co_per = Cout / groups;
    for (int b = 0; b < B; ++b) {
        for (int co = 0; co < Cout; ++co) {
            const int ci0 = (co / co_per) * Cg;
            const T bv = bias.data.empty() ? T(0) : bias.data[static_cast<std::size_t>(co)];
            for (int od = 0; od < OD; ++od) {
                for (int oy = 0; oy < OH; ++oy) {
                    T* orow = &out.data[(((static_cast<std::size_t>(b) * Cout + co) * OD + od) *
                                             OH + oy) * OW];
                    for (int ox = 0; ox < OW; ++ox) orow[ox] = bv;
                    for (int cg = 0; cg < Cg; ++cg) {
                        for (int kz = 0; kz < kd; ++kz) {
                            const int id = od - pd + kz * dil_d;
                            if (id < 0 || id >= D) continue;
                            for (int ky = 0; ky < kh; ++ky) {
                                const int iy = oy - ph + ky * dil_h;
                                if (iy < 0 || iy >= H) continue;
                                const T* xrow =
                                    &x.data[(((static_cast<std::size_t>(b) * Cin + ci0 + cg) * D +
                                                  id) * H + iy) * W];
                                const T* wrow =
                                    &w.data[(((static_cast<std::size_t>(co) * Cg + cg) * kd + kz) *
                                                 kh + ky) * kw];
                                for (int kx = 0; kx < kw; ++kx) {
                                    const int off = -pw + kx * dil_w;
                                    const int lo = std::max(0, -off);
                                    const int hi = std::min(OW, W - off);
                                    const T wv = wrow[kx];
                                    for (int ox = lo; ox < hi; ++ox) {
                                        orow[ox] += wv * xrow[ox + off];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
void conv3d_backward(const Tensor<T>& x, const Tensor<T>& w, int groups, int dil_d, int dil_h,
                     int dil_w, const Tensor<T>& gout, Tensor<T>* gx, Tensor<T>* gw,
                     Tensor<T>* gb) {
    const int B = x.dim(0), Cin = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
    const int Cout = w.dim(0), Cg = w.dim(1), kd = w.dim(2), kh = w.dim(3), kw = w.dim(4);
    const int pd = ((kd - 1) * dil_d) / 2;
    const int ph = ((kh - 1) * dil_h) / 2;
    const int pw = ((kw - 1) * dil_w) / 2;
    const int OD = gout.dim(2), OH = gout.dim(3), OW = gout.dim(4);
    const int co_per = Cout / groups;
    for (int b = 0; b < B; ++b) {
        for (int co = 0; co < Cout; ++co) {
            const int ci0 = (co / co_per) * Cg;
            for (int od = 0; od < OD; ++od) {
                for (int oy = 0; oy < OH; ++oy) {
                    const T* grow =
                        &gout.data[(((static_cast<std::size_t>(b) * Cout + co) * OD + od) * OH +
                                        oy) * OW];
                    if (gb) {
                        T s = T(0);
                        for (int ox = 0; ox < OW; ++ox) s += grow[ox];
                        gb->data[static_cast<std::size_t>(co)] += s;
                    }
                    for (int cg = 0; cg < Cg; ++cg) {
                        for (int kz = 0; kz < kd; ++kz) {
                            const int id = od - pd + kz * dil_d;
                            if (id < 0 || id >= D) continue;
                            for (int ky = 0; ky < kh; ++ky) {
                                const int iy = oy - ph + ky * dil_h;
                                if (iy < 0 || iy >= H) continue;
                                const std::size_t xoff =
                                    (((static_cast<std::size_t>(b) * Cin + ci0 + cg) * D + id) * H +
                                         iy) * W;
                                const std::size_t woff =
                                    (((static_cast<std::size_t>(co) * Cg + cg) * kd + kz) * kh +
                                         ky) * kw;
                                for (int kx = 0; kx < kw; ++kx) {
                                    const int off = -pw + kx * dil_w;
                                    const int lo = std::max(0, -off);
                                    const int hi = std::min(OW, W - off);
                                    if (gx) {
                                        T* gxrow = &gx->data[xoff];
                                        const T wv = w.data[woff + kx];
                                        for (int ox = lo; ox < hi; ++ox) {
                                            gxrow[ox + off] += wv * grow[ox];
                                        }
                                    }
                                    if (gw) {
                                        const T* xrow = &x.data[xoff];
                                        T s = T(0);
                                        for (int ox = lo; ox < hi; ++ox) {
                                            s += grow[ox] * xrow[ox + off];
                                        }
                                        gw->data[woff + kx] += s;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Tape wrappers
// ---------------------------------------------------------------------------

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> bias, int groups = 1, int dil_h = 1, int dil_w = 1) {
    Tape<T>& t = *x.tape;
    Tensor<T> out = conv2d_forward(x.val(), w.val(), bias.val(), groups, dil_h, dil_w);
    int px = x.id, pw = w.id, pb = bias.id;
    int id = t.make_node(std::move(out), {px, pw, pb},
                         [px, pw, pb, groups, dil_h, dil_w](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_view(self);
        Tensor<T>* gx = tp.needs_grad(px) ? &tp.grad(px) : nullptr;
        Tensor<T>* gw = tp.needs_grad(pw) ? &tp.grad(pw) : nullptr;
        Tensor<T>* gb =
            (tp.needs_grad(pb) && !tp.val(pb).data.empty()) ? &tp.grad(pb) : nullptr;
        conv2d_backward(tp.val(px), tp.val(pw), groups, dil_h, dil_w, g, gx, gw, gb);
    });
    return {&t, id};
}

template <typename T>
Var<T> conv3d(Var<T> x, Var<T> w, Var<T> bias, int groups = 1, int dil_d = 1, int dil_h = 1,
              int dil_w = 1) {
    Tape<T>& t = *x.tape;
    Tensor<T> out = conv3d_forward(x.val(), w.val(), bias.val(), groups, dil_d, dil_h, dil_w);
    int px = x.id, pw = w.id, pb = bias.id;
    int id = t.make_node(std::move(out), {px, pw, pb},
                         [px, pw, pb, groups, dil_d, dil_h, dil_w](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_view(self);
        Tensor<T>* gx = tp.needs_grad(px) ? &tp.grad(px) : nullptr;
        Tensor<T>* gw = tp.needs_grad(pw) ? &tp.grad(pw) : nullptr;
        Tensor<T>* gb =
            (tp.needs_grad(pb) && !tp.val(pb).data.empty()) ? &tp.grad(pb) : nullptr;
        conv3d_backward(tp.val(px), tp.val(pw), groups, dil_d, dil_h, dil_w, g, gx, gw, gb);
    });
    return {&t, id};
}

}  // namespace efgn
