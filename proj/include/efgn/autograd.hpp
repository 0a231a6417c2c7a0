// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "efgn/tensor.hpp"

namespace efgn {

/// Reverse-mode tape. Nodes are appended in forward order, so creation
/// order is already a topological order and backward() is a single
/// reverse sweep. One tape per forward/backward pass; tapes are cheap
/// and discarded after the optimizer step.
template <typename T>
class Tape {
public:
    using BackFn = std::function<void(Tape&, int)>;

    struct Node {
        Tensor<T> value;
        Tensor<T> grad;  // allocated on first accumulation
        BackFn back;
        bool requires_grad = false;
    };

    int leaf(Tensor<T> value, bool requires_grad = false) {
        nodes_.push_back(Node{std::move(value), {}, nullptr, requires_grad});
        return static_cast<int>(nodes_.size()) - 1;
    }

    /// Custom node: `back(tape, self)` must read grad(self) and accumulate
    /// into each parent that needs_grad. requires_grad is inherited.
    int make_node(Tensor<T> value, const std::vector<int>& parents, BackFn back) {
        bool rg = false;
        for (int p : parents) rg = rg || nodes_[p].requires_grad;
        nodes_.push_back(Node{std::move(value), {}, rg ? std::move(back) : nullptr, rg});
        return static_cast<int>(nodes_.size()) - 1;
    }

    const Tensor<T>& val(int id) const { return nodes_[id].value; }
    bool needs_grad(int id) const { return nodes_[id].requires_grad; }

    bool has_grad(int id) const { return !nodes_[id].grad.data.empty(); }

    /// Gradient buffer, zero-initialized on first touch.
    Tensor<T>& grad(int id) {
        Node& n = nodes_[id];
        if (n.grad.data.empty()) n.grad = Tensor<T>::zeros(n.value.shape);
        return n.grad;
    }

    const Tensor<T>& grad_view(int id) const { return nodes_[id].grad; }

    void backward(int root) {
        require(nodes_[root].value.numel() == 1, "backward root must be scalar");
        grad(root).data[0] = T(1);
        run_backward(root);
    }

    void backward_with(int root, const Tensor<T>& seed) {
        require(seed.shape == nodes_[root].value.shape, "backward seed shape mismatch");
        Tensor<T>& g = grad(root);
        for (std::size_t i = 0; i < seed.numel(); ++i) g.data[i] += seed.data[i];
        run_backward(root);
    }

    std::size_t size() const { return nodes_.size(); }

private:
    void run_backward(int root) {
        for (int id = root; id >= 0; --id) {
            Node& n = nodes_[id];
            if (n.back && !n.grad.data.empty()) n.back(*this, id);
        }
    }

    std::vector<Node> nodes_;
};

template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    const Tensor<T>& val() const { return tape->val(id); }
    bool defined() const { return tape != nullptr; }
};

template <typename T>
Var<T> make_leaf(Tape<T>& tape, Tensor<T> value, bool requires_grad = false) {
    return {&tape, tape.leaf(std::move(value), requires_grad)};
}

namespace detail {

// Collapses [B, C, rest...] indexing used by the channel-axis ops.
inline void channel_dims(const std::vector<int>& shape, std::size_t& batch, int& chan,
                         std::size_t& inner) {
    require(shape.size() >= 2, "channel ops need at least 2-D tensors");
    batch = static_cast<std::size_t>(shape[0]);
    chan = shape[1];
    inner = 1;
    for (std::size_t i = 2; i < shape.size(); ++i) inner *= static_cast<std::size_t>(shape[i]);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    require(a.val().same_shape(b.val()), "add: shape mismatch " + a.val().shape_str() + " vs " +
                                             b.val().shape_str());
    Tape<T>& t = *a.tape;
    Tensor<T> out = a.val();
    const Tensor<T>& bv = b.val();
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += bv.data[i];
    int pa = a.id, pb = b.id;
    int id = t.make_node(std::move(out), {pa, pb}, [pa, pb](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_view(self);
        if (tp.needs_grad(pa)) {
            Tensor<T>& ga = tp.grad(pa);
            for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
        }
        if (tp.needs_grad(pb)) {
            Tensor<T>& gb = tp.grad(pb);
            for (std::size_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i];
        }
    });
    return {&t, id};
}

/// Gate: elementwise product of two branches.
template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    require(a.val().same_shape(b.val()), "gate: shape mismatch " + a.val().shape_str() + " vs " +
                                             b.val().shape_str());
    Tape<T>& t = *a.tape;
    Tensor<T> out = a.val();
    const Tensor<T>& bv = b.val();
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= bv.data[i];
    int pa = a.id, pb = b.id;
    int id = t.make_node(std::move(out), {pa, pb}, [pa, pb](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_view(self);
        const Tensor<T>& av = tp.val(pa);
        const Tensor<T>& bv2 = tp.val(pb);
        if (tp.needs_grad(pa)) {
            Tensor<T>& ga = tp.grad(pa);
            for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * bv2.data[i];
        }
        if (tp.needs_grad(pb)) {
            Tensor<T>& gb = tp.grad(pb);
            for (std::size_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i] * av.data[i];
        }
    });
    return {&t, id};
}

template <typename T>
Var<T> leaky_relu(Var<T> x, T slope) {
    Tape<T>& t = *x.tape;
    Tensor<T> out = x.val();
    for (T& v : out.data) v = v >= T(0) ? v : slope * v;
    int px = x.id;
    int id = t.make_node(std::move(out), {px}, [px, slope](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_view(self);
        const Tensor<T>& xv = tp.val(px);
        Tensor<T>& gx = tp.grad(px);
        for (std::size_t i = 0; i < g.numel(); ++i) {
            gx.data[i] += xv.data[i] >= T(0) ? g.data[i] : slope * g.data[i];
        }
    });
    return {&t, id};
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
    Tape<T>& t = *x.tape;
    Tensor<T> out = x.val();
    for (T& v : out.data) v = T(1) / (T(1) + std::exp(-v));
    int px = x.id;
    int id = t.make_node(std::move(out), {px}, [px](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_view(self);
        const Tensor<T>& y = tp.val(self);
        Tensor<T>& gx = tp.grad(px);
        for (std::size_t i = 0; i < g.numel(); ++i) {
            gx.data[i] += g.data[i] * y.data[i] * (T(1) - y.data[i]);
        }
    });
    return {&t, id};
}

// ---------------------------------------------------------------------------
// Channel-axis ops (work on 4-D and 5-D maps alike)
// ---------------------------------------------------------------------------

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
    require(!xs.empty(), "concat: empty input list");
    Tape<T>& t = *xs[0].tape;
    std::size_t batch, inner;
    int chan;
    detail::channel_dims(xs[0].val().shape, batch, chan, inner);
    int total = 0;
    for (const Var<T>& v : xs) {
        std::size_t b2, i2;
        int c2;
        detail::channel_dims(v.val().shape, b2, c2, i2);
        require(b2 == batch && i2 == inner && v.val().ndim() == xs[0].val().ndim(),
                "concat: incompatible shapes");
        total += c2;
    }
    std::vector<int> oshape = xs[0].val().shape;
    oshape[1] = total;
    Tensor<T> out(oshape);
    std::vector<int> parents;
    std::vector<int> chans;
    for (const Var<T>& v : xs) {
        parents.push_back(v.id);
        chans.push_back(v.val().dim(1));
    }
    for (std::size_t b = 0; b < batch; ++b) {
        std::size_t off = b * static_cast<std::size_t>(total) * inner;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            const Tensor<T>& src = xs[k].val();
            std::size_t n = static_cast<std::size_t>(chans[k]) * inner;
            std::size_t soff = b * n;
            for (std::size_t i = 0; i < n; ++i) out.data[off + i] = src.data[soff + i];
            off += n;
        }
    }
    int id = t.make_node(std::move(out), parents,
                         [parents, chans, batch, inner, total](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_view(self);
        for (std::size_t b = 0; b < batch; ++b) {
            std::size_t off = b * static_cast<std::size_t>(total) * inner;
            for (std::size_t k = 0; k < parents.size(); ++k) {
                std::size_t n = static_cast<std::size_t>(chans[k]) * inner;
                if (tp.needs_grad(parents[k])) {
                    Tensor<T>& gp = tp.grad(parents[k]);
                    std::size_t soff = b * n;
                    for (std::size_t i = 0; i < n; ++i) gp.data[soff + i] += g.data[off + i];
                }
                off += n;
            }
        }
    });
    return {&t, id};
}

template <typename T>
Var<T> slice_channels(Var<T> x, int c0, int c1) {
    Tape<T>& t = *x.tape;
    std::size_t batch, inner;
    int chan;
    detail::channel_dims(x.val().shape, batch, chan, inner);
    require(0 <= c0 && c0 < c1 && c1 <= chan, "slice: channel range out of bounds");
    std::vector<int> oshape = x.val().shape;
    oshape[1] = c1 - c0;
    Tensor<T> out(oshape);
    const Tensor<T>& xv = x.val();
    std::size_t width = static_cast<std::size_t>(c1 - c0) * inner;
    for (std::size_t b = 0; b < batch; ++b) {
        std::size_t soff = (b * chan + c0) * inner;
        std::size_t doff = b * width;
        for (std::size_t i = 0; i < width; ++i) out.data[doff + i] = xv.data[soff + i];
    }
    int px = x.id;
    int id = t.make_node(std::move(out), {px},
                         [px, batch, chan, inner, c0, width](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_view(self);
        Tensor<T>& gx = tp.grad(px);
        for (std::size_t b = 0; b < batch; ++b) {
            std::size_t doff = (b * chan + c0) * inner;
            std::size_t soff = b * width;
            for (std::size_t i = 0; i < width; ++i) gx.data[doff + i] += g.data[soff + i];
        }
    });
    return {&t, id};
}

/// Channel-shuffle permutation table: out channel j reads in channel
/// (j % pieces) * (C / pieces) + j / pieces, the reshape-to-(pieces,
/// C/pieces), transpose, flatten rule.
inline std::vector<int> shuffle_sources(int channels, int pieces) {
    require(pieces >= 1 && channels % pieces == 0,
            "channel shuffle: channel count not divisible by pieces");
    std::vector<int> src(static_cast<std::size_t>(channels));
    int per = channels / pieces;
    for (int j = 0; j < channels; ++j) {
        src[static_cast<std::size_t>(j)] = (j % pieces) * per + j / pieces;
    }
    return src;
}

template <typename T>
Var<T> channel_shuffle(Var<T> x, int pieces) {
    Tape<T>& t = *x.tape;
    std::size_t batch, inner;
    int chan;
    detail::channel_dims(x.val().shape, batch, chan, inner);
    std::vector<int> src = shuffle_sources(chan, pieces);
    Tensor<T> out(x.val().shape);
    const Tensor<T>& xv = x.val();
    for (std::size_t b = 0; b < batch; ++b) {
        for (int j = 0; j < chan; ++j) {
            std::size_t doff = (b * chan + j) * inner;
            std::size_t soff = (b * chan + src[j]) * inner;
            for (std::size_t i = 0; i < inner; ++i) out.data[doff + i] = xv.data[soff + i];
        }
    }
    int px = x.id;
    int id = t.make_node(std::move(out), {px},
                         [px, src, batch, chan, inner](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_view(self);
        Tensor<T>& gx = tp.grad(px);
        for (std::size_t b = 0; b < batch; ++b) {
            for (int j = 0; j < chan; ++j) {
                std::size_t doff = (b * chan + src[j]) * inner;
                std::size_t soff = (b * chan + j) * inner;
                for (std::size_t i = 0; i < inner; ++i) gx.data[doff + i] += g.data[soff + i];
            }
        }
    });
    return {&t, id};
}

template <typename T>
Var<T> reshape(Var<T> x, std::vector<int> shape) {
    Tape<T>& t = *x.tape;
    require(Tensor<T>::count(shape) == x.val().numel(), "reshape: element count mismatch");
    Tensor<T> out = x.val();
    out.shape = shape;
    int px = x.id;
    int id = t.make_node(std::move(out), {px}, [px](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_view(self);
        Tensor<T>& gx = tp.grad(px);
        for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i];
    });
    return {&t, id};
}

/// Squeeze: mean over all dims after the channel axis -> [B, C, 1, ...].
template <typename T>
Var<T> global_avg_pool(Var<T> x) {
    Tape<T>& t = *x.tape;
    std::size_t batch, inner;
    int chan;
    detail::channel_dims(x.val().shape, batch, chan, inner);
    std::vector<int> oshape = x.val().shape;
    for (std::size_t i = 2; i < oshape.size(); ++i) oshape[i] = 1;
    Tensor<T> out(oshape);
    const Tensor<T>& xv = x.val();
    for (std::size_t b = 0; b < batch; ++b) {
        for (int c = 0; c < chan; ++c) {
            std::size_t off = (b * chan + c) * inner;
            T s = T(0);
            for (std::size_t i = 0; i < inner; ++i) s += xv.data[off + i];
            out.data[b * chan + c] = s / static_cast<T>(inner);
        }
    }
    int px = x.id;
    int id = t.make_node(std::move(out), {px},
                         [px, batch, chan, inner](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_view(self);
        Tensor<T>& gx = tp.grad(px);
        T scale = T(1) / static_cast<T>(inner);
        for (std::size_t b = 0; b < batch; ++b) {
            for (int c = 0; c < chan; ++c) {
                T gv = g.data[b * chan + c] * scale;
                std::size_t off = (b * chan + c) * inner;
                for (std::size_t i = 0; i < inner; ++i) gx.data[off + i] += gv;
            }
        }
    });
    return {&t, id};
}

/// Rescale each channel of x by a per-(batch, channel) weight map of
/// shape [B, C, 1, ...] (the channel-attention apply step).
template <typename T>
Var<T> scale_channels(Var<T> x, Var<T> w) {
    Tape<T>& t = *x.tape;
    std::size_t batch, inner;
    int chan;
    detail::channel_dims(x.val().shape, batch, chan, inner);
    require(w.val().dim(0) == static_cast<int>(batch) && w.val().dim(1) == chan &&
                w.val().numel() == batch * static_cast<std::size_t>(chan),
            "scale_channels: weight map must be [B, C, 1...]");
    Tensor<T> out = x.val();
    const Tensor<T>& wv = w.val();
    for (std::size_t b = 0; b < batch; ++b) {
        for (int c = 0; c < chan; ++c) {
            T s = wv.data[b * chan + c];
            std::size_t off = (b * chan + c) * inner;
            for (std::size_t i = 0; i < inner; ++i) out.data[off + i] *= s;
        }
    }
    int px = x.id, pw = w.id;
    int id = t.make_node(std::move(out), {px, pw},
                         [px, pw, batch, chan, inner](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_view(self);
        const Tensor<T>& xv = tp.val(px);
        const Tensor<T>& wv2 = tp.val(pw);
        if (tp.needs_grad(px)) {
            Tensor<T>& gx = tp.grad(px);
            for (std::size_t b = 0; b < batch; ++b) {
                for (int c = 0; c < chan; ++c) {
                    T s = wv2.data[b * chan + c];
                    std::size_t off = (b * chan + c) * inner;
                    for (std::size_t i = 0; i < inner; ++i) gx.data[off + i] += g.data[off + i] * s;
                }
            }
        }
        if (tp.needs_grad(pw)) {
            Tensor<T>& gw = tp.grad(pw);
            for (std::size_t b = 0; b < batch; ++b) {
                for (int c = 0; c < chan; ++c) {
                    std::size_t off = (b * chan + c) * inner;
                    T s = T(0);
                    for (std::size_t i = 0; i < inner; ++i) s += g.data[off + i] * xv.data[off + i];
                    gw.data[b * chan + c] += s;
                }
            }
        }
    });
    return {&t, id};
}

/// Sub-pixel rearrangement: [B, C*r^2, H, W] -> [B, C, rH, rW], row-major
/// within each r x r cell.
template <typename T>
Var<T> depth_to_space(Var<T> x, int r) {
    Tape<T>& t = *x.tape;
    require(x.val().ndim() == 4, "depth_to_space: expected 4-D input");
    int b_n = x.val().dim(0), c_in = x.val().dim(1), h = x.val().dim(2), w = x.val().dim(3);
    require(c_in % (r * r) == 0, "depth_to_space: channels not divisible by r^2");
    int c_out = c_in / (r * r);
    Tensor<T> out({b_n, c_out, h * r, w * r});
    const Tensor<T>& xv = x.val();
    for (int b = 0; b < b_n; ++b) {
        for (int c = 0; c < c_out; ++c) {
            for (int y = 0; y < h * r; ++y) {
                for (int xx = 0; xx < w * r; ++xx) {
                    int src_c = c * r * r + (y % r) * r + (xx % r);
                    out.at4(b, c, y, xx) = xv.at4(b, src_c, y / r, xx / r);
                }
            }
        }
    }
    int px = x.id;
    int id = t.make_node(std::move(out), {px},
                         [px, b_n, c_out, h, w, r](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_view(self);
        Tensor<T>& gx = tp.grad(px);
        for (int b = 0; b < b_n; ++b) {
            for (int c = 0; c < c_out; ++c) {
                for (int y = 0; y < h * r; ++y) {
                    for (int xx = 0; xx < w * r; ++xx) {
                        int src_c = c * r * r + (y % r) * r + (xx % r);
                        gx.at4(b, src_c, y / r, xx / r) += g.at4(b, c, y, xx);
                    }
                }
            }
        }
    });
    return {&t, id};
}

}  // namespace efgn
