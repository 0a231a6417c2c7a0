// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "efgn/autograd.hpp"
#include "efgn/conv.hpp"
#include "efgn/core_types.hpp"
#include "efgn/rng.hpp"
#include "efgn/tensor.hpp"

namespace efgn {

inline constexpr double kLeakySlope = 0.2;

/// Flat registry of named parameter arrays. Registration order is the
/// order weights are initialized from the seed and the order they appear
/// in checkpoints, so it must stay stable.
template <typename T>
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor<T> value;
    };

    int add(const std::string& name, Tensor<T> value) {
        require(index_.find(name) == index_.end(), "duplicate parameter name: " + name);
        index_[name] = entries_.size();
        entries_.push_back({name, std::move(value)});
        return static_cast<int>(entries_.size()) - 1;
    }

    std::size_t size() const { return entries_.size(); }
    Entry& entry(int id) { return entries_[static_cast<std::size_t>(id)]; }
    const Entry& entry(int id) const { return entries_[static_cast<std::size_t>(id)]; }

    Tensor<T>& value(int id) { return entries_[static_cast<std::size_t>(id)].value; }
    const Tensor<T>& value(int id) const { return entries_[static_cast<std::size_t>(id)].value; }

    int find(const std::string& name) const {
        auto it = index_.find(name);
        require(it != index_.end(), "unknown parameter: " + name);
        return static_cast<int>(it->second);
    }

    std::size_t count_elements() const {
        std::size_t n = 0;
        for (const Entry& e : entries_) n += e.value.numel();
        return n;
    }

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

/// All parameters registered on one tape for a forward/backward pass.
template <typename T>
struct BoundParams {
    Tape<T>* tape = nullptr;
    std::vector<Var<T>> vars;  // parallel to the store's entries

    Var<T> operator[](int id) const { return vars[static_cast<std::size_t>(id)]; }
};

template <typename T>
BoundParams<T> bind(const ParamStore<T>& store, Tape<T>& tape, bool requires_grad) {
    BoundParams<T> bp;
    bp.tape = &tape;
    bp.vars.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        bp.vars.push_back(make_leaf(tape, store.entry(static_cast<int>(i)).value, requires_grad));
    }
    return bp;
}

/// Fan-in-scaled uniform init: weight and bias drawn from
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
void init_uniform(Tensor<T>& t, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (T& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

// ---------------------------------------------------------------------------
// Layers (non-template handle structs; parameter type comes from the store)
// ---------------------------------------------------------------------------

struct Conv2dLayer {
    int w = -1, b = -1;
    int groups = 1, dil_h = 1, dil_w = 1;

    template <typename T>
    static Conv2dLayer make(ParamStore<T>& ps, Rng& rng, const std::string& name, int cin,
                            int cout, int kh, int kw, int groups = 1, int dil_h = 1,
                            int dil_w = 1) {
        require(cin % groups == 0 && cout % groups == 0, "conv2d: channels not divisible by groups");
        Conv2dLayer layer;
        layer.groups = groups;
        layer.dil_h = dil_h;
        layer.dil_w = dil_w;
        Tensor<T> weight({cout, cin / groups, kh, kw});
        Tensor<T> bias({cout});
        const std::size_t fan_in = static_cast<std::size_t>(cin / groups) * kh * kw;
        init_uniform(weight, fan_in, rng);
        init_uniform(bias, fan_in, rng);
        layer.w = ps.add(name + ".weight", std::move(weight));
        layer.b = ps.add(name + ".bias", std::move(bias));
        return layer;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> x) const {
        return conv2d(x, bp[w], bp[b], groups, dil_h, dil_w);
    }
};

struct Conv3dLayer {
    int w = -1, b = -1;
    int groups = 1;

    template <typename T>
    static Conv3dLayer make(ParamStore<T>& ps, Rng& rng, const std::string& name, int cin,
                            int cout, int kd, int kh, int kw, int groups = 1) {
        require(cin % groups == 0 && cout % groups == 0, "conv3d: channels not divisible by groups");
        Conv3dLayer layer;
        layer.groups = groups;
        Tensor<T> weight({cout, cin / groups, kd, kh, kw});
        Tensor<T> bias({cout});
        const std::size_t fan_in = static_cast<std::size_t>(cin / groups) * kd * kh * kw;
        init_uniform(weight, fan_in, rng);
        init_uniform(bias, fan_in, rng);
        layer.w = ps.add(name + ".weight", std::move(weight));
        layer.b = ps.add(name + ".bias", std::move(bias));
        return layer;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> x) const {
        return conv3d(x, bp[w], bp[b], groups);
    }
};

/// Sequential 3x3 convolutions with ascending dilation rates, each followed
/// by a leaky rectifier. Channel count is preserved.
struct DilatedStack {
    std::vector<Conv2dLayer> layers;

    template <typename T>
    static DilatedStack make(ParamStore<T>& ps, Rng& rng, const std::string& name, int channels,
                             const std::vector<int>& rates) {
        require(!rates.empty(), "dilated stack needs at least one rate");
        DilatedStack stack;
        for (std::size_t i = 0; i < rates.size(); ++i) {
            stack.layers.push_back(Conv2dLayer::make(ps, rng, name + ".conv" + std::to_string(i),
                                                     channels, channels, 3, 3, 1, rates[i],
                                                     rates[i]));
        }
        return stack;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> x) const {
        for (const Conv2dLayer& layer : layers) {
            x = leaky_relu(layer.apply(bp, x), static_cast<T>(kLeakySlope));
        }
        return x;
    }
};

inline int strip_group_count(int channels, int strip_groups) {
    return strip_groups == 0 ? channels : strip_groups;
}

/// 1xk (horizontal) or kx1 (vertical) grouped convolution; no nonlinearity.
struct StripConv {
    Conv2dLayer conv;

    template <typename T>
    static StripConv make(ParamStore<T>& ps, Rng& rng, const std::string& name, int channels,
                          int k, bool vertical, int strip_groups) {
        require(k % 2 == 1, "strip kernel must be odd");
        StripConv strip;
        const int g = strip_group_count(channels, strip_groups);
        strip.conv = vertical ? Conv2dLayer::make(ps, rng, name, channels, channels, k, 1, g)
                              : Conv2dLayer::make(ps, rng, name, channels, channels, 1, k, g);
        return strip;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> x) const {
        return conv.apply(bp, x);
    }
};

/// 3x3 convolution over the first floor(C * ratio) channels; the remaining
/// channels pass through untouched and keep their positions.
struct PartialConv {
    Conv2dLayer conv;
    int head = 0;
    int channels = 0;

    template <typename T>
    static PartialConv make(ParamStore<T>& ps, Rng& rng, const std::string& name, int channels,
                            double ratio) {
        require(ratio > 0.0 && ratio <= 1.0, "partial ratio must be in (0, 1]");
        PartialConv pc;
        pc.channels = channels;
        pc.head = static_cast<int>(channels * ratio);
        require(pc.head >= 1, "partial ratio leaves no channels to convolve");
        pc.conv = Conv2dLayer::make(ps, rng, name, pc.head, pc.head, 3, 3);
        return pc;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> x) const {
        require(x.val().dim(1) == channels, "partial conv channel mismatch");
        if (head == channels) return conv.apply(bp, x);
        Var<T> first = slice_channels(x, 0, head);
        Var<T> rest = slice_channels(x, head, channels);
        return concat_channels<T>({conv.apply(bp, first), rest});
    }
};

/// Squeeze-and-excitation: global average pool, bottleneck of width
/// C / reduction with a leaky rectifier, sigmoid weights, channel rescale.
struct ChannelAttention {
    Conv2dLayer down, up;

    template <typename T>
    static ChannelAttention make(ParamStore<T>& ps, Rng& rng, const std::string& name,
                                 int channels, int reduction) {
        require(channels % reduction == 0, "attention reduction must divide channels");
        ChannelAttention ca;
        ca.down = Conv2dLayer::make(ps, rng, name + ".down", channels, channels / reduction, 1, 1);
        ca.up = Conv2dLayer::make(ps, rng, name + ".up", channels / reduction, channels, 1, 1);
        return ca;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> x) const {
        Var<T> pooled = global_avg_pool(x);
        Var<T> z = leaky_relu(down.apply(bp, pooled), static_cast<T>(kLeakySlope));
        Var<T> weights = sigmoid(up.apply(bp, z));
        return scale_channels(x, weights);
    }
};

/// Pointwise 3-D attention over the feature axis of a [B, F, D, H, W] map.
struct ChannelAttention3d {
    Conv3dLayer down, up;

    template <typename T>
    static ChannelAttention3d make(ParamStore<T>& ps, Rng& rng, const std::string& name,
                                   int channels, int reduction) {
        require(channels % reduction == 0, "attention reduction must divide channels");
        ChannelAttention3d ca;
        ca.down =
            Conv3dLayer::make(ps, rng, name + ".down", channels, channels / reduction, 1, 1, 1);
        ca.up = Conv3dLayer::make(ps, rng, name + ".up", channels / reduction, channels, 1, 1, 1);
        return ca;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> x) const {
        Var<T> pooled = global_avg_pool(x);
        Var<T> z = leaky_relu(down.apply(bp, pooled), static_cast<T>(kLeakySlope));
        Var<T> weights = sigmoid(up.apply(bp, z));
        return scale_channels(x, weights);
    }
};

/// Sub-pixel upsampler: each x2 stage is a 3x3 conv expanding channels 4x
/// followed by depth-to-space; r = 4 chains two stages, r = 1 is a
/// passthrough.
struct Upsampler {
    std::vector<Conv2dLayer> stages;

    template <typename T>
    static Upsampler make(ParamStore<T>& ps, Rng& rng, const std::string& name, int channels,
                          int r) {
        require(r == 1 || r == 2 || r == 4, "unsupported upsampling factor");
        Upsampler up;
        int n_stages = r == 4 ? 2 : (r == 2 ? 1 : 0);
        for (int i = 0; i < n_stages; ++i) {
            up.stages.push_back(Conv2dLayer::make(ps, rng, name + ".stage" + std::to_string(i),
                                                  channels, channels * 4, 3, 3));
        }
        return up;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> x) const {
        for (const Conv2dLayer& stage : stages) {
            x = depth_to_space(stage.apply(bp, x), 2);
        }
        return x;
    }
};

}  // namespace efgn
