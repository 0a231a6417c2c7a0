// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "efgn/blocks.hpp"

namespace efgn {

/// Wide-bound perception gate: the product of a vertical and a horizontal
/// large-kernel strip convolution, then a partial 3x3 convolution. The gate
/// and partial conv carry no nonlinearity.
struct Wpgb {
    StripConv vertical, horizontal;
    PartialConv partial;

    template <typename T>
    static Wpgb make(ParamStore<T>& ps, Rng& rng, const std::string& name,
                     const ModelConfig& cfg) {
        Wpgb b;
        b.vertical = StripConv::make(ps, rng, name + ".vstrip", cfg.n_feats, cfg.strip_kernel,
                                     true, cfg.strip_groups);
        b.horizontal = StripConv::make(ps, rng, name + ".hstrip", cfg.n_feats, cfg.strip_kernel,
                                       false, cfg.strip_groups);
        b.partial = PartialConv::make(ps, rng, name + ".partial", cfg.n_feats, cfg.partial_ratio);
        return b;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> x) const {
        Var<T> gated = mul(vertical.apply(bp, x), horizontal.apply(bp, x));
        return partial.apply(bp, gated);
    }
};

/// Spectrum enhancement gate: a vertical strip convolution gated with a
/// pointwise convolution, then channel attention.
struct Segb {
    StripConv vertical;
    Conv2dLayer pointwise;
    ChannelAttention attention;

    template <typename T>
    static Segb make(ParamStore<T>& ps, Rng& rng, const std::string& name,
                     const ModelConfig& cfg) {
        Segb b;
        b.vertical = StripConv::make(ps, rng, name + ".vstrip", cfg.n_feats, cfg.strip_kernel,
                                     true, cfg.strip_groups);
        b.pointwise = Conv2dLayer::make(ps, rng, name + ".pointwise", cfg.n_feats, cfg.n_feats,
                                        1, 1);
        b.attention = ChannelAttention::make(ps, rng, name + ".attention", cfg.n_feats,
                                             cfg.ca_reduction);
        return b;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> x) const {
        Var<T> gated = mul(vertical.apply(bp, x), pointwise.apply(bp, x));
        return attention.apply(bp, gated);
    }
};

/// Spatial-spectral reinforcement gate module: repeats of (WPGB -> SEGB)
/// with a residual add around each repeat.
struct Ssrgm {
    std::vector<Wpgb> wpgb;
    std::vector<Segb> segb;

    template <typename T>
    static Ssrgm make(ParamStore<T>& ps, Rng& rng, const std::string& name, int blocks,
                      const ModelConfig& cfg) {
        require(blocks >= 1, "block count must be positive");
        Ssrgm m;
        for (int i = 0; i < blocks; ++i) {
            const std::string prefix = name + ".block" + std::to_string(i);
            m.wpgb.push_back(Wpgb::make(ps, rng, prefix + ".wpgb", cfg));
            m.segb.push_back(Segb::make(ps, rng, prefix + ".segb", cfg));
        }
        return m;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> x) const {
        for (std::size_t i = 0; i < wpgb.size(); ++i) {
            x = add(x, segb[i].apply(bp, wpgb[i].apply(bp, x)));
        }
        return x;
    }
};

// ---------------------------------------------------------------------------
// 3-D variant on [B, F, D, H, W]: D is the spectral depth (one merged band
// slot per plane), F the lifted feature width.
// ---------------------------------------------------------------------------

/// 3x3x3 convolution over the first floor(F * ratio) feature channels, the
/// rest passing through.
struct PartialConv3d {
    Conv3dLayer conv;
    int head = 0;
    int channels = 0;

    template <typename T>
    static PartialConv3d make(ParamStore<T>& ps, Rng& rng, const std::string& name, int channels,
                              double ratio) {
        require(ratio > 0.0 && ratio <= 1.0, "partial ratio must be in (0, 1]");
        PartialConv3d pc;
        pc.channels = channels;
        pc.head = static_cast<int>(channels * ratio);
        require(pc.head >= 1, "partial ratio leaves no channels to convolve");
        pc.conv = Conv3dLayer::make(ps, rng, name, pc.head, pc.head, 3, 3, 3);
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

/// WPGB lifted to 3-D: strips along height (1,k,1) and width (1,1,k), gated,
/// then a partial 3x3x3 convolution.
struct Wpgb3d {
    Conv3dLayer vertical, horizontal;
    PartialConv3d partial;

    template <typename T>
    static Wpgb3d make(ParamStore<T>& ps, Rng& rng, const std::string& name,
                       const ModelConfig& cfg) {
        const int f = cfg.f3d;
        const int g = strip_group_count(f, cfg.strip_groups);
        Wpgb3d b;
        b.vertical = Conv3dLayer::make(ps, rng, name + ".vstrip", f, f, 1, cfg.strip_kernel, 1, g);
        b.horizontal =
            Conv3dLayer::make(ps, rng, name + ".hstrip", f, f, 1, 1, cfg.strip_kernel, g);
        b.partial = PartialConv3d::make(ps, rng, name + ".partial", f, cfg.partial_ratio);
        return b;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> x) const {
        Var<T> gated = mul(vertical.apply(bp, x), horizontal.apply(bp, x));
        return partial.apply(bp, gated);
    }
};

/// SEGB lifted to 3-D: a strip along the spectral depth (k,1,1) gated with a
/// pointwise 3-D map, then channel attention over F.
struct Segb3d {
    Conv3dLayer depth_strip, pointwise;
    ChannelAttention3d attention;

    template <typename T>
    static Segb3d make(ParamStore<T>& ps, Rng& rng, const std::string& name,
                       const ModelConfig& cfg) {
        const int f = cfg.f3d;
        const int g = strip_group_count(f, cfg.strip_groups);
        Segb3d b;
        b.depth_strip =
            Conv3dLayer::make(ps, rng, name + ".dstrip", f, f, cfg.strip_kernel, 1, 1, g);
        b.pointwise = Conv3dLayer::make(ps, rng, name + ".pointwise", f, f, 1, 1, 1);
        b.attention =
            ChannelAttention3d::make(ps, rng, name + ".attention", f, cfg.ca_reduction);
        return b;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> x) const {
        Var<T> gated = mul(depth_strip.apply(bp, x), pointwise.apply(bp, x));
        return attention.apply(bp, gated);
    }
};

/// Full 3-D refinement: lift [B, C, H, W] to [B, f3d, C, H, W] with a 3x3x3
/// conv, run gated 3-D blocks with residual adds, squeeze back to one
/// feature channel, and drop the feature axis.
struct Ssrgm3d {
    Conv3dLayer lift, squeeze;
    std::vector<Wpgb3d> wpgb;
    std::vector<Segb3d> segb;

    template <typename T>
    static Ssrgm3d make(ParamStore<T>& ps, Rng& rng, const std::string& name, int blocks,
                        const ModelConfig& cfg) {
        require(blocks >= 1, "block count must be positive");
        Ssrgm3d m;
        m.lift = Conv3dLayer::make(ps, rng, name + ".lift", 1, cfg.f3d, 3, 3, 3);
        for (int i = 0; i < blocks; ++i) {
            const std::string prefix = name + ".block" + std::to_string(i);
            m.wpgb.push_back(Wpgb3d::make(ps, rng, prefix + ".wpgb", cfg));
            m.segb.push_back(Segb3d::make(ps, rng, prefix + ".segb", cfg));
        }
        m.squeeze = Conv3dLayer::make(ps, rng, name + ".squeeze", cfg.f3d, 1, 3, 3, 3);
        return m;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> x) const {
        require(x.val().ndim() == 4, "3-D refinement expects a [B, C, H, W] input");
        const int b = x.val().dim(0), c = x.val().dim(1), h = x.val().dim(2), w = x.val().dim(3);
        Var<T> vol = reshape(x, {b, 1, c, h, w});
        vol = lift.apply(bp, vol);
        for (std::size_t i = 0; i < wpgb.size(); ++i) {
            vol = add(vol, segb[i].apply(bp, wpgb[i].apply(bp, vol)));
        }
        vol = squeeze.apply(bp, vol);
        return reshape(vol, {b, c, h, w});
    }
};

}  // namespace efgn
