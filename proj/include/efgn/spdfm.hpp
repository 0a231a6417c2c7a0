// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "efgn/blocks.hpp"

namespace efgn {

/// Shuffled and progressive dilated fusion. Builds the working feature of a
/// band group from three branches:
///   - the group's own LR bands,
///   - the previous group's raw bands, channel-shuffled (spectral guidance),
///   - the previous group's extracted feature run through the dilated stack
///     (spatial guidance).
/// The three are concatenated and fused by a single 3x3 conv down to n_feats
/// channels. The fusion conv is a band-count adapter and carries no
/// nonlinearity. The first group receives zero tensors for both feedbacks.
struct Spdfm {
    DilatedStack dilated;
    Conv2dLayer fuse;
    int pieces = 1;

    template <typename T>
    static Spdfm make(ParamStore<T>& ps, Rng& rng, const std::string& name,
                      const ModelConfig& cfg) {
        Spdfm m;
        m.pieces = cfg.shuffle_pieces;
        m.dilated = DilatedStack::make(ps, rng, name + ".dilated", cfg.n_feats,
                                       cfg.dilation_rates);
        const int concat_width = 2 * cfg.bands_per_group + cfg.n_feats;
        m.fuse = Conv2dLayer::make(ps, rng, name + ".fuse", concat_width, cfg.n_feats, 3, 3);
        return m;
    }

    template <typename T>
    Var<T> apply(const BoundParams<T>& bp, Var<T> group_bands, Var<T> prev_bands,
                 Var<T> prev_feature) const {
        require(group_bands.val().same_shape(prev_bands.val()),
                "feedback bands shape mismatch");
        Var<T> spectral = channel_shuffle(prev_bands, pieces);
        Var<T> spatial = dilated.apply(bp, prev_feature);
        return fuse.apply(bp, concat_channels<T>({group_bands, spectral, spatial}));
    }
};

}  // namespace efgn
