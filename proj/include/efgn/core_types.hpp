// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "efgn/tensor.hpp"

namespace efgn {

/// A single hyperspectral cube, band-sequential [C, H, W], values stored in
/// double. value_range records the original (lo, hi) before normalization so
/// reflectance units can be recovered.
struct HSICube {
    Tensor<double> data;  // [C, H, W]
    std::vector<double> wavelength_nm;  // empty or size C
    double value_lo = 0.0;
    double value_hi = 1.0;

    int bands() const { return data.dim(0); }
    int height() const { return data.dim(1); }
    int width() const { return data.dim(2); }
};

inline HSICube make_cube(Tensor<double> data) {
    require(data.ndim() == 3, "cube data must be [C, H, W]");
    require(data.dim(0) >= 1 && data.dim(1) >= 1 && data.dim(2) >= 1,
            "cube dimensions must be at least 1");
    require(data.all_finite(), "cube contains NaN or Inf");
    HSICube cube;
    cube.data = std::move(data);
    return cube;
}

/// Divides by the cube max so values land in [0, 1]; the original range is
/// kept in value_range for inversion. No-op for an all-zero cube.
inline HSICube normalize(const HSICube& cube) {
    HSICube out = cube;
    double mx = 0.0;
    for (double v : cube.data.data) {
        require(v >= 0.0, "cube has negative reflectance values");
        mx = std::max(mx, v);
    }
    out.value_lo = 0.0;
    out.value_hi = mx > 0.0 ? mx : 1.0;
    if (mx > 0.0 && mx != 1.0) {
        for (double& v : out.data.data) v /= mx;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Band grouping
// ---------------------------------------------------------------------------

struct BandRange {
    int begin = 0;  // inclusive
    int end = 0;    // exclusive

    int size() const { return end - begin; }
};

/// The band axis split into ceil(C/P) groups of exactly P consecutive bands.
/// All groups are disjoint except possibly the last, which covers the final P
/// bands and may overlap its predecessor when C mod P != 0. merge_weight[b] is
/// 1 / (number of groups covering band b), so summing weighted group
/// contributions reconstructs each band with total weight 1.
struct GroupPartition {
    int bands = 0;       // C
    int group_size = 0;  // P
    std::vector<BandRange> groups;
    std::vector<double> merge_weight;  // size C

    int num_groups() const { return static_cast<int>(groups.size()); }
};

inline GroupPartition make_partition(int bands, int group_size) {
    require(group_size >= 1, "group size must be at least 1");
    require(bands >= group_size, "cube has fewer bands than group size");
    GroupPartition part;
    part.bands = bands;
    part.group_size = group_size;
    int full = bands / group_size;
    for (int g = 0; g < full; ++g) {
        part.groups.push_back({g * group_size, (g + 1) * group_size});
    }
    if (bands % group_size != 0) {
        part.groups.push_back({bands - group_size, bands});
    }
    std::vector<int> coverage(static_cast<std::size_t>(bands), 0);
    for (const BandRange& g : part.groups) {
        for (int b = g.begin; b < g.end; ++b) coverage[static_cast<std::size_t>(b)] += 1;
    }
    part.merge_weight.resize(static_cast<std::size_t>(bands));
    for (int b = 0; b < bands; ++b) {
        require(coverage[static_cast<std::size_t>(b)] >= 1, "partition left a band uncovered");
        part.merge_weight[static_cast<std::size_t>(b)] =
            1.0 / coverage[static_cast<std::size_t>(b)];
    }
    return part;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ModelConfig {
    int scale = 4;
    int bands_per_group = 4;
    int n_feats = 64;
    int strip_kernel = 15;
    int shuffle_pieces = 4;
    int ssrgm_blocks = 1;
    int ssrgm3d_blocks = 6;
    std::vector<int> dilation_rates = {1, 2, 3};
    double partial_ratio = 0.25;
    int ca_reduction = 4;
    int strip_groups = 0;  // 0 = depthwise, n > 0 = grouped(n)
    int f3d = 16;          // feature width of the 3-D refinement stage
    bool share_group_weights = false;

    void validate() const {
        require(scale % 2 == 0, "scale must be even");
        require(scale >= 2, "scale must be at least 2");
        int r = scale / 2;
        require(r == 1 || r == 2 || r == 4, "scale must be one of 2, 4, 8");
        require(bands_per_group >= 1, "bands_per_group must be positive");
        require(n_feats >= 1, "n_feats must be positive");
        require(strip_kernel >= 1 && strip_kernel % 2 == 1, "strip kernel must be odd");
        require(shuffle_pieces >= 1, "shuffle_pieces must be positive");
        require(bands_per_group % shuffle_pieces == 0,
                "shuffle_pieces must divide bands_per_group");
        require(n_feats % shuffle_pieces == 0, "shuffle_pieces must divide n_feats");
        require(ssrgm_blocks >= 1 && ssrgm3d_blocks >= 1, "block counts must be positive");
        require(!dilation_rates.empty(), "dilation_rates must be nonempty");
        int prev = 0;
        for (int d : dilation_rates) {
            require(d >= 1, "dilation rates must be positive");
            require(d > prev, "dilation rates must be ascending");
            prev = d;
        }
        require(partial_ratio > 0.0 && partial_ratio <= 1.0, "partial_ratio must be in (0, 1]");
        require(static_cast<int>(n_feats * partial_ratio) >= 1,
                "partial_ratio leaves no channels for the convolved slice");
        require(ca_reduction >= 1, "ca_reduction must be positive");
        require(n_feats % ca_reduction == 0, "ca_reduction must divide n_feats");
        require(strip_groups >= 0, "strip_groups must be 0 (depthwise) or positive");
        if (strip_groups > 0) {
            require(n_feats % strip_groups == 0, "strip_groups must divide n_feats");
        }
        require(f3d >= 1, "f3d must be positive");
        require(static_cast<int>(f3d * partial_ratio) >= 1,
                "partial_ratio leaves no 3-D channels for the convolved slice");
        require(f3d % ca_reduction == 0, "ca_reduction must divide f3d");
    }
};

struct TrainConfig {
    int epochs = 70;
    int batch_size = 16;
    double lr0 = 1e-4;
    int lr_decay_epochs = 30;
    double lr_decay_factor = 0.1;
    double lambda_spectral = 0.5;   // weight of the spectral-angle term
    double lambda_gradient = 0.1;   // weight of the gradient-map term
    double lambda_sstv = 1e-3;      // weight of the total-variation term
    std::uint64_t seed = 0;
    bool grad_clip = false;
    double grad_clip_norm = 1.0;
    bool spectral_cosine_form = false;  // swap arccos angle for raw cosine

    void validate() const {
        require(epochs >= 1, "epochs must be positive");
        require(batch_size >= 1, "batch_size must be positive");
        require(lr0 > 0.0 && std::isfinite(lr0), "lr0 must be positive");
        require(lr_decay_epochs >= 1, "lr_decay_epochs must be positive");
        require(lr_decay_factor > 0.0, "lr_decay_factor must be positive");
        require(std::isfinite(lambda_spectral) && std::isfinite(lambda_gradient) &&
                    std::isfinite(lambda_sstv),
                "loss weights must be finite");
        if (grad_clip) require(grad_clip_norm > 0.0, "grad_clip_norm must be positive");
    }
};

// ---------------------------------------------------------------------------
// Shape contracts
// ---------------------------------------------------------------------------

/// Expected shapes of every intermediate tensor in the forward pass, per
/// input cube. All entries are [C, H, W] triples without the batch axis.
struct ShapeReport {
    int num_groups = 0;
    std::vector<int> group_input;     // [P, H, W]
    std::vector<int> group_feature;   // [n_feats, H, W]
    std::vector<int> branch_output;   // [P, (s/2)H, (s/2)W]
    std::vector<int> concat_feature;  // [G*P, (s/2)H, (s/2)W]
    std::vector<int> refined_feature; // [G*P, (s/2)H, (s/2)W]
    std::vector<int> upsampled;       // [G*P, sH, sW]
    std::vector<int> output;          // [C, sH, sW]
};

inline ShapeReport validate_shapes(const ModelConfig& cfg, const HSICube& cube) {
    cfg.validate();
    GroupPartition part = make_partition(cube.bands(), cfg.bands_per_group);
    const int h = cube.height(), w = cube.width();
    const int half = cfg.scale / 2;
    const int g = part.num_groups();
    const int p = cfg.bands_per_group;
    ShapeReport rep;
    rep.num_groups = g;
    rep.group_input = {p, h, w};
    rep.group_feature = {cfg.n_feats, h, w};
    rep.branch_output = {p, half * h, half * w};
    rep.concat_feature = {g * p, half * h, half * w};
    rep.refined_feature = rep.concat_feature;
    rep.upsampled = {g * p, cfg.scale * h, cfg.scale * w};
    rep.output = {cube.bands(), cfg.scale * h, cfg.scale * w};
    return rep;
}

}  // namespace efgn
