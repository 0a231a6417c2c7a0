// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "efgn/blocks.hpp"
#include "efgn/core_types.hpp"
#include "efgn/resize.hpp"
#include "efgn/spdfm.hpp"
#include "efgn/ssrgm.hpp"
#include "json.hpp"

namespace efgn {

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["scale"] = cfg.scale;
    j["bands_per_group"] = cfg.bands_per_group;
    j["n_feats"] = cfg.n_feats;
    j["strip_kernel"] = cfg.strip_kernel;
    j["shuffle_pieces"] = cfg.shuffle_pieces;
    j["ssrgm_blocks"] = cfg.ssrgm_blocks;
    j["ssrgm3d_blocks"] = cfg.ssrgm3d_blocks;
    j["dilation_rates"] = cfg.dilation_rates;
    j["partial_ratio"] = cfg.partial_ratio;
    j["ca_reduction"] = cfg.ca_reduction;
    j["strip_groups"] = cfg.strip_groups;
    j["f3d"] = cfg.f3d;
    j["share_group_weights"] = cfg.share_group_weights;
    return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.scale = j.at("scale").get<int>();
    cfg.bands_per_group = j.at("bands_per_group").get<int>();
    cfg.n_feats = j.at("n_feats").get<int>();
    cfg.strip_kernel = j.at("strip_kernel").get<int>();
    cfg.shuffle_pieces = j.at("shuffle_pieces").get<int>();
    cfg.ssrgm_blocks = j.at("ssrgm_blocks").get<int>();
    cfg.ssrgm3d_blocks = j.at("ssrgm3d_blocks").get<int>();
    cfg.dilation_rates = j.at("dilation_rates").get<std::vector<int>>();
    cfg.partial_ratio = j.at("partial_ratio").get<double>();
    cfg.ca_reduction = j.at("ca_reduction").get<int>();
    cfg.strip_groups = j.at("strip_groups").get<int>();
    cfg.f3d = j.at("f3d").get<int>();
    cfg.share_group_weights = j.at("share_group_weights").get<bool>();
    cfg.validate();
    return cfg;
}

/// Weighted scatter of branch output slots back onto bands: slot g*P+i feeds
/// band groups[g].begin+i with the partition's merge weight, so overlapped
/// bands average their two contributions and every band ends with total
/// weight exactly 1.
template <typename T>
Var<T> merge_bands(Var<T> slots, const GroupPartition& part) {
    Tape<T>& t = *slots.tape;
    const int B = slots.val().dim(0), S = slots.val().dim(1);
    const int H = slots.val().dim(2), W = slots.val().dim(3);
    require(S == part.num_groups() * part.group_size, "slot count does not match partition");
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const int C = part.bands;

    std::vector<int> slot_band(static_cast<std::size_t>(S));
    std::vector<T> slot_weight(static_cast<std::size_t>(S));
    for (int g = 0; g < part.num_groups(); ++g) {
        for (int i = 0; i < part.group_size; ++i) {
            const int band = part.groups[static_cast<std::size_t>(g)].begin + i;
            slot_band[static_cast<std::size_t>(g * part.group_size + i)] = band;
            slot_weight[static_cast<std::size_t>(g * part.group_size + i)] =
                static_cast<T>(part.merge_weight[static_cast<std::size_t>(band)]);
        }
    }

    Tensor<T> out = Tensor<T>::zeros({B, C, H, W});
    const Tensor<T>& sv = slots.val();
    for (int b = 0; b < B; ++b) {
        for (int s = 0; s < S; ++s) {
            const std::size_t src = (static_cast<std::size_t>(b) * S + s) * plane;
            const std::size_t dst =
                (static_cast<std::size_t>(b) * C + slot_band[static_cast<std::size_t>(s)]) * plane;
            const T w = slot_weight[static_cast<std::size_t>(s)];
            for (std::size_t i = 0; i < plane; ++i) out.data[dst + i] += w * sv.data[src + i];
        }
    }
    int ps = slots.id;
    int id = t.make_node(std::move(out), {ps},
                         [ps, slot_band, slot_weight, B, S, C, plane](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_view(self);
        Tensor<T>& gs = tp.grad(ps);
        for (int b = 0; b < B; ++b) {
            for (int s = 0; s < S; ++s) {
                const std::size_t dst = (static_cast<std::size_t>(b) * S + s) * plane;
                const std::size_t src =
                    (static_cast<std::size_t>(b) * C + slot_band[static_cast<std::size_t>(s)]) *
                    plane;
                const T w = slot_weight[static_cast<std::size_t>(s)];
                for (std::size_t i = 0; i < plane; ++i) gs.data[dst + i] += w * g.data[src + i];
            }
        }
    });
    return {&t, id};
}

// ---------------------------------------------------------------------------
// Cost accounting
// ---------------------------------------------------------------------------

struct CostReport {
    long long macs = 0;              // convolution multiply-adds
    long long activation_elems = 0;  // forward-path intermediate elements

    long long flops() const { return 2 * macs; }
    long long activation_bytes() const { return activation_elems * 4; }
};

// ---------------------------------------------------------------------------
// Full network
// ---------------------------------------------------------------------------

struct EfgnBranch {
    Spdfm spdfm;
    Ssrgm ssrgm;
    Upsampler up;
    Conv2dLayer tail;
};

template <typename T>
class EfgnModel {
public:
    EfgnModel(ModelConfig cfg, int bands, std::uint64_t seed)
        : cfg_(std::move(cfg)), partition_(make_partition(bands, cfg_.bands_per_group)) {
        cfg_.validate();
        Rng rng(seed);
        const int n_branches = cfg_.share_group_weights ? 1 : partition_.num_groups();
        for (int i = 0; i < n_branches; ++i) {
            const std::string name =
                cfg_.share_group_weights ? std::string("branch") : "branch" + std::to_string(i);
            EfgnBranch br;
            br.spdfm = Spdfm::make(params_, rng, name + ".spdfm", cfg_);
            br.ssrgm = Ssrgm::make(params_, rng, name + ".ssrgm", cfg_.ssrgm_blocks, cfg_);
            br.up = Upsampler::make(params_, rng, name + ".up", cfg_.n_feats, cfg_.scale / 2);
            br.tail = Conv2dLayer::make(params_, rng, name + ".tail", cfg_.n_feats,
                                        cfg_.bands_per_group, 1, 1);
            branches_.push_back(std::move(br));
        }
        refine_ = Ssrgm3d::make(params_, rng, "refine", cfg_.ssrgm3d_blocks, cfg_);
        const int slots = partition_.num_groups() * cfg_.bands_per_group;
        global_up_ = Upsampler::make(params_, rng, "global_up", slots, 2);
        skip_ = Conv2dLayer::make(params_, rng, "skip", partition_.bands, slots, 3, 3);
        output_ = Conv2dLayer::make(params_, rng, "output", slots, slots, 3, 3);
    }

    const ModelConfig& config() const { return cfg_; }
    const GroupPartition& partition() const { return partition_; }
    int bands() const { return partition_.bands; }
    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }

    std::size_t count_params() const { return params_.count_elements(); }

    const EfgnBranch& branch(int g) const {
        return cfg_.share_group_weights ? branches_[0] : branches_[static_cast<std::size_t>(g)];
    }

    /// Builds the differentiable graph. lr must be [B, C, H, W] with C equal
    /// to the partition's band count.
    Var<T> forward_graph(Tape<T>& tape, const BoundParams<T>& bp, Var<T> lr) const {
        require(lr.val().ndim() == 4, "forward expects a [B, C, H, W] input");
        const int B = lr.val().dim(0), C = lr.val().dim(1);
        const int H = lr.val().dim(2), W = lr.val().dim(3);
        require(C == partition_.bands, "input band count does not match the model");

        Tensor<T> bic = bicubic_resize_nd(lr.val(), cfg_.scale * H, cfg_.scale * W);
        Var<T> skip = skip_.apply(bp, make_leaf(tape, std::move(bic), false));

        Var<T> prev_bands =
            make_leaf(tape, Tensor<T>::zeros({B, cfg_.bands_per_group, H, W}), false);
        Var<T> prev_feat = make_leaf(tape, Tensor<T>::zeros({B, cfg_.n_feats, H, W}), false);

        std::vector<Var<T>> branch_outputs;
        for (int g = 0; g < partition_.num_groups(); ++g) {
            const EfgnBranch& br = branch(g);
            const BandRange range = partition_.groups[static_cast<std::size_t>(g)];
            Var<T> bands_g = slice_channels(lr, range.begin, range.end);
            Var<T> fused = br.spdfm.apply(bp, bands_g, prev_bands, prev_feat);
            Var<T> feat = br.ssrgm.apply(bp, fused);
            branch_outputs.push_back(br.tail.apply(bp, br.up.apply(bp, feat)));
            prev_bands = bands_g;
            prev_feat = feat;
        }

        Var<T> fc = concat_channels(branch_outputs);
        Var<T> fr = refine_.apply(bp, fc);
        Var<T> fur = global_up_.apply(bp, fr);
        Var<T> ffin = add(fur, skip);
        Var<T> slots = output_.apply(bp, ffin);
        return merge_bands(slots, partition_);
    }

    /// Inference convenience: fresh tape, no gradients.
    Tensor<T> forward(const Tensor<T>& lr) const {
        Tape<T> tape;
        BoundParams<T> bp = bind(params_, tape, false);
        Var<T> out = forward_graph(tape, bp, make_leaf(tape, lr, false));
        return out.val();
    }

    HSICube super_resolve(const HSICube& lr) const {
        Tensor<T> in = lr.data.template cast<T>();
        in.shape = {1, lr.bands(), lr.height(), lr.width()};
        Tensor<T> out = forward(in);
        Tensor<double> data = out.template cast<double>();
        data.shape = {out.dim(1), out.dim(2), out.dim(3)};
        HSICube sr;
        sr.data = std::move(data);
        sr.wavelength_nm = lr.wavelength_nm;
        sr.value_lo = lr.value_lo;
        sr.value_hi = lr.value_hi;
        return sr;
    }

    /// Convolution multiply-adds and forward activation elements for one
    /// [1, C, h, w] input. FLOPs = 2 * macs, convolutions only.
    CostReport estimate_cost(int h, int w) const {
        CostReport cost;
        const int nf = cfg_.n_feats, p = cfg_.bands_per_group, k = cfg_.strip_kernel;
        const int groups = partition_.num_groups();
        const int slots = groups * p;
        const int h2 = (cfg_.scale / 2) * h, w2 = (cfg_.scale / 2) * w;
        const int sh = cfg_.scale * h, sw = cfg_.scale * w;

        auto conv2d_cost = [&](long long cin, long long cout, long long kh, long long kw,
                               long long cgroups, long long oh, long long ow) {
            cost.macs += oh * ow * cout * (cin / cgroups) * kh * kw;
            cost.activation_elems += oh * ow * cout;
        };
        auto act = [&](long long elems) { cost.activation_elems += elems; };

        // Bicubic skip path.
        act(static_cast<long long>(partition_.bands) * sh * sw);
        conv2d_cost(partition_.bands, slots, 3, 3, 1, sh, sw);

        // Band-group branches (executed per group even when weights are
        // shared).
        const int sg2 = strip_group_count(nf, cfg_.strip_groups);
        const int head = static_cast<int>(nf * cfg_.partial_ratio);
        for (int g = 0; g < groups; ++g) {
            act(static_cast<long long>(p) * h * w);      // group slice
            act(static_cast<long long>(p) * h * w);      // shuffled feedback
            for (std::size_t i = 0; i < cfg_.dilation_rates.size(); ++i) {
                conv2d_cost(nf, nf, 3, 3, 1, h, w);
                act(static_cast<long long>(nf) * h * w);  // rectifier output
            }
            act(static_cast<long long>(2 * p + nf) * h * w);  // concat
            conv2d_cost(2 * p + nf, nf, 3, 3, 1, h, w);       // fusion
            for (int blk = 0; blk < cfg_.ssrgm_blocks; ++blk) {
                conv2d_cost(nf, nf, k, 1, sg2, h, w);
                conv2d_cost(nf, nf, 1, k, sg2, h, w);
                act(static_cast<long long>(nf) * h * w);  // gate
                conv2d_cost(head, head, 3, 3, 1, h, w);   // partial slice
                act(static_cast<long long>(nf) * h * w);  // partial concat
                conv2d_cost(nf, nf, k, 1, sg2, h, w);
                conv2d_cost(nf, nf, 1, 1, 1, h, w);
                act(static_cast<long long>(nf) * h * w);  // gate
                act(nf);                                  // pooled vector
                conv2d_cost(nf, nf / cfg_.ca_reduction, 1, 1, 1, 1, 1);
                conv2d_cost(nf / cfg_.ca_reduction, nf, 1, 1, 1, 1, 1);
                act(static_cast<long long>(nf) * h * w);  // rescaled
                act(static_cast<long long>(nf) * h * w);  // residual add
            }
            int ch = h, cw = w;
            for (int r = cfg_.scale / 2; r > 1; r /= 2) {
                conv2d_cost(nf, 4 * nf, 3, 3, 1, ch, cw);
                ch *= 2;
                cw *= 2;
                act(static_cast<long long>(nf) * ch * cw);  // depth-to-space
            }
            conv2d_cost(nf, p, 1, 1, 1, h2, w2);  // branch tail
        }
        act(static_cast<long long>(slots) * h2 * w2);  // concatenated feature

        // 3-D refinement: every conv3d at full D x h2 x w2 volume.
        const long long voxels = static_cast<long long>(slots) * h2 * w2;
        const int f = cfg_.f3d;
        const int sg3 = strip_group_count(f, cfg_.strip_groups);
        const int head3 = static_cast<int>(f * cfg_.partial_ratio);
        auto conv3d_cost = [&](long long cin, long long cout, long long kvol, long long cgroups) {
            cost.macs += voxels * cout * (cin / cgroups) * kvol;
            cost.activation_elems += voxels * cout;
        };
        conv3d_cost(1, f, 27, 1);  // lift
        for (int blk = 0; blk < cfg_.ssrgm3d_blocks; ++blk) {
            conv3d_cost(f, f, k, sg3);  // height strip
            conv3d_cost(f, f, k, sg3);  // width strip
            act(voxels * f);            // gate
            conv3d_cost(head3, head3, 27, 1);
            act(voxels * f);            // partial concat
            conv3d_cost(f, f, k, sg3);  // depth strip
            conv3d_cost(f, f, 1, 1);    // pointwise
            act(voxels * f);            // gate
            act(f);                     // pooled vector
            cost.macs += static_cast<long long>(f) * (f / cfg_.ca_reduction) * 2;
            cost.activation_elems += f / cfg_.ca_reduction + f;
            act(voxels * f);            // rescaled
            act(voxels * f);            // residual add
        }
        conv3d_cost(f, 1, 27, 1);  // squeeze

        conv2d_cost(slots, 4 * slots, 3, 3, 1, h2, w2);  // global upsample
        act(static_cast<long long>(slots) * sh * sw);    // depth-to-space
        act(static_cast<long long>(slots) * sh * sw);    // skip add
        conv2d_cost(slots, slots, 3, 3, 1, sh, sw);      // output conv
        act(static_cast<long long>(partition_.bands) * sh * sw);  // band merge
        return cost;
    }

    long long estimate_flops(int h, int w) const { return estimate_cost(h, w).flops(); }
    long long estimate_activation_bytes(int h, int w) const {
        return estimate_cost(h, w).activation_bytes();
    }

    // -----------------------------------------------------------------------
    // Checkpoints: magic line, JSON header line (band count, config, named
    // parameter list with shapes), then f32 payloads in listed order.
    // -----------------------------------------------------------------------

    void save_checkpoint(const std::string& path) const {
        nlohmann::json header;
        header["bands"] = partition_.bands;
        header["config"] = model_config_to_json(cfg_);
        nlohmann::json plist = nlohmann::json::array();
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const auto& e = params_.entry(static_cast<int>(i));
            plist.push_back({{"name", e.name}, {"shape", e.value.shape}});
        }
        header["params"] = plist;

        std::ofstream out(path, std::ios::binary);
        require(out.good(), "cannot open file for writing: " + path);
        out << "EFGNCKPT1\n";
        const std::string htext = header.dump();
        out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
        out.put('\n');
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const Tensor<T>& v = params_.value(static_cast<int>(i));
            std::vector<float> buf(v.numel());
            for (std::size_t j = 0; j < buf.size(); ++j) {
                buf[j] = static_cast<float>(v.data[j]);
            }
            out.write(reinterpret_cast<const char*>(buf.data()),
                      static_cast<std::streamsize>(buf.size() * sizeof(float)));
        }
        require(out.good(), "write failed: " + path);
    }

    static EfgnModel load_checkpoint(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        require(in.good(), "cannot open file: " + path);
        std::string magic, htext;
        std::getline(in, magic);
        require(magic == "EFGNCKPT1", "not a checkpoint file: " + path);
        std::getline(in, htext);
        nlohmann::json header = nlohmann::json::parse(htext, nullptr, false);
        require(!header.is_discarded(), "malformed checkpoint header in " + path);

        ModelConfig cfg = model_config_from_json(header.at("config"));
        const int bands = header.at("bands").get<int>();
        EfgnModel model(cfg, bands, 0);
        const auto& plist = header.at("params");
        require(plist.size() == model.params_.size(),
                "checkpoint parameter list does not match the architecture");
        for (std::size_t i = 0; i < model.params_.size(); ++i) {
            auto& e = model.params_.entry(static_cast<int>(i));
            require(plist[i].at("name").get<std::string>() == e.name,
                    "checkpoint parameter order mismatch at " + e.name);
            require(plist[i].at("shape").get<std::vector<int>>() == e.value.shape,
                    "checkpoint parameter shape mismatch at " + e.name);
            std::vector<float> buf(e.value.numel());
            in.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(buf.size() * sizeof(float)));
            require(static_cast<std::size_t>(in.gcount()) == buf.size() * sizeof(float),
                    "checkpoint payload truncated at " + e.name);
            for (std::size_t j = 0; j < buf.size(); ++j) {
                e.value.data[j] = static_cast<T>(buf[j]);
            }
        }
        return model;
    }

private:
    ModelConfig cfg_;
    GroupPartition partition_;
    ParamStore<T> params_;
    std::vector<EfgnBranch> branches_;
    Ssrgm3d refine_;
    Upsampler global_up_;
    Conv2dLayer skip_, output_;
};

}  // namespace efgn
