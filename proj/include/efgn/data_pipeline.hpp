// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "efgn/core_types.hpp"
#include "efgn/resize.hpp"
#include "efgn/rng.hpp"
#include "json.hpp"

namespace efgn {

/// Paired training patches. Patch values are quantized to f32 precision and
/// every LR patch equals the degraded HR partner after f32 rounding, so the
/// relation survives an archive round trip bit-exactly.
struct PatchSet {
    std::vector<HSICube> hr_patches;  // [C, p, p]
    std::vector<HSICube> lr_patches;  // [C, p/s, p/s]
    int patch_size = 0;
    int stride = 0;
    int scale = 0;

    std::size_t size() const { return hr_patches.size(); }
};

/// Raster-order sliding window; the final row/column window is clamped to
/// the image edge so borders are always covered.
inline std::vector<HSICube> extract_patches(const HSICube& cube, int p, int stride) {
    const int h = cube.height(), w = cube.width(), c = cube.bands();
    require(p >= 1, "patch size must be positive");
    require(p <= h && p <= w, "patch size exceeds cube dimensions");
    require(stride >= 1 && stride <= p, "stride must be in [1, patch size]");

    auto origins = [&](int extent) {
        std::vector<int> out;
        const int span = extent - p;
        const int n = (span + stride - 1) / stride + 1;
        for (int i = 0; i < n; ++i) out.push_back(std::min(i * stride, span));
        return out;
    };
    const std::vector<int> ys = origins(h);
    const std::vector<int> xs = origins(w);

    std::vector<HSICube> patches;
    patches.reserve(ys.size() * xs.size());
    for (int oy : ys) {
        for (int ox : xs) {
            Tensor<double> t({c, p, p});
            for (int b = 0; b < c; ++b) {
                for (int y = 0; y < p; ++y) {
                    for (int x = 0; x < p; ++x) {
                        t.at3(b, y, x) = cube.data.at3(b, oy + y, ox + x);
                    }
                }
            }
            HSICube patch;
            patch.data = std::move(t);
            patch.wavelength_nm = cube.wavelength_nm;
            patch.value_lo = cube.value_lo;
            patch.value_hi = cube.value_hi;
            patches.push_back(std::move(patch));
        }
    }
    return patches;
}

namespace detail {

inline void quantize_f32(HSICube& cube) {
    for (double& v : cube.data.data) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace detail

inline bool lr_matches_degraded(const HSICube& lr, const HSICube& hr, int s) {
    HSICube ref = degrade(hr, s);
    if (!lr.data.same_shape(ref.data)) return false;
    for (std::size_t i = 0; i < lr.data.data.size(); ++i) {
        if (static_cast<float>(lr.data.data[i]) != static_cast<float>(ref.data.data[i])) {
            return false;
        }
    }
    return true;
}

/// Extracts HR patches from all cubes, degrades each to its LR partner, and
/// splits train/validation by a seeded shuffle of patch indices.
inline std::pair<PatchSet, PatchSet> make_pairs(const std::vector<HSICube>& cubes, int p,
                                                int stride, int s, double holdout_frac,
                                                std::uint64_t seed) {
    require(!cubes.empty(), "no input cubes");
    require(holdout_frac >= 0.0 && holdout_frac < 1.0, "holdout fraction must be in [0, 1)");
    require(s >= 1 && p % s == 0, "patch size must be divisible by scale");

    std::vector<HSICube> hr;
    for (const HSICube& cube : cubes) {
        for (HSICube& patch : extract_patches(cube, p, stride)) {
            detail::quantize_f32(patch);
            hr.push_back(std::move(patch));
        }
    }
    std::vector<std::size_t> order(hr.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    shuffle(order, rng);

    const std::size_t n_val =
        static_cast<std::size_t>(std::llround(static_cast<double>(hr.size()) * holdout_frac));

    auto fill = [&](PatchSet& set, std::size_t lo, std::size_t hi) {
        set.patch_size = p;
        set.stride = stride;
        set.scale = s;
        for (std::size_t i = lo; i < hi; ++i) {
            const HSICube& h = hr[order[i]];
            HSICube l = degrade(h, s);
            detail::quantize_f32(l);
            set.hr_patches.push_back(h);
            set.lr_patches.push_back(std::move(l));
        }
    };
    PatchSet train, val;
    fill(val, 0, n_val);
    fill(train, n_val, hr.size());
    return {std::move(train), std::move(val)};
}

// ---------------------------------------------------------------------------
// Patch archive: JSON header line, then per patch the f32 HR payload followed
// by the f32 LR payload.
// ---------------------------------------------------------------------------

inline void save_patchset(const PatchSet& set, const std::string& path) {
    require(set.hr_patches.size() == set.lr_patches.size(), "patch set is unpaired");
    nlohmann::json header;
    header["count"] = set.hr_patches.size();
    header["patch"] = set.patch_size;
    header["stride"] = set.stride;
    header["scale"] = set.scale;
    header["bands"] = set.hr_patches.empty() ? 0 : set.hr_patches[0].bands();
    header["dtype"] = "f32";

    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open file for writing: " + path);
    const std::string htext = header.dump();
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    out.put('\n');
    auto write_payload = [&](const HSICube& cube) {
        std::vector<float> buf(cube.data.data.size());
        for (std::size_t i = 0; i < buf.size(); ++i) {
            buf[i] = static_cast<float>(cube.data.data[i]);
        }
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    };
    for (std::size_t i = 0; i < set.hr_patches.size(); ++i) {
        write_payload(set.hr_patches[i]);
        write_payload(set.lr_patches[i]);
    }
    require(out.good(), "write failed: " + path);
}

inline PatchSet load_patchset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open file: " + path);
    std::string htext;
    std::getline(in, htext);
    nlohmann::json header = nlohmann::json::parse(htext, nullptr, false);
    require(!header.is_discarded() && header.is_object(), "malformed header in " + path);

    PatchSet set;
    const std::size_t count = header["count"].get<std::size_t>();
    set.patch_size = header["patch"].get<int>();
    set.stride = header["stride"].get<int>();
    set.scale = header["scale"].get<int>();
    const int bands = header["bands"].get<int>();
    require(set.scale >= 1 && set.patch_size % set.scale == 0,
            "patch size must be divisible by scale");

    auto read_payload = [&](int c, int h, int w) {
        const std::size_t n = static_cast<std::size_t>(c) * h * w;
        std::vector<float> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        require(static_cast<std::size_t>(in.gcount()) == n * sizeof(float),
                "payload length mismatch");
        Tensor<double> t({c, h, w});
        for (std::size_t i = 0; i < n; ++i) t.data[i] = buf[i];
        HSICube cube;
        cube.data = std::move(t);
        return cube;
    };
    const int lr_size = set.patch_size / set.scale;
    for (std::size_t i = 0; i < count; ++i) {
        HSICube hr = read_payload(bands, set.patch_size, set.patch_size);
        HSICube lr = read_payload(bands, lr_size, lr_size);
        require(lr_matches_degraded(lr, hr, set.scale),
                "patch archive corrupt: LR patch does not match degraded HR partner");
        set.hr_patches.push_back(std::move(hr));
        set.lr_patches.push_back(std::move(lr));
    }
    return set;
}

}  // namespace efgn
