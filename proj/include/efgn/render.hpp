// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "efgn/core_types.hpp"
#include "efgn/png_io.hpp"

namespace efgn {

/// Pseudo-RGB render: three selected bands, each min-max stretched to 8 bits
/// independently. A constant band renders as black.
inline void render_pseudo_rgb(const HSICube& cube, int r_band, int g_band, int b_band,
                              const std::string& path) {
    const int C = cube.bands(), H = cube.height(), W = cube.width();
    for (int band : {r_band, g_band, b_band}) {
        require(band >= 0 && band < C, "band index " + std::to_string(band) + " out of range");
    }
    const int bands[3] = {r_band, g_band, b_band};
    std::vector<unsigned char> rgb(static_cast<std::size_t>(W) * H * 3);
    for (int k = 0; k < 3; ++k) {
        double lo = cube.data.at3(bands[k], 0, 0), hi = lo;
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const double v = cube.data.at3(bands[k], y, x);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        const double span = hi - lo;
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const double v = cube.data.at3(bands[k], y, x);
                const double t = span > 0.0 ? (v - lo) / span : 0.0;
                rgb[(static_cast<std::size_t>(y) * W + x) * 3 + static_cast<std::size_t>(k)] =
                    static_cast<unsigned char>(std::lround(255.0 * t));
            }
        }
    }
    write_png_rgb8(path, W, H, rgb);
}

/// Mean absolute error over bands per pixel, linearly mapped on the fixed
/// range [0, 0.1] from blue (0,0,255) at zero error to red (255,0,0).
inline void render_error_map(const HSICube& sr, const HSICube& hr, const std::string& path) {
    require(sr.data.same_shape(hr.data), "error map inputs must have identical shapes");
    const int C = sr.bands(), H = sr.height(), W = sr.width();
    std::vector<unsigned char> rgb(static_cast<std::size_t>(W) * H * 3);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double err = 0.0;
            for (int b = 0; b < C; ++b) {
                err += std::abs(sr.data.at3(b, y, x) - hr.data.at3(b, y, x));
            }
            err /= C;
            const double t = std::clamp(err / 0.1, 0.0, 1.0);
            const std::size_t off = (static_cast<std::size_t>(y) * W + x) * 3;
            rgb[off + 0] = static_cast<unsigned char>(std::lround(255.0 * t));
            rgb[off + 1] = 0;
            rgb[off + 2] = static_cast<unsigned char>(std::lround(255.0 * (1.0 - t)));
        }
    }
    write_png_rgb8(path, W, H, rgb);
}

/// Per-band mean absolute difference averaged over pixels and over all
/// given pairs.
inline std::vector<double> mean_spectral_difference(const std::vector<HSICube>& srs,
                                                    const std::vector<HSICube>& hrs) {
    require(!srs.empty() && srs.size() == hrs.size(), "need matching nonempty cube lists");
    const int C = srs[0].bands();
    std::vector<double> curve(static_cast<std::size_t>(C), 0.0);
    for (std::size_t i = 0; i < srs.size(); ++i) {
        require(srs[i].data.same_shape(hrs[i].data), "pair shape mismatch");
        require(srs[i].bands() == C, "band count differs between pairs");
        const std::size_t plane =
            static_cast<std::size_t>(srs[i].height()) * srs[i].width();
        for (int b = 0; b < C; ++b) {
            const std::size_t off = static_cast<std::size_t>(b) * plane;
            double acc = 0.0;
            for (std::size_t px = 0; px < plane; ++px) {
                acc += std::abs(srs[i].data.data[off + px] - hrs[i].data.data[off + px]);
            }
            curve[static_cast<std::size_t>(b)] += acc / static_cast<double>(plane);
        }
    }
    for (double& v : curve) v /= static_cast<double>(srs.size());
    return curve;
}

namespace detail {

inline void draw_line(std::vector<unsigned char>& rgb, int w, int h, int x0, int y0, int x1,
                      int y1, unsigned char r, unsigned char g, unsigned char b) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    int x = x0, y = y0;
    while (true) {
        if (x >= 0 && x < w && y >= 0 && y < h) {
            const std::size_t off = (static_cast<std::size_t>(y) * w + x) * 3;
            rgb[off] = r;
            rgb[off + 1] = g;
            rgb[off + 2] = b;
        }
        if (x == x1 && y == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y += sy;
        }
    }
}

}  // namespace detail

/// Writes the curve as CSV (band, value) and as a simple line plot: white
/// background, black axes, blue polyline scaled to the curve maximum.
inline void render_spectral_curve(const std::vector<HSICube>& srs,
                                  const std::vector<HSICube>& hrs, const std::string& csv_path,
                                  const std::string& png_path) {
    const std::vector<double> curve = mean_spectral_difference(srs, hrs);

    std::ofstream csv(csv_path);
    require(csv.good(), "cannot open file for writing: " + csv_path);
    csv << "band,mean_abs_diff\n";
    for (std::size_t b = 0; b < curve.size(); ++b) csv << b << "," << curve[b] << "\n";
    require(csv.good(), "write failed: " + csv_path);

    const int w = 640, h = 480, margin = 40;
    std::vector<unsigned char> rgb(static_cast<std::size_t>(w) * h * 3, 255);
    detail::draw_line(rgb, w, h, margin, h - margin, w - margin, h - margin, 0, 0, 0);
    detail::draw_line(rgb, w, h, margin, margin, margin, h - margin, 0, 0, 0);

    double peak = 0.0;
    for (double v : curve) peak = std::max(peak, v);
    if (peak == 0.0) peak = 1.0;
    const int plot_w = w - 2 * margin, plot_h = h - 2 * margin;
    const std::size_t n = curve.size();
    auto px = [&](std::size_t b) {
        return margin + (n == 1 ? plot_w / 2
                                : static_cast<int>(std::lround(static_cast<double>(b) *
                                                               plot_w / (n - 1))));
    };
    auto py = [&](double v) {
        return h - margin - static_cast<int>(std::lround(v / peak * plot_h));
    };
    for (std::size_t b = 0; b + 1 < n; ++b) {
        detail::draw_line(rgb, w, h, px(b), py(curve[b]), px(b + 1), py(curve[b + 1]), 0, 0, 255);
    }
    if (n == 1) detail::draw_line(rgb, w, h, px(0), py(curve[0]), px(0), py(curve[0]), 0, 0, 255);
    write_png_rgb8(png_path, w, h, rgb);
}

}  // namespace efgn
