// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "efgn/core_types.hpp"
#include "json.hpp"

namespace efgn {

inline constexpr double kPsnrCapDb = 100.0;

struct MetricReport {
    double psnr_db = 0.0;
    double ssim = 0.0;
    double sam_deg = 0.0;
    double rmse = 0.0;
    double ergas = 0.0;
    std::vector<double> per_band_psnr;
    std::vector<double> per_band_abs_err;
    bool ssim_global_fallback = false;  // window exceeded the image
    int sam_excluded = 0;               // zero-norm pixels skipped
};

namespace detail {

inline void check_pair(const HSICube& sr, const HSICube& hr) {
    require(sr.data.same_shape(hr.data), "metric inputs must have identical shapes");
}

}  // namespace detail

/// Per-band PSNR against the given peak, averaged over bands. Bands with
/// zero MSE contribute the 100 dB cap.
inline double psnr(const HSICube& sr, const HSICube& hr, std::vector<double>* per_band = nullptr,
                   double peak = 1.0) {
    detail::check_pair(sr, hr);
    const int C = sr.bands();
    const std::size_t plane = static_cast<std::size_t>(sr.height()) * sr.width();
    double mean = 0.0;
    if (per_band) per_band->clear();
    for (int b = 0; b < C; ++b) {
        const std::size_t off = static_cast<std::size_t>(b) * plane;
        double mse = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            const double d = sr.data.data[off + i] - hr.data.data[off + i];
            mse += d * d;
        }
        mse /= static_cast<double>(plane);
        const double v = mse == 0.0 ? kPsnrCapDb : 10.0 * std::log10(peak * peak / mse);
        if (per_band) per_band->push_back(v);
        mean += v;
    }
    return mean / C;
}

namespace detail {

inline std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size) * size);
    const int half = size / 2;
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            const double d2 = static_cast<double>((i - half) * (i - half) + (j - half) * (j - half));
            w[static_cast<std::size_t>(i) * size + j] = std::exp(-d2 / (2.0 * sigma * sigma));
        }
    }
    double sum = 0.0;
    for (double v : w) sum += v;
    for (double& v : w) v /= sum;
    return w;
}

inline double ssim_from_stats(double mx, double my, double vx, double vy, double cov,
                              double c1, double c2) {
    return ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
           ((mx * mx + my * my + c1) * (vx + vy + c2));
}

}  // namespace detail

/// Per-band SSIM with an 11x11 Gaussian window (sigma 1.5) over valid window
/// positions, averaged over bands. If the image is smaller than the window,
/// falls back to a single global-statistics SSIM per band and sets the
/// fallback flag.
inline double ssim(const HSICube& sr, const HSICube& hr, bool* global_fallback = nullptr,
                   double peak = 1.0) {
    detail::check_pair(sr, hr);
    const int C = sr.bands(), H = sr.height(), W = sr.width();
    const int win = 11;
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const bool fallback = H < win || W < win;
    if (global_fallback) *global_fallback = fallback;

    const std::size_t plane = static_cast<std::size_t>(H) * W;
    double mean = 0.0;
    if (fallback) {
        for (int b = 0; b < C; ++b) {
            const std::size_t off = static_cast<std::size_t>(b) * plane;
            double mx = 0.0, my = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                mx += sr.data.data[off + i];
                my += hr.data.data[off + i];
            }
            mx /= static_cast<double>(plane);
            my /= static_cast<double>(plane);
            double vx = 0.0, vy = 0.0, cov = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                const double dx = sr.data.data[off + i] - mx;
                const double dy = hr.data.data[off + i] - my;
                vx += dx * dx;
                vy += dy * dy;
                cov += dx * dy;
            }
            vx /= static_cast<double>(plane);
            vy /= static_cast<double>(plane);
            cov /= static_cast<double>(plane);
            mean += detail::ssim_from_stats(mx, my, vx, vy, cov, c1, c2);
        }
        return mean / C;
    }

    const std::vector<double> window = detail::gaussian_window(win, 1.5);
    const int oh = H - win + 1, ow = W - win + 1;
    for (int b = 0; b < C; ++b) {
        double band_acc = 0.0;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double mx = 0.0, my = 0.0, xx = 0.0, yy = 0.0, xy = 0.0;
                for (int i = 0; i < win; ++i) {
                    for (int j = 0; j < win; ++j) {
                        const double wv = window[static_cast<std::size_t>(i) * win + j];
                        const double u = sr.data.at3(b, y + i, x + j);
                        const double v = hr.data.at3(b, y + i, x + j);
                        mx += wv * u;
                        my += wv * v;
                        xx += wv * u * u;
                        yy += wv * v * v;
                        xy += wv * u * v;
                    }
                }
                const double vx = xx - mx * mx;
                const double vy = yy - my * my;
                const double cov = xy - mx * my;
                band_acc += detail::ssim_from_stats(mx, my, vx, vy, cov, c1, c2);
            }
        }
        mean += band_acc / (static_cast<double>(oh) * ow);
    }
    return mean / C;
}

/// Mean per-pixel spectral angle in degrees. Pixels with a zero-norm
/// spectrum in either input are excluded; if every pixel is excluded this is
/// an error.
inline double sam(const HSICube& sr, const HSICube& hr, int* excluded = nullptr) {
    detail::check_pair(sr, hr);
    const int C = sr.bands();
    const std::size_t plane = static_cast<std::size_t>(sr.height()) * sr.width();
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t px = 0; px < plane; ++px) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (int c = 0; c < C; ++c) {
            const double u = sr.data.data[static_cast<std::size_t>(c) * plane + px];
            const double v = hr.data.data[static_cast<std::size_t>(c) * plane + px];
            dot += u * v;
            na += u * u;
            nb += v * v;
        }
        if (na == 0.0 || nb == 0.0) continue;
        ++used;
        double cosv = dot / (std::sqrt(na) * std::sqrt(nb));
        // Cauchy-Schwarz equality (identical or proportional spectra) must map
        // to an exact 0 or 180 degree angle; the division alone can land one
        // ulp inside the clamp.
        if (dot * dot >= na * nb) cosv = dot >= 0.0 ? 1.0 : -1.0;
        cosv = std::min(1.0, std::max(-1.0, cosv));
        acc += std::acos(cosv);
    }
    if (excluded) *excluded = static_cast<int>(plane - used);
    require(used > 0, "all pixel spectra have zero norm");
    return acc / static_cast<double>(used) * (180.0 / M_PI);
}

/// Root mean squared error over all elements.
inline double rmse(const HSICube& sr, const HSICube& hr) {
    detail::check_pair(sr, hr);
    double acc = 0.0;
    for (std::size_t i = 0; i < sr.data.numel(); ++i) {
        const double d = sr.data.data[i] - hr.data.data[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(sr.data.numel()));
}

/// Relative dimensionless global error: (100/s) * sqrt(mean over bands of
/// band RMSE^2 / band HR mean^2).
inline double ergas(const HSICube& sr, const HSICube& hr, int s) {
    detail::check_pair(sr, hr);
    require(s >= 1, "scale must be at least 1");
    const int C = sr.bands();
    const std::size_t plane = static_cast<std::size_t>(sr.height()) * sr.width();
    double acc = 0.0;
    for (int b = 0; b < C; ++b) {
        const std::size_t off = static_cast<std::size_t>(b) * plane;
        double mse = 0.0, mu = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            const double d = sr.data.data[off + i] - hr.data.data[off + i];
            mse += d * d;
            mu += hr.data.data[off + i];
        }
        mse /= static_cast<double>(plane);
        mu /= static_cast<double>(plane);
        require(mu != 0.0, "band " + std::to_string(b) + " has zero mean");
        acc += mse / (mu * mu);
    }
    return (100.0 / s) * std::sqrt(acc / C);
}

/// All five metrics plus the per-band curves.
inline MetricReport compute_metrics(const HSICube& sr, const HSICube& hr, int s,
                                    double peak = 1.0) {
    MetricReport rep;
    rep.psnr_db = psnr(sr, hr, &rep.per_band_psnr, peak);
    rep.ssim = ssim(sr, hr, &rep.ssim_global_fallback, peak);
    rep.sam_deg = sam(sr, hr, &rep.sam_excluded);
    rep.rmse = rmse(sr, hr);
    rep.ergas = ergas(sr, hr, s);

    const int C = sr.bands();
    const std::size_t plane = static_cast<std::size_t>(sr.height()) * sr.width();
    rep.per_band_abs_err.resize(static_cast<std::size_t>(C));
    for (int b = 0; b < C; ++b) {
        const std::size_t off = static_cast<std::size_t>(b) * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            acc += std::abs(sr.data.data[off + i] - hr.data.data[off + i]);
        }
        rep.per_band_abs_err[static_cast<std::size_t>(b)] = acc / static_cast<double>(plane);
    }
    return rep;
}

inline nlohmann::json metric_report_to_json(const MetricReport& rep) {
    nlohmann::json j;
    j["psnr_db"] = rep.psnr_db;
    j["ssim"] = rep.ssim;
    j["sam_deg"] = rep.sam_deg;
    j["rmse"] = rep.rmse;
    j["ergas"] = rep.ergas;
    j["per_band_psnr"] = rep.per_band_psnr;
    j["per_band_abs_err"] = rep.per_band_abs_err;
    j["ssim_global_fallback"] = rep.ssim_global_fallback;
    j["sam_excluded"] = rep.sam_excluded;
    return j;
}

inline void write_per_band_csv(const MetricReport& rep, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot open file for writing: " + path);
    out << "band,psnr_db,mean_abs_err\n";
    for (std::size_t b = 0; b < rep.per_band_psnr.size(); ++b) {
        out << b << "," << rep.per_band_psnr[b] << "," << rep.per_band_abs_err[b] << "\n";
    }
    require(out.good(), "write failed: " + path);
}

}  // namespace efgn
