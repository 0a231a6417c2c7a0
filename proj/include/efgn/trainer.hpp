// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "efgn/data_pipeline.hpp"
#include "efgn/losses.hpp"
#include "efgn/metrics.hpp"
#include "efgn/network.hpp"

namespace efgn {

/// Step decay: one-tenth every lr_decay_epochs, as a pure function of the
/// epoch index.
inline double learning_rate(const TrainConfig& tcfg, int epoch) {
    return tcfg.lr0 * std::pow(tcfg.lr_decay_factor, epoch / tcfg.lr_decay_epochs);
}

/// Adam with double-precision moment state. A step whose global gradient
/// norm is exactly zero is skipped outright so it is a bitwise no-op.
template <typename T>
class AdamOptimizer {
public:
    explicit AdamOptimizer(const ParamStore<T>& store, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {
        m_.resize(store.size());
        v_.resize(store.size());
        for (std::size_t i = 0; i < store.size(); ++i) {
            m_[i].assign(store.entry(static_cast<int>(i)).value.numel(), 0.0);
            v_[i].assign(store.entry(static_cast<int>(i)).value.numel(), 0.0);
        }
    }

    /// grads is parallel to the store's entries; empty tensors mean zero.
    void step(ParamStore<T>& store, const std::vector<Tensor<T>>& grads, double lr) {
        require(grads.size() == store.size(), "gradient list does not match parameter store");
        double norm_sq = 0.0;
        for (const Tensor<T>& g : grads) {
            for (const T& v : g.data) norm_sq += static_cast<double>(v) * static_cast<double>(v);
        }
        if (norm_sq == 0.0) return;

        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < grads.size(); ++i) {
            if (grads[i].data.empty()) continue;
            Tensor<T>& p = store.value(static_cast<int>(i));
            for (std::size_t j = 0; j < p.numel(); ++j) {
                const double g = static_cast<double>(grads[i].data[j]);
                m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
                v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
                const double mhat = m_[i][j] / bc1;
                const double vhat = v_[i][j] / bc2;
                p.data[j] = static_cast<T>(static_cast<double>(p.data[j]) -
                                           lr * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    long long steps_taken() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    LossReport loss;      // mean over batches
    double val_psnr = std::numeric_limits<double>::quiet_NaN();
    double val_sam = std::numeric_limits<double>::quiet_NaN();
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    int best_epoch = -1;
    double best_val_psnr = -std::numeric_limits<double>::infinity();
};

inline void write_train_log_csv(const TrainLog& log, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot open file for writing: " + path);
    out << "epoch,lr,l1,l_spe,l_gra,l_sstv,total,val_psnr,val_sam\n";
    for (const EpochLog& e : log.epochs) {
        out << e.epoch << "," << e.lr << "," << e.loss.l1 << "," << e.loss.l_spe << ","
            << e.loss.l_gra << "," << e.loss.l_sstv << "," << e.loss.total << "," << e.val_psnr
            << "," << e.val_sam << "\n";
    }
    require(out.good(), "write failed: " + path);
}

namespace detail {

template <typename T>
Tensor<T> stack_batch(const std::vector<HSICube>& patches, const std::vector<std::size_t>& order,
                      std::size_t lo, std::size_t hi) {
    const HSICube& first = patches[order[lo]];
    Tensor<T> out({static_cast<int>(hi - lo), first.bands(), first.height(), first.width()});
    const std::size_t item = first.data.numel();
    for (std::size_t i = lo; i < hi; ++i) {
        const HSICube& cube = patches[order[i]];
        require(cube.data.numel() == item, "ragged patch sizes in one batch");
        for (std::size_t j = 0; j < item; ++j) {
            out.data[(i - lo) * item + j] = static_cast<T>(cube.data.data[j]);
        }
    }
    return out;
}

}  // namespace detail

/// Runs one gradient step on a prepared LR/HR batch and returns the loss
/// report. Exposed separately so tests can drive micro-runs directly.
template <typename T>
LossReport train_step(EfgnModel<T>& model, AdamOptimizer<T>& opt, const Tensor<T>& lr_batch,
                      const Tensor<T>& hr_batch, const TrainConfig& tcfg, double lr) {
    Tape<T> tape;
    BoundParams<T> bp = bind(model.params(), tape, true);
    Var<T> sr = model.forward_graph(tape, bp, make_leaf(tape, lr_batch, false));
    Var<T> hr = make_leaf(tape, hr_batch, false);
    LossWeights weights{tcfg.lambda_spectral, tcfg.lambda_gradient, tcfg.lambda_sstv};
    auto [total, report] = total_loss(sr, hr, weights, tcfg.spectral_cosine_form);
    require(std::isfinite(report.total), "loss diverged (NaN or Inf)");
    tape.backward(total.id);

    std::vector<Tensor<T>> grads(model.params().size());
    for (std::size_t i = 0; i < bp.vars.size(); ++i) {
        const int id = bp.vars[i].id;
        if (tape.has_grad(id)) grads[i] = tape.grad_view(id);
    }
    if (tcfg.grad_clip) {
        double norm_sq = 0.0;
        for (const Tensor<T>& g : grads) {
            for (const T& v : g.data) norm_sq += static_cast<double>(v) * static_cast<double>(v);
        }
        const double norm = std::sqrt(norm_sq);
        if (norm > tcfg.grad_clip_norm && norm > 0.0) {
            const T scale = static_cast<T>(tcfg.grad_clip_norm / norm);
            for (Tensor<T>& g : grads) {
                for (T& v : g.data) v *= scale;
            }
        }
    }
    opt.step(model.params(), grads, lr);
    return report;
}

/// Full optimization loop. Saves the best-validation and last checkpoints
/// when paths are given; validation metrics are computed per epoch when the
/// validation set is nonempty.
template <typename T>
TrainLog train(EfgnModel<T>& model, const PatchSet& train_set, const PatchSet& val_set,
               const TrainConfig& tcfg, const std::string& ckpt_best = "",
               const std::string& ckpt_last = "", std::ostream* progress = nullptr) {
    tcfg.validate();
    require(!train_set.hr_patches.empty(), "training set is empty");

    AdamOptimizer<T> opt(model.params());
    Rng order_rng(tcfg.seed);
    TrainLog log;

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        const double lr = learning_rate(tcfg, epoch);
        shuffle(order, order_rng);

        EpochLog elog;
        elog.epoch = epoch;
        elog.lr = lr;
        std::size_t batches = 0;
        for (std::size_t lo = 0; lo < order.size(); lo += tcfg.batch_size) {
            const std::size_t hi = std::min(order.size(), lo + tcfg.batch_size);
            Tensor<T> lr_batch = detail::stack_batch<T>(train_set.lr_patches, order, lo, hi);
            Tensor<T> hr_batch = detail::stack_batch<T>(train_set.hr_patches, order, lo, hi);
            LossReport rep;
            try {
                rep = train_step(model, opt, lr_batch, hr_batch, tcfg, lr);
            } catch (const std::invalid_argument& e) {
                throw std::runtime_error(std::string(e.what()) + " at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(batches));
            }
            elog.loss.l1 += rep.l1;
            elog.loss.l_spe += rep.l_spe;
            elog.loss.l_gra += rep.l_gra;
            elog.loss.l_sstv += rep.l_sstv;
            elog.loss.total += rep.total;
            elog.loss.spectral_excluded += rep.spectral_excluded;
            ++batches;
        }
        elog.loss.l1 /= static_cast<double>(batches);
        elog.loss.l_spe /= static_cast<double>(batches);
        elog.loss.l_gra /= static_cast<double>(batches);
        elog.loss.l_sstv /= static_cast<double>(batches);
        elog.loss.total /= static_cast<double>(batches);

        if (!val_set.hr_patches.empty()) {
            double psnr_acc = 0.0, sam_acc = 0.0;
            for (std::size_t i = 0; i < val_set.size(); ++i) {
                HSICube sr = model.super_resolve(val_set.lr_patches[i]);
                psnr_acc += psnr(sr, val_set.hr_patches[i]);
                sam_acc += sam(sr, val_set.hr_patches[i]);
            }
            elog.val_psnr = psnr_acc / static_cast<double>(val_set.size());
            elog.val_sam = sam_acc / static_cast<double>(val_set.size());
            if (elog.val_psnr > log.best_val_psnr) {
                log.best_val_psnr = elog.val_psnr;
                log.best_epoch = epoch;
                if (!ckpt_best.empty()) model.save_checkpoint(ckpt_best);
            }
        } else {
            log.best_epoch = epoch;
            if (!ckpt_best.empty()) model.save_checkpoint(ckpt_best);
        }
        log.epochs.push_back(elog);
        if (progress) {
            (*progress) << "epoch " << epoch << " lr " << lr << " total " << elog.loss.total
                        << " l1 " << elog.loss.l1;
            if (!val_set.hr_patches.empty()) (*progress) << " val_psnr " << elog.val_psnr;
            (*progress) << "\n";
        }
    }
    if (!ckpt_last.empty()) model.save_checkpoint(ckpt_last);
    return log;
}

struct EvalResult {
    MetricReport model;
    MetricReport bicubic;
};

/// Degrades each HR test cube, super-resolves it, and reports the five
/// metrics for both the model output and the bicubic baseline.
template <typename T>
std::vector<EvalResult> evaluate(const EfgnModel<T>& model, const std::vector<HSICube>& cubes,
                                 int s) {
    std::vector<EvalResult> results;
    for (const HSICube& hr : cubes) {
        HSICube lr = degrade(hr, s);
        HSICube sr = model.super_resolve(lr);
        HSICube baseline = bicubic_resize(lr, hr.height(), hr.width());
        EvalResult res;
        res.model = compute_metrics(sr, hr, s);
        res.bicubic = compute_metrics(baseline, hr, s);
        results.push_back(std::move(res));
    }
    return results;
}

}  // namespace efgn
