// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "efgn/cube_io.hpp"
#include "efgn/data_pipeline.hpp"
#include "efgn/metrics.hpp"
#include "efgn/network.hpp"
#include "efgn/render.hpp"
#include "efgn/trainer.hpp"

namespace {

std::string hash_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

std::string out_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

void write_manifest(const std::string& dir, const std::string& name, nlohmann::json manifest) {
    manifest["config_hash"] = hash_hex(manifest.dump());
    std::ofstream out(out_path(dir, name));
    efgn::require(out.good(), "cannot open file for writing: " + name);
    out << manifest.dump(2) << "\n";
}

struct ModelOptions {
    efgn::ModelConfig cfg;
    std::uint64_t seed = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--scale", cfg.scale, "Upsampling factor (even)");
        cmd->add_option("--bands-per-group", cfg.bands_per_group, "Bands per group");
        cmd->add_option("--n-feats", cfg.n_feats, "Feature channels per branch");
        cmd->add_option("--strip-kernel", cfg.strip_kernel, "Strip convolution kernel size");
        cmd->add_option("--shuffle-pieces", cfg.shuffle_pieces, "Channel shuffle pieces");
        cmd->add_option("--ssrgm-blocks", cfg.ssrgm_blocks, "Per-branch gate blocks");
        cmd->add_option("--ssrgm3d-blocks", cfg.ssrgm3d_blocks, "3-D refinement blocks");
        cmd->add_option("--dilation-rates", cfg.dilation_rates, "Dilated stack rates");
        cmd->add_option("--partial-ratio", cfg.partial_ratio, "Partial conv channel ratio");
        cmd->add_option("--ca-reduction", cfg.ca_reduction, "Channel attention reduction");
        cmd->add_option("--strip-groups", cfg.strip_groups,
                        "Strip conv groups (0 = depthwise)");
        cmd->add_option("--f3d", cfg.f3d, "3-D refinement feature width");
        cmd->add_flag("--share-weights", cfg.share_group_weights,
                      "Share one parameter set across band groups");
        cmd->add_option("--seed", seed, "Deterministic init seed");
    }
};

struct TrainOptions {
    efgn::TrainConfig tcfg;

    void attach(CLI::App* cmd) {
        cmd->add_option("--epochs", tcfg.epochs, "Training epochs");
        cmd->add_option("--batch", tcfg.batch_size, "Batch size");
        cmd->add_option("--lr0", tcfg.lr0, "Initial learning rate");
        cmd->add_option("--decay-epochs", tcfg.lr_decay_epochs, "Epochs per decay step");
        cmd->add_option("--decay-factor", tcfg.lr_decay_factor, "Decay multiplier");
        cmd->add_option("--lambda-spe", tcfg.lambda_spectral, "Spectral loss weight");
        cmd->add_option("--lambda-gra", tcfg.lambda_gradient, "Gradient loss weight");
        cmd->add_option("--lambda-sstv", tcfg.lambda_sstv, "Total variation loss weight");
        cmd->add_flag("--grad-clip", tcfg.grad_clip, "Clip global gradient norm");
        cmd->add_option("--clip-norm", tcfg.grad_clip_norm, "Gradient norm ceiling");
        cmd->add_flag("--spectral-cosine", tcfg.spectral_cosine_form,
                      "Use the raw cosine spectral term instead of the angle");
    }
};

int run_prepare(const std::vector<std::string>& inputs, const std::string& dir, int patch,
                int stride, int scale, double holdout, std::uint64_t seed, bool no_normalize) {
    std::vector<efgn::HSICube> cubes;
    for (const std::string& path : inputs) {
        efgn::HSICube cube = efgn::load_cube(path);
        cubes.push_back(no_normalize ? cube : efgn::normalize(cube));
    }
    auto [train_set, val_set] = efgn::make_pairs(cubes, patch, stride, scale, holdout, seed);
    std::filesystem::create_directories(dir);
    efgn::save_patchset(train_set, out_path(dir, "train.pset"));
    efgn::save_patchset(val_set, out_path(dir, "val.pset"));

    nlohmann::json manifest;
    manifest["command"] = "prepare";
    manifest["inputs"] = inputs;
    manifest["patch"] = patch;
    manifest["stride"] = stride;
    manifest["scale"] = scale;
    manifest["holdout"] = holdout;
    manifest["seed"] = seed;
    manifest["normalize"] = !no_normalize;
    manifest["train_count"] = train_set.size();
    manifest["val_count"] = val_set.size();
    write_manifest(dir, "prepare_manifest.json", manifest);

    std::cout << "train patches: " << train_set.size() << "\n";
    std::cout << "val patches: " << val_set.size() << "\n";
    std::cout << "wrote " << out_path(dir, "train.pset") << " and " << out_path(dir, "val.pset")
              << "\n";
    return 0;
}

int run_train(const std::string& train_path, const std::string& val_path, const std::string& dir,
              ModelOptions& mopts, TrainOptions& topts) {
    efgn::PatchSet train_set = efgn::load_patchset(train_path);
    efgn::require(!train_set.hr_patches.empty(), "training set is empty");
    efgn::PatchSet val_set;
    if (!val_path.empty()) val_set = efgn::load_patchset(val_path);

    mopts.cfg.scale = train_set.scale;
    topts.tcfg.seed = mopts.seed;
    topts.tcfg.validate();
    const int bands = train_set.hr_patches[0].bands();
    efgn::EfgnModel<float> model(mopts.cfg, bands, mopts.seed);

    std::filesystem::create_directories(dir);
    const std::string best = out_path(dir, "checkpoint_best.efgn");
    const std::string last = out_path(dir, "checkpoint_last.efgn");
    efgn::TrainLog log =
        efgn::train(model, train_set, val_set, topts.tcfg, best, last, &std::cout);
    efgn::write_train_log_csv(log, out_path(dir, "train_log.csv"));

    nlohmann::json manifest;
    manifest["command"] = "train";
    manifest["train_set"] = train_path;
    manifest["val_set"] = val_path;
    manifest["bands"] = bands;
    manifest["model"] = efgn::model_config_to_json(mopts.cfg);
    manifest["seed"] = mopts.seed;
    manifest["epochs"] = topts.tcfg.epochs;
    manifest["batch"] = topts.tcfg.batch_size;
    manifest["lr0"] = topts.tcfg.lr0;
    manifest["best_epoch"] = log.best_epoch;
    manifest["checkpoints"] = {best, last};
    write_manifest(dir, "train_manifest.json", manifest);

    std::cout << "parameters: " << model.count_params() << "\n";
    std::cout << "best epoch: " << log.best_epoch << "\n";
    std::cout << "wrote " << best << ", " << last << "\n";
    return 0;
}

int run_eval(const std::string& ckpt, const std::vector<std::string>& inputs,
             const std::string& dir, ModelOptions& mopts, std::vector<int> rgb,
             bool no_normalize, bool save_sr) {
    std::vector<efgn::HSICube> cubes;
    for (const std::string& path : inputs) {
        efgn::HSICube cube = efgn::load_cube(path);
        cubes.push_back(no_normalize ? cube : efgn::normalize(cube));
    }
    efgn::require(!cubes.empty(), "no input cubes");

    efgn::EfgnModel<float> model =
        ckpt.empty() ? efgn::EfgnModel<float>(mopts.cfg, cubes[0].bands(), mopts.seed)
                     : efgn::EfgnModel<float>::load_checkpoint(ckpt);
    const int s = model.config().scale;

    std::filesystem::create_directories(dir);
    std::vector<efgn::HSICube> srs, hrs;
    nlohmann::json all_metrics = nlohmann::json::array();
    for (std::size_t i = 0; i < cubes.size(); ++i) {
        const efgn::HSICube& hr = cubes[i];
        efgn::require(hr.bands() == model.bands(),
                      "cube band count does not match the model");
        efgn::HSICube lr = efgn::degrade(hr, s);
        efgn::HSICube sr = model.super_resolve(lr);
        efgn::HSICube baseline = efgn::bicubic_resize(lr, hr.height(), hr.width());
        efgn::MetricReport mrep = efgn::compute_metrics(sr, hr, s);
        efgn::MetricReport brep = efgn::compute_metrics(baseline, hr, s);

        const std::string tag = std::to_string(i);
        nlohmann::json j;
        j["input"] = inputs[i];
        j["model"] = efgn::metric_report_to_json(mrep);
        j["bicubic"] = efgn::metric_report_to_json(brep);
        std::ofstream mj(out_path(dir, "metrics_" + tag + ".json"));
        mj << j.dump(2) << "\n";
        efgn::write_per_band_csv(mrep, out_path(dir, "per_band_" + tag + ".csv"));

        int rb = rgb[0], gb = rgb[1], bb = rgb[2];
        const int cmax = hr.bands() - 1;
        if (rb > cmax || gb > cmax || bb > cmax) {
            rb = std::min(rb, cmax);
            gb = std::min(gb, cmax);
            bb = std::min(bb, cmax);
            std::cout << "note: pseudo-RGB bands clamped to " << rb << "," << gb << "," << bb
                      << " for " << hr.bands() << "-band input\n";
        }
        efgn::render_pseudo_rgb(sr, rb, gb, bb, out_path(dir, "sr_rgb_" + tag + ".png"));
        efgn::render_pseudo_rgb(hr, rb, gb, bb, out_path(dir, "hr_rgb_" + tag + ".png"));
        efgn::render_error_map(sr, hr, out_path(dir, "error_" + tag + ".png"));
        if (save_sr) efgn::save_cube(sr, out_path(dir, "sr_" + tag + ".cube"));

        std::cout << "cube " << i << ": model psnr " << mrep.psnr_db << " ssim " << mrep.ssim
                  << " sam " << mrep.sam_deg << " rmse " << mrep.rmse << " ergas " << mrep.ergas
                  << "\n";
        std::cout << "cube " << i << ": bicubic psnr " << brep.psnr_db << " ssim " << brep.ssim
                  << " sam " << brep.sam_deg << " rmse " << brep.rmse << " ergas " << brep.ergas
                  << "\n";
        all_metrics.push_back(j);
        srs.push_back(std::move(sr));
        hrs.push_back(hr);
    }
    efgn::render_spectral_curve(srs, hrs, out_path(dir, "spectral_curve.csv"),
                                out_path(dir, "spectral_curve.png"));

    nlohmann::json manifest;
    manifest["command"] = "eval";
    manifest["checkpoint"] = ckpt;
    manifest["inputs"] = inputs;
    manifest["scale"] = s;
    manifest["model"] = efgn::model_config_to_json(model.config());
    manifest["metrics"] = all_metrics;
    write_manifest(dir, "eval_manifest.json", manifest);
    return 0;
}

int run_render(const std::string& input, const std::string& sr_path, const std::string& hr_path,
               const std::string& dir, std::vector<int> rgb) {
    std::filesystem::create_directories(dir);
    bool did_anything = false;
    if (!input.empty()) {
        efgn::HSICube cube = efgn::load_cube(input);
        efgn::render_pseudo_rgb(cube, rgb[0], rgb[1], rgb[2], out_path(dir, "rgb.png"));
        std::cout << "wrote " << out_path(dir, "rgb.png") << "\n";
        did_anything = true;
    }
    if (!sr_path.empty() || !hr_path.empty()) {
        efgn::require(!sr_path.empty() && !hr_path.empty(),
                      "error map needs both --sr and --hr");
        efgn::HSICube sr = efgn::load_cube(sr_path);
        efgn::HSICube hr = efgn::load_cube(hr_path);
        efgn::render_error_map(sr, hr, out_path(dir, "error.png"));
        efgn::render_spectral_curve({sr}, {hr}, out_path(dir, "spectral_curve.csv"),
                                    out_path(dir, "spectral_curve.png"));
        std::cout << "wrote " << out_path(dir, "error.png") << " and spectral curve files\n";
        did_anything = true;
    }
    efgn::require(did_anything, "nothing to render: pass --input or --sr/--hr");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EFGN hyperspectral super-resolution"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a key=value file");

    // prepare
    auto* prepare = app.add_subcommand("prepare", "Cut LR/HR training patches from cubes");
    std::vector<std::string> prep_inputs;
    std::string prep_dir = "out";
    int patch = 64, stride = 32, prep_scale = 4;
    double holdout = 0.1;
    std::uint64_t prep_seed = 0;
    bool prep_no_norm = false;
    prepare->add_option("--input", prep_inputs, "Input cube files")->required();
    prepare->add_option("--out-dir", prep_dir, "Output directory");
    prepare->add_option("--patch", patch, "HR patch size");
    prepare->add_option("--stride", stride, "Patch stride");
    prepare->add_option("--scale", prep_scale, "Downsampling factor");
    prepare->add_option("--holdout", holdout, "Validation fraction");
    prepare->add_option("--seed", prep_seed, "Split shuffle seed");
    prepare->add_flag("--no-normalize", prep_no_norm, "Skip per-cube max normalization");

    // train
    auto* train_cmd = app.add_subcommand("train", "Optimize a model on prepared patches");
    std::string train_path, val_path;
    std::string train_dir = "out";
    ModelOptions train_mopts;
    TrainOptions train_topts;
    train_cmd->add_option("--train", train_path, "Training patch archive")->required();
    train_cmd->add_option("--val", val_path, "Validation patch archive");
    train_cmd->add_option("--out-dir", train_dir, "Output directory");
    train_mopts.attach(train_cmd);
    train_topts.attach(train_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate on HR cubes against bicubic");
    std::string ckpt;
    std::vector<std::string> eval_inputs;
    std::string eval_dir = "out";
    std::vector<int> eval_rgb = {70, 100, 36};
    bool eval_no_norm = false, save_sr = false;
    ModelOptions eval_mopts;
    eval_cmd->add_option("--checkpoint", ckpt, "Model checkpoint (omit for a fresh model)");
    eval_cmd->add_option("--input", eval_inputs, "HR cube files")->required();
    eval_cmd->add_option("--out-dir", eval_dir, "Output directory");
    eval_cmd->add_option("--rgb", eval_rgb, "Pseudo-RGB band triplet")->expected(3);
    eval_cmd->add_flag("--no-normalize", eval_no_norm, "Skip per-cube max normalization");
    eval_cmd->add_flag("--save-sr", save_sr, "Also write SR cubes");
    eval_mopts.attach(eval_cmd);

    // render
    auto* render_cmd = app.add_subcommand("render", "Figure files from cubes");
    std::string render_input, render_sr, render_hr;
    std::string render_dir = "out";
    std::vector<int> render_rgb = {70, 100, 36};
    render_cmd->add_option("--input", render_input, "Cube for a pseudo-RGB render");
    render_cmd->add_option("--sr", render_sr, "SR cube for error map and curve");
    render_cmd->add_option("--hr", render_hr, "HR cube for error map and curve");
    render_cmd->add_option("--out-dir", render_dir, "Output directory");
    render_cmd->add_option("--rgb", render_rgb, "Pseudo-RGB band triplet")->expected(3);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    // The only environment override: output directory.
    if (const char* env = std::getenv("EFGN_OUT_DIR"); env && *env) {
        prep_dir = env;
        train_dir = env;
        eval_dir = env;
        render_dir = env;
    }

    try {
        if (prepare->parsed()) {
            return run_prepare(prep_inputs, prep_dir, patch, stride, prep_scale, holdout,
                               prep_seed, prep_no_norm);
        }
        if (train_cmd->parsed()) {
            return run_train(train_path, val_path, train_dir, train_mopts, train_topts);
        }
        if (eval_cmd->parsed()) {
            return run_eval(ckpt, eval_inputs, eval_dir, eval_mopts, eval_rgb, eval_no_norm,
                            save_sr);
        }
        if (render_cmd->parsed()) {
            return run_render(render_input, render_sr, render_hr, render_dir, render_rgb);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
