// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "efgn/core_types.hpp"
#include "oracles.hpp"

namespace {

using efgn::GroupPartition;
using efgn::HSICube;
using efgn::make_partition;
using efgn::ModelConfig;
using efgn::Tensor;

void expect_throw_msg(const std::function<void()>& fn, const std::string& needle) {
    try {
        fn();
        FAIL() << "expected an exception containing: " << needle;
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find(needle), std::string::npos)
            << "actual message: " << e.what();
    }
}

TEST(Cube, MakeCubeValidates) {
    EXPECT_NO_THROW(efgn::make_cube(Tensor<double>({3, 4, 5}, 0.5)));
    expect_throw_msg([] { efgn::make_cube(Tensor<double>({3, 4}, 0.5)); }, "[C, H, W]");
    Tensor<double> bad({2, 2, 2}, 1.0);
    bad.data[3] = std::numeric_limits<double>::infinity();
    expect_throw_msg([&] { efgn::make_cube(bad); }, "NaN or Inf");
}

TEST(Cube, NormalizeScalesToUnitMax) {
    Tensor<double> d({1, 2, 2});
    d.data = {0.0, 2.0, 4.0, 8.0};
    HSICube cube = efgn::make_cube(d);
    HSICube n = efgn::normalize(cube);
    EXPECT_DOUBLE_EQ(n.data.data[3], 1.0);
    EXPECT_DOUBLE_EQ(n.data.data[1], 0.25);
    EXPECT_DOUBLE_EQ(n.value_hi, 8.0);
    EXPECT_DOUBLE_EQ(n.value_lo, 0.0);

    Tensor<double> neg({1, 1, 2});
    neg.data = {-0.5, 1.0};
    HSICube bad = efgn::make_cube(neg);
    expect_throw_msg([&] { efgn::normalize(bad); }, "negative");

    HSICube zero = efgn::make_cube(Tensor<double>({1, 2, 2}, 0.0));
    HSICube nz = efgn::normalize(zero);
    for (double v : nz.data.data) EXPECT_EQ(v, 0.0);
}

TEST(Partition, EvenSplitHasNoOverlap) {
    GroupPartition part = make_partition(8, 4);
    ASSERT_EQ(part.num_groups(), 2);
    EXPECT_EQ(part.groups[0].begin, 0);
    EXPECT_EQ(part.groups[0].end, 4);
    EXPECT_EQ(part.groups[1].begin, 4);
    EXPECT_EQ(part.groups[1].end, 8);
    for (double w : part.merge_weight) EXPECT_DOUBLE_EQ(w, 1.0);
}

TEST(Partition, RemainderGroupCoversFinalBands) {
    // 31 bands in groups of 4: seven full groups then the final four bands
    // 27..30, so band 27 is covered twice.
    GroupPartition part = make_partition(31, 4);
    ASSERT_EQ(part.num_groups(), 8);
    EXPECT_EQ(part.groups[6].begin, 24);
    EXPECT_EQ(part.groups[6].end, 28);
    EXPECT_EQ(part.groups[7].begin, 27);
    EXPECT_EQ(part.groups[7].end, 31);
    EXPECT_DOUBLE_EQ(part.merge_weight[26], 1.0);
    EXPECT_DOUBLE_EQ(part.merge_weight[27], 0.5);
    EXPECT_DOUBLE_EQ(part.merge_weight[28], 1.0);
    EXPECT_DOUBLE_EQ(part.merge_weight[30], 1.0);
}

TEST(Partition, SingleGroupWhenBandsEqualGroupSize) {
    GroupPartition part = make_partition(4, 4);
    ASSERT_EQ(part.num_groups(), 1);
    EXPECT_EQ(part.groups[0].begin, 0);
    EXPECT_EQ(part.groups[0].end, 4);
}

TEST(Partition, TooFewBandsRejected) {
    expect_throw_msg([] { make_partition(3, 4); }, "cube has fewer bands than group size");
}

TEST(Partition, CoverageWeightsAlwaysSumToOnePerBand) {
    for (int c : {4, 5, 7, 8, 31, 32, 102, 128, 191}) {
        for (int p : {1, 2, 4, 8}) {
            if (c < p) continue;
            GroupPartition part = make_partition(c, p);
            std::vector<double> total(static_cast<std::size_t>(c), 0.0);
            for (const auto& g : part.groups) {
                for (int b = g.begin; b < g.end; ++b) {
                    total[static_cast<std::size_t>(b)] +=
                        part.merge_weight[static_cast<std::size_t>(b)];
                }
            }
            for (double t : total) ASSERT_DOUBLE_EQ(t, 1.0);
            ASSERT_EQ(part.num_groups(), (c + p - 1) / p);
            for (const auto& g : part.groups) ASSERT_EQ(g.size(), p);
        }
    }
}

TEST(ModelConfig, DefaultsValidate) {
    ModelConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.scale, 4);
    EXPECT_EQ(cfg.bands_per_group, 4);
    EXPECT_EQ(cfg.n_feats, 64);
    EXPECT_EQ(cfg.strip_kernel, 15);
    EXPECT_EQ(cfg.shuffle_pieces, 4);
    EXPECT_EQ(cfg.ssrgm_blocks, 1);
    EXPECT_EQ(cfg.ssrgm3d_blocks, 6);
    EXPECT_EQ(cfg.dilation_rates, (std::vector<int>{1, 2, 3}));
    EXPECT_DOUBLE_EQ(cfg.partial_ratio, 0.25);
    EXPECT_EQ(cfg.ca_reduction, 4);
    EXPECT_EQ(cfg.f3d, 16);
    EXPECT_FALSE(cfg.share_group_weights);
}

TEST(ModelConfig, RejectsBadValues) {
    auto with = [](const std::function<void(ModelConfig&)>& tweak) {
        ModelConfig cfg;
        tweak(cfg);
        cfg.validate();
    };
    expect_throw_msg([&] { with([](ModelConfig& c) { c.scale = 3; }); }, "scale must be even");
    expect_throw_msg([&] { with([](ModelConfig& c) { c.scale = 6; }); }, "one of 2, 4, 8");
    expect_throw_msg([&] { with([](ModelConfig& c) { c.strip_kernel = 4; }); }, "odd");
    expect_throw_msg([&] { with([](ModelConfig& c) { c.shuffle_pieces = 3; }); },
                     "shuffle_pieces must divide");
    expect_throw_msg([&] { with([](ModelConfig& c) { c.dilation_rates = {2, 2}; }); },
                     "ascending");
    expect_throw_msg([&] { with([](ModelConfig& c) { c.partial_ratio = 0.0; }); },
                     "partial_ratio");
    expect_throw_msg([&] { with([](ModelConfig& c) { c.ca_reduction = 5; }); },
                     "ca_reduction must divide");
    expect_throw_msg([&] { with([](ModelConfig& c) { c.f3d = 2; c.partial_ratio = 0.25; }); },
                     "3-D channels");
}

TEST(TrainConfig, DefaultsAndValidation) {
    efgn::TrainConfig tcfg;
    EXPECT_NO_THROW(tcfg.validate());
    EXPECT_EQ(tcfg.epochs, 70);
    EXPECT_EQ(tcfg.batch_size, 16);
    EXPECT_DOUBLE_EQ(tcfg.lr0, 1e-4);
    EXPECT_EQ(tcfg.lr_decay_epochs, 30);
    EXPECT_DOUBLE_EQ(tcfg.lr_decay_factor, 0.1);
    EXPECT_DOUBLE_EQ(tcfg.lambda_spectral, 0.5);
    EXPECT_DOUBLE_EQ(tcfg.lambda_gradient, 0.1);
    EXPECT_DOUBLE_EQ(tcfg.lambda_sstv, 1e-3);
    tcfg.lr0 = 0.0;
    EXPECT_THROW(tcfg.validate(), std::invalid_argument);
}

TEST(Shapes, ReportMatchesArchitecture) {
    ModelConfig cfg;
    HSICube cube = oracle::make_textured_cube(31, 16, 20);
    efgn::ShapeReport rep = efgn::validate_shapes(cfg, cube);
    EXPECT_EQ(rep.num_groups, 8);
    EXPECT_EQ(rep.group_input, (std::vector<int>{4, 16, 20}));
    EXPECT_EQ(rep.group_feature, (std::vector<int>{64, 16, 20}));
    EXPECT_EQ(rep.branch_output, (std::vector<int>{4, 32, 40}));
    EXPECT_EQ(rep.concat_feature, (std::vector<int>{32, 32, 40}));
    EXPECT_EQ(rep.refined_feature, (std::vector<int>{32, 32, 40}));
    EXPECT_EQ(rep.upsampled, (std::vector<int>{32, 64, 80}));
    EXPECT_EQ(rep.output, (std::vector<int>{31, 64, 80}));

    ModelConfig odd;
    odd.scale = 5;
    expect_throw_msg([&] { efgn::validate_shapes(odd, cube); }, "scale must be even");
}

}  // namespace
