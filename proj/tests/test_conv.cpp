// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "efgn/conv.hpp"
#include "efgn/rng.hpp"
#include "oracles.hpp"

namespace {

using efgn::make_leaf;
using efgn::Tape;
using efgn::Tensor;
using efgn::Var;

struct Conv2dCase {
    std::vector<int> xshape, wshape;
    int groups = 1, dil_h = 1, dil_w = 1;
    bool bias = true;
};

TEST(Conv2d, MatchesDirectLoops) {
    const std::vector<Conv2dCase> cases = {
        {{1, 3, 5, 5}, {4, 3, 3, 3}, 1, 1, 1, true},
        {{2, 4, 6, 7}, {4, 4, 1, 1}, 1, 1, 1, true},
        {{1, 6, 5, 5}, {6, 1, 3, 3}, 6, 1, 1, true},   // depthwise
        {{1, 6, 8, 8}, {6, 3, 3, 3}, 2, 1, 1, false},  // grouped, no bias
        {{1, 2, 9, 9}, {3, 2, 3, 3}, 1, 2, 2, true},   // dilated
        {{1, 2, 9, 9}, {3, 2, 3, 3}, 1, 3, 3, true},
        {{1, 4, 7, 6}, {4, 4, 7, 1}, 1, 1, 1, true},   // vertical strip
        {{1, 4, 6, 7}, {4, 4, 1, 7}, 1, 1, 1, true},   // horizontal strip
    };
    efgn::Rng rng(101);
    for (const auto& tc : cases) {
        Tensor<double> x = oracle::random_tensor(tc.xshape, rng);
        Tensor<double> w = oracle::random_tensor(tc.wshape, rng);
        Tensor<double> b =
            tc.bias ? oracle::random_tensor({tc.wshape[0]}, rng) : Tensor<double>({0});
        Tape<double> tape;
        Var<double> y = efgn::conv2d(make_leaf(tape, x, false), make_leaf(tape, w, false),
                                     make_leaf(tape, b, false), tc.groups, tc.dil_h, tc.dil_w);
        Tensor<double> ref = oracle::conv2d_ref(x, w, b, tc.groups, tc.dil_h, tc.dil_w);
        ASSERT_EQ(y.val().shape, ref.shape);
        for (std::size_t i = 0; i < ref.numel(); ++i) {
            ASSERT_NEAR(y.val().data[i], ref.data[i], 1e-12);
        }
    }
}

TEST(Conv3d, MatchesDirectLoops) {
    efgn::Rng rng(103);
    struct Case {
        std::vector<int> xshape, wshape;
        int groups = 1, dd = 1, dh = 1, dw = 1;
        bool bias = true;
    };
    const std::vector<Case> cases = {
        {{1, 2, 4, 5, 5}, {3, 2, 3, 3, 3}, 1, 1, 1, 1, true},
        {{1, 4, 3, 4, 4}, {4, 1, 3, 1, 1}, 4, 1, 1, 1, true},  // depthwise depth strip
        {{1, 4, 3, 4, 4}, {4, 1, 1, 5, 1}, 4, 1, 1, 1, true},  // depthwise height strip
        {{1, 4, 3, 4, 4}, {4, 1, 1, 1, 5}, 4, 1, 1, 1, false},
        {{2, 2, 3, 3, 3}, {2, 2, 1, 1, 1}, 1, 1, 1, 1, true},  // pointwise
    };
    for (const auto& tc : cases) {
        Tensor<double> x = oracle::random_tensor(tc.xshape, rng);
        Tensor<double> w = oracle::random_tensor(tc.wshape, rng);
        Tensor<double> b =
            tc.bias ? oracle::random_tensor({tc.wshape[0]}, rng) : Tensor<double>({0});
        Tape<double> tape;
        Var<double> y =
            efgn::conv3d(make_leaf(tape, x, false), make_leaf(tape, w, false),
                         make_leaf(tape, b, false), tc.groups, tc.dd, tc.dh, tc.dw);
        Tensor<double> ref = oracle::conv3d_ref(x, w, b, tc.groups, tc.dd, tc.dh, tc.dw);
        ASSERT_EQ(y.val().shape, ref.shape);
        for (std::size_t i = 0; i < ref.numel(); ++i) {
            ASSERT_NEAR(y.val().data[i], ref.data[i], 1e-12);
        }
    }
}

// Scalar functional of (x, w, b) for gradient checks.
double conv2d_scalar(const std::vector<Tensor<double>>& in, int groups, int dh, int dw) {
    Tape<double> tape;
    Var<double> y = efgn::conv2d(make_leaf(tape, in[0], false), make_leaf(tape, in[1], false),
                                 make_leaf(tape, in[2], false), groups, dh, dw);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.val().numel(); ++i) {
        acc += y.val().data[i] * (0.2 + 0.013 * static_cast<double>(i % 23));
    }
    return acc;
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
    efgn::Rng rng(107);
    struct Case {
        std::vector<int> xshape, wshape;
        int groups = 1, dh = 1, dw = 1;
    };
    const std::vector<Case> cases = {
        {{1, 2, 4, 4}, {3, 2, 3, 3}, 1, 1, 1},
        {{1, 4, 4, 4}, {4, 1, 3, 3}, 4, 1, 1},
        {{1, 2, 5, 5}, {2, 2, 3, 3}, 1, 2, 2},
    };
    for (const auto& tc : cases) {
        std::vector<Tensor<double>> in = {oracle::random_tensor(tc.xshape, rng),
                                          oracle::random_tensor(tc.wshape, rng),
                                          oracle::random_tensor({tc.wshape[0]}, rng)};
        auto f = [&](const std::vector<Tensor<double>>& xs) {
            return conv2d_scalar(xs, tc.groups, tc.dh, tc.dw);
        };
        Tape<double> tape;
        std::vector<Var<double>> vars;
        for (const auto& t : in) vars.push_back(make_leaf(tape, t, true));
        Var<double> y = efgn::conv2d(vars[0], vars[1], vars[2], tc.groups, tc.dh, tc.dw);
        Tensor<double> seed(y.val().shape);
        for (std::size_t i = 0; i < seed.numel(); ++i) {
            seed.data[i] = 0.2 + 0.013 * static_cast<double>(i % 23);
        }
        tape.backward_with(y.id, seed);
        std::vector<Tensor<double>> an;
        for (const auto& v : vars) an.push_back(tape.grad_view(v.id));
        EXPECT_LT(oracle::max_grad_mismatch(f, in, an), 2e-5);
    }
}

TEST(Conv3d, GradientsMatchFiniteDifferences) {
    efgn::Rng rng(109);
    std::vector<Tensor<double>> in = {oracle::random_tensor({1, 2, 3, 3, 3}, rng),
                                      oracle::random_tensor({2, 2, 3, 3, 3}, rng),
                                      oracle::random_tensor({2}, rng)};
    auto f = [&](const std::vector<Tensor<double>>& xs) {
        Tape<double> tape;
        Var<double> y = efgn::conv3d(make_leaf(tape, xs[0], false), make_leaf(tape, xs[1], false),
                                     make_leaf(tape, xs[2], false));
        double acc = 0.0;
        for (std::size_t i = 0; i < y.val().numel(); ++i) {
            acc += y.val().data[i] * (0.1 + 0.007 * static_cast<double>(i % 31));
        }
        return acc;
    };
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& t : in) vars.push_back(make_leaf(tape, t, true));
    Var<double> y = efgn::conv3d(vars[0], vars[1], vars[2]);
    Tensor<double> seed(y.val().shape);
    for (std::size_t i = 0; i < seed.numel(); ++i) {
        seed.data[i] = 0.1 + 0.007 * static_cast<double>(i % 31);
    }
    tape.backward_with(y.id, seed);
    std::vector<Tensor<double>> an;
    for (const auto& v : vars) an.push_back(tape.grad_view(v.id));
    EXPECT_LT(oracle::max_grad_mismatch(f, in, an), 2e-5);
}

TEST(Conv2d, TwoLayerChainGradient) {
    efgn::Rng rng(113);
    std::vector<Tensor<double>> in = {
        oracle::random_tensor({1, 2, 4, 4}, rng), oracle::random_tensor({3, 2, 3, 3}, rng),
        oracle::random_tensor({3}, rng), oracle::random_tensor({2, 3, 3, 3}, rng),
        oracle::random_tensor({2}, rng)};
    auto build = [](Tape<double>& tape, std::vector<Var<double>>& v) {
        Var<double> h = efgn::leaky_relu(efgn::conv2d(v[0], v[1], v[2]), 0.2);
        Var<double> y = efgn::conv2d(h, v[3], v[4]);
        Var<double> pooled = efgn::global_avg_pool(y);
        Var<double> flat = efgn::reshape(pooled, {1, 1, static_cast<int>(pooled.val().numel()), 1});
        return efgn::reshape(efgn::global_avg_pool(flat), {1});
    };
    auto f = [&](const std::vector<Tensor<double>>& xs) {
        Tape<double> tape;
        std::vector<Var<double>> vars;
        for (const auto& t : xs) vars.push_back(make_leaf(tape, t, false));
        return build(tape, vars).val().data[0];
    };
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& t : in) vars.push_back(make_leaf(tape, t, true));
    Var<double> out = build(tape, vars);
    tape.backward(out.id);
    std::vector<Tensor<double>> an;
    for (const auto& v : vars) an.push_back(tape.grad_view(v.id));
    EXPECT_LT(oracle::max_grad_mismatch(f, in, an), 2e-5);
}

}  // namespace
