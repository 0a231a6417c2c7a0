// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "efgn/losses.hpp"
#include "oracles.hpp"

namespace {

using efgn::make_leaf;
using efgn::Tape;
using efgn::Tensor;
using efgn::Var;

TEST(L1Loss, MatchesOracleAndGradient) {
    efgn::Rng rng(201);
    Tensor<double> a = oracle::random_tensor({2, 3, 4, 4}, rng);
    Tensor<double> b = oracle::random_tensor({2, 3, 4, 4}, rng);
    Tape<double> tape;
    Var<double> va = make_leaf(tape, a, true);
    Var<double> vb = make_leaf(tape, b, true);
    Var<double> loss = efgn::l1_loss(va, vb);
    EXPECT_NEAR(loss.val().data[0], oracle::l1_ref(a, b), 1e-14);

    tape.backward(loss.id);
    auto f = [](const std::vector<Tensor<double>>& xs) { return oracle::l1_ref(xs[0], xs[1]); };
    EXPECT_LT(oracle::max_grad_mismatch(f, {a, b},
                                        {tape.grad_view(va.id), tape.grad_view(vb.id)}),
              1e-3);
}

TEST(SpectralLoss, KnownAngles) {
    // Two-band image with one pixel: (1, 0) vs (0, 1) is a quarter turn.
    Tensor<double> a({1, 2, 1, 1});
    a.data = {1.0, 0.0};
    Tensor<double> b({1, 2, 1, 1});
    b.data = {0.0, 1.0};
    Tape<double> tape;
    Var<double> loss = efgn::spectral_loss(make_leaf(tape, a, false),
                                           make_leaf(tape, b, false));
    EXPECT_NEAR(loss.val().data[0], 0.5, 1e-12);

    // Proportional spectra: the cosine clamp keeps the angle a hair above
    // zero, bounded by acos(1 - 1e-7) / pi.
    Tensor<double> c({1, 2, 1, 1});
    c.data = {0.6, 0.8};
    Tensor<double> d({1, 2, 1, 1});
    d.data = {1.2, 1.6};
    Tape<double> t2;
    Var<double> near_zero = efgn::spectral_loss(make_leaf(t2, c, false),
                                                make_leaf(t2, d, false));
    EXPECT_GT(near_zero.val().data[0], 0.0);
    EXPECT_LT(near_zero.val().data[0], 2e-4);
}

TEST(SpectralLoss, MatchesOracleOnRandomBatch) {
    efgn::Rng rng(203);
    Tensor<double> a = oracle::random_tensor({2, 5, 3, 3}, rng, 0.1, 1.0);
    Tensor<double> b = oracle::random_tensor({2, 5, 3, 3}, rng, 0.1, 1.0);
    Tape<double> tape;
    Var<double> loss = efgn::spectral_loss(make_leaf(tape, a, false),
                                           make_leaf(tape, b, false));
    EXPECT_NEAR(loss.val().data[0], oracle::spectral_ref(a, b), 1e-12);

    Tape<double> t2;
    Var<double> cos_loss = efgn::spectral_loss(make_leaf(t2, a, false),
                                               make_leaf(t2, b, false), true);
    EXPECT_NEAR(cos_loss.val().data[0], oracle::spectral_ref(a, b, true), 1e-12);
}

TEST(SpectralLoss, ZeroNormPixelsAreExcluded) {
    Tensor<double> a({1, 2, 1, 2});
    a.data = {1.0, 0.0, 0.0, 0.0};  // pixel 0: (1,0); pixel 1: (0,0)
    Tensor<double> b({1, 2, 1, 2});
    b.data = {0.0, 1.0, 1.0, 1.0};  // pixel 0: (0,1); pixel 1: (1,1)
    Tape<double> tape;
    int excluded = -1;
    Var<double> loss = efgn::spectral_loss(make_leaf(tape, a, false),
                                           make_leaf(tape, b, false), false, &excluded);
    EXPECT_EQ(excluded, 1);
    EXPECT_NEAR(loss.val().data[0], 0.5, 1e-12);  // only the quarter-turn pixel counts
}

TEST(SpectralLoss, GradientMatchesFiniteDifferences) {
    efgn::Rng rng(205);
    Tensor<double> a = oracle::random_tensor({1, 4, 2, 2}, rng, 0.2, 1.0);
    Tensor<double> b = oracle::random_tensor({1, 4, 2, 2}, rng, 0.2, 1.0);
    Tape<double> tape;
    Var<double> va = make_leaf(tape, a, true);
    Var<double> vb = make_leaf(tape, b, true);
    Var<double> loss = efgn::spectral_loss(va, vb);
    tape.backward(loss.id);
    auto f = [](const std::vector<Tensor<double>>& xs) {
        return oracle::spectral_ref(xs[0], xs[1]);
    };
    EXPECT_LT(oracle::max_grad_mismatch(f, {a, b},
                                        {tape.grad_view(va.id), tape.grad_view(vb.id)}),
              1e-3);
}

TEST(GradientMap, ForwardDifferencesWithReplicateEdge) {
    Tensor<double> x({1, 2, 2});
    x.data = {1.0, 3.0, 6.0, 10.0};
    Tensor<double> m = efgn::gradient_map(x);
    // (0,0): dh = 5, dw = 2, dc = 0 -> sqrt(29)
    EXPECT_NEAR(m.at3(0, 0, 0), std::sqrt(29.0), 1e-12);
    // (1,1): all forward neighbors out of range -> 0
    EXPECT_EQ(m.at3(0, 1, 1), 0.0);

    efgn::Rng rng(207);
    Tensor<double> r = oracle::random_tensor({2, 3, 4, 4}, rng);
    Tensor<double> got = efgn::gradient_map(r);
    Tensor<double> want = oracle::grad_map_ref(r);
    for (std::size_t i = 0; i < want.numel(); ++i) ASSERT_NEAR(got.data[i], want.data[i], 1e-13);
}

TEST(GradientLoss, MatchesOracleAndIsZeroForIdenticalInputs) {
    efgn::Rng rng(209);
    Tensor<double> a = oracle::random_tensor({1, 3, 5, 5}, rng);
    Tensor<double> b = oracle::random_tensor({1, 3, 5, 5}, rng);
    Tape<double> tape;
    Var<double> loss = efgn::gradient_loss(make_leaf(tape, a, false),
                                           make_leaf(tape, b, false));
    EXPECT_NEAR(loss.val().data[0], oracle::gradient_loss_ref(a, b), 1e-13);

    Tape<double> t2;
    Var<double> zero = efgn::gradient_loss(make_leaf(t2, a, false), make_leaf(t2, a, false));
    EXPECT_EQ(zero.val().data[0], 0.0);
}

TEST(GradientLoss, GradientMatchesFiniteDifferences) {
    efgn::Rng rng(211);
    Tensor<double> a = oracle::random_tensor({1, 2, 3, 3}, rng);
    Tensor<double> b = oracle::random_tensor({1, 2, 3, 3}, rng);
    Tape<double> tape;
    Var<double> va = make_leaf(tape, a, true);
    Var<double> vb = make_leaf(tape, b, true);
    Var<double> loss = efgn::gradient_loss(va, vb);
    tape.backward(loss.id);
    auto f = [](const std::vector<Tensor<double>>& xs) {
        return oracle::gradient_loss_ref(xs[0], xs[1]);
    };
    EXPECT_LT(oracle::max_grad_mismatch(f, {a, b},
                                        {tape.grad_view(va.id), tape.grad_view(vb.id)}),
              1e-3);
}

TEST(SstvLoss, MatchesOracleAndGradient) {
    efgn::Rng rng(213);
    Tensor<double> a = oracle::random_tensor({1, 3, 4, 4}, rng);
    Tape<double> tape;
    Var<double> va = make_leaf(tape, a, true);
    Var<double> loss = efgn::sstv_loss(va);
    EXPECT_NEAR(loss.val().data[0], oracle::sstv_ref(a), 1e-13);

    tape.backward(loss.id);
    auto f = [](const std::vector<Tensor<double>>& xs) { return oracle::sstv_ref(xs[0]); };
    EXPECT_LT(oracle::max_grad_mismatch(f, {a}, {tape.grad_view(va.id)}), 1e-3);

    Tensor<double> flat({1, 2, 3, 3}, 0.7);
    Tape<double> t2;
    Var<double> zero = efgn::sstv_loss(make_leaf(t2, flat, false));
    EXPECT_EQ(zero.val().data[0], 0.0);
}

TEST(TotalLoss, ExactWeightedCombination) {
    efgn::Rng rng(215);
    Tensor<double> a = oracle::random_tensor({1, 4, 4, 4}, rng, 0.1, 1.0);
    Tensor<double> b = oracle::random_tensor({1, 4, 4, 4}, rng, 0.1, 1.0);
    Tape<double> tape;
    efgn::LossWeights w;
    auto [total, rep] = efgn::total_loss(make_leaf(tape, a, false), make_leaf(tape, b, false), w);
    // The composition is left-associated in double, so equality is exact.
    const double want = ((rep.l1 + 0.5 * rep.l_spe) + 0.1 * rep.l_gra) + 1e-3 * rep.l_sstv;
    EXPECT_EQ(rep.total, want);
    EXPECT_EQ(total.val().data[0], want);
    EXPECT_NEAR(rep.l1, oracle::l1_ref(a, b), 1e-14);
    EXPECT_NEAR(rep.l_spe, oracle::spectral_ref(a, b), 1e-13);
    EXPECT_NEAR(rep.l_gra, oracle::gradient_loss_ref(a, b), 1e-13);
    EXPECT_NEAR(rep.l_sstv, oracle::sstv_ref(a), 1e-13);
}

TEST(TotalLoss, BackwardReachesBothInputs) {
    efgn::Rng rng(217);
    Tensor<double> a = oracle::random_tensor({1, 3, 3, 3}, rng, 0.1, 1.0);
    Tensor<double> b = oracle::random_tensor({1, 3, 3, 3}, rng, 0.1, 1.0);
    Tape<double> tape;
    Var<double> va = make_leaf(tape, a, true);
    Var<double> vb = make_leaf(tape, b, true);
    efgn::LossWeights w;
    auto [total, rep] = efgn::total_loss(va, vb, w);
    tape.backward(total.id);
    double na = 0.0, nb = 0.0;
    for (double g : tape.grad_view(va.id).data) na += g * g;
    for (double g : tape.grad_view(vb.id).data) nb += g * g;
    EXPECT_GT(na, 0.0);
    EXPECT_GT(nb, 0.0);
}

TEST(WeightedSum, LeftAssociatedAccumulation) {
    Tape<double> tape;
    Var<double> x = make_leaf(tape, Tensor<double>({1}, 0.3), true);
    Var<double> y = make_leaf(tape, Tensor<double>({1}, 0.7), true);
    Var<double> z = make_leaf(tape, Tensor<double>({1}, 1.1), true);
    Var<double> s = efgn::weighted_sum<double>({x, y, z}, {1.0, 0.5, 0.25});
    EXPECT_EQ(s.val().data[0], (0.3 + 0.5 * 0.7) + 0.25 * 1.1);
    tape.backward(s.id);
    EXPECT_DOUBLE_EQ(tape.grad_view(x.id).data[0], 1.0);
    EXPECT_DOUBLE_EQ(tape.grad_view(y.id).data[0], 0.5);
    EXPECT_DOUBLE_EQ(tape.grad_view(z.id).data[0], 0.25);
}

}  // namespace
