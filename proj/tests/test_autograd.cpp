// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "efgn/autograd.hpp"
#include "efgn/rng.hpp"
#include "oracles.hpp"

namespace {

using efgn::make_leaf;
using efgn::Tape;
using efgn::Tensor;
using efgn::Var;

// Runs the builder on a fresh tape and returns the scalar output value.
double eval_scalar(const std::function<Var<double>(Tape<double>&, std::vector<Var<double>>&)>& build,
                   const std::vector<Tensor<double>>& inputs) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& t : inputs) vars.push_back(make_leaf(tape, t, false));
    return build(tape, vars).val().data[0];
}

// Analytic gradients for all inputs of a scalar-valued graph.
std::vector<Tensor<double>> analytic_grads(
    const std::function<Var<double>(Tape<double>&, std::vector<Var<double>>&)>& build,
    const std::vector<Tensor<double>>& inputs) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& t : inputs) vars.push_back(make_leaf(tape, t, true));
    Var<double> out = build(tape, vars);
    tape.backward(out.id);
    std::vector<Tensor<double>> grads;
    for (const auto& v : vars) grads.push_back(tape.grad_view(v.id));
    return grads;
}

double check_grads(const std::function<Var<double>(Tape<double>&, std::vector<Var<double>>&)>& build,
                   const std::vector<Tensor<double>>& inputs) {
    auto f = [&](const std::vector<Tensor<double>>& xs) { return eval_scalar(build, xs); };
    return oracle::max_grad_mismatch(f, inputs, analytic_grads(build, inputs));
}

// Reduce to a scalar with fixed coefficients so every element contributes.
Var<double> weigh_down(Tape<double>& t, Var<double> x) {
    Tensor<double> w(x.val().shape);
    for (std::size_t i = 0; i < w.numel(); ++i) {
        w.data[i] = 0.3 + 0.05 * static_cast<double>(i % 17) - 0.02 * static_cast<double>(i % 5);
    }
    Var<double> prod = efgn::mul(x, make_leaf(t, std::move(w), false));
    Var<double> pooled = efgn::global_avg_pool(prod);
    // Collapse the remaining per-channel vector by another product + pool.
    Tensor<double> cw(pooled.val().shape);
    for (std::size_t i = 0; i < cw.numel(); ++i) cw.data[i] = 1.0 + 0.1 * static_cast<double>(i);
    Var<double> mixed = efgn::mul(pooled, make_leaf(t, std::move(cw), false));
    Var<double> flat = efgn::reshape(mixed, {1, 1, static_cast<int>(mixed.val().numel()), 1});
    return efgn::reshape(efgn::global_avg_pool(flat), {1});
}

TEST(Autograd, AddMulForwardAndGrad) {
    efgn::Rng rng(11);
    Tensor<double> a = oracle::random_tensor({1, 3, 4, 5}, rng);
    Tensor<double> b = oracle::random_tensor({1, 3, 4, 5}, rng);
    auto build = [](Tape<double>& t, std::vector<Var<double>>& v) {
        return weigh_down(t, efgn::add(efgn::mul(v[0], v[1]), v[0]));
    };
    Tape<double> tape;
    std::vector<Var<double>> vars{make_leaf(tape, a, false), make_leaf(tape, b, false)};
    Var<double> sum = efgn::add(vars[0], vars[1]);
    Var<double> prod = efgn::mul(vars[0], vars[1]);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        EXPECT_DOUBLE_EQ(sum.val().data[i], a.data[i] + b.data[i]);
        EXPECT_DOUBLE_EQ(prod.val().data[i], a.data[i] * b.data[i]);
    }
    EXPECT_LT(check_grads(build, {a, b}), 1e-6);
}

TEST(Autograd, LeakyReluValueAndGrad) {
    Tape<double> tape;
    Tensor<double> x({1, 1, 1, 4});
    x.data = {-2.0, -0.5, 0.5, 2.0};
    Var<double> y = efgn::leaky_relu(make_leaf(tape, x, false), 0.2);
    EXPECT_DOUBLE_EQ(y.val().data[0], -0.4);
    EXPECT_DOUBLE_EQ(y.val().data[1], -0.1);
    EXPECT_DOUBLE_EQ(y.val().data[2], 0.5);
    EXPECT_DOUBLE_EQ(y.val().data[3], 2.0);

    efgn::Rng rng(3);
    Tensor<double> r = oracle::random_tensor({1, 2, 3, 3}, rng);
    auto build = [](Tape<double>& t, std::vector<Var<double>>& v) {
        return weigh_down(t, efgn::leaky_relu(v[0], 0.2));
    };
    EXPECT_LT(check_grads(build, {r}), 1e-5);
}

TEST(Autograd, SigmoidValueAndGrad) {
    Tape<double> tape;
    Tensor<double> x({1, 1, 1, 3});
    x.data = {0.0, 2.0, -2.0};
    Var<double> y = efgn::sigmoid(make_leaf(tape, x, false));
    EXPECT_DOUBLE_EQ(y.val().data[0], 0.5);
    EXPECT_NEAR(y.val().data[1], 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
    EXPECT_NEAR(y.val().data[2], 1.0 / (1.0 + std::exp(2.0)), 1e-15);

    efgn::Rng rng(5);
    Tensor<double> r = oracle::random_tensor({1, 2, 2, 2}, rng);
    auto build = [](Tape<double>& t, std::vector<Var<double>>& v) {
        return weigh_down(t, efgn::sigmoid(v[0]));
    };
    EXPECT_LT(check_grads(build, {r}), 1e-6);
}

TEST(Autograd, ConcatSliceRoundTrip) {
    efgn::Rng rng(13);
    Tensor<double> a = oracle::random_tensor({2, 3, 2, 2}, rng);
    Tensor<double> b = oracle::random_tensor({2, 5, 2, 2}, rng);
    Tape<double> tape;
    Var<double> va = make_leaf(tape, a, false);
    Var<double> vb = make_leaf(tape, b, false);
    Var<double> cat = efgn::concat_channels<double>({va, vb});
    EXPECT_EQ(cat.val().dim(1), 8);
    Var<double> back_a = efgn::slice_channels(cat, 0, 3);
    Var<double> back_b = efgn::slice_channels(cat, 3, 8);
    EXPECT_EQ(back_a.val().data, a.data);
    EXPECT_EQ(back_b.val().data, b.data);

    auto build = [](Tape<double>& t, std::vector<Var<double>>& v) {
        Var<double> c = efgn::concat_channels<double>({v[0], v[1]});
        return weigh_down(t, efgn::slice_channels(c, 1, 7));
    };
    EXPECT_LT(check_grads(build, {a, b}), 1e-6);
}

TEST(Autograd, ChannelShuffleMappingAndInverse) {
    // Shuffling [p0 p1 | q0 q1 | r0 r1] with 3 pieces interleaves the pieces:
    // output channel j reads input (j % 3) * 2 + j / 3.
    const std::vector<int> src = efgn::shuffle_sources(6, 3);
    EXPECT_EQ(src, (std::vector<int>{0, 2, 4, 1, 3, 5}));

    efgn::Rng rng(17);
    Tensor<double> x = oracle::random_tensor({1, 6, 2, 2}, rng);
    Tape<double> tape;
    Var<double> v = make_leaf(tape, x, false);
    Var<double> once = efgn::channel_shuffle(v, 3);
    for (int c = 0; c < 6; ++c) {
        for (int i = 0; i < 4; ++i) {
            EXPECT_EQ(once.val().data[c * 4 + i], x.data[src[c] * 4 + i]);
        }
    }
    // Shuffling with pieces and then with channels/pieces is the identity.
    Var<double> back = efgn::channel_shuffle(once, 2);
    EXPECT_EQ(back.val().data, x.data);

    auto build = [](Tape<double>& t, std::vector<Var<double>>& v2) {
        return weigh_down(t, efgn::channel_shuffle(v2[0], 3));
    };
    EXPECT_LT(check_grads(build, {x}), 1e-6);
}

TEST(Autograd, ReshapePreservesDataAndGrad) {
    efgn::Rng rng(19);
    Tensor<double> x = oracle::random_tensor({1, 4, 3, 2}, rng);
    Tape<double> tape;
    Var<double> v = make_leaf(tape, x, false);
    Var<double> r = efgn::reshape(v, {1, 2, 6, 2});
    EXPECT_EQ(r.val().data, x.data);
    EXPECT_THROW(efgn::reshape(v, {1, 5, 5, 1}), std::invalid_argument);

    auto build = [](Tape<double>& t, std::vector<Var<double>>& v2) {
        return weigh_down(t, efgn::reshape(v2[0], {1, 2, 6, 2}));
    };
    EXPECT_LT(check_grads(build, {x}), 1e-6);
}

TEST(Autograd, GlobalAvgPoolValueAndGrad) {
    Tensor<double> x({1, 2, 2, 2});
    x.data = {1, 2, 3, 4, 10, 20, 30, 40};
    Tape<double> tape;
    Var<double> pooled = efgn::global_avg_pool(make_leaf(tape, x, false));
    EXPECT_EQ(pooled.val().shape, (std::vector<int>{1, 2, 1, 1}));
    EXPECT_DOUBLE_EQ(pooled.val().data[0], 2.5);
    EXPECT_DOUBLE_EQ(pooled.val().data[1], 25.0);

    efgn::Rng rng(23);
    Tensor<double> r = oracle::random_tensor({2, 3, 2, 4}, rng);
    auto build = [](Tape<double>& t, std::vector<Var<double>>& v) {
        return weigh_down(t, efgn::global_avg_pool(v[0]));
    };
    EXPECT_LT(check_grads(build, {r}), 1e-6);
}

TEST(Autograd, ScaleChannelsValueAndGrad) {
    efgn::Rng rng(29);
    Tensor<double> x = oracle::random_tensor({2, 3, 2, 2}, rng);
    Tensor<double> w = oracle::random_tensor({2, 3, 1, 1}, rng, 0.1, 0.9);
    Tape<double> tape;
    Var<double> y =
        efgn::scale_channels(make_leaf(tape, x, false), make_leaf(tape, w, false));
    for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 4; ++i)
                EXPECT_DOUBLE_EQ(y.val().data[(b * 3 + c) * 4 + i],
                                 x.data[(b * 3 + c) * 4 + i] * w.data[b * 3 + c]);

    auto build = [](Tape<double>& t, std::vector<Var<double>>& v) {
        return weigh_down(t, efgn::scale_channels(v[0], v[1]));
    };
    EXPECT_LT(check_grads(build, {x, w}), 1e-6);
}

TEST(Autograd, DepthToSpaceLayout) {
    // One 2x2 cell from four channels, row-major within the cell.
    Tensor<double> x({1, 4, 1, 1});
    x.data = {1, 2, 3, 4};
    Tape<double> tape;
    Var<double> y = efgn::depth_to_space(make_leaf(tape, x, false), 2);
    EXPECT_EQ(y.val().shape, (std::vector<int>{1, 1, 2, 2}));
    EXPECT_EQ(y.val().data, (std::vector<double>{1, 2, 3, 4}));

    efgn::Rng rng(31);
    Tensor<double> r = oracle::random_tensor({1, 8, 2, 3}, rng);
    auto build = [](Tape<double>& t, std::vector<Var<double>>& v) {
        return weigh_down(t, efgn::depth_to_space(v[0], 2));
    };
    EXPECT_LT(check_grads(build, {r}), 1e-6);
}

TEST(Autograd, BackwardRequiresScalarRoot) {
    Tape<double> tape;
    Tensor<double> x({1, 2, 2, 2}, 1.0);
    Var<double> v = make_leaf(tape, x, true);
    Var<double> y = efgn::add(v, v);
    EXPECT_THROW(tape.backward(y.id), std::invalid_argument);

    Tensor<double> seed({1, 2, 2, 2}, 1.0);
    tape.backward_with(y.id, seed);
    for (double g : tape.grad_view(v.id).data) EXPECT_DOUBLE_EQ(g, 2.0);
}

TEST(Autograd, GradSkippedWithoutRequiresGrad) {
    Tape<double> tape;
    Tensor<double> x({1}, 3.0);
    Var<double> a = make_leaf(tape, x, false);
    Var<double> b = make_leaf(tape, x, true);
    Var<double> y = efgn::mul(a, b);
    tape.backward(y.id);
    EXPECT_FALSE(tape.needs_grad(a.id));
    EXPECT_TRUE(tape.needs_grad(b.id));
    EXPECT_DOUBLE_EQ(tape.grad_view(b.id).data[0], 3.0);
}

TEST(Autograd, DiamondGraphAccumulates) {
    Tape<double> tape;
    Tensor<double> x({1}, 2.0);
    Var<double> v = make_leaf(tape, x, true);
    Var<double> y = efgn::add(efgn::mul(v, v), v);  // x^2 + x, dy/dx = 2x + 1
    tape.backward(y.id);
    EXPECT_DOUBLE_EQ(tape.grad_view(v.id).data[0], 5.0);
}

}  // namespace
