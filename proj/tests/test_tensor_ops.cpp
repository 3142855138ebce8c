#include <doctest.h>

#include <cmath>

#include "fame/ops.hpp"
#include "fame/rng.hpp"
#include "oracles.hpp"

using namespace fame;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape), Dtype::f64);
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set_value(i, rng.uniform(lo, hi));
    return t;
}

}  // namespace

TEST_CASE("tensor basics and invariants") {
    Tensor t = Tensor::from_values({1, 2, 3, 4, 5, 6}, {2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.shape() == Shape{2, 3});
    CHECK(t.value_at(4) == 5.0);
    CHECK_THROWS_AS(Tensor::from_values({1, 2}, {3}), DimensionError);
    CHECK_THROWS_AS(Tensor::zeros({0, 2}), DimensionError);

    Tensor c = t.clone();
    c.set_value(0, 99.0);
    CHECK(t.value_at(0) == 1.0);  // deep copy

    Tensor shared = t;
    shared.set_value(0, 7.0);
    CHECK(t.value_at(0) == 7.0);  // handles share storage

    Tensor f32 = t.to_dtype(Dtype::f32);
    CHECK(f32.dtype() == Dtype::f32);
    CHECK(f32.value_at(4) == doctest::Approx(5.0));
}

TEST_CASE("matmul identity and hand cases") {
    Tensor eye = Tensor::from_values({1, 0, 0, 1}, {2, 2});
    Tensor a = Tensor::from_values({1, 2, 3, 4}, {2, 2});
    Tensor out = matmul(nullptr, eye, a);
    for (int i = 0; i < 4; ++i) CHECK(out.value_at(i) == a.value_at(i));

    Tensor row = Tensor::from_values({1, 2}, {1, 2});
    Tensor col = Tensor::from_values({3, 4}, {2, 1});
    CHECK(matmul(nullptr, row, col).value_at(0) == 11.0);

    CHECK_THROWS_AS(matmul(nullptr, row, row), DimensionError);
}

TEST_CASE("conv2d identity kernel and hand case") {
    Tensor x = Tensor::from_values({1, 2, 3, 4, 5, 6, 7, 8, 9}, {1, 1, 3, 3});
    Tensor w = Tensor::from_values({1}, {1, 1, 1, 1});
    Tensor b = Tensor::zeros({1});
    Tensor y = conv2d(nullptr, x, w, b, 1, 0);
    CHECK(y.shape() == Shape{1, 1, 3, 3});
    for (int i = 0; i < 9; ++i) CHECK(y.value_at(i) == x.value_at(i));

    Tensor x2 = Tensor::from_values({1, 2, 3, 4}, {1, 1, 2, 2});
    Tensor w2 = Tensor::from_values({1, 0, 0, 1}, {1, 1, 2, 2});
    Tensor y2 = conv2d(nullptr, x2, w2, b, 1, 0);
    CHECK(y2.numel() == 1);
    CHECK(y2.value_at(0) == 5.0);

    // non-positive output dims
    Tensor big_kernel = Tensor::zeros({1, 1, 5, 5});
    CHECK_THROWS_AS(conv2d(nullptr, x2, big_kernel, b, 1, 0), DimensionError);
}

TEST_CASE("conv2d matches the naive loop oracle on 50 random instances") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(2));
        const int cin = 1 + static_cast<int>(rng.below(3));
        const int cout = 1 + static_cast<int>(rng.below(4));
        const int k = 1 + 2 * static_cast<int>(rng.below(2));  // 1 or 3
        const int size = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(8 - k + 1)));
        const int stride = 1 + static_cast<int>(rng.below(2));
        const int pad = static_cast<int>(rng.below(2));
        if ((size + 2 * pad - k) < 0) continue;
        Tensor x = random_tensor({n, cin, size, size}, rng);
        Tensor w = random_tensor({cout, cin, k, k}, rng);
        Tensor b = random_tensor({cout}, rng);
        Tensor got = conv2d(nullptr, x, w, b, stride, pad);
        Tensor want = oracle::conv2d_naive(x, w, b, stride, pad);
        REQUIRE(got.shape() == want.shape());
        for (std::int64_t i = 0; i < got.numel(); ++i) {
            CHECK(std::abs(got.value_at(i) - want.value_at(i)) <= 1e-12);
        }
    }
}

TEST_CASE("pool2d constants, hand cases, tie-break") {
    Tensor ones = Tensor::full({1, 1, 4, 4}, 3.5);
    Tensor mx = pool2d(nullptr, ones, PoolKind::max, 2, 2);
    Tensor av = pool2d(nullptr, ones, PoolKind::avg, 2, 2);
    for (std::int64_t i = 0; i < mx.numel(); ++i) {
        CHECK(mx.value_at(i) == 3.5);
        CHECK(av.value_at(i) == 3.5);
    }

    Tensor x = Tensor::from_values({1, 2, 3, 4}, {1, 1, 2, 2});
    CHECK(pool2d(nullptr, x, PoolKind::max, 2, 2).value_at(0) == 4.0);
    CHECK(pool2d(nullptr, x, PoolKind::avg, 2, 2).value_at(0) == 2.5);

    CHECK_THROWS_AS(pool2d(nullptr, x, PoolKind::max, 3, 1), DimensionError);

    // gradient goes to the first maximum in row-major order on ties
    Tensor tied = Tensor::from_values({7, 7, 7, 7}, {1, 1, 2, 2}).set_requires_grad(true);
    Tape tape;
    Tensor pooled = pool2d(&tape, tied, PoolKind::max, 2, 2);
    backward(sum_all(&tape, pooled), tape);
    CHECK(tied.grad_at(0) == 1.0);
    CHECK(tied.grad_at(1) == 0.0);
    CHECK(tied.grad_at(2) == 0.0);
    CHECK(tied.grad_at(3) == 0.0);
}

TEST_CASE("global_avg_pool trivial and gradient") {
    Tensor ones = Tensor::full({1, 3, 4, 4}, 1.0);
    Tensor out = global_avg_pool(nullptr, ones);
    CHECK(out.shape() == Shape{1, 3});
    for (int i = 0; i < 3; ++i) CHECK(out.value_at(i) == 1.0);

    Tensor x = Tensor::from_values({1, 2, 3, 4}, {1, 1, 2, 2});
    CHECK(global_avg_pool(nullptr, x).value_at(0) == 2.5);

    Tensor xg = Tensor::from_values({1, 2, 3, 4}, {1, 1, 2, 2}).set_requires_grad(true);
    Tape tape;
    backward(sum_all(&tape, global_avg_pool(&tape, xg)), tape);
    for (int i = 0; i < 4; ++i) CHECK(xg.grad_at(i) == doctest::Approx(0.25));
}

TEST_CASE("activations at reference points") {
    Tensor x = Tensor::from_values({-1.0, 0.0, 2.0}, {3});
    Tensor r = relu(nullptr, x);
    CHECK(r.value_at(0) == 0.0);
    CHECK(r.value_at(2) == 2.0);
    CHECK(sigmoid(nullptr, x).value_at(1) == 0.5);
    CHECK(tanh_act(nullptr, x).value_at(1) == 0.0);

    // forward ops on finite inputs stay finite, even at large magnitudes
    Tensor wide = Tensor::from_values({-700.0, 700.0, -1e9, 1e9}, {4});
    sigmoid(nullptr, wide).check_finite("sigmoid");
    tanh_act(nullptr, wide).check_finite("tanh");
    softmax(nullptr, wide, 0).check_finite("softmax");
}

TEST_CASE("softmax basics and invariants") {
    Tensor zeros = Tensor::zeros({3});
    Tensor s = softmax(nullptr, zeros, 0);
    for (int i = 0; i < 3; ++i) CHECK(s.value_at(i) == doctest::Approx(1.0 / 3).epsilon(1e-12));

    Tensor logs = Tensor::from_values({std::log(1.0), std::log(2.0), std::log(3.0)}, {3});
    Tensor s2 = softmax(nullptr, logs, 0);
    CHECK(s2.value_at(0) == doctest::Approx(1.0 / 6).epsilon(1e-12));
    CHECK(s2.value_at(1) == doctest::Approx(2.0 / 6).epsilon(1e-12));
    CHECK(s2.value_at(2) == doctest::Approx(3.0 / 6).epsilon(1e-12));

    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x = random_tensor({4, 5}, rng, -30.0, 30.0);
        Tensor sm = softmax(nullptr, x, 1);
        for (int row = 0; row < 4; ++row) {
            double sum = 0.0;
            for (int j = 0; j < 5; ++j) sum += sm.value_at(row * 5 + j);
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
        Tensor shifted = add_scalar(nullptr, x, 13.25);
        Tensor sm2 = softmax(nullptr, shifted, 1);
        for (std::int64_t i = 0; i < sm.numel(); ++i) {
            CHECK(std::abs(sm.value_at(i) - sm2.value_at(i)) <= 1e-12);
        }
    }
}

TEST_CASE("layer_norm analytic cases") {
    Tensor gamma = Tensor::full({4}, 1.0);
    Tensor beta = Tensor::zeros({4});
    Tensor constant = Tensor::full({4}, 5.0);
    Tensor out = layer_norm(nullptr, constant, gamma, beta, 1e-5);
    for (int i = 0; i < 4; ++i) CHECK(out.value_at(i) == doctest::Approx(0.0));

    Tensor g2 = Tensor::full({2}, 1.0);
    Tensor b2 = Tensor::zeros({2});
    Tensor two = Tensor::from_values({1.0, 3.0}, {2});
    Tensor normed = layer_norm(nullptr, two, g2, b2, 1e-12);
    CHECK(normed.value_at(0) == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(normed.value_at(1) == doctest::Approx(1.0).epsilon(1e-6));

    // standardization: per-slice mean ~0, variance ~1
    Rng rng(11);
    Tensor x = random_tensor({3, 8}, rng);
    Tensor y = layer_norm(nullptr, x, Tensor::full({8}, 1.0), Tensor::zeros({8}), 1e-10);
    for (int s = 0; s < 3; ++s) {
        double mean = 0.0, var = 0.0;
        for (int i = 0; i < 8; ++i) mean += y.value_at(s * 8 + i);
        mean /= 8;
        for (int i = 0; i < 8; ++i) {
            var += (y.value_at(s * 8 + i) - mean) * (y.value_at(s * 8 + i) - mean);
        }
        var /= 8;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("elementwise ops and shape utilities") {
    Tensor a = Tensor::from_values({1, 2, 3}, {3});
    Tensor b = Tensor::from_values({4, 5, 6}, {3});
    CHECK(add(nullptr, a, b).value_at(1) == 7.0);
    CHECK(sub(nullptr, a, b).value_at(0) == -3.0);
    CHECK(mul(nullptr, a, b).value_at(2) == 18.0);
    CHECK(div(nullptr, b, a).value_at(1) == 2.5);
    CHECK_THROWS_AS(add(nullptr, a, Tensor::zeros({4})), DimensionError);

    Tensor cat = concat(nullptr, a, b, 0);
    CHECK(cat.shape() == Shape{6});
    CHECK(cat.value_at(3) == 4.0);

    Tensor stacked = stack_rows(nullptr, {a, b});
    CHECK(stacked.shape() == Shape{2, 3});
    CHECK(select_row(nullptr, stacked, 1).value_at(2) == 6.0);
    CHECK(slice1d(nullptr, cat, 2, 4).value_at(0) == 3.0);
    CHECK(sum_axis0(nullptr, stacked).value_at(0) == 5.0);
    CHECK(mean_axis0(nullptr, stacked).value_at(2) == 4.5);
    CHECK(maximum_scalar(nullptr, a, 2.5).value_at(0) == 2.5);
    CHECK(maximum_scalar(nullptr, a, 2.5).value_at(2) == 3.0);
}

TEST_CASE("f32 path mirrors f64 forward results") {
    Rng rng(21);
    Tensor x64 = random_tensor({2, 3, 6, 6}, rng);
    Tensor w64 = random_tensor({4, 3, 3, 3}, rng);
    Tensor b64 = random_tensor({4}, rng);
    Tensor x32 = x64.to_dtype(Dtype::f32);
    Tensor w32 = w64.to_dtype(Dtype::f32);
    Tensor b32 = b64.to_dtype(Dtype::f32);
    Tensor y64 = conv2d(nullptr, x64, w64, b64, 1, 1);
    Tensor y32 = conv2d(nullptr, x32, w32, b32, 1, 1);
    CHECK(y32.dtype() == Dtype::f32);
    for (std::int64_t i = 0; i < y64.numel(); ++i) {
        CHECK(y32.value_at(i) == doctest::Approx(y64.value_at(i)).epsilon(1e-4));
    }
    CHECK_THROWS_AS(add(nullptr, x64, x32), DimensionError);
}
