#include <doctest.h>

#include <cmath>

#include "fame/attention.hpp"
#include "fame/finite_diff.hpp"

using namespace fame;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape), Dtype::f64);
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set_value(i, rng.uniform(lo, hi));
    return t;
}

}  // namespace

TEST_CASE("spatial_mask: zero MLP gives 0.5 everywhere; range is (0,1)") {
    SpatialAttnParams zero;
    zero.l1.weight = Tensor::zeros({8, 2});
    zero.l1.bias = Tensor::zeros({8});
    zero.l2.weight = Tensor::zeros({1, 8});
    zero.l2.bias = Tensor::zeros({1});
    Tensor f = Tensor::full({4, 5, 5}, 0.37);
    Tensor mask = spatial_mask(nullptr, f, zero);
    CHECK(mask.shape() == Shape{1, 5, 5});
    for (std::int64_t i = 0; i < mask.numel(); ++i) CHECK(mask.value_at(i) == 0.5);

    Rng rng(30);
    SpatialAttnParams p = make_spatial_attn(8, rng, Dtype::f64);
    Tensor fr = random_tensor({6, 7, 7}, rng, -3.0, 3.0);
    Tensor m = spatial_mask(nullptr, fr, p);
    for (std::int64_t i = 0; i < m.numel(); ++i) {
        CHECK(m.value_at(i) > 0.0);
        CHECK(m.value_at(i) < 1.0);
    }
}

TEST_CASE("spatial_mask is invariant under channel permutations") {
    Rng rng(31);
    SpatialAttnParams p = make_spatial_attn(8, rng, Dtype::f64);
    Tensor f = random_tensor({5, 6, 6}, rng);
    Tensor permuted = Tensor::zeros({5, 6, 6});
    const int perm[5] = {3, 0, 4, 1, 2};
    for (int c = 0; c < 5; ++c) {
        for (int i = 0; i < 36; ++i) {
            permuted.set_value(c * 36 + i, f.value_at(perm[c] * 36 + i));
        }
    }
    Tensor m1 = spatial_mask(nullptr, f, p);
    Tensor m2 = spatial_mask(nullptr, permuted, p);
    for (std::int64_t i = 0; i < m1.numel(); ++i) {
        CHECK(m1.value_at(i) == doctest::Approx(m2.value_at(i)).epsilon(1e-14));
    }
}

TEST_CASE("apply_spatial: identity mask, zero mask, contraction") {
    Rng rng(32);
    Tensor f = random_tensor({3, 4, 4}, rng, -2.0, 2.0);
    Tensor ones = Tensor::full({1, 4, 4}, 1.0);
    Tensor zeros = Tensor::zeros({1, 4, 4});
    Tensor same = apply_spatial(nullptr, f, ones);
    Tensor dark = apply_spatial(nullptr, f, zeros);
    for (std::int64_t i = 0; i < f.numel(); ++i) {
        CHECK(same.value_at(i) == f.value_at(i));
        CHECK(dark.value_at(i) == 0.0);
    }
    SpatialAttnParams p = make_spatial_attn(8, rng, Dtype::f64);
    Tensor m = spatial_mask(nullptr, f, p);
    Tensor shrunk = apply_spatial(nullptr, f, m);
    for (std::int64_t i = 0; i < f.numel(); ++i) {
        CHECK(std::abs(shrunk.value_at(i)) <= std::abs(f.value_at(i)));
    }
    CHECK_THROWS_AS(apply_spatial(nullptr, f, Tensor::zeros({1, 3, 3})), DimensionError);
}

TEST_CASE("temporal_gate: zero params with identity LN give uniform 0.5") {
    TemporalGateParams p;
    p.mode = TemporalMode::gate;
    p.gate.weight = Tensor::zeros({6, 8});
    p.gate.bias = Tensor::zeros({6});
    p.ln_gamma = Tensor::full({6}, 1.0);
    p.ln_beta = Tensor::zeros({6});
    Rng rng(33);
    Tensor h = random_tensor({4, 8}, rng);
    Tensor a = temporal_gate(nullptr, h, p);
    CHECK(a.shape() == Shape{4, 6});
    for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a.value_at(i) == 0.5);
}

TEST_CASE("temporal_gate outputs in (0,1); wrong mode errors; gradient checks") {
    Rng rng(34);
    TemporalGateParams p = make_temporal_params(TemporalMode::gate, 8, 6, rng, Dtype::f64);
    Tensor h = random_tensor({5, 8}, rng);
    Tensor a = temporal_gate(nullptr, h, p);
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        CHECK(a.value_at(i) > 0.0);
        CHECK(a.value_at(i) < 1.0);
    }
    TemporalGateParams sm = make_temporal_params(TemporalMode::softmax, 8, 6, rng, Dtype::f64);
    CHECK_THROWS_AS(temporal_gate(nullptr, h, sm), ContractError);
    CHECK_THROWS_AS(temporal_softmax_weights(nullptr, h, p), ContractError);

    std::vector<Tensor> params = {p.gate.weight, p.gate.bias, p.ln_gamma, p.ln_beta};
    for (auto& t : params) {
        t.ensure_grad();
        t.zero_grad();
    }
    Tensor target = random_tensor({5, 6}, rng);
    auto build = [&](Tape* tape) {
        return sum_all(tape, mul(tape, temporal_gate(tape, h, p), target));
    };
    Tape tape;
    backward(build(&tape), tape);
    auto f = [&]() { return build(nullptr).scalar_value(); };
    CHECK(finite_diff_check(f, params).max_rel_err <= 1e-4);
}

TEST_CASE("temporal softmax weights: symmetry, T=1, shift invariance") {
    Rng rng(35);
    TemporalGateParams p = make_temporal_params(TemporalMode::softmax, 8, 6, rng, Dtype::f64);

    // identical h_t for all t -> uniform 1/T
    Tensor row = random_tensor({8}, rng);
    Tensor h = stack_rows(nullptr, {row, row, row, row});
    Tensor alpha = temporal_softmax_weights(nullptr, h, p);
    for (int t = 0; t < 4; ++t) CHECK(alpha.value_at(t) == doctest::Approx(0.25).epsilon(1e-12));

    Tensor h1 = stack_rows(nullptr, {row});
    CHECK(temporal_softmax_weights(nullptr, h1, p).value_at(0) == 1.0);

    // weights equal softmax(scores) and softmax is shift invariant
    Tensor hr = random_tensor({5, 8}, rng);
    Tensor scores = temporal_scores(nullptr, hr, p);
    Tensor direct = softmax(nullptr, scores, 0);
    Tensor shifted = softmax(nullptr, add_scalar(nullptr, scores, 4.2), 0);
    Tensor weights = temporal_softmax_weights(nullptr, hr, p);
    double sum = 0.0;
    for (int t = 0; t < 5; ++t) {
        CHECK(weights.value_at(t) == direct.value_at(t));
        CHECK(std::abs(direct.value_at(t) - shifted.value_at(t)) <= 1e-12);
        sum += weights.value_at(t);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("aggregate_gated: constant gate reduces to mean; T=1 passthrough; convexity") {
    Rng rng(36);
    Tensor r = random_tensor({4, 6}, rng, -2.0, 2.0);
    Tensor a = Tensor::full({4, 6}, 0.37);
    Tensor z = aggregate_gated(nullptr, r, a);
    for (int d = 0; d < 6; ++d) {
        double mean = 0.0;
        for (int t = 0; t < 4; ++t) mean += r.value_at(t * 6 + d);
        mean /= 4.0;
        CHECK(z.value_at(d) == doctest::Approx(mean).epsilon(1e-12));
    }

    Tensor r1 = random_tensor({1, 6}, rng);
    Tensor a1 = random_tensor({1, 6}, rng, 0.1, 0.9);
    Tensor z1 = aggregate_gated(nullptr, r1, a1);
    for (int d = 0; d < 6; ++d) CHECK(z1.value_at(d) == doctest::Approx(r1.value_at(d)).epsilon(1e-12));

    Tensor ar = random_tensor({4, 6}, rng, 0.05, 0.95);
    Tensor zc = aggregate_gated(nullptr, r, ar);
    for (int d = 0; d < 6; ++d) {
        double lo = 1e9, hi = -1e9;
        for (int t = 0; t < 4; ++t) {
            lo = std::min(lo, r.value_at(t * 6 + d));
            hi = std::max(hi, r.value_at(t * 6 + d));
        }
        CHECK(zc.value_at(d) >= lo - 1e-12);
        CHECK(zc.value_at(d) <= hi + 1e-12);
    }
}

TEST_CASE("aggregate_softmax: uniform mean, one-hot selection, convex hull") {
    Rng rng(37);
    Tensor h = random_tensor({3, 5}, rng, -2.0, 2.0);
    Tensor uniform = Tensor::full({3}, 1.0 / 3.0);
    Tensor z = aggregate_softmax(nullptr, h, uniform);
    for (int d = 0; d < 5; ++d) {
        double mean = 0.0;
        for (int t = 0; t < 3; ++t) mean += h.value_at(t * 5 + d);
        mean /= 3.0;
        CHECK(z.value_at(d) == doctest::Approx(mean).epsilon(1e-12));
    }
    Tensor onehot = Tensor::from_values({0, 0, 1}, {3});
    Tensor zsel = aggregate_softmax(nullptr, h, onehot);
    for (int d = 0; d < 5; ++d) CHECK(zsel.value_at(d) == h.value_at(2 * 5 + d));

    Tensor alpha = Tensor::from_values({0.2, 0.5, 0.3}, {3});
    Tensor zc = aggregate_softmax(nullptr, h, alpha);
    for (int d = 0; d < 5; ++d) {
        double lo = 1e9, hi = -1e9;
        for (int t = 0; t < 3; ++t) {
            lo = std::min(lo, h.value_at(t * 5 + d));
            hi = std::max(hi, h.value_at(t * 5 + d));
        }
        CHECK(zc.value_at(d) >= lo - 1e-12);
        CHECK(zc.value_at(d) <= hi + 1e-12);
    }
}
