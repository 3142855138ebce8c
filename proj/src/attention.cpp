#include "fame/attention.hpp"

namespace fame {

SpatialAttnParams make_spatial_attn(int hidden, Rng& rng, Dtype dt) {
    SpatialAttnParams p;
    p.l1 = make_linear(2, hidden, rng, dt);
    p.l2 = make_linear(hidden, 1, rng, dt);
    return p;
}

TemporalGateParams make_temporal_params(TemporalMode mode, int h_d, int feature_dim, Rng& rng,
                                        Dtype dt) {
    TemporalGateParams p;
    p.mode = mode;
    if (mode == TemporalMode::gate) {
        p.gate = make_linear(h_d, feature_dim, rng, dt);
        p.ln_gamma = Tensor::full(Shape{feature_dim}, 1.0, dt).set_requires_grad(true);
        p.ln_beta = Tensor::zeros(Shape{feature_dim}, dt).set_requires_grad(true);
    } else if (mode == TemporalMode::softmax) {
        p.score = make_linear(h_d, h_d, rng, dt);
        p.v = uniform_init(Shape{h_d}, h_d, rng, dt);
    }
    return p;
}

Tensor spatial_mask_batch(Tape* tape, const Tensor& f, const SpatialAttnParams& p) {
    if (f.rank() != 4) throw DimensionError("spatial_mask_batch: expects [N,C,H,W]");
    const std::int64_t n = f.dim(0), h = f.dim(2), w = f.dim(3);
    Tensor avg = channel_mean(tape, f);  // [N,H,W]
    Tensor mx = channel_max(tape, f);
    // Per-pixel two-vector through the shared MLP.
    Tensor cols = concat(tape, reshape(tape, avg, Shape{n * h * w, 1}),
                         reshape(tape, mx, Shape{n * h * w, 1}), 1);  // [NHW, 2]
    Tensor hidden = relu(tape, linear_forward(tape, cols, p.l1));
    Tensor logit = linear_forward(tape, hidden, p.l2);  // [NHW, 1]
    Tensor mask = sigmoid(tape, logit);
    return reshape(tape, mask, Shape{n, 1, h, w});
}

Tensor spatial_mask(Tape* tape, const Tensor& f, const SpatialAttnParams& p) {
    if (f.rank() != 3) throw DimensionError("spatial_mask: expects [C,H,W]");
    Tensor batched = reshape(tape, f, Shape{1, f.dim(0), f.dim(1), f.dim(2)});
    Tensor mask = spatial_mask_batch(tape, batched, p);
    return reshape(tape, mask, Shape{1, f.dim(1), f.dim(2)});
}

Tensor apply_spatial(Tape* tape, const Tensor& f, const Tensor& mask) {
    if (f.rank() == 3 && mask.rank() == 3) {
        Tensor fb = reshape(tape, f, Shape{1, f.dim(0), f.dim(1), f.dim(2)});
        Tensor mb = reshape(tape, mask, Shape{1, 1, mask.dim(1), mask.dim(2)});
        Tensor out = mul_mask(tape, fb, mb);
        return reshape(tape, out, f.shape());
    }
    return mul_mask(tape, f, mask);
}

Tensor temporal_gate(Tape* tape, const Tensor& hseq, const TemporalGateParams& p) {
    if (p.mode != TemporalMode::gate) {
        throw ContractError("temporal_gate: params are not in gate mode");
    }
    Tensor pre = linear_forward(tape, hseq, p.gate);              // [T, D]
    Tensor normed = layer_norm(tape, pre, p.ln_gamma, p.ln_beta, p.ln_eps);
    return sigmoid(tape, normed);
}

Tensor temporal_scores(Tape* tape, const Tensor& hseq, const TemporalGateParams& p) {
    if (p.mode != TemporalMode::softmax) {
        throw ContractError("temporal_scores: params are not in softmax mode");
    }
    Tensor u = tanh_act(tape, linear_forward(tape, hseq, p.score));  // [T, H_d]
    const std::int64_t h_d = p.v.dim(0);
    Tensor e = linear(tape, u, reshape(tape, p.v, Shape{1, h_d}), Tensor{});  // [T, 1]
    return reshape(tape, e, Shape{hseq.dim(0)});
}

Tensor temporal_softmax_weights(Tape* tape, const Tensor& hseq, const TemporalGateParams& p) {
    return softmax(tape, temporal_scores(tape, hseq, p), 0);
}

Tensor aggregate_gated(Tape* tape, const Tensor& r, const Tensor& a) {
    if (r.shape() != a.shape()) throw DimensionError("aggregate_gated: shape mismatch");
    Tensor weighted = mul(tape, a, r);
    Tensor num = sum_axis0(tape, weighted);
    Tensor den = maximum_scalar(tape, sum_axis0(tape, a), 1e-8);
    return div(tape, num, den);
}

Tensor aggregate_softmax(Tape* tape, const Tensor& hseq, const Tensor& alpha) {
    if (alpha.rank() != 1 || alpha.dim(0) != hseq.dim(0)) {
        throw DimensionError("aggregate_softmax: alpha must have one weight per timestep");
    }
    Tensor row = reshape(tape, alpha, Shape{1, alpha.dim(0)});
    Tensor z = matmul(tape, row, hseq);  // [1, H_d]
    return reshape(tape, z, Shape{hseq.dim(1)});
}

}  // namespace fame
