#pragma once

#include "fame/layers.hpp"

namespace fame {

// The two attention mechanisms: a per-pixel spatial mask computed from
// channel-pooled feature maps, and the temporal mechanism in both published
// forms (per-dimension sigmoid gate as the default, scalar softmax weights
// behind the config switch).

struct SpatialAttnParams {
    LinearParams l1;  // [hidden, 2]
    LinearParams l2;  // [1, hidden]
};

enum class TemporalMode { none, gate, softmax };

struct TemporalGateParams {
    TemporalMode mode = TemporalMode::gate;
    // gate mode: A_t = sigmoid(LayerNorm(W_a h_t + b_a))
    LinearParams gate;  // [D, H_d]
    Tensor ln_gamma, ln_beta;
    double ln_eps = 1e-5;
    // softmax mode: e_t = v^T tanh(W_h h_t + b)
    LinearParams score;  // [H_d, H_d]
    Tensor v;            // [H_d]
};

SpatialAttnParams make_spatial_attn(int hidden, Rng& rng, Dtype dt);
TemporalGateParams make_temporal_params(TemporalMode mode, int h_d, int feature_dim, Rng& rng,
                                        Dtype dt);

// Channel avg/max pools -> shared per-pixel MLP -> sigmoid. Batched form
// [N,C,H,W] -> [N,1,H,W]; the single-frame wrapper matches [C,H,W] -> [1,H,W].
Tensor spatial_mask_batch(Tape* tape, const Tensor& f, const SpatialAttnParams& p);
Tensor spatial_mask(Tape* tape, const Tensor& f, const SpatialAttnParams& p);

// F' = F (.) M_s, broadcasting the one-channel mask.
Tensor apply_spatial(Tape* tape, const Tensor& f, const Tensor& mask);

// Gate mode: per-frame vector gate in (0,1)^D, [T,H_d] -> [T,D].
Tensor temporal_gate(Tape* tape, const Tensor& hseq, const TemporalGateParams& p);

// Softmax mode: raw scores e_t and normalized weights alpha.
Tensor temporal_scores(Tape* tape, const Tensor& hseq, const TemporalGateParams& p);
Tensor temporal_softmax_weights(Tape* tape, const Tensor& hseq, const TemporalGateParams& p);

// z_d = sum_t A_td R_td / max(sum_t A_td, 1e-8)
Tensor aggregate_gated(Tape* tape, const Tensor& r, const Tensor& a);
// z = sum_t alpha_t h_t
Tensor aggregate_softmax(Tape* tape, const Tensor& hseq, const Tensor& alpha);

}  // namespace fame
