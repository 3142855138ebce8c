#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fame/attention.hpp"
#include "fame/layers.hpp"

namespace fame {

struct FameConfig {
    int input_size = 112;
    int channels = 3;
    int frames = 10;
    std::vector<std::vector<int>> stages = {{64, 64}, {128, 128}, {256, 256, 256, 256}};
    int h_cell = 96;
    int spatial_hidden = 8;
    bool spatial_attention = true;
    TemporalMode temporal_mode = TemporalMode::gate;
    int classes = 5;
    double dropout = 0.0;
    double loss_alpha = 0.5;
    double loss_beta = 0.5;
    Dtype precision = Dtype::f64;

    void validate() const;  // throws ConfigError
    int feature_dim() const { return stages.back().back(); }
    int hidden_dim() const { return 2 * h_cell; }
    // Width of the vector entering the classification head: the gated mean
    // lives in feature space, softmax/plain means live in BiLSTM space.
    int head_in_dim() const {
        return temporal_mode == TemporalMode::gate ? feature_dim() : hidden_dim();
    }
    int feature_map_size() const {
        int s = input_size;
        for (std::size_t i = 0; i < stages.size(); ++i) s /= 2;
        return s;
    }
};

struct NamedParam {
    std::string name;
    Tensor tensor;
    bool decay = false;  // weight decay applies (excluded for biases and norm affine)
};

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

struct FameModel {
    FameConfig config;
    std::vector<ConvBlock> backbone;       // flattened conv blocks
    std::vector<int> blocks_per_stage;     // maxpool after each stage
    BatchNorm condense_bn;                 // the ReLU->BN->AvgPool condense step
    SpatialAttnParams spatial;             // present iff config.spatial_attention
    LstmPair lstm;
    TemporalGateParams temporal;
    LinearParams clip_head;   // head_in_dim -> K
    LinearParams frame_head;  // feature_dim -> K (frame-level auxiliary logits)

    std::vector<NamedParam> named_parameters();
    std::vector<NamedTensor> named_buffers();  // BN running statistics
};

struct ForwardOutput {
    Tensor clip_logits;   // [K]
    Tensor frame_logits;  // [T, K]
    // diagnostics
    Tensor backbone_act;  // [T, D, h, w] final backbone map, pre-spatial-mask
    Tensor masks;         // [T, 1, h, w] when spatial attention is on
    Tensor gate;          // [T, D] gate activations or [T] softmax weights
    Tensor features;      // [T, D] condensed frame vectors R
    Tensor pooled;        // [head_in_dim] aggregated clip vector z
};

FameModel build_model(const FameConfig& cfg, std::uint64_t seed);

// Batched forward pass: the backbone and condense stages run once over all
// frames of all clips stacked ([B*T, C, S, S]), so training-mode batch
// statistics span the whole mini-batch the way a batch-of-32 training step
// expects; the recurrent and attention stages then run per clip. dropout_rng
// is required only when training with a nonzero dropout rate.
std::vector<ForwardOutput> forward_clips(Tape* tape, FameModel& m,
                                         const std::vector<Tensor>& clips, bool training,
                                         Rng* dropout_rng = nullptr);

// Single-clip wrapper (a batch of one).
ForwardOutput forward_clip(Tape* tape, FameModel& m, const Tensor& clip, bool training,
                           Rng* dropout_rng = nullptr);

// alpha * mean-over-frames CE(frame logits) + beta * CE(clip logits), class
// weight multiplying both terms of the sample's true class.
Tensor hybrid_loss(Tape* tape, const ForwardOutput& out, int label, const FameConfig& cfg,
                   const Tensor& class_weights);

// Eval-mode prediction: (argmax class with ties to the lowest index,
// softmax probabilities).
std::pair<int, std::vector<double>> attribute(FameModel& m, const Tensor& clip);

std::int64_t count_params(FameModel& m);

struct ParamBreakdown {
    std::vector<std::pair<std::string, std::int64_t>> groups;
    std::int64_t total = 0;               // learnable scalars
    std::int64_t backbone_learnable = 0;  // conv weights+biases and BN affine
    std::int64_t backbone_with_stats = 0; // learnable plus BN running mean/var
};
ParamBreakdown param_breakdown(FameModel& m);

// Documented closed-form estimate, multiply-accumulate counted as 2 FLOPs:
//   conv           2*k^2*Cin*Cout*H'*W'
//   batchnorm      4 per element            relu / sigmoid / tanh  1 per element
//   pool           k^2 per output element   global avg pool        1 per input element
//   linear         2*Din*Dout + Dout
//   lstm step      2*4H*(Din+H) + 14H per direction
//   spatial attn   2C hw + hw*(4 hidden + 2 hidden) + hw hidden + hw + C hw
//   gate attn      per frame 2*D*H_d + 7D, aggregation 3TD + D
//   softmax attn   per frame 2*H_d^2 + 4 H_d, softmax 5T, aggregation 2T H_d
// Per-frame terms scale with `frames`; the clip head contributes a constant.
std::int64_t estimate_flops(const FameConfig& cfg, int frames);
inline std::int64_t estimate_flops(const FameModel& m, int frames) {
    return estimate_flops(m.config, frames);
}

// The conv term of the estimate, usable on its own.
inline std::int64_t conv_flops(std::int64_t k, std::int64_t cin, std::int64_t cout,
                               std::int64_t ho, std::int64_t wo) {
    return 2 * k * k * cin * cout * ho * wo;
}

}  // namespace fame
