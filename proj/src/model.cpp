#include "fame/model.hpp"

#include <algorithm>
#include <cmath>

namespace fame {

void FameConfig::validate() const {
    if (classes < 2) throw ConfigError("config: need at least 2 classes");
    if (frames < 1) throw ConfigError("config: frames must be >= 1");
    if (input_size < 1 || channels < 1) throw ConfigError("config: bad input dimensions");
    if (stages.empty()) throw ConfigError("config: backbone needs at least one stage");
    for (const auto& st : stages) {
        if (st.empty()) throw ConfigError("config: empty backbone stage");
        for (int w : st) {
            if (w < 1) throw ConfigError("config: non-positive stage width");
        }
    }
    int s = input_size;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (s < 2 || s % 2 != 0) {
            throw ConfigError("config: input size " + std::to_string(input_size) +
                              " does not survive " + std::to_string(stages.size()) + " pools");
        }
        s /= 2;
    }
    if (h_cell < 1) throw ConfigError("config: h_cell must be >= 1");
    if (spatial_hidden < 1) throw ConfigError("config: spatial_hidden must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("config: dropout must be in [0, 1)");
    if (loss_alpha < 0.0 || loss_beta < 0.0 || loss_alpha + loss_beta <= 0.0) {
        throw ConfigError("config: loss weights must be non-negative with positive sum");
    }
}

FameModel build_model(const FameConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    FameModel m;
    m.config = cfg;
    Rng rng(seed);
    const Dtype dt = cfg.precision;
    int cin = cfg.channels;
    for (const auto& stage : cfg.stages) {
        m.blocks_per_stage.push_back(static_cast<int>(stage.size()));
        for (int cout : stage) {
            m.backbone.push_back(make_conv_block(cin, cout, rng, dt));
            cin = cout;
        }
    }
    m.condense_bn = make_batchnorm(cfg.feature_dim(), dt);
    if (cfg.spatial_attention) {
        m.spatial = make_spatial_attn(cfg.spatial_hidden, rng, dt);
    }
    m.lstm.fwd = make_lstm_params(cfg.feature_dim(), cfg.h_cell, rng, dt);
    m.lstm.bwd = make_lstm_params(cfg.feature_dim(), cfg.h_cell, rng, dt);
    m.temporal = make_temporal_params(cfg.temporal_mode, cfg.hidden_dim(), cfg.feature_dim(), rng, dt);
    m.clip_head = make_linear(cfg.head_in_dim(), cfg.classes, rng, dt);
    m.frame_head = make_linear(cfg.feature_dim(), cfg.classes, rng, dt);
    return m;
}

std::vector<NamedParam> FameModel::named_parameters() {
    std::vector<NamedParam> out;
    auto push = [&out](const std::string& name, const Tensor& t, bool decay) {
        if (t.defined()) out.push_back({name, t, decay});
    };
    for (std::size_t i = 0; i < backbone.size(); ++i) {
        const std::string p = "backbone." + std::to_string(i) + ".";
        push(p + "conv.weight", backbone[i].weight, true);
        push(p + "conv.bias", backbone[i].bias, false);
        push(p + "bn.gamma", backbone[i].bn.gamma, false);
        push(p + "bn.beta", backbone[i].bn.beta, false);
    }
    push("condense_bn.gamma", condense_bn.gamma, false);
    push("condense_bn.beta", condense_bn.beta, false);
    if (config.spatial_attention) {
        push("spatial.l1.weight", spatial.l1.weight, true);
        push("spatial.l1.bias", spatial.l1.bias, false);
        push("spatial.l2.weight", spatial.l2.weight, true);
        push("spatial.l2.bias", spatial.l2.bias, false);
    }
    push("lstm.fwd.w_x", lstm.fwd.w_x, true);
    push("lstm.fwd.w_h", lstm.fwd.w_h, true);
    push("lstm.fwd.bias", lstm.fwd.bias, false);
    push("lstm.bwd.w_x", lstm.bwd.w_x, true);
    push("lstm.bwd.w_h", lstm.bwd.w_h, true);
    push("lstm.bwd.bias", lstm.bwd.bias, false);
    if (config.temporal_mode == TemporalMode::gate) {
        push("temporal.gate.weight", temporal.gate.weight, true);
        push("temporal.gate.bias", temporal.gate.bias, false);
        push("temporal.ln_gamma", temporal.ln_gamma, false);
        push("temporal.ln_beta", temporal.ln_beta, false);
    } else if (config.temporal_mode == TemporalMode::softmax) {
        push("temporal.score.weight", temporal.score.weight, true);
        push("temporal.score.bias", temporal.score.bias, false);
        push("temporal.v", temporal.v, true);
    }
    push("clip_head.weight", clip_head.weight, true);
    push("clip_head.bias", clip_head.bias, false);
    push("frame_head.weight", frame_head.weight, true);
    push("frame_head.bias", frame_head.bias, false);
    return out;
}

std::vector<NamedTensor> FameModel::named_buffers() {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < backbone.size(); ++i) {
        const std::string p = "backbone." + std::to_string(i) + ".bn.";
        out.push_back({p + "running_mean", backbone[i].bn.running_mean});
        out.push_back({p + "running_var", backbone[i].bn.running_var});
    }
    out.push_back({"condense_bn.running_mean", condense_bn.running_mean});
    out.push_back({"condense_bn.running_var", condense_bn.running_var});
    return out;
}

std::vector<ForwardOutput> forward_clips(Tape* tape, FameModel& m,
                                         const std::vector<Tensor>& clips, bool training,
                                         Rng* dropout_rng) {
    const FameConfig& cfg = m.config;
    if (clips.empty()) throw ContractError("forward_clips: empty batch");
    for (const Tensor& clip : clips) {
        if (clip.rank() != 4 || clip.dim(0) != cfg.frames || clip.dim(1) != cfg.channels ||
            clip.dim(2) != cfg.input_size || clip.dim(3) != cfg.input_size) {
            throw ContractError("forward_clips: clip shape " + shape_str(clip.shape()) +
                                " does not match configured " + std::to_string(cfg.frames) + "x" +
                                std::to_string(cfg.channels) + "x" +
                                std::to_string(cfg.input_size) + "x" +
                                std::to_string(cfg.input_size));
        }
        if (clip.dtype() != cfg.precision) {
            throw ContractError("forward_clips: clip precision does not match model");
        }
    }
    const std::int64_t batch = static_cast<std::int64_t>(clips.size());
    const std::int64_t t_len = cfg.frames;

    // [B*T, C, S, S]: one backbone pass over every frame in the batch
    Tensor x = clips.size() == 1
                   ? clips[0]
                   : [&] {
                         Tensor stacked = Tensor::zeros(
                             Shape{batch * t_len, cfg.channels, cfg.input_size, cfg.input_size},
                             cfg.precision);
                         const std::int64_t len = clips[0].numel();
                         for (std::int64_t b = 0; b < batch; ++b) {
                             for (std::int64_t i = 0; i < len; ++i) {
                                 stacked.set_value(b * len + i,
                                                   clips[static_cast<std::size_t>(b)].value_at(i));
                             }
                         }
                         return stacked;
                     }();
    std::size_t block = 0;
    for (int nblocks : m.blocks_per_stage) {
        for (int i = 0; i < nblocks; ++i) {
            x = conv_block_forward(tape, x, m.backbone[block++], training);
        }
        x = pool2d(tape, x, PoolKind::max, 2, 2);
    }
    Tensor backbone_act = x;  // [B*T, D, h, w]; Grad-CAM target

    Tensor masks;
    if (cfg.spatial_attention) {
        masks = spatial_mask_batch(tape, x, m.spatial);
        x = mul_mask(tape, x, masks);
    }

    // Eq-2 style condense: ReLU -> BN -> global average pool.
    x = relu(tape, x);
    x = batchnorm_forward(tape, x, m.condense_bn, training);
    Tensor r_all = global_avg_pool(tape, x);  // [B*T, D]

    std::vector<ForwardOutput> outputs;
    outputs.reserve(clips.size());
    for (std::int64_t b = 0; b < batch; ++b) {
        ForwardOutput out;
        out.backbone_act = batch == 1 ? backbone_act
                                      : slice_rows(tape, backbone_act, b * t_len, (b + 1) * t_len);
        if (cfg.spatial_attention) {
            out.masks = batch == 1 ? masks : slice_rows(tape, masks, b * t_len, (b + 1) * t_len);
        }
        Tensor r = batch == 1 ? r_all : slice_rows(tape, r_all, b * t_len, (b + 1) * t_len);
        out.features = r;

        Tensor h = bilstm_forward(tape, r, m.lstm);  // [T, H_d]
        Tensor z;
        switch (cfg.temporal_mode) {
            case TemporalMode::gate: {
                Tensor a = temporal_gate(tape, h, m.temporal);
                out.gate = a;
                z = aggregate_gated(tape, r, a);
                break;
            }
            case TemporalMode::softmax: {
                Tensor alpha = temporal_softmax_weights(tape, h, m.temporal);
                out.gate = alpha;
                z = aggregate_softmax(tape, h, alpha);
                break;
            }
            case TemporalMode::none:
                z = mean_axis0(tape, h);
                break;
        }
        if (training && cfg.dropout > 0.0) {
            if (dropout_rng == nullptr) {
                throw ContractError("forward_clips: dropout requires an rng in training mode");
            }
            z = dropout(tape, z, cfg.dropout, *dropout_rng);
        }
        out.pooled = z;
        out.clip_logits = linear_forward(tape, z, m.clip_head);
        out.frame_logits = linear_forward(tape, r, m.frame_head);
        outputs.push_back(std::move(out));
    }
    return outputs;
}

ForwardOutput forward_clip(Tape* tape, FameModel& m, const Tensor& clip, bool training,
                           Rng* dropout_rng) {
    return forward_clips(tape, m, {clip}, training, dropout_rng)[0];
}

Tensor hybrid_loss(Tape* tape, const ForwardOutput& out, int label, const FameConfig& cfg,
                   const Tensor& class_weights) {
    if (label < 0 || label >= cfg.classes) throw ContractError("hybrid_loss: label out of range");
    if (class_weights.numel() != cfg.classes) {
        throw DimensionError("hybrid_loss: class_weights must have K entries");
    }
    const double w = class_weights.value_at(label);
    if (w <= 0.0) throw ContractError("hybrid_loss: class weights must be positive");
    Tensor l_spatial = cross_entropy_rows(tape, out.frame_logits, label, w);
    Tensor l_temporal = cross_entropy(tape, out.clip_logits, label, w);
    return add(tape, mul_scalar(tape, l_spatial, cfg.loss_alpha),
               mul_scalar(tape, l_temporal, cfg.loss_beta));
}

std::pair<int, std::vector<double>> attribute(FameModel& m, const Tensor& clip) {
    ForwardOutput out = forward_clip(nullptr, m, clip, /*training=*/false);
    Tensor probs = softmax(nullptr, out.clip_logits, 0);
    std::vector<double> p = probs.to_vector();
    int best = 0;
    for (int k = 1; k < static_cast<int>(p.size()); ++k) {
        if (p[static_cast<std::size_t>(k)] > p[static_cast<std::size_t>(best)]) best = k;
    }
    return {best, p};
}

std::int64_t count_params(FameModel& m) {
    std::int64_t total = 0;
    for (const auto& p : m.named_parameters()) total += p.tensor.numel();
    return total;
}

ParamBreakdown param_breakdown(FameModel& m) {
    ParamBreakdown b;
    auto group_of = [](const std::string& name) -> std::string {
        if (name.rfind("backbone.", 0) == 0) {
            if (name.find(".conv.weight") != std::string::npos) return "backbone.conv.weights";
            if (name.find(".conv.bias") != std::string::npos) return "backbone.conv.biases";
            return "backbone.bn.affine";
        }
        if (name.rfind("condense_bn.", 0) == 0) return "condense_bn";
        if (name.rfind("spatial.", 0) == 0) return "spatial_attention";
        if (name.rfind("lstm.", 0) == 0) return "bilstm";
        if (name.rfind("temporal.", 0) == 0) return "temporal_attention";
        return "heads";
    };
    std::vector<std::string> order = {"backbone.conv.weights", "backbone.conv.biases",
                                      "backbone.bn.affine",    "condense_bn",
                                      "spatial_attention",     "bilstm",
                                      "temporal_attention",    "heads"};
    for (const auto& g : order) b.groups.push_back({g, 0});
    for (auto& p : m.named_parameters()) {
        const std::string g = group_of(p.name);
        for (auto& [name, count] : b.groups) {
            if (name == g) count += p.tensor.numel();
        }
        b.total += p.tensor.numel();
    }
    for (const auto& [name, count] : b.groups) {
        if (name.rfind("backbone.", 0) == 0) b.backbone_learnable += count;
    }
    std::int64_t running = 0;
    for (auto& buf : m.named_buffers()) {
        if (buf.name.rfind("backbone.", 0) == 0) running += buf.tensor.numel();
    }
    b.backbone_with_stats = b.backbone_learnable + running;
    return b;
}

std::int64_t estimate_flops(const FameConfig& cfg, int frames) {
    const std::int64_t t = frames;
    std::int64_t per_frame = 0;
    std::int64_t size = cfg.input_size;
    std::int64_t cin = cfg.channels;
    for (const auto& stage : cfg.stages) {
        for (int cout : stage) {
            const std::int64_t hw = size * size;
            per_frame += conv_flops(3, cin, cout, size, size);  // pad 1 keeps H*W
            per_frame += 4 * cout * hw;                         // batchnorm
            per_frame += cout * hw;                             // relu
            cin = cout;
        }
        per_frame += 4 * cin * (size / 2) * (size / 2);  // 2x2 max pool
        size /= 2;
    }
    const std::int64_t d = cfg.feature_dim();
    const std::int64_t hw = size * size;
    if (cfg.spatial_attention) {
        const std::int64_t hid = cfg.spatial_hidden;
        per_frame += 2 * d * hw;            // channel avg + max pools
        per_frame += hw * (4 * hid + 2 * hid);  // the two shared MLP linears
        per_frame += hw * hid + hw;         // relu + sigmoid
        per_frame += d * hw;                // mask application
    }
    per_frame += d * hw;       // condense relu
    per_frame += 4 * d * hw;   // condense batchnorm
    per_frame += d * hw;       // global average pool
    const std::int64_t h_cell = cfg.h_cell;
    per_frame += 2 * (2 * 4 * h_cell * (d + h_cell) + 14 * h_cell);  // both LSTM directions
    const std::int64_t h_d = cfg.hidden_dim();
    std::int64_t per_clip = 0;
    switch (cfg.temporal_mode) {
        case TemporalMode::gate:
            per_frame += 2 * d * h_d + 7 * d;  // gate linear + layer norm + sigmoid
            per_clip += 3 * t * d + d;         // gated weighted mean
            break;
        case TemporalMode::softmax:
            per_frame += 2 * h_d * h_d + 4 * h_d;  // score linear + tanh + v dot
            per_clip += 5 * t + 2 * t * h_d;       // softmax + weighted sum
            break;
        case TemporalMode::none:
            per_clip += t * h_d + h_d;
            break;
    }
    per_frame += 2 * d * cfg.classes + cfg.classes;  // frame auxiliary head
    per_clip += 2 * cfg.head_in_dim() * cfg.classes + cfg.classes;  // clip head
    return per_frame * t + per_clip;
}

}  // namespace fame
