#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fame/model.hpp"
#include "fame/synthdata.hpp"

namespace fame {

struct TrainConfig {
    int epochs = 150;
    int batch_size = 32;
    double lr = 0.01;
    double lr_decay_factor = 0.1;
    int lr_decay_every = 40;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.6;
    bool augment_flip = true;
    bool augment_temporal_crop = true;
    std::uint64_t seed = 0;

    void validate() const;
};

// lr = base * factor^floor(epoch / every). Decade factors are computed by
// dividing by the integral reciprocal so the published values (1e-2, 1e-3,
// 1e-4, 1e-5) come out exactly.
double lr_schedule(int epoch, const TrainConfig& cfg);

struct OptimState {
    double lr = 0.01, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.6;
    std::int64_t step = 0;
    std::vector<Tensor> m, v;  // aligned with the parameter list

    void init(const std::vector<NamedParam>& params);
};

// Decoupled AdamW: multiplicative decay applied separately from the
// bias-corrected moment update. Decay is skipped for parameters flagged
// no-decay (biases, normalization affine). Throws NumericError naming the
// parameter on a non-finite gradient.
void adamw_step(std::vector<NamedParam>& params, OptimState& state);

// w_k = N_train / (K * n_k); balanced data gives all ones.
Tensor class_weights(const DatasetManifest& manifest);

// --- clip-level augmentation building blocks (Table-5 pipeline) ---
Clip flip_horizontal(const Clip& clip);
// Stride sampling: s in {1,2} uniform when the source allows it, start
// uniform over the valid range; errors when the source is shorter than T.
Clip temporal_crop(const Clip& clip, int target_frames, Rng& rng);
Clip resize_clip(const Clip& clip, int size);
// Full training-time pipeline: temporal crop, per-clip flip with p=0.5,
// resize, then (x-0.5)/0.5 normalization into a model-input tensor.
Tensor augment(const Clip& clip, Rng& rng, const FameConfig& model_cfg, const TrainConfig& cfg);
// Deterministic eval-time input: resize + normalize only.
Tensor eval_input(const Clip& clip, const FameConfig& model_cfg);

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double eval_acc = 0.0;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> rows;
    std::string to_tsv(std::uint64_t seed, const std::string& config_hash) const;
};

struct TrainResult {
    TrainHistory history;
    int best_epoch = -1;
    double best_eval_acc = 0.0;
    // deep copies of parameters and BN buffers at the best-eval epoch
    std::vector<std::pair<std::string, Tensor>> best_state;
};

// Mini-batch loop: seeded shuffling, forward -> hybrid_loss -> backward ->
// adamw_step, BN in training mode, per-epoch eval on the test split. The
// model is left at its final state; the best-eval snapshot is returned.
TrainResult train(FameModel& model, const DatasetManifest& manifest, const std::string& data_root,
                  const TrainConfig& cfg);

// In-memory variant used by tests and the ablation harness.
TrainResult train_clips(FameModel& model, const std::vector<Clip>& train_clips,
                        const std::vector<Clip>& eval_clips, const TrainConfig& cfg);

void apply_state(FameModel& model, const std::vector<std::pair<std::string, Tensor>>& state);

}  // namespace fame
