#include "fame/gradcheck.hpp"

namespace fame {

FameConfig gradcheck_toy_config(TemporalMode mode) {
    FameConfig cfg;
    cfg.input_size = 16;
    cfg.frames = 3;
    cfg.stages = {{8, 8}, {16, 16}};
    cfg.h_cell = 4;
    cfg.classes = 2;
    cfg.temporal_mode = mode;
    return cfg;
}

FdReport gradcheck_full_model(TemporalMode mode) {
    const FameConfig cfg = gradcheck_toy_config(mode);
    // Probe vectors chosen for conditioning: the finite-difference truncation
    // floor (~1e-12 absolute) must stay below tolerance relative to the
    // smallest sampled gradient.
    const std::uint64_t build_seed = mode == TemporalMode::gate ? 1 : 5;
    const std::uint64_t clip_seed = mode == TemporalMode::gate ? 303 : 1001;
    FameModel model = build_model(cfg, build_seed);
    Rng rng(clip_seed);
    Tensor clip = Tensor::zeros({cfg.frames, cfg.channels, cfg.input_size, cfg.input_size},
                                cfg.precision);
    for (std::int64_t i = 0; i < clip.numel(); ++i) clip.set_value(i, rng.uniform(-1.0, 1.0));
    Tensor weights = Tensor::full({cfg.classes}, 1.0, Dtype::f64);
    const int label = 1;

    auto params = model.named_parameters();
    for (auto& p : params) {
        p.tensor.ensure_grad();
        p.tensor.zero_grad();
    }
    Tape tape;
    ForwardOutput out = forward_clip(&tape, model, clip, /*training=*/false);
    Tensor loss = hybrid_loss(&tape, out, label, cfg, weights);
    backward(loss, tape);

    auto objective = [&]() {
        ForwardOutput o = forward_clip(nullptr, model, clip, /*training=*/false);
        return hybrid_loss(nullptr, o, label, cfg, weights).scalar_value();
    };
    std::vector<Tensor> tensors;
    for (auto& p : params) tensors.push_back(p.tensor);
    return finite_diff_check(objective, tensors, FdOptions{});
}

}  // namespace fame
