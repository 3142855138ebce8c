#include "fame/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "fame/image.hpp"
#include "fame/util.hpp"

namespace fame {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (lr <= 0.0) throw ConfigError("train: lr must be positive");
    if (lr_decay_factor <= 0.0 || lr_decay_factor > 1.0) {
        throw ConfigError("train: lr_decay_factor must be in (0, 1]");
    }
    if (lr_decay_every < 1) throw ConfigError("train: lr_decay_every must be >= 1");
    if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw ContractError("lr_schedule: epoch must be >= 0");
    const int k = epoch / cfg.lr_decay_every;
    if (k == 0) return cfg.lr;
    const double inv = std::round(1.0 / cfg.lr_decay_factor);
    if (std::abs(inv * cfg.lr_decay_factor - 1.0) < 1e-12) {
        return cfg.lr / std::pow(inv, static_cast<double>(k));
    }
    return cfg.lr * std::pow(cfg.lr_decay_factor, static_cast<double>(k));
}

void OptimState::init(const std::vector<NamedParam>& params) {
    m.clear();
    v.clear();
    step = 0;
    for (const auto& p : params) {
        m.push_back(Tensor::zeros(p.tensor.shape(), p.tensor.dtype()));
        v.push_back(Tensor::zeros(p.tensor.shape(), p.tensor.dtype()));
    }
}

void adamw_step(std::vector<NamedParam>& params, OptimState& s) {
    if (s.m.size() != params.size()) throw ContractError("adamw_step: state not initialized");
    ++s.step;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        NamedParam& p = params[i];
        Tensor t = p.tensor;
        t.ensure_grad();
        with_dtype(t.dtype(), [&](auto tag) {
            using T = decltype(tag);
            auto theta = t.data<T>();
            auto g = t.grad<T>();
            auto mm = s.m[i].data<T>();
            auto vv = s.v[i].data<T>();
            for (std::size_t j = 0; j < theta.size(); ++j) {
                if (!std::isfinite(static_cast<double>(g[j]))) {
                    throw NumericError("adamw_step: non-finite gradient in " + p.name);
                }
            }
            if (p.decay && s.weight_decay > 0.0) {
                const T decay_mult = static_cast<T>(1.0 - s.lr * s.weight_decay);
                for (std::size_t j = 0; j < theta.size(); ++j) theta[j] *= decay_mult;
            }
            const T b1 = static_cast<T>(s.beta1), b2 = static_cast<T>(s.beta2);
            const T lr = static_cast<T>(s.lr), eps = static_cast<T>(s.eps);
            const T ibc1 = static_cast<T>(1.0 / bc1), ibc2 = static_cast<T>(1.0 / bc2);
            for (std::size_t j = 0; j < theta.size(); ++j) {
                mm[j] = b1 * mm[j] + (T(1) - b1) * g[j];
                vv[j] = b2 * vv[j] + (T(1) - b2) * g[j] * g[j];
                const T m_hat = mm[j] * ibc1;
                const T v_hat = vv[j] * ibc2;
                theta[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
            }
        });
    }
}

Tensor class_weights(const DatasetManifest& manifest) {
    const int k = manifest.class_count();
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
    std::int64_t n_train = 0;
    for (const auto& r : manifest.records) {
        if (r.split == Split::train) {
            ++counts[static_cast<std::size_t>(r.label)];
            ++n_train;
        }
    }
    Tensor w = Tensor::zeros(Shape{k}, Dtype::f64);
    for (int i = 0; i < k; ++i) {
        const auto n_k = counts[static_cast<std::size_t>(i)];
        if (n_k == 0) {
            throw ConfigError("class_weights: class " + std::to_string(i) + " missing from train split");
        }
        w.set_value(i, static_cast<double>(n_train) / (static_cast<double>(k) * static_cast<double>(n_k)));
    }
    return w;
}

// ------------------------------------------------------------- augmentation

Clip flip_horizontal(const Clip& clip) {
    Clip out = clip;
    for (int t = 0; t < clip.frames; ++t) {
        for (int c = 0; c < clip.channels; ++c) {
            for (int y = 0; y < clip.height; ++y) {
                for (int x = 0; x < clip.width; ++x) {
                    out.at(t, c, y, x) = clip.at(t, c, y, clip.width - 1 - x);
                }
            }
        }
    }
    return out;
}

Clip temporal_crop(const Clip& clip, int target_frames, Rng& rng) {
    const int len = clip.frames;
    if (len < target_frames) {
        throw DataError("temporal_crop: source has " + std::to_string(len) + " frames, need " +
                        std::to_string(target_frames));
    }
    int stride = 1;
    if (len >= 2 * target_frames && rng.below(2) == 1) stride = 2;
    const int span = stride * (target_frames - 1) + 1;
    const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(len - span + 1)));
    Clip out = clip;
    out.frames = target_frames;
    out.pixels.assign(static_cast<std::size_t>(target_frames) * clip.channels * clip.height *
                          clip.width,
                      0.0);
    for (int t = 0; t < target_frames; ++t) {
        const int src = start + t * stride;
        const std::size_t plane = static_cast<std::size_t>(clip.channels) * clip.height * clip.width;
        std::copy(clip.pixels.begin() + src * plane, clip.pixels.begin() + (src + 1) * plane,
                  out.pixels.begin() + t * plane);
    }
    return out;
}

Clip resize_clip(const Clip& clip, int size) {
    if (clip.height == size && clip.width == size) return clip;
    Clip out = clip;
    out.height = out.width = size;
    out.pixels.assign(static_cast<std::size_t>(clip.frames) * clip.channels * size * size, 0.0);
    for (int t = 0; t < clip.frames; ++t) {
        for (int c = 0; c < clip.channels; ++c) {
            resize_bilinear_plane(clip.frame_plane(t, c), clip.height, clip.width,
                                  out.frame_plane(t, c), size, size);
        }
    }
    return out;
}

Tensor augment(const Clip& clip, Rng& rng, const FameConfig& model_cfg, const TrainConfig& cfg) {
    Clip work = clip;
    if (cfg.augment_temporal_crop) {
        work = temporal_crop(work, model_cfg.frames, rng);
    } else if (work.frames != model_cfg.frames) {
        throw DataError("augment: clip has wrong frame count and temporal crop is disabled");
    }
    if (cfg.augment_flip && rng.bernoulli(0.5)) {
        work = flip_horizontal(work);
    }
    work = resize_clip(work, model_cfg.input_size);
    return clip_to_tensor(work, model_cfg.precision, /*normalize=*/true);
}

Tensor eval_input(const Clip& clip, const FameConfig& model_cfg) {
    Clip work = resize_clip(clip, model_cfg.input_size);
    if (work.frames != model_cfg.frames) {
        throw DataError("eval_input: clip frame count does not match model");
    }
    return clip_to_tensor(work, model_cfg.precision, /*normalize=*/true);
}

// ---------------------------------------------------------------- training

std::string TrainHistory::to_tsv(std::uint64_t seed, const std::string& config_hash) const {
    std::ostringstream os;
    os << "# fame training history\n";
    os << "# seed=" << seed << " config=" << config_hash << "\n";
    os << "# epoch\tlr\ttrain_loss\ttrain_acc\teval_acc\tseconds\n";
    for (const auto& r : rows) {
        os << r.epoch << "\t" << format_double(r.lr) << "\t" << format_double(r.train_loss)
           << "\t" << format_double(r.train_acc) << "\t" << format_double(r.eval_acc) << "\t"
           << format_double(r.seconds) << "\n";
    }
    return os.str();
}

namespace {

std::vector<std::pair<std::string, Tensor>> snapshot_state(FameModel& m) {
    std::vector<std::pair<std::string, Tensor>> out;
    for (auto& p : m.named_parameters()) out.emplace_back(p.name, p.tensor.clone());
    for (auto& b : m.named_buffers()) out.emplace_back(b.name, b.tensor.clone());
    return out;
}

}  // namespace

void apply_state(FameModel& model, const std::vector<std::pair<std::string, Tensor>>& state) {
    auto copy_into = [](const Tensor& src, Tensor dst) {
        if (src.shape() != dst.shape()) throw DataError("apply_state: shape mismatch");
        for (std::int64_t i = 0; i < src.numel(); ++i) dst.set_value(i, src.value_at(i));
    };
    auto params = model.named_parameters();
    auto buffers = model.named_buffers();
    for (const auto& [name, tensor] : state) {
        bool found = false;
        for (auto& p : params) {
            if (p.name == name) {
                copy_into(tensor, p.tensor);
                found = true;
                break;
            }
        }
        if (!found) {
            for (auto& b : buffers) {
                if (b.name == name) {
                    copy_into(tensor, b.tensor);
                    found = true;
                    break;
                }
            }
        }
        if (!found) throw DataError("apply_state: unknown tensor " + name);
    }
}

TrainResult train_clips(FameModel& model, const std::vector<Clip>& train_clips,
                        const std::vector<Clip>& eval_clips, const TrainConfig& cfg) {
    cfg.validate();
    if (train_clips.empty()) throw ConfigError("train: empty train split");
    const FameConfig& mc = model.config;

    // class weights from the in-memory labels
    const int k = mc.classes;
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
    for (const auto& c : train_clips) {
        if (c.label < 0 || c.label >= k) throw DataError("train: clip label out of range");
        ++counts[static_cast<std::size_t>(c.label)];
    }
    Tensor weights = Tensor::zeros(Shape{k}, Dtype::f64);
    for (int i = 0; i < k; ++i) {
        if (counts[static_cast<std::size_t>(i)] == 0) {
            throw ConfigError("train: class " + std::to_string(i) + " missing from train split");
        }
        weights.set_value(i, static_cast<double>(train_clips.size()) /
                                 (static_cast<double>(k) * static_cast<double>(counts[static_cast<std::size_t>(i)])));
    }

    auto params = model.named_parameters();
    OptimState opt;
    opt.beta1 = cfg.beta1;
    opt.beta2 = cfg.beta2;
    opt.eps = cfg.adam_eps;
    opt.weight_decay = cfg.weight_decay;
    opt.init(params);

    TrainResult result;
    std::vector<std::size_t> order(train_clips.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        opt.lr = lr_schedule(epoch, cfg);
        Rng epoch_rng(Rng::mix(cfg.seed, 0xe90c000ULL + static_cast<std::uint64_t>(epoch)));
        epoch_rng.shuffle(order);

        double loss_sum = 0.0;
        std::int64_t correct = 0;
        std::size_t cursor = 0;
        int batch_index = 0;
        while (cursor < order.size()) {
            const std::size_t batch_end = std::min(cursor + static_cast<std::size_t>(cfg.batch_size),
                                                   order.size());
            const std::size_t batch_n = batch_end - cursor;
            for (auto& p : params) {
                p.tensor.ensure_grad();
                p.tensor.zero_grad();
            }
            std::vector<Tensor> inputs;
            std::vector<int> labels;
            inputs.reserve(batch_n);
            for (std::size_t b = cursor; b < batch_end; ++b) {
                const Clip& clip = train_clips[order[b]];
                inputs.push_back(augment(clip, epoch_rng, mc, cfg));
                labels.push_back(clip.label);
            }
            Tape tape;
            std::vector<ForwardOutput> outs =
                forward_clips(&tape, model, inputs, /*training=*/true, &epoch_rng);
            Tensor batch_loss;
            for (std::size_t b = 0; b < batch_n; ++b) {
                Tensor loss = hybrid_loss(&tape, outs[b], labels[b], mc, weights);
                const double loss_value = loss.scalar_value();
                if (!std::isfinite(loss_value)) {
                    throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                       " batch " + std::to_string(batch_index));
                }
                loss_sum += loss_value;
                const std::vector<double> logits = outs[b].clip_logits.to_vector();
                int arg = 0;
                for (int j = 1; j < k; ++j) {
                    if (logits[static_cast<std::size_t>(j)] > logits[static_cast<std::size_t>(arg)]) arg = j;
                }
                if (arg == labels[b]) ++correct;
                batch_loss = b == 0 ? loss : add(&tape, batch_loss, loss);
            }
            backward(mul_scalar(&tape, batch_loss, 1.0 / static_cast<double>(batch_n)), tape);
            adamw_step(params, opt);
            ++batch_index;
            cursor = batch_end;
        }

        double eval_acc = 0.0;
        if (!eval_clips.empty()) {
            std::int64_t eval_correct = 0;
            for (const auto& clip : eval_clips) {
                Tensor input = eval_input(clip, mc);
                const auto [pred, probs] = attribute(model, input);
                if (pred == clip.label) ++eval_correct;
            }
            eval_acc = static_cast<double>(eval_correct) / static_cast<double>(eval_clips.size());
        }
        const auto t1 = std::chrono::steady_clock::now();
        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = opt.lr;
        stats.train_loss = loss_sum / static_cast<double>(train_clips.size());
        stats.train_acc = static_cast<double>(correct) / static_cast<double>(train_clips.size());
        stats.eval_acc = eval_acc;
        stats.seconds = std::chrono::duration<double>(t1 - t0).count();
        result.history.rows.push_back(stats);

        if (result.best_epoch < 0 || eval_acc > result.best_eval_acc) {
            result.best_epoch = epoch;
            result.best_eval_acc = eval_acc;
            result.best_state = snapshot_state(model);
        }
    }
    return result;
}

TrainResult train(FameModel& model, const DatasetManifest& manifest, const std::string& data_root,
                  const TrainConfig& cfg) {
    namespace fs = std::filesystem;
    std::vector<Clip> tr, ev;
    for (const auto& rec : manifest.records) {
        Clip clip = load_clip((fs::path(data_root) / rec.dir).string());
        clip.label = rec.label;
        clip.family = rec.family;
        clip.compression = rec.compression;
        clip.seed = rec.seed;
        if (rec.split == Split::train) {
            tr.push_back(std::move(clip));
        } else {
            ev.push_back(std::move(clip));
        }
    }
    return train_clips(model, tr, ev, cfg);
}

}  // namespace fame
