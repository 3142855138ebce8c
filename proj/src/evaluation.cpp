#include "fame/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "fame/util.hpp"

namespace fame {

MetricsReport compute_metrics(const std::vector<int>& labels, const std::vector<int>& preds,
                              const std::vector<std::vector<double>>& probs, int classes) {
    if (labels.size() != preds.size() || labels.size() != probs.size() || labels.empty()) {
        throw ContractError("compute_metrics: inconsistent or empty inputs");
    }
    MetricsReport r;
    r.classes = classes;
    r.samples = static_cast<std::int64_t>(labels.size());
    r.confusion.assign(static_cast<std::size_t>(classes),
                       std::vector<std::int64_t>(static_cast<std::size_t>(classes), 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= classes || preds[i] < 0 || preds[i] >= classes) {
            throw ContractError("compute_metrics: label or prediction out of range");
        }
        ++r.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])];
    }
    std::int64_t trace = 0;
    for (int k = 0; k < classes; ++k) trace += r.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
    r.accuracy = static_cast<double>(trace) / static_cast<double>(r.samples);

    const std::vector<RocCurve> curves = roc_per_class(probs, labels, classes);
    r.per_class.resize(static_cast<std::size_t>(classes));
    double psum = 0.0, rsum = 0.0, fsum = 0.0, asum = 0.0;
    int auc_count = 0;
    for (int k = 0; k < classes; ++k) {
        ClassMetrics& cm = r.per_class[static_cast<std::size_t>(k)];
        std::int64_t row = 0, col = 0;
        for (int j = 0; j < classes; ++j) {
            row += r.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
            col += r.confusion[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
        }
        const std::int64_t tp = r.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
        cm.support = row;
        cm.accuracy = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
        cm.recall = cm.accuracy;
        cm.precision = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
        cm.f1 = (cm.precision + cm.recall) > 0.0
                    ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall)
                    : 0.0;
        cm.auc_defined = curves[static_cast<std::size_t>(k)].defined;
        cm.auc = curves[static_cast<std::size_t>(k)].auc;
        psum += cm.precision;
        rsum += cm.recall;
        fsum += cm.f1;
        if (cm.auc_defined) {
            asum += cm.auc;
            ++auc_count;
        } else {
            r.auc_excluded.push_back(k);
        }
    }
    r.macro_precision = psum / classes;
    r.macro_recall = rsum / classes;
    r.macro_f1 = fsum / classes;
    r.macro_auc = auc_count > 0 ? asum / auc_count : 0.0;
    return r;
}

std::string MetricsReport::to_text(std::uint64_t seed, const std::string& config_hash) const {
    std::ostringstream os;
    os << "# fame metrics report\n";
    os << "# seed=" << seed << " config=" << config_hash << "\n";
    os << "samples\t" << samples << "\n";
    os << "classes\t" << classes << "\n";
    os << "accuracy\t" << format_double(accuracy) << "\n";
    os << "macro.precision\t" << format_double(macro_precision) << "\n";
    os << "macro.recall\t" << format_double(macro_recall) << "\n";
    os << "macro.f1\t" << format_double(macro_f1) << "\n";
    os << "macro.auc\t" << format_double(macro_auc) << "\n";
    os << "macro.auc_excluded\t";
    for (std::size_t i = 0; i < auc_excluded.size(); ++i) {
        if (i) os << ",";
        os << auc_excluded[i];
    }
    os << "\n";
    for (int k = 0; k < classes; ++k) {
        const ClassMetrics& cm = per_class[static_cast<std::size_t>(k)];
        const std::string p = "class." + std::to_string(k) + ".";
        os << p << "support\t" << cm.support << "\n";
        os << p << "accuracy\t" << format_double(cm.accuracy) << "\n";
        os << p << "precision\t" << format_double(cm.precision) << "\n";
        os << p << "recall\t" << format_double(cm.recall) << "\n";
        os << p << "f1\t" << format_double(cm.f1) << "\n";
        os << p << "auc\t" << (cm.auc_defined ? format_double(cm.auc) : "undefined") << "\n";
    }
    os << "confusion\t" << classes << "\t" << classes << "\n";
    for (int i = 0; i < classes; ++i) {
        for (int j = 0; j < classes; ++j) {
            if (j) os << "\t";
            os << confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        os << "\n";
    }
    os << "timing.mean_inference_sec\t" << format_double(mean_inference_sec) << "\n";
    return os.str();
}

RocCurve roc_curve_binary(const std::vector<double>& scores, const std::vector<bool>& positive) {
    if (scores.size() != positive.size()) throw ContractError("roc_curve_binary: size mismatch");
    std::int64_t n_pos = 0, n_neg = 0;
    for (bool p : positive) (p ? n_pos : n_neg)++;
    RocCurve curve;
    if (n_pos == 0 || n_neg == 0) {
        curve.defined = false;
        return curve;
    }
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;  // stable under duplicates
    });
    curve.points.push_back({0.0, 0.0});
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    double auc = 0.0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t t = i; t < j; ++t) (positive[order[t]] ? tp : fp)++;
        const RocPoint prev = curve.points.back();
        const RocPoint next{static_cast<double>(fp) / static_cast<double>(n_neg),
                            static_cast<double>(tp) / static_cast<double>(n_pos)};
        auc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) * 0.5;
        curve.points.push_back(next);
        i = j;
    }
    curve.auc = auc;
    curve.defined = true;
    return curve;
}

std::string RocCurve::to_tsv() const {
    std::ostringstream os;
    os << "# fpr\ttpr\n";
    for (const auto& p : points) {
        os << format_double(p.fpr) << "\t" << format_double(p.tpr) << "\n";
    }
    return os.str();
}

std::vector<RocCurve> roc_per_class(const std::vector<std::vector<double>>& probs,
                                    const std::vector<int>& labels, int classes) {
    std::vector<RocCurve> out;
    for (int k = 0; k < classes; ++k) {
        std::vector<double> scores(labels.size());
        std::vector<bool> pos(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            scores[i] = probs[i][static_cast<std::size_t>(k)];
            pos[i] = labels[i] == k;
        }
        out.push_back(roc_curve_binary(scores, pos));
    }
    return out;
}

EvalOutcome evaluate_clips(FameModel& model, const std::vector<Clip>& clips) {
    if (clips.empty()) throw ConfigError("evaluate: empty split");
    EvalOutcome out;
    double seconds = 0.0;
    for (const auto& clip : clips) {
        Tensor input = eval_input(clip, model.config);
        const auto t0 = std::chrono::steady_clock::now();
        const auto [pred, probs] = attribute(model, input);
        const auto t1 = std::chrono::steady_clock::now();
        seconds += std::chrono::duration<double>(t1 - t0).count();
        out.labels.push_back(clip.label);
        out.preds.push_back(pred);
        out.probs.push_back(probs);
    }
    out.report = compute_metrics(out.labels, out.preds, out.probs, model.config.classes);
    out.report.mean_inference_sec = seconds / static_cast<double>(clips.size());
    out.curves = roc_per_class(out.probs, out.labels, model.config.classes);
    return out;
}

EvalOutcome evaluate(FameModel& model, const DatasetManifest& manifest,
                     const std::string& data_root, Split split) {
    namespace fs = std::filesystem;
    std::vector<Clip> clips;
    for (const auto& rec : manifest.records) {
        if (rec.split != split) continue;
        Clip clip = load_clip((fs::path(data_root) / rec.dir).string());
        clip.label = rec.label;
        clips.push_back(std::move(clip));
    }
    if (clips.empty()) throw ConfigError("evaluate: split has no clips");
    return evaluate_clips(model, clips);
}

Tensor grad_cam(FameModel& model, const Tensor& clip, int target) {
    if (target < 0 || target >= model.config.classes) {
        throw ContractError("grad_cam: target class out of range");
    }
    Tape tape;
    ForwardOutput out = forward_clip(&tape, model, clip, /*training=*/false);
    Tensor objective = slice1d(&tape, out.clip_logits, target, target + 1);
    backward(objective, tape);

    Tensor act = out.backbone_act;  // [T, C, h, w]
    const std::int64_t t_len = act.dim(0), c = act.dim(1), h = act.dim(2), w = act.dim(3);
    const std::int64_t hw = h * w;
    Tensor heat = Tensor::zeros(Shape{t_len, h, w}, Dtype::f64);
    for (std::int64_t t = 0; t < t_len; ++t) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            double wsum = 0.0;
            const std::int64_t base = (t * c + ch) * hw;
            for (std::int64_t i = 0; i < hw; ++i) wsum += act.grad_at(base + i);
            const double weight = wsum / static_cast<double>(hw);
            for (std::int64_t i = 0; i < hw; ++i) {
                const std::int64_t hi = t * hw + i;
                heat.set_value(hi, heat.value_at(hi) + weight * act.value_at(base + i));
            }
        }
        double mx = 0.0;
        for (std::int64_t i = 0; i < hw; ++i) {
            const double v = std::max(0.0, heat.value_at(t * hw + i));  // relu
            heat.set_value(t * hw + i, v);
            mx = std::max(mx, v);
        }
        if (mx > 0.0) {
            for (std::int64_t i = 0; i < hw; ++i) {
                heat.set_value(t * hw + i, heat.value_at(t * hw + i) / mx);
            }
        }
    }
    return heat;
}

std::vector<AblationRow> ablate(const std::vector<Clip>& train_set,
                                const std::vector<Clip>& eval_set,
                                const std::vector<AblationVariant>& variants,
                                const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds) {
    if (variants.size() < 2) throw ContractError("ablate: need at least 2 variants");
    if (seeds.empty()) throw ContractError("ablate: need at least one seed");
    std::vector<AblationRow> rows;
    for (const auto& variant : variants) {
        AblationRow row;
        row.name = variant.name;
        double acc_sum = 0.0;
        for (std::uint64_t seed : seeds) {
            FameModel m = build_model(variant.config, seed);
            TrainConfig run_cfg = cfg;
            run_cfg.seed = seed;
            train_clips(m, train_set, eval_set, run_cfg);
            acc_sum += evaluate_clips(m, eval_set).report.accuracy;
            row.params = count_params(m);
        }
        row.accuracy = acc_sum / static_cast<double>(seeds.size());
        rows.push_back(row);
    }
    return rows;
}

}  // namespace fame
