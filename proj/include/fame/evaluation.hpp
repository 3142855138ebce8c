#pragma once

#include <string>
#include <vector>

#include "fame/model.hpp"
#include "fame/synthdata.hpp"
#include "fame/training.hpp"

namespace fame {

struct ClassMetrics {
    double accuracy = 0.0;   // recall of the class's own samples
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    bool auc_defined = false;
    std::int64_t support = 0;
};

struct MetricsReport {
    int classes = 0;
    std::int64_t samples = 0;
    double accuracy = 0.0;  // trace(confusion) / N
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0, macro_auc = 0.0;
    std::vector<int> auc_excluded;  // classes with undefined one-vs-rest AUC
    std::vector<std::vector<std::int64_t>> confusion;  // [true][pred]
    double mean_inference_sec = 0.0;

    // Key-value blocks plus the matrix block; timing goes on separate
    // `timing.` lines so determinism checks can filter them.
    std::string to_text(std::uint64_t seed, const std::string& config_hash) const;
};

struct RocPoint {
    double fpr = 0.0, tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // staircase from (0,0) to (1,1)
    double auc = 0.0;
    bool defined = false;
    std::string to_tsv() const;
};

// Metrics from externally supplied predictions; the model path below feeds
// this. probs[i] holds K per-class scores for sample i.
MetricsReport compute_metrics(const std::vector<int>& labels, const std::vector<int>& preds,
                              const std::vector<std::vector<double>>& probs, int classes);

// One-vs-rest curve with equal scores grouped into single steps; trapezoidal
// AUC. Undefined (flagged) when either class is empty.
RocCurve roc_curve_binary(const std::vector<double>& scores, const std::vector<bool>& positive);
std::vector<RocCurve> roc_per_class(const std::vector<std::vector<double>>& probs,
                                    const std::vector<int>& labels, int classes);

struct EvalOutcome {
    MetricsReport report;
    std::vector<RocCurve> curves;
    std::vector<int> labels, preds;
    std::vector<std::vector<double>> probs;
};

EvalOutcome evaluate(FameModel& model, const DatasetManifest& manifest,
                     const std::string& data_root, Split split);
EvalOutcome evaluate_clips(FameModel& model, const std::vector<Clip>& clips);

// Per-frame saliency for the target class logit: channel weights are the
// spatially averaged gradients on the final backbone activation; heatmaps are
// relu(sum_c w_c act_c) max-normalized per frame (all-zero maps stay zero).
// Returns [T, h, w].
Tensor grad_cam(FameModel& model, const Tensor& clip, int target);

struct AblationRow {
    std::string name;
    double accuracy = 0.0;      // mean over seeds
    std::int64_t params = 0;
};

struct AblationVariant {
    std::string name;
    FameConfig config;
};

// Trains every variant with identical seeds/schedule and reports test
// accuracy (averaged over the given seeds) plus parameter counts.
std::vector<AblationRow> ablate(const std::vector<Clip>& train_set,
                                const std::vector<Clip>& eval_set,
                                const std::vector<AblationVariant>& variants,
                                const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds);

}  // namespace fame
