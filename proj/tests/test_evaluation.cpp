#include <doctest.h>

#include <cmath>

#include "fame/evaluation.hpp"
#include "oracles.hpp"

using namespace fame;

TEST_CASE("compute_metrics: oracle predictor and constant predictor") {
    // oracle: predictions == labels
    std::vector<int> labels, preds;
    std::vector<std::vector<double>> probs;
    for (int k = 0; k < 5; ++k) {
        for (int i = 0; i < 4; ++i) {
            labels.push_back(k);
            preds.push_back(k);
            std::vector<double> p(5, 0.05);
            p[static_cast<std::size_t>(k)] = 0.8;
            probs.push_back(p);
        }
    }
    MetricsReport r = compute_metrics(labels, preds, probs, 5);
    CHECK(r.accuracy == 1.0);
    for (int k = 0; k < 5; ++k) {
        CHECK(r.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)] == 4);
        CHECK(r.per_class[static_cast<std::size_t>(k)].f1 == 1.0);
    }

    // constant predictor on balanced data: accuracy 1/K, one confusion column
    std::vector<int> const_preds(labels.size(), 2);
    std::vector<std::vector<double>> const_probs(labels.size(), std::vector<double>(5, 0.2));
    MetricsReport rc = compute_metrics(labels, const_preds, const_probs, 5);
    CHECK(rc.accuracy == doctest::Approx(0.2).epsilon(1e-12));
    for (int k = 0; k < 5; ++k) {
        for (int j = 0; j < 5; ++j) {
            const std::int64_t v = rc.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
            CHECK(v == (j == 2 ? 4 : 0));
        }
    }
}

TEST_CASE("accuracy equals trace/N and macro F1 recomputes from the emitted matrix") {
    Rng rng(200);
    const int k = 4, n = 60;
    std::vector<int> labels(n), preds(n);
    std::vector<std::vector<double>> probs(n, std::vector<double>(k, 0.0));
    for (int i = 0; i < n; ++i) {
        labels[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(k));
        preds[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(k));
        double sum = 0.0;
        for (int j = 0; j < k; ++j) {
            probs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = rng.uniform(0.01, 1.0);
            sum += probs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        for (int j = 0; j < k; ++j) probs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] /= sum;
    }
    MetricsReport r = compute_metrics(labels, preds, probs, k);
    std::int64_t trace = 0;
    for (int i = 0; i < k; ++i) trace += r.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
    CHECK(r.accuracy == static_cast<double>(trace) / n);

    // macro F1 independently from the matrix
    double f1_sum = 0.0;
    for (int c = 0; c < k; ++c) {
        std::int64_t row = 0, col = 0;
        for (int j = 0; j < k; ++j) {
            row += r.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
            col += r.confusion[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
        }
        const double tp = static_cast<double>(r.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]);
        const double prec = col > 0 ? tp / col : 0.0;
        const double rec = row > 0 ? tp / row : 0.0;
        f1_sum += (prec + rec) > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    }
    CHECK(std::abs(r.macro_f1 - f1_sum / k) <= 1e-12);

    // confusion row sums equal per-class support
    for (int c = 0; c < k; ++c) {
        std::int64_t row = 0;
        for (int j = 0; j < k; ++j) row += r.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
        CHECK(row == r.per_class[static_cast<std::size_t>(c)].support);
    }
}

TEST_CASE("roc: perfect separation, all-tied scores, curve anchors") {
    std::vector<double> scores = {0.9, 0.8, 0.7, 0.3, 0.2, 0.1};
    std::vector<bool> pos = {true, true, true, false, false, false};
    RocCurve perfect = roc_curve_binary(scores, pos);
    CHECK(perfect.defined);
    CHECK(perfect.auc == 1.0);

    std::vector<double> tied(8, 0.5);
    std::vector<bool> half = {true, false, true, false, true, false, true, false};
    RocCurve diag = roc_curve_binary(tied, half);
    CHECK(diag.auc == doctest::Approx(0.5).epsilon(1e-12));
    REQUIRE(diag.points.size() == 2);  // single diagonal segment
    CHECK(diag.points.front().fpr == 0.0);
    CHECK(diag.points.front().tpr == 0.0);
    CHECK(diag.points.back().fpr == 1.0);
    CHECK(diag.points.back().tpr == 1.0);

    // monotone staircase anchored at (0,0) and (1,1)
    Rng rng(201);
    std::vector<double> rs(30);
    std::vector<bool> rp(30);
    for (int i = 0; i < 30; ++i) {
        rs[static_cast<std::size_t>(i)] = rng.below(8) / 8.0;  // force ties
        rp[static_cast<std::size_t>(i)] = rng.bernoulli(0.4);
    }
    if (std::none_of(rp.begin(), rp.end(), [](bool b) { return b; })) rp[0] = true;
    if (std::all_of(rp.begin(), rp.end(), [](bool b) { return b; })) rp[1] = false;
    RocCurve rc = roc_curve_binary(rs, rp);
    CHECK(rc.defined);
    CHECK(rc.points.front().fpr == 0.0);
    CHECK(rc.points.front().tpr == 0.0);
    CHECK(rc.points.back().fpr == 1.0);
    CHECK(rc.points.back().tpr == 1.0);
    for (std::size_t i = 1; i < rc.points.size(); ++i) {
        CHECK(rc.points[i].fpr >= rc.points[i - 1].fpr);
        CHECK(rc.points[i].tpr >= rc.points[i - 1].tpr);
    }

    // degenerate: one class empty
    RocCurve undef = roc_curve_binary({0.4, 0.6}, {true, true});
    CHECK_FALSE(undef.defined);
}

TEST_CASE("trapezoidal AUC equals the Mann-Whitney pairwise oracle on 50 tied sets") {
    Rng rng(202);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 10 + static_cast<int>(rng.below(25));
        std::vector<double> scores(static_cast<std::size_t>(n));
        std::vector<bool> pos(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            scores[static_cast<std::size_t>(i)] = rng.below(6) / 6.0;  // heavy ties
            pos[static_cast<std::size_t>(i)] = rng.bernoulli(0.5);
        }
        if (std::none_of(pos.begin(), pos.end(), [](bool b) { return b; })) pos[0] = true;
        if (std::all_of(pos.begin(), pos.end(), [](bool b) { return b; })) pos[0] = false;
        RocCurve curve = roc_curve_binary(scores, pos);
        const double mw = oracle::auc_pairwise(scores, pos);
        CHECK(std::abs(curve.auc - mw) <= 1e-12);
    }
}

TEST_CASE("per-class AUC in evaluate-style reports matches independent recomputation") {
    Rng rng(203);
    const int k = 3, n = 45;
    std::vector<int> labels(n);
    std::vector<std::vector<double>> probs(n, std::vector<double>(k, 0.0));
    for (int i = 0; i < n; ++i) {
        labels[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(k));
        for (int j = 0; j < k; ++j) probs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = rng.uniform01();
    }
    std::vector<int> preds(n, 0);
    MetricsReport r = compute_metrics(labels, preds, probs, k);
    for (int c = 0; c < k; ++c) {
        std::vector<double> scores(n);
        std::vector<bool> pos(n);
        for (int i = 0; i < n; ++i) {
            scores[static_cast<std::size_t>(i)] = probs[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
            pos[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)] == c;
        }
        CHECK(std::abs(r.per_class[static_cast<std::size_t>(c)].auc - oracle::auc_pairwise(scores, pos)) <= 1e-12);
    }
}

TEST_CASE("undefined per-class AUC is excluded from the macro with a flag") {
    std::vector<int> labels = {0, 0, 1, 1};  // class 2 has no positives
    std::vector<int> preds = {0, 1, 1, 1};
    std::vector<std::vector<double>> probs = {
        {0.7, 0.2, 0.1}, {0.4, 0.5, 0.1}, {0.2, 0.6, 0.2}, {0.1, 0.8, 0.1}};
    MetricsReport r = compute_metrics(labels, preds, probs, 3);
    REQUIRE(r.auc_excluded.size() == 1);
    CHECK(r.auc_excluded[0] == 2);
    CHECK_FALSE(r.per_class[2].auc_defined);
    const double macro_expected = (r.per_class[0].auc + r.per_class[1].auc) / 2.0;
    CHECK(r.macro_auc == doctest::Approx(macro_expected).epsilon(1e-12));
    const std::string text = r.to_text(1, "f00d");
    CHECK(text.find("macro.auc_excluded\t2") != std::string::npos);
    CHECK(text.find("class.2.auc\tundefined") != std::string::npos);
}

TEST_CASE("grad_cam: normalization contract and zero-head degenerate case") {
    FameConfig cfg;
    cfg.input_size = 16;
    cfg.frames = 2;
    cfg.stages = {{4}, {8}};
    cfg.h_cell = 4;
    cfg.classes = 2;
    FameModel m = build_model(cfg, 300);
    Rng rng(301);
    Tensor clip = Tensor::zeros({2, 3, 16, 16});
    for (std::int64_t i = 0; i < clip.numel(); ++i) clip.set_value(i, rng.uniform(-1.0, 1.0));

    Tensor heat = grad_cam(m, clip, 1);
    CHECK(heat.shape() == Shape{2, 4, 4});
    for (int t = 0; t < 2; ++t) {
        double mx = 0.0;
        for (int i = 0; i < 16; ++i) {
            const double v = heat.value_at(t * 16 + i);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            mx = std::max(mx, v);
        }
        CHECK((mx == 1.0 || mx == 0.0));  // some pixel reaches 1 unless all-zero
    }
    CHECK_THROWS_AS(grad_cam(m, clip, 5), ContractError);

    // zero clip head: zero gradients, all-zero heatmaps
    for (std::int64_t i = 0; i < m.clip_head.weight.numel(); ++i) m.clip_head.weight.set_value(i, 0.0);
    for (std::int64_t i = 0; i < m.clip_head.bias.numel(); ++i) m.clip_head.bias.set_value(i, 0.0);
    Tensor zero_heat = grad_cam(m, clip, 0);
    for (std::int64_t i = 0; i < zero_heat.numel(); ++i) CHECK(zero_heat.value_at(i) == 0.0);
}

TEST_CASE("ablate: rows, param ordering, count cross-check") {
    FameConfig base;
    base.input_size = 16;
    base.frames = 2;
    base.stages = {{4}, {8}};
    base.h_cell = 4;
    base.classes = 2;

    std::vector<Clip> tr, ev;
    for (int k = 0; k < 2; ++k) {
        for (int i = 0; i < 3; ++i) {
            Rng rng(Rng::mix(777, static_cast<std::uint64_t>(k * 10 + i)));
            Clip c = apply_decoder_family(make_base_clip(rng, 2, 16), k == 0 ? 0 : 3, 1.0);
            c.label = k;
            (i < 2 ? tr : ev).push_back(std::move(c));
        }
    }
    FameConfig baseline = base;
    baseline.spatial_attention = false;
    baseline.temporal_mode = TemporalMode::none;
    FameConfig full = base;  // spatial + gate

    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 4;
    tc.lr = 1e-3;
    tc.weight_decay = 0.0;
    const auto rows = ablate(tr, ev, {{"baseline", baseline}, {"full", full}}, tc, {1});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].name == "baseline");
    CHECK(rows[1].params > rows[0].params);  // attention parameters are additive

    FameModel mb = build_model(baseline, 1);
    FameModel mf = build_model(full, 1);
    CHECK(rows[0].params == count_params(mb));
    CHECK(rows[1].params == count_params(mf));

    CHECK_THROWS_AS(ablate(tr, ev, {{"only", full}}, tc, {1}), ContractError);
}

TEST_CASE("evaluate_clips produces a deterministic report over a tiny model") {
    FameConfig cfg;
    cfg.input_size = 16;
    cfg.frames = 2;
    cfg.stages = {{4}, {8}};
    cfg.h_cell = 4;
    cfg.classes = 2;
    FameModel m = build_model(cfg, 55);
    std::vector<Clip> clips;
    for (int k = 0; k < 2; ++k) {
        for (int i = 0; i < 3; ++i) {
            Rng rng(Rng::mix(888, static_cast<std::uint64_t>(k * 10 + i)));
            Clip c = apply_decoder_family(make_base_clip(rng, 2, 16), k, 1.0);
            c.label = k;
            clips.push_back(std::move(c));
        }
    }
    EvalOutcome a = evaluate_clips(m, clips);
    EvalOutcome b = evaluate_clips(m, clips);
    CHECK(a.report.samples == 6);
    CHECK(a.preds == b.preds);
    CHECK(a.probs == b.probs);
    // the only difference between runs may be the timing line
    const std::string ta = a.report.to_text(0, "x");
    CHECK(ta.find("confusion\t2\t2") != std::string::npos);
    CHECK_THROWS_AS(evaluate_clips(m, {}), ConfigError);
}
