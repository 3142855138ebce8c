// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criterion 3's artifacts (dataset, checkpoint, metrics report) are
// written to a scratch directory and reused by the later criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "fame/checkpoint.hpp"
#include "fame/config.hpp"
#include "fame/evaluation.hpp"
#include "fame/gradcheck.hpp"
#include "fame/util.hpp"
#include "oracles.hpp"

using namespace fame;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

void report_aux(const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] aux: %s — %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---- shared acceptance configuration -------------------------------------

// Desk-scale model for the 32x32 synthetic attribution task.
FameConfig acceptance_model_config() {
    FameConfig cfg;
    cfg.input_size = 32;
    cfg.frames = 10;
    cfg.stages = {{6}, {12}, {24}};
    cfg.h_cell = 12;
    cfg.classes = 5;
    return cfg;
}

DatasetSpec acceptance_dataset_spec(std::uint64_t seed) {
    DatasetSpec spec;
    spec.classes = 5;
    spec.clips_per_class = 125;  // 100 train + 25 test at the 80/20 split
    spec.frames = 10;
    spec.size = 32;
    spec.train_fraction = 0.8;
    spec.strength = 1.0;
    spec.seed = seed;
    return spec;
}

TrainConfig acceptance_train_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 32;
    cfg.lr = 0.01;  // schedule never decays within 30 epochs
    cfg.weight_decay = 0.01;  // documented desk-scale override of the published 0.6
    cfg.seed = seed;
    return cfg;
}

struct SeedRun {
    double test_accuracy = 0.0;
    double seconds = 0.0;
    std::string run_dir;
    std::string data_dir;
    EvalOutcome outcome;
    DatasetManifest manifest;
};

// Full pipeline for one seed: materialize the dataset, train from the
// manifest, save the checkpoint, evaluate the test split, write the report.
SeedRun run_seed(const std::string& base, std::uint64_t seed, const std::string& tag) {
    SeedRun run;
    run.data_dir = base + "/data_" + tag;
    run.run_dir = base + "/run_" + tag;
    fs::remove_all(run.data_dir);
    fs::remove_all(run.run_dir);
    fs::create_directories(run.run_dir);

    const auto t0 = std::chrono::steady_clock::now();
    DatasetSpec spec = acceptance_dataset_spec(seed);
    run.manifest = generate_dataset(spec, run.data_dir);

    FameConfig mc = acceptance_model_config();
    TrainConfig tc = acceptance_train_config(seed);
    FameModel model = build_model(mc, seed);
    TrainResult result = train(model, run.manifest, run.data_dir, tc);

    RunConfig rc;
    rc.model = mc;
    rc.train = tc;
    rc.data = spec;
    rc.seed = seed;
    write_text_file(run.run_dir + "/history.tsv", result.history.to_tsv(seed, rc.config_hash()));
    save_checkpoint(checkpoint_from_model(model, seed, tc.epochs), run.run_dir + "/final.ckpt");

    run.outcome = evaluate(model, run.manifest, run.data_dir, Split::test);
    write_text_file(run.run_dir + "/report.txt",
                    run.outcome.report.to_text(seed, run.manifest.config_hash));
    run.test_accuracy = run.outcome.report.accuracy;
    const auto t1 = std::chrono::steady_clock::now();
    run.seconds = std::chrono::duration<double>(t1 - t0).count();
    return run;
}

std::string strip_timing_lines(const std::string& text) {
    std::istringstream in(text);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("timing.", 0) == 0) continue;
        out << line << "\n";
    }
    return out.str();
}

// 8-bit quantization matching the PPM storage path, so regenerated clips see
// the same pipeline as materialized ones.
Clip quantize_clip(Clip clip) {
    for (double& v : clip.pixels) {
        v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    }
    return clip;
}

}  // namespace

int main() {
    const std::string base = (fs::temp_directory_path() / "fame_acceptance").string();
    fs::create_directories(base);

    // ---- criterion 1: gradient oracle -------------------------------------
    {
        const auto t0 = std::chrono::steady_clock::now();
        const FdReport gate = gradcheck_full_model(TemporalMode::gate);
        const FdReport softmax = gradcheck_full_model(TemporalMode::softmax);
        const auto t1 = std::chrono::steady_clock::now();
        const double secs = std::chrono::duration<double>(t1 - t0).count();
        const double worst = std::max(gate.max_rel_err, softmax.max_rel_err);
        report(1, "gradient oracle (toy config, both temporal modes)",
               worst <= 1e-4 && secs < 60.0,
               "max_rel_err gate=" + fmt(gate.max_rel_err) + " softmax=" +
                   fmt(softmax.max_rel_err) + " tol=1e-4, runtime=" + fmt(secs) + "s < 60s");
    }

    // ---- criterion 2: primitive equivalence --------------------------------
    {
        Rng rng(2202);
        double conv_worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const int n = 1 + static_cast<int>(rng.below(2));
            const int cin = 1 + static_cast<int>(rng.below(3));
            const int cout = 1 + static_cast<int>(rng.below(4));
            const int k = 1 + 2 * static_cast<int>(rng.below(2));
            const int size = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(8 - k + 1)));
            const int stride = 1 + static_cast<int>(rng.below(2));
            const int pad = static_cast<int>(rng.below(2));
            Tensor x = Tensor::zeros({n, cin, size, size});
            Tensor w = Tensor::zeros({cout, cin, k, k});
            Tensor b = Tensor::zeros({cout});
            for (std::int64_t i = 0; i < x.numel(); ++i) x.set_value(i, rng.uniform(-1, 1));
            for (std::int64_t i = 0; i < w.numel(); ++i) w.set_value(i, rng.uniform(-1, 1));
            for (std::int64_t i = 0; i < b.numel(); ++i) b.set_value(i, rng.uniform(-1, 1));
            Tensor got = conv2d(nullptr, x, w, b, stride, pad);
            Tensor want = oracle::conv2d_naive(x, w, b, stride, pad);
            for (std::int64_t i = 0; i < got.numel(); ++i) {
                conv_worst = std::max(conv_worst, std::abs(got.value_at(i) - want.value_at(i)));
            }
        }
        double auc_worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const int n = 10 + static_cast<int>(rng.below(30));
            std::vector<double> scores(static_cast<std::size_t>(n));
            std::vector<bool> pos(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                scores[static_cast<std::size_t>(i)] = rng.below(6) / 6.0;  // heavy ties
                pos[static_cast<std::size_t>(i)] = rng.bernoulli(0.5);
            }
            if (std::none_of(pos.begin(), pos.end(), [](bool v) { return v; })) pos[0] = true;
            if (std::all_of(pos.begin(), pos.end(), [](bool v) { return v; })) pos[0] = false;
            const RocCurve curve = roc_curve_binary(scores, pos);
            auc_worst = std::max(auc_worst, std::abs(curve.auc - oracle::auc_pairwise(scores, pos)));
        }
        report(2, "primitive equivalence (conv2d naive oracle, AUC Mann-Whitney oracle)",
               conv_worst <= 1e-12 && auc_worst <= 1e-12,
               "conv max_abs_diff=" + fmt(conv_worst) + ", auc max_abs_diff=" + fmt(auc_worst) +
                   " (tol 1e-12, 50 instances each)");
    }

    // ---- criterion 3: synthetic attribution end to end ---------------------
    std::vector<SeedRun> runs;
    {
        const auto t0 = std::chrono::steady_clock::now();
        double acc_sum = 0.0;
        std::string detail;
        for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
            SeedRun run = run_seed(base, seed, "seed" + std::to_string(seed));
            acc_sum += run.test_accuracy;
            detail += "seed" + std::to_string(seed) + "=" + fmt(run.test_accuracy * 100.0) + "% ";
            runs.push_back(std::move(run));
        }
        const auto t1 = std::chrono::steady_clock::now();
        const double minutes = std::chrono::duration<double>(t1 - t0).count() / 60.0;
        const double mean_acc = acc_sum / 3.0;
        report(3, "synthetic attribution end-to-end (5 families, 3 seeds, 30 epochs)",
               mean_acc >= 0.80 && minutes <= 15.0,
               detail + "mean=" + fmt(mean_acc * 100.0) + "% >= 80%, runtime=" + fmt(minutes) +
                   "min <= 15min");
    }

    // ---- criterion 4: ablation trend ---------------------------------------
    {
        // criterion-3-scale grid with a shortened schedule: every variant
        // saturates by epoch ~8 there, smaller grids leave the full model
        // underfitted and scramble the ordering
        DatasetSpec spec = acceptance_dataset_spec(11);
        DatasetManifest manifest = generate_dataset(spec, "");
        std::vector<Clip> tr, ev;
        for (const auto& rec : manifest.records) {
            Clip c = quantize_clip(synthesize_record(spec, rec));
            c.label = rec.label;
            (rec.split == Split::train ? tr : ev).push_back(std::move(c));
        }
        FameConfig b = acceptance_model_config();
        auto variant = [&](bool spatial, TemporalMode mode) {
            FameConfig c = b;
            c.spatial_attention = spatial;
            c.temporal_mode = mode;
            return c;
        };
        TrainConfig tc = acceptance_train_config(0);
        tc.epochs = 12;  // saturation regime for all four variants
        const std::vector<AblationVariant> variants = {
            {"baseline", variant(false, TemporalMode::none)},
            {"spatial_only", variant(true, TemporalMode::none)},
            {"temporal_only", variant(false, TemporalMode::gate)},
            {"full", variant(true, TemporalMode::gate)},
        };
        const auto rows = ablate(tr, ev, variants, tc, {1, 2, 3});
        const double baseline = rows[0].accuracy * 100.0;
        const double mid = std::max(rows[1].accuracy, rows[2].accuracy) * 100.0;
        const double full = rows[3].accuracy * 100.0;
        // ordering full >= max(mids) >= baseline, one inversion of <= 1 point allowed
        const bool top_ok = full >= mid;
        const bool bottom_ok = mid >= baseline;
        int inversions = 0;
        double worst_gap = 0.0;
        if (!top_ok) {
            ++inversions;
            worst_gap = std::max(worst_gap, mid - full);
        }
        if (!bottom_ok) {
            ++inversions;
            worst_gap = std::max(worst_gap, baseline - mid);
        }
        const bool pass = inversions == 0 || (inversions == 1 && worst_gap <= 1.0);
        std::string detail;
        for (const auto& row : rows) {
            detail += row.name + "=" + fmt(row.accuracy * 100.0) + "%(" +
                      std::to_string(row.params) + "p) ";
        }
        report(4, "ablation trend (full >= attention-only >= baseline)", pass, detail);
    }

    // ---- criterion 5: compression robustness trend -------------------------
    {
        const SeedRun& run = runs[0];
        Checkpoint ckpt = load_checkpoint(run.run_dir + "/final.ckpt");
        FameModel model = model_from_checkpoint(ckpt);
        DatasetSpec spec = acceptance_dataset_spec(1);
        auto eval_tier = [&](Compression tier) {
            std::vector<Clip> clips;
            for (const auto& rec : run.manifest.records) {
                if (rec.split != Split::test) continue;
                ManifestRecord r = rec;
                r.compression = tier;
                Clip c = quantize_clip(synthesize_record(spec, r));
                c.label = rec.label;
                clips.push_back(std::move(c));
            }
            return evaluate_clips(model, clips).report.accuracy * 100.0;
        };
        const double acc_none = eval_tier(Compression::none);
        const double acc_hq = eval_tier(Compression::hq);
        const double acc_lq = eval_tier(Compression::lq);
        const bool pass = acc_lq <= acc_none && acc_hq >= acc_lq - 2.0 && acc_hq <= acc_none + 2.0;
        report(5, "compression robustness trend (lq <= none, hq between within 2 points)", pass,
               "none=" + fmt(acc_none) + "% hq=" + fmt(acc_hq) + "% lq=" + fmt(acc_lq) + "%");
    }

    // ---- criterion 6: parameter accounting ----------------------------------
    {
        FameConfig cfg;  // published defaults: 112^2, T=10, H_cell=96, K=5
        FameModel m = build_model(cfg, 1);
        const std::int64_t total = count_params(m);
        const ParamBreakdown bd = param_breakdown(m);
        std::int64_t recon = 0;
        for (const auto& [name, n] : bd.groups) recon += n;
        const bool pass = total >= 2480000 && total <= 2740000 && recon == total &&
                          bd.backbone_learnable == 2328384 && bd.backbone_with_stats == 2331200;
        report(6, "parameter accounting (2.61M +- 5%, backbone subtotal exact)", pass,
               "total=" + std::to_string(total) + " in [2480000, 2740000], backbone learnable=" +
                   std::to_string(bd.backbone_learnable) + ", with BN stats=" +
                   std::to_string(bd.backbone_with_stats) + ", groups sum=" + std::to_string(recon));
    }

    // ---- criterion 7: schedule and optimizer contracts ----------------------
    {
        TrainConfig cfg;  // lr 0.01, x0.1 every 40
        const bool sched_ok = lr_schedule(0, cfg) == 1e-2 && lr_schedule(39, cfg) == 1e-2 &&
                              lr_schedule(40, cfg) == 1e-3 && lr_schedule(80, cfg) == 1e-4 &&
                              lr_schedule(120, cfg) == 1e-5;
        Tensor w = Tensor::from_values({0.5, -1.5, 2.25}, {3}).set_requires_grad(true);
        w.ensure_grad();
        w.zero_grad();
        std::vector<NamedParam> params = {{"w", w, true}};
        OptimState opt;
        opt.lr = 0.01;
        opt.weight_decay = 0.6;
        opt.init(params);
        const std::vector<double> before = w.to_vector();
        adamw_step(params, opt);
        bool adamw_ok = true;
        for (int i = 0; i < 3; ++i) {
            adamw_ok = adamw_ok &&
                       w.value_at(i) == before[static_cast<std::size_t>(i)] * (1.0 - 0.01 * 0.6);
        }
        report(7, "schedule and optimizer contracts", sched_ok && adamw_ok,
               std::string("lr(0,39,40,80,120) exact: ") + (sched_ok ? "yes" : "no") +
                   ", zero-grad AdamW step multiplies by exactly (1 - lr*wd): " +
                   (adamw_ok ? "yes" : "no"));
    }

    // ---- criterion 8: determinism -------------------------------------------
    {
        SeedRun repeat = run_seed(base, 1, "seed1_repeat");
        const bool manifest_same = read_text_file(runs[0].data_dir + "/manifest.tsv") ==
                                   read_text_file(repeat.data_dir + "/manifest.tsv");
        const bool ckpt_same = read_text_file(runs[0].run_dir + "/final.ckpt") ==
                               read_text_file(repeat.run_dir + "/final.ckpt");
        const bool report_same =
            strip_timing_lines(read_text_file(runs[0].run_dir + "/report.txt")) ==
            strip_timing_lines(read_text_file(repeat.run_dir + "/report.txt"));
        report(8, "determinism (repeat of criterion 3, seed 1, bit-identical artifacts)",
               manifest_same && ckpt_same && report_same,
               std::string("manifest ") + (manifest_same ? "identical" : "DIFFERS") +
                   ", checkpoint " + (ckpt_same ? "identical" : "DIFFERS") +
                   ", report (timing lines excluded) " + (report_same ? "identical" : "DIFFERS"));
    }

    // ---- criterion 9: metric suite recomputation ----------------------------
    {
        const EvalOutcome& outcome = runs[0].outcome;
        const MetricsReport& r = outcome.report;
        std::int64_t trace = 0;
        for (int k = 0; k < r.classes; ++k) {
            trace += r.confusion[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
        }
        const double acc_err = std::abs(r.accuracy - static_cast<double>(trace) / r.samples);
        double f1_sum = 0.0;
        for (int c = 0; c < r.classes; ++c) {
            std::int64_t row = 0, col = 0;
            for (int j = 0; j < r.classes; ++j) {
                row += r.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
                col += r.confusion[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
            }
            const double tp =
                static_cast<double>(r.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]);
            const double prec = col > 0 ? tp / col : 0.0;
            const double rec = row > 0 ? tp / row : 0.0;
            f1_sum += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
        }
        const double f1_err = std::abs(r.macro_f1 - f1_sum / r.classes);
        double auc_err = 0.0;
        for (int c = 0; c < r.classes; ++c) {
            if (!r.per_class[static_cast<std::size_t>(c)].auc_defined) continue;
            std::vector<double> scores(outcome.labels.size());
            std::vector<bool> pos(outcome.labels.size());
            for (std::size_t i = 0; i < outcome.labels.size(); ++i) {
                scores[i] = outcome.probs[i][static_cast<std::size_t>(c)];
                pos[i] = outcome.labels[i] == c;
            }
            auc_err = std::max(auc_err, std::abs(r.per_class[static_cast<std::size_t>(c)].auc -
                                                 oracle::auc_pairwise(scores, pos)));
        }
        report(9, "metric suite recomputation (accuracy, macro F1, per-class AUC)",
               acc_err <= 1e-12 && f1_err <= 1e-12 && auc_err <= 1e-12,
               "accuracy_err=" + fmt(acc_err) + " macroF1_err=" + fmt(f1_err) + " auc_err=" +
                   fmt(auc_err) + " (tol 1e-12)");
    }

    // ---- auxiliary checks tied to the trained acceptance model --------------
    {
        // Grad-CAM stimulus probe: injecting a checkerboard-family patch into
        // one quadrant shifts the class-3 heatmap's center of mass toward it.
        const SeedRun& run = runs[0];
        Checkpoint ckpt = load_checkpoint(run.run_dir + "/final.ckpt");
        FameModel model = model_from_checkpoint(ckpt);
        DatasetSpec spec = acceptance_dataset_spec(1);
        ManifestRecord fam0_rec;
        bool found0 = false;
        for (const auto& rec : run.manifest.records) {
            if (rec.split == Split::test && rec.family == 0) {
                fam0_rec = rec;
                found0 = true;
                break;
            }
        }
        bool cam_pass = false;
        std::string cam_detail = "no family-0 test clip";
        if (found0) {
            Clip clean = quantize_clip(synthesize_record(spec, fam0_rec));
            ManifestRecord fam3_rec = fam0_rec;
            fam3_rec.family = 3;
            Clip checker = quantize_clip(synthesize_record(spec, fam3_rec));
            Clip injected = clean;
            const int half = clean.width / 2;
            for (int t = 0; t < clean.frames; ++t) {
                for (int c = 0; c < 3; ++c) {
                    for (int y = half; y < clean.height; ++y) {
                        for (int x = half; x < clean.width; ++x) {
                            injected.at(t, c, y, x) = checker.at(t, c, y, x);
                        }
                    }
                }
            }
            auto center_of_mass = [](const Tensor& heat) {
                const std::int64_t t_len = heat.dim(0), h = heat.dim(1), w = heat.dim(2);
                double cx = 0.0, cy = 0.0, mass = 0.0;
                for (std::int64_t t = 0; t < t_len; ++t) {
                    for (std::int64_t y = 0; y < h; ++y) {
                        for (std::int64_t x = 0; x < w; ++x) {
                            const double v = heat.value_at((t * h + y) * w + x);
                            cx += v * static_cast<double>(x);
                            cy += v * static_cast<double>(y);
                            mass += v;
                        }
                    }
                }
                if (mass == 0.0) return std::pair<double, double>{0.0, 0.0};
                return std::pair<double, double>{cx / mass, cy / mass};
            };
            Tensor clean_heat = grad_cam(model, eval_input(clean, model.config), 3);
            Tensor injected_heat = grad_cam(model, eval_input(injected, model.config), 3);
            const auto [cx0, cy0] = center_of_mass(clean_heat);
            const auto [cx1, cy1] = center_of_mass(injected_heat);
            cam_pass = cx1 > cx0 && cy1 > cy0;  // toward the lower-right quadrant
            cam_detail = "center of mass (" + fmt(cx0) + "," + fmt(cy0) + ") -> (" + fmt(cx1) +
                         "," + fmt(cy1) + ")";
        }
        report_aux("grad-cam checkerboard stimulus shifts saliency toward the patch", cam_pass,
                   cam_detail);

        // Attribute CLI prints class 4 for a correctly-classified family-4 clip.
        const char* cli = std::getenv("FAME_CLI");
        if (cli != nullptr && *cli != '\0') {
            std::string clip_dir;
            for (std::size_t i = 0; i < run.outcome.labels.size(); ++i) {
                if (run.outcome.labels[i] == 4 && run.outcome.preds[i] == 4) {
                    // locate the i-th test record
                    std::size_t seen = 0;
                    for (const auto& rec : run.manifest.records) {
                        if (rec.split != Split::test) continue;
                        if (seen == i) {
                            clip_dir = run.data_dir + "/" + rec.dir;
                            break;
                        }
                        ++seen;
                    }
                    break;
                }
            }
            bool attr_pass = false;
            std::string detail = "no correctly-classified family-4 clip";
            if (!clip_dir.empty()) {
                const std::string out_path = base + "/attr_out.txt";
                const std::string cmd = std::string(cli) + " attribute --checkpoint " +
                                        run.run_dir + "/final.ckpt --clip " + clip_dir + " > " +
                                        out_path + " 2>/dev/null";
                const int rc = std::system(cmd.c_str());
                if (WEXITSTATUS(rc) == 0) {
                    const std::string out = read_text_file(out_path);
                    attr_pass = out.find("class\t4") != std::string::npos;
                    detail = attr_pass ? "CLI printed class 4" : "CLI output:\n" + out;
                } else {
                    detail = "CLI exited with " + std::to_string(WEXITSTATUS(rc));
                }
            }
            report_aux("attribute CLI on a family-4 clip with the acceptance checkpoint",
                       attr_pass, detail);
        } else {
            std::printf("[SKIP] aux: attribute CLI (FAME_CLI not set)\n");
        }
    }

    std::printf("%s: %d criteria failed\n", g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
                g_failures);
    return g_failures == 0 ? 0 : 1;
}
