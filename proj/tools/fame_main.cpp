// fame: synthesize decoder-fingerprint datasets, train and evaluate the
// spatio-temporal attribution model, and run the verification utilities.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "fame/checkpoint.hpp"
#include "fame/config.hpp"
#include "fame/evaluation.hpp"
#include "fame/gradcheck.hpp"
#include "fame/parallel.hpp"
#include "fame/ppm.hpp"
#include "fame/util.hpp"

namespace fs = std::filesystem;
using namespace fame;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::vector<Clip> load_split(const DatasetManifest& manifest, const std::string& root,
                             Split split) {
    std::vector<Clip> clips;
    for (const auto& rec : manifest.records) {
        if (rec.split != split) continue;
        Clip clip = load_clip((fs::path(root) / rec.dir).string());
        clip.label = rec.label;
        clip.family = rec.family;
        clip.compression = rec.compression;
        clips.push_back(std::move(clip));
    }
    return clips;
}

std::string machine_descriptor() {
    std::ostringstream os;
    os << "threads=" << worker_count();
#if defined(__GNUC__)
    os << " gcc=" << __GNUC__ << "." << __GNUC_MINOR__;
#endif
#if defined(__x86_64__)
    os << " arch=x86_64";
#elif defined(__aarch64__)
    os << " arch=aarch64";
#endif
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FAME deepfake model-attribution toolkit"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic decoder-fingerprint dataset");
    std::string synth_out = "dataset";
    DatasetSpec spec;
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--classes", spec.classes, "decoder families / classes");
    synth->add_option("--per-class", spec.clips_per_class, "clips per class");
    synth->add_option("--frames", spec.frames, "frames per clip");
    synth->add_option("--size", spec.size, "frame resolution");
    synth->add_option("--train-frac", spec.train_fraction, "train split fraction");
    synth->add_option("--hq", spec.frac_hq, "fraction of clips at HQ compression");
    synth->add_option("--lq", spec.frac_lq, "fraction of clips at LQ compression");
    synth->add_option("--strength", spec.strength, "fingerprint strength in (0,1]");
    synth->add_option("--seed", spec.seed, "master seed");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train a model from a dataset manifest");
    std::string train_config, train_data, train_out = "run";
    bool train_save_best = true;
    train_cmd->add_option("--config", train_config, "run config file");
    train_cmd->add_option("--data", train_data, "dataset directory (with manifest.tsv)")->required();
    train_cmd->add_option("--out", train_out, "output directory");
    train_cmd->add_flag("--best,!--no-best", train_save_best, "also save the best-eval checkpoint");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    std::string eval_ckpt, eval_data, eval_out = "eval", eval_split = "test";
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
    eval_cmd->add_option("--split", eval_split, "train or test");
    eval_cmd->add_option("--out", eval_out, "output directory");

    // ---- attribute ----
    auto* attr_cmd = app.add_subcommand("attribute", "attribute one clip directory");
    std::string attr_ckpt, attr_clip;
    attr_cmd->add_option("--checkpoint", attr_ckpt, "checkpoint file")->required();
    attr_cmd->add_option("--clip", attr_clip, "clip directory of PPM frames")->required();

    // ---- gradcam ----
    auto* cam_cmd = app.add_subcommand("gradcam", "write per-frame saliency heatmaps");
    std::string cam_ckpt, cam_clip, cam_out = "gradcam";
    int cam_target = 0;
    cam_cmd->add_option("--checkpoint", cam_ckpt, "checkpoint file")->required();
    cam_cmd->add_option("--clip", cam_clip, "clip directory")->required();
    cam_cmd->add_option("--target", cam_target, "target class id")->required();
    cam_cmd->add_option("--out", cam_out, "output directory");

    // ---- ablate ----
    auto* abl_cmd = app.add_subcommand("ablate", "train attention-ablation variants");
    std::string abl_config, abl_data, abl_out = "ablation.tsv";
    std::vector<std::uint64_t> abl_seeds = {1, 2, 3};
    abl_cmd->add_option("--config", abl_config, "run config file");
    abl_cmd->add_option("--data", abl_data, "dataset directory")->required();
    abl_cmd->add_option("--out", abl_out, "output report path");
    abl_cmd->add_option("--seeds", abl_seeds, "seeds to average over");

    // ---- gradcheck ----
    auto* gc_cmd = app.add_subcommand("gradcheck", "toy-config finite-difference suite");
    std::string gc_mode = "both";
    gc_cmd->add_option("--mode", gc_mode, "gate, softmax, or both");

    // ---- bench ----
    auto* bench_cmd = app.add_subcommand("bench", "parameter/FLOPs/latency report");
    std::string bench_ckpt, bench_data;
    int bench_clips = 20;
    bench_cmd->add_option("--checkpoint", bench_ckpt, "checkpoint file")->required();
    bench_cmd->add_option("--data", bench_data, "dataset directory")->required();
    bench_cmd->add_option("--clips", bench_clips, "number of clips to time");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*synth) {
            DatasetManifest manifest = generate_dataset(spec, synth_out);
            std::printf("wrote %zu clips to %s (seed=%llu config=%s)\n", manifest.records.size(),
                        synth_out.c_str(), static_cast<unsigned long long>(manifest.seed),
                        manifest.config_hash.c_str());
        } else if (*train_cmd) {
            RunConfig rc = train_config.empty() ? RunConfig{} : load_config_file(train_config);
            DatasetManifest manifest = read_manifest((fs::path(train_data) / "manifest.tsv").string());
            FameModel model = build_model(rc.model, rc.train.seed);
            TrainResult result = train(model, manifest, train_data, rc.train);
            fs::create_directories(train_out);
            write_text_file((fs::path(train_out) / "history.tsv").string(),
                            result.history.to_tsv(rc.train.seed, rc.config_hash()));
            Checkpoint final_ckpt = checkpoint_from_model(model, rc.train.seed, rc.train.epochs);
            save_checkpoint(final_ckpt, (fs::path(train_out) / "final.ckpt").string());
            if (train_save_best && result.best_epoch >= 0) {
                FameModel best = build_model(rc.model, rc.train.seed);
                apply_state(best, result.best_state);
                Checkpoint best_ckpt = checkpoint_from_model(best, rc.train.seed, result.best_epoch);
                save_checkpoint(best_ckpt, (fs::path(train_out) / "best.ckpt").string());
            }
            std::printf("trained %d epochs; final eval_acc=%.4f best=%.4f (epoch %d)\n",
                        rc.train.epochs,
                        result.history.rows.empty() ? 0.0 : result.history.rows.back().eval_acc,
                        result.best_eval_acc, result.best_epoch);
        } else if (*eval_cmd) {
            Checkpoint ckpt = load_checkpoint(eval_ckpt);
            FameModel model = model_from_checkpoint(ckpt);
            DatasetManifest manifest = read_manifest((fs::path(eval_data) / "manifest.tsv").string());
            EvalOutcome outcome = evaluate(model, manifest, eval_data, split_from_name(eval_split));
            fs::create_directories(eval_out);
            write_text_file((fs::path(eval_out) / "report.txt").string(),
                            outcome.report.to_text(ckpt.seed, manifest.config_hash));
            for (int k = 0; k < model.config.classes; ++k) {
                const RocCurve& curve = outcome.curves[static_cast<std::size_t>(k)];
                if (!curve.defined) continue;
                write_text_file((fs::path(eval_out) / ("roc_class_" + std::to_string(k) + ".tsv")).string(),
                                curve.to_tsv());
            }
            std::printf("accuracy=%.4f macro_f1=%.4f macro_auc=%.4f over %lld clips\n",
                        outcome.report.accuracy, outcome.report.macro_f1, outcome.report.macro_auc,
                        static_cast<long long>(outcome.report.samples));
        } else if (*attr_cmd) {
            Checkpoint ckpt = load_checkpoint(attr_ckpt);
            FameModel model = model_from_checkpoint(ckpt);
            Clip clip = load_clip(attr_clip);
            if (clip.frames != model.config.frames) {
                throw DataError("clip has " + std::to_string(clip.frames) + " frames, model expects " +
                                std::to_string(model.config.frames));
            }
            Tensor input = eval_input(clip, model.config);
            const auto [pred, probs] = attribute(model, input);
            std::printf("class\t%d\n", pred);
            for (std::size_t k = 0; k < probs.size(); ++k) {
                std::printf("prob.%zu\t%s\n", k, format_double(probs[k]).c_str());
            }
        } else if (*cam_cmd) {
            Checkpoint ckpt = load_checkpoint(cam_ckpt);
            FameModel model = model_from_checkpoint(ckpt);
            Clip clip = load_clip(cam_clip);
            Tensor input = eval_input(clip, model.config);
            Tensor heat = grad_cam(model, input, cam_target);
            fs::create_directories(cam_out);
            const std::int64_t t_len = heat.dim(0), h = heat.dim(1), w = heat.dim(2);
            for (std::int64_t t = 0; t < t_len; ++t) {
                std::vector<double> plane(static_cast<std::size_t>(h * w));
                for (std::int64_t i = 0; i < h * w; ++i) {
                    plane[static_cast<std::size_t>(i)] = heat.value_at(t * h * w + i);
                }
                char name[32];
                std::snprintf(name, sizeof(name), "heatmap_%03lld.pgm", static_cast<long long>(t));
                write_pgm((fs::path(cam_out) / name).string(), plane, static_cast<int>(h),
                          static_cast<int>(w));
            }
            std::printf("wrote %lld heatmaps to %s\n", static_cast<long long>(t_len), cam_out.c_str());
        } else if (*abl_cmd) {
            RunConfig rc = abl_config.empty() ? RunConfig{} : load_config_file(abl_config);
            DatasetManifest manifest = read_manifest((fs::path(abl_data) / "manifest.tsv").string());
            std::vector<Clip> tr = load_split(manifest, abl_data, Split::train);
            std::vector<Clip> ev = load_split(manifest, abl_data, Split::test);
            FameConfig base = rc.model;
            auto variant = [&](bool spatial, TemporalMode mode) {
                FameConfig c = base;
                c.spatial_attention = spatial;
                c.temporal_mode = mode;
                return c;
            };
            std::vector<AblationVariant> variants = {
                {"baseline_cnn_lstm", variant(false, TemporalMode::none)},
                {"spatial_only", variant(true, TemporalMode::none)},
                {"temporal_only", variant(false, TemporalMode::gate)},
                {"fame_full", variant(true, TemporalMode::gate)},
            };
            const auto rows = ablate(tr, ev, variants, rc.train, abl_seeds);
            std::ostringstream os;
            os << "# fame ablation (mean accuracy over " << abl_seeds.size() << " seeds)\n";
            os << "# config=" << rc.config_hash() << "\n";
            os << "variant\taccuracy\tparams\n";
            for (const auto& row : rows) {
                os << row.name << "\t" << format_double(row.accuracy) << "\t" << row.params << "\n";
            }
            write_text_file(abl_out, os.str());
            std::printf("%s", os.str().c_str());
        } else if (*gc_cmd) {
            if (gc_mode != "gate" && gc_mode != "softmax" && gc_mode != "both") {
                throw ConfigError("gradcheck: mode must be gate, softmax, or both");
            }
            double worst = 0.0;
            auto run_mode = [&](TemporalMode mode) {
                const FdReport report = gradcheck_full_model(mode);
                std::printf("gradcheck mode=%s coords=%lld max_rel_err=%.3e\n",
                            temporal_mode_name(mode).c_str(),
                            static_cast<long long>(report.coords_checked), report.max_rel_err);
                worst = std::max(worst, report.max_rel_err);
            };
            if (gc_mode == "gate" || gc_mode == "both") run_mode(TemporalMode::gate);
            if (gc_mode == "softmax" || gc_mode == "both") run_mode(TemporalMode::softmax);
            std::printf("max relative error: %.6e (tolerance 1e-4)\n", worst);
            if (worst > 1e-4) {
                std::fprintf(stderr, "gradcheck FAILED\n");
                return kExitNumeric;
            }
            std::printf("gradcheck passed\n");
        } else if (*bench_cmd) {
            Checkpoint ckpt = load_checkpoint(bench_ckpt);
            FameModel model = model_from_checkpoint(ckpt);
            DatasetManifest manifest = read_manifest((fs::path(bench_data) / "manifest.tsv").string());
            std::vector<Clip> clips = load_split(manifest, bench_data, Split::test);
            if (clips.empty()) clips = load_split(manifest, bench_data, Split::train);
            if (static_cast<int>(clips.size()) > bench_clips) clips.resize(static_cast<std::size_t>(bench_clips));
            if (clips.empty()) throw DataError("bench: no clips available");
            std::vector<double> times;
            for (const auto& clip : clips) {
                Tensor input = eval_input(clip, model.config);
                const auto t0 = std::chrono::steady_clock::now();
                attribute(model, input);
                const auto t1 = std::chrono::steady_clock::now();
                times.push_back(std::chrono::duration<double>(t1 - t0).count());
            }
            std::sort(times.begin(), times.end());
            double mean = 0.0;
            for (double t : times) mean += t;
            mean /= static_cast<double>(times.size());
            double var = 0.0;
            for (double t : times) var += (t - mean) * (t - mean);
            var /= static_cast<double>(times.size());
            const double median = times[times.size() / 2];
            std::printf("params\t%lld\n", static_cast<long long>(count_params(model)));
            std::printf("flops_per_clip\t%lld\n",
                        static_cast<long long>(estimate_flops(model, model.config.frames)));
            std::printf("machine\t%s\n", machine_descriptor().c_str());
            std::printf("timing.clips\t%zu\n", times.size());
            std::printf("timing.mean_sec\t%s\n", format_double(mean).c_str());
            std::printf("timing.median_sec\t%s\n", format_double(median).c_str());
            std::printf("timing.var_sec2\t%s\n", format_double(var).c_str());
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const ContractError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const DimensionError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
    return 0;
}
