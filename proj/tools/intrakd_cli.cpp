// intrakd: data generation, teacher training, distillation runs and export.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "intrakd/aoi.hpp"
#include "intrakd/distill.hpp"
#include "intrakd/errors.hpp"
#include "intrakd/experiment.hpp"
#include "intrakd/graph_io.hpp"
#include "intrakd/image_io.hpp"
#include "intrakd/metrics.hpp"
#include "intrakd/ops.hpp"

namespace fs = std::filesystem;
using namespace intrakd;

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string variant;
    std::optional<double> alpha1, alpha2, kd_temp;
    std::string moments;
    bool no_attention = false;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool training_flags) {
    cmd->add_option("--config", o.config, "key = value configuration file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--seed", o.seed, "run a single seed instead of experiment.seeds");
    cmd->add_flag("-q,--quiet", o.quiet, "no progress output");
    if (!training_flags) return;
    cmd->add_option("--variant", o.variant, "none | intra-kd | kd | m1 | m23 | m123+att | att ...");
    cmd->add_option("--alpha1", o.alpha1, "affinity loss weight")->check(CLI::NonNegativeNumber);
    cmd->add_option("--alpha2", o.alpha2, "attention loss weight")->check(CLI::NonNegativeNumber);
    cmd->add_option("--moments", o.moments, "enabled moment orders, e.g. 1,2,3");
    cmd->add_flag("--no-attention", o.no_attention, "disable the attention term");
    cmd->add_option("--kd-temp", o.kd_temp, "temperature of the probability-map KD baseline")
        ->check(CLI::PositiveNumber);
}

ExperimentConfig load_config(const CommonOptions& o) {
    KeyValueConfig kv = KeyValueConfig::load(o.config);
    char buf[40];
    auto set_double = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        kv.set(key, buf);
    };
    if (o.seed) kv.set("experiment.seeds", std::to_string(*o.seed));
    if (!o.out.empty()) kv.set("output.dir", o.out);
    if (!o.variant.empty()) kv.set("experiment.variants", o.variant);
    if (o.alpha1) set_double("loss.alpha1", *o.alpha1);
    if (o.alpha2) set_double("loss.alpha2", *o.alpha2);
    if (o.kd_temp) set_double("loss.kd_temp", *o.kd_temp);
    if (!o.moments.empty()) kv.set("loss.moments", o.moments);
    if (o.no_attention) kv.set("loss.attention", "false");
    return experiment_config_from(kv);
}

ProgressFn progress_for(const CommonOptions& o) {
    if (o.quiet) return {};
    return [](const std::string& line) { std::cerr << line << '\n'; };
}

fs::path require_out(const ExperimentConfig& c) {
    if (c.output_dir.empty()) throw ConfigError("no output directory: pass --out or set output.dir");
    fs::create_directories(c.output_dir);
    return c.output_dir;
}

void print_report(const MetricsReport& report, const ExperimentConfig& config) {
    if (!report.teacher_test.iou.per_class.empty()) std::printf("teacher test miou %.4f\n", report.teacher_test.iou.mean);
    for (const auto& name : config.variants) {
        const Aggregate a = report.aggregate(name);
        std::printf("%-10s seeds=%zu median=%.4f min=%.4f max=%.4f\n", name.c_str(), a.count, a.median, a.min, a.max);
    }
    for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int cmd_gen_data(const CommonOptions& o) {
    ExperimentConfig c = load_config(o);
    if (o.seed) c.data_seed = *o.seed;
    const fs::path out = require_out(c);
    const Splits s = generate_splits(c);
    write_dataset(s.train, out / "train");
    write_dataset(s.val, out / "val");
    write_dataset(s.test, out / "test");
    std::printf("wrote %zu/%zu/%zu samples to %s\n", s.train.samples.size(), s.val.samples.size(),
                s.test.samples.size(), out.c_str());
    return 0;
}

int cmd_train_teacher(const CommonOptions& o) {
    ExperimentConfig c = load_config(o);
    if (o.seed) c.teacher.seed = *o.seed;
    const fs::path out = require_out(c);
    const Splits s = generate_splits(c);
    TrainLog log;
    const Network teacher = train_teacher(c, s.train, &log, progress_for(o));
    save_checkpoint(out / "teacher.ckpt", teacher);
    const EvalResult eval = evaluate(teacher, s.test);
    RunRow row{"teacher", c.teacher.seed, eval, log.seg, 0.0, 0.0, c.teacher_steps, log.wall_ms};
    write_metrics_csv(out / "teacher_metrics.csv", {row}, c.scene.n, c.record_wall_time);
    std::printf("teacher test miou %.4f\n", eval.iou.mean);
    if (eval.iou.mean < c.teacher_min_miou) {
        std::fprintf(stderr, "warning: teacher mIoU %.4f below floor %.4f\n", eval.iou.mean, c.teacher_min_miou);
    }
    return 0;
}

int cmd_run(const CommonOptions& o, const std::string& teacher_path, bool ablate) {
    ExperimentConfig c = load_config(o);
    if (ablate) c.variants = ablation_variants();
    require_out(c);
    std::optional<Network> teacher;
    if (!teacher_path.empty()) teacher = load_checkpoint(teacher_path);
    const MetricsReport report = run_experiment(c, teacher ? &*teacher : nullptr, progress_for(o));
    print_report(report, c);
    return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& checkpoint, const std::string& pred_dir,
             const std::string& gt_dir) {
    ExperimentConfig c = load_config(o);
    const fs::path out = require_out(c);
    EvalResult eval;
    std::size_t n = c.scene.n;
    std::string name = "eval";
    std::uint64_t seed = 0;
    if (!pred_dir.empty() || !gt_dir.empty()) {
        if (pred_dir.empty() || gt_dir.empty()) throw ConfigError("--pred and --gt must be given together");
        const Dataset pred = read_dataset(pred_dir);
        const Dataset gt = read_dataset(gt_dir);
        if (pred.samples.size() != gt.samples.size()) throw ShapeError("prediction and ground-truth sets differ in size");
        n = std::max(pred.n, gt.n);
        ConfusionCounts counts(n);
        for (std::size_t i = 0; i < gt.samples.size(); ++i) counts.add(pred.samples[i].target, gt.samples[i].target);
        eval.iou = counts.iou();
        for (std::size_t k = 0; k < n; ++k) eval.f1.push_back(counts.f1(k));
    } else {
        if (checkpoint.empty()) throw ConfigError("eval needs --checkpoint or --pred/--gt");
        const Network net = load_checkpoint(checkpoint);
        n = net.config().num_classes;
        seed = net.config().seed;
        name = fs::path(checkpoint).stem().string();
        eval = evaluate(net, generate_splits(c).test);
    }
    RunRow row{name, seed, eval, 0.0, 0.0, 0.0, 0, 0.0};
    write_metrics_csv(out / "metrics.csv", {row}, n, false);
    std::printf("miou %.6f\n", eval.iou.mean);
    return 0;
}

int cmd_export_graph(const CommonOptions& o, const std::string& checkpoint, std::size_t sample, std::size_t tap) {
    ExperimentConfig c = load_config(o);
    const fs::path out = require_out(c);
    const Network net = load_checkpoint(checkpoint);
    const Dataset test = generate_splits(c).test;
    if (sample >= test.samples.size()) throw IndexError("sample index out of range");
    if (tap >= net.config().taps.size()) throw IndexError("tap index out of range");
    const auto& s = test.samples[sample];
    const Tensor f = forward(net, s.image).tapped[tap];
    const AoiMasks aoi = downsample_aoi(generate_aoi(one_hot(s.target, test.n), c.aoi_kernel), f.dim(0), f.dim(1));
    const AffinityGraph g = build_affinity_graph(moment_pool(f, aoi));
    const std::string stem = "graph_sample" + std::to_string(sample) + "_tap" + std::to_string(tap);
    save_graph_json(out / (stem + ".json"), g);
    export_graph_heatmaps(g, out, stem);
    std::printf("wrote %s\n", (out / (stem + ".json")).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"intra-class affinity distillation toolkit"};
    app.require_subcommand(1);

    CommonOptions o;
    std::string teacher_path, checkpoint, pred_dir, gt_dir;
    std::size_t sample = 0, tap = 0;

    auto* gen = app.add_subcommand("gen-data", "write train/val/test scene datasets");
    add_common(gen, o, false);
    auto* teach = app.add_subcommand("train-teacher", "pretrain the teacher with the segmentation loss");
    add_common(teach, o, false);
    auto* distill = app.add_subcommand("distill", "train students for the configured variants and seeds");
    add_common(distill, o, true);
    distill->add_option("--teacher", teacher_path, "teacher checkpoint (trained from scratch if omitted)")
        ->check(CLI::ExistingFile);
    auto* ablate = app.add_subcommand("ablate", "loss-term grid: m1, m2, m3, m123, att, m123+att, none");
    add_common(ablate, o, true);
    ablate->add_option("--teacher", teacher_path, "teacher checkpoint")->check(CLI::ExistingFile);
    auto* eval = app.add_subcommand("eval", "mIoU / F1 of a checkpoint or of a prediction dataset");
    add_common(eval, o, false);
    eval->add_option("--checkpoint", checkpoint, "network checkpoint")->check(CLI::ExistingFile);
    eval->add_option("--pred", pred_dir, "dataset directory holding predicted maps")->check(CLI::ExistingDirectory);
    eval->add_option("--gt", gt_dir, "dataset directory holding ground truth")->check(CLI::ExistingDirectory);
    auto* graph = app.add_subcommand("export-graph", "affinity graph JSON + heatmaps for one test sample");
    add_common(graph, o, false);
    graph->add_option("--checkpoint", checkpoint, "network checkpoint")->required()->check(CLI::ExistingFile);
    graph->add_option("--sample", sample, "test sample index");
    graph->add_option("--tap", tap, "tap index within the network");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(o);
        if (teach->parsed()) return cmd_train_teacher(o);
        if (distill->parsed()) return cmd_run(o, teacher_path, false);
        if (ablate->parsed()) return cmd_run(o, teacher_path, true);
        if (eval->parsed()) return cmd_eval(o, checkpoint, pred_dir, gt_dir);
        if (graph->parsed()) return cmd_export_graph(o, checkpoint, sample, tap);
    } catch (const ConfigError& e) {
        std::cerr << "intrakd: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "intrakd: " << o.config << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "intrakd: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
