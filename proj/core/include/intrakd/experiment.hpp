#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "intrakd/config.hpp"
#include "intrakd/distill.hpp"
#include "intrakd/metrics.hpp"
#include "intrakd/model.hpp"
#include "intrakd/scene.hpp"

namespace intrakd {

/// A student training recipe.
///
/// Names: "none" (segmentation loss only), "intra-kd" (configured moment
/// orders + attention), "kd" (probability-map KD), or an explicit ablation
/// such as "m1", "m23", "m123+att", "att".
struct Variant {
    std::string name;
    bool affinity = false;
    MomentOrders orders{false, false, false};
    bool attention = false;
    bool kd = false;

    bool uses_teacher() const;
};

Variant parse_variant(const std::string& name, const MomentOrders& intra_orders = kAllMoments,
                      bool intra_attention = true);

/// The loss-term grid: no distillation, each moment order alone, all
/// moments, attention alone, all moments + attention.
std::vector<std::string> ablation_variants();

struct ExperimentConfig {
    SceneSpec scene = default_scene_spec();
    std::size_t train_count = 200;
    std::size_t val_count = 20;
    std::size_t test_count = 50;
    std::uint64_t data_seed = 2020;

    NetworkConfig teacher = default_teacher_config();
    NetworkConfig student = default_student_config();
    TapPairing pairing{{{0, 0}, {1, 1}}};
    std::size_t aoi_kernel = kDefaultAoiKernel;

    double alpha1 = kDefaultAlpha1;
    double alpha2 = kDefaultAlpha2;
    MomentOrders orders = kAllMoments;
    bool attention = true;
    double kd_temperature = 1.0;
    double kd_weight = 1.0;
    double background_weight = 0.4;

    double lr = 0.01;
    /// Global gradient-norm ceiling per SGD step (0 disables).
    double clip_norm = 10.0;
    std::size_t teacher_steps = 3000;
    std::size_t student_steps = 1500;

    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<std::string> variants{"none", "intra-kd"};
    double teacher_min_miou = 0.6;

    std::filesystem::path output_dir;
    bool write_artifacts = true;
    /// wall_ms is left at 0 in the CSV unless set, so reruns are byte-identical.
    bool record_wall_time = false;
    std::size_t graph_samples = 3;
    std::size_t log_every = 50;
};

ExperimentConfig experiment_config_from(const KeyValueConfig& kv);
/// Inverse of experiment_config_from for every key it reads.
KeyValueConfig to_key_values(const ExperimentConfig& config);

/// Road scene spec with n classes (2..8); n = 4 is default_scene_spec().
SceneSpec road_scene_spec(std::size_t n);

struct Splits {
    Dataset train, val, test;
};

Splits generate_splits(const ExperimentConfig& config);

struct EvalResult {
    IouResult iou;
    std::vector<F1Result> f1;
};

/// Evaluates at the network output resolution against majority-downsampled
/// targets, accumulating pixel counts over the whole dataset.
EvalResult evaluate(const Network& net, const Dataset& data);

struct LossLogEntry {
    std::size_t step = 0;
    LossReport report;
};

struct TrainLog {
    std::vector<LossLogEntry> entries;
    /// Mean of each component over the final window of steps.
    double seg = 0.0, affinity = 0.0, attention = 0.0;
    double wall_ms = 0.0;
};

using ProgressFn = std::function<void(const std::string&)>;

Network train_teacher(const ExperimentConfig& config, const Dataset& train, TrainLog* log = nullptr,
                      const ProgressFn& progress = {});

/// Per-sample teacher targets for the training split.
std::vector<TeacherTargets> teacher_targets_for(const ExperimentConfig& config, const Network& teacher,
                                                const Dataset& train);

Network train_student(const ExperimentConfig& config, const Dataset& train, const Network* teacher,
                      const std::vector<TeacherTargets>& targets, const Variant& variant, std::uint64_t seed,
                      TrainLog* log = nullptr, const ProgressFn& progress = {});

struct RunRow {
    std::string variant;
    std::uint64_t seed = 0;
    EvalResult eval;
    double loss_seg = 0.0, loss_m = 0.0, loss_a = 0.0;
    std::size_t steps = 0;
    double wall_ms = 0.0;
};

struct Aggregate {
    std::string variant;
    double median = 0.0, min = 0.0, max = 0.0;
    std::size_t count = 0;
};

struct MetricsReport {
    KeyValueConfig config_echo;
    EvalResult teacher_test;
    EvalResult teacher_val;
    std::vector<RunRow> rows;
    std::vector<std::string> warnings;
    double wall_ms = 0.0;

    /// Median/min/max of mIoU over seeds for one variant.
    Aggregate aggregate(const std::string& variant) const;
};

/// Full pipeline: data, teacher pretraining (unless `teacher` is given),
/// one student per (variant, seed), evaluation and artifact export.
MetricsReport run_experiment(const ExperimentConfig& config, const Network* teacher = nullptr,
                             const ProgressFn& progress = {});

std::string csv_header(std::size_t n);
std::string csv_row(const RunRow& row, std::size_t n, bool record_wall_time);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<RunRow>& rows, std::size_t n,
                       bool record_wall_time);

/// Median of a non-empty list (mean of the two middle values for even sizes).
double median(std::vector<double> values);

}  // namespace intrakd
