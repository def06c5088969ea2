#include "intrakd/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "intrakd/errors.hpp"
#include "intrakd/graph_io.hpp"
#include "intrakd/image_io.hpp"
#include "intrakd/ops.hpp"
#include "intrakd/rng.hpp"

namespace intrakd {

bool Variant::uses_teacher() const {
    return kd || attention || (affinity && std::any_of(orders.begin(), orders.end(), [](bool b) { return b; }));
}

Variant parse_variant(const std::string& name, const MomentOrders& intra_orders, bool intra_attention) {
    Variant v;
    v.name = name;
    if (name == "none") return v;
    if (name == "kd") {
        v.kd = true;
        return v;
    }
    if (name == "intra-kd") {
        v.affinity = std::any_of(intra_orders.begin(), intra_orders.end(), [](bool b) { return b; });
        v.orders = intra_orders;
        v.attention = intra_attention;
        return v;
    }
    // m<orders>[+att] | att
    for (const auto& part : split(name, '+')) {
        if (part == "att") {
            v.attention = true;
        } else if (part.size() >= 2 && part[0] == 'm') {
            v.affinity = true;
            for (std::size_t i = 1; i < part.size(); ++i) {
                const int r = part[i] - '1';
                if (r < 0 || r >= static_cast<int>(kMomentOrders)) throw ConfigError("unknown variant '" + name + "'");
                v.orders[static_cast<std::size_t>(r)] = true;
            }
        } else {
            throw ConfigError("unknown variant '" + name + "'");
        }
    }
    if (!v.affinity && !v.attention) throw ConfigError("unknown variant '" + name + "'");
    return v;
}

std::vector<std::string> ablation_variants() { return {"none", "m1", "m2", "m3", "m123", "att", "m123+att"}; }

SceneSpec road_scene_spec(std::size_t n) {
    if (n < 2 || n > 8) throw ConfigError("scene.n must be in [2, 8]");
    SceneSpec spec = default_scene_spec();
    std::vector<ElementSpec> pool = spec.elements;

    ElementSpec center = pool[1];
    center.x_bottom = {0.46, 0.54};
    center.x_top = {0.48, 0.52};
    center.color = {0.80, 0.72, 0.35};
    pool.push_back(center);

    ElementSpec far_left = pool[0];
    far_left.x_bottom = {0.00, 0.05};
    far_left.x_top = {0.28, 0.34};
    far_left.color = {0.70, 0.70, 0.72};
    pool.push_back(far_left);

    ElementSpec far_right = far_left;
    far_right.x_bottom = {0.95, 1.00};
    far_right.x_top = {0.66, 0.72};
    pool.push_back(far_right);

    ElementSpec stop = pool[2];
    stop.band_rows = {0.30, 0.45};
    stop.dash_on = 40.0;
    stop.dash_off = 0.0;
    stop.color = {0.95, 0.95, 0.95};
    pool.push_back(stop);

    spec.n = n;
    spec.elements.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n - 1));
    return spec;
}

namespace {

MomentOrders parse_orders(const std::vector<std::uint64_t>& list) {
    MomentOrders o{false, false, false};
    for (auto r : list) {
        if (r < 1 || r > kMomentOrders) throw ConfigError("moment orders must be a subset of 1,2,3");
        o[r - 1] = true;
    }
    return o;
}

std::string format_orders(const MomentOrders& o) {
    std::string s;
    for (std::size_t r = 0; r < kMomentOrders; ++r) {
        if (!o[r]) continue;
        if (!s.empty()) s += ',';
        s += std::to_string(r + 1);
    }
    return s;
}

std::vector<std::size_t> to_sizes(const std::vector<std::uint64_t>& v) { return {v.begin(), v.end()}; }

template <typename T>
std::string join(const std::vector<T>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ExperimentConfig experiment_config_from(const KeyValueConfig& kv) {
    ExperimentConfig c;
    const std::size_t n = kv.get_u64("scene.n", 4);
    c.scene = road_scene_spec(n);
    c.scene.h = kv.get_u64("scene.h", c.scene.h);
    c.scene.w = kv.get_u64("scene.w", c.scene.w);
    c.scene.noise = kv.get_double("scene.noise", c.scene.noise);
    c.scene.background.lo = kv.get_double("scene.background_lo", c.scene.background.lo);
    c.scene.background.hi = kv.get_double("scene.background_hi", c.scene.background.hi);
    validate_scene_spec(c.scene);

    c.train_count = kv.get_u64("data.train", c.train_count);
    c.val_count = kv.get_u64("data.val", c.val_count);
    c.test_count = kv.get_u64("data.test", c.test_count);
    c.data_seed = kv.get_u64("data.seed", c.data_seed);

    c.teacher = default_teacher_config(n, kv.get_u64("teacher.seed", 1));
    if (kv.has("teacher.layers")) c.teacher.layers = parse_layers(kv.get_string("teacher.layers", ""));
    if (kv.has("teacher.taps")) c.teacher.taps = to_sizes(kv.get_u64_list("teacher.taps", {}));
    c.student = default_student_config(n, 0);
    if (kv.has("student.layers")) c.student.layers = parse_layers(kv.get_string("student.layers", ""));
    if (kv.has("student.taps")) c.student.taps = to_sizes(kv.get_u64_list("student.taps", {}));
    validate_config(c.teacher, c.scene.h, c.scene.w);
    validate_config(c.student, c.scene.h, c.scene.w);

    if (kv.has("distill.pairs")) {
        c.pairing.pairs.clear();
        for (const auto& item : split(kv.get_string("distill.pairs", ""), ',')) {
            const auto parts = split(item, ':');
            if (parts.size() != 2) throw ParseError("distill.pairs entries must be student_tap:teacher_tap");
            c.pairing.pairs.emplace_back(std::stoul(parts[0]), std::stoul(parts[1]));
        }
    }
    for (const auto& [s, t] : c.pairing.pairs) {
        if (s >= c.student.taps.size() || t >= c.teacher.taps.size()) {
            throw ConfigError("distill.pairs refers to a tap that does not exist");
        }
    }
    c.aoi_kernel = kv.get_u64("aoi.kernel", c.aoi_kernel);
    if (c.aoi_kernel == 0 || c.aoi_kernel % 2 == 0) throw ConfigError("aoi.kernel must be odd and positive");

    c.alpha1 = kv.get_double("loss.alpha1", c.alpha1);
    c.alpha2 = kv.get_double("loss.alpha2", c.alpha2);
    if (c.alpha1 < 0.0 || c.alpha2 < 0.0) throw ConfigError("loss weights must be non-negative");
    if (kv.has("loss.moments")) c.orders = parse_orders(kv.get_u64_list("loss.moments", {}));
    c.attention = kv.get_bool("loss.attention", c.attention);
    c.kd_temperature = kv.get_double("loss.kd_temp", c.kd_temperature);
    if (!(c.kd_temperature > 0.0)) throw ConfigError("loss.kd_temp must be positive");
    c.kd_weight = kv.get_double("loss.kd_weight", c.kd_weight);
    c.background_weight = kv.get_double("loss.bg_weight", c.background_weight);
    if (!(c.background_weight > 0.0)) throw ConfigError("loss.bg_weight must be positive");

    c.lr = kv.get_double("train.lr", c.lr);
    c.clip_norm = kv.get_double("train.clip_norm", c.clip_norm);
    if (c.clip_norm < 0.0) throw ConfigError("train.clip_norm must be non-negative");
    c.teacher_steps = kv.get_u64("teacher.steps", c.teacher_steps);
    c.student_steps = kv.get_u64("student.steps", c.student_steps);

    c.seeds = kv.get_u64_list("experiment.seeds", c.seeds);
    if (c.seeds.empty()) throw ConfigError("experiment.seeds must list at least one seed");
    c.variants = kv.get_string_list("experiment.variants", c.variants);
    for (const auto& v : c.variants) parse_variant(v);
    c.teacher_min_miou = kv.get_double("experiment.teacher_min_miou", c.teacher_min_miou);

    c.output_dir = kv.get_string("output.dir", c.output_dir.string());
    c.write_artifacts = kv.get_bool("output.artifacts", c.write_artifacts);
    c.record_wall_time = kv.get_bool("output.wall_time", c.record_wall_time);
    c.graph_samples = kv.get_u64("output.graph_samples", c.graph_samples);
    c.log_every = kv.get_u64("output.log_every", c.log_every);
    return c;
}

KeyValueConfig to_key_values(const ExperimentConfig& c) {
    KeyValueConfig kv;
    kv.set("scene.n", std::to_string(c.scene.n));
    kv.set("scene.h", std::to_string(c.scene.h));
    kv.set("scene.w", std::to_string(c.scene.w));
    kv.set("scene.noise", fmt_double(c.scene.noise));
    kv.set("scene.background_lo", fmt_double(c.scene.background.lo));
    kv.set("scene.background_hi", fmt_double(c.scene.background.hi));
    kv.set("data.train", std::to_string(c.train_count));
    kv.set("data.val", std::to_string(c.val_count));
    kv.set("data.test", std::to_string(c.test_count));
    kv.set("data.seed", std::to_string(c.data_seed));
    kv.set("teacher.layers", format_layers(c.teacher.layers));
    kv.set("teacher.taps", join(c.teacher.taps));
    kv.set("teacher.seed", std::to_string(c.teacher.seed));
    kv.set("teacher.steps", std::to_string(c.teacher_steps));
    kv.set("student.layers", format_layers(c.student.layers));
    kv.set("student.taps", join(c.student.taps));
    kv.set("student.steps", std::to_string(c.student_steps));
    std::string pairs;
    for (const auto& [s, t] : c.pairing.pairs) pairs += (pairs.empty() ? "" : ",") + std::to_string(s) + ":" + std::to_string(t);
    kv.set("distill.pairs", pairs);
    kv.set("aoi.kernel", std::to_string(c.aoi_kernel));
    kv.set("loss.alpha1", fmt_double(c.alpha1));
    kv.set("loss.alpha2", fmt_double(c.alpha2));
    kv.set("loss.moments", format_orders(c.orders));
    kv.set("loss.attention", c.attention ? "true" : "false");
    kv.set("loss.kd_temp", fmt_double(c.kd_temperature));
    kv.set("loss.kd_weight", fmt_double(c.kd_weight));
    kv.set("loss.bg_weight", fmt_double(c.background_weight));
    kv.set("train.lr", fmt_double(c.lr));
    kv.set("train.clip_norm", fmt_double(c.clip_norm));
    kv.set("experiment.seeds", join(c.seeds));
    kv.set("experiment.variants", join(c.variants));
    kv.set("experiment.teacher_min_miou", fmt_double(c.teacher_min_miou));
    kv.set("output.dir", c.output_dir.string());
    kv.set("output.artifacts", c.write_artifacts ? "true" : "false");
    kv.set("output.wall_time", c.record_wall_time ? "true" : "false");
    kv.set("output.graph_samples", std::to_string(c.graph_samples));
    kv.set("output.log_every", std::to_string(c.log_every));
    return kv;
}

Splits generate_splits(const ExperimentConfig& config) {
    const std::size_t n = config.scene.n;
    return Splits{Dataset{n, generate_scenes(config.scene, config.train_count, mix_seed(config.data_seed, 0))},
                  Dataset{n, generate_scenes(config.scene, config.val_count, mix_seed(config.data_seed, 1))},
                  Dataset{n, generate_scenes(config.scene, config.test_count, mix_seed(config.data_seed, 2))}};
}

EvalResult evaluate(const Network& net, const Dataset& data) {
    const std::size_t n = net.config().num_classes;
    ConfusionCounts counts(n);
    for (const auto& s : data.samples) {
        const Tensor logits = forward(net, s.image).logits;
        const ClassMap pred = argmax_channels(logits);
        counts.add(pred, downsample_target(s.target, pred.height(), pred.width()));
    }
    EvalResult r{counts.iou(), {}};
    for (std::size_t k = 0; k < n; ++k) r.f1.push_back(counts.f1(k));
    return r;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct PreparedSample {
    ClassMap target_out;
    AoiMasks aoi;
};

std::vector<PreparedSample> prepare(const NetworkConfig& net, const Dataset& data, std::size_t kernel) {
    std::vector<PreparedSample> out;
    out.reserve(data.samples.size());
    for (const auto& s : data.samples) {
        const auto [oh, ow] = output_extent(net, s.target.height(), s.target.width());
        out.push_back({downsample_target(s.target, oh, ow), generate_aoi(one_hot(s.target, data.n), kernel)});
    }
    return out;
}

// Visits sample indices in a fresh seeded permutation every epoch.
class SampleOrder {
public:
    SampleOrder(std::size_t count, std::uint64_t seed) : count_(count), seed_(seed) {}

    std::size_t at(std::size_t step) {
        const std::size_t epoch = step / count_;
        if (epoch != epoch_ || perm_.empty()) {
            epoch_ = epoch;
            perm_.resize(count_);
            std::iota(perm_.begin(), perm_.end(), std::size_t{0});
            Rng rng(mix_seed(seed_, epoch));
            for (std::size_t i = count_; i > 1; --i) {
                const auto j = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i - 1)));
                std::swap(perm_[i - 1], perm_[j]);
            }
        }
        return perm_[step % count_];
    }

private:
    std::size_t count_;
    std::uint64_t seed_;
    std::size_t epoch_ = 0;
    std::vector<std::size_t> perm_;
};

constexpr std::size_t kLossWindow = 100;

void train_loop(Network& net, const Dataset& train, const std::vector<PreparedSample>& prepared,
                const std::vector<TeacherTargets>* targets, const TapPairing& pairing, const LossConfig& loss,
                double lr, double clip_norm, std::size_t steps, std::uint64_t order_seed, std::size_t log_every, TrainLog* log,
                const ProgressFn& progress, const std::string& tag) {
    if (train.samples.empty()) throw ConfigError("training split is empty");
    const auto start = Clock::now();
    SampleOrder order(train.samples.size(), order_seed);
    TrainLog local;
    std::size_t window = 0;
    for (std::size_t step = 0; step < steps; ++step) {
        const std::size_t idx = order.at(step);
        const TeacherTargets* t = targets ? &(*targets)[idx] : nullptr;
        const LossReport r = train_step(net, train.samples[idx].image, prepared[idx].target_out, prepared[idx].aoi, t,
                                        pairing, loss, lr, clip_norm);
        if (steps - step <= kLossWindow) {
            local.seg += r.seg;
            local.affinity += r.affinity;
            local.attention += r.attention;
            ++window;
        }
        if (log_every && (step % log_every == 0 || step + 1 == steps)) {
            local.entries.push_back({step, r});
            if (progress) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "%s step %zu/%zu seg=%.4f aff=%.4f att=%.4f total=%.4f", tag.c_str(),
                              step + 1, steps, r.seg, r.affinity, r.attention, r.total);
                progress(buf);
            }
        }
    }
    if (window == 0) {
        // No training: report the losses of the untouched network on the first sample.
        const TeacherTargets* t = targets ? &(*targets)[0] : nullptr;
        const auto r = loss_and_gradients(net, train.samples[0].image, prepared[0].target_out, prepared[0].aoi, t,
                                          pairing, loss)
                           .report;
        local.seg = r.seg;
        local.affinity = r.affinity;
        local.attention = r.attention;
    } else {
        local.seg /= static_cast<double>(window);
        local.affinity /= static_cast<double>(window);
        local.attention /= static_cast<double>(window);
    }
    local.wall_ms = elapsed_ms(start);
    if (log) *log = std::move(local);
}

LossConfig base_loss(const ExperimentConfig& config, std::size_t n) {
    LossConfig loss;
    loss.alpha1 = config.alpha1;
    loss.alpha2 = config.alpha2;
    loss.kd_temperature = config.kd_temperature;
    loss.kd_weight = config.kd_weight;
    loss.class_weights = background_weighted(n, config.background_weight);
    return loss;
}

}  // namespace

Network train_teacher(const ExperimentConfig& config, const Dataset& train, TrainLog* log, const ProgressFn& progress) {
    Network teacher = build_network(config.teacher);
    LossConfig loss = base_loss(config, config.teacher.num_classes);
    loss.affinity = false;
    loss.attention = false;
    const auto prepared = prepare(config.teacher, train, config.aoi_kernel);
    train_loop(teacher, train, prepared, nullptr, TapPairing{}, loss, config.lr, config.clip_norm, config.teacher_steps,
               mix_seed(config.teacher.seed, 0x7e4c), config.log_every, log, progress, "teacher");
    return teacher;
}

std::vector<TeacherTargets> teacher_targets_for(const ExperimentConfig& config, const Network& teacher,
                                                const Dataset& train) {
    std::vector<TeacherTargets> out;
    out.reserve(train.samples.size());
    for (const auto& s : train.samples) {
        const AoiMasks aoi = generate_aoi(one_hot(s.target, train.n), config.aoi_kernel);
        out.push_back(make_teacher_targets(teacher, s.image, aoi, config.pairing));
    }
    return out;
}

Network train_student(const ExperimentConfig& config, const Dataset& train, const Network* teacher,
                      const std::vector<TeacherTargets>& targets, const Variant& variant, std::uint64_t seed,
                      TrainLog* log, const ProgressFn& progress) {
    NetworkConfig net_config = config.student;
    net_config.seed = seed;
    Network student = build_network(net_config);

    LossConfig loss = base_loss(config, net_config.num_classes);
    loss.affinity = variant.affinity;
    loss.orders = variant.orders;
    loss.attention = variant.attention;
    loss.kd = variant.kd;
    const bool needs_teacher = loss.uses_teacher();
    if (needs_teacher && (teacher == nullptr || targets.size() != train.samples.size())) {
        throw ContractError("variant '" + variant.name + "' needs teacher outputs for every training sample");
    }
    const auto prepared = prepare(net_config, train, config.aoi_kernel);
    train_loop(student, train, prepared, needs_teacher ? &targets : nullptr, config.pairing, loss, config.lr,
               config.clip_norm, config.student_steps, mix_seed(seed, 0x5eed), config.log_every, log, progress,
               variant.name + "/s" + std::to_string(seed));
    return student;
}

double median(std::vector<double> values) {
    if (values.empty()) throw ContractError("median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size() / 2;
    return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

Aggregate MetricsReport::aggregate(const std::string& variant) const {
    std::vector<double> v;
    for (const auto& r : rows)
        if (r.variant == variant) v.push_back(r.eval.iou.mean);
    Aggregate a{variant, 0.0, 0.0, 0.0, v.size()};
    if (v.empty()) return a;
    a.median = median(v);
    a.min = *std::min_element(v.begin(), v.end());
    a.max = *std::max_element(v.begin(), v.end());
    return a;
}

std::string csv_header(std::size_t n) {
    std::string h = "variant,seed,miou";
    for (std::size_t k = 0; k < n; ++k) h += ",iou_" + std::to_string(k) + ",f1_" + std::to_string(k);
    h += ",loss_seg,loss_m,loss_a,steps,wall_ms";
    return h;
}

std::string csv_row(const RunRow& row, std::size_t n, bool record_wall_time) {
    std::string s = row.variant + "," + std::to_string(row.seed) + "," + fmt_double(row.eval.iou.mean);
    for (std::size_t k = 0; k < n; ++k) {
        s += "," + fmt_double(row.eval.iou.per_class[k]) + "," + fmt_double(row.eval.f1[k].f1);
    }
    s += "," + fmt_double(row.loss_seg) + "," + fmt_double(row.loss_m) + "," + fmt_double(row.loss_a) + "," +
         std::to_string(row.steps) + "," + (record_wall_time ? fmt_double(std::round(row.wall_ms)) : "0");
    return s;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<RunRow>& rows, std::size_t n,
                       bool record_wall_time) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "# f1_k is 1 when class k is absent from both predictions and ground truth; "
          "miou averages classes present in either\n";
    os << csv_header(n) << '\n';
    for (const auto& r : rows) os << csv_row(r, n, record_wall_time) << '\n';
    if (!os) throw IoError("write failed: " + path.string());
}

namespace {

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_loss_curve(const std::filesystem::path& path, const TrainLog& log) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "step,seg,affinity,attention,kd,alpha1,alpha2,total\n";
    for (const auto& e : log.entries) {
        const auto& r = e.report;
        os << e.step << ',' << fmt_double(r.seg) << ',' << fmt_double(r.affinity) << ',' << fmt_double(r.attention)
           << ',' << fmt_double(r.kd) << ',' << fmt_double(r.alpha1) << ',' << fmt_double(r.alpha2) << ','
           << fmt_double(r.total) << '\n';
    }
}

// Graph JSON and prediction images for the first few test samples.
void export_samples(const ExperimentConfig& config, const Network& net, const Dataset& test, bool is_teacher,
                    const std::string& prefix) {
    const auto graphs = config.output_dir / "graphs";
    const auto preds = config.output_dir / "predictions";
    const std::size_t count = std::min(config.graph_samples, test.samples.size());
    for (std::size_t i = 0; i < count; ++i) {
        const auto& s = test.samples[i];
        const ForwardResult fr = forward(net, s.image);
        const AoiMasks aoi = generate_aoi(one_hot(s.target, test.n), config.aoi_kernel);
        for (std::size_t p = 0; p < config.pairing.pairs.size(); ++p) {
            const auto tap = is_teacher ? config.pairing.pairs[p].second : config.pairing.pairs[p].first;
            const Tensor& f = fr.tapped[tap];
            const auto g = build_affinity_graph(moment_pool(f, downsample_aoi(aoi, f.dim(0), f.dim(1))));
            save_graph_json(graphs / (prefix + "_sample" + std::to_string(i) + "_pair" + std::to_string(p) + ".json"), g);
        }
        write_class_map_ppm(preds / (prefix + "_sample" + std::to_string(i) + ".ppm"), argmax_channels(fr.logits));
    }
}

RunRow make_row(const std::string& variant, std::uint64_t seed, EvalResult eval, const TrainLog& log,
                std::size_t steps) {
    return RunRow{variant, seed, std::move(eval), log.seg, log.affinity, log.attention, steps, log.wall_ms};
}

}  // namespace

MetricsReport run_experiment(const ExperimentConfig& config, const Network* teacher_in, const ProgressFn& progress) {
    const auto start = Clock::now();
    MetricsReport report;
    report.config_echo = to_key_values(config);
    const std::size_t n = config.scene.n;
    const bool artifacts = config.write_artifacts && !config.output_dir.empty();
    if (artifacts) {
        ensure_dir(config.output_dir);
        ensure_dir(config.output_dir / "graphs");
        ensure_dir(config.output_dir / "predictions");
        ensure_dir(config.output_dir / "losses");
        ensure_dir(config.output_dir / "checkpoints");
        std::ofstream(config.output_dir / "config.txt") << report.config_echo.to_text();
    }

    const Splits splits = generate_splits(config);
    if (progress) progress("generated " + std::to_string(splits.train.samples.size()) + " train / " +
                           std::to_string(splits.test.samples.size()) + " test scenes");

    std::vector<Variant> variants;
    for (const auto& name : config.variants) variants.push_back(parse_variant(name, config.orders, config.attention));
    const bool needs_teacher = std::any_of(variants.begin(), variants.end(), [](const Variant& v) { return v.uses_teacher(); });

    std::optional<Network> trained_teacher;
    const Network* teacher = teacher_in;
    if (teacher == nullptr && needs_teacher) {
        TrainLog tlog;
        trained_teacher = train_teacher(config, splits.train, &tlog, progress);
        teacher = &*trained_teacher;
        if (artifacts) write_loss_curve(config.output_dir / "losses" / "teacher.csv", tlog);
    }
    std::vector<TeacherTargets> targets;
    if (teacher != nullptr) {
        report.teacher_test = evaluate(*teacher, splits.test);
        if (!splits.val.samples.empty()) report.teacher_val = evaluate(*teacher, splits.val);
        if (progress) progress("teacher test mIoU " + fmt_double(report.teacher_test.iou.mean));
        if (report.teacher_test.iou.mean < config.teacher_min_miou) {
            report.warnings.push_back("teacher test mIoU " + fmt_double(report.teacher_test.iou.mean) +
                                      " is below the configured floor " + fmt_double(config.teacher_min_miou));
        }
        if (needs_teacher) targets = teacher_targets_for(config, *teacher, splits.train);
        if (artifacts) {
            save_checkpoint(config.output_dir / "checkpoints" / "teacher.ckpt", *teacher);
            export_samples(config, *teacher, splits.test, true, "teacher");
        }
    }
    if (artifacts) {
        for (std::size_t i = 0; i < std::min(config.graph_samples, splits.test.samples.size()); ++i) {
            const auto& t = splits.test.samples[i].target;
            const auto [oh, ow] = output_extent(config.student, t.height(), t.width());
            write_class_map_ppm(config.output_dir / "predictions" / ("gt_sample" + std::to_string(i) + ".ppm"),
                                downsample_target(t, oh, ow));
        }
    }

    for (const auto& variant : variants) {
        for (auto seed : config.seeds) {
            TrainLog log;
            const Network student =
                train_student(config, splits.train, teacher, targets, variant, seed, &log, progress);
            EvalResult eval = evaluate(student, splits.test);
            if (progress) progress(variant.name + "/s" + std::to_string(seed) + " test mIoU " + fmt_double(eval.iou.mean));
            report.rows.push_back(make_row(variant.name, seed, std::move(eval), log, config.student_steps));
            if (artifacts) {
                const std::string tag = variant.name + "_s" + std::to_string(seed);
                write_loss_curve(config.output_dir / "losses" / (tag + ".csv"), log);
                save_checkpoint(config.output_dir / "checkpoints" / (tag + ".ckpt"), student);
                export_samples(config, student, splits.test, false, tag);
            }
        }
    }

    report.wall_ms = elapsed_ms(start);
    if (artifacts) {
        write_metrics_csv(config.output_dir / "metrics.csv", report.rows, n, config.record_wall_time);
        std::ofstream summary(config.output_dir / "summary.csv");
        summary << "variant,seeds,median_miou,min_miou,max_miou\n";
        for (const auto& name : config.variants) {
            const auto a = report.aggregate(name);
            summary << name << ',' << a.count << ',' << fmt_double(a.median) << ',' << fmt_double(a.min) << ','
                    << fmt_double(a.max) << '\n';
        }
        if (!report.warnings.empty()) {
            std::ofstream warn(config.output_dir / "warnings.txt");
            for (const auto& w : report.warnings) warn << w << '\n';
        }
    }
    return report;
}

}  // namespace intrakd
