#include "intrakd/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "intrakd/config.hpp"
#include "intrakd/errors.hpp"
#include "intrakd/image_io.hpp"
#include "intrakd/ops.hpp"
#include "intrakd/rng.hpp"

namespace intrakd {

NetworkConfig default_teacher_config(std::size_t num_classes, std::uint64_t seed) {
    return NetworkConfig{3,
                         num_classes,
                         {{16, 3, 1}, {16, 3, 2}, {32, 3, 1}, {32, 3, 2}, {64, 3, 1}, {64, 3, 1}, {64, 3, 1}, {64, 3, 1}},
                         {3, 7},
                         seed};
}

NetworkConfig default_student_config(std::size_t num_classes, std::uint64_t seed) {
    return NetworkConfig{3, num_classes, {{8, 3, 2}, {16, 3, 2}, {16, 3, 1}}, {1, 2}, seed};
}

namespace {

std::size_t conv_out(std::size_t in, const LayerSpec& l) {
    const std::size_t pad = l.kernel_size / 2;
    if (l.kernel_size > in + 2 * pad) return 0;
    return (in + 2 * pad - l.kernel_size) / l.stride + 1;
}

}  // namespace

std::pair<std::size_t, std::size_t> feature_extent(const NetworkConfig& config, std::size_t h, std::size_t w,
                                                   std::size_t upto) {
    for (std::size_t i = 0; i < upto && i < config.layers.size(); ++i) {
        h = conv_out(h, config.layers[i]);
        w = conv_out(w, config.layers[i]);
    }
    return {h, w};
}

std::pair<std::size_t, std::size_t> output_extent(const NetworkConfig& config, std::size_t h, std::size_t w) {
    return feature_extent(config, h, w, config.layers.size());
}

void validate_config(const NetworkConfig& config, std::size_t h, std::size_t w) {
    if (config.layers.empty()) throw ConfigError("network needs at least one layer");
    if (config.num_classes < 2) throw ConfigError("network needs at least two classes");
    if (config.in_channels == 0) throw ConfigError("network needs at least one input channel");
    for (const auto& l : config.layers) {
        if (l.out_channels == 0 || l.stride == 0 || l.kernel_size == 0 || l.kernel_size % 2 == 0) {
            throw ConfigError("invalid layer spec " + format_layers({l}) + " (odd kernel, positive channels/stride)");
        }
    }
    for (auto t : config.taps) {
        if (t >= config.layers.size()) {
            throw ConfigError("tap index " + std::to_string(t) + " out of range for " +
                              std::to_string(config.layers.size()) + " layers");
        }
    }
    if (h > 0 && w > 0) {
        for (std::size_t i = 1; i <= config.layers.size(); ++i) {
            const auto [fh, fw] = feature_extent(config, h, w, i);
            if (fh == 0 || fw == 0) {
                throw ConfigError("spatial extent collapses to zero after layer " + std::to_string(i));
            }
        }
    }
}

Network::Network(NetworkConfig config, std::vector<ConvParams> layers, ConvParams head)
    : config_(std::move(config)), layers_(std::move(layers)), head_(std::move(head)) {}

std::vector<const Tensor*> Network::parameters() const {
    std::vector<const Tensor*> out;
    for (const auto& l : layers_) {
        out.push_back(&l.kernel);
        out.push_back(&l.bias);
    }
    out.push_back(&head_.kernel);
    out.push_back(&head_.bias);
    return out;
}

std::vector<Tensor*> Network::parameters() {
    std::vector<Tensor*> out;
    for (auto& l : layers_) {
        out.push_back(&l.kernel);
        out.push_back(&l.bias);
    }
    out.push_back(&head_.kernel);
    out.push_back(&head_.bias);
    return out;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
}

bool operator==(const Network& a, const Network& b) {
    if (!(a.config_ == b.config_)) return false;
    const auto pa = a.parameters();
    const auto pb = b.parameters();
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i)
        if (!(*pa[i] == *pb[i])) return false;
    return true;
}

Network build_network(const NetworkConfig& config) {
    validate_config(config, 0, 0);
    Rng rng(config.seed);
    auto make = [&](std::size_t k, std::size_t cin, std::size_t cout, std::size_t stride) {
        ConvParams p{Tensor({k, k, cin, cout}), Tensor({cout}), stride, k / 2};
        const double bound = std::sqrt(6.0 / static_cast<double>(k * k * cin + k * k * cout));
        for (auto& v : p.kernel.data()) v = rng.uniform(-bound, bound);
        return p;
    };
    std::vector<ConvParams> layers;
    std::size_t cin = config.in_channels;
    for (const auto& l : config.layers) {
        layers.push_back(make(l.kernel_size, cin, l.out_channels, l.stride));
        cin = l.out_channels;
    }
    ConvParams head = make(1, cin, config.num_classes, 1);
    return Network(config, std::move(layers), std::move(head));
}

ForwardTrace forward_trace(const Network& net, const Tensor& image) {
    if (image.rank() != 3 || image.dim(2) != net.config().in_channels) {
        throw ShapeError("forward: image " + image.shape_string() + " does not match network input channels");
    }
    ForwardTrace trace;
    const Tensor* x = &image;
    for (const auto& l : net.layers()) {
        trace.inputs.push_back(*x);
        trace.activations.push_back(relu(conv2d(*x, l.kernel, l.bias, l.stride, l.pad)));
        x = &trace.activations.back();
    }
    const auto& h = net.head();
    trace.logits = conv2d(*x, h.kernel, h.bias, h.stride, h.pad);
    return trace;
}

ForwardResult forward(const Network& net, const Tensor& image) {
    ForwardTrace trace = forward_trace(net, image);
    ForwardResult out{std::move(trace.logits), {}};
    for (auto t : net.config().taps) out.tapped.push_back(trace.activations[t]);
    return out;
}

ParameterGrads backward(const Network& net, const ForwardTrace& trace, const Tensor& logits_grad,
                        const std::vector<Tensor>& tap_grads) {
    const auto& taps = net.config().taps;
    if (tap_grads.size() != taps.size() && !tap_grads.empty()) {
        throw ContractError("backward: need one tap gradient per tap (or none)");
    }
    const std::size_t n_layers = net.layers().size();
    ParameterGrads grads(2 * n_layers + 2);

    const auto& h = net.head();
    auto hg = conv2d_backward(trace.activations.back(), h.kernel, logits_grad, h.stride, h.pad);
    grads[2 * n_layers] = std::move(hg.kernel);
    grads[2 * n_layers + 1] = std::move(hg.bias);
    Tensor g = std::move(hg.input);

    for (std::size_t i = n_layers; i-- > 0;) {
        for (std::size_t t = 0; t < tap_grads.size(); ++t) {
            if (taps[t] == i && !tap_grads[t].empty()) g += tap_grads[t];
        }
        const Tensor pre_grad = relu_backward(trace.activations[i], g);
        const auto& l = net.layers()[i];
        auto lg = conv2d_backward(trace.inputs[i], l.kernel, pre_grad, l.stride, l.pad, i > 0);
        grads[2 * i] = std::move(lg.kernel);
        grads[2 * i + 1] = std::move(lg.bias);
        g = std::move(lg.input);
    }
    return grads;
}

TeacherTargets make_teacher_targets(const Network& teacher, const Tensor& image, const AoiMasks& aoi,
                                    const TapPairing& pairing) {
    const ForwardResult fr = forward(teacher, image);
    TeacherTargets out;
    out.logits = fr.logits;
    for (const auto& [s_tap, t_tap] : pairing.pairs) {
        if (t_tap >= fr.tapped.size()) throw ContractError("tap pairing refers to a missing teacher tap");
        const Tensor& f = fr.tapped[t_tap];
        const AoiMasks masks = downsample_aoi(aoi, f.dim(0), f.dim(1));
        out.graphs.push_back(build_affinity_graph(moment_pool(f, masks)));
        out.attention.push_back(attention_map(f));
    }
    return out;
}

bool LossConfig::uses_teacher() const {
    const bool any_order = std::any_of(orders.begin(), orders.end(), [](bool b) { return b; });
    return (affinity && any_order && alpha1 > 0.0) || (attention && alpha2 > 0.0) || kd;
}

std::vector<double> background_weighted(std::size_t n, double background_weight) {
    std::vector<double> w(n, 1.0);
    if (n > 0) w[0] = background_weight;
    return w;
}

StepResult loss_and_gradients(const Network& net, const Tensor& image, const ClassMap& target, const AoiMasks& aoi,
                              const TeacherTargets* teacher, const TapPairing& pairing, const LossConfig& loss) {
    const bool distill = loss.uses_teacher();
    if (distill && teacher == nullptr) throw ContractError("train_step: distillation enabled but no teacher outputs");
    const MomentOrders orders = loss.affinity ? loss.orders : MomentOrders{false, false, false};
    const bool any_order = std::any_of(orders.begin(), orders.end(), [](bool b) { return b; });
    const bool feature_terms = (any_order && loss.alpha1 > 0.0) || (loss.attention && loss.alpha2 > 0.0);
    if (feature_terms &&
        (teacher->graphs.size() != pairing.pairs.size() || teacher->attention.size() != pairing.pairs.size())) {
        throw ContractError("train_step: teacher targets do not match the tap pairing");
    }

    const ForwardTrace trace = forward_trace(net, image);
    const std::size_t n = net.config().num_classes;
    const std::vector<double> weights = loss.class_weights.empty() ? std::vector<double>(n, 1.0) : loss.class_weights;
    auto seg = weighted_softmax_ce(trace.logits, target, weights);

    std::vector<double> affinity_terms, attention_terms;
    std::vector<Tensor> tap_grads(net.config().taps.size());
    if (feature_terms) {
        for (std::size_t p = 0; p < pairing.pairs.size(); ++p) {
            const auto s_tap = pairing.pairs[p].first;
            if (s_tap >= tap_grads.size()) throw ContractError("tap pairing refers to a missing student tap");
            const Tensor& f = trace.activations[net.config().taps[s_tap]];
            const AoiMasks masks = downsample_aoi(aoi, f.dim(0), f.dim(1));
            TapDistillation td = distill_tap(f, masks, teacher->graphs[p], teacher->attention[p], orders, loss.alpha1,
                                             loss.alpha2, loss.attention);
            affinity_terms.push_back(td.affinity);
            attention_terms.push_back(td.attention);
            if (tap_grads[s_tap].empty()) {
                tap_grads[s_tap] = std::move(td.feature_grad);
            } else {
                tap_grads[s_tap] += td.feature_grad;
            }
        }
    }

    StepResult out;
    out.report = total_loss(seg.loss, affinity_terms, attention_terms, loss.alpha1, loss.alpha2);
    Tensor logits_grad = std::move(seg.grad);
    if (loss.kd) {
        if (!teacher || teacher->logits.empty()) throw ContractError("train_step: KD enabled but no teacher logits");
        auto kd = kd_probability_loss(trace.logits, teacher->logits, loss.kd_temperature);
        out.report.kd = kd.loss;
        out.report.kd_weight = loss.kd_weight;
        out.report.total += loss.kd_weight * kd.loss;
        logits_grad.axpy(loss.kd_weight, kd.grad);
    }
    out.grads = backward(net, trace, logits_grad, tap_grads);
    return out;
}

LossReport train_step(Network& net, const Tensor& image, const ClassMap& target, const AoiMasks& aoi,
                      const TeacherTargets* teacher, const TapPairing& pairing, const LossConfig& loss, double lr,
                      double clip_norm) {
    StepResult step = loss_and_gradients(net, image, target, aoi, teacher, pairing, loss);
    double scale = lr;
    if (clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& g : step.grads) sq += dot(g, g);
        const double norm = std::sqrt(sq);
        if (norm > clip_norm) scale *= clip_norm / norm;
    }
    auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->axpy(-scale, step.grads[i]);
    return step.report;
}

std::string format_layers(const std::vector<LayerSpec>& layers) {
    std::string out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(layers[i].out_channels) + ':' + std::to_string(layers[i].kernel_size) + ':' +
               std::to_string(layers[i].stride);
    }
    return out;
}

std::vector<LayerSpec> parse_layers(const std::string& text) {
    std::vector<LayerSpec> out;
    for (const auto& item : split(text, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 3) throw ParseError("layer spec '" + item + "' must be channels:kernel:stride");
        try {
            out.push_back({std::stoul(parts[0]), std::stoul(parts[1]), std::stoul(parts[2])});
        } catch (const std::logic_error&) {
            throw ParseError("layer spec '" + item + "' has a non-numeric field");
        }
    }
    return out;
}

namespace {

constexpr const char* kCheckpointMagic = "INTRAKD-CHECKPOINT 1";

void put_u64(std::ostream& os, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(std::istream& is) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        const int c = is.get();
        if (c == EOF) throw FormatError("checkpoint index table truncated");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
    const auto& cfg = net.config();
    std::ostringstream header;
    header << kCheckpointMagic << '\n';
    header << "in_channels = " << cfg.in_channels << '\n';
    header << "num_classes = " << cfg.num_classes << '\n';
    header << "layers = " << format_layers(cfg.layers) << '\n';
    header << "taps = ";
    for (std::size_t i = 0; i < cfg.taps.size(); ++i) header << (i ? "," : "") << cfg.taps[i];
    header << '\n';
    header << "seed = " << cfg.seed << '\n';
    header << "END\n";

    std::ostringstream blobs;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> index;
    for (const Tensor* p : net.parameters()) {
        const auto offset = static_cast<std::uint64_t>(blobs.tellp());
        write_tensor(blobs, *p);
        index.emplace_back(offset, static_cast<std::uint64_t>(blobs.tellp()) - offset);
    }

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
    os << header.str();
    const auto count = static_cast<std::uint32_t>(index.size());
    for (int i = 0; i < 4; ++i) os.put(static_cast<char>((count >> (8 * i)) & 0xFF));
    for (const auto& [off, len] : index) {
        put_u64(os, off);
        put_u64(os, len);
    }
    os << blobs.str();
    if (!os) throw IoError("checkpoint write failed: " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != kCheckpointMagic) throw FormatError(path.string() + ": not a checkpoint");
    std::string header;
    while (std::getline(is, line) && line != "END") header += line + '\n';
    if (line != "END") throw FormatError(path.string() + ": checkpoint header not terminated");

    NetworkConfig cfg;
    try {
        const auto kv = KeyValueConfig::parse(header, path.string());
        cfg.in_channels = kv.get_u64("in_channels", 3);
        cfg.num_classes = kv.get_u64("num_classes", 0);
        cfg.layers = parse_layers(kv.get_string("layers", ""));
        for (auto t : kv.get_u64_list("taps", {})) cfg.taps.push_back(t);
        cfg.seed = kv.get_u64("seed", 0);
    } catch (const ParseError& e) {
        throw FormatError(e.what());
    }

    Network net = build_network(cfg);
    auto params = net.parameters();
    std::uint32_t count = 0;
    for (int i = 0; i < 4; ++i) {
        const int c = is.get();
        if (c == EOF) throw FormatError(path.string() + ": checkpoint index truncated");
        count |= static_cast<std::uint32_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    if (count != params.size()) {
        throw FormatError(path.string() + ": checkpoint holds " + std::to_string(count) + " tensors, config needs " +
                          std::to_string(params.size()));
    }
    std::vector<std::pair<std::uint64_t, std::uint64_t>> index(count);
    for (auto& [off, len] : index) {
        off = get_u64(is);
        len = get_u64(is);
    }
    const auto base = is.tellg();
    for (std::size_t i = 0; i < count; ++i) {
        is.seekg(base + static_cast<std::streamoff>(index[i].first));
        Tensor t = read_tensor(is);
        if (!t.same_shape(*params[i])) {
            throw FormatError(path.string() + ": tensor " + std::to_string(i) + " has extents " + t.shape_string() +
                              ", expected " + params[i]->shape_string());
        }
        *params[i] = std::move(t);
    }
    return net;
}

}  // namespace intrakd
