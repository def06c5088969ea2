#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "intrakd/aoi.hpp"
#include "intrakd/distill.hpp"
#include "intrakd/tensor.hpp"

namespace intrakd {

/// One conv + ReLU block. Padding is kernel_size / 2.
struct LayerSpec {
    std::size_t out_channels = 0;
    std::size_t kernel_size = 3;
    std::size_t stride = 1;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkConfig {
    std::size_t in_channels = 3;
    std::size_t num_classes = 4;
    std::vector<LayerSpec> layers;
    /// Zero-based layer indices whose post-ReLU outputs are exposed.
    std::vector<std::size_t> taps;
    std::uint64_t seed = 0;

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Default toy teacher: 8 layers, 16 -> 64 channels, two stride-2 layers,
/// taps after layers 4 and 8.
NetworkConfig default_teacher_config(std::size_t num_classes = 4, std::uint64_t seed = 1);
/// Default toy student: 3 layers, 8 -> 16 channels, two stride-2 layers,
/// taps after layers 2 and 3.
NetworkConfig default_student_config(std::size_t num_classes = 4, std::uint64_t seed = 2);

/// Spatial extent after applying layers [0, upto) to an h x w input.
std::pair<std::size_t, std::size_t> feature_extent(const NetworkConfig& config, std::size_t h, std::size_t w,
                                                   std::size_t upto);
std::pair<std::size_t, std::size_t> output_extent(const NetworkConfig& config, std::size_t h, std::size_t w);

/// Throws ConfigError if the config is unusable for h x w inputs.
void validate_config(const NetworkConfig& config, std::size_t h, std::size_t w);

struct ConvParams {
    Tensor kernel;  // k x k x cin x cout
    Tensor bias;    // cout
    std::size_t stride = 1;
    std::size_t pad = 0;
};

class Network {
public:
    Network() = default;
    Network(NetworkConfig config, std::vector<ConvParams> layers, ConvParams head);

    const NetworkConfig& config() const { return config_; }
    const std::vector<ConvParams>& layers() const { return layers_; }
    const ConvParams& head() const { return head_; }

    /// Parameters in a fixed order: (kernel, bias) per layer, then the head.
    std::vector<const Tensor*> parameters() const;
    std::vector<Tensor*> parameters();
    std::size_t parameter_count() const;

    friend bool operator==(const Network& a, const Network& b);

private:
    NetworkConfig config_;
    std::vector<ConvParams> layers_;
    ConvParams head_;
};

/// Glorot-uniform kernels (bound sqrt(6 / (fan_in + fan_out))), zero biases;
/// a pure function of the config including its seed.
Network build_network(const NetworkConfig& config);

struct ForwardResult {
    Tensor logits;
    std::vector<Tensor> tapped;
};

/// Intermediate values kept for the backward pass.
struct ForwardTrace {
    std::vector<Tensor> inputs;       // input to layer i
    std::vector<Tensor> activations;  // post-ReLU output of layer i
    Tensor logits;
};

ForwardResult forward(const Network& net, const Tensor& image);
ForwardTrace forward_trace(const Network& net, const Tensor& image);

/// Gradients in Network::parameters() order.
using ParameterGrads = std::vector<Tensor>;

/// Backpropagates dL/dlogits plus extra gradients injected at each tap
/// (one entry per config.taps; an empty tensor means no contribution).
ParameterGrads backward(const Network& net, const ForwardTrace& trace, const Tensor& logits_grad,
                        const std::vector<Tensor>& tap_grads);

/// Pairs (student tap index, teacher tap index), both indexing `taps` lists.
struct TapPairing {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

/// Teacher-side distillation targets for one sample (constants for the student).
struct TeacherTargets {
    std::vector<AffinityGraph> graphs;       // one per tap pair
    std::vector<AttentionMap> attention;     // one per tap pair
    Tensor logits;
};

TeacherTargets make_teacher_targets(const Network& teacher, const Tensor& image, const AoiMasks& aoi,
                                    const TapPairing& pairing);

struct LossConfig {
    double alpha1 = kDefaultAlpha1;
    double alpha2 = kDefaultAlpha2;
    MomentOrders orders = kAllMoments;
    bool affinity = true;
    bool attention = true;
    bool kd = false;
    double kd_temperature = 1.0;
    double kd_weight = 1.0;
    std::vector<double> class_weights;

    /// True when any term needs teacher outputs.
    bool uses_teacher() const;
};

/// Class weights with background scaled by `background_weight`, others 1.
std::vector<double> background_weighted(std::size_t n, double background_weight);

struct StepResult {
    LossReport report;
    ParameterGrads grads;
};

/// Total training loss for one sample and its gradient w.r.t.
/// every student parameter. `target` lives at the network output resolution,
/// `aoi` at input resolution.
StepResult loss_and_gradients(const Network& net, const Tensor& image, const ClassMap& target, const AoiMasks& aoi,
                              const TeacherTargets* teacher, const TapPairing& pairing, const LossConfig& loss);

/// One SGD step (p <- p - lr * grad). With clip_norm > 0 the gradient is
/// rescaled to global L2 norm clip_norm when it is longer. Returns the
/// pre-update losses.
LossReport train_step(Network& net, const Tensor& image, const ClassMap& target, const AoiMasks& aoi,
                      const TeacherTargets* teacher, const TapPairing& pairing, const LossConfig& loss, double lr,
                      double clip_norm = 0.0);

// Checkpoint file: text header ("INTRAKD-CHECKPOINT 1", config as key = value
// lines, "END"), then a little-endian index table (u32 count, then u64 offset
// and u64 length per tensor, offsets relative to the end of the table), then
// the parameters in the tensor file format.
void save_checkpoint(const std::filesystem::path& path, const Network& net);
Network load_checkpoint(const std::filesystem::path& path);

std::string format_layers(const std::vector<LayerSpec>& layers);
std::vector<LayerSpec> parse_layers(const std::string& text);

}  // namespace intrakd
