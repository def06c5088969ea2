#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "intrakd/aoi.hpp"
#include "intrakd/ops.hpp"
#include "intrakd/tensor.hpp"

namespace intrakd {

inline constexpr double kMomentEps = 1e-6;
inline constexpr double kCosineEps = 1e-12;
inline constexpr double kAttentionFloor = 1e-12;
inline constexpr std::size_t kMomentOrders = 3;

/// Which moment orders (1, 2, 3) take part in affinity distillation.
using MomentOrders = std::array<bool, kMomentOrders>;
inline constexpr MomentOrders kAllMoments{true, true, true};

/// Per-class moment vectors. mu[r] is n x c and holds the (r+1)-th moment;
/// absent classes have all-zero rows.
struct MomentSet {
    std::size_t n = 0;
    std::size_t c = 0;
    std::array<Tensor, kMomentOrders> mu;
    std::vector<bool> present;

    const Tensor& mu1() const { return mu[0]; }
    const Tensor& mu2() const { return mu[1]; }
    const Tensor& mu3() const { return mu[2]; }
};

/// Upstream gradients w.r.t. mu1..mu3, each n x c.
using MomentGrads = std::array<Tensor, kMomentOrders>;

/// Moment pooling over AOI regions at feature resolution.
///
/// For class k with masked positions P (m = |P|), per channel:
///   mu1 = mean_P F,  mu2 = mean_P (F - mu1)^2,
///   mu3 = mean_P ((F - mu1) / (mu2 + eps))^3.
/// Only masked positions enter the sums.
MomentSet moment_pool(const Tensor& features, const AoiMasks& aoi);

/// Exact gradient of moment_pool w.r.t. the features, including the
/// dependence of mu2 on mu1 and of mu3 on mu1 and mu2.
Tensor moment_pool_backward(const Tensor& features, const AoiMasks& aoi, const MomentGrads& upstream);

/// Inter-region affinity graph: nodes are the moment vectors, edges
/// C(k1, k2, r) are cosine similarities between mu_r(k1) and mu_r(k2).
struct AffinityGraph {
    std::size_t n = 0;
    Tensor edges;  // n x n x 3
    MomentSet nodes;

    bool valid(std::size_t k1, std::size_t k2) const { return nodes.present[k1] && nodes.present[k2]; }
    std::size_t present_count() const;
};

AffinityGraph build_affinity_graph(const MomentSet& moments);

/// Gradient of the edges w.r.t. the node moment vectors.
MomentGrads affinity_graph_backward(const AffinityGraph& graph, const Tensor& edge_grad);

/// Affinity distillation loss
///   L_m = 1 / (R * n_p^2) * sum_r sum_{valid k1,k2} (C_S - C_T)^2
/// where n_p counts present classes and R the enabled moment orders.
/// Returns the loss and its gradient w.r.t. the student edges.
LossAndGrad affinity_loss(const AffinityGraph& student, const AffinityGraph& teacher,
                          const MomentOrders& orders = kAllMoments);

/// Spatial attention map: channel-wise sum of squares, L2-normalised over the
/// map (all zeros when the raw map has norm below kAttentionFloor).
struct AttentionMap {
    Tensor values;  // h_f x w_f
};

AttentionMap attention_map(const Tensor& features);
Tensor attention_map_backward(const Tensor& features, const Tensor& map_grad);

/// L_a = sum (A_S - A_T)^2. A teacher map of different extents is resized
/// (nearest) to the student map first.
LossAndGrad attention_loss(const AttentionMap& student, const AttentionMap& teacher);

/// Loss components of one training step.
struct LossReport {
    double seg = 0.0;
    double affinity = 0.0;
    double attention = 0.0;
    double alpha1 = 0.1;
    double alpha2 = 0.1;
    /// Probability-map KD baseline term; zero unless that baseline is active.
    double kd = 0.0;
    double kd_weight = 0.0;
    double total = 0.0;
};

inline constexpr double kDefaultAlpha1 = 0.1;
inline constexpr double kDefaultAlpha2 = 0.1;

/// total = seg + alpha1 * sum(affinity_terms) + alpha2 * sum(attention_terms)
LossReport total_loss(double seg, std::span<const double> affinity_terms, std::span<const double> attention_terms,
                      double alpha1 = kDefaultAlpha1, double alpha2 = kDefaultAlpha2);

/// Mean over pixels of KL(softmax(teacher/T) || softmax(student/T)), with its
/// gradient w.r.t. the student logits.
LossAndGrad kd_probability_loss(const Tensor& student_logits, const Tensor& teacher_logits, double temperature);

/// Result of distilling one student tap against a fixed teacher tap.
struct TapDistillation {
    double affinity = 0.0;
    double attention = 0.0;
    Tensor feature_grad;  // alpha-weighted dL/dF_student
};

/// Runs moment pooling, graph construction and both distillation losses for
/// one tap pair. `student_aoi` and `teacher_aoi` must be at the resolution of
/// the respective feature maps. Either term is skipped when its weight is 0
/// or (for affinity) no order is enabled.
TapDistillation distill_tap(const Tensor& student_features, const AoiMasks& student_aoi,
                            const AffinityGraph& teacher_graph, const AttentionMap& teacher_attention,
                            const MomentOrders& orders, double alpha1, double alpha2, bool use_attention);

/// Number of scalars in an affinity distillation target (3 n^2).
constexpr std::size_t affinity_target_size(std::size_t n) { return 3 * n * n; }
/// Number of scalars in a probability-map target (h_f w_f n).
constexpr std::size_t probability_target_size(std::size_t h_f, std::size_t w_f, std::size_t n) { return h_f * w_f * n; }

}  // namespace intrakd
