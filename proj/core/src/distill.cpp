#include "intrakd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "intrakd/errors.hpp"

namespace intrakd {

namespace {

void check_feature_mask(const Tensor& features, const AoiMasks& aoi, const char* who) {
    if (features.rank() != 3) throw ShapeError(std::string(who) + ": features must be h_f x w_f x c");
    const Tensor& m = aoi.feature_maps;
    if (m.rank() != 3 || m.dim(0) != features.dim(0) || m.dim(1) != features.dim(1) || m.dim(2) != aoi.n) {
        throw ShapeError(std::string(who) + ": AOI " + m.shape_string() + " does not match features " +
                         features.shape_string());
    }
}

// Flat pixel indices covered by class k.
std::vector<std::size_t> masked_positions(const AoiMasks& aoi, std::size_t k) {
    std::vector<std::size_t> pos;
    const std::size_t pixels = aoi.feature_maps.dim(0) * aoi.feature_maps.dim(1);
    for (std::size_t p = 0; p < pixels; ++p)
        if (aoi.feature_maps[p * aoi.n + k] != 0.0) pos.push_back(p);
    return pos;
}

double norm(const double* v, std::size_t c) {
    double s = 0.0;
    for (std::size_t i = 0; i < c; ++i) s += v[i] * v[i];
    return std::sqrt(s);
}

}  // namespace

MomentSet moment_pool(const Tensor& features, const AoiMasks& aoi) {
    check_feature_mask(features, aoi, "moment_pool");
    const std::size_t n = aoi.n, c = features.dim(2);
    MomentSet out{n, c, {Tensor({n, c}), Tensor({n, c}), Tensor({n, c})}, std::vector<bool>(n, false)};

    std::vector<double> d(c);
    for (std::size_t k = 0; k < n; ++k) {
        const auto pos = masked_positions(aoi, k);
        if (pos.empty()) continue;
        out.present[k] = true;
        const double inv_m = 1.0 / static_cast<double>(pos.size());
        double* mu1 = out.mu[0].raw() + k * c;
        double* mu2 = out.mu[1].raw() + k * c;
        double* mu3 = out.mu[2].raw() + k * c;

        for (auto p : pos) {
            const double* f = features.raw() + p * c;
            for (std::size_t ch = 0; ch < c; ++ch) mu1[ch] += f[ch];
        }
        for (std::size_t ch = 0; ch < c; ++ch) mu1[ch] *= inv_m;

        for (auto p : pos) {
            const double* f = features.raw() + p * c;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double dv = f[ch] - mu1[ch];
                mu2[ch] += dv * dv;
            }
        }
        for (std::size_t ch = 0; ch < c; ++ch) mu2[ch] *= inv_m;

        for (auto p : pos) {
            const double* f = features.raw() + p * c;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double z = (f[ch] - mu1[ch]) / (mu2[ch] + kMomentEps);
                mu3[ch] += z * z * z;
            }
        }
        for (std::size_t ch = 0; ch < c; ++ch) mu3[ch] *= inv_m;
    }
    return out;
}

Tensor moment_pool_backward(const Tensor& features, const AoiMasks& aoi, const MomentGrads& upstream) {
    check_feature_mask(features, aoi, "moment_pool_backward");
    const std::size_t n = aoi.n, c = features.dim(2);
    for (const auto& g : upstream) {
        if (g.rank() != 2 || g.dim(0) != n || g.dim(1) != c) {
            throw ShapeError("moment_pool_backward: upstream gradient " + g.shape_string() + " must be " +
                             std::to_string(n) + "x" + std::to_string(c));
        }
    }
    const MomentSet mom = moment_pool(features, aoi);
    Tensor grad(features.dims());

    // With d = F - mu1 and s = mu2 + eps over m masked positions:
    //   dmu1/dF_j = 1/m
    //   dmu2/dF_j = 2 d_j / m                       (sum of d is zero)
    //   dmu3/dF_j = 3 (d_j^2 - mu2) / (m s^3) - 6 mu3 d_j / (m s)
    for (std::size_t k = 0; k < n; ++k) {
        if (!mom.present[k]) continue;
        const auto pos = masked_positions(aoi, k);
        const double inv_m = 1.0 / static_cast<double>(pos.size());
        const double* mu1 = mom.mu[0].raw() + k * c;
        const double* mu2 = mom.mu[1].raw() + k * c;
        const double* mu3 = mom.mu[2].raw() + k * c;
        const double* g1 = upstream[0].raw() + k * c;
        const double* g2 = upstream[1].raw() + k * c;
        const double* g3 = upstream[2].raw() + k * c;
        for (auto p : pos) {
            const double* f = features.raw() + p * c;
            double* df = grad.raw() + p * c;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double dv = f[ch] - mu1[ch];
                const double s = mu2[ch] + kMomentEps;
                const double s3 = s * s * s;
                double v = g1[ch] * inv_m;
                v += g2[ch] * 2.0 * dv * inv_m;
                v += g3[ch] * (3.0 * (dv * dv - mu2[ch]) * inv_m / s3 - 6.0 * mu3[ch] * dv * inv_m / s);
                df[ch] += v;
            }
        }
    }
    return grad;
}

std::size_t AffinityGraph::present_count() const {
    return static_cast<std::size_t>(std::count(nodes.present.begin(), nodes.present.end(), true));
}

AffinityGraph build_affinity_graph(const MomentSet& moments) {
    const std::size_t n = moments.n, c = moments.c;
    AffinityGraph g{n, Tensor({n, n, kMomentOrders}), moments};
    for (std::size_t r = 0; r < kMomentOrders; ++r) {
        const Tensor& mu = moments.mu[r];
        std::vector<double> norms(n);
        for (std::size_t k = 0; k < n; ++k) norms[k] = norm(mu.raw() + k * c, c);
        for (std::size_t k1 = 0; k1 < n; ++k1) {
            if (!moments.present[k1]) continue;
            // Self-similarity of a nonzero vector is exactly 1.
            g.edges.at(k1, k1, r) = norms[k1] > 0.0 ? 1.0 : 0.0;
            for (std::size_t k2 = k1 + 1; k2 < n; ++k2) {
                if (!moments.present[k2]) continue;
                const double* a = mu.raw() + k1 * c;
                const double* b = mu.raw() + k2 * c;
                double p = 0.0;
                for (std::size_t ch = 0; ch < c; ++ch) p += a[ch] * b[ch];
                const double e = p / (norms[k1] * norms[k2] + kCosineEps);
                g.edges.at(k1, k2, r) = e;
                g.edges.at(k2, k1, r) = e;
            }
        }
    }
    return g;
}

MomentGrads affinity_graph_backward(const AffinityGraph& graph, const Tensor& edge_grad) {
    const std::size_t n = graph.n, c = graph.nodes.c;
    if (!edge_grad.same_shape(graph.edges)) throw ShapeError("affinity_graph_backward: edge gradient shape mismatch");
    MomentGrads out{Tensor({n, c}), Tensor({n, c}), Tensor({n, c})};

    for (std::size_t r = 0; r < kMomentOrders; ++r) {
        const Tensor& mu = graph.nodes.mu[r];
        std::vector<double> norms(n);
        for (std::size_t k = 0; k < n; ++k) norms[k] = norm(mu.raw() + k * c, c);
        for (std::size_t k1 = 0; k1 < n; ++k1) {
            for (std::size_t k2 = 0; k2 < n; ++k2) {
                // Diagonal edges are constant; invalid edges are not part of the graph.
                if (k1 == k2 || !graph.valid(k1, k2)) continue;
                const double ge = edge_grad.at(k1, k2, r);
                if (ge == 0.0) continue;
                const double* a = mu.raw() + k1 * c;
                const double* b = mu.raw() + k2 * c;
                const double na = norms[k1], nb = norms[k2];
                const double denom = na * nb + kCosineEps;
                double p = 0.0;
                for (std::size_t ch = 0; ch < c; ++ch) p += a[ch] * b[ch];
                // de/da = b/N - p nb a / (na N^2); undefined at a = 0, taken as 0 there.
                if (na > 0.0) {
                    double* ga = out[r].raw() + k1 * c;
                    const double coef = p * nb / (na * denom * denom);
                    for (std::size_t ch = 0; ch < c; ++ch) ga[ch] += ge * (b[ch] / denom - coef * a[ch]);
                }
                if (nb > 0.0) {
                    double* gb = out[r].raw() + k2 * c;
                    const double coef = p * na / (nb * denom * denom);
                    for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += ge * (a[ch] / denom - coef * b[ch]);
                }
            }
        }
    }
    return out;
}

LossAndGrad affinity_loss(const AffinityGraph& student, const AffinityGraph& teacher, const MomentOrders& orders) {
    if (student.n != teacher.n) throw ContractError("affinity_loss: graphs have different class counts");
    if (student.nodes.present != teacher.nodes.present) {
        throw ContractError("affinity_loss: graphs were built from different AOI masks (presence differs)");
    }
    const std::size_t n = student.n;
    LossAndGrad out{0.0, Tensor({n, n, kMomentOrders})};
    const auto n_orders = static_cast<std::size_t>(std::count(orders.begin(), orders.end(), true));
    const std::size_t n_p = student.present_count();
    if (n_orders == 0 || n_p == 0) return out;

    const double norm_factor = 1.0 / (static_cast<double>(n_orders) * static_cast<double>(n_p * n_p));
    for (std::size_t r = 0; r < kMomentOrders; ++r) {
        if (!orders[r]) continue;
        for (std::size_t k1 = 0; k1 < n; ++k1) {
            for (std::size_t k2 = 0; k2 < n; ++k2) {
                if (!student.valid(k1, k2)) continue;
                const double diff = student.edges.at(k1, k2, r) - teacher.edges.at(k1, k2, r);
                out.loss += norm_factor * diff * diff;
                out.grad.at(k1, k2, r) = 2.0 * norm_factor * diff;
            }
        }
    }
    return out;
}

AttentionMap attention_map(const Tensor& features) {
    if (features.rank() != 3) throw ShapeError("attention_map: features must be h_f x w_f x c");
    const std::size_t h = features.dim(0), w = features.dim(1), c = features.dim(2);
    AttentionMap a{Tensor({h, w})};
    double sq = 0.0;
    for (std::size_t p = 0; p < h * w; ++p) {
        const double* f = features.raw() + p * c;
        double s = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) s += f[ch] * f[ch];
        a.values[p] = s;
        sq += s * s;
    }
    const double nrm = std::sqrt(sq);
    if (nrm < kAttentionFloor) {
        a.values.fill(0.0);
    } else {
        a.values *= 1.0 / nrm;
    }
    return a;
}

Tensor attention_map_backward(const Tensor& features, const Tensor& map_grad) {
    if (features.rank() != 3) throw ShapeError("attention_map_backward: features must be h_f x w_f x c");
    const std::size_t h = features.dim(0), w = features.dim(1), c = features.dim(2);
    if (map_grad.rank() != 2 || map_grad.dim(0) != h || map_grad.dim(1) != w) {
        throw ShapeError("attention_map_backward: map gradient must be h_f x w_f");
    }
    Tensor grad(features.dims());
    std::vector<double> raw(h * w);
    double sq = 0.0;
    for (std::size_t p = 0; p < h * w; ++p) {
        const double* f = features.raw() + p * c;
        double s = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) s += f[ch] * f[ch];
        raw[p] = s;
        sq += s * s;
    }
    const double nrm = std::sqrt(sq);
    if (nrm < kAttentionFloor) return grad;

    // A = raw / |raw|  =>  dL/draw = (g - A <A, g>) / |raw|
    double ag = 0.0;
    for (std::size_t p = 0; p < h * w; ++p) ag += raw[p] / nrm * map_grad[p];
    for (std::size_t p = 0; p < h * w; ++p) {
        const double draw = (map_grad[p] - raw[p] / nrm * ag) / nrm;
        const double* f = features.raw() + p * c;
        double* df = grad.raw() + p * c;
        for (std::size_t ch = 0; ch < c; ++ch) df[ch] = 2.0 * f[ch] * draw;
    }
    return grad;
}

LossAndGrad attention_loss(const AttentionMap& student, const AttentionMap& teacher) {
    const Tensor& s = student.values;
    if (s.rank() != 2 || teacher.values.rank() != 2) throw ShapeError("attention_loss: maps must be rank 2");
    const Tensor t = teacher.values.same_shape(s) ? teacher.values : resize_nearest(teacher.values, s.dim(0), s.dim(1));
    LossAndGrad out{0.0, Tensor(s.dims())};
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double diff = s[i] - t[i];
        out.loss += diff * diff;
        out.grad[i] = 2.0 * diff;
    }
    return out;
}

LossReport total_loss(double seg, std::span<const double> affinity_terms, std::span<const double> attention_terms,
                      double alpha1, double alpha2) {
    auto non_negative = [](double v) { return v >= 0.0; };
    if (!(seg >= 0.0) || !std::all_of(affinity_terms.begin(), affinity_terms.end(), non_negative) ||
        !std::all_of(attention_terms.begin(), attention_terms.end(), non_negative)) {
        throw ContractError("total_loss: loss components must be non-negative");
    }
    if (!(alpha1 >= 0.0) || !(alpha2 >= 0.0)) throw ContractError("total_loss: loss weights must be non-negative");
    LossReport r;
    r.seg = seg;
    r.affinity = std::accumulate(affinity_terms.begin(), affinity_terms.end(), 0.0);
    r.attention = std::accumulate(attention_terms.begin(), attention_terms.end(), 0.0);
    r.alpha1 = alpha1;
    r.alpha2 = alpha2;
    r.total = seg + alpha1 * r.affinity + alpha2 * r.attention;
    return r;
}

LossAndGrad kd_probability_loss(const Tensor& student_logits, const Tensor& teacher_logits, double temperature) {
    if (!(temperature > 0.0)) throw ConfigError("kd_probability_loss: temperature must be positive");
    if (!student_logits.same_shape(teacher_logits) || student_logits.rank() != 3) {
        throw ShapeError("kd_probability_loss: logits must have identical h x w x n extents");
    }
    const std::size_t n = student_logits.dim(2);
    const std::size_t pixels = student_logits.dim(0) * student_logits.dim(1);
    const Tensor p = softmax_channels(teacher_logits, temperature);
    const Tensor q = softmax_channels(student_logits, temperature);
    LossAndGrad out{0.0, Tensor(student_logits.dims())};
    const double inv_pixels = 1.0 / static_cast<double>(pixels);
    for (std::size_t px = 0; px < pixels; ++px) {
        for (std::size_t c = 0; c < n; ++c) {
            const std::size_t i = px * n + c;
            if (p[i] > 0.0) out.loss += p[i] * (std::log(p[i]) - std::log(q[i]));
            // d/dz_s KL(p || softmax(z_s / T)) = (q - p) / T
            out.grad[i] = (q[i] - p[i]) / temperature * inv_pixels;
        }
    }
    out.loss *= inv_pixels;
    out.loss = std::max(out.loss, 0.0);
    return out;
}

TapDistillation distill_tap(const Tensor& student_features, const AoiMasks& student_aoi,
                            const AffinityGraph& teacher_graph, const AttentionMap& teacher_attention,
                            const MomentOrders& orders, double alpha1, double alpha2, bool use_attention) {
    TapDistillation out{0.0, 0.0, Tensor(student_features.dims())};
    const bool any_order = std::any_of(orders.begin(), orders.end(), [](bool b) { return b; });
    if (any_order && alpha1 > 0.0) {
        const AffinityGraph graph = build_affinity_graph(moment_pool(student_features, student_aoi));
        auto loss = affinity_loss(graph, teacher_graph, orders);
        out.affinity = loss.loss;
        loss.grad *= alpha1;
        const MomentGrads mgrad = affinity_graph_backward(graph, loss.grad);
        out.feature_grad += moment_pool_backward(student_features, student_aoi, mgrad);
    }
    if (use_attention && alpha2 > 0.0) {
        auto loss = attention_loss(attention_map(student_features), teacher_attention);
        out.attention = loss.loss;
        loss.grad *= alpha2;
        out.feature_grad += attention_map_backward(student_features, loss.grad);
    }
    return out;
}

}  // namespace intrakd
