#include "intrakd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "intrakd/errors.hpp"

namespace intrakd {

namespace {

struct ConvGeometry {
    std::size_t h, w, cin, kh, kw, cout, oh, ow;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t pad) {
    if (input.rank() != 3) throw ShapeError("conv2d: input must be h x w x cin, got " + input.shape_string());
    if (kernel.rank() != 4) throw ShapeError("conv2d: kernel must be kh x kw x cin x cout, got " + kernel.shape_string());
    if (stride == 0) throw ConfigError("conv2d: stride must be positive");
    ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), kernel.dim(0), kernel.dim(1), kernel.dim(3), 0, 0};
    if (kernel.dim(2) != g.cin) {
        throw ShapeError("conv2d: input has " + std::to_string(g.cin) + " channels but kernel expects " +
                         std::to_string(kernel.dim(2)));
    }
    if (g.kh > g.h + 2 * pad || g.kw > g.w + 2 * pad) {
        throw ShapeError("conv2d: kernel " + kernel.shape_string() + " larger than padded input " +
                         input.shape_string());
    }
    g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
    g.ow = (g.w + 2 * pad - g.kw) / stride + 1;
    return g;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride, std::size_t pad) {
    const auto g = conv_geometry(input, kernel, stride, pad);
    if (bias.size() != g.cout) throw ShapeError("conv2d: bias length must equal cout");

    Tensor out({g.oh, g.ow, g.cout});
    const double* in = input.raw();
    const double* k = kernel.raw();
    double* o = out.raw();
    const auto ipad = static_cast<std::ptrdiff_t>(pad);

    for (std::size_t oy = 0; oy < g.oh; ++oy) {
        for (std::size_t ox = 0; ox < g.ow; ++ox) {
            double* orow = o + (oy * g.ow + ox) * g.cout;
            for (std::size_t co = 0; co < g.cout; ++co) orow[co] = bias[co];
            for (std::size_t ky = 0; ky < g.kh; ++ky) {
                const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - ipad;
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                for (std::size_t kx = 0; kx < g.kw; ++kx) {
                    const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - ipad;
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                    const double* irow = in + (static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)) * g.cin;
                    const double* kblock = k + (ky * g.kw + kx) * g.cin * g.cout;
                    for (std::size_t ci = 0; ci < g.cin; ++ci) {
                        const double v = irow[ci];
                        const double* kr = kblock + ci * g.cout;
                        for (std::size_t co = 0; co < g.cout; ++co) orow[co] += v * kr[co];
                    }
                }
            }
        }
    }
    return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& upstream, std::size_t stride,
                            std::size_t pad, bool need_input_grad) {
    const auto g = conv_geometry(input, kernel, stride, pad);
    if (upstream.rank() != 3 || upstream.dim(0) != g.oh || upstream.dim(1) != g.ow || upstream.dim(2) != g.cout) {
        throw ShapeError("conv2d_backward: upstream " + upstream.shape_string() + " does not match output [" +
                         std::to_string(g.oh) + "x" + std::to_string(g.ow) + "x" + std::to_string(g.cout) + "]");
    }

    Conv2dGrads grads{Tensor(input.dims()), Tensor(kernel.dims()), Tensor({g.cout})};
    const double* in = input.raw();
    const double* up = upstream.raw();
    double* dk = grads.kernel.raw();
    double* db = grads.bias.raw();
    double* di = grads.input.raw();
    const auto ipad = static_cast<std::ptrdiff_t>(pad);

    // Transposed copy (kh, kw, cout, cin) so the input-gradient update is a
    // contiguous axpy over cin.
    std::vector<double> kt;
    if (need_input_grad) {
        kt.resize(kernel.size());
        for (std::size_t ky = 0; ky < g.kh; ++ky)
            for (std::size_t kx = 0; kx < g.kw; ++kx)
                for (std::size_t ci = 0; ci < g.cin; ++ci)
                    for (std::size_t co = 0; co < g.cout; ++co)
                        kt[((ky * g.kw + kx) * g.cout + co) * g.cin + ci] = kernel.at(ky, kx, ci, co);
    }

    for (std::size_t oy = 0; oy < g.oh; ++oy) {
        for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const double* urow = up + (oy * g.ow + ox) * g.cout;
            for (std::size_t co = 0; co < g.cout; ++co) db[co] += urow[co];
            for (std::size_t ky = 0; ky < g.kh; ++ky) {
                const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - ipad;
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                for (std::size_t kx = 0; kx < g.kw; ++kx) {
                    const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - ipad;
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                    const std::size_t ioff = (static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)) * g.cin;
                    const double* irow = in + ioff;
                    double* kblock = dk + (ky * g.kw + kx) * g.cin * g.cout;
                    for (std::size_t ci = 0; ci < g.cin; ++ci) {
                        const double v = irow[ci];
                        double* kr = kblock + ci * g.cout;
                        for (std::size_t co = 0; co < g.cout; ++co) kr[co] += v * urow[co];
                    }
                    if (need_input_grad) {
                        double* drow = di + ioff;
                        const double* ktblock = kt.data() + (ky * g.kw + kx) * g.cout * g.cin;
                        for (std::size_t co = 0; co < g.cout; ++co) {
                            const double u = urow[co];
                            const double* kr = ktblock + co * g.cin;
                            for (std::size_t ci = 0; ci < g.cin; ++ci) drow[ci] += u * kr[ci];
                        }
                    }
                }
            }
        }
    }
    return grads;
}

Tensor relu(const Tensor& input) {
    Tensor out(input);
    for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& upstream) {
    if (!input.same_shape(upstream)) throw ShapeError("relu_backward: shape mismatch");
    Tensor out(upstream);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(input[i] > 0.0)) out[i] = 0.0;
    }
    return out;
}

Tensor softmax_channels(const Tensor& logits, double temperature) {
    if (logits.rank() != 3) throw ShapeError("softmax_channels: expected h x w x n logits");
    const std::size_t n = logits.dim(2);
    const std::size_t pixels = logits.dim(0) * logits.dim(1);
    Tensor out(logits.dims());
    for (std::size_t p = 0; p < pixels; ++p) {
        const double* z = logits.raw() + p * n;
        double* q = out.raw() + p * n;
        double zmax = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) zmax = std::max(zmax, z[c] / temperature);
        double sum = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            q[c] = std::exp(z[c] / temperature - zmax);
            sum += q[c];
        }
        for (std::size_t c = 0; c < n; ++c) q[c] /= sum;
    }
    return out;
}

LossAndGrad weighted_softmax_ce(const Tensor& logits, const ClassMap& target, std::span<const double> class_weights) {
    if (logits.rank() != 3) throw ShapeError("weighted_softmax_ce: expected h x w x n logits");
    const std::size_t h = logits.dim(0), w = logits.dim(1), n = logits.dim(2);
    if (target.height() != h || target.width() != w) {
        throw ShapeError("weighted_softmax_ce: target extents do not match logits " + logits.shape_string());
    }
    if (class_weights.size() != n) throw ShapeError("weighted_softmax_ce: need one weight per class");
    for (double wt : class_weights) {
        if (!(wt > 0.0)) throw ConfigError("weighted_softmax_ce: class weights must be positive");
    }

    LossAndGrad result{0.0, Tensor(logits.dims())};
    double weight_sum = 0.0;
    for (std::size_t p = 0; p < h * w; ++p) {
        const std::size_t t = target.labels()[p];
        if (t >= n) throw IndexError("weighted_softmax_ce: target class " + std::to_string(t) + " >= " + std::to_string(n));
        weight_sum += class_weights[t];
    }

    for (std::size_t p = 0; p < h * w; ++p) {
        const std::size_t t = target.labels()[p];
        const double* z = logits.raw() + p * n;
        double* dz = result.grad.raw() + p * n;
        double zmax = z[0];
        for (std::size_t c = 1; c < n; ++c) zmax = std::max(zmax, z[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < n; ++c) sum += std::exp(z[c] - zmax);
        const double log_sum = std::log(sum) + zmax;
        const double scale = class_weights[t] / weight_sum;
        result.loss += scale * (log_sum - z[t]);
        for (std::size_t c = 0; c < n; ++c) dz[c] = scale * std::exp(z[c] - log_sum);
        dz[t] -= scale;
    }
    return result;
}

Tensor resize_nearest(const Tensor& input, std::size_t out_h, std::size_t out_w) {
    if (input.rank() != 2 && input.rank() != 3) throw ShapeError("resize_nearest: expected h x w or h x w x c");
    if (out_h == 0 || out_w == 0) throw ShapeError("resize_nearest: target extents must be >= 1");
    const std::size_t h = input.dim(0), w = input.dim(1);
    const std::size_t c = input.rank() == 3 ? input.dim(2) : 1;
    Tensor out(input.rank() == 3 ? std::vector<std::size_t>{out_h, out_w, c} : std::vector<std::size_t>{out_h, out_w});
    for (std::size_t i = 0; i < out_h; ++i) {
        const std::size_t si = i * h / out_h;
        for (std::size_t j = 0; j < out_w; ++j) {
            const std::size_t sj = j * w / out_w;
            const double* src = input.raw() + (si * w + sj) * c;
            double* dst = out.raw() + (i * out_w + j) * c;
            std::copy(src, src + c, dst);
        }
    }
    return out;
}

ClassMap argmax_channels(const Tensor& logits) {
    if (logits.rank() != 3) throw ShapeError("argmax_channels: expected h x w x n");
    const std::size_t n = logits.dim(2);
    ClassMap out(logits.dim(0), logits.dim(1));
    for (std::size_t p = 0; p < out.size(); ++p) {
        const double* z = logits.raw() + p * n;
        std::size_t best = 0;
        for (std::size_t c = 1; c < n; ++c)
            if (z[c] > z[best]) best = c;
        out.labels()[p] = static_cast<std::uint8_t>(best);
    }
    return out;
}

}  // namespace intrakd
