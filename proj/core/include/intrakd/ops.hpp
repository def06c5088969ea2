#pragma once

#include <span>

#include "intrakd/tensor.hpp"

namespace intrakd {

struct Conv2dGrads {
    Tensor input;   // h x w x cin
    Tensor kernel;  // kh x kw x cin x cout
    Tensor bias;    // cout
};

/// Direct zero-padded 2-D convolution (cross-correlation).
///
/// input: h x w x cin, kernel: kh x kw x cin x cout, bias: cout.
/// Output extents are floor((h + 2*pad - kh) / stride) + 1 (same for w).
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride, std::size_t pad);

/// Gradients of conv2d given the upstream gradient of its output.
/// Set `need_input_grad` to false to skip dInput (first layer of a network).
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& upstream, std::size_t stride,
                            std::size_t pad, bool need_input_grad = true);

Tensor relu(const Tensor& input);
/// Passes `upstream` where input > 0; the subgradient at exactly 0 is 0.
Tensor relu_backward(const Tensor& input, const Tensor& upstream);

struct LossAndGrad {
    double loss = 0.0;
    Tensor grad;
};

/// Class-weighted softmax cross-entropy over an h x w x n logit map.
///
/// loss = sum_p w[t_p] * -log softmax(z_p)[t_p] / sum_p w[t_p]
LossAndGrad weighted_softmax_ce(const Tensor& logits, const ClassMap& target, std::span<const double> class_weights);

/// Numerically stable softmax along the channel axis of an h x w x n tensor.
Tensor softmax_channels(const Tensor& logits, double temperature = 1.0);

/// Nearest-neighbour resize of an h x w (x c) tensor; source index floor(i * h / h').
Tensor resize_nearest(const Tensor& input, std::size_t out_h, std::size_t out_w);

/// Per-pixel argmax over channels of an h x w x n tensor; ties go to the lower index.
ClassMap argmax_channels(const Tensor& logits);

}  // namespace intrakd
