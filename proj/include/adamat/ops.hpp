#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "adamat/autograd.hpp"
#include "adamat/tensor.hpp"

namespace adamat::ops {

struct Conv2dOptions {
    int stride = 1;
    int pad_h = 0;
    int pad_w = 0;
};

/// Cross-correlation of x[N,C,H,W] with kernel[O,C,kh,kw] plus bias[O], zero padding.
/// A default-constructed `bias` means no bias term.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> kernel, Var<T> bias, Conv2dOptions opt);

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> kernel, Var<T> bias, int stride, int padding) {
    return conv2d(x, kernel, bias, Conv2dOptions{stride, padding, padding});
}

/// Depth-to-space: [N, C*r*r, H, W] -> [N, C, H*r, W*r].
template <typename T>
Var<T> pixel_shuffle(Var<T> x, int r);

/// Space-to-depth, the exact inverse of pixel_shuffle.
template <typename T>
Var<T> pixel_unshuffle(Var<T> x, int r);

template <typename T>
Var<T> upsample_nearest(Var<T> x, int factor);

template <typename T>
Var<T> relu(Var<T> x);
template <typename T>
Var<T> sigmoid(Var<T> x);
template <typename T>
Var<T> tanh(Var<T> x);
template <typename T>
Var<T> exp(Var<T> x);
/// Softmax along axis 1 of a tensor of rank >= 2.
template <typename T>
Var<T> softmax_channel(Var<T> x);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> sub(Var<T> a, Var<T> b);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> scale(Var<T> x, T s);
template <typename T>
Var<T> add_scalar(Var<T> x, T s);
template <typename T>
Var<T> sum(Var<T> x);
template <typename T>
Var<T> mean(Var<T> x);

/// Concatenate along axis 1. All other extents must agree.
template <typename T>
Var<T> concat_channels(std::span<const Var<T>> xs);
/// Channels [begin, end) along axis 1.
template <typename T>
Var<T> slice_channels(Var<T> x, std::size_t begin, std::size_t end);

template <typename T>
struct BatchNormState {
    Tensor<T> running_mean;
    Tensor<T> running_var;
};

struct BatchNormOptions {
    bool train = true;
    double eps = 1e-5;
    double momentum = 0.1;
};

/// Per-channel normalization over (N, H, W). Train mode uses batch moments and
/// updates `state`; eval mode uses the running moments.
template <typename T>
Var<T> batch_norm2d(Var<T> x, Var<T> gamma, Var<T> beta, BatchNormState<T>& state, BatchNormOptions opt);

/// Mean 3-class (or C-class) cross-entropy of logits[N,C,H,W] against integer labels in [0, C).
template <typename T>
Var<T> cross_entropy_channel(Var<T> logits, std::span<const std::uint8_t> labels);

/// (1/|mask|) * sum_{mask} |pred - target|. Returns a zero scalar for an empty mask.
template <typename T>
Var<T> masked_l1_mean(Var<T> pred, const Tensor<T>& target, std::span<const std::uint8_t> mask);

}  // namespace adamat::ops
