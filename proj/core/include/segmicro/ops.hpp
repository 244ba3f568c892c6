#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "segmicro/tensor.hpp"

namespace segmicro {

// Learnable parameters of a convolution or transposed convolution.
//
// For conv2d the kernel tensor is read as (kh, kw, in_channels, out_channels);
// for transposed_conv2d it is read in scatter orientation
// (kh, kw, out_channels, in_channels). The bias always exists and has one
// entry per output channel.
template <typename T>
struct ConvParams {
  Tensor4<T> kernel;
  std::vector<T> bias;

  int kh() const { return kernel.shape().batch; }
  int kw() const { return kernel.shape().height; }

  std::int64_t learnable_count() const {
    return kernel.shape().volume() + static_cast<std::int64_t>(bias.size());
  }

  template <typename U>
  ConvParams<U> cast() const {
    ConvParams<U> out;
    out.kernel = kernel.template cast<U>();
    out.bias.assign(bias.begin(), bias.end());
    return out;
  }
};

// Gradients of one conv/deconv layer plus the gradient w.r.t. its input.
template <typename T>
struct ConvGrads {
  Tensor4<T> input;
  Tensor4<T> kernel;
  std::vector<T> bias;
};

// Argmax bookkeeping for the max-pool backward pass. `argmax` holds, per
// output element, the flat index of the winning input element (ties broken
// toward the lowest flat index).
struct PoolIndices {
  Shape4 input_shape;
  Shape4 output_shape;
  std::vector<std::int64_t> argmax;
};

// "Same" padding on the leading side for a stride-1 convolution: (k-1)/2 for
// odd k, floor for even k (the remainder pads the trailing side).
inline int same_pad_before(int k) { return (k - 1) / 2; }

// Leading padding of the stride-2 convolution whose adjoint is
// transposed_conv2d: floor(max(k-2, 0) / 2).
inline int deconv_pad_before(int k) { return (k > 2) ? (k - 2) / 2 : 0; }

// Stride-1 zero-padded cross-correlation plus bias; output spatial dims equal
// the input's ("same" padding).
template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& input, const ConvParams<T>& params);

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input,
                             const ConvParams<T>& params,
                             const Tensor4<T>& upstream);

template <typename T>
Tensor4<T> relu(const Tensor4<T>& input);

// Passes upstream gradient where input > 0; the subgradient at 0 is 0.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& input, const Tensor4<T>& upstream);

// 2x2 max pooling with stride 2 and "same" padding: output spatial dims are
// ceil(input/2); boundary windows may cover fewer than four cells.
template <typename T>
std::pair<Tensor4<T>, PoolIndices> maxpool2(const Tensor4<T>& input);

template <typename T>
Tensor4<T> maxpool2_backward(const PoolIndices& indices,
                             const Tensor4<T>& upstream);

// Fractional-stride (stride-2) transposed convolution plus bias; output
// spatial dims are exactly twice the input's. No activation is applied.
template <typename T>
Tensor4<T> transposed_conv2d(const Tensor4<T>& input,
                             const ConvParams<T>& params);

template <typename T>
ConvGrads<T> transposed_conv2d_backward(const Tensor4<T>& input,
                                        const ConvParams<T>& params,
                                        const Tensor4<T>& upstream);

// Concatenates along the channel axis; a's channels come first.
template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b);

// Splits an upstream gradient back into the two concat operands.
template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> concat_channels_backward(
    const Tensor4<T>& upstream, int a_channels);

// Per-pixel softmax over the channel axis, computed with max subtraction.
template <typename T>
Tensor4<T> softmax_channels(const Tensor4<T>& logits);

// Full softmax Jacobian-vector product (not the fused cross-entropy form).
template <typename T>
Tensor4<T> softmax_channels_backward(const Tensor4<T>& probs,
                                     const Tensor4<T>& upstream);

}  // namespace segmicro
