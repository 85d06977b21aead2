#pragma once

#include "clenet/layers.hpp"

// Serial reference kernels: naive loop nests, no OpenMP, no im2col. They are
// deliberately written as direct transcriptions of the layer definitions and
// are kept independent of the production kernels so tests can use them as
// oracles and the benchmark as a baseline.

namespace clenet::ref {

template <typename T>
TensorT<T> conv_forward(const TensorT<T>& input, const TensorT<T>& weights,
                        const TensorT<T>& bias, int64_t stride, int64_t pad);

template <typename T>
ConvGradsT<T> conv_backward(const TensorT<T>& input, const TensorT<T>& weights,
                            int64_t stride, int64_t pad,
                            const TensorT<T>& grad_out);

template <typename T>
TensorT<T> relu_forward(const TensorT<T>& a_in);

template <typename T>
TensorT<T> lrn_forward(const TensorT<T>& input, const LrnParams& p);

template <typename T>
PoolResultT<T> maxpool_forward(const TensorT<T>& input, const PoolParams& p);

template <typename T>
TensorT<T> fc_forward(const TensorT<T>& x, const TensorT<T>& W,
                      const TensorT<T>& b);

}  // namespace clenet::ref
