#pragma once

#include <string>
#include <vector>

#include "clenet/rng.hpp"
#include "clenet/tensor.hpp"

// Forward/backward kernels for the layer stack. All tensors are NCHW (or
// (N,D) for fully connected inputs). The kernels are OpenMP-parallel over
// batch / output-channel dimensions; every output element has exactly one
// writer and a fixed accumulation order, so results are bit-identical for
// any thread count. Serial naive versions live in ref_layers.hpp and are
// used as oracles by the tests and the benchmark.

namespace clenet {

enum class Mode { Train, Infer };

template <typename T>
struct ConvParamsT {
  int64_t out_channels = 0;
  int64_t kernel_h = 0, kernel_w = 0;
  int64_t stride = 1;
  int64_t pad = 0;
  TensorT<T> weights;  // (out, in, kh, kw)
  TensorT<T> bias;     // (out)
};
using ConvParams = ConvParamsT<float>;
using ConvParamsD = ConvParamsT<double>;

struct LrnParams {
  int64_t window = 5;  // channel neighborhood size L, odd
  double alpha = 1.0;
  double beta = 0.75;
};

struct PoolParams {
  int64_t window = 2;
  int64_t stride = 2;
  int64_t pad = 0;  // padded cells never win the max
};

template <typename T>
struct DropoutStateT {
  double ratio = 0.5;
  Mode mode = Mode::Train;
  TensorT<T> mask;  // 0/1 per element, regenerated every training step
};
using DropoutState = DropoutStateT<float>;

template <typename T>
struct LossBatchT {
  TensorT<T> logits;   // (N, C)
  TensorT<T> targets;  // (N, C) one-hot rows
};
using LossBatch = LossBatchT<float>;

inline int64_t conv_out_extent(int64_t in, int64_t pad, int64_t k,
                               int64_t stride) {
  return (in + 2 * pad - k) / stride + 1;
}

// ---- convolution -----------------------------------------------------------

template <typename T>
TensorT<T> conv_forward(const TensorT<T>& input, const TensorT<T>& weights,
                        const TensorT<T>& bias, int64_t stride, int64_t pad,
                        const std::string& layer_id = "conv");

template <typename T>
struct ConvGradsT {
  TensorT<T> input;
  TensorT<T> weights;
  TensorT<T> bias;
};

template <typename T>
ConvGradsT<T> conv_backward(const TensorT<T>& input, const TensorT<T>& weights,
                            int64_t stride, int64_t pad,
                            const TensorT<T>& grad_out,
                            const std::string& layer_id = "conv");

template <typename T>
TensorT<T> conv_forward(const TensorT<T>& input, const ConvParamsT<T>& p,
                        const std::string& layer_id = "conv") {
  return conv_forward(input, p.weights, p.bias, p.stride, p.pad, layer_id);
}

template <typename T>
ConvGradsT<T> conv_backward(const TensorT<T>& input, const ConvParamsT<T>& p,
                            const TensorT<T>& grad_out,
                            const std::string& layer_id = "conv") {
  return conv_backward(input, p.weights, p.stride, p.pad, grad_out, layer_id);
}

// ---- relu ------------------------------------------------------------------

// max(a,0) elementwise; the backward subgradient at exactly 0 is 0.
template <typename T>
TensorT<T> relu_forward(const TensorT<T>& a_in);

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& a_in, const TensorT<T>& grad_out);

// ---- local response normalization ------------------------------------------

// out[c] = a[c] / (1 + (alpha/L) * sum_{m in window(c)} a[m]^2)^beta, with the
// channel window truncated at the borders while L in the divisor stays fixed.
template <typename T>
TensorT<T> lrn_forward(const TensorT<T>& input, const LrnParams& p);

template <typename T>
TensorT<T> lrn_backward(const TensorT<T>& input, const LrnParams& p,
                        const TensorT<T>& grad_out);

// ---- max pooling -------------------------------------------------------------

template <typename T>
struct PoolResultT {
  TensorT<T> output;
  std::vector<int64_t> argmax;  // flat index into the input, per output cell
};

// Ties break toward the lowest flat index (row-major scan order).
template <typename T>
PoolResultT<T> maxpool_forward(const TensorT<T>& input, const PoolParams& p,
                               const std::string& layer_id = "pool");

// Routes each grad element to its stored argmax, summing on collision.
template <typename T>
TensorT<T> maxpool_backward(const Shape& input_shape,
                            const std::vector<int64_t>& argmax,
                            const TensorT<T>& grad_out);

// ---- fully connected ---------------------------------------------------------

// y = x W + b with x (N,D), W (D,K), b (K).
template <typename T>
TensorT<T> fc_forward(const TensorT<T>& x, const TensorT<T>& W,
                      const TensorT<T>& b, const std::string& layer_id = "fc");

template <typename T>
struct FcGradsT {
  TensorT<T> input;
  TensorT<T> weights;
  TensorT<T> bias;
};

template <typename T>
FcGradsT<T> fc_backward(const TensorT<T>& x, const TensorT<T>& W,
                        const TensorT<T>& grad_out,
                        const std::string& layer_id = "fc");

// ---- dropout ---------------------------------------------------------------

// Inverted dropout: survivors scale by 1/(1-p) in train mode, inference is
// the identity. p=1 yields an all-zero output with no division.
template <typename T>
TensorT<T> dropout_forward(const TensorT<T>& input, DropoutStateT<T>& state,
                           Rng& rng);

template <typename T>
TensorT<T> dropout_backward(const DropoutStateT<T>& state,
                            const TensorT<T>& grad_out);

// ---- softmax loss ------------------------------------------------------------

template <typename T>
struct SoftmaxLossT {
  double loss = 0.0;
  TensorT<T> grad_logits;  // (softmax - target) / N
};

// Mean cross-entropy over the batch, computed with max-subtraction. Row
// internals run in double regardless of T.
template <typename T>
SoftmaxLossT<T> softmax_loss(const LossBatchT<T>& batch);

}  // namespace clenet
