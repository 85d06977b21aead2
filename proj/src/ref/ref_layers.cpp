#include "clenet/ref_layers.hpp"

#include <algorithm>

#include "clenet/error.hpp"

namespace clenet::ref {

template <typename T>
TensorT<T> conv_forward(const TensorT<T>& input, const TensorT<T>& weights,
                        const TensorT<T>& bias, int64_t stride, int64_t pad) {
  const int64_t N = input.extent(0), C = input.extent(1), H = input.extent(2),
                W = input.extent(3);
  const int64_t O = weights.extent(0), kh = weights.extent(2),
                kw = weights.extent(3);
  const int64_t Ho = conv_out_extent(H, pad, kh, stride);
  const int64_t Wo = conv_out_extent(W, pad, kw, stride);
  TensorT<T> out({N, O, Ho, Wo});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t o = 0; o < O; ++o)
      for (int64_t y = 0; y < Ho; ++y)
        for (int64_t x = 0; x < Wo; ++x) {
          T acc = bias[o];
          for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < kh; ++i)
              for (int64_t j = 0; j < kw; ++j) {
                const int64_t iy = y * stride - pad + i;
                const int64_t ix = x * stride - pad + j;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += weights.at({o, c, i, j}) * input.at({n, c, iy, ix});
              }
          out.at({n, o, y, x}) = acc;
        }
  return out;
}

template <typename T>
ConvGradsT<T> conv_backward(const TensorT<T>& input, const TensorT<T>& weights,
                            int64_t stride, int64_t pad,
                            const TensorT<T>& grad_out) {
  const int64_t N = input.extent(0), C = input.extent(1), H = input.extent(2),
                W = input.extent(3);
  const int64_t O = weights.extent(0), kh = weights.extent(2),
                kw = weights.extent(3);
  const int64_t Ho = grad_out.extent(2), Wo = grad_out.extent(3);
  ConvGradsT<T> g{TensorT<T>(input.shape()), TensorT<T>(weights.shape()),
                  TensorT<T>(Shape{O})};
  for (int64_t n = 0; n < N; ++n)
    for (int64_t o = 0; o < O; ++o)
      for (int64_t y = 0; y < Ho; ++y)
        for (int64_t x = 0; x < Wo; ++x) {
          const T go = grad_out.at({n, o, y, x});
          g.bias[o] += go;
          for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < kh; ++i)
              for (int64_t j = 0; j < kw; ++j) {
                const int64_t iy = y * stride - pad + i;
                const int64_t ix = x * stride - pad + j;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                g.weights.at({o, c, i, j}) += input.at({n, c, iy, ix}) * go;
                g.input.at({n, c, iy, ix}) += weights.at({o, c, i, j}) * go;
              }
        }
  return g;
}

template <typename T>
TensorT<T> relu_forward(const TensorT<T>& a_in) {
  TensorT<T> out(a_in.shape());
  for (int64_t i = 0; i < a_in.numel(); ++i)
    out[i] = std::max(a_in[i], T(0));
  return out;
}

template <typename T>
TensorT<T> lrn_forward(const TensorT<T>& input, const LrnParams& p) {
  const int64_t N = input.extent(0), C = input.extent(1), H = input.extent(2),
                W = input.extent(3);
  const int64_t half = p.window / 2;
  TensorT<T> out(input.shape());
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
          double ss = 0.0;
          for (int64_t m = std::max<int64_t>(0, c - half);
               m <= std::min<int64_t>(C - 1, c + half); ++m) {
            const double v = double(input.at({n, m, y, x}));
            ss += v * v;
          }
          const double denom =
              std::pow(1.0 + (p.alpha / double(p.window)) * ss, p.beta);
          out.at({n, c, y, x}) = T(double(input.at({n, c, y, x})) / denom);
        }
  return out;
}

template <typename T>
PoolResultT<T> maxpool_forward(const TensorT<T>& input, const PoolParams& p) {
  const int64_t N = input.extent(0), C = input.extent(1), H = input.extent(2),
                W = input.extent(3);
  const int64_t Ho = conv_out_extent(H, p.pad, p.window, p.stride);
  const int64_t Wo = conv_out_extent(W, p.pad, p.window, p.stride);
  PoolResultT<T> res{TensorT<T>({N, C, Ho, Wo}),
                     std::vector<int64_t>(size_t(N * C * Ho * Wo))};
  int64_t cell = 0;
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t oy = 0; oy < Ho; ++oy)
        for (int64_t ox = 0; ox < Wo; ++ox) {
          T best{};
          int64_t besti = -1;
          for (int64_t i = 0; i < p.window; ++i)
            for (int64_t j = 0; j < p.window; ++j) {
              const int64_t iy = oy * p.stride - p.pad + i;
              const int64_t ix = ox * p.stride - p.pad + j;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              const T v = input.at({n, c, iy, ix});
              if (besti < 0 || v > best) {
                best = v;
                besti = (n * C + c) * H * W + iy * W + ix;
              }
            }
          res.output[cell] = best;
          res.argmax[size_t(cell)] = besti;
          ++cell;
        }
  return res;
}

template <typename T>
TensorT<T> fc_forward(const TensorT<T>& x, const TensorT<T>& W,
                      const TensorT<T>& b) {
  const int64_t N = x.extent(0), D = x.extent(1), K = W.extent(1);
  TensorT<T> y({N, K});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t k = 0; k < K; ++k) {
      T acc = b[k];
      for (int64_t d = 0; d < D; ++d) acc += x.at({n, d}) * W.at({d, k});
      y.at({n, k}) = acc;
    }
  return y;
}

#define CLENET_REF_INSTANTIATE(T)                                             \
  template TensorT<T> conv_forward<T>(const TensorT<T>&, const TensorT<T>&,  \
                                      const TensorT<T>&, int64_t, int64_t);  \
  template ConvGradsT<T> conv_backward<T>(const TensorT<T>&,                 \
                                          const TensorT<T>&, int64_t,        \
                                          int64_t, const TensorT<T>&);       \
  template TensorT<T> relu_forward<T>(const TensorT<T>&);                    \
  template TensorT<T> lrn_forward<T>(const TensorT<T>&, const LrnParams&);   \
  template PoolResultT<T> maxpool_forward<T>(const TensorT<T>&,              \
                                             const PoolParams&);             \
  template TensorT<T> fc_forward<T>(const TensorT<T>&, const TensorT<T>&,    \
                                    const TensorT<T>&);

CLENET_REF_INSTANTIATE(float)
CLENET_REF_INSTANTIATE(double)

#undef CLENET_REF_INSTANTIATE

}  // namespace clenet::ref
