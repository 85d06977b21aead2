#include "clenet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "clenet/error.hpp"

namespace clenet {

namespace {

// col[(c*kh+i)*kw+j][y*Wo+x] = padded input patch element. Zero-fill where the
// receptive field leaves the image.
template <typename T>
void im2col(const T* im, int64_t C, int64_t H, int64_t W, int64_t kh,
            int64_t kw, int64_t stride, int64_t pad, int64_t Ho, int64_t Wo,
            T* col) {
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t i = 0; i < kh; ++i) {
      for (int64_t j = 0; j < kw; ++j) {
        T* dst = col + ((c * kh + i) * kw + j) * (Ho * Wo);
        for (int64_t y = 0; y < Ho; ++y) {
          int64_t iy = y * stride - pad + i;
          if (iy < 0 || iy >= H) {
            for (int64_t x = 0; x < Wo; ++x) *dst++ = T(0);
            continue;
          }
          const T* src = im + (c * H + iy) * W;
          for (int64_t x = 0; x < Wo; ++x) {
            int64_t ix = x * stride - pad + j;
            *dst++ = (ix >= 0 && ix < W) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Scatter-add of a column buffer back into one image.
template <typename T>
void col2im_acc(const T* col, int64_t C, int64_t H, int64_t W, int64_t kh,
                int64_t kw, int64_t stride, int64_t pad, int64_t Ho,
                int64_t Wo, T* im) {
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t i = 0; i < kh; ++i) {
      for (int64_t j = 0; j < kw; ++j) {
        const T* src = col + ((c * kh + i) * kw + j) * (Ho * Wo);
        for (int64_t y = 0; y < Ho; ++y) {
          int64_t iy = y * stride - pad + i;
          if (iy < 0 || iy >= H) {
            src += Wo;
            continue;
          }
          T* dst = im + (c * H + iy) * W;
          for (int64_t x = 0; x < Wo; ++x) {
            int64_t ix = x * stride - pad + j;
            if (ix >= 0 && ix < W) dst[ix] += src[x];
          }
          src += Wo;
        }
      }
    }
  }
}

template <typename T>
void check_conv_shapes(const TensorT<T>& input, const TensorT<T>& weights,
                       int64_t stride, int64_t pad,
                       const std::string& layer_id, int64_t& N, int64_t& C,
                       int64_t& H, int64_t& W, int64_t& O, int64_t& kh,
                       int64_t& kw, int64_t& Ho, int64_t& Wo) {
  if (input.rank() != 4)
    throw ShapeError(layer_id + ": expected NCHW input, got shape " +
                     shape_str(input.shape()));
  if (weights.rank() != 4)
    throw ShapeError(layer_id + ": expected (out,in,kh,kw) weights, got " +
                     shape_str(weights.shape()));
  N = input.extent(0);
  C = input.extent(1);
  H = input.extent(2);
  W = input.extent(3);
  O = weights.extent(0);
  kh = weights.extent(2);
  kw = weights.extent(3);
  if (weights.extent(1) != C)
    throw ShapeError(layer_id + ": input has " + std::to_string(C) +
                     " channels but weights expect " +
                     std::to_string(weights.extent(1)));
  if (stride < 1 || pad < 0 || kh < 1 || kw < 1)
    throw ShapeError(layer_id + ": invalid kernel/stride/pad");
  Ho = conv_out_extent(H, pad, kh, stride);
  Wo = conv_out_extent(W, pad, kw, stride);
  if (Ho < 1 || Wo < 1)
    throw ShapeError(layer_id + ": output extent collapses to zero for input " +
                     shape_str(input.shape()));
}

}  // namespace

template <typename T>
TensorT<T> conv_forward(const TensorT<T>& input, const TensorT<T>& weights,
                        const TensorT<T>& bias, int64_t stride, int64_t pad,
                        const std::string& layer_id) {
  int64_t N, C, H, W, O, kh, kw, Ho, Wo;
  check_conv_shapes(input, weights, stride, pad, layer_id, N, C, H, W, O, kh,
                    kw, Ho, Wo);
  if (bias.numel() != O)
    throw ShapeError(layer_id + ": bias length " + std::to_string(bias.numel()) +
                     " != out channels " + std::to_string(O));

  const int64_t ckk = C * kh * kw;
  const int64_t hw = Ho * Wo;
  TensorT<T> out({N, O, Ho, Wo});
  const T* in = input.data();
  const T* w = weights.data();
  const T* b = bias.data();
  T* o = out.data();

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t n = 0; n < N; ++n) {
    std::vector<T> col(size_t(ckk * hw));
    im2col(in + n * C * H * W, C, H, W, kh, kw, stride, pad, Ho, Wo,
           col.data());
    T* on = o + n * O * hw;
    for (int64_t oc = 0; oc < O; ++oc) {
      T* row = on + oc * hw;
      std::fill(row, row + hw, b[oc]);
      const T* wrow = w + oc * ckk;
      // r ascends through (c,i,j): the same accumulation order as the naive
      // loop nest, so results match the serial reference bit for bit.
      for (int64_t r = 0; r < ckk; ++r) {
        const T wv = wrow[r];
        const T* crow = col.data() + r * hw;
        for (int64_t p = 0; p < hw; ++p) row[p] += wv * crow[p];
      }
    }
  }
  return out;
}

template <typename T>
ConvGradsT<T> conv_backward(const TensorT<T>& input, const TensorT<T>& weights,
                            int64_t stride, int64_t pad,
                            const TensorT<T>& grad_out,
                            const std::string& layer_id) {
  int64_t N, C, H, W, O, kh, kw, Ho, Wo;
  check_conv_shapes(input, weights, stride, pad, layer_id, N, C, H, W, O, kh,
                    kw, Ho, Wo);
  if (grad_out.shape() != Shape{N, O, Ho, Wo})
    throw ShapeError(layer_id + ": grad_out shape " +
                     shape_str(grad_out.shape()) + " != forward output " +
                     shape_str({N, O, Ho, Wo}));

  const int64_t ckk = C * kh * kw;
  const int64_t hw = Ho * Wo;
  ConvGradsT<T> g{TensorT<T>(input.shape()), TensorT<T>(weights.shape()),
                  TensorT<T>(Shape{O})};
  const T* in = input.data();
  const T* w = weights.data();
  const T* go = grad_out.data();

  // Bias: one owner per output channel, batch-major accumulation.
  T* gb = g.bias.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t oc = 0; oc < O; ++oc) {
    T acc = T(0);
    for (int64_t n = 0; n < N; ++n) {
      const T* row = go + (n * O + oc) * hw;
      for (int64_t p = 0; p < hw; ++p) acc += row[p];
    }
    gb[oc] = acc;
  }

  // Input gradient: each image owned by one thread, gathered as W^T * gout
  // in column space then scattered with col2im.
  T* gi = g.input.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t n = 0; n < N; ++n) {
    std::vector<T> gcol(size_t(ckk * hw), T(0));
    const T* gon = go + n * O * hw;
    for (int64_t r = 0; r < ckk; ++r) {
      T* grow = gcol.data() + r * hw;
      for (int64_t oc = 0; oc < O; ++oc) {
        const T wv = w[oc * ckk + r];
        const T* gr = gon + oc * hw;
        for (int64_t p = 0; p < hw; ++p) grow[p] += wv * gr[p];
      }
    }
    col2im_acc(gcol.data(), C, H, W, kh, kw, stride, pad, Ho, Wo,
               gi + n * C * H * W);
  }

  // Weight gradient: serial over the batch, parallel over output channels;
  // for any (oc,r) the accumulation order is n-ascending then p-ascending.
  T* gw = g.weights.data();
  std::vector<T> col(size_t(ckk * hw));
  for (int64_t n = 0; n < N; ++n) {
    im2col(in + n * C * H * W, C, H, W, kh, kw, stride, pad, Ho, Wo,
           col.data());
    const T* gon = go + n * O * hw;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t oc = 0; oc < O; ++oc) {
      const T* gr = gon + oc * hw;
      T* gwrow = gw + oc * ckk;
      for (int64_t r = 0; r < ckk; ++r) {
        const T* crow = col.data() + r * hw;
        T acc = T(0);
        for (int64_t p = 0; p < hw; ++p) acc += gr[p] * crow[p];
        gwrow[r] += acc;
      }
    }
  }
  return g;
}

// ---- relu ------------------------------------------------------------------

template <typename T>
TensorT<T> relu_forward(const TensorT<T>& a_in) {
  TensorT<T> out(a_in.shape());
  const T* in = a_in.data();
  T* o = out.data();
  const int64_t n = a_in.numel();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t i = 0; i < n; ++i) o[i] = in[i] > T(0) ? in[i] : T(0);
  return out;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& a_in, const TensorT<T>& grad_out) {
  if (!a_in.same_shape(grad_out))
    throw ShapeError("relu: grad_out shape " + shape_str(grad_out.shape()) +
                     " != input shape " + shape_str(a_in.shape()));
  TensorT<T> out(a_in.shape());
  const T* in = a_in.data();
  const T* go = grad_out.data();
  T* o = out.data();
  const int64_t n = a_in.numel();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t i = 0; i < n; ++i) o[i] = in[i] > T(0) ? go[i] : T(0);
  return out;
}

// ---- lrn -------------------------------------------------------------------

namespace {
void check_lrn(const LrnParams& p) {
  if (p.window < 1 || p.window % 2 == 0)
    throw ConfigError("lrn: window must be odd and >= 1, got " +
                      std::to_string(p.window));
}
}  // namespace

template <typename T>
TensorT<T> lrn_forward(const TensorT<T>& input, const LrnParams& p) {
  check_lrn(p);
  if (input.rank() != 4)
    throw ShapeError("lrn: expected NCHW input, got " +
                     shape_str(input.shape()));
  const int64_t N = input.extent(0), C = input.extent(1), H = input.extent(2),
                W = input.extent(3);
  const int64_t half = p.window / 2;
  const double scale = p.alpha / double(p.window);
  TensorT<T> out(input.shape());
  const T* in = input.data();
  T* o = out.data();
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const int64_t lo = std::max<int64_t>(0, c - half);
      const int64_t hi = std::min<int64_t>(C - 1, c + half);
      const T* base = in + n * C * H * W;
      T* orow = o + (n * C + c) * H * W;
      const T* crow = base + c * H * W;
      for (int64_t s = 0; s < H * W; ++s) {
        double ss = 0.0;
        for (int64_t m = lo; m <= hi; ++m) {
          const double v = double(base[m * H * W + s]);
          ss += v * v;
        }
        orow[s] = T(double(crow[s]) / std::pow(1.0 + scale * ss, p.beta));
      }
    }
  }
  return out;
}

template <typename T>
TensorT<T> lrn_backward(const TensorT<T>& input, const LrnParams& p,
                        const TensorT<T>& grad_out) {
  check_lrn(p);
  if (!input.same_shape(grad_out))
    throw ShapeError("lrn: grad_out shape " + shape_str(grad_out.shape()) +
                     " != input shape " + shape_str(input.shape()));
  const int64_t N = input.extent(0), C = input.extent(1), H = input.extent(2),
                W = input.extent(3);
  const int64_t half = p.window / 2;
  const double scale = p.alpha / double(p.window);
  TensorT<T> out(input.shape());
  const T* in = input.data();
  const T* go = grad_out.data();
  T* gi = out.data();
  // d out_c / d a_k = delta_ck * S_c^-b - 2b*scale * a_c * a_k * S_c^-(b+1)
  // for k in window(c); windows are symmetric, so sum over c in window(k).
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t n = 0; n < N; ++n) {
    std::vector<double> denom(static_cast<size_t>(C));
    std::vector<double> wsum(static_cast<size_t>(C));
    const T* base = in + n * C * H * W;
    const T* gbase = go + n * C * H * W;
    T* obase = gi + n * C * H * W;
    for (int64_t s = 0; s < H * W; ++s) {
      for (int64_t c = 0; c < C; ++c) {
        const int64_t lo = std::max<int64_t>(0, c - half);
        const int64_t hi = std::min<int64_t>(C - 1, c + half);
        double ss = 0.0;
        for (int64_t m = lo; m <= hi; ++m) {
          const double v = double(base[m * H * W + s]);
          ss += v * v;
        }
        denom[size_t(c)] = 1.0 + scale * ss;
        wsum[size_t(c)] = double(gbase[c * H * W + s]) *
                          double(base[c * H * W + s]) *
                          std::pow(denom[size_t(c)], -p.beta - 1.0);
      }
      for (int64_t k = 0; k < C; ++k) {
        const int64_t lo = std::max<int64_t>(0, k - half);
        const int64_t hi = std::min<int64_t>(C - 1, k + half);
        double acc = 0.0;
        for (int64_t c = lo; c <= hi; ++c) acc += wsum[size_t(c)];
        const double direct = double(gbase[k * H * W + s]) *
                              std::pow(denom[size_t(k)], -p.beta);
        obase[k * H * W + s] =
            T(direct - 2.0 * p.beta * scale * double(base[k * H * W + s]) * acc);
      }
    }
  }
  return out;
}

// ---- max pooling -------------------------------------------------------------

template <typename T>
PoolResultT<T> maxpool_forward(const TensorT<T>& input, const PoolParams& p,
                               const std::string& layer_id) {
  if (input.rank() != 4)
    throw ShapeError(layer_id + ": expected NCHW input, got " +
                     shape_str(input.shape()));
  const int64_t N = input.extent(0), C = input.extent(1), H = input.extent(2),
                W = input.extent(3);
  if (p.window < 1 || p.stride < 1 || p.pad < 0 || p.pad >= p.window)
    throw ShapeError(layer_id + ": invalid pool window/stride/pad");
  if (p.window > H || p.window > W)
    throw ShapeError(layer_id + ": pool window " + std::to_string(p.window) +
                     " larger than input " + shape_str(input.shape()));
  const int64_t Ho = conv_out_extent(H, p.pad, p.window, p.stride);
  const int64_t Wo = conv_out_extent(W, p.pad, p.window, p.stride);
  PoolResultT<T> res{TensorT<T>({N, C, Ho, Wo}),
                     std::vector<int64_t>(size_t(N * C * Ho * Wo))};
  const T* in = input.data();
  T* o = res.output.data();
  int64_t* am = res.argmax.data();
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const int64_t plane = (n * C + c) * H * W;
      const T* pl = in + plane;
      T* orow = o + (n * C + c) * Ho * Wo;
      int64_t* arow = am + (n * C + c) * Ho * Wo;
      for (int64_t oy = 0; oy < Ho; ++oy) {
        for (int64_t ox = 0; ox < Wo; ++ox) {
          const int64_t y0 = oy * p.stride - p.pad;
          const int64_t x0 = ox * p.stride - p.pad;
          T best{};
          int64_t besti = -1;
          for (int64_t i = std::max<int64_t>(0, y0);
               i < std::min(H, y0 + p.window); ++i) {
            for (int64_t j = std::max<int64_t>(0, x0);
                 j < std::min(W, x0 + p.window); ++j) {
              const T v = pl[i * W + j];
              if (besti < 0 || v > best) {
                best = v;
                besti = i * W + j;
              }
            }
          }
          orow[oy * Wo + ox] = best;
          arow[oy * Wo + ox] = plane + besti;
        }
      }
    }
  }
  return res;
}

template <typename T>
TensorT<T> maxpool_backward(const Shape& input_shape,
                            const std::vector<int64_t>& argmax,
                            const TensorT<T>& grad_out) {
  if (int64_t(argmax.size()) != grad_out.numel())
    throw ShapeError("pool: argmax count " + std::to_string(argmax.size()) +
                     " != grad_out elements " +
                     std::to_string(grad_out.numel()));
  TensorT<T> gi(input_shape);
  const int64_t N = input_shape[0], C = input_shape[1];
  const int64_t planes = N * C;
  const int64_t out_per_plane = grad_out.numel() / planes;
  const T* go = grad_out.data();
  T* g = gi.data();
  // Argmax indices stay inside their own (n,c) plane: one writer per plane.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t pl = 0; pl < planes; ++pl) {
    const int64_t base = pl * out_per_plane;
    for (int64_t i = 0; i < out_per_plane; ++i)
      g[argmax[size_t(base + i)]] += go[base + i];
  }
  return gi;
}

// ---- fully connected ---------------------------------------------------------

template <typename T>
TensorT<T> fc_forward(const TensorT<T>& x, const TensorT<T>& W,
                      const TensorT<T>& b, const std::string& layer_id) {
  if (x.rank() != 2 || W.rank() != 2)
    throw ShapeError(layer_id + ": fc expects 2-d input and weights");
  const int64_t N = x.extent(0), D = x.extent(1);
  const int64_t K = W.extent(1);
  if (W.extent(0) != D)
    throw ShapeError(layer_id + ": input feature count " + std::to_string(D) +
                     " != weight rows " + std::to_string(W.extent(0)));
  if (b.numel() != K)
    throw ShapeError(layer_id + ": bias length " + std::to_string(b.numel()) +
                     " != output units " + std::to_string(K));
  TensorT<T> y({N, K});
  const T* xp = x.data();
  const T* wp = W.data();
  const T* bp = b.data();
  T* yp = y.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t n = 0; n < N; ++n) {
    T* row = yp + n * K;
    std::copy(bp, bp + K, row);
    const T* xrow = xp + n * D;
    for (int64_t d = 0; d < D; ++d) {
      const T xv = xrow[d];
      const T* wrow = wp + d * K;
      for (int64_t k = 0; k < K; ++k) row[k] += xv * wrow[k];
    }
  }
  return y;
}

template <typename T>
FcGradsT<T> fc_backward(const TensorT<T>& x, const TensorT<T>& W,
                        const TensorT<T>& grad_out,
                        const std::string& layer_id) {
  const int64_t N = x.extent(0), D = x.extent(1), K = W.extent(1);
  if (grad_out.shape() != Shape{N, K})
    throw ShapeError(layer_id + ": grad_out shape " +
                     shape_str(grad_out.shape()) + " != output shape " +
                     shape_str({N, K}));
  FcGradsT<T> g{TensorT<T>(x.shape()), TensorT<T>(W.shape()),
                TensorT<T>(Shape{K})};
  const T* xp = x.data();
  const T* wp = W.data();
  const T* go = grad_out.data();

  T* gx = g.input.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t n = 0; n < N; ++n) {
    const T* grow = go + n * K;
    T* gxrow = gx + n * D;
    for (int64_t d = 0; d < D; ++d) {
      const T* wrow = wp + d * K;
      T acc = T(0);
      for (int64_t k = 0; k < K; ++k) acc += grow[k] * wrow[k];
      gxrow[d] = acc;
    }
  }

  T* gw = g.weights.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t d = 0; d < D; ++d) {
    T* gwrow = gw + d * K;
    for (int64_t n = 0; n < N; ++n) {
      const T xv = xp[n * D + d];
      const T* grow = go + n * K;
      for (int64_t k = 0; k < K; ++k) gwrow[k] += xv * grow[k];
    }
  }

  T* gb = g.bias.data();
  for (int64_t n = 0; n < N; ++n) {
    const T* grow = go + n * K;
    for (int64_t k = 0; k < K; ++k) gb[k] += grow[k];
  }
  return g;
}

// ---- dropout ---------------------------------------------------------------

template <typename T>
TensorT<T> dropout_forward(const TensorT<T>& input, DropoutStateT<T>& state,
                           Rng& rng) {
  if (state.ratio < 0.0 || state.ratio > 1.0)
    throw ConfigError("dropout: ratio must be in [0,1], got " +
                      std::to_string(state.ratio));
  if (state.mode == Mode::Infer) return input;
  const int64_t n = input.numel();
  state.mask = TensorT<T>(input.shape());
  T* m = state.mask.data();
  // Mask draws are sequential so the stream position stays deterministic.
  for (int64_t i = 0; i < n; ++i)
    m[i] = rng.next_unit() < state.ratio ? T(0) : T(1);
  const T scale = state.ratio >= 1.0 ? T(0) : T(1.0 / (1.0 - state.ratio));
  TensorT<T> out(input.shape());
  const T* in = input.data();
  T* o = out.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t i = 0; i < n; ++i) o[i] = in[i] * m[i] * scale;
  return out;
}

template <typename T>
TensorT<T> dropout_backward(const DropoutStateT<T>& state,
                            const TensorT<T>& grad_out) {
  if (state.mode == Mode::Infer) return grad_out;
  if (!state.mask.same_shape(grad_out))
    throw ShapeError("dropout: grad_out shape " +
                     shape_str(grad_out.shape()) + " != mask shape " +
                     shape_str(state.mask.shape()));
  const T scale = state.ratio >= 1.0 ? T(0) : T(1.0 / (1.0 - state.ratio));
  TensorT<T> out(grad_out.shape());
  const T* go = grad_out.data();
  const T* m = state.mask.data();
  T* o = out.data();
  const int64_t n = grad_out.numel();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t i = 0; i < n; ++i) o[i] = go[i] * m[i] * scale;
  return out;
}

// ---- softmax loss ------------------------------------------------------------

template <typename T>
SoftmaxLossT<T> softmax_loss(const LossBatchT<T>& batch) {
  if (!batch.logits.same_shape(batch.targets))
    throw ShapeError("softmax_loss: logits " + shape_str(batch.logits.shape()) +
                     " vs targets " + shape_str(batch.targets.shape()));
  if (batch.logits.rank() != 2 || batch.logits.extent(1) < 2)
    throw ShapeError("softmax_loss: expected (N,C) logits with C >= 2");
  const int64_t N = batch.logits.extent(0), C = batch.logits.extent(1);
  SoftmaxLossT<T> res;
  res.grad_logits = TensorT<T>(batch.logits.shape());
  const T* z = batch.logits.data();
  const T* t = batch.targets.data();
  T* g = res.grad_logits.data();
  // One-hot validation happens before the parallel region; exceptions must
  // not escape an omp loop.
  std::vector<int64_t> hot_idx(static_cast<size_t>(N));
  for (int64_t n = 0; n < N; ++n) {
    const T* tr = t + n * C;
    int64_t hot = -1;
    bool valid = true;
    for (int64_t k = 0; k < C; ++k) {
      if (tr[k] == T(1)) {
        if (hot >= 0) valid = false;
        hot = k;
      } else if (tr[k] != T(0)) {
        valid = false;
      }
    }
    if (!valid || hot < 0)
      throw DataError("softmax_loss: target row " + std::to_string(n) +
                      " is not one-hot");
    hot_idx[size_t(n)] = hot;
  }
  std::vector<double> row_loss(static_cast<size_t>(N));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t n = 0; n < N; ++n) {
    const T* zr = z + n * C;
    const T* tr = t + n * C;
    const int64_t hot = hot_idx[size_t(n)];
    double m = double(zr[0]);
    for (int64_t k = 1; k < C; ++k) m = std::max(m, double(zr[k]));
    double sum = 0.0;
    for (int64_t k = 0; k < C; ++k) sum += std::exp(double(zr[k]) - m);
    const double lse = std::log(sum);
    for (int64_t k = 0; k < C; ++k) {
      const double p = std::exp(double(zr[k]) - m) / sum;
      g[n * C + k] = T((p - double(tr[k])) / double(N));
    }
    row_loss[size_t(n)] = m + lse - double(zr[hot]);
  }
  double acc = 0.0;
  for (int64_t n = 0; n < N; ++n) acc += row_loss[size_t(n)];
  res.loss = acc / double(N);
  return res;
}

// ---- explicit instantiations -------------------------------------------------

#define CLENET_INSTANTIATE(T)                                                  \
  template TensorT<T> conv_forward<T>(const TensorT<T>&, const TensorT<T>&,   \
                                      const TensorT<T>&, int64_t, int64_t,    \
                                      const std::string&);                    \
  template ConvGradsT<T> conv_backward<T>(const TensorT<T>&,                  \
                                          const TensorT<T>&, int64_t,         \
                                          int64_t, const TensorT<T>&,         \
                                          const std::string&);                \
  template TensorT<T> relu_forward<T>(const TensorT<T>&);                     \
  template TensorT<T> relu_backward<T>(const TensorT<T>&, const TensorT<T>&); \
  template TensorT<T> lrn_forward<T>(const TensorT<T>&, const LrnParams&);    \
  template TensorT<T> lrn_backward<T>(const TensorT<T>&, const LrnParams&,    \
                                      const TensorT<T>&);                     \
  template PoolResultT<T> maxpool_forward<T>(const TensorT<T>&,               \
                                             const PoolParams&,               \
                                             const std::string&);             \
  template TensorT<T> maxpool_backward<T>(const Shape&,                       \
                                          const std::vector<int64_t>&,        \
                                          const TensorT<T>&);                 \
  template TensorT<T> fc_forward<T>(const TensorT<T>&, const TensorT<T>&,     \
                                    const TensorT<T>&, const std::string&);   \
  template FcGradsT<T> fc_backward<T>(const TensorT<T>&, const TensorT<T>&,   \
                                      const TensorT<T>&, const std::string&); \
  template TensorT<T> dropout_forward<T>(const TensorT<T>&,                   \
                                         DropoutStateT<T>&, Rng&);            \
  template TensorT<T> dropout_backward<T>(const DropoutStateT<T>&,            \
                                          const TensorT<T>&);                 \
  template SoftmaxLossT<T> softmax_loss<T>(const LossBatchT<T>&);

CLENET_INSTANTIATE(float)
CLENET_INSTANTIATE(double)

#undef CLENET_INSTANTIATE

}  // namespace clenet
