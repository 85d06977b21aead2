#pragma once

#include <cmath>

#include "clenet/rng.hpp"
#include "clenet/tensor.hpp"

namespace clenet {

enum class InitKind { UniformScaled, Gaussian, Constant };

struct InitScheme {
  InitKind kind = InitKind::UniformScaled;
  double param = 0.0;  // sigma for Gaussian, value for Constant

  static InitScheme uniform_scaled() { return {InitKind::UniformScaled, 0.0}; }
  static InitScheme gaussian(double sigma) {
    return {InitKind::Gaussian, sigma};
  }
  static InitScheme constant(double c) { return {InitKind::Constant, c}; }
};

// Fan counts by rank: rank 4 is conv (out,in,kh,kw) -> in*kh*kw / out*kh*kw;
// rank 2 is fully connected (d,k) -> d / k; anything else uses numel for both.
inline void fan_in_out(const Shape& shape, int64_t& fan_in, int64_t& fan_out) {
  if (shape.size() == 4) {
    fan_in = shape[1] * shape[2] * shape[3];
    fan_out = shape[0] * shape[2] * shape[3];
  } else if (shape.size() == 2) {
    fan_in = shape[0];
    fan_out = shape[1];
  } else {
    fan_in = fan_out = shape_numel(shape);
  }
}

// uniform_scaled draws from U(-b,b) with b = sqrt(6/(fan_in+fan_out)).
template <typename T>
TensorT<T> init_weights(const Shape& shape, const InitScheme& scheme,
                        Rng& rng) {
  if (shape.empty()) throw ConfigError("init_weights: empty shape");
  if (scheme.kind == InitKind::Gaussian && scheme.param <= 0.0)
    throw ConfigError("init_weights: gaussian sigma must be positive, got " +
                      std::to_string(scheme.param));
  TensorT<T> t(shape);
  switch (scheme.kind) {
    case InitKind::Constant:
      t.fill(T(scheme.param));
      break;
    case InitKind::Gaussian:
      for (int64_t i = 0; i < t.numel(); ++i)
        t[i] = T(rng.next_gaussian(scheme.param));
      break;
    case InitKind::UniformScaled: {
      int64_t fan_in = 0, fan_out = 0;
      fan_in_out(shape, fan_in, fan_out);
      double b = std::sqrt(6.0 / double(fan_in + fan_out));
      for (int64_t i = 0; i < t.numel(); ++i)
        t[i] = T(rng.next_uniform(-b, b));
      break;
    }
  }
  return t;
}

inline double uniform_scaled_bound(const Shape& shape) {
  int64_t fan_in = 0, fan_out = 0;
  fan_in_out(shape, fan_in, fan_out);
  return std::sqrt(6.0 / double(fan_in + fan_out));
}

}  // namespace clenet
