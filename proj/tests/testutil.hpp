#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>

#include "clenet/rng.hpp"
#include "clenet/tensor.hpp"

namespace testutil {

using clenet::Rng;
using clenet::Shape;
using clenet::TensorD;
using clenet::TensorT;

template <typename T>
TensorT<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0,
                         double hi = 1.0) {
  TensorT<T> t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = T(rng.next_uniform(lo, hi));
  return t;
}

// Random values bounded away from zero, for kernels with a kink at 0.
template <typename T>
TensorT<T> random_tensor_nonzero(Shape shape, Rng& rng, double margin = 1e-2) {
  TensorT<T> t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) {
    const double mag = margin + rng.next_unit() * (1.0 - margin);
    t[i] = T(rng.next_bernoulli(0.5) ? mag : -mag);
  }
  return t;
}

template <typename T>
double max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
  double m = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

template <typename T>
double max_rel_diff(const TensorT<T>& a, const TensorT<T>& b) {
  double m = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double da = a[i], db = b[i];
    const double denom = std::max({std::abs(da), std::abs(db), 1e-8});
    m = std::max(m, std::abs(da - db) / denom);
  }
  return m;
}

template <typename T>
bool bit_equal(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape() != b.shape()) return false;
  for (int64_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

// Central finite differences on J(x) = sum(R .* f(x)) against an analytic
// gradient. f must be a pure function of x.
inline double fd_max_rel_err(
    const std::function<TensorD(const TensorD&)>& f, const TensorD& x0,
    const TensorD& analytic_grad, const TensorD& weight_r, double eps = 1e-5) {
  auto objective = [&](const TensorD& x) {
    TensorD y = f(x);
    double acc = 0;
    for (int64_t i = 0; i < y.numel(); ++i) acc += y[i] * weight_r[i];
    return acc;
  };
  double worst = 0;
  TensorD x = x0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double jp = objective(x);
    x[i] = orig - eps;
    const double jm = objective(x);
    x[i] = orig;
    const double num = (jp - jm) / (2 * eps);
    const double ana = analytic_grad[i];
    const double rel =
        std::abs(num - ana) / std::max(std::abs(num) + std::abs(ana), 1e-6);
    worst = std::max(worst, rel);
  }
  return worst;
}

// Unique scratch directory under the system temp root; removed on
// destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    namespace fs = std::filesystem;
    static int counter = 0;
    path_ = (fs::temp_directory_path() /
             ("clenet-" + tag + "-" + std::to_string(::getpid()) + "-" +
              std::to_string(counter++)))
                .string();
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (std::filesystem::path(path_) / name).string();
  }

 private:
  std::string path_;
};

}  // namespace testutil
