// Kernel benchmark: the OpenMP production kernels against the serial naive
// reference. The timing ratio mixes loop structure and threading (on a
// single core it is all loop structure); the diff column keeps the two
// implementations honest against each other.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "clenet/layers.hpp"
#include "clenet/ref_layers.hpp"
#include "clenet/rng.hpp"

using namespace clenet;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = float(rng.next_uniform(-1, 1));
  return t;
}

// Largest elementwise difference, scaled by the reference magnitude.
double max_rel_diff(const Tensor& a, const Tensor& ref) {
  double diff = 0, scale = 1;
  for (int64_t i = 0; i < a.numel(); ++i) {
    diff = std::max(diff, std::abs(double(a[i]) - double(ref[i])));
    scale = std::max(scale, std::abs(double(ref[i])));
  }
  return diff / scale;
}

template <typename F>
double time_best_ms(F&& fn, int reps = 3) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best,
                    std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const std::string& name, double ref_ms, double kernel_ms,
            double diff) {
  std::printf("%-18s reference %9.2f ms   kernel %9.2f ms   ratio %6.2fx   "
              "max rel diff %.3g\n",
              name.c_str(), ref_ms, kernel_ms, ref_ms / kernel_ms, diff);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif

  Rng rng(7, streams::kInit);
  const int64_t N = 8, C = 16, H = 64, W = 64, O = 32, K = 3;
  Tensor input = random_tensor({N, C, H, W}, rng);
  Tensor weights = random_tensor({O, C, K, K}, rng);
  Tensor bias = random_tensor({O}, rng);

  // conv forward
  Tensor out_omp, out_ref;
  const double conv_omp = time_best_ms(
      [&] { out_omp = conv_forward(input, weights, bias, 1, 1); });
  const double conv_ref = time_best_ms(
      [&] { out_ref = ref::conv_forward(input, weights, bias, 1, 1); });
  report("conv_forward", conv_ref, conv_omp, max_rel_diff(out_omp, out_ref));

  // conv backward
  Tensor gout = random_tensor(out_omp.shape(), rng);
  ConvGradsT<float> g_omp, g_ref;
  const double convb_omp = time_best_ms(
      [&] { g_omp = conv_backward(input, weights, 1, 1, gout); });
  const double convb_ref = time_best_ms(
      [&] { g_ref = ref::conv_backward(input, weights, 1, 1, gout); });
  report("conv_backward", convb_ref, convb_omp,
         std::max({max_rel_diff(g_omp.input, g_ref.input),
                   max_rel_diff(g_omp.weights, g_ref.weights),
                   max_rel_diff(g_omp.bias, g_ref.bias)}));

  // max pooling
  PoolParams pool{2, 2, 0};
  PoolResultT<float> p_omp, p_ref;
  const double pool_omp = time_best_ms([&] { p_omp = maxpool_forward(input, pool); });
  const double pool_ref =
      time_best_ms([&] { p_ref = ref::maxpool_forward(input, pool); });
  report("maxpool_forward", pool_ref, pool_omp,
         max_rel_diff(p_omp.output, p_ref.output));

  // lrn
  LrnParams lrn;
  Tensor l_omp, l_ref;
  const double lrn_omp = time_best_ms([&] { l_omp = lrn_forward(input, lrn); });
  const double lrn_ref =
      time_best_ms([&] { l_ref = ref::lrn_forward(input, lrn); });
  report("lrn_forward", lrn_ref, lrn_omp, max_rel_diff(l_omp, l_ref));

  // fully connected
  const int64_t D = 4096, Kfc = 256, Nfc = 64;
  Tensor x = random_tensor({Nfc, D}, rng);
  Tensor Wfc = random_tensor({D, Kfc}, rng);
  Tensor bfc = random_tensor({Kfc}, rng);
  Tensor y_omp, y_ref;
  const double fc_omp = time_best_ms([&] { y_omp = fc_forward(x, Wfc, bfc); });
  const double fc_ref =
      time_best_ms([&] { y_ref = ref::fc_forward(x, Wfc, bfc); });
  report("fc_forward", fc_ref, fc_omp, max_rel_diff(y_omp, y_ref));

  // relu
  Tensor r_omp, r_ref;
  const double relu_omp = time_best_ms([&] { r_omp = relu_forward(input); });
  const double relu_ref =
      time_best_ms([&] { r_ref = ref::relu_forward(input); });
  report("relu_forward", relu_ref, relu_omp, max_rel_diff(r_omp, r_ref));

  return 0;
}
