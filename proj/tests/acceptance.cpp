// Acceptance suite: one test case per release criterion, each printing a
// single PASS/FAIL line. Everything runs at desk scale on the synthetic
// generator; tolerances are fixed in code.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "clenet/data.hpp"
#include "clenet/enseval.hpp"
#include "clenet/layers.hpp"
#include "clenet/localize.hpp"
#include "clenet/network.hpp"
#include "clenet/pipeline.hpp"
#include "clenet/ref_layers.hpp"
#include "clenet/trainer.hpp"
#include "clenet/util.hpp"
#include "testutil.hpp"

using namespace clenet;
using testutil::fd_max_rel_err;
using testutil::max_rel_diff;
using testutil::random_tensor;
using testutil::TempDir;

#define ACC(cond)           \
  do {                      \
    const bool _c = (cond); \
    CHECK(_c);              \
    ok &= _c;               \
  } while (0)

namespace {

void report(int id, const char* title, bool ok) {
  std::printf("[acceptance] criterion %2d %s: %s\n", id,
              ok ? "PASS" : "FAIL", title);
  std::fflush(stdout);
}

std::string spec_file(const std::string& name) {
  return std::string(CLENET_SPEC_DIR) + "/" + name;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

RaterLabels labels_of(const std::vector<int>& v) {
  RaterLabels r;
  for (size_t i = 0; i < v.size(); ++i) {
    r.ids.push_back("img" + std::to_string(i));
    r.labels.push_back(v[i]);
  }
  return r;
}

}  // namespace

TEST_CASE("criterion 1: per-layer gradients vs central finite differences") {
  bool ok = true;
  const auto t0 = std::chrono::steady_clock::now();
  const double tol = 1e-4;

  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(9000 + seed, streams::kInit);

    // conv
    {
      ConvParamsD p;
      p.out_channels = 3;
      p.kernel_h = p.kernel_w = 3;
      p.stride = 1 + int64_t(rng.next_below(2));
      p.pad = int64_t(rng.next_below(2));
      p.weights = random_tensor<double>({3, 2, 3, 3}, rng);
      p.bias = random_tensor<double>({3}, rng);
      TensorD in = random_tensor<double>({2, 2, 6, 6}, rng);
      TensorD r = random_tensor<double>(conv_forward(in, p).shape(), rng);
      auto g = conv_backward(in, p, r);
      ACC(fd_max_rel_err([&](const TensorD& x) { return conv_forward(x, p); },
                         in, g.input, r) < tol);
      ACC(fd_max_rel_err(
              [&](const TensorD& w) {
                ConvParamsD q = p;
                q.weights = w;
                return conv_forward(in, q);
              },
              p.weights, g.weights, r) < tol);
      ACC(fd_max_rel_err(
              [&](const TensorD& b) {
                ConvParamsD q = p;
                q.bias = b;
                return conv_forward(in, q);
              },
              p.bias, g.bias, r) < tol);
    }

    // relu (inputs bounded away from the kink)
    {
      TensorD in = testutil::random_tensor_nonzero<double>({40}, rng);
      TensorD r = random_tensor<double>({40}, rng);
      TensorD gin = relu_backward(in, r);
      ACC(fd_max_rel_err([](const TensorD& x) { return relu_forward(x); }, in,
                         gin, r) < tol);
    }

    // lrn
    {
      TensorD in = random_tensor<double>({1, 6, 3, 3}, rng);
      LrnParams p;
      TensorD r = random_tensor<double>(in.shape(), rng);
      TensorD gin = lrn_backward(in, p, r);
      ACC(fd_max_rel_err([&](const TensorD& x) { return lrn_forward(x, p); },
                         in, gin, r) < tol);
    }

    // maxpool
    {
      TensorD in = random_tensor<double>({1, 2, 6, 6}, rng);
      PoolParams p{2, 2, 0};
      auto res = maxpool_forward(in, p);
      TensorD r = random_tensor<double>(res.output.shape(), rng);
      TensorD gin = maxpool_backward(in.shape(), res.argmax, r);
      ACC(fd_max_rel_err(
              [&](const TensorD& x) { return maxpool_forward(x, p).output; },
              in, gin, r) < tol);
    }

    // fully connected
    {
      TensorD x = random_tensor<double>({3, 7}, rng);
      TensorD w = random_tensor<double>({7, 4}, rng);
      TensorD b = random_tensor<double>({4}, rng);
      TensorD r = random_tensor<double>({3, 4}, rng);
      auto g = fc_backward(x, w, r);
      ACC(fd_max_rel_err([&](const TensorD& v) { return fc_forward(v, w, b); },
                         x, g.input, r) < tol);
      ACC(fd_max_rel_err([&](const TensorD& v) { return fc_forward(x, v, b); },
                         w, g.weights, r) < tol);
      ACC(fd_max_rel_err([&](const TensorD& v) { return fc_forward(x, w, v); },
                         b, g.bias, r) < tol);
    }

    // dropout: the persisted mask freezes the map into a linear function
    {
      DropoutStateT<double> st;
      st.ratio = 0.4;
      TensorD in = random_tensor<double>({50}, rng);
      Rng drop_rng(seed, streams::kDropout);
      (void)dropout_forward(in, st, drop_rng);
      TensorD r = random_tensor<double>({50}, rng);
      TensorD gin = dropout_backward(st, r);
      auto frozen = [&](const TensorD& x) {
        TensorD y(x.shape());
        const double scale = 1.0 / (1.0 - st.ratio);
        for (int64_t i = 0; i < x.numel(); ++i)
          y[i] = x[i] * st.mask[i] * scale;
        return y;
      };
      ACC(fd_max_rel_err(frozen, in, gin, r) < tol);
    }

    // softmax loss: scalar objective, gradient checked directly
    {
      TensorD logits = random_tensor<double>({3, 2}, rng, -3, 3);
      TensorD targets({3, 2});
      for (int64_t i = 0; i < 3; ++i)
        targets.at({i, int64_t(rng.next_below(2))}) = 1.0;
      auto res = softmax_loss(LossBatchT<double>{logits, targets});
      double worst = 0;
      TensorD x = logits;
      for (int64_t i = 0; i < x.numel(); ++i) {
        const double eps = 1e-5, orig = x[i];
        x[i] = orig + eps;
        const double jp = softmax_loss(LossBatchT<double>{x, targets}).loss;
        x[i] = orig - eps;
        const double jm = softmax_loss(LossBatchT<double>{x, targets}).loss;
        x[i] = orig;
        const double num = (jp - jm) / (2 * eps);
        const double ana = res.grad_logits[i];
        worst = std::max(worst,
                         std::abs(num - ana) /
                             std::max(std::abs(num) + std::abs(ana), 1e-6));
      }
      ACC(worst < tol);
    }
  }

  const double elapsed = seconds_since(t0);
  ACC(elapsed < 60.0);
  report(1, "per-layer gradient checks, 64-bit, 20 seeds, < 60 s", ok);
}

TEST_CASE("criterion 2: convolution equals the naive loop nest") {
  bool ok = true;
  Rng rng(9100, streams::kInit);
  int configs = 0;
  while (configs < 50) {
    const int64_t N = 1 + int64_t(rng.next_below(3));
    const int64_t C = 1 + int64_t(rng.next_below(4));
    const int64_t k = 1 + int64_t(rng.next_below(4));
    const int64_t stride = 1 + int64_t(rng.next_below(3));
    const int64_t pad = int64_t(rng.next_below(3));
    const int64_t H = k + int64_t(rng.next_below(10));
    const int64_t W = k + int64_t(rng.next_below(10));
    const int64_t O = 1 + int64_t(rng.next_below(5));
    Tensor in = random_tensor<float>({N, C, H, W}, rng);
    Tensor w = random_tensor<float>({O, C, k, k}, rng);
    Tensor b = random_tensor<float>({O}, rng);
    ACC(max_rel_diff(conv_forward(in, w, b, stride, pad),
                     ref::conv_forward(in, w, b, stride, pad)) <= 1e-5);
    ++configs;
  }
  ACC(configs >= 50);
  report(2, "conv_forward vs naive oracle over 50 random configs", ok);
}

TEST_CASE("criterion 3: softmax loss identities") {
  bool ok = true;
  // uniform logits -> ln 2
  {
    LossBatchT<double> b{TensorD({1, 2}), TensorD({1, 2})};
    b.targets.at({0, 0}) = 1.0;
    ACC(std::abs(softmax_loss(b).loss - std::log(2.0)) <= 1e-9);
  }
  // gradient rows sum to zero
  {
    Rng rng(9200, streams::kInit);
    TensorD logits = random_tensor<double>({20, 2}, rng, -8, 8);
    TensorD targets({20, 2});
    for (int64_t i = 0; i < 20; ++i)
      targets.at({i, int64_t(rng.next_below(2))}) = 1.0;
    auto res = softmax_loss(LossBatchT<double>{logits, targets});
    for (int64_t i = 0; i < 20; ++i)
      ACC(std::abs(res.grad_logits.at({i, 0}) + res.grad_logits.at({i, 1})) <=
          1e-9);
  }
  // extreme logit, correct class: loss ~ 0 without overflow
  {
    LossBatchT<double> b{TensorD({1, 2}), TensorD({1, 2})};
    b.logits.at({0, 0}) = 1000.0;
    b.targets.at({0, 0}) = 1.0;
    auto res = softmax_loss(b);
    ACC(res.loss >= 0.0);
    ACC(res.loss < 1e-6);
    ACC(std::isfinite(res.grad_logits[0]) && std::isfinite(res.grad_logits[1]));
    LossBatchT<float> bf{Tensor({1, 2}), Tensor({1, 2})};
    bf.logits.at({0, 0}) = 1000.0f;
    bf.targets.at({0, 0}) = 1.0f;
    ACC(softmax_loss(bf).loss < 1e-6);
  }
  report(3, "loss identities: ln 2, zero-sum gradient rows, stability", ok);
}

TEST_CASE("criterion 4: optimizer trajectory and frozen-layer immutability") {
  bool ok = true;
  // closed-form momentum trajectory, 10 steps, 1e-12
  {
    const double mu = 0.9, lr = 0.05, g = 3.0;
    TensorD w({1});
    TensorD grad({1}, {g});
    TensorD vel({1});
    for (int i = 1; i <= 10; ++i) {
      sgd_update<double>(w, grad, vel, mu, lr, 0.0);
      const double want = -lr * g * (1.0 - std::pow(mu, i)) / (1.0 - mu);
      ACC(std::abs(vel[0] - want) <= 1e-12);
    }
  }
  // full SFT training run leaves donor layers bitwise unchanged
  {
    TempDir tmp("acc-sft");
    SynthConfig scfg;
    scfg.patients = 8;
    scfg.images_min = 3;
    scfg.images_max = 4;
    scfg.image_size = 96;
    scfg.seed = 9300;
    Manifest data = generate_synthetic(scfg, tmp.path());
    auto [tr, val] = split_dev_test(data, 0.25, 9300);

    NetworkSpec spec = NetworkSpec::from_json_file(spec_file("net1-mini.json"));
    Rng donor_rng(1, streams::kInit);
    Checkpoint donor =
        Model::build(spec, {Regime::DT, nullptr}, donor_rng).to_checkpoint();
    Rng rng(2, streams::kInit);
    Model m = Model::build(spec, {Regime::SFT, &donor}, rng);
    TrainConfig cfg;
    cfg.base_lr = 0.001;
    cfg.batch_size = 16;
    cfg.max_epochs = 4;
    cfg.patience = 3;
    train(m, tr, val, cfg, 9300);

    for (const auto& g : m.params()) {
      if (spec.is_classifier(g.name)) continue;
      const CheckpointRecord* rec = donor.find(g.name);
      bool same = rec != nullptr;
      if (same)
        for (int64_t i = 0; i < g.w.numel() && same; ++i)
          same = g.w[i] == rec->weights[size_t(i)];
      ACC(same);
    }
  }
  report(4, "momentum closed form to 1e-12; SFT frozen layers bitwise", ok);
}

TEST_CASE("criterion 5: overfit sanity on 32 memorizable images") {
  bool ok = true;
  const auto t0 = std::chrono::steady_clock::now();

  TempDir tmp("acc-overfit");
  SynthConfig scfg;
  scfg.patients = 8;
  scfg.images_min = 4;
  scfg.images_max = 4;  // exactly 32 images
  scfg.image_size = 96;
  scfg.seed = 9400;
  Manifest data = generate_synthetic(scfg, tmp.path());
  REQUIRE(data.records.size() == 32);

  NetworkSpec spec = NetworkSpec::from_json_file(spec_file("net1-mini.json"));
  for (auto& l : spec.layers)
    if (l.kind == LayerKind::Dropout) l.dropout_ratio = 0.0;
  Rng rng(9400, streams::kInit);
  Model m = Model::build(spec, {Regime::DT, nullptr}, rng);

  // fixed full batch: center crops, no augmentation
  std::vector<size_t> idx(32);
  for (size_t i = 0; i < 32; ++i) idx[i] = i;
  Batch batch = load_batch(data, idx, CropPolicy{64, false, 1}, nullptr);
  Tensor targets({32, 2});
  for (int64_t i = 0; i < 32; ++i)
    targets.at({i, int64_t(batch.labels[size_t(i)])}) = 1.0f;

  TrainConfig cfg;
  cfg.base_lr = 0.02;
  cfg.momentum = 0.9;
  cfg.l2 = 0.0;
  cfg.lr_step_epochs = 0;
  OptimizerState opt = make_optimizer_state(m);
  Rng dropout_rng(9400, streams::kDropout);
  double last_loss = 1e300;
  for (int epoch = 0; epoch < 200; ++epoch) {  // patience disabled
    ForwardCache cache;
    Tensor logits = m.forward_train(batch.images, dropout_rng, cache);
    auto loss = softmax_loss<float>({logits, targets});
    Grads grads = m.backward(cache, loss.grad_logits);
    sgd_step(m, grads, opt, cfg, cfg.base_lr);
    last_loss = loss.loss;
    if (last_loss < 0.03) break;
  }
  ACC(last_loss < 0.05);
  const double elapsed = seconds_since(t0);
  ACC(elapsed < 300.0);
  std::printf("[acceptance] overfit loss %.4f in %.1f s\n", last_loss, elapsed);
  report(5, "training loss < 0.05 within 200 epochs, < 5 min", ok);
}

TEST_CASE("criterion 6: ensembles match the direct sum/product oracle") {
  bool ok = true;
  Rng rng(9500, streams::kInit);
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t l = 1 + rng.next_below(5);
    const size_t n = 1 + rng.next_below(20);
    ScoreSet s;
    for (size_t m = 0; m < l; ++m) s.model_ids.push_back("m" + std::to_string(m));
    for (size_t i = 0; i < n; ++i) s.image_ids.push_back("i" + std::to_string(i));
    s.scores.assign(l, std::vector<std::array<double, 2>>(n));
    for (size_t m = 0; m < l; ++m)
      for (size_t i = 0; i < n; ++i) {
        // dyadic probabilities: p and 1-p sum to exactly 1, so the
        // normalization inside the arithmetic vote is an exact no-op; a
        // 30-bit grid keeps accidental exact product collisions (where the
        // two tie conventions could differ by one ulp) out of the draw
        double p = double(rng.next_below((1u << 30) + 1)) / double(1u << 30);
        if (rng.next_below(64) == 0) p = rng.next_bernoulli(0.5) ? 0.0 : 1.0;
        s.scores[m][i] = {1.0 - p, p};
      }

    auto arith = ensemble_predict(s, EnsembleKind::Arithmetic);
    auto geom = ensemble_predict(s, EnsembleKind::Geometric);
    for (size_t i = 0; i < n; ++i) {
      double sum0 = 0, sum1 = 0, prod0 = 1, prod1 = 1;
      for (size_t m = 0; m < l; ++m) {
        sum0 += s.scores[m][i][0];
        sum1 += s.scores[m][i][1];
        prod0 *= s.scores[m][i][0];
        prod1 *= s.scores[m][i][1];
      }
      ACC(arith.classes[i] == (sum1 > sum0 ? 1 : 0));
      ACC(geom.classes[i] == (prod1 > prod0 ? 1 : 0));
    }

    // positive per-model rescaling leaves both argmax vectors unchanged
    ScoreSet scaled = s;
    for (size_t m = 0; m < l; ++m) {
      const double c = std::exp(rng.next_uniform(-2.5, 2.5));
      for (auto& row : scaled.scores[m]) {
        row[0] *= c;
        row[1] *= c;
      }
    }
    ACC(ensemble_predict(scaled, EnsembleKind::Arithmetic).classes ==
        arith.classes);
    ACC(ensemble_predict(scaled, EnsembleKind::Geometric).classes ==
        geom.classes);
  }
  report(6, "1000 random score sets: oracle argmax equality, scale invariance",
         ok);
}

TEST_CASE("criterion 7: metric oracles") {
  bool ok = true;
  // trapezoid auc == pairwise concordance, up to 200 items, 1e-12
  Rng rng(9600, streams::kInit);
  for (int trial = 0; trial < 300; ++trial) {
    const size_t n = 2 + rng.next_below(199);
    std::vector<double> scores;
    std::vector<int> truth;
    for (size_t i = 0; i < n; ++i) {
      scores.push_back(double(rng.next_below(25)) / 24.0);  // ties occur
      truth.push_back(int(rng.next_below(2)));
    }
    truth[0] = 1;
    truth[1] = 0;
    const double auc = roc_auc(scores, truth).auc;
    double num = 0;
    int64_t pairs = 0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) {
        if (truth[i] != 1 || truth[j] != 0) continue;
        ++pairs;
        if (scores[i] > scores[j]) num += 1.0;
        else if (scores[i] == scores[j]) num += 0.5;
      }
    ACC(std::abs(auc - num / double(pairs)) <= 1e-12);
  }

  // kappa vs the direct formula, including the worked 0.4 case
  {
    std::vector<int> a, b;
    for (int i = 0; i < 20; ++i) { a.push_back(0); b.push_back(0); }
    for (int i = 0; i < 5; ++i) { a.push_back(0); b.push_back(1); }
    for (int i = 0; i < 10; ++i) { a.push_back(1); b.push_back(0); }
    for (int i = 0; i < 15; ++i) { a.push_back(1); b.push_back(1); }
    ACC(std::abs(cohens_kappa(labels_of(a), labels_of(b)) - 0.4) <= 1e-12);
  }
  for (int trial = 0; trial < 100; ++trial) {
    const size_t n = 4 + rng.next_below(120);
    std::vector<int> a, b;
    int64_t cnt[2][2] = {{0, 0}, {0, 0}};
    for (size_t i = 0; i < n; ++i) {
      a.push_back(int(rng.next_below(2)));
      b.push_back(int(rng.next_below(2)));
      cnt[a.back()][b.back()]++;
    }
    const double po = double(cnt[0][0] + cnt[1][1]) / double(n);
    const double a1 = double(cnt[1][0] + cnt[1][1]) / double(n);
    const double b1 = double(cnt[0][1] + cnt[1][1]) / double(n);
    const double pe = a1 * b1 + (1 - a1) * (1 - b1);
    const double want = pe == 1.0 ? 1.0 : (po - pe) / (1 - pe);
    ACC(std::abs(cohens_kappa(labels_of(a), labels_of(b)) - want) <= 1e-12);
  }
  report(7, "auc == concordance to 1e-12; kappa == direct formula", ok);
}

TEST_CASE("criterion 8: localization equivalence and window arithmetic") {
  bool ok = true;
  // the full-scale window formula: 1024 px, 227 window, 79 stride -> 11
  ACC(window_positions(1024, 227, 79).size() == 11);
  ACC(window_positions(10, 4, 3) == std::vector<int64_t>({0, 3, 6}));

  // a real 1024-px frame: untruncated 11x11, truncation to 10 -> 10x10
  TempDir tmp("acc-localize");
  SynthConfig scfg;
  scfg.patients = 1;
  scfg.images_min = scfg.images_max = 1;
  scfg.image_size = 1024;
  scfg.seed = 9700;
  Manifest data = generate_synthetic(scfg, tmp.path());
  Tensor frame =
      tensor_from_image(read_png_gray8(data.resolve(data.records[0].path)));

  NetworkSpec spec = NetworkSpec::from_json_file(spec_file("net1-mini.json"));
  Rng rng(9700, streams::kInit);
  Model m = Model::build(spec, {Regime::DT, nullptr}, rng);

  DiagnosticMap full = diagnostic_map(m, frame, 227, 79, "frame");
  ACC(full.rows == 11);
  ACC(full.cols == 11);
  DiagnosticMap trunc = diagnostic_map(m, frame, 227, 79, "frame", 10);
  ACC(trunc.rows == 10);
  ACC(trunc.cols == 10);
  bool trunc_matches = true;
  for (int64_t r = 0; r < 10; ++r)
    for (int64_t c = 0; c < 10; ++c)
      trunc_matches &= trunc.at(r, c) == full.at(r, c);
  ACC(trunc_matches);

  // exact equality with per-window direct inference
  bool exact = true;
  for (int64_t r = 0; r < full.rows && exact; ++r)
    for (int64_t c = 0; c < full.cols && exact; ++c) {
      Tensor crop = crop_chw(frame, r * 79, c * 79, 227, 227);
      Tensor sized = resize_bilinear(crop, 64, 64);
      Tensor probs = m.infer(sized.reshaped({1, 1, 64, 64}));
      exact = full.at(r, c) == double(probs.at({0, 1}));
    }
  ACC(exact);
  report(8, "diagnostic map == per-window inference; 11 -> 10 truncation", ok);
}

TEST_CASE("criterion 9: desk-scale protocol reproduction") {
  bool ok = true;
  int cells_total = 0, cells_ok = 0;
  double best_auc_seed1 = 0.0;
  bool regressions_fired = false;

  for (uint64_t seed = 1; seed <= 5; ++seed) {
    TempDir tmp("acc-exp-" + std::to_string(seed));
    // target data: 25 patients, 20 percent held out -> 20 dev / 5 test
    GenDataArgs gen;
    gen.out_dir = tmp.file("data");
    gen.synth.patients = 25;
    gen.synth.images_min = 8;
    gen.synth.images_max = 12;
    gen.synth.image_size = 96;
    gen.synth.seed = seed;
    gen.test_fraction = 0.2;
    Manifest manifest;
    try {
      manifest = run_gen_data(gen);
    } catch (const std::exception&) {
      regressions_fired = true;
      break;
    }
    ACC(manifest.filter_split(SplitTag::Test).patient_ids().size() == 5);
    ACC(manifest.filter_split(SplitTag::Dev).patient_ids().size() == 20);

    // source-domain donor
    GenDataArgs src = gen;
    src.out_dir = tmp.file("src");
    src.synth.patients = 12;
    src.synth.seed = derive_seed(seed, 555);
    src.synth.source_domain = true;
    run_gen_data(src);
    PretrainArgs pre;
    pre.manifest_path = tmp.file("src") + "/manifest.csv";
    pre.spec_path = spec_file("net1-mini.json");
    pre.out_dir = tmp.file("donor");
    pre.train.batch_size = 16;
    pre.train.max_epochs = 10;
    pre.train.patience = 3;
    pre.seed = seed;
    run_pretrain(pre);

    // small batches and a real epoch budget: the fine-tuning regimes run at
    // a tenth of the DT learning rate and need the steps
    ExperimentArgs ex;
    ex.manifest_path = tmp.file("data") + "/manifest.csv";
    ex.spec_paths = {spec_file("net1-mini.json")};
    ex.donor_paths = {tmp.file("donor") + "/donor.ckpt"};
    ex.regimes = {Regime::DT, Regime::SFT, Regime::DFT};
    ex.out_dir = tmp.file("exp");
    ex.folds = 5;
    ex.seed = seed;
    ex.train.batch_size = 16;
    ex.train.max_epochs = 20;
    ex.train.patience = 3;

    ExperimentResult res;
    try {
      res = run_experiment(ex);
    } catch (const DataError&) {
      regressions_fired = true;  // a patient-disjointness assertion fired
      break;
    }

    // table shape: 5 model rows + mean + two ensembles per column
    auto table = read_csv(tmp.file("exp") + "/table.csv");
    ACC(table.size() == 9);
    ACC(table[6][0] == "Mean");
    ACC(table[7][0] == "Arithmetic Ensemble");
    ACC(table[8][0] == "Geometric Ensemble");

    // mean row recomputes from the persisted model rows
    for (size_t col = 1; col < table[0].size(); ++col) {
      double mean = 0;
      for (size_t r = 1; r <= 5; ++r) mean += std::stod(table[r][col]);
      mean /= 5.0;
      ACC(std::abs(mean - std::stod(table[6][col])) <= 1e-12);
    }

    for (const auto& cell : res.cells) {
      cells_total += 2;
      cells_ok += cell.arith_acc >= cell.mean_acc - 0.02 ? 1 : 0;
      cells_ok += cell.geom_acc >= cell.mean_acc - 0.02 ? 1 : 0;
      if (seed == 1) {
        for (double auc : cell.model_auc)
          best_auc_seed1 = std::max(best_auc_seed1, auc);
        best_auc_seed1 =
            std::max({best_auc_seed1, cell.arith_auc, cell.geom_auc});
      }
    }

    // non-gating diagnostic: fine-tuning vs from-scratch ordering is a
    // dataset-dependent observation, reported but never asserted
    std::map<Regime, double> auc;
    for (const auto& cell : res.cells) {
      auc[cell.regime] = cell.geom_auc;
      std::printf(
          "[acceptance] seed %llu %s: mean_acc=%.3f arith=%.3f geom=%.3f "
          "geom_auc=%.3f\n",
          (unsigned long long)seed, regime_str(cell.regime).c_str(),
          cell.mean_acc, cell.arith_acc, cell.geom_acc, cell.geom_auc);
    }
    std::printf(
        "[acceptance] seed %llu diagnostic (non-gating): DT=%.3f SFT=%.3f "
        "DFT=%.3f ordered=%s\n",
        (unsigned long long)seed, auc[Regime::DT], auc[Regime::SFT],
        auc[Regime::DFT],
        (auc[Regime::DFT] >= auc[Regime::SFT] &&
         auc[Regime::SFT] >= auc[Regime::DT])
            ? "yes"
            : "no");
  }

  ACC(!regressions_fired);
  ACC(cells_total == 30);
  // ensembles within 0.02 of the single-model mean in at least 80% of cells
  ACC(cells_ok * 5 >= cells_total * 4);
  std::printf("[acceptance] ensemble-vs-mean cells: %d/%d\n", cells_ok,
              cells_total);
  // generator quality gate: the classes must be separable at desk scale
  ACC(best_auc_seed1 > 0.9);
  report(9, "experiment protocol at desk scale across 5 seeds", ok);
}

TEST_CASE("criterion 10: byte-identical reruns") {
  bool ok = true;
  TempDir tmp("acc-det");

  // data generation: images and manifest
  GenDataArgs gen;
  gen.synth.patients = 6;
  gen.synth.images_min = 2;
  gen.synth.images_max = 3;
  gen.synth.image_size = 96;
  gen.synth.seed = 9900;
  gen.test_fraction = 0.34;
  gen.out_dir = tmp.file("d1");
  run_gen_data(gen);
  gen.out_dir = tmp.file("d2");
  run_gen_data(gen);
  ACC(dir_diff(tmp.file("d1"), tmp.file("d2"), {"run.json"}) == "");

  // training: checkpoints and history reports
  CvArgs cv;
  cv.manifest_path = tmp.file("d1") + "/manifest.csv";
  cv.spec_path = spec_file("net1-mini.json");
  cv.folds = 2;
  cv.seed = 9900;
  cv.train.batch_size = 16;
  cv.train.max_epochs = 2;
  cv.out_dir = tmp.file("cv1");
  run_cv_cmd(cv);
  cv.out_dir = tmp.file("cv2");
  run_cv_cmd(cv);
  ACC(dir_diff(tmp.file("cv1"), tmp.file("cv2"), {"run.json"}) == "");

  // localization artifacts
  Manifest m = Manifest::load(tmp.file("d1") + "/manifest.csv");
  LocalizeArgs lo;
  lo.image_path = m.resolve(m.records[0].path);
  lo.spec_path = spec_file("net1-mini.json");
  lo.checkpoint_path = tmp.file("cv1") + "/fold_0.ckpt";
  lo.window = 48;
  lo.stride = 24;
  lo.min_score = 0.0;
  lo.out_dir = tmp.file("l1");
  run_localize(lo);
  lo.out_dir = tmp.file("l2");
  run_localize(lo);
  ACC(dir_diff(tmp.file("l1"), tmp.file("l2"), {"run.json"}) == "");

  report(10, "identical seed and config reproduce identical bytes", ok);
}

TEST_CASE("criterion 11: gold-standard protocol on known confusion counts") {
  bool ok = true;
  // constructed labels over 540 images with seeded disagreement patterns
  Rng rng(9950, streams::kInit);
  const size_t n = 540;
  std::vector<int> initial, anchor, second, model;
  for (size_t i = 0; i < n; ++i) {
    const int truth = int(rng.next_below(2));
    initial.push_back(truth);
    anchor.push_back(rng.next_unit() < 0.74 ? truth : 1 - truth);
    second.push_back(rng.next_unit() < 0.66 ? truth : 1 - truth);
    model.push_back(rng.next_unit() < 0.82 ? truth : 1 - truth);
  }
  RaterLabels ref = labels_of(initial);
  RaterLabels r1 = labels_of(anchor);
  RaterLabels r2 = labels_of(second);
  RaterLabels mm = labels_of(model);

  RaterLabels gold = gold_standard(ref, r1);
  // hand recount of the gold subset
  size_t agree = 0;
  for (size_t i = 0; i < n; ++i) agree += initial[i] == anchor[i] ? 1 : 0;
  ACC(gold.ids.size() == agree);

  auto rows = agreement_report({{"rater1", r1}, {"rater2", r2}, {"model", mm}},
                               ref, gold);
  REQUIRE(rows.size() == 3);
  const std::vector<int>* vecs[3] = {&anchor, &second, &model};
  for (size_t r = 0; r < 3; ++r) {
    // full-set recount: exact integer match
    int64_t match = 0;
    for (size_t i = 0; i < n; ++i)
      match += (*vecs[r])[i] == initial[i] ? 1 : 0;
    ACC(rows[r].match_full == match);
    ACC(rows[r].n_full == int64_t(n));
    ACC(rows[r].pct_full == 100.0 * double(match) / double(n));

    // gold-subset recount: exact integer match
    int64_t gmatch = 0, gtotal = 0;
    for (size_t i = 0; i < n; ++i) {
      if (initial[i] != anchor[i]) continue;
      ++gtotal;
      gmatch += (*vecs[r])[i] == initial[i] ? 1 : 0;
    }
    ACC(rows[r].n_gold == gtotal);
    ACC(rows[r].match_gold == gmatch);
    ACC(rows[r].pct_gold == 100.0 * double(gmatch) / double(gtotal));
  }
  // the anchor agrees with the reference on every gold image by construction
  ACC(rows[0].match_gold == rows[0].n_gold);
  report(11, "gold-standard agreement matches hand recounts exactly", ok);
}
