#include "clenet/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <cmath>
#include <thread>

#include "clenet/error.hpp"
#include "clenet/util.hpp"

namespace clenet {

void TrainConfig::validate() const {
  if (base_lr <= 0) throw ConfigError("train: base_lr must be positive");
  if (momentum < 0 || momentum >= 1)
    throw ConfigError("train: momentum must be in [0,1)");
  if (l2 < 0) throw ConfigError("train: l2 must be non-negative");
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (lr_gamma <= 0) throw ConfigError("train: lr_gamma must be positive");
}

double default_lr_for(Regime r) { return r == Regime::DT ? 0.01 : 0.001; }

OptimizerState make_optimizer_state(const Model& model) {
  OptimizerState st;
  for (const auto& g : model.params())
    st.velocity.push_back({Tensor(g.w.shape()), Tensor(g.b.shape())});
  return st;
}

template <typename T>
void sgd_update(TensorT<T>& param, const TensorT<T>& grad, TensorT<T>& vel,
                T mu, T lr, T l2) {
  const int64_t n = param.numel();
  T* w = param.data();
  T* v = vel.data();
  const T* g = grad.data();
  for (int64_t i = 0; i < n; ++i) {
    const T gr = g[i] + l2 * w[i];
    const T upd = mu * v[i] - lr * gr;
    w[i] += upd;
    v[i] = upd;
  }
}

template void sgd_update<float>(TensorT<float>&, const TensorT<float>&,
                                TensorT<float>&, float, float, float);
template void sgd_update<double>(TensorT<double>&, const TensorT<double>&,
                                 TensorT<double>&, double, double, double);

namespace {

void require_finite(const Tensor& t, const std::string& layer,
                    int64_t iteration) {
  const float* p = t.data();
  for (int64_t i = 0; i < t.numel(); ++i)
    if (!std::isfinite(p[i])) throw DivergenceError(layer, iteration);
}

}  // namespace

void sgd_step(Model& model, const Grads& grads, OptimizerState& state,
              const TrainConfig& cfg, double lr_now) {
  auto& params = model.params();
  if (grads.size() != params.size() ||
      state.velocity.size() != params.size())
    throw ShapeError("sgd_step: grads/state do not mirror the parameters");
  state.iteration += 1;
  for (size_t i = 0; i < params.size(); ++i) {
    ParamGroup& g = params[i];
    if (g.lr_mult == 0.0) continue;  // frozen groups stay bitwise untouched
    require_finite(grads[i].w, g.name, state.iteration);
    require_finite(grads[i].b, g.name, state.iteration);
    const float lr = float(lr_now * g.lr_mult);
    sgd_update<float>(g.w, grads[i].w, state.velocity[i].w,
                      float(cfg.momentum), lr, float(cfg.l2));
    sgd_update<float>(g.b, grads[i].b, state.velocity[i].b,
                      float(cfg.momentum), lr, 0.0f);  // no decay on biases
  }
}

double lr_at_epoch(const TrainConfig& cfg, int64_t epoch) {
  if (cfg.lr_step_epochs <= 0) return cfg.base_lr;
  const int64_t steps = (epoch - 1) / cfg.lr_step_epochs;
  return cfg.base_lr * std::pow(cfg.lr_gamma, double(steps));
}

bool should_stop(const std::vector<double>& val_losses, int64_t patience) {
  if (patience <= 0 || int64_t(val_losses.size()) <= patience) return false;
  const size_t n = val_losses.size();
  for (size_t i = n - size_t(patience); i < n; ++i)
    if (!(val_losses[i] > val_losses[i - 1])) return false;
  return true;
}

size_t best_epoch_index(const std::vector<double>& val_losses) {
  size_t best = 0;
  for (size_t i = 1; i < val_losses.size(); ++i)
    if (val_losses[i] < val_losses[best]) best = i;
  return best;
}

namespace {

Tensor one_hot(const std::vector<int>& labels, int64_t classes) {
  Tensor t({int64_t(labels.size()), classes});
  for (size_t i = 0; i < labels.size(); ++i)
    t.at({int64_t(i), int64_t(labels[i])}) = 1.0f;
  return t;
}

int64_t resolve_crop(const TrainConfig& cfg, const Model& model) {
  return cfg.crop > 0 ? cfg.crop : model.spec().in_h;
}

}  // namespace

double evaluate_loss(const Model& model, const Manifest& mf,
                     const TrainConfig& cfg, const ImageCache* cache) {
  if (mf.records.empty()) throw DataError("evaluate: empty manifest");
  CropPolicy policy{resolve_crop(cfg, model), false, model.spec().in_channels};
  double total = 0.0;
  int64_t count = 0;
  for (size_t start = 0; start < mf.records.size();
       start += size_t(cfg.batch_size)) {
    std::vector<size_t> idx;
    for (size_t i = start;
         i < std::min(mf.records.size(), start + size_t(cfg.batch_size)); ++i)
      idx.push_back(i);
    Batch batch = load_batch(mf, idx, policy, nullptr, cache);
    Tensor logits = model.infer_logits(batch.images);
    auto res = softmax_loss<float>({logits, one_hot(batch.labels, 2)});
    total += res.loss * double(idx.size());
    count += int64_t(idx.size());
  }
  return total / double(count);
}

std::vector<std::array<double, 2>> evaluate_scores(const Model& model,
                                                   const Manifest& mf,
                                                   int64_t batch_size,
                                                   const ImageCache* cache) {
  CropPolicy policy{model.spec().in_h, false, model.spec().in_channels};
  std::vector<std::array<double, 2>> out;
  for (size_t start = 0; start < mf.records.size();
       start += size_t(batch_size)) {
    std::vector<size_t> idx;
    for (size_t i = start;
         i < std::min(mf.records.size(), start + size_t(batch_size)); ++i)
      idx.push_back(i);
    Batch batch = load_batch(mf, idx, policy, nullptr, cache);
    Tensor probs = model.infer(batch.images);
    for (size_t i = 0; i < idx.size(); ++i)
      out.push_back({double(probs.at({int64_t(i), 0})),
                     double(probs.at({int64_t(i), 1}))});
  }
  return out;
}

TrainResult train(Model& model, const Manifest& train_mf,
                  const Manifest& val_mf, const TrainConfig& cfg,
                  uint64_t seed, const ImageCache* cache,
                  const std::string& history_csv) {
  cfg.validate();
  if (train_mf.records.empty() || val_mf.records.empty())
    throw DataError("train: empty manifest");
  require_patient_disjoint(train_mf, val_mf, "train/val");
  if (!train_mf.has_both_classes())
    throw DataError("train: training split is missing a class");

  Rng shuffle_rng(seed, streams::kShuffle);
  Rng augment_rng(seed, streams::kAugment);
  Rng dropout_rng(seed, streams::kDropout);

  ImageCache local_cache;
  if (!cache) {
    local_cache.preload(train_mf);
    local_cache.preload(val_mf);
    cache = &local_cache;
  }

  const int64_t crop = resolve_crop(cfg, model);
  CropPolicy train_policy{crop, cfg.augment, model.spec().in_channels};

  OptimizerState opt = make_optimizer_state(model);
  TrainResult result;
  std::vector<double> val_losses;
  std::vector<size_t> order(train_mf.records.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int64_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[size_t(shuffle_rng.next_below(i))]);

    double epoch_loss = 0.0;
    int64_t seen = 0;
    for (size_t start = 0; start < order.size();
         start += size_t(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + size_t(cfg.batch_size));
      std::span<const size_t> idx(order.data() + start, end - start);
      Batch batch =
          load_batch(train_mf, idx, train_policy,
                     cfg.augment ? &augment_rng : nullptr, cache);
      ForwardCache fwd;
      Tensor logits = model.forward_train(batch.images, dropout_rng, fwd);
      auto loss = softmax_loss<float>({logits, one_hot(batch.labels, 2)});
      if (!std::isfinite(loss.loss))
        throw DivergenceError("loss", opt.iteration + 1);
      Grads grads = model.backward(fwd, loss.grad_logits);
      sgd_step(model, grads, opt, cfg, lr);
      epoch_loss += loss.loss * double(idx.size());
      seen += int64_t(idx.size());
    }

    const double train_loss = epoch_loss / double(seen);
    const double val_loss = evaluate_loss(model, val_mf, cfg, cache);
    result.history.push_back({epoch, train_loss, val_loss, lr});
    val_losses.push_back(val_loss);

    if (val_losses.size() == 1 || val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      CheckpointMeta meta;
      meta.iteration = uint64_t(opt.iteration);
      meta.seed = seed;
      result.best = model.to_checkpoint(meta);
    }
    if (should_stop(val_losses, cfg.patience)) break;
  }

  if (!history_csv.empty()) {
    std::string out = "epoch,train_loss,val_loss,lr\n";
    for (const auto& h : result.history)
      out += std::to_string(h.epoch) + "," + fmt_g17(h.train_loss) + "," +
             fmt_g17(h.val_loss) + "," + fmt_g17(h.lr) + "\n";
    write_file(history_csv, out);
  }
  return result;
}

std::vector<FoldOutcome> run_cv(const FoldPlan& plan, const NetworkSpec& spec,
                                const RegimeSpec& regime,
                                const TrainConfig& cfg, uint64_t seed,
                                int jobs, const ImageCache* cache) {
  if (plan.folds.empty()) throw ConfigError("cv: empty fold plan");
  ImageCache local_cache;
  if (!cache) {
    for (const auto& f : plan.folds) {
      local_cache.preload(f.train);
      local_cache.preload(f.val);
    }
    cache = &local_cache;
  }

  std::vector<FoldOutcome> out(plan.folds.size());
  std::vector<std::exception_ptr> errors(plan.folds.size());
  auto run_fold = [&](size_t f) {
    try {
      const Fold& fold = plan.folds[f];
      require_patient_disjoint(fold.train, fold.val,
                               "fold " + std::to_string(f));
      const uint64_t fold_seed = derive_seed(seed, 7001 + f);
      Rng init_rng(fold_seed, streams::kInit);
      Model model = Model::build(spec, regime, init_rng);
      TrainResult res = train(model, fold.train, fold.val, cfg, fold_seed,
                              cache);
      out[f] = {int64_t(f), std::move(res.best), res.best_val_loss,
                std::move(res.history)};
    } catch (...) {
      errors[f] = std::current_exception();
    }
  };

  if (jobs <= 1) {
    for (size_t f = 0; f < plan.folds.size(); ++f) run_fold(f);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (size_t f = next.fetch_add(1); f < plan.folds.size();
           f = next.fetch_add(1))
        run_fold(f);
    };
    std::vector<std::thread> pool;
    const size_t n_threads =
        std::min<size_t>(size_t(jobs), plan.folds.size());
    for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

GridOutcome grid_search(const std::vector<TrainConfig>& grid,
                        const FoldPlan& plan, const NetworkSpec& spec,
                        const RegimeSpec& regime, uint64_t seed,
                        const std::string& table_csv,
                        const ImageCache* cache) {
  if (grid.empty()) throw ConfigError("grid search: empty grid");
  ImageCache local_cache;
  if (!cache) {
    for (const auto& f : plan.folds) {
      local_cache.preload(f.train);
      local_cache.preload(f.val);
    }
    cache = &local_cache;
  }

  GridOutcome outcome;
  std::string table =
      "set,base_lr,momentum,l2,batch_size,status," +
      [&] {
        std::vector<std::string> cols;
        for (size_t f = 0; f < plan.folds.size(); ++f)
          cols.push_back("fold" + std::to_string(f) + "_loss");
        return join(cols, ",");
      }() +
      ",mean_loss\n";

  for (size_t s = 0; s < grid.size(); ++s) {
    const TrainConfig& cfg = grid[s];
    std::vector<double> fold_losses;
    bool failed = false;
    for (size_t f = 0; f < plan.folds.size(); ++f) {
      try {
        // Seeds depend on the fold only: duplicate sets score identically.
        const uint64_t fold_seed = derive_seed(seed, 7001 + f);
        Rng init_rng(fold_seed, streams::kInit);
        Model model = Model::build(spec, regime, init_rng);
        TrainResult res =
            train(model, plan.folds[f].train, plan.folds[f].val, cfg,
                  fold_seed, cache);
        fold_losses.push_back(res.best_val_loss);
      } catch (const DivergenceError&) {
        failed = true;  // the whole set is excluded from selection
        break;
      }
    }
    double mean = std::numeric_limits<double>::quiet_NaN();
    if (!failed) {
      double acc = 0.0;
      for (double v : fold_losses) acc += v;
      mean = acc / double(fold_losses.size());
    }
    outcome.mean_losses.push_back(mean);

    std::vector<std::string> cells;
    for (size_t f = 0; f < plan.folds.size(); ++f)
      cells.push_back(f < fold_losses.size() ? fmt_g17(fold_losses[f]) : "");
    table += std::to_string(s) + "," + fmt_g17(cfg.base_lr) + "," +
             fmt_g17(cfg.momentum) + "," + fmt_g17(cfg.l2) + "," +
             std::to_string(cfg.batch_size) + "," +
             (failed ? "failed" : "ok") + "," + join(cells, ",") + "," +
             (failed ? "" : fmt_g17(mean)) + "\n";
  }
  if (!table_csv.empty()) write_file(table_csv, table);

  bool any = false;
  size_t best = 0;
  for (size_t s = 0; s < outcome.mean_losses.size(); ++s) {
    if (std::isnan(outcome.mean_losses[s])) continue;
    if (!any || outcome.mean_losses[s] < outcome.mean_losses[best]) {
      best = s;
      any = true;
    }
  }
  if (!any) throw ConfigError("grid search: every hyperparameter set diverged");
  outcome.best_index = best;
  return outcome;
}

}  // namespace clenet
