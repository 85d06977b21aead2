#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clenet/data.hpp"
#include "clenet/network.hpp"

namespace clenet {

struct TrainConfig {
  double base_lr = 0.01;       // DT default; fine-tuning regimes use 0.001
  double momentum = 0.9;
  double l2 = 0.005;           // weight decay, biases excluded
  int64_t batch_size = 32;
  double lr_gamma = 0.1;       // step decay factor
  int64_t lr_step_epochs = 10; // 0 disables the schedule
  int64_t max_epochs = 40;
  int64_t patience = 3;        // consecutive val-loss rises; 0 disables
  bool augment = true;         // random crop + horizontal flip
  int64_t crop = 0;            // 0 = network input size

  void validate() const;
};

// The regimes' initial learning rates: fine-tuning runs ten times lower.
double default_lr_for(Regime r);

struct OptimizerState {
  std::vector<ParamGrad> velocity;  // previous update per group
  int64_t iteration = 0;
};

OptimizerState make_optimizer_state(const Model& model);

// One momentum update: upd = mu*vel - lr*(grad + l2*w); w += upd; vel = upd.
// Exposed as a template so the closed-form trajectory can be checked in
// double precision with the exact code the float path runs.
template <typename T>
void sgd_update(TensorT<T>& param, const TensorT<T>& grad, TensorT<T>& vel,
                T mu, T lr, T l2);

// Applies one step to every unfrozen group. Throws DivergenceError when a
// gradient is non-finite. lr_now already includes the schedule; per-group
// rates are lr_now * lr_mult.
void sgd_step(Model& model, const Grads& grads, OptimizerState& state,
              const TrainConfig& cfg, double lr_now);

double lr_at_epoch(const TrainConfig& cfg, int64_t epoch);  // epoch is 1-based

// True when the last `patience` epochs each increased over their predecessor.
bool should_stop(const std::vector<double>& val_losses, int64_t patience);
// Index of the minimum (earliest on ties).
size_t best_epoch_index(const std::vector<double>& val_losses);

struct EpochStats {
  int64_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  Checkpoint best;  // snapshot of the minimum-validation-loss epoch
  int64_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<EpochStats> history;
};

// Deterministic given (seed, cfg, manifests): shuffling, augmentation and
// dropout each consume their own stream. history_csv may be empty.
TrainResult train(Model& model, const Manifest& train_mf,
                  const Manifest& val_mf, const TrainConfig& cfg,
                  uint64_t seed, const ImageCache* cache = nullptr,
                  const std::string& history_csv = "");

// Mean per-sample loss over a manifest, inference mode, center crops.
double evaluate_loss(const Model& model, const Manifest& mf,
                     const TrainConfig& cfg, const ImageCache* cache = nullptr);

// Inference-mode class probabilities per record, manifest order.
std::vector<std::array<double, 2>> evaluate_scores(
    const Model& model, const Manifest& mf, int64_t batch_size,
    const ImageCache* cache = nullptr);

struct FoldOutcome {
  int64_t fold = 0;
  Checkpoint best;
  double val_loss = 0.0;
  std::vector<EpochStats> history;
};

// Trains one model per fold; fold seeds derive from (seed, fold) only, so
// identical configs land on identical runs. jobs > 1 runs folds on worker
// threads (results are independent of the job count).
std::vector<FoldOutcome> run_cv(const FoldPlan& plan, const NetworkSpec& spec,
                                const RegimeSpec& regime,
                                const TrainConfig& cfg, uint64_t seed,
                                int jobs = 1,
                                const ImageCache* cache = nullptr);

struct GridOutcome {
  size_t best_index = 0;           // into the surviving grid entries
  std::vector<double> mean_losses; // NaN for failed (diverged) sets
};

// Evaluates every hyperparameter set on every fold and picks the set with
// the lowest mean best-validation loss. Sets that diverge on any fold are
// excluded. The full table lands in table_csv when non-empty.
GridOutcome grid_search(const std::vector<TrainConfig>& grid,
                        const FoldPlan& plan, const NetworkSpec& spec,
                        const RegimeSpec& regime, uint64_t seed,
                        const std::string& table_csv = "",
                        const ImageCache* cache = nullptr);

}  // namespace clenet
