#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "clenet/checkpoint.hpp"
#include "clenet/init.hpp"
#include "clenet/layers.hpp"
#include "clenet/rng.hpp"
#include "clenet/tensor.hpp"

namespace clenet {

enum class LayerKind { Conv, Relu, Lrn, MaxPool, Dropout, Fc, Inception };

struct ConvSpec {
  int64_t out_channels = 0;
  int64_t kernel_h = 0, kernel_w = 0;
  int64_t stride = 1;
  int64_t pad = 0;
};

// Branch widths of one inception module. The four branches (1x1; 1x1 reduce
// then 3x3; 1x1 reduce then 5x5; 3x3/1 max pool then 1x1 projection) keep
// the spatial extent and concatenate along channels.
struct InceptionSpec {
  int64_t p1 = 0;       // 1x1 path width
  int64_t p3r = 0;      // 3x3 reduce width
  int64_t p3 = 0;       // 3x3 path width
  int64_t p5r = 0;      // 5x5 reduce width
  int64_t p5 = 0;       // 5x5 path width
  int64_t ppool = 0;    // pool projection width
  int64_t out_channels() const { return p1 + p3 + p5 + ppool; }
};

struct LayerDesc {
  LayerKind kind = LayerKind::Relu;
  std::string name;
  ConvSpec conv{};
  LrnParams lrn{};
  PoolParams pool{};
  double dropout_ratio = 0.5;
  int64_t fc_out = 0;
  InceptionSpec inception{};
};

struct NetworkSpec {
  std::string name;
  int64_t in_channels = 1, in_h = 0, in_w = 0;
  std::vector<LayerDesc> layers;
  std::vector<std::string> classifier_layers;  // final fully connected unit(s)

  // Chains layer shapes, checks unique names, and requires the loss
  // attachment point to be the final fully connected layer.
  void validate() const;
  // Output shape after each layer: {C,H,W} or {D} once flattened.
  std::vector<Shape> chained_shapes() const;
  bool is_classifier(const std::string& layer_name) const;
  // Total learnable parameter count (weights + biases).
  int64_t param_count() const;

  static NetworkSpec from_json_text(const std::string& text,
                                    const std::string& origin = "<inline>");
  static NetworkSpec from_json_file(const std::string& path);
  std::string to_json_text() const;
};

enum class Regime { DT, SFT, DFT };

std::string regime_str(Regime r);
Regime regime_from_str(const std::string& s);
// DT trains everything at the base rate; SFT freezes everything except the
// classifier; DFT fine-tunes everything starting from the donor.
struct RegimeSpec {
  Regime regime = Regime::DT;
  const Checkpoint* donor = nullptr;
};

struct ParamGroup {
  std::string name;
  Tensor w;
  Tensor b;
  double lr_mult = 1.0;  // 0 freezes the group
};

struct LayerCache {
  Tensor input;
  std::vector<int64_t> argmax;
  Shape pool_in_shape;
  Shape fc_in_shape;  // pre-flatten shape, restored on the way back
  DropoutState dropout;
  std::vector<LayerCache> sub;  // inception internals
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Tensor logits;
};

struct ParamGrad {
  Tensor w;
  Tensor b;
};
using Grads = std::vector<ParamGrad>;

class Model {
 public:
  // Binds weights per regime: DT random init everywhere (donor forbidden);
  // SFT/DFT copy donor weights into every non-classifier group and random
  // init the classifier. Draw order is fixed so builds are reproducible.
  static Model build(const NetworkSpec& spec, const RegimeSpec& regime,
                     Rng& rng);

  const NetworkSpec& spec() const { return spec_; }
  Regime regime() const { return regime_; }
  std::vector<ParamGroup>& params() { return params_; }
  const std::vector<ParamGroup>& params() const { return params_; }
  const ParamGroup* find_param(const std::string& name) const;

  // Inference-mode class probabilities, rows summing to 1.
  Tensor infer(const Tensor& batch) const;
  Tensor infer_logits(const Tensor& batch) const;

  // Training-mode forward; dropout masks persist in the cache for backward.
  Tensor forward_train(const Tensor& batch, Rng& dropout_rng,
                       ForwardCache& cache) const;
  Grads backward(const ForwardCache& cache, const Tensor& grad_logits) const;

  // Output of the named layer in inference mode (activation map export).
  Tensor forward_until(const Tensor& batch, const std::string& layer_name) const;

  Checkpoint to_checkpoint(CheckpointMeta meta = {}) const;
  // Full restore: every group must be covered by name and shape.
  void load_from(const Checkpoint& ckpt);

 private:
  Tensor run(const Tensor& batch, Mode mode, Rng* dropout_rng,
             ForwardCache* cache, const std::string& stop_after) const;

  NetworkSpec spec_;
  Regime regime_ = Regime::DT;
  std::vector<ParamGroup> params_;
  // param indices per layer; inception layers own six consecutive groups
  std::vector<std::vector<size_t>> layer_params_;
};

// Channel concat / split helpers used by the inception executor.
Tensor concat_channels(const std::vector<Tensor>& parts);
std::vector<Tensor> split_channels(const Tensor& x,
                                   const std::vector<int64_t>& widths);

}  // namespace clenet
