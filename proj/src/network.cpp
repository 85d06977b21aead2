#include "clenet/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "clenet/error.hpp"
#include "clenet/util.hpp"

using nlohmann::json;

namespace clenet {

// ---- spec ----------------------------------------------------------------

std::string regime_str(Regime r) {
  switch (r) {
    case Regime::DT: return "DT";
    case Regime::SFT: return "SFT";
    case Regime::DFT: return "DFT";
  }
  return "DT";
}

Regime regime_from_str(const std::string& s) {
  if (s == "DT" || s == "dt") return Regime::DT;
  if (s == "SFT" || s == "sft") return Regime::SFT;
  if (s == "DFT" || s == "dft") return Regime::DFT;
  throw ConfigError("unknown training regime '" + s + "' (want DT, SFT, DFT)");
}

bool NetworkSpec::is_classifier(const std::string& layer_name) const {
  return std::find(classifier_layers.begin(), classifier_layers.end(),
                   layer_name) != classifier_layers.end();
}

std::vector<Shape> NetworkSpec::chained_shapes() const {
  std::vector<Shape> out;
  Shape s{in_channels, in_h, in_w};
  for (const auto& L : layers) {
    switch (L.kind) {
      case LayerKind::Conv: {
        if (s.size() != 3)
          throw ShapeError(name + "/" + L.name +
                           ": conv needs a (C,H,W) input, have " +
                           shape_str(s));
        const int64_t ho = conv_out_extent(s[1], L.conv.pad, L.conv.kernel_h,
                                           L.conv.stride);
        const int64_t wo = conv_out_extent(s[2], L.conv.pad, L.conv.kernel_w,
                                           L.conv.stride);
        if (L.conv.out_channels < 1 || L.conv.kernel_h < 1 ||
            L.conv.kernel_w < 1 || L.conv.stride < 1 || L.conv.pad < 0)
          throw ShapeError(name + "/" + L.name + ": invalid conv parameters");
        if (ho < 1 || wo < 1)
          throw ShapeError(name + "/" + L.name +
                           ": output extent collapses for input " +
                           shape_str(s));
        s = {L.conv.out_channels, ho, wo};
        break;
      }
      case LayerKind::Relu:
      case LayerKind::Dropout:
        break;
      case LayerKind::Lrn:
        if (s.size() != 3)
          throw ShapeError(name + "/" + L.name + ": lrn needs a (C,H,W) input");
        break;
      case LayerKind::MaxPool: {
        if (s.size() != 3)
          throw ShapeError(name + "/" + L.name +
                           ": maxpool needs a (C,H,W) input");
        if (L.pool.window > s[1] || L.pool.window > s[2])
          throw ShapeError(name + "/" + L.name + ": pool window " +
                           std::to_string(L.pool.window) +
                           " larger than input " + shape_str(s));
        const int64_t ho =
            conv_out_extent(s[1], L.pool.pad, L.pool.window, L.pool.stride);
        const int64_t wo =
            conv_out_extent(s[2], L.pool.pad, L.pool.window, L.pool.stride);
        s = {s[0], ho, wo};
        break;
      }
      case LayerKind::Fc: {
        if (L.fc_out < 1)
          throw ShapeError(name + "/" + L.name + ": fc needs units >= 1");
        s = {L.fc_out};
        break;
      }
      case LayerKind::Inception: {
        if (s.size() != 3)
          throw ShapeError(name + "/" + L.name +
                           ": inception needs a (C,H,W) input");
        const auto& m = L.inception;
        if (m.p1 < 1 || m.p3r < 1 || m.p3 < 1 || m.p5r < 1 || m.p5 < 1 ||
            m.ppool < 1)
          throw ShapeError(name + "/" + L.name +
                           ": all inception branch widths must be >= 1");
        if (s[1] < 5 || s[2] < 5)
          throw ShapeError(name + "/" + L.name +
                           ": spatial extent too small for a 5x5 branch");
        s = {m.out_channels(), s[1], s[2]};
        break;
      }
    }
    out.push_back(s);
  }
  return out;
}

int64_t NetworkSpec::param_count() const {
  const auto shapes = chained_shapes();
  int64_t total = 0;
  Shape in{in_channels, in_h, in_w};
  for (size_t li = 0; li < layers.size(); ++li) {
    const LayerDesc& L = layers[li];
    if (L.kind == LayerKind::Conv) {
      total += L.conv.out_channels *
                   (in[0] * L.conv.kernel_h * L.conv.kernel_w + 1);
    } else if (L.kind == LayerKind::Fc) {
      total += shape_numel(in) * L.fc_out + L.fc_out;
    } else if (L.kind == LayerKind::Inception) {
      const auto& m = L.inception;
      total += m.p1 * (in[0] + 1) + m.p3r * (in[0] + 1) +
               m.p3 * (m.p3r * 9 + 1) + m.p5r * (in[0] + 1) +
               m.p5 * (m.p5r * 25 + 1) + m.ppool * (in[0] + 1);
    }
    in = shapes[li];
  }
  return total;
}

void NetworkSpec::validate() const {
  if (name.empty()) throw ConfigError("network spec: missing name");
  if (in_channels < 1 || in_h < 1 || in_w < 1)
    throw ConfigError(name + ": invalid input shape");
  if (layers.empty()) throw ConfigError(name + ": no layers");
  std::set<std::string> names;
  for (const auto& L : layers) {
    if (L.name.empty()) throw ConfigError(name + ": layer with empty name");
    if (!names.insert(L.name).second)
      throw ConfigError(name + ": duplicate layer name '" + L.name + "'");
  }
  chained_shapes();  // throws on any shape break
  if (layers.back().kind != LayerKind::Fc)
    throw ConfigError(name +
                      ": the final layer must be fully connected (the loss "
                      "attachment point)");
  if (layers.back().fc_out < 2)
    throw ConfigError(name + ": classifier must emit at least 2 units");
  if (classifier_layers.empty())
    throw ConfigError(name + ": classifier_layers must not be empty");
  for (const auto& cname : classifier_layers) {
    auto it = std::find_if(layers.begin(), layers.end(),
                           [&](const LayerDesc& l) { return l.name == cname; });
    if (it == layers.end())
      throw ConfigError(name + ": classifier layer '" + cname +
                        "' not found in spec");
    if (it->kind != LayerKind::Fc)
      throw ConfigError(name + ": classifier layer '" + cname +
                        "' is not fully connected");
  }
}

namespace {

int64_t json_int(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key))
    throw FormatError("network spec: " + ctx + " missing field '" + key + "'");
  return j.at(key).get<int64_t>();
}

int64_t json_int_or(const json& j, const char* key, int64_t dflt) {
  return j.contains(key) ? j.at(key).get<int64_t>() : dflt;
}

double json_num_or(const json& j, const char* key, double dflt) {
  return j.contains(key) ? j.at(key).get<double>() : dflt;
}

void parse_kernel(const json& j, LayerDesc& L, const std::string& ctx) {
  if (!j.contains("kernel"))
    throw FormatError("network spec: " + ctx + " missing field 'kernel'");
  const auto& k = j.at("kernel");
  if (k.is_array()) {
    if (k.size() != 2)
      throw FormatError("network spec: " + ctx + " kernel wants [kh,kw]");
    L.conv.kernel_h = k[0].get<int64_t>();
    L.conv.kernel_w = k[1].get<int64_t>();
  } else {
    L.conv.kernel_h = L.conv.kernel_w = k.get<int64_t>();
  }
}

}  // namespace

NetworkSpec NetworkSpec::from_json_text(const std::string& text,
                                        const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("network spec: invalid json in " + origin + ": " +
                      e.what());
  }
  NetworkSpec spec;
  try {
    spec.name = j.at("name").get<std::string>();
    const auto& in = j.at("input_shape");
    if (!in.is_array() || in.size() != 3)
      throw FormatError("network spec: input_shape wants [C,H,W]");
    spec.in_channels = in[0].get<int64_t>();
    spec.in_h = in[1].get<int64_t>();
    spec.in_w = in[2].get<int64_t>();
    for (const auto& lj : j.at("layers")) {
      LayerDesc L;
      L.name = lj.at("name").get<std::string>();
      const std::string type = lj.at("type").get<std::string>();
      const std::string ctx = spec.name + "/" + L.name;
      if (type == "conv") {
        L.kind = LayerKind::Conv;
        L.conv.out_channels = json_int(lj, "filters", ctx);
        parse_kernel(lj, L, ctx);
        L.conv.stride = json_int_or(lj, "stride", 1);
        L.conv.pad = json_int_or(lj, "pad", 0);
      } else if (type == "relu") {
        L.kind = LayerKind::Relu;
      } else if (type == "lrn") {
        L.kind = LayerKind::Lrn;
        L.lrn.window = json_int_or(lj, "window", 5);
        L.lrn.alpha = json_num_or(lj, "alpha", 1.0);
        L.lrn.beta = json_num_or(lj, "beta", 0.75);
      } else if (type == "maxpool") {
        L.kind = LayerKind::MaxPool;
        L.pool.window = json_int(lj, "window", ctx);
        L.pool.stride = json_int_or(lj, "stride", L.pool.window);
        L.pool.pad = json_int_or(lj, "pad", 0);
      } else if (type == "dropout") {
        L.kind = LayerKind::Dropout;
        L.dropout_ratio = json_num_or(lj, "ratio", 0.5);
      } else if (type == "fc") {
        L.kind = LayerKind::Fc;
        L.fc_out = json_int(lj, "units", ctx);
      } else if (type == "inception") {
        L.kind = LayerKind::Inception;
        L.inception.p1 = json_int(lj, "b1", ctx);
        L.inception.p3r = json_int(lj, "b3_reduce", ctx);
        L.inception.p3 = json_int(lj, "b3", ctx);
        L.inception.p5r = json_int(lj, "b5_reduce", ctx);
        L.inception.p5 = json_int(lj, "b5", ctx);
        L.inception.ppool = json_int(lj, "pool_proj", ctx);
      } else {
        throw FormatError("network spec: unknown layer type '" + type +
                          "' in " + origin);
      }
      spec.layers.push_back(std::move(L));
    }
    for (const auto& c : j.at("classifier_layers"))
      spec.classifier_layers.push_back(c.get<std::string>());
  } catch (const json::exception& e) {
    throw FormatError("network spec: malformed document in " + origin + ": " +
                      e.what());
  }
  spec.validate();
  return spec;
}

NetworkSpec NetworkSpec::from_json_file(const std::string& path) {
  return from_json_text(read_file(path), path);
}

std::string NetworkSpec::to_json_text() const {
  json j;
  j["name"] = name;
  j["input_shape"] = {in_channels, in_h, in_w};
  j["classifier_layers"] = classifier_layers;
  j["layers"] = json::array();
  for (const auto& L : layers) {
    json lj;
    lj["name"] = L.name;
    switch (L.kind) {
      case LayerKind::Conv:
        lj["type"] = "conv";
        lj["filters"] = L.conv.out_channels;
        lj["kernel"] = {L.conv.kernel_h, L.conv.kernel_w};
        lj["stride"] = L.conv.stride;
        lj["pad"] = L.conv.pad;
        break;
      case LayerKind::Relu:
        lj["type"] = "relu";
        break;
      case LayerKind::Lrn:
        lj["type"] = "lrn";
        lj["window"] = L.lrn.window;
        lj["alpha"] = L.lrn.alpha;
        lj["beta"] = L.lrn.beta;
        break;
      case LayerKind::MaxPool:
        lj["type"] = "maxpool";
        lj["window"] = L.pool.window;
        lj["stride"] = L.pool.stride;
        lj["pad"] = L.pool.pad;
        break;
      case LayerKind::Dropout:
        lj["type"] = "dropout";
        lj["ratio"] = L.dropout_ratio;
        break;
      case LayerKind::Fc:
        lj["type"] = "fc";
        lj["units"] = L.fc_out;
        break;
      case LayerKind::Inception:
        lj["type"] = "inception";
        lj["b1"] = L.inception.p1;
        lj["b3_reduce"] = L.inception.p3r;
        lj["b3"] = L.inception.p3;
        lj["b5_reduce"] = L.inception.p5r;
        lj["b5"] = L.inception.p5;
        lj["pool_proj"] = L.inception.ppool;
        break;
    }
    j["layers"].push_back(lj);
  }
  return j.dump(2) + "\n";
}

// ---- channel concat/split ---------------------------------------------------

Tensor concat_channels(const std::vector<Tensor>& parts) {
  const int64_t N = parts[0].extent(0), H = parts[0].extent(2),
                W = parts[0].extent(3);
  int64_t C = 0;
  for (const auto& p : parts) {
    if (p.extent(0) != N || p.extent(2) != H || p.extent(3) != W)
      throw ShapeError("concat: branch output extents differ");
    C += p.extent(1);
  }
  Tensor out({N, C, H, W});
  float* o = out.data();
  for (int64_t n = 0; n < N; ++n) {
    int64_t coff = 0;
    for (const auto& p : parts) {
      const int64_t pc = p.extent(1);
      std::copy(p.data() + n * pc * H * W, p.data() + (n + 1) * pc * H * W,
                o + (n * C + coff) * H * W);
      coff += pc;
    }
  }
  return out;
}

std::vector<Tensor> split_channels(const Tensor& x,
                                   const std::vector<int64_t>& widths) {
  const int64_t N = x.extent(0), C = x.extent(1), H = x.extent(2),
                W = x.extent(3);
  int64_t total = 0;
  for (int64_t w : widths) total += w;
  if (total != C) throw ShapeError("split: widths do not sum to channels");
  std::vector<Tensor> parts;
  int64_t coff = 0;
  for (int64_t w : widths) {
    Tensor p({N, w, H, W});
    for (int64_t n = 0; n < N; ++n)
      std::copy(x.data() + (n * C + coff) * H * W,
                x.data() + (n * C + coff + w) * H * W,
                p.data() + n * w * H * W);
    parts.push_back(std::move(p));
    coff += w;
  }
  return parts;
}

// ---- model ---------------------------------------------------------------

namespace {

// Inception sub-cache layout (13 slots):
//  0 conv1x1 in, 1 relu in, 2 conv3x3r in, 3 relu in, 4 conv3x3 in, 5 relu in,
//  6 conv5x5r in, 7 relu in, 8 conv5x5 in, 9 relu in,
// 10 pool argmax/in-shape, 11 conv proj in, 12 relu in.
constexpr size_t kInceptionSubs = 13;
const PoolParams kInceptionPool{3, 1, 1};

}  // namespace

const ParamGroup* Model::find_param(const std::string& name) const {
  for (const auto& g : params_)
    if (g.name == name) return &g;
  return nullptr;
}

Model Model::build(const NetworkSpec& spec, const RegimeSpec& regime,
                   Rng& rng) {
  spec.validate();
  if (regime.regime == Regime::DT && regime.donor)
    throw ConfigError(spec.name +
                      ": DT trains from scratch; a donor checkpoint was "
                      "supplied");
  if (regime.regime != Regime::DT && !regime.donor)
    throw ConfigError(spec.name + ": regime " + regime_str(regime.regime) +
                      " requires a donor checkpoint");

  Model m;
  m.spec_ = spec;
  m.regime_ = regime.regime;
  const auto shapes = spec.chained_shapes();

  // Create groups in layer order; shapes come from the chain.
  Shape in{spec.in_channels, spec.in_h, spec.in_w};
  for (size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerDesc& L = spec.layers[li];
    std::vector<size_t> pidx;
    auto add_group = [&](const std::string& gname, Shape wshape,
                         int64_t bias_len) {
      pidx.push_back(m.params_.size());
      ParamGroup g;
      g.name = gname;
      g.w = Tensor(std::move(wshape));
      g.b = Tensor(Shape{bias_len});
      m.params_.push_back(std::move(g));
    };
    switch (L.kind) {
      case LayerKind::Conv:
        add_group(L.name,
                  {L.conv.out_channels, in[0], L.conv.kernel_h, L.conv.kernel_w},
                  L.conv.out_channels);
        break;
      case LayerKind::Fc: {
        const int64_t d = shape_numel(in);
        add_group(L.name, {d, L.fc_out}, L.fc_out);
        break;
      }
      case LayerKind::Inception: {
        const auto& mi = L.inception;
        add_group(L.name + ".1x1", {mi.p1, in[0], 1, 1}, mi.p1);
        add_group(L.name + ".3x3r", {mi.p3r, in[0], 1, 1}, mi.p3r);
        add_group(L.name + ".3x3", {mi.p3, mi.p3r, 3, 3}, mi.p3);
        add_group(L.name + ".5x5r", {mi.p5r, in[0], 1, 1}, mi.p5r);
        add_group(L.name + ".5x5", {mi.p5, mi.p5r, 5, 5}, mi.p5);
        add_group(L.name + ".pool", {mi.ppool, in[0], 1, 1}, mi.ppool);
        break;
      }
      default:
        break;
    }
    // Record which layer each group belongs to and its regime multiplier.
    for (size_t pi : pidx) {
      const bool classifier = spec.is_classifier(L.name);
      double mult = 1.0;
      if (regime.regime == Regime::SFT) mult = classifier ? 1.0 : 0.0;
      m.params_[pi].lr_mult = mult;
    }
    m.layer_params_.push_back(std::move(pidx));
    in = shapes[li];
  }

  // Weight binding. Random draws happen in group order so builds with the
  // same seed are bit-identical.
  std::vector<std::string> problems;
  for (size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerDesc& L = spec.layers[li];
    const bool classifier = spec.is_classifier(L.name);
    for (size_t pi : m.layer_params_[li]) {
      ParamGroup& g = m.params_[pi];
      const bool random_init = regime.regime == Regime::DT || classifier;
      if (random_init) {
        g.w = init_weights<float>(g.w.shape(), InitScheme::uniform_scaled(),
                                  rng);
        g.b.fill(0.0f);
      } else {
        const CheckpointRecord* rec = regime.donor->find(g.name);
        if (!rec) {
          problems.push_back(g.name + " (missing)");
          continue;
        }
        if (rec->dims != g.w.shape() ||
            int64_t(rec->bias.size()) != g.b.numel()) {
          problems.push_back(g.name + " (shape " + shape_str(rec->dims) +
                             " vs expected " + shape_str(g.w.shape()) + ")");
          continue;
        }
        std::copy(rec->weights.begin(), rec->weights.end(), g.w.data());
        std::copy(rec->bias.begin(), rec->bias.end(), g.b.data());
      }
    }
  }
  if (!problems.empty())
    throw DonorMismatchError(spec.name + ": donor checkpoint mismatch: " +
                             join(problems, ", "));
  return m;
}

Tensor Model::run(const Tensor& batch, Mode mode, Rng* dropout_rng,
                  ForwardCache* cache, const std::string& stop_after) const {
  if (batch.rank() != 4 || batch.extent(1) != spec_.in_channels ||
      batch.extent(2) != spec_.in_h || batch.extent(3) != spec_.in_w)
    throw ShapeError(spec_.name + ": input shape " + shape_str(batch.shape()) +
                     " does not match spec input (N," +
                     std::to_string(spec_.in_channels) + "," +
                     std::to_string(spec_.in_h) + "," +
                     std::to_string(spec_.in_w) + ")");
  if (cache) cache->layers.assign(spec_.layers.size(), {});
  Tensor x = batch;
  for (size_t li = 0; li < spec_.layers.size(); ++li) {
    const LayerDesc& L = spec_.layers[li];
    LayerCache* lc = cache ? &cache->layers[li] : nullptr;
    switch (L.kind) {
      case LayerKind::Conv: {
        const ParamGroup& g = params_[layer_params_[li][0]];
        if (lc) lc->input = x;
        x = conv_forward(x, g.w, g.b, L.conv.stride, L.conv.pad, L.name);
        break;
      }
      case LayerKind::Relu: {
        if (lc) lc->input = x;
        x = relu_forward(x);
        break;
      }
      case LayerKind::Lrn: {
        if (lc) lc->input = x;
        x = lrn_forward(x, L.lrn);
        break;
      }
      case LayerKind::MaxPool: {
        auto pr = maxpool_forward(x, L.pool, L.name);
        if (lc) {
          lc->argmax = std::move(pr.argmax);
          lc->pool_in_shape = x.shape();
        }
        x = std::move(pr.output);
        break;
      }
      case LayerKind::Dropout: {
        if (mode == Mode::Train) {
          DropoutState st;
          st.ratio = L.dropout_ratio;
          st.mode = Mode::Train;
          Tensor out = dropout_forward(x, st, *dropout_rng);
          if (lc) lc->dropout = std::move(st);
          x = std::move(out);
        }
        break;  // inference: identity
      }
      case LayerKind::Fc: {
        const ParamGroup& g = params_[layer_params_[li][0]];
        Shape orig = x.shape();
        Tensor flat =
            x.rank() == 2
                ? std::move(x)
                : x.reshaped({x.extent(0), x.numel() / x.extent(0)});
        if (lc) {
          lc->input = flat;
          lc->fc_in_shape = orig;
        }
        x = fc_forward(flat, g.w, g.b, L.name);
        break;
      }
      case LayerKind::Inception: {
        const auto& pi = layer_params_[li];
        if (lc) lc->sub.assign(kInceptionSubs, {});
        auto sub = [&](size_t i) -> LayerCache* {
          return lc ? &lc->sub[i] : nullptr;
        };
        auto conv = [&](const Tensor& in, size_t which, int64_t pad,
                        LayerCache* c) {
          const ParamGroup& g = params_[pi[which]];
          if (c) c->input = in;
          return conv_forward(in, g.w, g.b, 1, pad, g.name);
        };
        auto relu = [&](const Tensor& in, LayerCache* c) {
          if (c) c->input = in;
          return relu_forward(in);
        };
        Tensor r1 = relu(conv(x, 0, 0, sub(0)), sub(1));
        Tensor r3 = relu(conv(relu(conv(x, 1, 0, sub(2)), sub(3)), 2, 1, sub(4)),
                         sub(5));
        Tensor r5 = relu(conv(relu(conv(x, 3, 0, sub(6)), sub(7)), 4, 2, sub(8)),
                         sub(9));
        auto pm = maxpool_forward(x, kInceptionPool, L.name + ".pool");
        if (lc) {
          lc->sub[10].argmax = std::move(pm.argmax);
          lc->sub[10].pool_in_shape = x.shape();
        }
        Tensor rp = relu(conv(pm.output, 5, 0, sub(11)), sub(12));
        x = concat_channels({r1, r3, r5, rp});
        break;
      }
    }
    if (!stop_after.empty() && L.name == stop_after) return x;
  }
  return x;
}

Tensor Model::infer_logits(const Tensor& batch) const {
  return run(batch, Mode::Infer, nullptr, nullptr, "");
}

Tensor Model::infer(const Tensor& batch) const {
  Tensor logits = infer_logits(batch);
  const int64_t N = logits.extent(0), C = logits.extent(1);
  Tensor probs(logits.shape());
  for (int64_t n = 0; n < N; ++n) {
    double m = logits.at({n, int64_t(0)});
    for (int64_t k = 1; k < C; ++k)
      m = std::max(m, double(logits.at({n, k})));
    double sum = 0.0;
    for (int64_t k = 0; k < C; ++k)
      sum += std::exp(double(logits.at({n, k})) - m);
    for (int64_t k = 0; k < C; ++k)
      probs.at({n, k}) =
          float(std::exp(double(logits.at({n, k})) - m) / sum);
  }
  return probs;
}

Tensor Model::forward_train(const Tensor& batch, Rng& dropout_rng,
                            ForwardCache& cache) const {
  cache.logits = run(batch, Mode::Train, &dropout_rng, &cache, "");
  return cache.logits;
}

Tensor Model::forward_until(const Tensor& batch,
                            const std::string& layer_name) const {
  const bool known =
      std::any_of(spec_.layers.begin(), spec_.layers.end(),
                  [&](const LayerDesc& l) { return l.name == layer_name; });
  if (!known) {
    std::vector<std::string> names;
    for (const auto& l : spec_.layers) names.push_back(l.name);
    throw ConfigError(spec_.name + ": no layer named '" + layer_name +
                      "'; available: " + join(names, ", "));
  }
  return run(batch, Mode::Infer, nullptr, nullptr, layer_name);
}

Grads Model::backward(const ForwardCache& cache,
                      const Tensor& grad_logits) const {
  Grads grads(params_.size());
  Tensor g = grad_logits;
  for (size_t li = spec_.layers.size(); li-- > 0;) {
    const LayerDesc& L = spec_.layers[li];
    const LayerCache& lc = cache.layers[li];
    switch (L.kind) {
      case LayerKind::Conv: {
        const size_t pi = layer_params_[li][0];
        auto cg = conv_backward(lc.input, params_[pi].w, L.conv.stride,
                                L.conv.pad, g, L.name);
        grads[pi] = {std::move(cg.weights), std::move(cg.bias)};
        g = std::move(cg.input);
        break;
      }
      case LayerKind::Relu:
        g = relu_backward(lc.input, g);
        break;
      case LayerKind::Lrn:
        g = lrn_backward(lc.input, L.lrn, g);
        break;
      case LayerKind::MaxPool:
        g = maxpool_backward(lc.pool_in_shape, lc.argmax, g);
        break;
      case LayerKind::Dropout:
        g = dropout_backward(lc.dropout, g);
        break;
      case LayerKind::Fc: {
        const size_t pi = layer_params_[li][0];
        auto fg = fc_backward(lc.input, params_[pi].w, g, L.name);
        grads[pi] = {std::move(fg.weights), std::move(fg.bias)};
        g = lc.fc_in_shape.size() == 2
                ? std::move(fg.input)
                : fg.input.reshaped(lc.fc_in_shape);
        break;
      }
      case LayerKind::Inception: {
        const auto& pi = layer_params_[li];
        const auto& mi = L.inception;
        auto parts = split_channels(g, {mi.p1, mi.p3, mi.p5, mi.ppool});
        auto conv_b = [&](const LayerCache& c, size_t which, int64_t pad,
                          const Tensor& gout) {
          auto cg = conv_backward(c.input, params_[pi[which]].w, 1, pad, gout,
                                  params_[pi[which]].name);
          grads[pi[which]] = {std::move(cg.weights), std::move(cg.bias)};
          return std::move(cg.input);
        };
        // branch 1x1
        Tensor gin = conv_b(lc.sub[0], 0, 0,
                            relu_backward(lc.sub[1].input, parts[0]));
        // branch 3x3
        {
          Tensor t = relu_backward(lc.sub[5].input, parts[1]);
          t = conv_b(lc.sub[4], 2, 1, t);
          t = relu_backward(lc.sub[3].input, t);
          gin = gin.add(conv_b(lc.sub[2], 1, 0, t));
        }
        // branch 5x5
        {
          Tensor t = relu_backward(lc.sub[9].input, parts[2]);
          t = conv_b(lc.sub[8], 4, 2, t);
          t = relu_backward(lc.sub[7].input, t);
          gin = gin.add(conv_b(lc.sub[6], 3, 0, t));
        }
        // pool projection
        {
          Tensor t = relu_backward(lc.sub[12].input, parts[3]);
          t = conv_b(lc.sub[11], 5, 0, t);
          gin = gin.add(
              maxpool_backward(lc.sub[10].pool_in_shape, lc.sub[10].argmax, t));
        }
        g = std::move(gin);
        break;
      }
    }
  }
  return grads;
}

Checkpoint Model::to_checkpoint(CheckpointMeta meta) const {
  Checkpoint ckpt;
  if (meta.regime == 255) meta.regime = uint8_t(regime_);
  ckpt.meta = meta;
  for (const auto& g : params_) {
    CheckpointRecord rec;
    rec.name = g.name;
    rec.dims = g.w.shape();
    rec.weights = g.w.vec();
    rec.bias = g.b.vec();
    ckpt.records.push_back(std::move(rec));
  }
  return ckpt;
}

void Model::load_from(const Checkpoint& ckpt) {
  std::vector<std::string> problems;
  for (auto& g : params_) {
    const CheckpointRecord* rec = ckpt.find(g.name);
    if (!rec) {
      problems.push_back(g.name + " (missing)");
      continue;
    }
    if (rec->dims != g.w.shape() || int64_t(rec->bias.size()) != g.b.numel()) {
      problems.push_back(g.name + " (shape " + shape_str(rec->dims) +
                         " vs expected " + shape_str(g.w.shape()) + ")");
      continue;
    }
    std::copy(rec->weights.begin(), rec->weights.end(), g.w.data());
    std::copy(rec->bias.begin(), rec->bias.end(), g.b.data());
  }
  if (!problems.empty())
    throw DonorMismatchError(spec_.name + ": checkpoint does not cover spec: " +
                             join(problems, ", "));
}

}  // namespace clenet
