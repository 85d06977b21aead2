#include "clenet/localize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "clenet/data.hpp"
#include "clenet/error.hpp"
#include "clenet/util.hpp"

namespace fs = std::filesystem;

namespace clenet {

std::vector<int64_t> window_positions(int64_t extent, int64_t w, int64_t s) {
  if (w < 1 || s < 1) throw ConfigError("windows: w and s must be >= 1");
  if (w > extent)
    throw ConfigError("windows: window " + std::to_string(w) +
                      " exceeds extent " + std::to_string(extent));
  std::vector<int64_t> pos;
  const int64_t count = (extent - w) / s + 1;
  for (int64_t i = 0; i < count; ++i) pos.push_back(i * s);
  return pos;
}

DiagnosticMap diagnostic_map(const Model& model, const Tensor& image_chw,
                             int64_t w, int64_t s, const std::string& image_id,
                             int64_t grid_truncate) {
  if (image_chw.rank() != 3)
    throw ShapeError("diagnostic map: expected a (C,H,W) image, got " +
                     shape_str(image_chw.shape()));
  if (image_chw.extent(0) != model.spec().in_channels)
    throw ShapeError("diagnostic map: image channels do not match the model");
  auto ys = window_positions(image_chw.extent(1), w, s);
  auto xs = window_positions(image_chw.extent(2), w, s);
  if (grid_truncate > 0) {
    if (int64_t(ys.size()) > grid_truncate) ys.resize(size_t(grid_truncate));
    if (int64_t(xs.size()) > grid_truncate) xs.resize(size_t(grid_truncate));
  }

  DiagnosticMap map;
  map.image_id = image_id;
  map.window = w;
  map.stride = s;
  map.rows = int64_t(ys.size());
  map.cols = int64_t(xs.size());
  map.values.assign(size_t(map.rows * map.cols), 0.0);

  const int64_t in_h = model.spec().in_h, in_w = model.spec().in_w;
  const int64_t cells = map.rows * map.cols;
  // One independent forward per window; cells are embarrassingly parallel
  // and each value is bit-identical to a direct single-window call.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int64_t cell = 0; cell < cells; ++cell) {
    const int64_t r = cell / map.cols, c = cell % map.cols;
    Tensor crop = crop_chw(image_chw, ys[size_t(r)], xs[size_t(c)], w, w);
    Tensor sized = resize_bilinear(crop, in_h, in_w);
    Tensor batch = sized.reshaped({1, sized.extent(0), in_h, in_w});
    Tensor probs = model.infer(batch);
    map.values[size_t(cell)] = double(probs.at({0, 1}));
  }
  return map;
}

std::vector<BoundingBox> top_boxes(const DiagnosticMap& map, int64_t n,
                                   double min_score) {
  if (n < 1) throw ConfigError("top_boxes: n must be >= 1");
  std::vector<int64_t> cells(map.values.size());
  std::iota(cells.begin(), cells.end(), 0);
  std::stable_sort(cells.begin(), cells.end(), [&](int64_t a, int64_t b) {
    return map.values[size_t(a)] > map.values[size_t(b)];
  });  // stable: ties keep row-major cell order
  std::vector<BoundingBox> boxes;
  for (int64_t cell : cells) {
    if (int64_t(boxes.size()) >= n) break;
    const double score = map.values[size_t(cell)];
    if (score < min_score) break;
    const int64_t r = cell / map.cols, c = cell % map.cols;
    boxes.push_back({c * map.stride, r * map.stride, map.window, score});
  }
  return boxes;
}

const std::array<std::array<uint8_t, 3>, 256>& warm_colormap() {
  static const auto lut = [] {
    std::array<std::array<uint8_t, 3>, 256> t{};
    for (int i = 0; i < 256; ++i) {
      // red rises linearly (keeps the map injective); blue decays from a
      // dark-blue base; green arrives late for the red->yellow ramp.
      const int r = i;
      const int g = i < 128 ? 0 : std::min(255, (i - 128) * 2);
      const int b = std::max(0, 160 - (i * 5) / 4);
      t[size_t(i)] = {uint8_t(r), uint8_t(g), uint8_t(b)};
    }
    return t;
  }();
  return lut;
}

namespace {

std::vector<uint8_t> normalize_plane(const float* v, int64_t n) {
  float lo = v[0], hi = v[0];
  for (int64_t i = 1; i < n; ++i) {
    lo = std::min(lo, v[i]);
    hi = std::max(hi, v[i]);
  }
  std::vector<uint8_t> out(size_t(n), 0);
  if (hi > lo) {
    for (int64_t i = 0; i < n; ++i)
      out[size_t(i)] = uint8_t(
          std::lround(255.0 * (double(v[i]) - lo) / (double(hi) - lo)));
  }
  return out;
}

void write_pgm(const std::string& path, const std::vector<uint8_t>& gray,
               int64_t h, int64_t w) {
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(gray.data()), gray.size());
  write_file(path, out);
}

void write_ppm(const std::string& path, const std::vector<uint8_t>& gray,
               int64_t h, int64_t w) {
  const auto& lut = warm_colormap();
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) +
                    "\n255\n";
  for (uint8_t g : gray) {
    const auto& c = lut[g];
    out.push_back(char(c[0]));
    out.push_back(char(c[1]));
    out.push_back(char(c[2]));
  }
  write_file(path, out);
}

}  // namespace

void export_activation_maps(const Model& model, const Tensor& image_chw,
                            const std::string& layer_name,
                            const std::string& out_dir) {
  const auto& layers = model.spec().layers;
  auto it = std::find_if(layers.begin(), layers.end(), [&](const LayerDesc& l) {
    return l.name == layer_name;
  });
  if (it == layers.end() || it->kind != LayerKind::Conv) {
    std::vector<std::string> convs;
    for (const auto& l : layers)
      if (l.kind == LayerKind::Conv) convs.push_back(l.name);
    throw ConfigError("export maps: '" + layer_name +
                      "' is not a convolutional layer; available: " +
                      join(convs, ", "));
  }
  ensure_dir(out_dir);
  Tensor batch = image_chw.reshaped({1, image_chw.extent(0),
                                     image_chw.extent(1), image_chw.extent(2)});
  Tensor act = model.forward_until(batch, layer_name);
  const int64_t planes = act.extent(1), h = act.extent(2), w = act.extent(3);

  struct PlaneEnergy {
    int64_t plane;
    double energy;
  };
  std::vector<PlaneEnergy> ranking;
  for (int64_t p = 0; p < planes; ++p) {
    const float* v = act.data() + p * h * w;
    double energy = 0.0;
    for (int64_t i = 0; i < h * w; ++i) energy += std::abs(double(v[i]));
    ranking.push_back({p, energy});
    const auto gray = normalize_plane(v, h * w);
    char name[64];
    std::snprintf(name, sizeof name, "plane_%03lld.pgm", (long long)p);
    write_pgm((fs::path(out_dir) / name).string(), gray, h, w);
    std::snprintf(name, sizeof name, "plane_%03lld_color.ppm", (long long)p);
    write_ppm((fs::path(out_dir) / name).string(), gray, h, w);
  }
  std::stable_sort(ranking.begin(), ranking.end(),
                   [](const PlaneEnergy& a, const PlaneEnergy& b) {
                     return a.energy > b.energy;
                   });
  std::string csv = "rank,plane,energy\n";
  for (size_t i = 0; i < ranking.size(); ++i)
    csv += std::to_string(i) + "," + std::to_string(ranking[i].plane) + "," +
           fmt_g17(ranking[i].energy) + "\n";
  write_file((fs::path(out_dir) / "planes_by_energy.csv").string(), csv);
}

void write_map_csv(const std::string& path, const DiagnosticMap& map) {
  std::string out;
  for (int64_t r = 0; r < map.rows; ++r) {
    std::vector<std::string> cells;
    for (int64_t c = 0; c < map.cols; ++c)
      cells.push_back(fmt_g17(map.at(r, c)));
    out += join(cells, ",") + "\n";
  }
  write_file(path, out);
}

void write_map_pgm(const std::string& path, const DiagnosticMap& map) {
  std::vector<uint8_t> gray(map.values.size());
  for (size_t i = 0; i < map.values.size(); ++i)
    gray[i] = uint8_t(std::lround(std::clamp(map.values[i], 0.0, 1.0) * 255.0));
  write_pgm(path, gray, map.rows, map.cols);
}

void write_map_ppm(const std::string& path, const DiagnosticMap& map) {
  std::vector<uint8_t> gray(map.values.size());
  for (size_t i = 0; i < map.values.size(); ++i)
    gray[i] = uint8_t(std::lround(std::clamp(map.values[i], 0.0, 1.0) * 255.0));
  write_ppm(path, gray, map.rows, map.cols);
}

void write_boxes_csv(const std::string& path, const std::string& image_id,
                     const std::vector<BoundingBox>& boxes) {
  std::string out = "image_id,x,y,w,score\n";
  for (const auto& b : boxes)
    out += image_id + "," + std::to_string(b.x) + "," + std::to_string(b.y) +
           "," + std::to_string(b.w) + "," + fmt_g17(b.score) + "\n";
  write_file(path, out);
}

void write_overlay_svg(const std::string& path, const std::string& image_href,
                       int64_t image_h, int64_t image_w,
                       const std::vector<BoundingBox>& boxes) {
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" "
                    "xmlns:xlink=\"http://www.w3.org/1999/xlink\" width=\"" +
                    std::to_string(image_w) + "\" height=\"" +
                    std::to_string(image_h) + "\">\n";
  svg += "<image xlink:href=\"" + image_href + "\" x=\"0\" y=\"0\" width=\"" +
         std::to_string(image_w) + "\" height=\"" + std::to_string(image_h) +
         "\"/>\n";
  char buf[256];
  for (const auto& b : boxes) {
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%lld\" y=\"%lld\" width=\"%lld\" height=\"%lld\" "
                  "fill=\"none\" stroke=\"#ffd700\" stroke-width=\"3\"/>\n",
                  (long long)b.x, (long long)b.y, (long long)b.w,
                  (long long)b.w);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%lld\" y=\"%lld\" font-size=\"18\" "
                  "fill=\"#ffd700\">%.3f</text>\n",
                  (long long)(b.x + 4), (long long)(b.y + 20), b.score);
    svg += buf;
  }
  svg += "</svg>\n";
  write_file(path, svg);
}

}  // namespace clenet
