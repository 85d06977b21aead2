#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "clenet/network.hpp"
#include "clenet/tensor.hpp"

namespace clenet {

// Top-left offsets 0, s, 2s, ... while the window still fits.
std::vector<int64_t> window_positions(int64_t extent, int64_t w, int64_t s);

// Grid of positive-class probabilities from sliding a classifier window.
struct DiagnosticMap {
  std::string image_id;
  int64_t window = 0;
  int64_t stride = 0;
  int64_t rows = 0, cols = 0;
  std::vector<double> values;  // row-major, rows*cols

  double at(int64_t r, int64_t c) const {
    return values[size_t(r * cols + c)];
  }
};

// Cell (r,c) is the model's diagnostic probability on the window at
// (r*s, c*s), inference mode, one window per forward call (values must match
// a direct per-window call exactly). Window crops are resized bilinearly to
// the model input when sizes differ. grid_truncate > 0 keeps only the first
// rows/cols (the trailing row/column of window positions is dropped).
DiagnosticMap diagnostic_map(const Model& model, const Tensor& image_chw,
                             int64_t w, int64_t s,
                             const std::string& image_id,
                             int64_t grid_truncate = 0);

struct BoundingBox {
  int64_t x = 0, y = 0;  // top-left pixel of the window
  int64_t w = 0;
  double score = 0.0;
};

// The n highest-scoring cells at or above min_score, descending; ties in
// row-major cell order. May return fewer than n boxes.
std::vector<BoundingBox> top_boxes(const DiagnosticMap& map, int64_t n,
                                   double min_score);

// 256-entry dark-blue -> red -> yellow lookup; every entry distinct, so a
// rendered color maps back to its gray value by inverse lookup.
const std::array<std::array<uint8_t, 3>, 256>& warm_colormap();

// One grayscale PGM and one warm-color PPM per feature plane of the named
// conv layer, min-max normalized per plane (constant planes render black),
// plus an index CSV sorted by activation energy.
void export_activation_maps(const Model& model, const Tensor& image_chw,
                            const std::string& layer_name,
                            const std::string& out_dir);

void write_map_csv(const std::string& path, const DiagnosticMap& map);
void write_map_pgm(const std::string& path, const DiagnosticMap& map);
void write_map_ppm(const std::string& path, const DiagnosticMap& map);
void write_boxes_csv(const std::string& path, const std::string& image_id,
                     const std::vector<BoundingBox>& boxes);
// Box overlay referencing the source raster by path.
void write_overlay_svg(const std::string& path, const std::string& image_href,
                       int64_t image_h, int64_t image_w,
                       const std::vector<BoundingBox>& boxes);

}  // namespace clenet
