#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "clenet/data.hpp"
#include "clenet/error.hpp"

namespace fs = std::filesystem;

namespace clenet {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Per-patient appearance so images cluster by patient.
struct PatientLook {
  double density;     // cellular density multiplier
  double bg_gain;     // background texture gain
  double streak_dir;  // preferred motion-artifact direction
  double rbc_density;
};

struct Field {
  int64_t size;
  std::vector<double> v;  // size*size, additive luminance

  void add(int64_t y, int64_t x, double a) {
    if (y >= 0 && y < size && x >= 0 && x < size) v[size_t(y * size + x)] += a;
  }
};

void render_background(Field& f, const PatientLook& look, Rng& rng) {
  const int64_t S = f.size;
  const int64_t G = std::max<int64_t>(4, S / 32);
  std::vector<double> grid(size_t((G + 1) * (G + 1)));
  for (auto& g : grid) g = rng.next_uniform(0.04, 0.04 + 0.22 * look.bg_gain);
  const double cell = double(S) / double(G);
  for (int64_t y = 0; y < S; ++y) {
    const double gy = double(y) / cell;
    const int64_t iy = std::min<int64_t>(int64_t(gy), G - 1);
    const double wy = gy - double(iy);
    for (int64_t x = 0; x < S; ++x) {
      const double gx = double(x) / cell;
      const int64_t ix = std::min<int64_t>(int64_t(gx), G - 1);
      const double wx = gx - double(ix);
      const double v00 = grid[size_t(iy * (G + 1) + ix)];
      const double v01 = grid[size_t(iy * (G + 1) + ix + 1)];
      const double v10 = grid[size_t((iy + 1) * (G + 1) + ix)];
      const double v11 = grid[size_t((iy + 1) * (G + 1) + ix + 1)];
      f.v[size_t(y * S + x)] = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                               wy * ((1 - wx) * v10 + wx * v11);
    }
  }
  for (auto& px : f.v) px += rng.next_uniform(-0.015, 0.015);
}

void add_gaussian_blob(Field& f, double cy, double cx, double sigma,
                       double amp) {
  const int64_t r = int64_t(std::ceil(3.0 * sigma));
  const int64_t y0 = int64_t(cy) - r, y1 = int64_t(cy) + r;
  const int64_t x0 = int64_t(cx) - r, x1 = int64_t(cx) + r;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int64_t y = y0; y <= y1; ++y)
    for (int64_t x = x0; x <= x1; ++x) {
      const double d2 = (double(y) - cy) * (double(y) - cy) +
                        (double(x) - cx) * (double(x) - cx);
      f.add(y, x, amp * std::exp(-d2 * inv));
    }
}

void add_disc(Field& f, double cy, double cx, double radius, double amp) {
  const int64_t r = int64_t(std::ceil(radius));
  for (int64_t y = int64_t(cy) - r; y <= int64_t(cy) + r; ++y)
    for (int64_t x = int64_t(cx) - r; x <= int64_t(cx) + r; ++x) {
      const double d2 = (double(y) - cy) * (double(y) - cy) +
                        (double(x) - cx) * (double(x) - cx);
      const double t = d2 / (radius * radius);
      if (t <= 1.0) f.add(y, x, amp * (1.0 - t));
    }
}

// Bright cellular blobs: hypercellular texture of a diagnostic frame.
void render_diagnostic(Field& f, const PatientLook& look, Rng& rng,
                       bool source_domain) {
  const double area = double(f.size) * double(f.size) / (256.0 * 256.0);
  const double sigma_scale = source_domain ? 1.6 : 1.0;
  const int64_t cells =
      std::llround((source_domain ? 120.0 : 150.0) * area * look.density);
  for (int64_t i = 0; i < cells; ++i) {
    const double cy = rng.next_uniform(0, double(f.size));
    const double cx = rng.next_uniform(0, double(f.size));
    const double sigma = rng.next_uniform(2.0, 3.5) * sigma_scale;
    const double amp = rng.next_uniform(0.35, 0.75);
    add_gaussian_blob(f, cy, cx, sigma, amp);
  }
}

// Directional motion streaks.
void render_streaks(Field& f, const PatientLook& look, Rng& rng,
                    bool source_domain) {
  const double area = double(f.size) * double(f.size) / (256.0 * 256.0);
  const int64_t streaks = std::llround(25.0 * area);
  const double jitter = source_domain ? 0.6 : 0.25;
  for (int64_t i = 0; i < streaks; ++i) {
    const double angle = look.streak_dir + rng.next_uniform(-jitter, jitter);
    const double len = rng.next_uniform(0.35, 0.8) * double(f.size);
    const double thick = rng.next_uniform(1.0, 2.2);
    const double amp = rng.next_uniform(0.05, 0.12);
    double y = rng.next_uniform(0, double(f.size));
    double x = rng.next_uniform(0, double(f.size));
    const double dy = std::sin(angle), dx = std::cos(angle);
    for (double t = 0; t < len; t += 1.0) {
      add_gaussian_blob(f, y, x, thick, amp);
      y += dy;
      x += dx;
    }
  }
}

// Dense small-disc clutter: red blood cell contamination.
void render_rbc(Field& f, const PatientLook& look, Rng& rng,
                bool source_domain) {
  const double area = double(f.size) * double(f.size) / (256.0 * 256.0);
  const double r_scale = source_domain ? 1.3 : 1.0;
  const int64_t discs = std::llround(420.0 * area * look.rbc_density);
  for (int64_t i = 0; i < discs; ++i) {
    const double cy = rng.next_uniform(0, double(f.size));
    const double cx = rng.next_uniform(0, double(f.size));
    const double radius = rng.next_uniform(1.3, 2.4) * r_scale;
    const double amp = rng.next_uniform(0.15, 0.32);
    add_disc(f, cy, cx, radius, amp);
  }
}

GrayImage quantize(const Field& f) {
  GrayImage img;
  img.height = img.width = f.size;
  img.pixels.resize(size_t(f.size * f.size));
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    const double v = std::clamp(f.v[i], 0.0, 1.0);
    img.pixels[i] = uint8_t(std::lround(v * 255.0));
  }
  return img;
}

// Streaming largest-remainder assignment toward the development cohort's
// glioma/meningioma/other proportions.
TumorGroup pick_group(int64_t patient_index, std::array<int64_t, 3>& counts) {
  static constexpr double shares[3] = {21.0 / 74.0, 30.0 / 74.0, 23.0 / 74.0};
  int best = 0;
  double best_deficit = -1e300;
  for (int g = 0; g < 3; ++g) {
    const double deficit =
        shares[g] * double(patient_index + 1) - double(counts[size_t(g)]);
    if (deficit > best_deficit) {
      best_deficit = deficit;
      best = g;
    }
  }
  counts[size_t(best)] += 1;
  return best == 0 ? TumorGroup::Glioma
                   : (best == 1 ? TumorGroup::Meningioma : TumorGroup::Other);
}

}  // namespace

Manifest generate_synthetic(const SynthConfig& cfg, const std::string& out_dir) {
  if (cfg.patients < 1) throw ConfigError("synth: need at least one patient");
  if (cfg.images_min < 1 || cfg.images_max < cfg.images_min)
    throw ConfigError("synth: bad images-per-patient range");
  if (cfg.diag_fraction <= 0.0 || cfg.diag_fraction >= 1.0)
    throw ConfigError("synth: diagnostic fraction must be in (0,1)");
  if (cfg.image_size < 32)
    throw ConfigError("synth: image size must be >= 32");

  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (ec) throw DataError("synth: cannot create output dir " + out_dir);

  Manifest manifest;
  manifest.root = out_dir;
  std::array<int64_t, 3> group_counts{0, 0, 0};

  for (int64_t p = 0; p < cfg.patients; ++p) {
    char pid[24];
    std::snprintf(pid, sizeof pid, "p%04lld", (long long)p);
    const TumorGroup group = pick_group(p, group_counts);

    Rng rng(derive_seed(cfg.seed, 1000 + uint64_t(p)), streams::kDataGen);
    PatientLook look{rng.next_uniform(0.75, 1.3), rng.next_uniform(0.6, 1.0),
                     rng.next_uniform(0.0, kPi), rng.next_uniform(0.8, 1.25)};
    const int64_t n_images =
        cfg.images_min +
        int64_t(rng.next_below(uint64_t(cfg.images_max - cfg.images_min + 1)));

    for (int64_t i = 0; i < n_images; ++i) {
      const bool diagnostic = rng.next_bernoulli(cfg.diag_fraction);
      Field f{cfg.image_size,
              std::vector<double>(size_t(cfg.image_size * cfg.image_size))};
      render_background(f, look, rng);
      if (diagnostic) {
        render_diagnostic(f, look, rng, cfg.source_domain);
      } else if (rng.next_bernoulli(0.5)) {
        render_streaks(f, look, rng, cfg.source_domain);
      } else {
        render_rbc(f, look, rng, cfg.source_domain);
      }
      char name[64];
      std::snprintf(name, sizeof name, "images/%s_%03lld.png", pid,
                    (long long)i);
      write_png_gray8((fs::path(out_dir) / name).string(), quantize(f));
      manifest.records.push_back(
          {name, pid, group, diagnostic ? 1 : 0, SplitTag::Dev});
    }
  }
  return manifest;
}

}  // namespace clenet
