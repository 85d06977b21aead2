#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "clenet/png_io.hpp"
#include "clenet/rng.hpp"
#include "clenet/tensor.hpp"

namespace clenet {

enum class TumorGroup { Glioma, Meningioma, Other };
enum class SplitTag { Dev, Test };

std::string group_str(TumorGroup g);
TumorGroup group_from_str(const std::string& s);
std::string split_str(SplitTag s);
SplitTag split_from_str(const std::string& s);

// One labeled image. label: 1 = diagnostic (positive), 0 = nondiagnostic.
struct ImageRecord {
  std::string path;  // relative to the manifest root
  std::string patient_id;
  TumorGroup group = TumorGroup::Other;
  int label = 0;
  SplitTag split = SplitTag::Dev;
};

struct Manifest {
  std::string root;  // directory that relative record paths resolve against
  std::vector<ImageRecord> records;

  std::vector<std::string> patient_ids() const;  // unique, in record order
  Manifest filter_split(SplitTag tag) const;
  Manifest filter_patients(const std::vector<std::string>& keep) const;
  Manifest filter_patients_excluding(const std::vector<std::string>& drop) const;
  std::string resolve(const std::string& rel_path) const;
  bool has_both_classes() const;

  // CSV with header path,patient_id,group,label,split.
  void save(const std::string& path) const;
  static Manifest load(const std::string& path);
};

// Throws DataError when a patient id appears on both sides.
void require_patient_disjoint(const Manifest& a, const Manifest& b,
                              const std::string& context);

// ---- synthetic generator -----------------------------------------------------

struct SynthConfig {
  int64_t patients = 20;
  int64_t images_min = 8;
  int64_t images_max = 16;
  double diag_fraction = 0.49;
  int64_t image_size = 256;
  uint64_t seed = 1;
  // Alternate appearance parameters; used to produce the pretraining corpus
  // so fine-tuning starts from a different but related source task.
  bool source_domain = false;
};

// Writes 8-bit grayscale PNGs under out_dir/images and returns the manifest
// (root = out_dir, split defaulted to dev). Diagnostic frames carry bright
// cellular blobs on a textured background; nondiagnostic frames carry
// directional motion streaks or dense red-blood-cell clutter. Per-patient
// appearance parameters are drawn once so images cluster by patient.
Manifest generate_synthetic(const SynthConfig& cfg, const std::string& out_dir);

// ---- splits -------------------------------------------------------------------

// Patient-level split stratified by tumor group. Total test patient count is
// round(fraction * patients), apportioned per group by largest remainder.
std::pair<Manifest, Manifest> split_dev_test(const Manifest& manifest,
                                             double test_patient_fraction,
                                             uint64_t seed);

struct Fold {
  std::vector<std::string> patients;  // validation patients of this fold
  Manifest train;
  Manifest val;
};

struct FoldPlan {
  std::vector<Fold> folds;
};

// Balanced patient partition into k folds (first folds take the remainder).
FoldPlan make_folds(const Manifest& dev, int64_t k, uint64_t seed);

// ---- batch loading ------------------------------------------------------------

class ImageCache {
 public:
  const GrayImage& get(const std::string& abs_path) const;
  void preload(const Manifest& manifest);

 private:
  mutable std::mutex mu_;
  mutable std::map<std::string, GrayImage> images_;
};

struct CropPolicy {
  int64_t crop = 64;
  bool train = false;     // random crop + horizontal flip vs center crop
  int64_t channels = 1;   // grayscale replicated when a spec wants more
};

struct Batch {
  Tensor images;  // (N, channels, crop, crop), values scaled to [0,1]
  std::vector<int> labels;
  std::vector<std::string> ids;  // record paths
};

// rng may be null in eval mode; required in train mode.
Batch load_batch(const Manifest& manifest, std::span<const size_t> indices,
                 const CropPolicy& policy, Rng* rng,
                 const ImageCache* cache = nullptr);

// ---- small raster helpers ------------------------------------------------------

Tensor tensor_from_image(const GrayImage& img);  // (1,H,W) in [0,1]
Tensor crop_chw(const Tensor& chw, int64_t y0, int64_t x0, int64_t h,
                int64_t w);
Tensor resize_bilinear(const Tensor& chw, int64_t out_h, int64_t out_w);

}  // namespace clenet
