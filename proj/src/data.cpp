#include "clenet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "clenet/error.hpp"
#include "clenet/util.hpp"

namespace fs = std::filesystem;

namespace clenet {

std::string group_str(TumorGroup g) {
  switch (g) {
    case TumorGroup::Glioma: return "glioma";
    case TumorGroup::Meningioma: return "meningioma";
    case TumorGroup::Other: return "other";
  }
  return "other";
}

TumorGroup group_from_str(const std::string& s) {
  if (s == "glioma") return TumorGroup::Glioma;
  if (s == "meningioma") return TumorGroup::Meningioma;
  if (s == "other") return TumorGroup::Other;
  throw FormatError("manifest: unknown tumor group '" + s + "'");
}

std::string split_str(SplitTag s) {
  return s == SplitTag::Dev ? "dev" : "test";
}

SplitTag split_from_str(const std::string& s) {
  if (s == "dev") return SplitTag::Dev;
  if (s == "test") return SplitTag::Test;
  throw FormatError("manifest: unknown split tag '" + s + "'");
}

std::vector<std::string> Manifest::patient_ids() const {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& r : records)
    if (seen.insert(r.patient_id).second) ids.push_back(r.patient_id);
  return ids;
}

Manifest Manifest::filter_split(SplitTag tag) const {
  Manifest out;
  out.root = root;
  for (const auto& r : records)
    if (r.split == tag) out.records.push_back(r);
  return out;
}

Manifest Manifest::filter_patients(const std::vector<std::string>& keep) const {
  std::set<std::string> k(keep.begin(), keep.end());
  Manifest out;
  out.root = root;
  for (const auto& r : records)
    if (k.count(r.patient_id)) out.records.push_back(r);
  return out;
}

Manifest Manifest::filter_patients_excluding(
    const std::vector<std::string>& drop) const {
  std::set<std::string> d(drop.begin(), drop.end());
  Manifest out;
  out.root = root;
  for (const auto& r : records)
    if (!d.count(r.patient_id)) out.records.push_back(r);
  return out;
}

std::string Manifest::resolve(const std::string& rel_path) const {
  fs::path p(rel_path);
  if (p.is_absolute()) return rel_path;
  return (fs::path(root) / p).string();
}

bool Manifest::has_both_classes() const {
  bool pos = false, neg = false;
  for (const auto& r : records) (r.label ? pos : neg) = true;
  return pos && neg;
}

void Manifest::save(const std::string& path) const {
  std::string out = "path,patient_id,group,label,split\n";
  for (const auto& r : records) {
    out += r.path + "," + r.patient_id + "," + group_str(r.group) + "," +
           std::to_string(r.label) + "," + split_str(r.split) + "\n";
  }
  write_file(path, out);
}

Manifest Manifest::load(const std::string& path) {
  auto rows = read_csv(path);
  if (rows.empty() || rows[0] != split_csv_line("path,patient_id,group,label,split"))
    throw FormatError("manifest: bad header in " + path);
  Manifest m;
  m.root = fs::path(path).parent_path().string();
  if (m.root.empty()) m.root = ".";
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != 5)
      throw FormatError("manifest: bad row " + std::to_string(i) + " in " + path);
    ImageRecord r;
    r.path = f[0];
    r.patient_id = f[1];
    r.group = group_from_str(f[2]);
    if (f[3] != "0" && f[3] != "1")
      throw FormatError("manifest: label must be 0 or 1 in " + path);
    r.label = f[3] == "1" ? 1 : 0;
    r.split = split_from_str(f[4]);
    m.records.push_back(std::move(r));
  }
  return m;
}

void require_patient_disjoint(const Manifest& a, const Manifest& b,
                              const std::string& context) {
  std::set<std::string> pa;
  for (const auto& r : a.records) pa.insert(r.patient_id);
  for (const auto& r : b.records)
    if (pa.count(r.patient_id))
      throw DataError(context + ": patient '" + r.patient_id +
                      "' crosses a split boundary");
}

// ---- splits -------------------------------------------------------------------

namespace {

template <typename T>
void shuffle_inplace(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[size_t(rng.next_below(i))]);
}

}  // namespace

std::pair<Manifest, Manifest> split_dev_test(const Manifest& manifest,
                                             double test_patient_fraction,
                                             uint64_t seed) {
  if (test_patient_fraction <= 0.0 || test_patient_fraction >= 1.0)
    throw ConfigError("split: test fraction must be in (0,1)");
  std::map<TumorGroup, std::vector<std::string>> by_group;
  std::map<std::string, TumorGroup> patient_group;
  for (const auto& r : manifest.records) {
    if (!patient_group.count(r.patient_id)) {
      patient_group[r.patient_id] = r.group;
      by_group[r.group].push_back(r.patient_id);
    }
  }
  int64_t total_patients = 0;
  for (auto& [g, ps] : by_group) {
    if (ps.size() < 2)
      throw ConfigError("split: tumor group '" + group_str(g) + "' has only " +
                        std::to_string(ps.size()) +
                        " patient(s); need at least 2 to stratify");
    total_patients += int64_t(ps.size());
  }
  const int64_t want_test =
      int64_t(std::llround(test_patient_fraction * double(total_patients)));
  if (want_test < 1 || want_test >= total_patients)
    throw ConfigError("split: fraction leaves an empty side");

  // Largest-remainder apportionment of the test quota across groups, so the
  // global count is exactly round(fraction * patients).
  struct Quota {
    TumorGroup g;
    int64_t count;
    double remainder;
  };
  std::vector<Quota> quotas;
  int64_t assigned = 0;
  for (auto& [g, ps] : by_group) {
    const double exact = test_patient_fraction * double(ps.size());
    Quota q{g, int64_t(std::floor(exact)), exact - std::floor(exact)};
    // keep at least one dev patient per group
    q.count = std::min(q.count, int64_t(ps.size()) - 1);
    assigned += q.count;
    quotas.push_back(q);
  }
  std::stable_sort(quotas.begin(), quotas.end(),
                   [](const Quota& a, const Quota& b) {
                     return a.remainder > b.remainder;
                   });
  for (auto& q : quotas) {
    if (assigned >= want_test) break;
    if (q.count + 1 <= int64_t(by_group[q.g].size()) - 1) {
      q.count += 1;
      assigned += 1;
    }
  }

  std::set<std::string> test_patients;
  for (auto& q : quotas) {
    auto ps = by_group[q.g];
    Rng rng(derive_seed(seed, uint64_t(q.g) + 101), streams::kShuffle);
    shuffle_inplace(ps, rng);
    for (int64_t i = 0; i < q.count; ++i) test_patients.insert(ps[size_t(i)]);
  }

  Manifest dev, test;
  dev.root = test.root = manifest.root;
  for (auto r : manifest.records) {
    if (test_patients.count(r.patient_id)) {
      r.split = SplitTag::Test;
      test.records.push_back(r);
    } else {
      r.split = SplitTag::Dev;
      dev.records.push_back(r);
    }
  }
  return {dev, test};
}

FoldPlan make_folds(const Manifest& dev, int64_t k, uint64_t seed) {
  if (k < 2) throw ConfigError("folds: k must be >= 2, got " + std::to_string(k));
  auto patients = dev.patient_ids();
  std::sort(patients.begin(), patients.end());
  if (int64_t(patients.size()) < k)
    throw ConfigError("folds: k=" + std::to_string(k) + " exceeds " +
                      std::to_string(patients.size()) + " patients");
  Rng rng(seed, streams::kShuffle);
  shuffle_inplace(patients, rng);

  const int64_t n = int64_t(patients.size());
  const int64_t base = n / k;
  const int64_t extra = n % k;  // first `extra` folds get one more patient
  FoldPlan plan;
  int64_t pos = 0;
  for (int64_t f = 0; f < k; ++f) {
    const int64_t size = base + (f < extra ? 1 : 0);
    Fold fold;
    fold.patients.assign(patients.begin() + pos, patients.begin() + pos + size);
    pos += size;
    fold.val = dev.filter_patients(fold.patients);
    fold.train = dev.filter_patients_excluding(fold.patients);
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

// ---- batch loading ------------------------------------------------------------

const GrayImage& ImageCache::get(const std::string& abs_path) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = images_.find(abs_path);
  if (it == images_.end())
    it = images_.emplace(abs_path, read_png_gray8(abs_path)).first;
  return it->second;
}

void ImageCache::preload(const Manifest& manifest) {
  for (const auto& r : manifest.records) get(manifest.resolve(r.path));
}

Batch load_batch(const Manifest& manifest, std::span<const size_t> indices,
                 const CropPolicy& policy, Rng* rng, const ImageCache* cache) {
  if (indices.empty()) throw DataError("load_batch: empty index list");
  if (policy.train && !rng)
    throw ConfigError("load_batch: train mode needs an rng");
  const int64_t crop = policy.crop;
  Batch batch;
  batch.images = Tensor({int64_t(indices.size()), policy.channels, crop, crop});
  float* out = batch.images.data();
  ImageCache local;
  const ImageCache& c = cache ? *cache : local;

  for (size_t bi = 0; bi < indices.size(); ++bi) {
    const ImageRecord& rec = manifest.records.at(indices[bi]);
    const std::string abs = manifest.resolve(rec.path);
    const GrayImage* img = nullptr;
    try {
      img = &c.get(abs);
    } catch (const DataError&) {
      throw DataError("load_batch: unreadable image '" + rec.path + "'");
    }
    if (img->height < crop || img->width < crop)
      throw DataError("load_batch: image '" + rec.path + "' (" +
                      std::to_string(img->height) + "x" +
                      std::to_string(img->width) + ") smaller than crop " +
                      std::to_string(crop));
    int64_t y0, x0;
    bool flip = false;
    if (policy.train) {
      y0 = int64_t(rng->next_below(uint64_t(img->height - crop + 1)));
      x0 = int64_t(rng->next_below(uint64_t(img->width - crop + 1)));
      flip = rng->next_bernoulli(0.5);
    } else {
      y0 = (img->height - crop) / 2;
      x0 = (img->width - crop) / 2;
    }
    float* plane0 = out + int64_t(bi) * policy.channels * crop * crop;
    for (int64_t y = 0; y < crop; ++y) {
      for (int64_t x = 0; x < crop; ++x) {
        const int64_t sx = flip ? (x0 + crop - 1 - x) : (x0 + x);
        plane0[y * crop + x] = float(img->at(y0 + y, sx)) / 255.0f;
      }
    }
    for (int64_t ch = 1; ch < policy.channels; ++ch)
      std::copy(plane0, plane0 + crop * crop, plane0 + ch * crop * crop);
    batch.labels.push_back(rec.label);
    batch.ids.push_back(rec.path);
  }
  return batch;
}

// ---- raster helpers ------------------------------------------------------------

Tensor tensor_from_image(const GrayImage& img) {
  Tensor t({1, img.height, img.width});
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = float(img.pixels[size_t(i)]) / 255.0f;
  return t;
}

Tensor crop_chw(const Tensor& chw, int64_t y0, int64_t x0, int64_t h,
                int64_t w) {
  const int64_t C = chw.extent(0), H = chw.extent(1), W = chw.extent(2);
  if (y0 < 0 || x0 < 0 || y0 + h > H || x0 + w > W)
    throw ShapeError("crop: window exceeds image bounds");
  Tensor out({C, h, w});
  for (int64_t c = 0; c < C; ++c)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        out.at({c, y, x}) = chw.at({c, y0 + y, x0 + x});
  return out;
}

Tensor resize_bilinear(const Tensor& chw, int64_t out_h, int64_t out_w) {
  const int64_t C = chw.extent(0), H = chw.extent(1), W = chw.extent(2);
  if (out_h == H && out_w == W) return chw;
  Tensor out({C, out_h, out_w});
  const double sy = double(H) / double(out_h);
  const double sx = double(W) / double(out_w);
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t y = 0; y < out_h; ++y) {
      const double fy = (double(y) + 0.5) * sy - 0.5;
      const int64_t y1 = std::clamp<int64_t>(int64_t(std::floor(fy)), 0, H - 1);
      const int64_t y2 = std::min<int64_t>(y1 + 1, H - 1);
      const double wy = std::clamp(fy - double(y1), 0.0, 1.0);
      for (int64_t x = 0; x < out_w; ++x) {
        const double fx = (double(x) + 0.5) * sx - 0.5;
        const int64_t x1 =
            std::clamp<int64_t>(int64_t(std::floor(fx)), 0, W - 1);
        const int64_t x2 = std::min<int64_t>(x1 + 1, W - 1);
        const double wx = std::clamp(fx - double(x1), 0.0, 1.0);
        const double v =
            (1 - wy) * ((1 - wx) * chw.at({c, y1, x1}) + wx * chw.at({c, y1, x2})) +
            wy * ((1 - wx) * chw.at({c, y2, x1}) + wx * chw.at({c, y2, x2}));
        out.at({c, y, x}) = float(v);
      }
    }
  }
  return out;
}

}  // namespace clenet
