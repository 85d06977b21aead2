#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace clenet {

// Per-model class probabilities for an aligned set of images. scores[m][i]
// holds model m's (p_nondiagnostic, p_diagnostic) for image_ids[i].
struct ScoreSet {
  std::vector<std::string> image_ids;
  std::vector<std::string> model_ids;
  std::vector<std::vector<std::array<double, 2>>> scores;

  void validate() const;
  // CSV rows: image_id,model_id,p_nondiagnostic,p_diagnostic.
  void save_csv(const std::string& path) const;
  static ScoreSet load_csv(const std::string& path);
};

enum class EnsembleKind { Arithmetic, Geometric };

struct EnsembleResult {
  std::vector<int> classes;                      // per image
  std::vector<std::array<double, 2>> combined;   // summed / multiplied scores
};

// Arithmetic: argmax of per-class sums. Geometric: argmax of per-class
// products, evaluated in log space with log(0) treated as -inf (a zero
// probability vetoes the class). Ties resolve to class 0 (nondiagnostic).
EnsembleResult ensemble_predict(const ScoreSet& scores, EnsembleKind kind);

// Binary labels from one rater (or a model) for a set of image ids.
struct RaterLabels {
  std::vector<std::string> ids;
  std::vector<int> labels;

  int label_of(const std::string& id) const;  // DataError when missing
  void save_csv(const std::string& path) const;  // image_id,label
  static RaterLabels load_csv(const std::string& path);
};

struct ConfusionMatrix {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  int64_t total() const { return tp + fp + tn + fn; }
};

// Positive class = diagnostic (label 1). Requires identical id sets.
ConfusionMatrix confusion(const RaterLabels& pred, const RaterLabels& truth);

struct ClassMetrics {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  bool sensitivity_defined = true;  // false when TP+FN == 0
  bool specificity_defined = true;  // false when TN+FP == 0
};

ClassMetrics metrics(const ConfusionMatrix& cm);

struct RocCurve {
  std::vector<std::array<double, 2>> points;  // (FPR, TPR), (0,0) .. (1,1)
  double auc = 0.0;
};

// Threshold sweep over the positive-class scores, trapezoidal AUC. Ties get
// half credit, so the value equals pairwise concordance P(s+ > s-) + P(=)/2.
RocCurve roc_auc(const std::vector<double>& scores,
                 const std::vector<int>& truth);

// Chance-corrected agreement with marginal-product expected agreement.
// When both raters are constant and equal (p_e == 1) kappa is defined as 1.
double cohens_kappa(const RaterLabels& a, const RaterLabels& b);

// Keeps exactly the images where the two raters agree, labeled with the
// agreed value. May return an empty set (caller warns).
RaterLabels gold_standard(const RaterLabels& initial,
                          const RaterLabels& anchor);

struct AgreementRow {
  std::string rater;
  int64_t match_full = 0, n_full = 0;
  double pct_full = 0.0;
  double kappa = 0.0;
  int64_t match_gold = 0, n_gold = 0;
  double pct_gold = 0.0;
  bool gold_defined = true;
};

// Per rater: agreement % with the reference over the full id set, Cohen's
// kappa, and agreement % restricted to the gold subset.
std::vector<AgreementRow> agreement_report(
    const std::vector<std::pair<std::string, RaterLabels>>& raters,
    const RaterLabels& reference, const RaterLabels& gold);

void write_agreement_csv(const std::string& path,
                         const std::vector<AgreementRow>& rows);

struct NamedCurve {
  std::string name;
  RocCurve curve;
};

void write_roc_svg(const std::string& path,
                   const std::vector<NamedCurve>& curves);

}  // namespace clenet
