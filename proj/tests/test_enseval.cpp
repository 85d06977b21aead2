#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "clenet/enseval.hpp"
#include "clenet/rng.hpp"
#include "clenet/util.hpp"
#include "testutil.hpp"

using namespace clenet;
using testutil::TempDir;

namespace {

ScoreSet make_set(const std::vector<std::vector<std::array<double, 2>>>& scores) {
  ScoreSet s;
  s.scores = scores;
  for (size_t m = 0; m < scores.size(); ++m)
    s.model_ids.push_back("m" + std::to_string(m));
  for (size_t i = 0; i < scores[0].size(); ++i)
    s.image_ids.push_back("img" + std::to_string(i));
  return s;
}

// Probability rows built from dyadic fractions: p + (1-p) == 1 exactly, so
// normalization inside the arithmetic vote is an exact no-op and the direct
// sum oracle matches bit for bit. The fine 30-bit grid keeps exact product
// collisions between the two classes out of the draw.
ScoreSet random_prob_set(Rng& rng, size_t max_models = 5,
                         size_t max_images = 30) {
  const size_t l = 1 + rng.next_below(max_models);
  const size_t n = 1 + rng.next_below(max_images);
  std::vector<std::vector<std::array<double, 2>>> scores(
      l, std::vector<std::array<double, 2>>(n));
  for (size_t m = 0; m < l; ++m)
    for (size_t i = 0; i < n; ++i) {
      const double lo = 1.0 / double(1u << 30);
      double p = double(rng.next_below((1u << 30) + 1)) / double(1u << 30);
      p = std::min(std::max(p, lo), 1.0 - lo);
      scores[m][i] = {1.0 - p, p};
    }
  return make_set(scores);
}

RaterLabels labels_of(const std::vector<int>& v) {
  RaterLabels r;
  for (size_t i = 0; i < v.size(); ++i) {
    r.ids.push_back("img" + std::to_string(i));
    r.labels.push_back(v[i]);
  }
  return r;
}

}  // namespace

// ---- ensembles ---------------------------------------------------------------

TEST_CASE("ensemble: single model reduces to its argmax for both kinds") {
  ScoreSet s = make_set({{{0.8, 0.2}, {0.3, 0.7}, {0.5, 0.5}}});
  for (auto kind : {EnsembleKind::Arithmetic, EnsembleKind::Geometric}) {
    auto res = ensemble_predict(s, kind);
    CHECK(res.classes == std::vector<int>{0, 1, 0});  // tie goes to class 0
  }
}

TEST_CASE("ensemble: worked two-model example") {
  ScoreSet s = make_set({{{0.6, 0.4}}, {{0.3, 0.7}}});
  auto arith = ensemble_predict(s, EnsembleKind::Arithmetic);
  CHECK(arith.classes[0] == 1);
  CHECK(arith.combined[0][0] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(arith.combined[0][1] == doctest::Approx(1.1).epsilon(1e-12));
  auto geom = ensemble_predict(s, EnsembleKind::Geometric);
  CHECK(geom.classes[0] == 1);
  CHECK(geom.combined[0][0] == doctest::Approx(0.18).epsilon(1e-9));
  CHECK(geom.combined[0][1] == doctest::Approx(0.28).epsilon(1e-9));
}

TEST_CASE("ensemble: agrees with the direct sum/product oracle") {
  Rng rng(101, streams::kInit);
  for (int trial = 0; trial < 200; ++trial) {
    ScoreSet s = random_prob_set(rng);
    auto arith = ensemble_predict(s, EnsembleKind::Arithmetic);
    auto geom = ensemble_predict(s, EnsembleKind::Geometric);
    for (size_t i = 0; i < s.image_ids.size(); ++i) {
      double sum0 = 0, sum1 = 0, prod0 = 1, prod1 = 1;
      for (size_t m = 0; m < s.scores.size(); ++m) {
        sum0 += s.scores[m][i][0];
        sum1 += s.scores[m][i][1];
        prod0 *= s.scores[m][i][0];
        prod1 *= s.scores[m][i][1];
      }
      CHECK(arith.classes[i] == (sum1 > sum0 ? 1 : 0));
      CHECK(geom.classes[i] == (prod1 > prod0 ? 1 : 0));
      // log-space vs direct product where no zero occurs
      if (prod0 > 0 && prod1 > 0) {
        CHECK(std::abs(geom.combined[i][0] - prod0) <=
              1e-9 * std::abs(prod0));
        CHECK(std::abs(geom.combined[i][1] - prod1) <=
              1e-9 * std::abs(prod1));
      }
    }
  }
}

TEST_CASE("ensemble: per-model positive rescaling never changes the argmax") {
  Rng rng(102, streams::kInit);
  for (int trial = 0; trial < 100; ++trial) {
    ScoreSet s = random_prob_set(rng);
    auto base_a = ensemble_predict(s, EnsembleKind::Arithmetic).classes;
    auto base_g = ensemble_predict(s, EnsembleKind::Geometric).classes;
    ScoreSet scaled = s;
    for (size_t m = 0; m < scaled.scores.size(); ++m) {
      const double c = std::pow(2.0, double(rng.next_below(9)) - 4.0);
      for (auto& row : scaled.scores[m]) {
        row[0] *= c;
        row[1] *= c;
      }
    }
    CHECK(ensemble_predict(scaled, EnsembleKind::Arithmetic).classes == base_a);
    CHECK(ensemble_predict(scaled, EnsembleKind::Geometric).classes == base_g);
  }
}

TEST_CASE("ensemble: zero probability vetoes the class in log space") {
  ScoreSet s = make_set({{{0.0, 1.0}}, {{0.9, 0.1}}});
  auto geom = ensemble_predict(s, EnsembleKind::Geometric);
  CHECK(geom.classes[0] == 1);  // class 0 vetoed by the exact zero
  CHECK(geom.combined[0][0] == 0.0);

  // both classes vetoed somewhere: tie resolves to class 0
  ScoreSet t = make_set({{{0.0, 1.0}}, {{1.0, 0.0}}});
  auto g2 = ensemble_predict(t, EnsembleKind::Geometric);
  CHECK(g2.classes[0] == 0);
}

TEST_CASE("ensemble: l identical models vote like the single model") {
  Rng rng(103, streams::kInit);
  ScoreSet one = random_prob_set(rng, 1, 20);
  ScoreSet five = one;
  for (int m = 1; m < 5; ++m) {
    five.model_ids.push_back("m" + std::to_string(m));
    five.scores.push_back(one.scores[0]);
  }
  for (auto kind : {EnsembleKind::Arithmetic, EnsembleKind::Geometric})
    CHECK(ensemble_predict(five, kind).classes ==
          ensemble_predict(one, kind).classes);
}

TEST_CASE("scoreset: csv round trip and misalignment errors") {
  TempDir tmp("scores");
  Rng rng(104, streams::kInit);
  ScoreSet s = random_prob_set(rng, 3, 10);
  const std::string path = tmp.file("scores.csv");
  s.save_csv(path);
  ScoreSet back = ScoreSet::load_csv(path);
  CHECK(back.image_ids == s.image_ids);
  CHECK(back.model_ids == s.model_ids);
  for (size_t m = 0; m < s.scores.size(); ++m)
    for (size_t i = 0; i < s.scores[m].size(); ++i) {
      CHECK(back.scores[m][i][0] == s.scores[m][i][0]);
      CHECK(back.scores[m][i][1] == s.scores[m][i][1]);
    }

  ScoreSet bad = s;
  bad.scores.back().pop_back();
  CHECK_THROWS_AS(bad.validate(), DataError);
}

// ---- confusion and metrics -----------------------------------------------------

TEST_CASE("confusion and metrics: worked example") {
  // TP=8 FN=2 TN=7 FP=3
  std::vector<int> truth, pred;
  for (int i = 0; i < 8; ++i) { truth.push_back(1); pred.push_back(1); }
  for (int i = 0; i < 2; ++i) { truth.push_back(1); pred.push_back(0); }
  for (int i = 0; i < 7; ++i) { truth.push_back(0); pred.push_back(0); }
  for (int i = 0; i < 3; ++i) { truth.push_back(0); pred.push_back(1); }
  ConfusionMatrix cm = confusion(labels_of(pred), labels_of(truth));
  CHECK(cm.tp == 8);
  CHECK(cm.fn == 2);
  CHECK(cm.tn == 7);
  CHECK(cm.fp == 3);
  ClassMetrics m = metrics(cm);
  CHECK(m.sensitivity == doctest::Approx(0.8));
  CHECK(m.specificity == doctest::Approx(0.7));
  CHECK(m.accuracy == doctest::Approx(0.75));
}

TEST_CASE("metrics: perfect prediction and undefined ratios") {
  std::vector<int> truth{1, 1, 0, 0};
  ClassMetrics perfect = metrics(confusion(labels_of(truth), labels_of(truth)));
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.sensitivity == 1.0);
  CHECK(perfect.specificity == 1.0);

  // all-positive truth: specificity undefined, flagged rather than zeroed
  std::vector<int> all_pos{1, 1, 1};
  ClassMetrics m = metrics(confusion(labels_of({1, 0, 1}), labels_of(all_pos)));
  CHECK_FALSE(m.specificity_defined);
  CHECK(m.sensitivity_defined);
}

TEST_CASE("confusion: mismatched id sets are an alignment error") {
  RaterLabels a = labels_of({1, 0});
  RaterLabels b = labels_of({1, 0, 1});
  CHECK_THROWS_AS(confusion(a, b), DataError);
}

// ---- roc -------------------------------------------------------------------------

TEST_CASE("roc: perfect separation and pure chance") {
  RocCurve perfect = roc_auc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0});
  CHECK(perfect.auc == doctest::Approx(1.0).epsilon(1e-12));
  RocCurve chance = roc_auc({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0});
  CHECK(chance.auc == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("roc: tie case gives half credit") {
  // pos {0.6}, neg {0.4, 0.6}: concordance (1 + 0.5)/2 = 0.75
  RocCurve c = roc_auc({0.6, 0.4, 0.6}, {1, 0, 0});
  CHECK(c.auc == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("roc: curve runs from (0,0) to (1,1) monotonically") {
  Rng rng(105, streams::kInit);
  std::vector<double> scores;
  std::vector<int> truth;
  for (int i = 0; i < 50; ++i) {
    scores.push_back(rng.next_unit());
    truth.push_back(int(rng.next_below(2)));
  }
  truth[0] = 1;
  truth[1] = 0;
  RocCurve c = roc_auc(scores, truth);
  CHECK(c.points.front() == std::array<double, 2>{0.0, 0.0});
  CHECK(c.points.back() == std::array<double, 2>{1.0, 1.0});
  for (size_t i = 1; i < c.points.size(); ++i) {
    CHECK(c.points[i][0] >= c.points[i - 1][0]);
    CHECK(c.points[i][1] >= c.points[i - 1][1]);
  }
}

TEST_CASE("roc: trapezoid equals the pairwise concordance oracle") {
  Rng rng(106, streams::kInit);
  for (int trial = 0; trial < 100; ++trial) {
    const size_t n = 2 + rng.next_below(199);
    std::vector<double> scores;
    std::vector<int> truth;
    for (size_t i = 0; i < n; ++i) {
      // quantized scores so ties actually happen
      scores.push_back(double(rng.next_below(20)) / 19.0);
      truth.push_back(int(rng.next_below(2)));
    }
    truth[0] = 1;
    if (n > 1) truth[1] = 0;
    RocCurve c = roc_auc(scores, truth);

    double num = 0;
    int64_t pairs = 0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) {
        if (truth[i] != 1 || truth[j] != 0) continue;
        ++pairs;
        if (scores[i] > scores[j]) num += 1.0;
        else if (scores[i] == scores[j]) num += 0.5;
      }
    CHECK(std::abs(c.auc - num / double(pairs)) < 1e-12);
  }
}

TEST_CASE("roc: single-class truth is an error") {
  CHECK_THROWS_AS(roc_auc({0.5, 0.6}, {1, 1}), DataError);
}

// ---- kappa ------------------------------------------------------------------------

TEST_CASE("kappa: identical labels give 1") {
  RaterLabels a = labels_of({1, 0, 1, 0, 1});
  CHECK(cohens_kappa(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kappa: independence gives 0") {
  // counts [[25,25],[25,25]]
  std::vector<int> a, b;
  for (int i = 0; i < 25; ++i) { a.push_back(0); b.push_back(0); }
  for (int i = 0; i < 25; ++i) { a.push_back(0); b.push_back(1); }
  for (int i = 0; i < 25; ++i) { a.push_back(1); b.push_back(0); }
  for (int i = 0; i < 25; ++i) { a.push_back(1); b.push_back(1); }
  CHECK(cohens_kappa(labels_of(a), labels_of(b)) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kappa: worked 0.4 case") {
  // counts [[20,5],[10,15]]: po=0.7, pe=0.5 -> kappa 0.4
  std::vector<int> a, b;
  for (int i = 0; i < 20; ++i) { a.push_back(0); b.push_back(0); }
  for (int i = 0; i < 5; ++i) { a.push_back(0); b.push_back(1); }
  for (int i = 0; i < 10; ++i) { a.push_back(1); b.push_back(0); }
  for (int i = 0; i < 15; ++i) { a.push_back(1); b.push_back(1); }
  const double kappa = cohens_kappa(labels_of(a), labels_of(b));
  CHECK(std::abs(kappa - 0.4) < 1e-12);
  // direct formula oracle
  const double po = (20.0 + 15.0) / 50.0;
  const double pe = (25.0 / 50.0) * (30.0 / 50.0) + (25.0 / 50.0) * (20.0 / 50.0);
  CHECK(std::abs(kappa - (po - pe) / (1 - pe)) < 1e-12);
}

TEST_CASE("kappa: symmetric and invariant under label renaming") {
  Rng rng(107, streams::kInit);
  for (int trial = 0; trial < 20; ++trial) {
    const size_t n = 5 + rng.next_below(50);
    std::vector<int> a, b;
    for (size_t i = 0; i < n; ++i) {
      a.push_back(int(rng.next_below(2)));
      b.push_back(int(rng.next_below(2)));
    }
    const double k1 = cohens_kappa(labels_of(a), labels_of(b));
    const double k2 = cohens_kappa(labels_of(b), labels_of(a));
    CHECK(std::abs(k1 - k2) < 1e-12);
    std::vector<int> a_flip, b_flip;
    for (size_t i = 0; i < n; ++i) {
      a_flip.push_back(1 - a[i]);
      b_flip.push_back(1 - b[i]);
    }
    const double k3 = cohens_kappa(labels_of(a_flip), labels_of(b_flip));
    CHECK(std::abs(k1 - k3) < 1e-12);
  }
}

TEST_CASE("kappa: both raters constant and equal is defined as 1") {
  RaterLabels a = labels_of({1, 1, 1});
  CHECK(cohens_kappa(a, a) == 1.0);
}

// ---- gold standard ----------------------------------------------------------------

TEST_CASE("gold standard: keeps exactly the agreeing images") {
  RaterLabels initial = labels_of({1, 0, 1});
  RaterLabels anchor = labels_of({1, 1, 0});
  RaterLabels gold = gold_standard(initial, anchor);
  REQUIRE(gold.ids.size() == 1);
  CHECK(gold.ids[0] == "img0");
  CHECK(gold.labels[0] == 1);

  RaterLabels full = gold_standard(initial, initial);
  CHECK(full.ids == initial.ids);
  CHECK(full.labels == initial.labels);

  RaterLabels flipped = labels_of({0, 1, 0});
  RaterLabels empty = gold_standard(initial, flipped);
  CHECK(empty.ids.empty());
}

TEST_CASE("gold standard size equals an independent recount") {
  Rng rng(108, streams::kInit);
  for (int trial = 0; trial < 20; ++trial) {
    const size_t n = 10 + rng.next_below(100);
    std::vector<int> a, b;
    for (size_t i = 0; i < n; ++i) {
      a.push_back(int(rng.next_below(2)));
      b.push_back(int(rng.next_below(2)));
    }
    size_t agree = 0;
    for (size_t i = 0; i < n; ++i) agree += a[i] == b[i] ? 1 : 0;
    CHECK(gold_standard(labels_of(a), labels_of(b)).ids.size() == agree);
  }
}

// ---- agreement report ----------------------------------------------------------------

TEST_CASE("agreement: a rater equal to the reference scores 100/1/100") {
  RaterLabels ref = labels_of({1, 0, 1, 0});
  RaterLabels gold = gold_standard(ref, ref);
  auto rows = agreement_report({{"self", ref}}, ref, gold);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].pct_full == doctest::Approx(100.0));
  CHECK(rows[0].kappa == doctest::Approx(1.0));
  CHECK(rows[0].pct_gold == doctest::Approx(100.0));
}

TEST_CASE("agreement: percentages match a naive per-image recount") {
  Rng rng(109, streams::kInit);
  const size_t n = 100;
  std::vector<int> ref_v, r1_v, r2_v;
  for (size_t i = 0; i < n; ++i) {
    ref_v.push_back(int(rng.next_below(2)));
    r1_v.push_back(int(rng.next_below(2)));
    r2_v.push_back(int(rng.next_below(2)));
  }
  RaterLabels ref = labels_of(ref_v);
  RaterLabels r1 = labels_of(r1_v);
  RaterLabels r2 = labels_of(r2_v);
  RaterLabels gold = gold_standard(ref, r1);
  auto rows = agreement_report({{"r1", r1}, {"r2", r2}}, ref, gold);
  REQUIRE(rows.size() == 2);

  for (size_t r = 0; r < 2; ++r) {
    const auto& labels = r == 0 ? r1_v : r2_v;
    int64_t match = 0;
    for (size_t i = 0; i < n; ++i) match += labels[i] == ref_v[i] ? 1 : 0;
    CHECK(rows[r].match_full == match);
    CHECK(rows[r].pct_full == doctest::Approx(100.0 * double(match) / n));
    // gold recount
    int64_t gmatch = 0, gtotal = 0;
    for (size_t i = 0; i < n; ++i) {
      if (ref_v[i] != r1_v[i]) continue;  // not in the gold subset
      ++gtotal;
      gmatch += labels[i] == ref_v[i] ? 1 : 0;
    }
    CHECK(rows[r].n_gold == gtotal);
    CHECK(rows[r].match_gold == gmatch);
  }
}

TEST_CASE("agreement: csv renders the report row shape") {
  TempDir tmp("agree");
  RaterLabels ref = labels_of({1, 0, 1, 0, 1, 0});
  RaterLabels r1 = labels_of({1, 0, 0, 0, 1, 1});
  RaterLabels gold = gold_standard(ref, r1);
  auto rows = agreement_report({{"val_rater_1", r1}}, ref, gold);
  write_agreement_csv(tmp.file("agreement.csv"), rows);
  auto csv = read_csv(tmp.file("agreement.csv"));
  REQUIRE(csv.size() == 2);
  // one row per rater: general agreement %, kappa, gold agreement %
  CHECK(csv[0][0] == "rater");
  CHECK(csv[0][1] == "general_agreement_pct");
  CHECK(csv[0][4] == "cohens_kappa");
  CHECK(csv[0][5] == "gold_agreement_pct");
  CHECK(csv[1][0] == "val_rater_1");
}

TEST_CASE("roc svg: renders one polyline per curve with auc in the legend") {
  TempDir tmp("svg");
  RocCurve a = roc_auc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0});
  RocCurve b = roc_auc({0.6, 0.4, 0.6}, {1, 0, 0});
  write_roc_svg(tmp.file("roc.svg"), {{"alpha", a}, {"beta", b}});
  const std::string svg = read_file(tmp.file("roc.svg"));
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("alpha (AUC=1.000)") != std::string::npos);
  CHECK(svg.find("beta (AUC=0.750)") != std::string::npos);
  CHECK(svg.find("false positive rate") != std::string::npos);
}
