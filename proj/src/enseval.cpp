#include "clenet/enseval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "clenet/error.hpp"
#include "clenet/util.hpp"

namespace clenet {

// ---- score sets -------------------------------------------------------------

void ScoreSet::validate() const {
  if (model_ids.empty()) throw DataError("scoreset: no models");
  if (scores.size() != model_ids.size())
    throw DataError("scoreset: model/score count mismatch");
  for (size_t m = 0; m < scores.size(); ++m) {
    if (scores[m].size() != image_ids.size())
      throw DataError("scoreset: model '" + model_ids[m] +
                      "' image ids misaligned");
    for (const auto& s : scores[m])
      if (s[0] < 0 || s[1] < 0)
        throw DataError("scoreset: negative score for model '" +
                        model_ids[m] + "'");
  }
}

void ScoreSet::save_csv(const std::string& path) const {
  validate();
  std::string out = "image_id,model_id,p_nondiagnostic,p_diagnostic\n";
  for (size_t m = 0; m < model_ids.size(); ++m)
    for (size_t i = 0; i < image_ids.size(); ++i)
      out += image_ids[i] + "," + model_ids[m] + "," +
             fmt_g17(scores[m][i][0]) + "," + fmt_g17(scores[m][i][1]) + "\n";
  write_file(path, out);
}

ScoreSet ScoreSet::load_csv(const std::string& path) {
  auto rows = read_csv(path);
  if (rows.empty() ||
      rows[0] != split_csv_line("image_id,model_id,p_nondiagnostic,p_diagnostic"))
    throw FormatError("scoreset: bad header in " + path);
  ScoreSet set;
  std::map<std::string, size_t> model_index;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != 4)
      throw FormatError("scoreset: bad row " + std::to_string(r) + " in " +
                        path);
    auto it = model_index.find(f[1]);
    if (it == model_index.end()) {
      it = model_index.emplace(f[1], set.model_ids.size()).first;
      set.model_ids.push_back(f[1]);
      set.scores.emplace_back();
    }
    const size_t m = it->second;
    if (m == 0) {
      set.image_ids.push_back(f[0]);
    } else {
      const size_t i = set.scores[m].size();
      if (i >= set.image_ids.size() || set.image_ids[i] != f[0])
        throw DataError("scoreset: image ids misaligned across models in " +
                        path);
    }
    set.scores[m].push_back({std::stod(f[2]), std::stod(f[3])});
  }
  set.validate();
  return set;
}

// The arithmetic vote normalizes each model's score row to sum 1 first.
// Softmax outputs already do, so this is a no-op on well-formed inputs, and
// it makes the vote invariant to any positive per-model rescaling. The
// geometric vote runs in log space, which carries the same invariance.
EnsembleResult ensemble_predict(const ScoreSet& scores, EnsembleKind kind) {
  scores.validate();
  const size_t l = scores.scores.size();
  const size_t n = scores.image_ids.size();
  EnsembleResult res;
  res.classes.resize(n);
  res.combined.resize(n);
  for (size_t i = 0; i < n; ++i) {
    if (kind == EnsembleKind::Arithmetic) {
      std::array<double, 2> combined{};
      for (size_t m = 0; m < l; ++m) {
        const double s = scores.scores[m][i][0] + scores.scores[m][i][1];
        if (s > 0) {
          combined[0] += scores.scores[m][i][0] / s;
          combined[1] += scores.scores[m][i][1] / s;
        }
      }
      res.classes[i] = combined[1] > combined[0] ? 1 : 0;
      res.combined[i] = combined;
    } else {
      std::array<double, 2> logsum{0.0, 0.0};
      for (size_t m = 0; m < l; ++m)
        for (size_t k = 0; k < 2; ++k) {
          const double v = scores.scores[m][i][k];
          logsum[k] += v > 0 ? std::log(v)
                             : -std::numeric_limits<double>::infinity();
        }
      // argmax in log space; exp only for the reported product
      res.classes[i] = logsum[1] > logsum[0] ? 1 : 0;
      res.combined[i] = {std::exp(logsum[0]), std::exp(logsum[1])};
    }
  }
  return res;
}

// ---- rater labels --------------------------------------------------------------

int RaterLabels::label_of(const std::string& id) const {
  for (size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return labels[i];
  throw DataError("rater labels: unknown image id '" + id + "'");
}

void RaterLabels::save_csv(const std::string& path) const {
  std::string out = "image_id,label\n";
  for (size_t i = 0; i < ids.size(); ++i)
    out += ids[i] + "," + std::to_string(labels[i]) + "\n";
  write_file(path, out);
}

RaterLabels RaterLabels::load_csv(const std::string& path) {
  auto rows = read_csv(path);
  if (rows.empty() || rows[0] != split_csv_line("image_id,label"))
    throw FormatError("rater labels: bad header in " + path);
  RaterLabels r;
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2 || (rows[i][1] != "0" && rows[i][1] != "1"))
      throw FormatError("rater labels: bad row " + std::to_string(i) + " in " +
                        path);
    r.ids.push_back(rows[i][0]);
    r.labels.push_back(rows[i][1] == "1" ? 1 : 0);
  }
  return r;
}

namespace {

std::map<std::string, int> label_map(const RaterLabels& r) {
  std::map<std::string, int> m;
  for (size_t i = 0; i < r.ids.size(); ++i) {
    if (!m.emplace(r.ids[i], r.labels[i]).second)
      throw DataError("rater labels: duplicate image id '" + r.ids[i] + "'");
  }
  return m;
}

void require_same_ids(const RaterLabels& a, const RaterLabels& b,
                      const std::string& context) {
  auto ma = label_map(a);
  auto mb = label_map(b);
  if (ma.size() != mb.size())
    throw DataError(context + ": id sets differ in size");
  for (const auto& [id, _] : ma)
    if (!mb.count(id))
      throw DataError(context + ": id '" + id + "' missing from one side");
}

}  // namespace

ConfusionMatrix confusion(const RaterLabels& pred, const RaterLabels& truth) {
  require_same_ids(pred, truth, "confusion");
  auto t = label_map(truth);
  ConfusionMatrix cm;
  for (size_t i = 0; i < pred.ids.size(); ++i) {
    const int p = pred.labels[i];
    const int y = t.at(pred.ids[i]);
    if (p == 1 && y == 1) cm.tp++;
    if (p == 1 && y == 0) cm.fp++;
    if (p == 0 && y == 0) cm.tn++;
    if (p == 0 && y == 1) cm.fn++;
  }
  return cm;
}

ClassMetrics metrics(const ConfusionMatrix& cm) {
  ClassMetrics m;
  const int64_t total = cm.total();
  m.accuracy = total > 0 ? double(cm.tp + cm.tn) / double(total) : 0.0;
  if (cm.tp + cm.fn > 0)
    m.sensitivity = double(cm.tp) / double(cm.tp + cm.fn);
  else
    m.sensitivity_defined = false;
  if (cm.tn + cm.fp > 0)
    m.specificity = double(cm.tn) / double(cm.tn + cm.fp);
  else
    m.specificity_defined = false;
  return m;
}

RocCurve roc_auc(const std::vector<double>& scores,
                 const std::vector<int>& truth) {
  if (scores.size() != truth.size())
    throw DataError("roc: scores/labels size mismatch");
  int64_t P = 0, N = 0;
  for (int y : truth) (y ? P : N)++;
  if (P == 0 || N == 0)
    throw DataError("roc: need both classes present");

  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] > scores[b];
  });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  int64_t tp = 0, fp = 0, tp_prev = 0, fp_prev = 0;
  // Integer accumulation: auc2pn collects 2*P*N*AUC exactly.
  long double auc2pn = 0.0L;
  size_t i = 0;
  while (i < order.size()) {
    const double thr = scores[order[i]];
    while (i < order.size() && scores[order[i]] == thr) {
      (truth[order[i]] ? tp : fp)++;
      ++i;
    }
    auc2pn += double((fp - fp_prev)) * double(tp + tp_prev);
    curve.points.push_back({double(fp) / double(N), double(tp) / double(P)});
    tp_prev = tp;
    fp_prev = fp;
  }
  curve.auc = double(auc2pn / (2.0L * double(P) * double(N)));
  return curve;
}

double cohens_kappa(const RaterLabels& a, const RaterLabels& b) {
  require_same_ids(a, b, "kappa");
  auto mb = label_map(b);
  int64_t n = 0;
  int64_t count[2][2] = {{0, 0}, {0, 0}};
  for (size_t i = 0; i < a.ids.size(); ++i) {
    count[a.labels[i]][mb.at(a.ids[i])]++;
    ++n;
  }
  if (n == 0) throw DataError("kappa: empty label sets");
  const double po = double(count[0][0] + count[1][1]) / double(n);
  const double a1 = double(count[1][0] + count[1][1]) / double(n);
  const double b1 = double(count[0][1] + count[1][1]) / double(n);
  const double pe = a1 * b1 + (1.0 - a1) * (1.0 - b1);
  if (pe == 1.0) return 1.0;  // both raters constant and equal
  return (po - pe) / (1.0 - pe);
}

RaterLabels gold_standard(const RaterLabels& initial,
                          const RaterLabels& anchor) {
  require_same_ids(initial, anchor, "gold standard");
  auto ma = label_map(anchor);
  RaterLabels gold;
  for (size_t i = 0; i < initial.ids.size(); ++i) {
    if (initial.labels[i] == ma.at(initial.ids[i])) {
      gold.ids.push_back(initial.ids[i]);
      gold.labels.push_back(initial.labels[i]);
    }
  }
  return gold;
}

std::vector<AgreementRow> agreement_report(
    const std::vector<std::pair<std::string, RaterLabels>>& raters,
    const RaterLabels& reference, const RaterLabels& gold) {
  auto ref = label_map(reference);
  auto gld = label_map(gold);
  std::vector<AgreementRow> rows;
  for (const auto& [name, labels] : raters) {
    AgreementRow row;
    row.rater = name;
    for (size_t i = 0; i < labels.ids.size(); ++i) {
      auto it = ref.find(labels.ids[i]);
      if (it == ref.end())
        throw DataError("agreement: rater '" + name + "' id '" +
                        labels.ids[i] + "' missing from reference");
      row.n_full++;
      if (labels.labels[i] == it->second) row.match_full++;
      auto git = gld.find(labels.ids[i]);
      if (git != gld.end()) {
        row.n_gold++;
        if (labels.labels[i] == git->second) row.match_gold++;
      }
    }
    row.pct_full =
        row.n_full ? 100.0 * double(row.match_full) / double(row.n_full) : 0.0;
    RaterLabels ref_on_rater;
    for (const auto& id : labels.ids) {
      ref_on_rater.ids.push_back(id);
      ref_on_rater.labels.push_back(ref.at(id));
    }
    row.kappa = cohens_kappa(labels, ref_on_rater);
    row.gold_defined = row.n_gold > 0;
    row.pct_gold = row.gold_defined
                       ? 100.0 * double(row.match_gold) / double(row.n_gold)
                       : 0.0;
    rows.push_back(row);
  }
  return rows;
}

void write_agreement_csv(const std::string& path,
                         const std::vector<AgreementRow>& rows) {
  std::string out =
      "rater,general_agreement_pct,matches,total,cohens_kappa,"
      "gold_agreement_pct,gold_matches,gold_total\n";
  for (const auto& r : rows) {
    out += r.rater + "," + fmt_g17(r.pct_full) + "," +
           std::to_string(r.match_full) + "," + std::to_string(r.n_full) +
           "," + fmt_g17(r.kappa) + ",";
    if (r.gold_defined)
      out += fmt_g17(r.pct_gold) + "," + std::to_string(r.match_gold) + "," +
             std::to_string(r.n_gold);
    else
      out += "undefined,0,0";
    out += "\n";
  }
  write_file(path, out);
}

// ---- svg roc plot --------------------------------------------------------------

void write_roc_svg(const std::string& path,
                   const std::vector<NamedCurve>& curves) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  const double size = 440.0, margin = 50.0, plot = size - 2 * margin;
  auto px = [&](double fpr) { return margin + fpr * plot; };
  auto py = [&](double tpr) { return size - margin - tpr * plot; };

  std::string svg;
  char buf[256];
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"" +
         std::to_string(int(size)) + "\" viewBox=\"0 0 640 " +
         std::to_string(int(size)) + "\">\n";
  svg += "<rect width=\"640\" height=\"" + std::to_string(int(size)) +
         "\" fill=\"white\"/>\n";
  // axes box and gridlines
  for (int t = 0; t <= 5; ++t) {
    const double f = t / 5.0;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                  "stroke=\"#dddddd\"/>\n",
                  px(f), py(0), px(f), py(1));
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                  "stroke=\"#dddddd\"/>\n",
                  px(0), py(f), px(1), py(f));
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" "
                  "text-anchor=\"middle\">%.1f</text>\n",
                  px(f), py(0) + 16, f);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" "
                  "text-anchor=\"end\">%.1f</text>\n",
                  px(0) - 6, py(f) + 4, f);
    svg += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                "fill=\"none\" stroke=\"black\"/>\n",
                margin, margin, plot, plot);
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"#aaaaaa\" stroke-dasharray=\"4 3\"/>\n",
                px(0), py(0), px(1), py(1));
  svg += buf;
  svg += "<text x=\"" + std::to_string(int(margin + plot / 2)) + "\" y=\"" +
         std::to_string(int(size - 10)) +
         "\" font-size=\"12\" text-anchor=\"middle\">false positive rate"
         "</text>\n";
  std::snprintf(buf, sizeof buf,
                "<text x=\"14\" y=\"%.1f\" font-size=\"12\" "
                "text-anchor=\"middle\" transform=\"rotate(-90 14 %.1f)\">"
                "true positive rate</text>\n",
                margin + plot / 2, margin + plot / 2);
  svg += buf;

  for (size_t c = 0; c < curves.size(); ++c) {
    const char* color = kColors[c % 8];
    std::string pts;
    for (const auto& p : curves[c].curve.points) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(p[0]), py(p[1]));
      pts += buf;
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" fill=\"%s\">"
                  "%s (AUC=%.3f)</text>\n",
                  size + 10.0, margin + 16.0 * double(c), color,
                  curves[c].name.c_str(), curves[c].curve.auc);
    svg += buf;
  }
  svg += "</svg>\n";
  write_file(path, svg);
}

}  // namespace clenet
