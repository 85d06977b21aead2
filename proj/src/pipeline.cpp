#include "clenet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <set>

#include <json.hpp>

#include "clenet/error.hpp"
#include "clenet/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace clenet {

void write_run_json(const std::string& out_dir, const std::string& command,
                    const std::map<std::string, std::string>& fields) {
  json j;
  j["command"] = command;
  for (const auto& [k, v] : fields) j[k] = v;
  write_file((fs::path(out_dir) / "run.json").string(), j.dump(2) + "\n");
}

namespace {

void require_input_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path not given");
  if (!file_exists(path)) throw DataError(what + " not found: " + path);
}

void prepare_out_dir(const std::string& out_dir) {
  if (out_dir.empty()) throw ConfigError("output directory not given");
  require_parent_exists(out_dir);
  ensure_dir(out_dir);
}

Model model_from_checkpoint(const NetworkSpec& spec, const Checkpoint& ckpt) {
  Rng rng(0, streams::kInit);
  Model m = Model::build(spec, RegimeSpec{Regime::DT, nullptr}, rng);
  m.load_from(ckpt);
  return m;
}

// Full-size architectures train for hours; demand an explicit opt-in.
void require_desk_scale(const NetworkSpec& spec, bool full_scale) {
  constexpr int64_t kFullScaleParams = 1000000;
  if (!full_scale && spec.param_count() > kFullScaleParams)
    throw ConfigError(spec.name + " has " +
                      std::to_string(spec.param_count()) +
                      " parameters; training it takes hours at desk scale. "
                      "Pass --full-scale to proceed");
}

RegimeSpec make_regime(Regime regime, const Checkpoint* donor) {
  RegimeSpec r;
  r.regime = regime;
  r.donor = regime == Regime::DT ? nullptr : donor;
  return r;
}

// Patient-level train/val split of a dev manifest.
std::pair<Manifest, Manifest> train_val_split(const Manifest& dev,
                                              double val_fraction,
                                              uint64_t seed) {
  auto [tr, val] = split_dev_test(dev, val_fraction, derive_seed(seed, 42));
  return {tr, val};
}

double accuracy_of(const std::vector<int>& pred, const std::vector<int>& truth) {
  int64_t match = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++match;
  return double(match) / double(pred.size());
}

std::string cell_tag(const std::string& arch, Regime regime) {
  return arch + "_" + regime_str(regime);
}

}  // namespace

Manifest run_gen_data(const GenDataArgs& args) {
  if (args.out_dir.empty()) throw ConfigError("gen-data: --out is required");
  require_parent_exists(args.out_dir);
  if (args.test_fraction <= 0 || args.test_fraction >= 1)
    throw ConfigError("gen-data: test fraction must be in (0,1)");

  Manifest all = generate_synthetic(args.synth, args.out_dir);
  auto [dev, test] = split_dev_test(all, args.test_fraction, args.synth.seed);
  std::set<std::string> test_patients;
  for (const auto& r : test.records) test_patients.insert(r.patient_id);

  Manifest merged;
  merged.root = args.out_dir;
  for (auto r : all.records) {
    r.split = test_patients.count(r.patient_id) ? SplitTag::Test : SplitTag::Dev;
    merged.records.push_back(r);
  }
  merged.save((fs::path(args.out_dir) / "manifest.csv").string());

  write_run_json(args.out_dir, "gen-data",
                 {{"seed", std::to_string(args.synth.seed)},
                  {"patients", std::to_string(args.synth.patients)},
                  {"images_min", std::to_string(args.synth.images_min)},
                  {"images_max", std::to_string(args.synth.images_max)},
                  {"diag_fraction", fmt_g17(args.synth.diag_fraction)},
                  {"image_size", std::to_string(args.synth.image_size)},
                  {"source_domain", args.synth.source_domain ? "true" : "false"},
                  {"test_fraction", fmt_g17(args.test_fraction)}});
  return merged;
}

void run_pretrain(const PretrainArgs& args) {
  require_input_file(args.manifest_path, "manifest");
  require_input_file(args.spec_path, "network spec");
  prepare_out_dir(args.out_dir);

  NetworkSpec spec = NetworkSpec::from_json_file(args.spec_path);
  require_desk_scale(spec, args.full_scale);
  Manifest all = Manifest::load(args.manifest_path);
  TrainConfig cfg = args.train;
  if (!args.lr_set) cfg.base_lr = default_lr_for(Regime::DT);
  auto [tr, val] = train_val_split(all, args.val_fraction, args.seed);

  Rng init_rng(args.seed, streams::kInit);
  Model model = Model::build(spec, make_regime(Regime::DT, nullptr), init_rng);
  TrainResult res =
      train(model, tr, val, cfg, args.seed, nullptr,
            (fs::path(args.out_dir) / "history.csv").string());
  save_checkpoint(res.best, (fs::path(args.out_dir) / "donor.ckpt").string());

  write_run_json(args.out_dir, "pretrain",
                 {{"manifest", args.manifest_path},
                  {"spec", spec.name},
                  {"seed", std::to_string(args.seed)},
                  {"base_lr", fmt_g17(cfg.base_lr)},
                  {"best_epoch", std::to_string(res.best_epoch)},
                  {"best_val_loss", fmt_g17(res.best_val_loss)}});
}

void run_train(const TrainArgs& args) {
  require_input_file(args.manifest_path, "manifest");
  require_input_file(args.spec_path, "network spec");
  if (args.regime != Regime::DT)
    require_input_file(args.donor_path, "donor checkpoint");
  else if (!args.donor_path.empty())
    throw ConfigError("train: DT trains from scratch; --donor not allowed");
  prepare_out_dir(args.out_dir);

  NetworkSpec spec = NetworkSpec::from_json_file(args.spec_path);
  require_desk_scale(spec, args.full_scale);
  Manifest dev = Manifest::load(args.manifest_path).filter_split(SplitTag::Dev);
  if (dev.records.empty()) throw DataError("train: no dev records in manifest");
  TrainConfig cfg = args.train;
  if (!args.lr_set) cfg.base_lr = default_lr_for(args.regime);

  Checkpoint donor;
  if (args.regime != Regime::DT) donor = load_checkpoint(args.donor_path);
  auto [tr, val] = train_val_split(dev, args.val_fraction, args.seed);

  Rng init_rng(args.seed, streams::kInit);
  Model model = Model::build(spec, make_regime(args.regime, &donor), init_rng);
  TrainResult res =
      train(model, tr, val, cfg, args.seed, nullptr,
            (fs::path(args.out_dir) / "history.csv").string());
  save_checkpoint(res.best, (fs::path(args.out_dir) / "best.ckpt").string());

  write_run_json(args.out_dir, "train",
                 {{"manifest", args.manifest_path},
                  {"spec", spec.name},
                  {"regime", regime_str(args.regime)},
                  {"seed", std::to_string(args.seed)},
                  {"base_lr", fmt_g17(cfg.base_lr)},
                  {"best_epoch", std::to_string(res.best_epoch)},
                  {"best_val_loss", fmt_g17(res.best_val_loss)}});
}

namespace {

std::vector<FoldOutcome> cv_into_dir(const NetworkSpec& spec,
                                     const Manifest& dev, Regime regime,
                                     const Checkpoint* donor,
                                     const TrainConfig& cfg, int64_t folds,
                                     uint64_t seed, int jobs,
                                     const std::string& out_dir,
                                     const ImageCache* cache) {
  FoldPlan plan = make_folds(dev, folds, seed);
  auto outcomes =
      run_cv(plan, spec, make_regime(regime, donor), cfg, seed, jobs, cache);
  ensure_dir(out_dir);
  std::string cv_csv = "fold,best_epoch,val_loss\n";
  for (const auto& oc : outcomes) {
    char name[64];
    std::snprintf(name, sizeof name, "fold_%lld.ckpt", (long long)oc.fold);
    save_checkpoint(oc.best, (fs::path(out_dir) / name).string());
    std::snprintf(name, sizeof name, "fold_%lld_history.csv",
                  (long long)oc.fold);
    std::string hist = "epoch,train_loss,val_loss,lr\n";
    int64_t best_epoch = 0;
    double best = 0;
    for (size_t e = 0; e < oc.history.size(); ++e) {
      const auto& h = oc.history[e];
      hist += std::to_string(h.epoch) + "," + fmt_g17(h.train_loss) + "," +
              fmt_g17(h.val_loss) + "," + fmt_g17(h.lr) + "\n";
      if (e == 0 || h.val_loss < best) {
        best = h.val_loss;
        best_epoch = h.epoch;
      }
    }
    write_file((fs::path(out_dir) / name).string(), hist);
    cv_csv += std::to_string(oc.fold) + "," + std::to_string(best_epoch) +
              "," + fmt_g17(oc.val_loss) + "\n";
  }
  write_file((fs::path(out_dir) / "cv.csv").string(), cv_csv);
  return outcomes;
}

}  // namespace

std::vector<FoldOutcome> run_cv_cmd(const CvArgs& args) {
  require_input_file(args.manifest_path, "manifest");
  require_input_file(args.spec_path, "network spec");
  if (args.regime != Regime::DT)
    require_input_file(args.donor_path, "donor checkpoint");
  else if (!args.donor_path.empty())
    throw ConfigError("cv: DT trains from scratch; --donor not allowed");
  prepare_out_dir(args.out_dir);

  NetworkSpec spec = NetworkSpec::from_json_file(args.spec_path);
  require_desk_scale(spec, args.full_scale);
  Manifest dev = Manifest::load(args.manifest_path).filter_split(SplitTag::Dev);
  TrainConfig cfg = args.train;
  if (!args.lr_set) cfg.base_lr = default_lr_for(args.regime);
  Checkpoint donor;
  if (args.regime != Regime::DT) donor = load_checkpoint(args.donor_path);

  auto outcomes = cv_into_dir(spec, dev, args.regime,
                              args.regime == Regime::DT ? nullptr : &donor,
                              cfg, args.folds, args.seed, args.jobs,
                              args.out_dir, nullptr);
  write_run_json(args.out_dir, "cv",
                 {{"manifest", args.manifest_path},
                  {"spec", spec.name},
                  {"regime", regime_str(args.regime)},
                  {"folds", std::to_string(args.folds)},
                  {"seed", std::to_string(args.seed)},
                  {"base_lr", fmt_g17(cfg.base_lr)}});
  return outcomes;
}

TrainConfig run_grid_search(const GridSearchArgs& args) {
  require_input_file(args.manifest_path, "manifest");
  require_input_file(args.spec_path, "network spec");
  require_input_file(args.grid_path, "grid file");
  if (args.regime != Regime::DT)
    require_input_file(args.donor_path, "donor checkpoint");
  prepare_out_dir(args.out_dir);

  NetworkSpec spec = NetworkSpec::from_json_file(args.spec_path);
  require_desk_scale(spec, args.full_scale);
  Manifest dev = Manifest::load(args.manifest_path).filter_split(SplitTag::Dev);
  Checkpoint donor;
  if (args.regime != Regime::DT) donor = load_checkpoint(args.donor_path);

  json gj;
  try {
    gj = json::parse(read_file(args.grid_path));
  } catch (const json::exception& e) {
    throw FormatError(std::string("grid file: invalid json: ") + e.what());
  }
  if (!gj.is_array() || gj.empty())
    throw ConfigError("grid file: expected a non-empty json array");
  std::vector<TrainConfig> grid;
  for (const auto& entry : gj) {
    TrainConfig cfg = args.base;
    if (!args.lr_set) cfg.base_lr = default_lr_for(args.regime);
    if (entry.contains("base_lr")) cfg.base_lr = entry["base_lr"].get<double>();
    if (entry.contains("momentum"))
      cfg.momentum = entry["momentum"].get<double>();
    if (entry.contains("l2")) cfg.l2 = entry["l2"].get<double>();
    if (entry.contains("batch_size"))
      cfg.batch_size = entry["batch_size"].get<int64_t>();
    if (entry.contains("max_epochs"))
      cfg.max_epochs = entry["max_epochs"].get<int64_t>();
    if (entry.contains("patience"))
      cfg.patience = entry["patience"].get<int64_t>();
    grid.push_back(cfg);
  }

  FoldPlan plan = make_folds(dev, args.folds, args.seed);
  GridOutcome outcome = grid_search(
      grid, plan, spec, make_regime(args.regime, &donor), args.seed,
      (fs::path(args.out_dir) / "grid.csv").string());

  const TrainConfig& best = grid[outcome.best_index];
  json bj;
  bj["index"] = outcome.best_index;
  bj["base_lr"] = best.base_lr;
  bj["momentum"] = best.momentum;
  bj["l2"] = best.l2;
  bj["batch_size"] = best.batch_size;
  bj["max_epochs"] = best.max_epochs;
  bj["mean_loss"] = outcome.mean_losses[outcome.best_index];
  write_file((fs::path(args.out_dir) / "best.json").string(),
             bj.dump(2) + "\n");
  write_run_json(args.out_dir, "grid-search",
                 {{"manifest", args.manifest_path},
                  {"spec", spec.name},
                  {"regime", regime_str(args.regime)},
                  {"folds", std::to_string(args.folds)},
                  {"seed", std::to_string(args.seed)},
                  {"grid_size", std::to_string(grid.size())}});
  return best;
}

ExperimentResult run_experiment(const ExperimentArgs& args) {
  require_input_file(args.manifest_path, "manifest");
  if (args.spec_paths.empty()) throw ConfigError("experiment: no specs given");
  for (const auto& p : args.spec_paths) require_input_file(p, "network spec");
  const bool needs_donor =
      std::any_of(args.regimes.begin(), args.regimes.end(),
                  [](Regime r) { return r != Regime::DT; });
  if (needs_donor) {
    if (args.donor_paths.size() != args.spec_paths.size())
      throw ConfigError(
          "experiment: fine-tuning regimes need one --donor per --spec");
    for (const auto& p : args.donor_paths)
      require_input_file(p, "donor checkpoint");
  }
  prepare_out_dir(args.out_dir);

  Manifest full = Manifest::load(args.manifest_path);
  Manifest dev = full.filter_split(SplitTag::Dev);
  Manifest test = full.filter_split(SplitTag::Test);
  if (dev.records.empty() || test.records.empty())
    throw DataError("experiment: manifest needs both dev and test records");
  require_patient_disjoint(dev, test, "experiment dev/test");

  ImageCache cache;
  cache.preload(dev);
  cache.preload(test);

  RaterLabels truth;
  for (const auto& r : test.records) {
    truth.ids.push_back(r.path);
    truth.labels.push_back(r.label);
  }
  truth.save_csv((fs::path(args.out_dir) / "truth_test.csv").string());

  ExperimentResult result;
  std::vector<NamedCurve> roc_curves;

  auto write_table = [&] {
    const size_t k = result.cells.empty() ? 0 : result.cells[0].model_acc.size();
    std::string table = "row";
    for (const auto& cell : result.cells)
      table += "," + cell.arch + ":" + regime_str(cell.regime);
    table += "\n";
    for (size_t m = 0; m < k; ++m) {
      table += "Model " + std::to_string(m + 1);
      for (const auto& cell : result.cells)
        table += "," + fmt_g17(cell.model_acc[m]);
      table += "\n";
    }
    table += "Mean";
    for (const auto& cell : result.cells) table += "," + fmt_g17(cell.mean_acc);
    table += "\nArithmetic Ensemble";
    for (const auto& cell : result.cells)
      table += "," + fmt_g17(cell.arith_acc);
    table += "\nGeometric Ensemble";
    for (const auto& cell : result.cells) table += "," + fmt_g17(cell.geom_acc);
    table += "\n";
    write_file((fs::path(args.out_dir) / "table.csv").string(), table);
  };

  for (size_t si = 0; si < args.spec_paths.size(); ++si) {
    NetworkSpec spec = NetworkSpec::from_json_file(args.spec_paths[si]);
    require_desk_scale(spec, args.full_scale);
    Checkpoint donor;
    if (needs_donor) donor = load_checkpoint(args.donor_paths[si]);
    for (Regime regime : args.regimes) {
      TrainConfig cfg = args.train;
      if (!args.lr_set) cfg.base_lr = default_lr_for(regime);

      const std::string tag = cell_tag(spec.name, regime);
      auto outcomes = cv_into_dir(
          spec, dev, regime, regime == Regime::DT ? nullptr : &donor, cfg,
          args.folds, args.seed, args.jobs,
          (fs::path(args.out_dir) / ("cv_" + tag)).string(), &cache);

      ExperimentCell cell;
      cell.arch = spec.name;
      cell.regime = regime;
      ScoreSet set;
      set.image_ids = truth.ids;
      for (const auto& oc : outcomes) {
        Model model = model_from_checkpoint(spec, oc.best);
        auto scores = evaluate_scores(model, test, cfg.batch_size, &cache);
        std::vector<int> pred;
        std::vector<double> pos;
        for (const auto& s : scores) {
          pred.push_back(s[1] > s[0] ? 1 : 0);
          pos.push_back(s[1]);
        }
        cell.model_acc.push_back(accuracy_of(pred, truth.labels));
        cell.model_auc.push_back(roc_auc(pos, truth.labels).auc);
        set.model_ids.push_back("model_" + std::to_string(oc.fold + 1));
        set.scores.push_back(std::move(scores));
      }
      set.save_csv(
          (fs::path(args.out_dir) / ("scores_" + tag + ".csv")).string());

      double acc_sum = 0;
      for (double a : cell.model_acc) acc_sum += a;
      cell.mean_acc = acc_sum / double(cell.model_acc.size());

      auto arith = ensemble_predict(set, EnsembleKind::Arithmetic);
      auto geom = ensemble_predict(set, EnsembleKind::Geometric);
      cell.arith_acc = accuracy_of(arith.classes, truth.labels);
      cell.geom_acc = accuracy_of(geom.classes, truth.labels);
      std::vector<double> arith_pos, geom_pos;
      for (size_t i = 0; i < truth.ids.size(); ++i) {
        arith_pos.push_back(arith.combined[i][1]);
        geom_pos.push_back(geom.combined[i][1]);
      }
      RocCurve arith_roc = roc_auc(arith_pos, truth.labels);
      RocCurve geom_roc = roc_auc(geom_pos, truth.labels);
      cell.arith_auc = arith_roc.auc;
      cell.geom_auc = geom_roc.auc;
      roc_curves.push_back({tag + " arith", arith_roc});
      roc_curves.push_back({tag + " geom", geom_roc});

      result.cells.push_back(std::move(cell));
      write_table();  // partial results persist per completed cell
    }
  }

  write_roc_svg((fs::path(args.out_dir) / "roc.svg").string(), roc_curves);

  // Non-gating diagnostic summary: regime ordering and ensemble effect are
  // dataset-dependent observations, reported but never asserted.
  std::string summary;
  for (const auto& cell : result.cells) {
    double auc_sum = 0;
    for (double a : cell.model_auc) auc_sum += a;
    const double mean_auc = auc_sum / double(cell.model_auc.size());
    summary += cell.arch + ":" + regime_str(cell.regime) +
               " mean_acc=" + fmt_g17(cell.mean_acc) +
               " arith_acc=" + fmt_g17(cell.arith_acc) +
               " geom_acc=" + fmt_g17(cell.geom_acc) +
               " mean_auc=" + fmt_g17(mean_auc) +
               " arith_auc=" + fmt_g17(cell.arith_auc) +
               " geom_auc=" + fmt_g17(cell.geom_auc) + "\n";
  }
  for (size_t si = 0; si < args.spec_paths.size(); ++si) {
    std::map<Regime, double> by_regime;
    for (const auto& cell : result.cells)
      if (cell.arch == result.cells[si * args.regimes.size()].arch)
        by_regime[cell.regime] = cell.geom_auc;
    if (by_regime.size() == 3) {
      const bool ordered = by_regime[Regime::DFT] >= by_regime[Regime::SFT] &&
                           by_regime[Regime::SFT] >= by_regime[Regime::DT];
      summary += result.cells[si * args.regimes.size()].arch +
                 ": DFT>=SFT>=DT by geometric-ensemble AUC: " +
                 (ordered ? "yes" : "no") + "\n";
    }
  }
  write_file((fs::path(args.out_dir) / "summary.txt").string(), summary);

  std::map<std::string, std::string> fields = {
      {"manifest", args.manifest_path},
      {"folds", std::to_string(args.folds)},
      {"seed", std::to_string(args.seed)},
      {"jobs", std::to_string(args.jobs)}};
  for (size_t i = 0; i < args.spec_paths.size(); ++i)
    fields["spec" + std::to_string(i)] = args.spec_paths[i];
  std::vector<std::string> regimes;
  for (Regime r : args.regimes) regimes.push_back(regime_str(r));
  fields["regimes"] = join(regimes, "+");
  write_run_json(args.out_dir, "experiment", fields);
  return result;
}

void run_ensemble_eval(const EnsembleEvalArgs& args) {
  require_input_file(args.scores_path, "score set");
  require_input_file(args.truth_path, "truth labels");
  prepare_out_dir(args.out_dir);

  ScoreSet set = ScoreSet::load_csv(args.scores_path);
  RaterLabels truth = RaterLabels::load_csv(args.truth_path);
  if (truth.ids != set.image_ids)
    throw DataError("ensemble-eval: truth ids do not align with the score set");

  std::string csv =
      "model,accuracy,sensitivity,specificity,auc\n";
  std::vector<NamedCurve> curves;
  auto eval_one = [&](const std::string& name,
                      const std::vector<int>& classes,
                      const std::vector<double>& pos) {
    RaterLabels pred{set.image_ids, classes};
    ConfusionMatrix cm = confusion(pred, truth);
    ClassMetrics m = metrics(cm);
    RocCurve roc = roc_auc(pos, truth.labels);
    curves.push_back({name, roc});
    csv += name + "," + fmt_g17(m.accuracy) + "," +
           (m.sensitivity_defined ? fmt_g17(m.sensitivity) : "undefined") +
           "," +
           (m.specificity_defined ? fmt_g17(m.specificity) : "undefined") +
           "," + fmt_g17(roc.auc) + "\n";
  };

  for (size_t m = 0; m < set.model_ids.size(); ++m) {
    std::vector<int> classes;
    std::vector<double> pos;
    for (const auto& s : set.scores[m]) {
      classes.push_back(s[1] > s[0] ? 1 : 0);
      pos.push_back(s[1]);
    }
    eval_one(set.model_ids[m], classes, pos);
  }
  auto arith = ensemble_predict(set, EnsembleKind::Arithmetic);
  auto geom = ensemble_predict(set, EnsembleKind::Geometric);
  std::vector<double> arith_pos, geom_pos;
  for (size_t i = 0; i < set.image_ids.size(); ++i) {
    arith_pos.push_back(arith.combined[i][1]);
    geom_pos.push_back(geom.combined[i][1]);
  }
  eval_one("arithmetic_ensemble", arith.classes, arith_pos);
  eval_one("geometric_ensemble", geom.classes, geom_pos);

  write_file((fs::path(args.out_dir) / "metrics.csv").string(), csv);
  write_roc_svg((fs::path(args.out_dir) / "roc.svg").string(), curves);
  write_run_json(args.out_dir, "ensemble-eval",
                 {{"scores", args.scores_path}, {"truth", args.truth_path}});
}

void run_agreement(const AgreementArgs& args) {
  require_input_file(args.reference_path, "reference labels");
  if (args.raters.empty()) throw ConfigError("agreement: no raters given");
  for (const auto& [name, path] : args.raters)
    require_input_file(path, "rater labels (" + name + ")");
  prepare_out_dir(args.out_dir);

  RaterLabels reference = RaterLabels::load_csv(args.reference_path);
  std::vector<std::pair<std::string, RaterLabels>> raters;
  const RaterLabels* anchor = nullptr;
  for (const auto& [name, path] : args.raters) {
    raters.emplace_back(name, RaterLabels::load_csv(path));
    if (name == args.anchor) anchor = &raters.back().second;
  }
  if (!anchor)
    throw ConfigError("agreement: anchor '" + args.anchor +
                      "' is not one of the raters");

  RaterLabels gold = gold_standard(reference, *anchor);
  if (gold.ids.empty())
    std::cerr << "warning: gold standard is empty (no agreement between the "
                 "reference and the anchor rater)\n";
  gold.save_csv((fs::path(args.out_dir) / "gold.csv").string());

  auto rows = agreement_report(raters, reference, gold);
  write_agreement_csv((fs::path(args.out_dir) / "agreement.csv").string(),
                      rows);
  write_run_json(args.out_dir, "agreement",
                 {{"reference", args.reference_path},
                  {"anchor", args.anchor},
                  {"raters", std::to_string(args.raters.size())},
                  {"gold_size", std::to_string(gold.ids.size())}});
}

DiagnosticMap run_localize(const LocalizeArgs& args) {
  require_input_file(args.image_path, "image");
  require_input_file(args.spec_path, "network spec");
  require_input_file(args.checkpoint_path, "checkpoint");
  prepare_out_dir(args.out_dir);

  NetworkSpec spec = NetworkSpec::from_json_file(args.spec_path);
  Model model = model_from_checkpoint(spec, load_checkpoint(args.checkpoint_path));
  GrayImage img = read_png_gray8(args.image_path);
  Tensor image = tensor_from_image(img);

  DiagnosticMap map = diagnostic_map(model, image, args.window, args.stride,
                                     fs::path(args.image_path).filename().string(),
                                     args.grid_truncate);
  auto boxes = top_boxes(map, args.top_n, args.min_score);

  write_map_csv((fs::path(args.out_dir) / "map.csv").string(), map);
  write_map_pgm((fs::path(args.out_dir) / "map.pgm").string(), map);
  write_map_ppm((fs::path(args.out_dir) / "map.ppm").string(), map);
  write_boxes_csv((fs::path(args.out_dir) / "boxes.csv").string(),
                  map.image_id, boxes);
  write_overlay_svg((fs::path(args.out_dir) / "overlay.svg").string(),
                    fs::absolute(args.image_path).string(), img.height,
                    img.width, boxes);
  write_run_json(args.out_dir, "localize",
                 {{"image", args.image_path},
                  {"spec", spec.name},
                  {"checkpoint", args.checkpoint_path},
                  {"window", std::to_string(args.window)},
                  {"stride", std::to_string(args.stride)},
                  {"grid_truncate", std::to_string(args.grid_truncate)},
                  {"rows", std::to_string(map.rows)},
                  {"cols", std::to_string(map.cols)}});
  return map;
}

void run_export_maps(const ExportMapsArgs& args) {
  require_input_file(args.image_path, "image");
  require_input_file(args.spec_path, "network spec");
  require_input_file(args.checkpoint_path, "checkpoint");
  prepare_out_dir(args.out_dir);

  NetworkSpec spec = NetworkSpec::from_json_file(args.spec_path);
  Model model = model_from_checkpoint(spec, load_checkpoint(args.checkpoint_path));
  GrayImage img = read_png_gray8(args.image_path);
  Tensor image = tensor_from_image(img);
  // Center-crop to the network input when the frame is larger.
  if (image.extent(1) != model.spec().in_h ||
      image.extent(2) != model.spec().in_w) {
    if (image.extent(1) < model.spec().in_h ||
        image.extent(2) < model.spec().in_w)
      throw DataError("export-maps: image smaller than the network input");
    image = crop_chw(image, (image.extent(1) - model.spec().in_h) / 2,
                     (image.extent(2) - model.spec().in_w) / 2,
                     model.spec().in_h, model.spec().in_w);
  }
  export_activation_maps(model, image, args.layer,
                         (fs::path(args.out_dir) / "planes").string());
  write_run_json(args.out_dir, "export-maps",
                 {{"image", args.image_path},
                  {"spec", spec.name},
                  {"checkpoint", args.checkpoint_path},
                  {"layer", args.layer}});
}

}  // namespace clenet
