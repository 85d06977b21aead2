#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "clenet/data.hpp"
#include "clenet/enseval.hpp"
#include "clenet/localize.hpp"
#include "clenet/network.hpp"
#include "clenet/trainer.hpp"

// End-to-end commands behind the CLI. Every run* function validates its
// inputs up front, writes all artifacts under an output directory, and drops
// a run.json echoing the resolved configuration.

namespace clenet {

struct GenDataArgs {
  std::string out_dir;
  SynthConfig synth;
  double test_fraction = 0.2;
};

// images/ + manifest.csv with dev/test split tags.
Manifest run_gen_data(const GenDataArgs& args);

struct PretrainArgs {
  std::string manifest_path;  // source-domain data
  std::string spec_path;
  std::string out_dir;
  TrainConfig train;
  bool lr_set = false;  // false: default 0.01 for the from-scratch run
  double val_fraction = 0.2;
  uint64_t seed = 1;
  bool full_scale = false;  // required to train full-size specs
};

// Trains from scratch on the source data; donor.ckpt + history.csv.
void run_pretrain(const PretrainArgs& args);

struct TrainArgs {
  std::string manifest_path;
  std::string spec_path;
  Regime regime = Regime::DT;
  std::string donor_path;  // required for SFT/DFT
  std::string out_dir;
  TrainConfig train;
  bool lr_set = false;
  double val_fraction = 0.2;  // patient-level split of the dev set
  uint64_t seed = 1;
  bool full_scale = false;  // required to train full-size specs
};

void run_train(const TrainArgs& args);

struct CvArgs {
  std::string manifest_path;
  std::string spec_path;
  Regime regime = Regime::DT;
  std::string donor_path;
  std::string out_dir;
  TrainConfig train;
  bool lr_set = false;
  int64_t folds = 5;
  uint64_t seed = 1;
  int jobs = 1;
  bool full_scale = false;
};

// fold_<k>.ckpt, fold_<k>_history.csv, cv.csv.
std::vector<FoldOutcome> run_cv_cmd(const CvArgs& args);

struct GridSearchArgs {
  std::string manifest_path;
  std::string spec_path;
  Regime regime = Regime::DT;
  std::string donor_path;
  std::string grid_path;  // json list of config overrides
  std::string out_dir;
  TrainConfig base;
  bool lr_set = false;
  int64_t folds = 5;
  uint64_t seed = 1;
  bool full_scale = false;
};

// grid.csv + best.json; returns the winning config.
TrainConfig run_grid_search(const GridSearchArgs& args);

struct ExperimentArgs {
  std::string manifest_path;
  std::vector<std::string> spec_paths;
  std::vector<Regime> regimes{Regime::DT, Regime::SFT, Regime::DFT};
  std::vector<std::string> donor_paths;  // aligned with spec_paths
  std::string out_dir;
  TrainConfig train;
  bool lr_set = false;  // false: per-regime defaults
  int64_t folds = 5;
  uint64_t seed = 1;
  int jobs = 1;
  bool full_scale = false;
};

// One column per (architecture x regime); rows Model 1-5, Mean, Arithmetic
// Ensemble, Geometric Ensemble.
struct ExperimentCell {
  std::string arch;
  Regime regime = Regime::DT;
  std::vector<double> model_acc;  // per fold model
  std::vector<double> model_auc;
  double mean_acc = 0.0;
  double arith_acc = 0.0, geom_acc = 0.0;
  double arith_auc = 0.0, geom_auc = 0.0;
};

struct ExperimentResult {
  std::vector<ExperimentCell> cells;
};

// Full protocol: per cell, k-fold CV on the dev split, top model per fold,
// test-set evaluation of the five singles plus both ensembles. Writes
// table.csv, per-cell score sets, truth_test.csv, roc.svg and summary.txt.
ExperimentResult run_experiment(const ExperimentArgs& args);

struct EnsembleEvalArgs {
  std::string scores_path;
  std::string truth_path;   // rater-labels csv
  std::string out_dir;
};

void run_ensemble_eval(const EnsembleEvalArgs& args);

struct AgreementArgs {
  std::string reference_path;
  std::vector<std::pair<std::string, std::string>> raters;  // name -> csv
  std::string anchor;  // rater name used to build the gold standard
  std::string out_dir;
};

void run_agreement(const AgreementArgs& args);

struct LocalizeArgs {
  std::string image_path;
  std::string spec_path;
  std::string checkpoint_path;
  int64_t window = 227;
  int64_t stride = 79;
  int64_t grid_truncate = 0;
  int64_t top_n = 3;
  double min_score = 0.5;
  std::string out_dir;
};

DiagnosticMap run_localize(const LocalizeArgs& args);

struct ExportMapsArgs {
  std::string image_path;
  std::string spec_path;
  std::string checkpoint_path;
  std::string layer;
  std::string out_dir;
};

void run_export_maps(const ExportMapsArgs& args);

// run.json helper: stable key order, no timestamps.
void write_run_json(const std::string& out_dir, const std::string& command,
                    const std::map<std::string, std::string>& fields);

}  // namespace clenet
