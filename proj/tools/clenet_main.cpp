#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>

#include "clenet/error.hpp"
#include "clenet/pipeline.hpp"

namespace fs = std::filesystem;
using namespace clenet;

namespace {

// Default output location when --out is not given. Tests and reproducible
// runs should always pass --out explicitly.
std::string timestamped_run_dir(const std::string& command) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  localtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "runs/%s-%04d%02d%02d-%02d%02d%02d",
                command.c_str(), tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

std::string resolve_out(std::string& out, const std::string& command) {
  if (out.empty()) {
    out = timestamped_run_dir(command);
    fs::create_directories(fs::path(out).parent_path());
  }
  return out;
}

struct TrainFlags {
  TrainConfig cfg;
  bool lr_set = false;

  void attach(CLI::App* cmd) {
    auto* lr = cmd->add_option("--lr", cfg.base_lr,
                               "initial learning rate (default per regime)");
    lr->each([this](const std::string&) { lr_set = true; });
    cmd->add_option("--momentum", cfg.momentum, "SGD momentum");
    cmd->add_option("--l2", cfg.l2, "L2 regularization strength");
    cmd->add_option("--batch-size", cfg.batch_size, "minibatch size");
    cmd->add_option("--max-epochs", cfg.max_epochs, "epoch budget");
    cmd->add_option("--patience", cfg.patience,
                    "early-stop patience in epochs (0 disables)");
    cmd->add_option("--lr-gamma", cfg.lr_gamma, "step-decay factor");
    cmd->add_option("--lr-step", cfg.lr_step_epochs,
                    "epochs between decays (0 disables)");
    cmd->add_flag("--no-augment", [this](int64_t) { cfg.augment = false; },
                  "disable random crops and flips");
    cmd->add_option("--crop", cfg.crop,
                    "training crop size (default: network input)");
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "clenet: train, ensemble, evaluate and localize convolutional "
      "classifiers for diagnostic-frame triage"};
  app.require_subcommand(1);

  // ---- gen-data ----
  GenDataArgs gen;
  auto* cmd_gen = app.add_subcommand(
      "gen-data", "generate a synthetic patient-grouped dataset");
  cmd_gen->add_option("--out", gen.out_dir, "output directory")->required();
  cmd_gen->add_option("--seed", gen.synth.seed, "generator seed");
  cmd_gen->add_option("--patients", gen.synth.patients, "patient count");
  cmd_gen->add_option("--images-min", gen.synth.images_min,
                      "min images per patient");
  cmd_gen->add_option("--images-max", gen.synth.images_max,
                      "max images per patient");
  cmd_gen->add_option("--diag-fraction", gen.synth.diag_fraction,
                      "diagnostic class fraction");
  cmd_gen->add_option("--size", gen.synth.image_size, "image size in pixels");
  cmd_gen->add_flag("--source-domain", gen.synth.source_domain,
                    "alternate appearance for pretraining data");
  cmd_gen->add_option("--test-fraction", gen.test_fraction,
                      "patient fraction held out for testing");

  // ---- pretrain ----
  PretrainArgs pre;
  TrainFlags pre_flags;
  auto* cmd_pre = app.add_subcommand(
      "pretrain", "train a donor checkpoint on source-domain data");
  cmd_pre->add_option("--data", pre.manifest_path, "manifest.csv path")
      ->required();
  cmd_pre->add_option("--spec", pre.spec_path, "network spec json")->required();
  cmd_pre->add_option("--out", pre.out_dir, "output directory");
  cmd_pre->add_option("--seed", pre.seed, "training seed");
  cmd_pre->add_option("--val-fraction", pre.val_fraction,
                      "patient fraction for validation");
  cmd_pre->add_flag("--full-scale", pre.full_scale,
                    "allow training full-size architectures (slow)");
  pre_flags.attach(cmd_pre);

  // ---- train ----
  TrainArgs tr;
  TrainFlags tr_flags;
  std::string tr_regime = "DT";
  auto* cmd_tr = app.add_subcommand("train", "train one model on the dev split");
  cmd_tr->add_option("--data", tr.manifest_path, "manifest.csv path")
      ->required();
  cmd_tr->add_option("--spec", tr.spec_path, "network spec json")->required();
  cmd_tr->add_option("--regime", tr_regime, "DT, SFT or DFT");
  cmd_tr->add_option("--donor", tr.donor_path, "donor checkpoint (SFT/DFT)");
  cmd_tr->add_option("--out", tr.out_dir, "output directory");
  cmd_tr->add_option("--seed", tr.seed, "training seed");
  cmd_tr->add_option("--val-fraction", tr.val_fraction,
                     "patient fraction for validation");
  cmd_tr->add_flag("--full-scale", tr.full_scale,
                   "allow training full-size architectures (slow)");
  tr_flags.attach(cmd_tr);

  // ---- cv ----
  CvArgs cv;
  TrainFlags cv_flags;
  std::string cv_regime = "DT";
  auto* cmd_cv = app.add_subcommand(
      "cv", "patient-based k-fold cross validation");
  cmd_cv->add_option("--data", cv.manifest_path, "manifest.csv path")
      ->required();
  cmd_cv->add_option("--spec", cv.spec_path, "network spec json")->required();
  cmd_cv->add_option("--regime", cv_regime, "DT, SFT or DFT");
  cmd_cv->add_option("--donor", cv.donor_path, "donor checkpoint (SFT/DFT)");
  cmd_cv->add_option("--folds", cv.folds, "fold count");
  cmd_cv->add_option("--out", cv.out_dir, "output directory");
  cmd_cv->add_option("--seed", cv.seed, "seed");
  cmd_cv->add_option("--jobs", cv.jobs, "parallel fold jobs");
  cmd_cv->add_flag("--full-scale", cv.full_scale,
                   "allow training full-size architectures (slow)");
  cv_flags.attach(cmd_cv);

  // ---- grid-search ----
  GridSearchArgs gs;
  TrainFlags gs_flags;
  std::string gs_regime = "DT";
  auto* cmd_gs = app.add_subcommand(
      "grid-search", "hyperparameter grid search over the fold plan");
  cmd_gs->add_option("--data", gs.manifest_path, "manifest.csv path")
      ->required();
  cmd_gs->add_option("--spec", gs.spec_path, "network spec json")->required();
  cmd_gs->add_option("--grid", gs.grid_path, "json array of overrides")
      ->required();
  cmd_gs->add_option("--regime", gs_regime, "DT, SFT or DFT");
  cmd_gs->add_option("--donor", gs.donor_path, "donor checkpoint (SFT/DFT)");
  cmd_gs->add_option("--folds", gs.folds, "fold count");
  cmd_gs->add_option("--out", gs.out_dir, "output directory");
  cmd_gs->add_option("--seed", gs.seed, "seed");
  cmd_gs->add_flag("--full-scale", gs.full_scale,
                   "allow training full-size architectures (slow)");
  gs_flags.attach(cmd_gs);

  // ---- experiment ----
  ExperimentArgs ex;
  TrainFlags ex_flags;
  std::vector<std::string> ex_regimes{"DT", "SFT", "DFT"};
  auto* cmd_ex = app.add_subcommand(
      "experiment",
      "full protocol: cv per architecture and regime, top-5 singles, "
      "ensembles, report");
  cmd_ex->add_option("--data", ex.manifest_path, "manifest.csv path")
      ->required();
  cmd_ex->add_option("--spec", ex.spec_paths, "network spec json (repeatable)")
      ->required();
  cmd_ex->add_option("--donor", ex.donor_paths,
                     "donor checkpoint per spec (repeatable)");
  cmd_ex->add_option("--regimes", ex_regimes, "subset of DT SFT DFT");
  cmd_ex->add_option("--folds", ex.folds, "fold count");
  cmd_ex->add_option("--out", ex.out_dir, "output directory");
  cmd_ex->add_option("--seed", ex.seed, "seed");
  cmd_ex->add_option("--jobs", ex.jobs, "parallel fold jobs");
  cmd_ex->add_flag("--full-scale", ex.full_scale,
                   "allow training full-size architectures (slow)");
  ex_flags.attach(cmd_ex);

  // ---- ensemble-eval ----
  EnsembleEvalArgs ee;
  auto* cmd_ee = app.add_subcommand(
      "ensemble-eval", "metrics and ROC plot for a stored score set");
  cmd_ee->add_option("--scores", ee.scores_path, "score set csv")->required();
  cmd_ee->add_option("--truth", ee.truth_path, "truth labels csv")->required();
  cmd_ee->add_option("--out", ee.out_dir, "output directory");

  // ---- agreement ----
  AgreementArgs ag;
  std::vector<std::string> rater_args;
  auto* cmd_ag = app.add_subcommand(
      "agreement", "inter-rater agreement with a gold-standard subset");
  cmd_ag->add_option("--reference", ag.reference_path, "reference labels csv")
      ->required();
  cmd_ag->add_option("--rater", rater_args,
                     "name=labels.csv (repeatable)")
      ->required();
  cmd_ag->add_option("--anchor", ag.anchor,
                     "rater whose agreement with the reference defines the "
                     "gold standard")
      ->required();
  cmd_ag->add_option("--out", ag.out_dir, "output directory");

  // ---- localize ----
  LocalizeArgs lo;
  auto* cmd_lo = app.add_subcommand(
      "localize", "sliding-window diagnostic map with bounding boxes");
  cmd_lo->add_option("--image", lo.image_path, "input png")->required();
  cmd_lo->add_option("--spec", lo.spec_path, "network spec json")->required();
  cmd_lo->add_option("--checkpoint", lo.checkpoint_path, "model checkpoint")
      ->required();
  cmd_lo->add_option("--window", lo.window, "window size in pixels");
  cmd_lo->add_option("--stride", lo.stride, "window stride in pixels");
  cmd_lo->add_option("--grid-truncate", lo.grid_truncate,
                     "keep only the first n rows/cols of the map");
  cmd_lo->add_option("--top", lo.top_n, "number of boxes");
  cmd_lo->add_option("--min-score", lo.min_score, "box score threshold");
  cmd_lo->add_option("--out", lo.out_dir, "output directory");

  // ---- export-maps ----
  ExportMapsArgs em;
  auto* cmd_em = app.add_subcommand(
      "export-maps", "write per-filter activation maps of a conv layer");
  cmd_em->add_option("--image", em.image_path, "input png")->required();
  cmd_em->add_option("--spec", em.spec_path, "network spec json")->required();
  cmd_em->add_option("--checkpoint", em.checkpoint_path, "model checkpoint")
      ->required();
  cmd_em->add_option("--layer", em.layer, "conv layer name")->required();
  cmd_em->add_option("--out", em.out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_gen->parsed()) {
      run_gen_data(gen);
    } else if (cmd_pre->parsed()) {
      pre.train = pre_flags.cfg;
      pre.lr_set = pre_flags.lr_set;
      resolve_out(pre.out_dir, "pretrain");
      run_pretrain(pre);
    } else if (cmd_tr->parsed()) {
      tr.train = tr_flags.cfg;
      tr.lr_set = tr_flags.lr_set;
      tr.regime = regime_from_str(tr_regime);
      resolve_out(tr.out_dir, "train");
      run_train(tr);
    } else if (cmd_cv->parsed()) {
      cv.train = cv_flags.cfg;
      cv.lr_set = cv_flags.lr_set;
      cv.regime = regime_from_str(cv_regime);
      resolve_out(cv.out_dir, "cv");
      run_cv_cmd(cv);
    } else if (cmd_gs->parsed()) {
      gs.base = gs_flags.cfg;
      gs.lr_set = gs_flags.lr_set;
      gs.regime = regime_from_str(gs_regime);
      resolve_out(gs.out_dir, "grid-search");
      run_grid_search(gs);
    } else if (cmd_ex->parsed()) {
      ex.train = ex_flags.cfg;
      ex.lr_set = ex_flags.lr_set;
      ex.regimes.clear();
      for (const auto& r : ex_regimes) ex.regimes.push_back(regime_from_str(r));
      resolve_out(ex.out_dir, "experiment");
      run_experiment(ex);
    } else if (cmd_ee->parsed()) {
      resolve_out(ee.out_dir, "ensemble-eval");
      run_ensemble_eval(ee);
    } else if (cmd_ag->parsed()) {
      for (const auto& spec : rater_args) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos)
          throw ConfigError("agreement: --rater wants name=labels.csv, got '" +
                            spec + "'");
        ag.raters.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
      }
      resolve_out(ag.out_dir, "agreement");
      run_agreement(ag);
    } else if (cmd_lo->parsed()) {
      resolve_out(lo.out_dir, "localize");
      run_localize(lo);
    } else if (cmd_em->parsed()) {
      resolve_out(em.out_dir, "export-maps");
      run_export_maps(em);
    }
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
