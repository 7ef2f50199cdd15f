#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fnr/error.hpp"
#include "fnr/kernels.hpp"
#include "fnr/kitti_mots.hpp"
#include "fnr/pipeline.hpp"
#include "fnr/sequence_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path default_out() {
  const char* root = std::getenv("FNR_OUT_ROOT");
  return root && *root ? fs::path(root) : fs::path("fnr_out");
}

void add_synth_options(CLI::App* app, fnr::SynthConfig& c) {
  app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app->add_option("--sequences", c.num_sequences, "Number of sequences")->capture_default_str();
  app->add_option("--frames-per-sequence", c.frames_per_sequence, "Frames per sequence")->capture_default_str();
  app->add_option("--height", c.height, "Frame height")->capture_default_str();
  app->add_option("--width", c.width, "Frame width")->capture_default_str();
  app->add_option("--objects-min", c.objects_min, "Minimum objects per sequence")->capture_default_str();
  app->add_option("--objects-max", c.objects_max, "Maximum objects per sequence")->capture_default_str();
  app->add_option("--dropout", c.dropout, "Detector miss probability")->capture_default_str();
  app->add_option("--fp-rate", c.fp_rate, "Spurious instances per visible object")->capture_default_str();
  app->add_option("--score-noise", c.score_noise, "Score noise sigma")->capture_default_str();
  app->add_option("--spurious-score-min", c.spurious_score_min, "Lowest score of a spurious instance")
      ->capture_default_str();
  app->add_option("--spurious-score-max", c.spurious_score_max, "Highest score of a spurious instance")
      ->capture_default_str();
  app->add_option("--death-probability", c.death_probability, "Probability an object ends early")
      ->capture_default_str();
  app->add_option("--velocity-max", c.velocity_max, "Maximum speed per axis")->capture_default_str();
  app->add_flag("!--no-depth", c.with_depth, "Do not render depth maps");
}

void add_tracker_options(CLI::App* app, fnr::TrackerConfig& c) {
  app->add_option("--match-iou", c.match_iou_threshold, "Minimum iou for a track match")->capture_default_str();
  app->add_option("--track-window", c.regression_window, "Centers used for the motion shift")
      ->capture_default_str();
  app->add_flag("!--no-class-gate", c.class_gated, "Allow matches across classes");
  app->add_option("--ignore-thresh", c.ignore_threshold, "Drop instances inside the ignored region")
      ->capture_default_str();
}

void add_detector_options(CLI::App* app, fnr::DetectorConfig& c) {
  app->add_option("--gap-limit", c.gap_limit, "Maximum frames since the last observation")->capture_default_str();
  app->add_option("--cover-thresh", c.ignore_cover_threshold, "Ignored-region overlap that suppresses a candidate")
      ->capture_default_str();
  app->add_option("--dup-iou", c.duplicate_iou_threshold, "Iou with a prediction that suppresses a candidate")
      ->capture_default_str();
  app->add_option("--min-history", c.min_history, "Observations needed before reconstructing")
      ->capture_default_str();
}

void add_eval_options(CLI::App* app, fnr::EvalConfig& c) {
  app->add_option("--iou-thresh", c.iou_thresholds, "Iou thresholds h")->capture_default_str()->delimiter(',');
  app->add_option("--frames", c.history_lengths, "History lengths n")->capture_default_str()->delimiter(',');
  app->add_option("--sweep-frames", c.sweep_history, "History length for the PR sweep")->capture_default_str();
  app->add_option("--runs", c.runs, "Random splits per setting")->capture_default_str();
  app->add_option("--meta-seed", c.seed, "Seed for splits and boosting")->capture_default_str();
  app->add_option("--trees", c.gbt.max_trees, "Maximum boosted trees")->capture_default_str();
  app->add_option("--depth", c.gbt.max_depth, "Tree depth")->capture_default_str();
  app->add_option("--learning-rate", c.gbt.learning_rate, "Boosting learning rate")->capture_default_str();
  app->add_option("--horizon", c.horizon, "Survival horizon in frames")->capture_default_str();
}

struct Lineage {
  std::string upstream;
};

std::vector<fnr::MetricRecord> load_metrics(const fs::path& csv, const std::vector<fnr::Sequence>* seqs) {
  const auto records = fnr::parse_metrics_csv(fnr::read_text(csv), csv.string());
  fs::path meta_path = csv;
  meta_path.replace_extension(".json");
  if (fs::exists(meta_path)) {
    const json meta = json::parse(fnr::read_text(meta_path));
    if (seqs && meta.value("upstream_hash", "") != fnr::lineage_of(*seqs)) {
      throw fnr::ConfigError("mixed-config artifacts: " + csv.string() + " was not computed from these sequences");
    }
  }
  return records;
}

void write_metrics(const fs::path& csv, const std::vector<fnr::MetricRecord>& records,
                   const std::vector<fnr::Sequence>& seqs) {
  fnr::write_text(csv, fnr::metrics_csv(records));
  const std::string upstream = fnr::lineage_of(seqs);
  json meta = {{"format", "fnr-metrics"},
               {"upstream_hash", upstream},
               {"config_hash", fnr::stage_hash(upstream, "metrics", json::object())},
               {"records", records.size()}};
  fs::path meta_path = csv;
  meta_path.replace_extension(".json");
  fnr::write_text(meta_path, meta.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"False-negative detection and meta classification for video instance segmentation"};
  app.require_subcommand(1);
  int jobs = 1;
  bool force_scalar = false;
  app.add_option("-j,--jobs", jobs, "Worker threads (per sequence / per record)")->capture_default_str();
  app.add_flag("--scalar", force_scalar, "Use the scalar kernels even when AVX2 is available");
  std::string stage = "cli";

  fnr::SynthConfig synth_cfg;
  fnr::TrackerConfig tracker_cfg;
  fnr::DetectorConfig detector_cfg;
  fnr::EvalConfig eval_cfg;
  fs::path in_path, out_path = default_out(), metrics_path, kitti_path;
  int kitti_min_frames = 0;

  auto* synth = app.add_subcommand("synth", "Generate synthetic sequences with ground truth");
  add_synth_options(synth, synth_cfg);
  synth->add_option("--out", out_path, "Output directory")->capture_default_str();

  auto* import = app.add_subcommand("import-kitti", "Convert a KITTI MOTS instance text file to a sequence");
  import->add_option("--file", kitti_path, "instances_txt file")->required();
  import->add_option("--min-frames", kitti_min_frames, "Minimum number of frames")->capture_default_str();
  import->add_option("--out", out_path, "Output directory")->capture_default_str();

  auto* track = app.add_subcommand("track", "Assign track ids");
  track->add_option("--in", in_path, "Sequence directory or a directory of sequences")->required();
  track->add_option("--out", out_path, "Output directory")->capture_default_str();
  add_tracker_options(track, tracker_cfg);

  auto* detect = app.add_subcommand("detect", "Reconstruct missed instances on tracked sequences");
  detect->add_option("--in", in_path, "Tracked sequences")->required();
  detect->add_option("--out", out_path, "Output directory")->capture_default_str();
  add_detector_options(detect, detector_cfg);

  auto* metrics = app.add_subcommand("metrics", "Compute per-instance metrics");
  metrics->add_option("--in", in_path, "Tracked or detected sequences")->required();
  metrics->add_option("--out", metrics_path, "Output CSV (default <out root>/metrics.csv)");

  double meta_h = 0.5;
  int meta_n = 0;
  auto* train = app.add_subcommand("train-meta", "Repeated-split meta classification");
  train->add_option("--metrics", metrics_path, "metrics.csv with gt iou")->required();
  train->add_option("--iou-thresh", meta_h, "Iou threshold h")->capture_default_str();
  train->add_option("--frames", meta_n, "History length n")->capture_default_str();
  train->add_option("--runs", eval_cfg.runs, "Random splits")->capture_default_str();
  train->add_option("--seed", eval_cfg.seed, "Seed for splits and boosting")->capture_default_str();
  train->add_option("--trees", eval_cfg.gbt.max_trees, "Maximum boosted trees")->capture_default_str();
  train->add_option("--out", out_path, "Output directory")->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Full evaluation report");
  evaluate->add_option("--in", in_path, "Detected sequences with ground truth")->required();
  evaluate->add_option("--metrics", metrics_path, "metrics.csv computed from --in")->required();
  evaluate->add_option("--out", out_path, "Output directory")->capture_default_str();
  add_eval_options(evaluate, eval_cfg);

  double sweep_h = 0.5;
  int sweep_count = 15;
  auto* sweep = app.add_subcommand("sweep", "Precision-recall sweep for score thresholding and meta probabilities");
  sweep->add_option("--in", in_path, "Detected sequences with ground truth")->required();
  sweep->add_option("--metrics", metrics_path, "metrics.csv computed from --in")->required();
  sweep->add_option("--iou-thresh", sweep_h, "Iou threshold h")->capture_default_str();
  sweep->add_option("--frames", eval_cfg.sweep_history, "History length n")->capture_default_str();
  sweep->add_option("--thresholds", sweep_count, "Evenly spaced thresholds in [0, 1]")->capture_default_str();
  sweep->add_option("--seed", eval_cfg.seed, "Seed for the cross-fitting")->capture_default_str();
  sweep->add_option("--out", out_path, "Output directory")->capture_default_str();

  std::vector<fs::path> run_inputs;
  auto* run_all = app.add_subcommand("run-all", "track, detect, metrics, meta and evaluation in one go");
  run_all->add_option("--input", run_inputs, "Sequence directories (default: generate synthetic ones)");
  run_all->add_option("--out", out_path, "Output directory")->capture_default_str();
  add_synth_options(run_all, synth_cfg);
  add_tracker_options(run_all, tracker_cfg);
  add_detector_options(run_all, detector_cfg);
  add_eval_options(run_all, eval_cfg);

  CLI11_PARSE(app, argc, argv);
  if (force_scalar) fnr::kernels::set_isa_override(fnr::kernels::Isa::scalar);
  eval_cfg.jobs = jobs;

  try {
    if (synth->parsed()) {
      stage = "synth";
      fnr::validate(synth_cfg);
      const auto seqs = fnr::stage_synth(synth_cfg);
      fnr::save_sequences(seqs, out_path);
      std::cout << "wrote " << seqs.size() << " sequences to " << out_path.string() << "\n";
    } else if (import->parsed()) {
      stage = "import";
      fnr::KittiMotsOptions opts;
      opts.min_frames = kitti_min_frames;
      fnr::Sequence seq = fnr::import_kitti_mots(kitti_path, opts);
      seq.attributes["config_hash"] = fnr::stage_hash("", "import", {{"file", kitti_path.filename().string()}});
      seq.attributes["stage"] = "import";
      fnr::save_sequences({seq}, out_path);
      std::cout << "wrote " << seq.frames.size() << " frames to " << (out_path / seq.name).string() << "\n";
    } else if (track->parsed()) {
      stage = "track";
      const auto seqs = fnr::load_sequences(in_path, jobs);
      const auto t = fnr::stage_track(seqs, tracker_cfg, jobs);
      fnr::save_sequences(t.sequences, out_path);
      for (std::size_t i = 0; i < t.sequences.size(); ++i) {
        fnr::write_text(out_path / t.sequences[i].name / "tracks.jsonl", t.tracks_jsonl[i]);
      }
      std::cout << "tracked " << t.sequences.size() << " sequences\n";
    } else if (detect->parsed()) {
      stage = "detect";
      const auto seqs = fnr::load_sequences(in_path, jobs);
      const auto d = fnr::stage_detect(seqs, detector_cfg, jobs);
      fnr::save_sequences(d.sequences, out_path);
      const json report = fnr::detect_report_json(d);
      fnr::write_text(out_path / "detect_report.json", report.dump(2) + "\n");
      std::cout << "PI " << report["total"]["PI"] << " DI " << report["total"]["DI"] << "\n";
    } else if (metrics->parsed()) {
      stage = "metrics";
      const auto seqs = fnr::load_sequences(in_path, jobs);
      if (metrics_path.empty()) metrics_path = out_path / "metrics.csv";
      const auto records = fnr::stage_metrics(seqs, jobs);
      write_metrics(metrics_path, records, seqs);
      std::cout << "wrote " << records.size() << " records to " << metrics_path.string() << "\n";
    } else if (train->parsed()) {
      stage = "train-meta";
      const auto records = load_metrics(metrics_path, nullptr);
      fnr::EvalConfig ec = eval_cfg;
      ec.iou_thresholds = {meta_h};
      ec.history_lengths = {meta_n};
      ec.validate();
      fnr::MetaConfig mc;
      mc.h = meta_h;
      mc.features.n = meta_n;
      int max_class = 1;
      bool depth = true;
      for (const auto& r : records) {
        max_class = std::max(max_class, r.class_id);
        depth = depth && !fnr::is_absent(r.depth_mean);
      }
      mc.features.num_classes = max_class + 1;
      mc.features.with_depth = depth;
      mc.runs = ec.runs;
      mc.seed = ec.seed;
      mc.gbt = ec.gbt;
      mc.jobs = jobs;
      const auto summary = fnr::run_meta_experiment(records, mc);
      json rep = fnr::meta_summary_json(summary);
      rep["format"] = "fnr-meta-report";
      rep["h"] = meta_h;
      rep["n"] = meta_n;
      rep["feature_names"] = fnr::feature_names(mc.features);

      fnr::SplitSpec spec;
      spec.seed = mc.seed;
      const auto folds = fnr::split_dataset(records, spec);
      const auto labels = fnr::label_records(records, mc.h);
      const auto model = fnr::train_meta(records, labels, folds.train, folds.val, mc, mc.seed);
      fnr::write_text(out_path / "gbt_model.json", model.gbt.to_json() + "\n");
      if (model.has_cox) fnr::write_text(out_path / "cox_model.json", model.cox.to_json() + "\n");
      fnr::write_text(out_path / "meta_report.json", rep.dump(2) + "\n");
      std::printf("ACC %.4f +- %.4f  AUROC %.4f +- %.4f\n", summary.accuracy_mean, summary.accuracy_std,
                  summary.auroc_mean, summary.auroc_std);
    } else if (evaluate->parsed()) {
      stage = "evaluate";
      const auto seqs = fnr::load_sequences(in_path, jobs);
      const auto records = load_metrics(metrics_path, &seqs);
      const auto out = fnr::evaluate_all(seqs, records, eval_cfg);
      fnr::write_text(out_path / "eval_report.json", out.report.dump(2) + "\n");
      fnr::write_text(out_path / "pr_points.csv", fnr::pr_points_csv(out.pr_rows));
      std::cout << "wrote " << (out_path / "eval_report.json").string() << "\n";
    } else if (sweep->parsed()) {
      stage = "sweep";
      const auto seqs = fnr::load_sequences(in_path, jobs);
      const auto records = load_metrics(metrics_path, &seqs);
      eval_cfg.thresholds = fnr::default_thresholds(sweep_count);
      eval_cfg.iou_thresholds = {sweep_h};
      eval_cfg.validate();
      const auto so = fnr::sweep_methods(seqs, records, sweep_h, eval_cfg);
      std::vector<fnr::PrRow> rows;
      for (const auto& p : so.score.points) rows.push_back({"score", sweep_h, p});
      for (const auto& p : so.ours.points) rows.push_back({"ours", sweep_h, p});
      fnr::write_text(out_path / "pr_points.csv", fnr::pr_points_csv(rows));
      json rep = {{"format", "fnr-sweep-report"},
                  {"h", sweep_h},
                  {"n", eval_cfg.sweep_history},
                  {"upstream_hash", fnr::lineage_of(seqs)},
                  {"auc", {{"score", so.score.auc}, {"ours", so.ours.auc}}},
                  {"auc_anchored", {{"score", so.score.auc_anchored}, {"ours", so.ours.auc_anchored}}}};
      fnr::write_text(out_path / "sweep_report.json", rep.dump(2) + "\n");
      std::printf("AUC score %.4f  ours %.4f  (anchored: score %.4f  ours %.4f)\n", so.score.auc, so.ours.auc,
                  so.score.auc_anchored, so.ours.auc_anchored);
    } else if (run_all->parsed()) {
      stage = "run-all";
      fnr::RunAllConfig rc;
      rc.inputs = run_inputs;
      rc.synth = synth_cfg;
      rc.tracker = tracker_cfg;
      rc.detector = detector_cfg;
      rc.eval = eval_cfg;
      rc.out_dir = out_path;
      rc.jobs = jobs;
      const json rep = fnr::run_all(rc);
      for (const auto& e : rep["pr"]) {
        std::printf("h=%.1f  AUC score %.4f  ours %.4f  (anchored: score %.4f  ours %.4f)\n", e["h"].get<double>(),
                    e["score"]["auc"].get<double>(), e["ours"]["auc"].get<double>(),
                    e["score"]["auc_anchored"].get<double>(), e["ours"]["auc_anchored"].get<double>());
      }
      for (const auto& e : rep["meta_classification"]) {
        std::printf("h=%.1f n=%d  ACC %.4f  AUROC %.4f\n", e["h"].get<double>(), e["n"].get<int>(),
                    e["accuracy"]["mean"].get<double>(), e["auroc"]["mean"].get<double>());
      }
    }
  } catch (const fnr::StageError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error [" << stage << "]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
