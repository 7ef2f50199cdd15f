#include "fnr/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "fnr/error.hpp"
#include "fnr/parallel.hpp"
#include "fnr/sequence_io.hpp"

namespace fnr {

namespace fs = std::filesystem;
using nlohmann::json;

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) throw ConfigError("eval: at least one iou threshold is required");
  for (double h : iou_thresholds) {
    if (!(h >= 0.0 && h <= 0.5)) throw ConfigError("eval: iou thresholds must be in [0, 0.5]");
  }
  for (int n : history_lengths) {
    if (n < 0 || n > kMaxHistory) throw ConfigError("eval: history lengths must be in [0, 10]");
  }
  if (sweep_history < 0 || sweep_history > kMaxHistory) throw ConfigError("eval: sweep history must be in [0, 10]");
  if (thresholds.empty() || !std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw ConfigError("eval: thresholds must be non-empty and sorted");
  }
  if (runs < 1) throw ConfigError("eval: runs must be >= 1");
  if (!(horizon > 0.0)) throw ConfigError("eval: horizon must be > 0");
  if (crossfit_folds < 2) throw ConfigError("eval: crossfit folds must be >= 2");
  if (!(tracking_iou > 0.0 && tracking_iou <= 1.0)) throw ConfigError("eval: tracking iou must be in (0, 1]");
  gbt.validate();
}

json to_json(const SynthConfig& c) {
  return {{"num_sequences", c.num_sequences},
          {"frames_per_sequence", c.frames_per_sequence},
          {"height", c.height},
          {"width", c.width},
          {"objects_min", c.objects_min},
          {"objects_max", c.objects_max},
          {"size_min", c.size_min},
          {"size_max", c.size_max},
          {"ellipse_fraction", c.ellipse_fraction},
          {"velocity_max", c.velocity_max},
          {"num_classes", c.num_classes},
          {"late_birth_probability", c.late_birth_probability},
          {"death_probability", c.death_probability},
          {"min_lifetime", c.min_lifetime},
          {"min_visible_pixels", c.min_visible_pixels},
          {"dropout", c.dropout},
          {"fp_rate", c.fp_rate},
          {"score_noise", c.score_noise},
          {"spurious_score_min", c.spurious_score_min},
          {"spurious_score_max", c.spurious_score_max},
          {"with_depth", c.with_depth},
          {"depth_min", c.depth_min},
          {"depth_max", c.depth_max},
          {"background_depth", c.background_depth},
          {"seed", c.seed}};
}

json to_json(const TrackerConfig& c) {
  return {{"match_iou_threshold", c.match_iou_threshold},
          {"regression_window", c.regression_window},
          {"class_gated", c.class_gated},
          {"ignore_threshold", c.ignore_threshold}};
}

json to_json(const DetectorConfig& c) {
  return {{"gap_limit", c.gap_limit},
          {"ignore_cover_threshold", c.ignore_cover_threshold},
          {"duplicate_iou_threshold", c.duplicate_iou_threshold},
          {"min_history", c.min_history},
          {"regression_window", c.regression_window}};
}

json to_json(const EvalConfig& c) {
  return {{"iou_thresholds", c.iou_thresholds},
          {"history_lengths", c.history_lengths},
          {"sweep_history", c.sweep_history},
          {"thresholds", c.thresholds},
          {"runs", c.runs},
          {"seed", c.seed},
          {"gbt",
           {{"max_trees", c.gbt.max_trees},
            {"max_depth", c.gbt.max_depth},
            {"learning_rate", c.gbt.learning_rate},
            {"min_leaf", c.gbt.min_leaf},
            {"patience", c.gbt.patience},
            {"max_bins", c.gbt.max_bins},
            {"l2", c.gbt.l2},
            {"subsample", c.gbt.subsample}}},
          {"cox", {{"ridge", c.cox.ridge}, {"tolerance", c.cox.tolerance}, {"max_iterations", c.cox.max_iterations}}},
          {"horizon", c.horizon},
          {"crossfit_folds", c.crossfit_folds},
          {"tracking_iou", c.tracking_iou}};
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string stage_hash(const std::string& upstream, const std::string& stage, const json& config) {
  return fnv1a_hex(upstream + "|" + stage + "|" + config.dump());
}

std::string lineage_of(const std::vector<Sequence>& sequences) {
  std::string hash;
  for (std::size_t k = 0; k < sequences.size(); ++k) {
    const auto it = sequences[k].attributes.find("config_hash");
    const std::string h = it == sequences[k].attributes.end() ? "" : it->second;
    if (k == 0) {
      hash = h;
    } else if (h != hash) {
      throw ConfigError("mixed-config artifacts: sequence '" + sequences[k].name + "' has config hash '" + h +
                        "', expected '" + hash + "'");
    }
  }
  return hash;
}

std::vector<fs::path> discover_sequences(const fs::path& path) {
  if (fs::exists(path / "sequence.json")) return {path};
  if (!fs::is_directory(path)) throw ConfigError("no sequence found at '" + path.string() + "'");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(path)) {
    if (e.is_directory() && fs::exists(e.path() / "sequence.json")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ConfigError("no sequence found at '" + path.string() + "'");
  return out;
}

std::vector<Sequence> load_sequences(const fs::path& path, int jobs) {
  const auto dirs = discover_sequences(path);
  std::vector<Sequence> out(dirs.size());
  parallel_for(dirs.size(), jobs, [&](std::size_t i) { out[i] = load_sequence(dirs[i]); });
  return out;
}

void save_sequences(const std::vector<Sequence>& sequences, const fs::path& dir) {
  std::map<std::string, int> seen;
  for (const auto& s : sequences) {
    if (s.name.empty() || s.name.find('/') != std::string::npos || s.name == "." || s.name == "..") {
      throw ConfigError("sequence name '" + s.name + "' is not a valid directory name");
    }
    if (seen[s.name]++) throw ConfigError("duplicate sequence name '" + s.name + "'");
  }
  for (const auto& s : sequences) save_sequence(s, dir / s.name);
}

std::vector<Sequence> stage_synth(const SynthConfig& cfg) {
  auto seqs = generate_scene(cfg);
  const std::string hash = stage_hash("", "synth", to_json(cfg));
  for (auto& s : seqs) {
    s.attributes["config_hash"] = hash;
    s.attributes["stage"] = "synth";
  }
  return seqs;
}

TrackStage stage_track(const std::vector<Sequence>& input, const TrackerConfig& cfg, int jobs) {
  validate(cfg);
  const std::string hash = stage_hash(lineage_of(input), "track", to_json(cfg));
  TrackStage out;
  out.sequences.resize(input.size());
  out.tracks_jsonl.resize(input.size());
  parallel_for(input.size(), jobs, [&](std::size_t i) {
    Sequence s = input[i];
    TrackingResult r = track_sequence(s.frames, cfg);
    s.frames = std::move(r.frames);
    s.attributes["config_hash"] = hash;
    s.attributes["stage"] = "track";
    s.attributes["removed_ignored"] = std::to_string(r.removed_ignored);
    out.tracks_jsonl[i] = tracks_jsonl(s.frames);
    out.sequences[i] = std::move(s);
  });
  return out;
}

DetectStage stage_detect(const std::vector<Sequence>& tracked, const DetectorConfig& cfg, int jobs) {
  validate(cfg);
  for (const auto& s : tracked) {
    const auto it = s.attributes.find("stage");
    if (it == s.attributes.end() || (it->second != "track" && it->second != "detect")) {
      throw ConfigError("detect: sequence '" + s.name + "' has not been tracked");
    }
  }
  const std::string hash = stage_hash(lineage_of(tracked), "detect", to_json(cfg));
  DetectStage out;
  out.sequences.resize(tracked.size());
  out.reports.resize(tracked.size());
  parallel_for(tracked.size(), jobs, [&](std::size_t i) {
    DetectionResult r = detect_on_tracked(tracked[i], cfg);
    const auto it = tracked[i].attributes.find("removed_ignored");
    if (it != tracked[i].attributes.end()) r.report.removed_ignored = std::stoul(it->second);
    r.sequence.attributes["config_hash"] = hash;
    r.sequence.attributes["stage"] = "detect";
    out.sequences[i] = std::move(r.sequence);
    out.reports[i] = r.report;
  });
  return out;
}

namespace {

json report_json(const DetectionReport& r) {
  return {{"PI", r.predicted_instances},         {"DI", r.detected_instances},
          {"candidates", r.candidates},          {"dropped_empty", r.dropped_empty},
          {"suppressed_ignored", r.suppressed_ignored}, {"suppressed_duplicate", r.suppressed_duplicate},
          {"removed_ignored", r.removed_ignored}};
}

}  // namespace

json detect_report_json(const DetectStage& stage) {
  json j;
  j["format"] = "fnr-detect-report";
  j["config_hash"] = lineage_of(stage.sequences);
  DetectionReport total;
  json per = json::array();
  for (std::size_t i = 0; i < stage.sequences.size(); ++i) {
    const auto& r = stage.reports[i];
    json e = report_json(r);
    e["sequence"] = stage.sequences[i].name;
    per.push_back(e);
    total.predicted_instances += r.predicted_instances;
    total.detected_instances += r.detected_instances;
    total.candidates += r.candidates;
    total.dropped_empty += r.dropped_empty;
    total.suppressed_ignored += r.suppressed_ignored;
    total.suppressed_duplicate += r.suppressed_duplicate;
    total.removed_ignored += r.removed_ignored;
  }
  j["sequences"] = per;
  j["total"] = report_json(total);
  return j;
}

std::vector<MetricRecord> stage_metrics(const std::vector<Sequence>& sequences, int jobs) {
  std::vector<std::vector<MetricRecord>> per(sequences.size());
  parallel_for(sequences.size(), jobs, [&](std::size_t i) {
    per[i] = compute_sequence(sequences[i], static_cast<int>(i), nullptr);
    if (sequences[i].has_ground_truth()) attach_ground_truth(per[i], std::span<const Sequence>(&sequences[i], 1));
  });
  std::vector<MetricRecord> all;
  for (auto& p : per) all.insert(all.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  return all;
}

namespace {

FeatureOptions infer_features(const std::vector<MetricRecord>& records, int n) {
  FeatureOptions f;
  f.n = n;
  int max_class = 1;
  bool depth = !records.empty();
  for (const auto& r : records) {
    max_class = std::max(max_class, r.class_id);
    depth = depth && !is_absent(r.depth_mean);
  }
  f.num_classes = max_class + 1;
  f.with_depth = depth;
  return f;
}

MetaConfig meta_config(const EvalConfig& cfg, const std::vector<MetricRecord>& records, double h, int n) {
  MetaConfig m;
  m.h = h;
  m.features = infer_features(records, n);
  m.runs = cfg.runs;
  m.seed = cfg.seed;
  m.gbt = cfg.gbt;
  m.cox = cfg.cox;
  m.horizon = cfg.horizon;
  m.crossfit_folds = cfg.crossfit_folds;
  m.jobs = cfg.jobs;
  return m;
}

json sweep_json(const SweepResult& r) {
  json pts = json::array();
  for (const auto& p : r.points) {
    pts.push_back({{"threshold", p.threshold},
                   {"tp", p.tp},
                   {"fp", p.fp},
                   {"fn", p.fn},
                   {"precision", p.precision},
                   {"recall", p.recall},
                   {"fp_by_occlusion", p.fp_by_level},
                   {"fn_by_occlusion", p.fn_by_level}});
  }
  return {{"auc", r.auc}, {"auc_anchored", r.auc_anchored}, {"points", pts}, {"skipped_thresholds", r.skipped_thresholds}};
}

json counts_json(const TrackingCounts& c) {
  return {{"GT", c.gt}, {"MT", c.mt}, {"PT", c.pt}, {"ML", c.ml}, {"smn", c.smn}};
}

}  // namespace

json meta_summary_json(const MetaSummary& s) {
  json runs = json::array();
  for (const auto& r : s.runs) {
    runs.push_back({{"seed", r.seed},
                    {"accuracy", r.accuracy},
                    {"auroc", r.auroc},
                    {"train_records", r.train_records},
                    {"val_records", r.val_records},
                    {"test_records", r.test_records},
                    {"trees", r.trees}});
  }
  return {{"accuracy", {{"mean", s.accuracy_mean}, {"std", s.accuracy_std}}},
          {"auroc", {{"mean", s.auroc_mean}, {"std", s.auroc_std}}},
          {"runs", runs},
          {"warnings", s.warnings}};
}

SweepOutcome sweep_methods(const std::vector<Sequence>& sequences, const std::vector<MetricRecord>& records,
                           double h, const EvalConfig& cfg) {
  const MetaConfig mcfg = meta_config(cfg, records, h, cfg.sweep_history);
  return sweep_with_probabilities(sequences, records, crossfit_probabilities(records, mcfg), h, cfg.thresholds);
}

SweepOutcome sweep_with_probabilities(const std::vector<Sequence>& sequences, const std::vector<MetricRecord>& records,
                                      std::span<const double> probs, double h, std::span<const double> thresholds) {
  if (probs.size() != records.size()) throw ConfigError("sweep: probability/record count mismatch");
  std::map<std::tuple<std::string, int, int>, double> prob_of;
  for (std::size_t i = 0; i < records.size(); ++i) {
    prob_of[{records[i].sequence, records[i].frame, records[i].track_id}] = probs[i];
  }

  std::vector<SweepFrame> score_frames, our_frames;
  for (const auto& seq : sequences) {
    const auto admissible = exclusion_rule(seq, h);
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
      const Frame& frame = seq.frames[t];
      std::vector<const PixelMask*> net_masks, all_masks;
      std::vector<double> net_sel, all_sel;
      for (const auto& inst : frame.instances) {
        if (inst.origin == Origin::network) {
          net_masks.push_back(&inst.mask);
          net_sel.push_back(inst.score);
        }
        const auto it = inst.track_id ? prob_of.find({seq.name, frame.index, *inst.track_id}) : prob_of.end();
        if (it == prob_of.end()) {
          throw ConfigError("sweep: instance without metric record in " + seq.name + " frame " +
                            std::to_string(frame.index));
        }
        all_masks.push_back(&inst.mask);
        all_sel.push_back(it->second);
      }
      score_frames.push_back(prepare_sweep_frame(net_masks, net_sel, seq.ground_truth[t], admissible));
      our_frames.push_back(prepare_sweep_frame(all_masks, all_sel, seq.ground_truth[t], admissible));
    }
  }
  return {sweep(score_frames, thresholds, h), sweep(our_frames, thresholds, h)};
}

EvalOutput evaluate_all(const std::vector<Sequence>& sequences, const std::vector<MetricRecord>& records,
                        const EvalConfig& cfg) {
  cfg.validate();
  for (const auto& s : sequences) {
    if (!s.has_ground_truth()) throw ConfigError("evaluate: sequence '" + s.name + "' has no ground truth");
  }
  EvalOutput out;
  json& rep = out.report;
  rep["format"] = "fnr-eval-report";
  rep["version"] = 1;
  rep["upstream_hash"] = lineage_of(sequences);
  rep["config"] = to_json(cfg);
  rep["config_hash"] = stage_hash(lineage_of(sequences), "evaluate", to_json(cfg));
  json names = json::array();
  for (const auto& s : sequences) names.push_back(s.name);
  rep["sequences"] = names;
  std::size_t detected = 0;
  for (const auto& r : records) detected += r.origin == Origin::detected;
  rep["records"] = {{"total", records.size()}, {"detected", detected}, {"tracks", track_keys(records).size()}};

  // Pearson correlation of each metric with the gt iou. The survival column
  // uses a model fit on every record since no split is involved here.
  {
    std::vector<MetricRecord> recs = records;
    const FeatureOptions fo = infer_features(recs, 0);
    std::vector<SurvivalSample> samples;
    for (const auto& r : recs) {
      samples.push_back({single_frame_features(r, fo.with_depth), static_cast<double>(r.duration), r.event});
    }
    try {
      const CoxModel cox = fit_cox(samples, cfg.cox, single_frame_feature_names(fo.with_depth));
      apply_survival(recs, cox, cfg.horizon);
    } catch (const FitError&) {
    }
    std::vector<double> ious;
    for (const auto& r : recs) ious.push_back(r.iou_gt);
    json table;
    const auto column = [&](const char* name, auto get) {
      std::vector<double> xs;
      for (const auto& r : recs) xs.push_back(get(r));
      try {
        table[name] = pearson(xs, ious);
      } catch (const ConfigError&) {
        table[name] = nullptr;
      }
    };
    column("S", [](const MetricRecord& r) { return static_cast<double>(r.size); });
    column("S_in", [](const MetricRecord& r) { return static_cast<double>(r.size_inner); });
    column("S_bd", [](const MetricRecord& r) { return static_cast<double>(r.size_boundary); });
    column("S_rel", [](const MetricRecord& r) { return r.size_rel; });
    column("S_in_rel", [](const MetricRecord& r) { return r.size_inner_rel; });
    if (fo.with_depth) {
      column("D_mean", [](const MetricRecord& r) { return r.depth_mean; });
      column("D_in", [](const MetricRecord& r) { return r.depth_inner; });
      column("D_bd", [](const MetricRecord& r) { return r.depth_boundary; });
      column("D_rel", [](const MetricRecord& r) { return r.depth_rel; });
      column("D_in_rel", [](const MetricRecord& r) { return r.depth_inner_rel; });
      column("d_depth", [](const MetricRecord& r) { return r.dev_depth; });
    }
    column("score", [](const MetricRecord& r) { return r.score; });
    column("occlusion", [](const MetricRecord& r) { return r.occlusion; });
    column("d_size", [](const MetricRecord& r) { return r.dev_size; });
    column("d_center", [](const MetricRecord& r) { return r.dev_center; });
    column("survival", [](const MetricRecord& r) { return is_absent(r.survival) ? 0.0 : r.survival; });
    column("aspect_ratio", [](const MetricRecord& r) { return r.aspect_ratio; });
    column("deformation", [](const MetricRecord& r) { return r.deformation; });
    rep["pearson"] = table;
  }

  json meta = json::array();
  for (double h : cfg.iou_thresholds) {
    for (int n : cfg.history_lengths) {
      const MetaSummary s = run_meta_experiment(records, meta_config(cfg, records, h, n));
      json e = meta_summary_json(s);
      e["h"] = h;
      e["n"] = n;
      meta.push_back(e);
    }
  }
  rep["meta_classification"] = meta;

  json pr = json::array();
  for (double h : cfg.iou_thresholds) {
    const SweepOutcome so = sweep_methods(sequences, records, h, cfg);
    json e;
    e["h"] = h;
    e["score"] = sweep_json(so.score);
    e["ours"] = sweep_json(so.ours);
    pr.push_back(e);
    for (const auto& p : so.score.points) out.pr_rows.push_back({"score", h, p});
    for (const auto& p : so.ours.points) out.pr_rows.push_back({"ours", h, p});
  }
  rep["pr"] = pr;

  TrackingCounts base, ours;
  for (const auto& s : sequences) {
    base += tracking_metrics(gt_match_flags(s, cfg.tracking_iou, false));
    ours += tracking_metrics(gt_match_flags(s, cfg.tracking_iou, true));
  }
  rep["tracking"] = {{"iou", cfg.tracking_iou}, {"baseline", counts_json(base)}, {"ours", counts_json(ours)}};

  json levels = json::array();
  for (int k = 0; k < kOcclusionLevels; ++k) levels.push_back(occlusion_level_label(k));
  rep["occlusion_levels"] = levels;
  return out;
}

std::string pr_points_csv(const std::vector<PrRow>& rows) {
  std::string out = "method,h,threshold,tp,fp,fn,precision,recall\n";
  for (const auto& r : rows) {
    out += r.method + "," + format_double(r.h) + "," + format_double(r.point.threshold) + "," +
           std::to_string(r.point.tp) + "," + std::to_string(r.point.fp) + "," + std::to_string(r.point.fn) + "," +
           format_double(r.point.precision) + "," + format_double(r.point.recall) + "\n";
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw ConfigError("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

namespace {

template <class Fn>
auto run_stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

json run_all(const RunAllConfig& cfg) {
  if (cfg.out_dir.empty()) throw ConfigError("run-all: output directory is required");
  std::vector<Sequence> input = run_stage("input", [&] {
    if (cfg.inputs.empty()) {
      auto seqs = stage_synth(cfg.synth);
      save_sequences(seqs, cfg.out_dir / "sequences");
      return seqs;
    }
    std::vector<Sequence> seqs;
    for (const auto& p : cfg.inputs) {
      auto part = load_sequences(p, cfg.jobs);
      seqs.insert(seqs.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return seqs;
  });

  TrackStage tracked = run_stage("track", [&] {
    auto t = stage_track(input, cfg.tracker, cfg.jobs);
    save_sequences(t.sequences, cfg.out_dir / "tracked");
    for (std::size_t i = 0; i < t.sequences.size(); ++i) {
      write_text(cfg.out_dir / "tracked" / t.sequences[i].name / "tracks.jsonl", t.tracks_jsonl[i]);
    }
    return t;
  });

  DetectStage detected = run_stage("detect", [&] {
    auto d = stage_detect(tracked.sequences, cfg.detector, cfg.jobs);
    save_sequences(d.sequences, cfg.out_dir / "detected");
    write_text(cfg.out_dir / "detect_report.json", detect_report_json(d).dump(2) + "\n");
    return d;
  });

  std::vector<MetricRecord> records = run_stage("metrics", [&] {
    auto r = stage_metrics(detected.sequences, cfg.jobs);
    write_text(cfg.out_dir / "metrics.csv", metrics_csv(r));
    const std::string upstream = lineage_of(detected.sequences);
    json meta = {{"format", "fnr-metrics"},
                 {"upstream_hash", upstream},
                 {"config_hash", stage_hash(upstream, "metrics", json::object())},
                 {"records", r.size()}};
    write_text(cfg.out_dir / "metrics.json", meta.dump(2) + "\n");
    return r;
  });

  EvalOutput eval = run_stage("evaluate", [&] {
    EvalConfig ec = cfg.eval;
    ec.jobs = cfg.jobs;
    auto e = evaluate_all(detected.sequences, records, ec);
    e.report["detection"] = detect_report_json(detected)["total"];
    write_text(cfg.out_dir / "eval_report.json", e.report.dump(2) + "\n");
    write_text(cfg.out_dir / "pr_points.csv", pr_points_csv(e.pr_rows));
    return e;
  });
  return eval.report;
}

}  // namespace fnr
