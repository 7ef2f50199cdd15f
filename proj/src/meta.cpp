#include "fnr/meta.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "fnr/error.hpp"
#include "fnr/evaluator.hpp"
#include "fnr/rng.hpp"

namespace fnr {

void FeatureOptions::validate() const {
  if (n < 0 || n > kMaxHistory) throw ConfigError("features: n must be in [0, 10]");
  if (num_classes < 1) throw ConfigError("features: num_classes must be >= 1");
}

std::vector<std::string> block_feature_names(const FeatureOptions& opts) {
  std::vector<std::string> names = {"S", "S_in", "S_bd", "S_rel", "S_in_rel"};
  if (opts.with_depth) {
    for (const char* s : {"D_mean", "D_in", "D_bd", "D_rel", "D_in_rel"}) names.emplace_back(s);
  }
  for (const char* s : {"center_v", "center_h", "score", "occlusion"}) names.emplace_back(s);
  if (opts.with_depth) names.emplace_back("d_depth");
  names.emplace_back("d_size");
  names.emplace_back("d_center");
  if (opts.with_survival) names.emplace_back("survival");
  names.emplace_back("aspect_ratio");
  names.emplace_back("deformation");
  names.emplace_back("detected");
  for (int c = 0; c < opts.num_classes; ++c) names.push_back("class_" + std::to_string(c));
  return names;
}

std::vector<double> record_block(const MetricRecord& r, const FeatureOptions& opts) {
  std::vector<double> b = {static_cast<double>(r.size), static_cast<double>(r.size_inner),
                           static_cast<double>(r.size_boundary), r.size_rel, r.size_inner_rel};
  if (opts.with_depth) {
    for (double v : {r.depth_mean, r.depth_inner, r.depth_boundary, r.depth_rel, r.depth_inner_rel}) b.push_back(v);
  }
  for (double v : {r.center.v, r.center.h, r.score, r.occlusion}) b.push_back(v);
  if (opts.with_depth) b.push_back(r.dev_depth);
  b.push_back(r.dev_size);
  b.push_back(r.dev_center);
  if (opts.with_survival) b.push_back(r.survival);
  b.push_back(r.aspect_ratio);
  b.push_back(r.deformation);
  b.push_back(r.origin == Origin::detected ? 1.0 : 0.0);
  if (r.class_id < 0 || r.class_id >= opts.num_classes) {
    throw ConfigError("features: class id " + std::to_string(r.class_id) + " outside the one-hot range");
  }
  for (int c = 0; c < opts.num_classes; ++c) b.push_back(c == r.class_id ? 1.0 : 0.0);
  for (double v : b) {
    if (!std::isfinite(v)) {
      throw ConfigError("features: absent or non-finite metric in " + r.sequence + " track " +
                        std::to_string(r.track_id) + " frame " + std::to_string(r.frame));
    }
  }
  return b;
}

std::vector<std::string> feature_names(const FeatureOptions& opts) {
  const auto block = block_feature_names(opts);
  std::vector<std::string> names;
  for (int k = opts.n; k >= 0; --k) {
    for (const auto& b : block) names.push_back(k == 0 ? b + "@t" : b + "@t-" + std::to_string(k));
  }
  return names;
}

FeatureMatrix assemble_features(const std::vector<MetricRecord>& records, const FeatureOptions& opts) {
  opts.validate();
  std::map<TrackKey, std::vector<std::size_t>> by_track;
  for (std::size_t i = 0; i < records.size(); ++i) {
    by_track[{records[i].sequence_index, records[i].track_id}].push_back(i);
  }
  std::vector<std::vector<double>> blocks(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) blocks[i] = record_block(records[i], opts);

  FeatureMatrix out(records.size());
  const std::size_t n = static_cast<std::size_t>(opts.n);
  for (auto& [key, idx] : by_track) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return records[a].frame < records[b].frame; });
    for (std::size_t p = 0; p < idx.size(); ++p) {
      auto& row = out[idx[p]];
      row.reserve((n + 1) * blocks[idx[p]].size());
      for (std::size_t k = n + 1; k-- > 0;) {
        const std::size_t src = p >= k ? p - k : 0;
        const auto& b = blocks[idx[src]];
        row.insert(row.end(), b.begin(), b.end());
      }
    }
  }
  return out;
}

void attach_ground_truth(std::vector<MetricRecord>& records, std::span<const Sequence> sequences) {
  std::map<std::string, const Sequence*> by_name;
  for (const auto& s : sequences) by_name[s.name] = &s;
  std::map<std::pair<std::string, int>, std::vector<GtMatch>> cache;
  for (auto& r : records) {
    const auto it = by_name.find(r.sequence);
    if (it == by_name.end()) throw ConfigError("attach_ground_truth: unknown sequence '" + r.sequence + "'");
    const Sequence& seq = *it->second;
    if (!seq.has_ground_truth()) throw ConfigError("attach_ground_truth: sequence '" + seq.name + "' has no ground truth");
    if (r.frame < 0 || r.frame >= static_cast<int>(seq.frames.size())) {
      throw ConfigError("attach_ground_truth: frame outside sequence '" + seq.name + "'");
    }
    const Frame& frame = seq.frames[static_cast<std::size_t>(r.frame)];
    auto [c, inserted] = cache.try_emplace({seq.name, r.frame});
    if (inserted) c->second = match_gt(frame, seq.ground_truth[static_cast<std::size_t>(r.frame)]);
    bool found = false;
    for (std::size_t k = 0; k < frame.instances.size(); ++k) {
      if (frame.instances[k].track_id == r.track_id) {
        r.iou_gt = c->second[k].iou_gt;
        r.gt_track_id = c->second[k].gt_track_id.value_or(-1);
        found = true;
        break;
      }
    }
    if (!found) {
      throw ConfigError("attach_ground_truth: no instance of track " + std::to_string(r.track_id) + " in " +
                        seq.name + " frame " + std::to_string(r.frame));
    }
  }
}

std::vector<int> label_records(const std::vector<MetricRecord>& records, double h) {
  if (!(h >= 0.0 && h <= 0.5)) throw ConfigError("label_records: h must be in [0, 0.5]");
  std::vector<int> y;
  y.reserve(records.size());
  for (const auto& r : records) {
    if (is_absent(r.iou_gt)) throw ConfigError("label_records: record without ground-truth iou");
    y.push_back(meets_iou(r.iou_gt, h) ? 1 : 0);
  }
  return y;
}

std::vector<int> label_records(std::vector<MetricRecord>& records, std::span<const Sequence> sequences, double h) {
  attach_ground_truth(records, sequences);
  return label_records(records, h);
}

std::vector<TrackKey> track_keys(const std::vector<MetricRecord>& records) {
  std::set<TrackKey> keys;
  for (const auto& r : records) keys.emplace(r.sequence_index, r.track_id);
  return {keys.begin(), keys.end()};
}

void SplitSpec::validate() const {
  if (train <= 0.0 || val < 0.0 || test <= 0.0) throw ConfigError("split: fractions must be positive");
  if (std::fabs(train + val + test - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");
}

Folds split_dataset(const std::vector<MetricRecord>& records, const SplitSpec& spec) {
  spec.validate();
  std::vector<TrackKey> keys = track_keys(records);
  if (keys.size() < kMinSplitTracks) {
    throw ConfigError("split_dataset: need at least " + std::to_string(kMinSplitTracks) + " tracks, have " +
                      std::to_string(keys.size()));
  }
  Rng rng(spec.seed);
  rng.shuffle(keys.begin(), keys.end());
  const double n = static_cast<double>(keys.size());
  const auto n_test = static_cast<std::size_t>(std::lround(spec.test * n));
  const auto n_val = static_cast<std::size_t>(std::lround(spec.val * n));
  Folds f;
  f.test.assign(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n_test));
  f.val.assign(keys.begin() + static_cast<std::ptrdiff_t>(n_test),
               keys.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  f.train.assign(keys.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), keys.end());
  return f;
}

void MetaConfig::validate() const {
  if (!(h >= 0.0 && h <= 0.5)) throw ConfigError("meta: h must be in [0, 0.5]");
  features.validate();
  if (runs < 1) throw ConfigError("meta: runs must be >= 1");
  if (!(horizon > 0.0)) throw ConfigError("meta: horizon must be > 0");
  if (crossfit_folds < 2) throw ConfigError("meta: crossfit_folds must be >= 2");
  gbt.validate();
}

namespace {

std::vector<std::size_t> rows_of(const std::vector<MetricRecord>& records, const std::vector<TrackKey>& keys) {
  const std::set<TrackKey> wanted(keys.begin(), keys.end());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (wanted.count({records[i].sequence_index, records[i].track_id})) rows.push_back(i);
  }
  return rows;
}

std::vector<MetricRecord> with_survival(const std::vector<MetricRecord>& records, const TrainedMeta& model,
                                        double horizon) {
  std::vector<MetricRecord> out = records;
  if (!model.features.with_survival) return out;
  if (model.has_cox) {
    apply_survival(out, model.cox, horizon);
  } else {
    for (auto& r : out) r.survival = 1.0;
  }
  return out;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TrainedMeta train_meta(const std::vector<MetricRecord>& records, std::span<const int> labels,
                       const std::vector<TrackKey>& train, const std::vector<TrackKey>& val, const MetaConfig& cfg,
                       std::uint64_t seed) {
  cfg.validate();
  if (labels.size() != records.size()) throw ConfigError("train_meta: label count mismatch");
  TrainedMeta model;
  model.features = cfg.features;
  const auto train_rows = rows_of(records, train);
  const auto val_rows = rows_of(records, val);
  if (train_rows.empty()) throw FitError("train_meta: empty training fold");

  if (cfg.features.with_survival) {
    std::vector<SurvivalSample> samples;
    for (std::size_t i : train_rows) {
      samples.push_back({single_frame_features(records[i], cfg.features.with_depth),
                         static_cast<double>(records[i].duration), records[i].event});
    }
    try {
      model.cox = fit_cox(samples, cfg.cox, single_frame_feature_names(cfg.features.with_depth));
      model.has_cox = true;
      for (const auto& w : model.cox.warnings) model.warnings.push_back("cox: " + w);
    } catch (const FitError& e) {
      model.warnings.push_back(std::string("cox fit failed, survival set to 1: ") + e.what());
    }
  }

  const auto prepared = with_survival(records, model, cfg.horizon);
  const FeatureMatrix x = assemble_features(prepared, cfg.features);
  FeatureMatrix x_train, x_val;
  std::vector<int> y_train, y_val;
  for (std::size_t i : train_rows) {
    x_train.push_back(x[i]);
    y_train.push_back(labels[i]);
  }
  for (std::size_t i : val_rows) {
    x_val.push_back(x[i]);
    y_val.push_back(labels[i]);
  }
  GbtConfig gcfg = cfg.gbt;
  gcfg.seed = seed;
  model.gbt = train_gbt(x_train, y_train, gcfg, x_val, y_val);
  return model;
}

std::vector<double> predict_meta(const TrainedMeta& model, const std::vector<MetricRecord>& records, double horizon,
                                 int jobs) {
  const auto prepared = with_survival(records, model, horizon);
  return predict_proba(model.gbt, assemble_features(prepared, model.features), jobs);
}

MetaSummary run_meta_experiment(const std::vector<MetricRecord>& records, const MetaConfig& cfg) {
  cfg.validate();
  const std::vector<int> labels = label_records(records, cfg.h);
  MetaSummary summary;
  std::vector<double> accs, aucs;
  for (int r = 0; r < cfg.runs; ++r) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
    SplitSpec spec;
    spec.seed = seed;
    const Folds folds = split_dataset(records, spec);
    const TrainedMeta model = train_meta(records, labels, folds.train, folds.val, cfg, seed);
    for (const auto& w : model.warnings) summary.warnings.push_back("run " + std::to_string(r) + ": " + w);

    const auto test_rows = rows_of(records, folds.test);
    const auto probs = predict_meta(model, records, cfg.horizon, cfg.jobs);
    std::vector<double> p;
    std::vector<int> y;
    for (std::size_t i : test_rows) {
      p.push_back(probs[i]);
      y.push_back(labels[i]);
    }
    RunResult rr;
    rr.seed = seed;
    rr.train_records = rows_of(records, folds.train).size();
    rr.val_records = rows_of(records, folds.val).size();
    rr.test_records = test_rows.size();
    rr.trees = model.gbt.trees.size();
    rr.accuracy = accuracy(p, y);
    rr.auroc = auroc(p, y);
    accs.push_back(rr.accuracy);
    aucs.push_back(rr.auroc);
    summary.runs.push_back(rr);
  }
  summary.accuracy_mean = mean_of(accs);
  summary.accuracy_std = std_of(accs);
  summary.auroc_mean = mean_of(aucs);
  summary.auroc_std = std_of(aucs);
  return summary;
}

std::vector<double> crossfit_probabilities(const std::vector<MetricRecord>& records, const MetaConfig& cfg) {
  cfg.validate();
  const std::vector<int> labels = label_records(records, cfg.h);
  std::vector<TrackKey> keys = track_keys(records);
  const std::size_t k_folds = static_cast<std::size_t>(cfg.crossfit_folds);
  if (keys.size() < std::max(kMinSplitTracks, 2 * k_folds)) {
    throw ConfigError("crossfit_probabilities: too few tracks (" + std::to_string(keys.size()) + ")");
  }
  Rng rng(cfg.seed);
  rng.shuffle(keys.begin(), keys.end());

  std::vector<double> out(records.size(), 0.0);
  for (std::size_t k = 0; k < k_folds; ++k) {
    const std::size_t lo = keys.size() * k / k_folds;
    const std::size_t hi = keys.size() * (k + 1) / k_folds;
    const std::vector<TrackKey> held(keys.begin() + static_cast<std::ptrdiff_t>(lo),
                                     keys.begin() + static_cast<std::ptrdiff_t>(hi));
    std::vector<TrackKey> rest(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(lo));
    rest.insert(rest.end(), keys.begin() + static_cast<std::ptrdiff_t>(hi), keys.end());
    const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(rest.size() / 8.0)));
    const std::vector<TrackKey> val(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
    const std::vector<TrackKey> train(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());

    const TrainedMeta model = train_meta(records, labels, train, val, cfg, cfg.seed + k);
    const auto probs = predict_meta(model, records, cfg.horizon, cfg.jobs);
    for (std::size_t i : rows_of(records, held)) out[i] = probs[i];
  }
  return out;
}

}  // namespace fnr
