#pragma once
// Meta classification of instances into IoU < h and IoU >= h from time
// series of metric records.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fnr/gbt.hpp"
#include "fnr/instance_metrics.hpp"
#include "fnr/survival.hpp"

namespace fnr {

inline constexpr int kMaxHistory = 10;

struct FeatureOptions {
  int n = 0;              ///< previous frames per feature vector
  int num_classes = 2;    ///< width of the one-hot class block
  bool with_depth = true;
  bool with_survival = true;

  void validate() const;
};

/// Per-frame block layout: metric fields followed by the class one-hot.
std::vector<std::string> block_feature_names(const FeatureOptions& opts);
std::vector<double> record_block(const MetricRecord& rec, const FeatureOptions& opts);

/// One row per input record, in input order: blocks for frames t-n .. t of
/// the record's track, oldest first. Missing history repeats the oldest
/// available block.
FeatureMatrix assemble_features(const std::vector<MetricRecord>& records, const FeatureOptions& opts);
std::vector<std::string> feature_names(const FeatureOptions& opts);

/// Fills iou_gt and gt_track_id from the matching gt of each record's
/// instance. Sequences are looked up by name.
void attach_ground_truth(std::vector<MetricRecord>& records, std::span<const Sequence> sequences);

/// 1 for iou_gt >= h (iou_gt > 0 when h == 0). Throws ConfigError when a
/// record has no iou_gt.
std::vector<int> label_records(const std::vector<MetricRecord>& records, double h);
std::vector<int> label_records(std::vector<MetricRecord>& records, std::span<const Sequence> sequences, double h);

/// (sequence_index, track_id)
using TrackKey = std::pair<int, int>;

std::vector<TrackKey> track_keys(const std::vector<MetricRecord>& records);

struct SplitSpec {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
  std::uint64_t seed = 42;

  void validate() const;
};

struct Folds {
  std::vector<TrackKey> train;
  std::vector<TrackKey> val;
  std::vector<TrackKey> test;
};

inline constexpr std::size_t kMinSplitTracks = 10;

/// Shuffles the tracks with the seed and cuts them by the fractions.
/// Throws ConfigError with fewer than kMinSplitTracks tracks.
Folds split_dataset(const std::vector<MetricRecord>& records, const SplitSpec& spec);

struct MetaConfig {
  double h = 0.5;
  FeatureOptions features;
  int runs = 10;
  std::uint64_t seed = 42;
  GbtConfig gbt;
  CoxFitOptions cox;
  double horizon = 10.0;
  int crossfit_folds = 5;
  int jobs = 1;

  void validate() const;
};

struct TrainedMeta {
  FeatureOptions features;
  bool has_cox = false;
  CoxModel cox;
  GbtModel gbt;
  std::vector<std::string> warnings;
};

/// Fits the survival model on the training tracks, then the boosted trees
/// on train with early stopping on val.
TrainedMeta train_meta(const std::vector<MetricRecord>& records, std::span<const int> labels,
                       const std::vector<TrackKey>& train, const std::vector<TrackKey>& val,
                       const MetaConfig& cfg, std::uint64_t seed);

/// P(iou >= h) for every record.
std::vector<double> predict_meta(const TrainedMeta& model, const std::vector<MetricRecord>& records, double horizon,
                                 int jobs = 1);

struct RunResult {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double auroc = 0.0;
  std::size_t train_records = 0;
  std::size_t val_records = 0;
  std::size_t test_records = 0;
  std::size_t trees = 0;
};

struct MetaSummary {
  std::vector<RunResult> runs;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double auroc_mean = 0.0;
  double auroc_std = 0.0;
  std::vector<std::string> warnings;
};

/// Repeated random 70/10/20 track splits; run r uses seed cfg.seed + r.
MetaSummary run_meta_experiment(const std::vector<MetricRecord>& records, const MetaConfig& cfg);

/// Out-of-fold probabilities: tracks are cut into cfg.crossfit_folds groups
/// and each group is scored by a model trained on the others.
std::vector<double> crossfit_probabilities(const std::vector<MetricRecord>& records, const MetaConfig& cfg);

}  // namespace fnr
