#pragma once
// Per-instance metrics: sizes, depth statistics, occlusion, temporal
// deviations, aspect ratio, deformation, and the survival score slot.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fnr/sequence.hpp"
#include "fnr/tracker.hpp"

namespace fnr {

class CoxModel;

inline constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();
inline bool is_absent(double x) { return std::isnan(x); }

struct MetricRecord {
  std::string sequence;
  int sequence_index = 0;
  int track_id = 0;
  int frame = 0;

  std::int64_t size = 0;           ///< S
  std::int64_t size_inner = 0;     ///< S_in
  std::int64_t size_boundary = 0;  ///< S_bd
  double size_rel = 0.0;           ///< S / S_bd
  double size_inner_rel = 0.0;     ///< S_in / S_bd

  double depth_mean = kAbsent;      ///< D
  double depth_inner = kAbsent;     ///< D_in
  double depth_boundary = kAbsent;  ///< D_bd
  double depth_rel = kAbsent;       ///< D * S_rel
  double depth_inner_rel = kAbsent; ///< D_in * S_in_rel

  CenterPoint center;
  int class_id = 0;
  double score = 0.0;
  double occlusion = 0.0;

  double dev_depth = kAbsent;  ///< d_d
  double dev_size = 0.0;       ///< d_s
  double dev_center = 0.0;     ///< d_c
  double survival = kAbsent;   ///< v, filled once a Cox model exists
  double aspect_ratio = 1.0;   ///< r
  double deformation = 1.0;    ///< f

  double iou_gt = kAbsent;
  int gt_track_id = -1;
  Origin origin = Origin::network;

  /// Survival target: frames until the track's last entry, and whether the
  /// track ends before the sequence does.
  int duration = 0;
  bool event = false;
};

struct SizeMetrics {
  std::int64_t size = 0;
  std::int64_t inner = 0;
  std::int64_t boundary = 0;
  double size_rel = 0.0;
  double inner_rel = 0.0;
};

SizeMetrics size_metrics(const PixelMask& mask);

struct DepthMetrics {
  double mean = 0.0;
  double inner = 0.0;
  double boundary = 0.0;
  double mean_rel = 0.0;
  double inner_rel = 0.0;
};

/// Inner mean is 0 (and so is its relative form) when the mask has no inner pixels.
DepthMetrics depth_metrics(const PixelMask& mask, const DepthMap& depth);

/// Share of `prev` (moved onto the center of `curr`) covered by the union of
/// `others`. Returns 0 when there is no previous instance.
double occlusion(const InstancePrediction* prev, const InstancePrediction& curr,
                 std::span<const InstancePrediction* const> others);

/// |least-squares prediction at `target` - current|, 0 for fewer than two points.
double temporal_deviation(std::span<const int> frames, std::span<const double> values, int target,
                          double current);
/// Euclidean distance between the extrapolated and actual center.
double temporal_deviation(std::span<const TimedCenter> series, int target, const CenterPoint& current);

/// Bounding-box height / width.
double aspect_ratio(const PixelMask& mask);

/// IoU after aligning the geometric centers; 1 when there is no previous instance.
double deformation(const InstancePrediction* prev, const InstancePrediction& curr);

inline constexpr int kDeviationWindow = 5;

/// One record per track entry. `frames` is the frame list the track lives
/// in. `model` may be null, leaving `survival` absent.
std::vector<MetricRecord> compute_all(const Track& track, const std::vector<Frame>& frames,
                                      const CoxModel* model, double horizon = 10.0);

/// Records for every tracked instance of a sequence, ordered by (frame, track_id).
std::vector<MetricRecord> compute_sequence(const Sequence& seq, int sequence_index,
                                           const CoxModel* model, double horizon = 10.0);

/// Names and values of the single-frame metrics fed to the survival model.
std::vector<std::string> single_frame_feature_names(bool with_depth);
std::vector<double> single_frame_features(const MetricRecord& rec, bool with_depth);

/// Fills `survival` for every record from the model.
void apply_survival(std::vector<MetricRecord>& records, const CoxModel& model, double horizon);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricRecord& rec);
std::string metrics_csv(const std::vector<MetricRecord>& records);
/// Parses a file written by metrics_csv. Throws ParseError with line numbers.
std::vector<MetricRecord> parse_metrics_csv(const std::string& text, const std::string& source = "metrics.csv");

/// Shortest round-trip decimal form of a double ("" for absent values).
std::string format_double(double x);

}  // namespace fnr
