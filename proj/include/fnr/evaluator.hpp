#pragma once
// Ground-truth matching, classification scores, precision-recall sweeps,
// tracking counts and occlusion levels.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fnr/sequence.hpp"

namespace fnr {

struct GtMatch {
  std::optional<int> gt_track_id;
  double iou_gt = 0.0;
};

/// Best-iou gt instance per prediction (first gt wins ties); no id when
/// nothing overlaps.
std::vector<GtMatch> match_gt(std::span<const PixelMask* const> predictions, const GroundTruthFrame& gt);
std::vector<GtMatch> match_gt(const Frame& frame, const GroundTruthFrame& gt);

/// Mann-Whitney AUROC, ties count one half. Throws ConfigError when a class is missing.
double auroc(std::span<const double> scores, std::span<const int> labels);
double accuracy(std::span<const double> probabilities, std::span<const int> labels, double cutoff = 0.5);
double pearson(std::span<const double> xs, std::span<const double> ys);

/// iou >= h, except h == 0 which means iou > 0.
bool meets_iou(double iou, double h);

struct MatchPair {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double iou = 0.0;
};

/// One-to-one matching by descending iou over pairs that meet h. Ties are
/// broken by (pred, gt) index.
std::vector<MatchPair> greedy_match(const std::vector<std::vector<double>>& iou, double h);

/// (gt_track_id, frame) pairs kept for evaluation.
using GtKey = std::pair<int, int>;

/// Drops gt tracks never matched by a network prediction and, for the rest,
/// the frames before their first match.
std::set<GtKey> exclusion_rule(const Sequence& seq, double h);

inline constexpr int kOcclusionLevels = 11;  ///< exact 0, then (0,0.1] .. (0.9,1]

/// Maximum bounding-box iou against the other boxes.
double occlusion_iou_bb(const BoundingBox& box, std::span<const BoundingBox> others);
int occlusion_level(double iou_bb);
std::string occlusion_level_label(int level);

struct SweepPoint {
  double threshold = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  std::array<std::int64_t, kOcclusionLevels> fp_by_level{};
  std::array<std::int64_t, kOcclusionLevels> fn_by_level{};
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double auc = 0.0;
  double auc_anchored = 0.0;
  std::vector<double> skipped_thresholds;  ///< no kept predictions there
};

/// Precomputed per-frame inputs for a sweep.
struct SweepFrame {
  std::vector<double> selector;             ///< per prediction
  std::vector<std::vector<double>> iou;     ///< prediction x admissible gt
  std::vector<int> pred_level;              ///< occlusion level per prediction
  std::vector<int> gt_level;                ///< occlusion level per admissible gt
};

SweepFrame prepare_sweep_frame(std::span<const PixelMask* const> predictions, std::span<const double> selector,
                               const GroundTruthFrame& gt, const std::set<GtKey>& admissible);

std::vector<double> default_thresholds(int count = 15);

/// Throws ConfigError when no admissible gt exists or thresholds are unsorted.
SweepResult sweep(std::span<const SweepFrame> frames, std::span<const double> thresholds, double h);

/// Trapezoids over the points sorted by recall, without extrapolation.
double pr_auc(std::span<const SweepPoint> points);

/// As pr_auc, with the curve extended flat from its lowest-recall point to
/// recall 0. Reported next to pr_auc because a selector concentrated above
/// the second-highest threshold leaves pr_auc close to 0.
double pr_auc_anchored(std::span<const SweepPoint> points);

struct TrackingCounts {
  int gt = 0;
  int mt = 0;
  int pt = 0;
  int ml = 0;
  int smn = 0;

  TrackingCounts& operator+=(const TrackingCounts& o) {
    gt += o.gt;
    mt += o.mt;
    pt += o.pt;
    ml += o.ml;
    smn += o.smn;
    return *this;
  }
};

/// Matched flags per gt track, in order of occurrence.
TrackingCounts tracking_metrics(const std::map<int, std::vector<bool>>& flags);

/// Flags from greedy one-to-one matching at h against the predictions of
/// each frame; detected instances are used only when `include_detected`.
std::map<int, std::vector<bool>> gt_match_flags(const Sequence& seq, double h, bool include_detected);

}  // namespace fnr
