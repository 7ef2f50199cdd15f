#include "fnr/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <tuple>

#include "fnr/error.hpp"

namespace fnr {

std::vector<GtMatch> match_gt(std::span<const PixelMask* const> predictions, const GroundTruthFrame& gt) {
  std::vector<GtMatch> out(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (const auto& g : gt.instances) {
      if (!g.mask.same_grid(*predictions[i])) throw DimensionError("match_gt: grid mismatch");
      const double v = iou(*predictions[i], g.mask);
      if (v > out[i].iou_gt) out[i] = {g.gt_track_id, v};
    }
  }
  return out;
}

std::vector<GtMatch> match_gt(const Frame& frame, const GroundTruthFrame& gt) {
  std::vector<const PixelMask*> masks;
  for (const auto& inst : frame.instances) masks.push_back(&inst.mask);
  return match_gt(masks, gt);
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ConfigError("auroc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t tied_pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]]) ++tied_pos;
      ++j;
    }
    // Ranks i+1 .. j share their average.
    rank_sum += static_cast<double>(tied_pos) * 0.5 * static_cast<double>(i + 1 + j);
    pos += tied_pos;
    i = j;
  }
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) throw ConfigError("auroc: both classes are required");
  const double p = static_cast<double>(pos);
  const double u = rank_sum - p * (p + 1.0) * 0.5;
  return u / (p * static_cast<double>(neg));
}

double accuracy(std::span<const double> probabilities, std::span<const int> labels, double cutoff) {
  if (probabilities.empty()) throw ConfigError("accuracy: empty input");
  if (probabilities.size() != labels.size()) throw ConfigError("accuracy: length mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if ((probabilities[i] >= cutoff) == (labels[i] != 0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ConfigError("pearson: length mismatch");
  if (xs.size() < 2) throw ConfigError("pearson: at least two points are required");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw ConfigError("pearson: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

bool meets_iou(double v, double h) { return h == 0.0 ? v > 0.0 : v >= h; }

std::vector<MatchPair> greedy_match(const std::vector<std::vector<double>>& iou_matrix, double h) {
  std::vector<MatchPair> pairs;
  for (std::size_t p = 0; p < iou_matrix.size(); ++p) {
    for (std::size_t g = 0; g < iou_matrix[p].size(); ++g) {
      if (meets_iou(iou_matrix[p][g], h)) pairs.push_back({p, g, iou_matrix[p][g]});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const MatchPair& a, const MatchPair& b) { return a.iou > b.iou; });
  std::vector<MatchPair> out;
  std::vector<bool> pred_used, gt_used;
  for (const auto& m : pairs) {
    if (m.pred >= pred_used.size()) pred_used.resize(m.pred + 1, false);
    if (m.gt >= gt_used.size()) gt_used.resize(m.gt + 1, false);
    if (pred_used[m.pred] || gt_used[m.gt]) continue;
    pred_used[m.pred] = gt_used[m.gt] = true;
    out.push_back(m);
  }
  return out;
}

namespace {

std::vector<std::vector<double>> iou_matrix(std::span<const PixelMask* const> preds,
                                            std::span<const GroundTruthInstance* const> gts) {
  std::vector<std::vector<double>> m(preds.size(), std::vector<double>(gts.size(), 0.0));
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (!gts[g]->mask.same_grid(*preds[p])) throw DimensionError("evaluator: grid mismatch");
      m[p][g] = iou(*preds[p], gts[g]->mask);
    }
  }
  return m;
}

std::vector<bool> frame_gt_matched(const Frame& frame, const GroundTruthFrame& gt, double h,
                                   bool include_detected) {
  std::vector<const PixelMask*> preds;
  for (const auto& inst : frame.instances) {
    if (include_detected || inst.origin == Origin::network) preds.push_back(&inst.mask);
  }
  std::vector<const GroundTruthInstance*> gts;
  for (const auto& g : gt.instances) gts.push_back(&g);
  std::vector<bool> matched(gts.size(), false);
  for (const auto& m : greedy_match(iou_matrix(preds, gts), h)) matched[m.gt] = true;
  return matched;
}

}  // namespace

std::set<GtKey> exclusion_rule(const Sequence& seq, double h) {
  if (!seq.has_ground_truth()) throw ConfigError("exclusion_rule: sequence '" + seq.name + "' has no ground truth");
  std::map<int, int> first_match;
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const auto& gt = seq.ground_truth[t];
    const auto matched = frame_gt_matched(seq.frames[t], gt, h, false);
    for (std::size_t g = 0; g < gt.instances.size(); ++g) {
      if (matched[g]) first_match.emplace(gt.instances[g].gt_track_id, gt.index);
    }
  }
  std::set<GtKey> keep;
  for (const auto& gt : seq.ground_truth) {
    for (const auto& g : gt.instances) {
      const auto it = first_match.find(g.gt_track_id);
      if (it != first_match.end() && gt.index >= it->second) keep.emplace(g.gt_track_id, gt.index);
    }
  }
  return keep;
}

double occlusion_iou_bb(const BoundingBox& box, std::span<const BoundingBox> others) {
  double best = 0.0;
  for (const auto& o : others) best = std::max(best, box_iou(box, o));
  return best;
}

int occlusion_level(double iou_bb) {
  if (iou_bb <= 0.0) return 0;
  const int k = static_cast<int>(std::ceil(iou_bb * 10.0 - 1e-12));
  return std::clamp(k, 1, kOcclusionLevels - 1);
}

std::string occlusion_level_label(int level) {
  if (level == 0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "(%.1f,%.1f]", (level - 1) / 10.0, level / 10.0);
  return buf;
}

SweepFrame prepare_sweep_frame(std::span<const PixelMask* const> predictions, std::span<const double> selector,
                               const GroundTruthFrame& gt, const std::set<GtKey>& admissible) {
  if (predictions.size() != selector.size()) throw ConfigError("prepare_sweep_frame: length mismatch");
  SweepFrame f;
  f.selector.assign(selector.begin(), selector.end());

  std::vector<BoundingBox> boxes;
  for (const auto& g : gt.instances) boxes.push_back(bounding_box(g.mask));
  std::vector<int> level(gt.instances.size());
  for (std::size_t g = 0; g < boxes.size(); ++g) {
    std::vector<BoundingBox> others;
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      if (k != g) others.push_back(boxes[k]);
    }
    level[g] = occlusion_level(occlusion_iou_bb(boxes[g], others));
  }

  std::vector<const GroundTruthInstance*> kept_gt;
  for (std::size_t g = 0; g < gt.instances.size(); ++g) {
    if (admissible.count({gt.instances[g].gt_track_id, gt.index})) {
      kept_gt.push_back(&gt.instances[g]);
      f.gt_level.push_back(level[g]);
    }
  }
  f.iou = iou_matrix(predictions, kept_gt);

  // A prediction inherits the level of the gt it overlaps most, otherwise
  // its own box overlap with the gt boxes.
  const auto matches = match_gt(predictions, gt);
  for (std::size_t p = 0; p < predictions.size(); ++p) {
    if (matches[p].gt_track_id) {
      for (std::size_t g = 0; g < gt.instances.size(); ++g) {
        if (gt.instances[g].gt_track_id == *matches[p].gt_track_id) {
          f.pred_level.push_back(level[g]);
          break;
        }
      }
    } else {
      f.pred_level.push_back(occlusion_level(occlusion_iou_bb(bounding_box(*predictions[p]), boxes)));
    }
  }
  return f;
}

std::vector<double> default_thresholds(int count) {
  if (count < 2) throw ConfigError("default_thresholds: need at least two thresholds");
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) t[static_cast<std::size_t>(k)] = static_cast<double>(k) / (count - 1);
  return t;
}

double pr_auc(std::span<const SweepPoint> points) {
  std::vector<std::pair<double, double>> rp;
  for (const auto& p : points) rp.emplace_back(p.recall, p.precision);
  // Path order: recall up, and at equal recall the higher-threshold point
  // (higher precision) first.
  std::sort(rp.begin(), rp.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  });
  double area = 0.0;
  for (std::size_t k = 1; k < rp.size(); ++k) {
    area += (rp[k].first - rp[k - 1].first) * 0.5 * (rp[k].second + rp[k - 1].second);
  }
  return area;
}

double pr_auc_anchored(std::span<const SweepPoint> points) {
  if (points.empty()) return 0.0;
  const auto lowest = std::min_element(points.begin(), points.end(), [](const SweepPoint& a, const SweepPoint& b) {
    return a.recall != b.recall ? a.recall < b.recall : a.precision > b.precision;
  });
  return pr_auc(points) + lowest->recall * lowest->precision;
}

SweepResult sweep(std::span<const SweepFrame> frames, std::span<const double> thresholds, double h) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) throw ConfigError("sweep: thresholds must be sorted");
  std::int64_t total_gt = 0;
  for (const auto& f : frames) total_gt += static_cast<std::int64_t>(f.gt_level.size());
  if (total_gt == 0) throw ConfigError("sweep: no admissible ground truth");

  SweepResult result;
  for (double thr : thresholds) {
    SweepPoint pt;
    pt.threshold = thr;
    std::int64_t kept_total = 0;
    for (const auto& f : frames) {
      std::vector<std::size_t> kept;
      for (std::size_t p = 0; p < f.selector.size(); ++p) {
        if (f.selector[p] >= thr) kept.push_back(p);
      }
      kept_total += static_cast<std::int64_t>(kept.size());
      std::vector<std::vector<double>> sub;
      for (std::size_t p : kept) sub.push_back(f.iou[p]);
      std::vector<bool> pred_tp(kept.size(), false), gt_hit(f.gt_level.size(), false);
      for (const auto& m : greedy_match(sub, h)) {
        pred_tp[m.pred] = true;
        gt_hit[m.gt] = true;
      }
      for (std::size_t k = 0; k < kept.size(); ++k) {
        if (pred_tp[k]) {
          ++pt.tp;
        } else {
          ++pt.fp;
          ++pt.fp_by_level[static_cast<std::size_t>(f.pred_level[kept[k]])];
        }
      }
      for (std::size_t g = 0; g < gt_hit.size(); ++g) {
        if (!gt_hit[g]) {
          ++pt.fn;
          ++pt.fn_by_level[static_cast<std::size_t>(f.gt_level[g])];
        }
      }
    }
    if (kept_total == 0) {
      result.skipped_thresholds.push_back(thr);
      continue;
    }
    pt.precision = static_cast<double>(pt.tp) / static_cast<double>(kept_total);
    pt.recall = static_cast<double>(pt.tp) / static_cast<double>(total_gt);
    result.points.push_back(pt);
  }
  result.auc = pr_auc(result.points);
  result.auc_anchored = pr_auc_anchored(result.points);
  return result;
}

TrackingCounts tracking_metrics(const std::map<int, std::vector<bool>>& flags) {
  TrackingCounts c;
  for (const auto& [id, f] : flags) {
    if (f.empty()) continue;
    ++c.gt;
    const auto matched = std::count(f.begin(), f.end(), true);
    const double frac = static_cast<double>(matched) / static_cast<double>(f.size());
    if (frac >= 0.8) {
      ++c.mt;
    } else if (frac < 0.2) {
      ++c.ml;
    } else {
      ++c.pt;
    }
    for (std::size_t k = 1; k < f.size(); ++k) c.smn += f[k] != f[k - 1];
  }
  return c;
}

std::map<int, std::vector<bool>> gt_match_flags(const Sequence& seq, double h, bool include_detected) {
  if (!seq.has_ground_truth()) throw ConfigError("gt_match_flags: sequence '" + seq.name + "' has no ground truth");
  std::map<int, std::vector<bool>> flags;
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const auto& gt = seq.ground_truth[t];
    const auto matched = frame_gt_matched(seq.frames[t], gt, h, include_detected);
    for (std::size_t g = 0; g < gt.instances.size(); ++g) flags[gt.instances[g].gt_track_id].push_back(matched[g]);
  }
  return flags;
}

}  // namespace fnr
