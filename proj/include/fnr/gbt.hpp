#pragma once
// Gradient-boosted regression trees with logistic loss.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fnr {

using FeatureMatrix = std::vector<std::vector<double>>;

struct GbtConfig {
  int max_trees = 200;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_leaf = 5;
  int patience = 20;        ///< early-stopping rounds on validation log-loss
  int max_bins = 32;        ///< candidate thresholds per feature
  double l2 = 1.0;          ///< leaf-value regularization
  double subsample = 1.0;   ///< row fraction drawn per tree
  std::uint64_t seed = 0;

  void validate() const;
};

struct TreeNode {
  int feature = -1;  ///< -1 marks a leaf
  double threshold = 0.0;  ///< go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  ///< nodes[0] is the root

  double predict(std::span<const double> x) const;
};

struct GbtModel {
  std::size_t num_features = 0;
  double initial_log_odds = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;
  GbtConfig config;

  /// Initial log-odds plus the scaled leaf values.
  double raw_score(std::span<const double> x) const;

  std::string to_json() const;
  static GbtModel from_json(const std::string& text);
};

/// Fits on (x, y). A non-empty validation set turns on early stopping: the
/// tree count with the lowest validation log-loss is kept. Single-class
/// training data is an error unless the validation set is empty, in which
/// case the model has no trees and predicts the clipped class prior.
GbtModel train_gbt(const FeatureMatrix& x, std::span<const int> y, const GbtConfig& config,
                   const FeatureMatrix& x_val = {}, std::span<const int> y_val = {});

/// Probability of label 1. Throws ConfigError on a dimension mismatch.
double predict_proba(const GbtModel& model, std::span<const double> x);
std::vector<double> predict_proba(const GbtModel& model, const FeatureMatrix& x, int jobs = 1);

double log_loss(std::span<const double> p, std::span<const int> y);

}  // namespace fnr
