#include "fnr/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "fnr/error.hpp"
#include "fnr/parallel.hpp"
#include "fnr/rng.hpp"

namespace fnr {

void GbtConfig::validate() const {
  if (max_trees < 0) throw ConfigError("gbt: max_trees must be >= 0");
  if (max_depth < 1) throw ConfigError("gbt: max_depth must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("gbt: learning_rate must be > 0");
  if (min_leaf < 1) throw ConfigError("gbt: min_leaf must be >= 1");
  if (patience < 1) throw ConfigError("gbt: patience must be >= 1");
  if (max_bins < 2 || max_bins > 255) throw ConfigError("gbt: max_bins must be in [2, 255]");
  if (l2 < 0.0) throw ConfigError("gbt: l2 must be >= 0");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw ConfigError("gbt: subsample must be in (0, 1]");
}

double RegressionTree::predict(std::span<const double> x) const {
  int k = 0;
  while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(k)];
    k = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(k)].value;
}

double GbtModel::raw_score(std::span<const double> x) const {
  double s = initial_log_odds;
  for (const auto& t : trees) s += learning_rate * t.predict(x);
  return s;
}

namespace {

constexpr double kProbFloor = 1e-6;

double sigmoid(double z) {
  const double p = 1.0 / (1.0 + std::exp(-z));
  return std::clamp(p, 1e-15, 1.0 - 1e-15);
}

// Candidate thresholds per feature: midpoints between distinct values when
// there are few of them, quantile values otherwise.
std::vector<double> feature_thresholds(std::vector<double> values, int max_bins) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> thr;
  if (values.size() <= static_cast<std::size_t>(max_bins)) {
    for (std::size_t k = 0; k + 1 < values.size(); ++k) thr.push_back(0.5 * (values[k] + values[k + 1]));
    return thr;
  }
  for (int b = 1; b < max_bins; ++b) {
    const std::size_t idx = values.size() * static_cast<std::size_t>(b) / static_cast<std::size_t>(max_bins);
    thr.push_back(values[idx - 1]);
  }
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
  return thr;
}

struct Binned {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<double>> thresholds;  // per feature
  std::vector<std::uint8_t> bins;               // column-major rows x cols
};

Binned bin_features(const FeatureMatrix& x, int max_bins) {
  Binned b;
  b.rows = x.size();
  b.cols = x.front().size();
  b.thresholds.resize(b.cols);
  b.bins.resize(b.rows * b.cols);
  std::vector<double> column(b.rows);
  for (std::size_t f = 0; f < b.cols; ++f) {
    for (std::size_t i = 0; i < b.rows; ++i) column[i] = x[i][f];
    b.thresholds[f] = feature_thresholds(column, max_bins);
    const auto& thr = b.thresholds[f];
    for (std::size_t i = 0; i < b.rows; ++i) {
      const auto pos = std::lower_bound(thr.begin(), thr.end(), column[i]) - thr.begin();
      b.bins[f * b.rows + i] = static_cast<std::uint8_t>(pos);
    }
  }
  return b;
}

class TreeBuilder {
 public:
  TreeBuilder(const Binned& data, const std::vector<double>& grad, const std::vector<double>& hess,
              const GbtConfig& cfg)
      : data_(data), grad_(grad), hess_(hess), cfg_(cfg) {}

  RegressionTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  double leaf_value(double g, double h) const { return -g / (h + cfg_.l2); }

  int grow(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double g = 0.0, h = 0.0;
    for (std::size_t i : rows) {
      g += grad_[i];
      h += hess_[i];
    }
    tree_.nodes[static_cast<std::size_t>(id)].value = leaf_value(g, h);
    const std::size_t min_leaf = static_cast<std::size_t>(cfg_.min_leaf);
    if (depth >= cfg_.max_depth || rows.size() < 2 * min_leaf) return id;

    const double parent = g * g / (h + cfg_.l2);
    double best_gain = 1e-12;
    int best_feature = -1;
    std::size_t best_bin = 0;
    std::vector<double> hg, hh;
    std::vector<std::size_t> hc;
    for (std::size_t f = 0; f < data_.cols; ++f) {
      const std::size_t nb = data_.thresholds[f].size() + 1;
      if (nb < 2) continue;
      hg.assign(nb, 0.0);
      hh.assign(nb, 0.0);
      hc.assign(nb, 0);
      const std::uint8_t* col = data_.bins.data() + f * data_.rows;
      for (std::size_t i : rows) {
        hg[col[i]] += grad_[i];
        hh[col[i]] += hess_[i];
        ++hc[col[i]];
      }
      double gl = 0.0, hl = 0.0;
      std::size_t cl = 0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        gl += hg[b];
        hl += hh[b];
        cl += hc[b];
        if (cl < min_leaf) continue;
        if (rows.size() - cl < min_leaf) break;
        const double gr = g - gl, hr = h - hl;
        const double gain = gl * gl / (hl + cfg_.l2) + gr * gr / (hr + cfg_.l2) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_bin = b;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    const std::uint8_t* col = data_.bins.data() + static_cast<std::size_t>(best_feature) * data_.rows;
    for (std::size_t i : rows) (col[i] <= best_bin ? left : right).push_back(i);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = data_.thresholds[static_cast<std::size_t>(best_feature)][best_bin];
    node.left = l;
    node.right = r;
    return id;
  }

  const Binned& data_;
  const std::vector<double>& grad_;
  const std::vector<double>& hess_;
  const GbtConfig& cfg_;
  RegressionTree tree_;
};

void check_matrix(const FeatureMatrix& x, std::size_t cols, const char* what) {
  for (const auto& row : x) {
    if (row.size() != cols) throw ConfigError(std::string("gbt: ragged ") + what + " matrix");
    for (double v : row) {
      if (!std::isfinite(v)) throw ConfigError(std::string("gbt: non-finite value in ") + what + " matrix");
    }
  }
}

}  // namespace

double log_loss(std::span<const double> p, std::span<const int> y) {
  if (p.size() != y.size() || p.empty()) throw ConfigError("log_loss: bad input sizes");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], 1e-15, 1.0 - 1e-15);
    s -= y[i] ? std::log(q) : std::log(1.0 - q);
  }
  return s / static_cast<double>(p.size());
}

GbtModel train_gbt(const FeatureMatrix& x, std::span<const int> y, const GbtConfig& config,
                   const FeatureMatrix& x_val, std::span<const int> y_val) {
  config.validate();
  if (x.empty()) throw FitError("gbt: empty training set");
  if (x.size() != y.size()) throw ConfigError("gbt: feature/label count mismatch");
  if (x_val.size() != y_val.size()) throw ConfigError("gbt: validation feature/label count mismatch");
  const std::size_t cols = x.front().size();
  if (cols == 0) throw ConfigError("gbt: zero features");
  check_matrix(x, cols, "training");
  check_matrix(x_val, cols, "validation");

  const std::size_t positives = static_cast<std::size_t>(std::count_if(y.begin(), y.end(), [](int v) { return v != 0; }));
  const bool single_class = positives == 0 || positives == y.size();
  if (single_class && !x_val.empty()) {
    throw FitError("gbt: training fold contains a single class");
  }

  GbtModel model;
  model.num_features = cols;
  model.learning_rate = config.learning_rate;
  model.config = config;
  const double prior =
      std::clamp(static_cast<double>(positives) / static_cast<double>(y.size()), kProbFloor, 1.0 - kProbFloor);
  model.initial_log_odds = std::log(prior / (1.0 - prior));
  if (single_class) return model;

  const Binned data = bin_features(x, config.max_bins);
  std::vector<double> raw(x.size(), model.initial_log_odds);
  std::vector<double> raw_val(x_val.size(), model.initial_log_odds);
  std::vector<double> grad(x.size()), hess(x.size()), p_val(x_val.size());
  std::vector<std::size_t> all_rows(x.size());
  std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
  Rng rng(config.seed);

  double best_loss = INFINITY;
  std::size_t best_count = 0;
  int since_best = 0;
  TreeBuilder builder(data, grad, hess, config);
  for (int t = 0; t < config.max_trees; ++t) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = sigmoid(raw[i]);
      grad[i] = p - (y[i] ? 1.0 : 0.0);
      hess[i] = std::max(p * (1.0 - p), 1e-12);
    }
    std::vector<std::size_t> rows;
    if (config.subsample < 1.0) {
      for (std::size_t i : all_rows) {
        if (rng.bernoulli(config.subsample)) rows.push_back(i);
      }
      if (rows.empty()) rows = all_rows;
    } else {
      rows = all_rows;
    }
    RegressionTree tree = builder.build(std::move(rows));
    for (std::size_t i = 0; i < x.size(); ++i) raw[i] += config.learning_rate * tree.predict(x[i]);
    model.trees.push_back(std::move(tree));

    if (x_val.empty()) continue;
    for (std::size_t i = 0; i < x_val.size(); ++i) {
      raw_val[i] += config.learning_rate * model.trees.back().predict(x_val[i]);
      p_val[i] = sigmoid(raw_val[i]);
    }
    const double loss = log_loss(p_val, y_val);
    if (loss < best_loss) {
      best_loss = loss;
      best_count = model.trees.size();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  if (!x_val.empty()) model.trees.resize(best_count);
  return model;
}

double predict_proba(const GbtModel& model, std::span<const double> x) {
  if (x.size() != model.num_features) {
    throw ConfigError("predict_proba: expected " + std::to_string(model.num_features) + " features, got " +
                      std::to_string(x.size()));
  }
  return sigmoid(model.raw_score(x));
}

std::vector<double> predict_proba(const GbtModel& model, const FeatureMatrix& x, int jobs) {
  std::vector<double> out(x.size());
  parallel_for(x.size(), jobs, [&](std::size_t i) { out[i] = predict_proba(model, x[i]); });
  return out;
}

namespace {

nlohmann::json node_json(const RegressionTree& tree, int k) {
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(k)];
  if (n.feature < 0) return {{"leaf", n.value}};
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"left", node_json(tree, n.left)},
          {"right", node_json(tree, n.right)}};
}

int node_from_json(const nlohmann::json& j, RegressionTree& tree, int depth) {
  if (depth > 64) throw ParseError("gbt model: tree too deep");
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("leaf")) {
    tree.nodes.back().value = j.at("leaf").get<double>();
    return id;
  }
  const int feature = j.at("feature").get<int>();
  if (feature < 0) throw ParseError("gbt model: negative feature index");
  const double threshold = j.at("threshold").get<double>();
  const int l = node_from_json(j.at("left"), tree, depth + 1);
  const int r = node_from_json(j.at("right"), tree, depth + 1);
  TreeNode& n = tree.nodes[static_cast<std::size_t>(id)];
  n.feature = feature;
  n.threshold = threshold;
  n.left = l;
  n.right = r;
  return id;
}

}  // namespace

std::string GbtModel::to_json() const {
  nlohmann::json j;
  j["format"] = "fnr-gbt-model";
  j["version"] = 1;
  j["num_features"] = num_features;
  j["initial_log_odds"] = initial_log_odds;
  j["learning_rate"] = learning_rate;
  j["config"] = {{"max_trees", config.max_trees},   {"max_depth", config.max_depth},
                 {"learning_rate", config.learning_rate}, {"min_leaf", config.min_leaf},
                 {"patience", config.patience},     {"max_bins", config.max_bins},
                 {"l2", config.l2},                 {"subsample", config.subsample},
                 {"seed", config.seed}};
  nlohmann::json ts = nlohmann::json::array();
  for (const auto& t : trees) ts.push_back(node_json(t, 0));
  j["trees"] = ts;
  return j.dump(1);
}

GbtModel GbtModel::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "fnr-gbt-model") throw ParseError("gbt model: wrong format tag");
    if (j.at("version") != 1) throw ParseError("gbt model: unsupported version");
    GbtModel m;
    m.num_features = j.at("num_features").get<std::size_t>();
    m.initial_log_odds = j.at("initial_log_odds").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    const auto& c = j.at("config");
    m.config.max_trees = c.at("max_trees").get<int>();
    m.config.max_depth = c.at("max_depth").get<int>();
    m.config.learning_rate = c.at("learning_rate").get<double>();
    m.config.min_leaf = c.at("min_leaf").get<int>();
    m.config.patience = c.at("patience").get<int>();
    m.config.max_bins = c.at("max_bins").get<int>();
    m.config.l2 = c.at("l2").get<double>();
    m.config.subsample = c.at("subsample").get<double>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    for (const auto& tj : j.at("trees")) {
      RegressionTree t;
      node_from_json(tj, t, 0);
      for (const auto& n : t.nodes) {
        if (n.feature >= 0 && static_cast<std::size_t>(n.feature) >= m.num_features) {
          throw ParseError("gbt model: feature index out of range");
        }
      }
      m.trees.push_back(std::move(t));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("gbt model: ") + e.what());
  }
}

}  // namespace fnr
