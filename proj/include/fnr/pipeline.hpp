#pragma once
// Stage orchestration shared by the command-line tool and the tests.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fnr/evaluator.hpp"
#include "fnr/fn_detector.hpp"
#include "fnr/gbt.hpp"
#include "fnr/instance_metrics.hpp"
#include "fnr/meta.hpp"
#include "fnr/survival.hpp"
#include "fnr/synth.hpp"
#include "fnr/tracker.hpp"

namespace fnr {

struct EvalConfig {
  std::vector<double> iou_thresholds = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<int> history_lengths = {0, 5};
  int sweep_history = 5;  ///< n used for the meta probabilities of the PR sweep
  std::vector<double> thresholds = default_thresholds(15);
  int runs = 10;
  std::uint64_t seed = 42;
  GbtConfig gbt;
  CoxFitOptions cox;
  double horizon = 10.0;
  int crossfit_folds = 5;
  double tracking_iou = 0.5;
  int jobs = 1;

  void validate() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
nlohmann::json to_json(const TrackerConfig& cfg);
nlohmann::json to_json(const DetectorConfig& cfg);
nlohmann::json to_json(const EvalConfig& cfg);

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

/// Hash of a stage given the hash of its input and its own configuration.
std::string stage_hash(const std::string& upstream, const std::string& stage, const nlohmann::json& config);

/// The common config_hash attribute of a set of sequences ("" when absent).
/// Throws ConfigError when the sequences disagree.
std::string lineage_of(const std::vector<Sequence>& sequences);

/// Sequence directories below `path`: `path` itself when it holds a
/// manifest, else its immediate subdirectories that do, sorted by name.
std::vector<std::filesystem::path> discover_sequences(const std::filesystem::path& path);
std::vector<Sequence> load_sequences(const std::filesystem::path& path, int jobs = 1);
void save_sequences(const std::vector<Sequence>& sequences, const std::filesystem::path& dir);

std::vector<Sequence> stage_synth(const SynthConfig& cfg);

struct TrackStage {
  std::vector<Sequence> sequences;
  std::vector<std::string> tracks_jsonl;  ///< per sequence
};
TrackStage stage_track(const std::vector<Sequence>& input, const TrackerConfig& cfg, int jobs = 1);

struct DetectStage {
  std::vector<Sequence> sequences;
  std::vector<DetectionReport> reports;  ///< per sequence
};
DetectStage stage_detect(const std::vector<Sequence>& tracked, const DetectorConfig& cfg, int jobs = 1);
nlohmann::json detect_report_json(const DetectStage& stage);

/// Records for all sequences with gt matches attached when annotations exist.
std::vector<MetricRecord> stage_metrics(const std::vector<Sequence>& sequences, int jobs = 1);

struct PrRow {
  std::string method;
  double h = 0.0;
  SweepPoint point;
};

struct SweepOutcome {
  SweepResult score;  ///< network instances ranked by score
  SweepResult ours;   ///< network and detected instances ranked by P(iou >= h)
};

/// Both PR sweeps at one h. Meta probabilities are out-of-fold.
SweepOutcome sweep_methods(const std::vector<Sequence>& sequences, const std::vector<MetricRecord>& records,
                           double h, const EvalConfig& cfg);

/// Same, with `probs[i]` as the selector of `records[i]`.
SweepOutcome sweep_with_probabilities(const std::vector<Sequence>& sequences, const std::vector<MetricRecord>& records,
                                      std::span<const double> probs, double h, std::span<const double> thresholds);

struct EvalOutput {
  nlohmann::json report;
  std::vector<PrRow> pr_rows;
};

/// Meta classification, Pearson table, PR sweeps and tracking counts.
EvalOutput evaluate_all(const std::vector<Sequence>& sequences, const std::vector<MetricRecord>& records,
                        const EvalConfig& cfg);

std::string pr_points_csv(const std::vector<PrRow>& rows);
nlohmann::json meta_summary_json(const MetaSummary& s);

/// Writes text, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

struct RunAllConfig {
  std::vector<std::filesystem::path> inputs;  ///< empty: generate with `synth`
  SynthConfig synth;
  TrackerConfig tracker;
  DetectorConfig detector;
  EvalConfig eval;
  std::filesystem::path out_dir;
  int jobs = 1;
};

/// track -> detect -> metrics -> meta -> evaluate, writing every stage below
/// out_dir. Errors are rethrown as StageError naming the stage.
nlohmann::json run_all(const RunAllConfig& cfg);

}  // namespace fnr
