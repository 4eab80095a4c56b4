#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bayman/baselines.hpp"
#include "bayman/checkpoint.hpp"
#include "bayman/config.hpp"
#include "bayman/metrics.hpp"
#include "bayman/training.hpp"

namespace bayman {

/// Result of one experiment run, serializable as JSON with fixed key order
/// {config, perturbation, metrics, loss_curve[, baselines]} and as a flat
/// CSV row for sweep aggregation.
struct MetricsReport {
  ExperimentConfig config;
  PerturbSummary perturbation;
  std::vector<int> k_list;
  std::vector<double> recall;  // aligned with k_list
  std::vector<double> ndcg;
  std::vector<double> loss_curve;
  std::optional<std::vector<double>> popularity_recall, popularity_ndcg;
  std::optional<std::vector<double>> markov_recall, markov_ndcg;

  std::string to_json() const;
  static std::string csv_header(const std::vector<int>& k_list);
  std::string csv_row() const;
};

/// Dataset ready for a run: corpus ingested, optional corruption applied
/// (before the split by default, or to the training portion only),
/// degenerate users dropped, per-user prefix split fixed.
struct PreparedData {
  DatasetSplit split;
  PerturbSummary perturbation;
};

PreparedData prepare_data(const ExperimentConfig& cfg);
PreparedData prepare_data(const ExperimentConfig& cfg, const Dataset& raw);

/// Test-set evaluation of trained parameters; bundles are rebuilt with the
/// observed-node extension so test histories always gather valid rows.
MetricsReport evaluate_model(const ExperimentConfig& cfg, const ModelParams& params,
                             const DatasetSplit& split);

/// ingest -> perturb -> split -> train -> evaluate, all seeded by the config.
MetricsReport run_experiment(const ExperimentConfig& cfg);
MetricsReport run_experiment(const ExperimentConfig& cfg, const Dataset& raw);

/// One run per ablation variant {full, noB, noG, noGs, noGd, noT}.
std::vector<MetricsReport> run_ablation(const ExperimentConfig& cfg,
                                        const Dataset* raw = nullptr);

enum class SweepAxis { RDelete, RReplace, RMixed, TopKReplace, DeltaD, Epsilon };

SweepAxis sweep_axis_from_string(const std::string& name);
const char* to_string(SweepAxis axis);

/// The config with one sweep value applied to its axis.
ExperimentConfig apply_sweep_value(const ExperimentConfig& cfg, SweepAxis axis, double value);

struct SweepResult {
  SweepAxis axis;
  std::vector<double> values;
  std::vector<MetricsReport> reports;  // aligned with values

  std::string to_csv() const;  // header plus one row per grid point
};

/// Runs the grid; honors BAYMAN_THREADS for fan-out (results are assembled
/// in value order either way, so output bytes do not depend on it).
SweepResult run_sweep(const ExperimentConfig& cfg, SweepAxis axis,
                      const std::vector<double>& values, const Dataset* raw = nullptr);

}  // namespace bayman
