#pragma once

// Comparative harness: every variant × seed cell is trained on identical
// splits of one dataset and evaluated on the test split. Cells run
// concurrently (OpenMP) and share nothing; the report is assembled serially.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stgdl/data.hpp"
#include "stgdl/metrics.hpp"
#include "stgdl/theory.hpp"
#include "stgdl/training.hpp"

namespace stgdl::experiment {

struct ExperimentConfig {
  std::optional<std::string> data_dir;  // synthetic data is generated when absent
  data::SyntheticConfig synthetic;
  training::TrainConfig train;  // `variant` and `seed` are overridden per cell
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<dln::Variant> variants{dln::Variant::stgdl, dln::Variant::monolithic, dln::Variant::ted};
  int states = 8;     // quantization levels for the theory report
  double tau = 0.5;   // hardening threshold for diagnostics
  bool parallel = true;

  /// Keys mirror the struct; every key is optional. Unknown keys are errors.
  static ExperimentConfig from_json(const std::string& text);
  std::string to_json() const;
};

struct DecompositionDiagnostics {
  std::size_t edges = 0;  // |E| of the input graph
  std::size_t completeness_misses = 0;
  std::size_t overlaps = 0;
  std::vector<std::size_t> factor_edges;
  std::vector<std::size_t> factor_nodes;  // B_P per factor
};

struct CellResult {
  dln::Variant variant = dln::Variant::stgdl;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // set when !ok
  metrics::MetricSet test;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double initial_residual = 0.0;  // training-set L_r before any update
  double final_residual = 0.0;    // training-set L_r of the returned model
  std::optional<DecompositionDiagnostics> decomposition;  // stgdl (learned) and ted
};

struct VariantSummary {
  dln::Variant variant = dln::Variant::stgdl;
  std::size_t cells = 0;  // successful cells
  metrics::MetricSet mean;
  metrics::MetricSet stddev;  // population standard deviation
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<CellResult> cells;  // variant-major, then seed order
  std::vector<VariantSummary> summaries;
  std::optional<metrics::Improvement> vs_monolithic;  // stgdl over monolithic, on means
  std::optional<metrics::Improvement> vs_ted;         // stgdl over ted, on means
  theory::TheoryReport theory;

  const CellResult* cell(dln::Variant v, std::uint64_t seed) const;
  const VariantSummary* summary(dln::Variant v) const;

  std::string to_text() const;
  /// One row per cell.
  std::string to_csv() const;
  std::string to_json() const;
  static ExperimentReport from_json(const std::string& text);
};

/// Mixture-only bounds when the dataset carries no ground-truth factors.
theory::TheoryReport dataset_theory(const data::Dataset& dataset, int states);

DecompositionDiagnostics diagnose(const graph::Decomposition& d, const graph::Graph& g);

ExperimentReport run_experiment(const ExperimentConfig& cfg);
ExperimentReport run_experiment(const ExperimentConfig& cfg, const data::Dataset& dataset);

}  // namespace stgdl::experiment
