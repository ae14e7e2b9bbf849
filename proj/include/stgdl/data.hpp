#pragma once

// Synthetic multi-factor datasets with known ground truth, their on-disk
// layout, sliding-window sampling and chronological splits.
//
// Signals are stored as a [τ, N, F] tensor.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stgdl/autodiff.hpp"
#include "stgdl/graph.hpp"

namespace stgdl::data {

using ad::Tensor;

struct Meta {
  std::string name = "dataset";
  std::size_t tau = 0;
  std::size_t nodes = 0;
  std::size_t features = 1;
  std::optional<std::size_t> k;
  std::optional<std::uint64_t> seed;
  std::string interval = "step";
};

struct GroundTruth {
  graph::Decomposition decomposition;
  std::vector<Tensor> factor_signals;  // K tensors [τ, N, F]
};

struct Dataset {
  graph::Graph graph;
  Tensor signals;
  std::optional<GroundTruth> ground_truth;
  Meta meta;

  /// All values of factor k (or of the mixture when k is empty), flattened.
  std::vector<double> flat_series(std::optional<std::size_t> k = std::nullopt) const;
};

struct SyntheticConfig {
  std::size_t nodes = 24;
  std::size_t factors = 3;
  std::size_t steps = 2000;  // τ
  std::size_t features = 1;
  std::size_t window = 12;   // used only for the τ > 2T precondition
  double edge_prob = 0.4;    // within a community
  double cross_prob = 0.05;  // between communities
  double noise_std = 0.1;
  double rho = 0.9;
  std::size_t burn_in = 100;
  std::uint64_t seed = 1;
};

/// Random undirected graph with K node communities, edges split into K
/// disjoint factor subgraphs along the communities, and
/// per-factor diffusion  x_k(t+1) = ρ Â_k x_k(t) + s_k(t) + η  driven by a
/// factor-specific sinusoid on the factor's own nodes. X = Σ_k X_k.
Dataset generate_synthetic(const SyntheticConfig& cfg);

enum class SplitTag { all, train, val, test };
std::string to_string(SplitTag tag);
SplitTag split_from_string(const std::string& s);

struct WindowOptions {
  std::size_t window = 12;
  /// Optional long-range context: when `periods` > 0 the input also carries
  /// the `window` steps ending p·`period` steps before the target, for
  /// p = periods..1, ahead of the recent window.
  std::size_t period = 0;
  std::size_t periods = 0;

  std::size_t input_length() const { return window * (periods + 1); }
  std::size_t history() const { return window + periods * period; }
};

/// Windowed (input, target) pairs referencing a shared signal tensor.
class SampleSet {
 public:
  SampleSet() = default;
  SampleSet(std::shared_ptr<const Tensor> signals, WindowOptions opts, std::vector<std::size_t> targets,
            SplitTag tag = SplitTag::all);

  std::size_t size() const noexcept { return targets_.size(); }
  bool empty() const noexcept { return targets_.empty(); }
  SplitTag tag() const noexcept { return tag_; }
  const WindowOptions& options() const noexcept { return opts_; }
  /// Time index of sample i's target frame.
  std::size_t target_time(std::size_t i) const { return targets_.at(i); }
  /// Time indices that make up sample i's input, in order.
  std::vector<std::size_t> input_times(std::size_t i) const;

  Tensor input(std::size_t i) const;   // [T', N, F]
  Tensor target(std::size_t i) const;  // [N, F]
  Tensor batch_inputs(std::span<const std::size_t> idx) const;   // [B, T', N, F]
  Tensor batch_targets(std::span<const std::size_t> idx) const;  // [B, N, F]

  SampleSet subset(std::size_t first, std::size_t count, SplitTag tag) const;
  const std::shared_ptr<const Tensor>& signals() const noexcept { return signals_; }

 private:
  std::shared_ptr<const Tensor> signals_;
  WindowOptions opts_;
  std::vector<std::size_t> targets_;
  SplitTag tag_ = SplitTag::all;
};

SampleSet sliding_windows(const Tensor& signals, std::size_t window);
SampleSet sliding_windows(const Tensor& signals, const WindowOptions& opts);

struct Splits {
  SampleSet train, val, test;
};

/// Chronological split: floor(0.7 n), floor(0.1 n), remainder.
Splits split(const SampleSet& samples, double train_ratio = 0.7, double val_ratio = 0.1);

void save_dataset(const Dataset& d, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace stgdl::data
