#pragma once

// Joint optimization of the decomposition masks and the block parameters.
// One backward pass per batch; Adam then updates the AGD parameters and the
// DLN parameters from the same gradients.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stgdl/data.hpp"
#include "stgdl/dln.hpp"
#include "stgdl/metrics.hpp"

namespace stgdl::training {

using ad::Tensor;
using ad::Var;

struct LossWeights {
  double completeness = 1.0;
  double independence = 1.0;
  double residual = 1.0;
  double prediction = 1.0;
};

struct TrainConfig {
  dln::Variant variant = dln::Variant::stgdl;
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::size_t k = 3;
  std::size_t window = 12;
  std::size_t hidden = 8;
  std::uint64_t seed = 0;
  LossWeights weights;

  /// Throws DomainError on nonpositive sizes or rates.
  void validate() const;
  /// K values the reference protocol searches over.
  static constexpr std::size_t kMinSearchK = 4;
  static constexpr std::size_t kMaxSearchK = 10;
  bool k_in_search_range() const { return k >= kMinSearchK && k <= kMaxSearchK; }
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  /// Zero moments mirroring the parameter shapes.
  static AdamState for_params(const std::vector<const Tensor*>& params);
};

/// Advances the step counter once, then applies a bias-corrected Adam update
/// to every parameter.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state, double lr);

/// Same update restricted to parameters [first, last) of the state; the step
/// counter is not advanced. Used to update the AGD and DLN groups in turn.
void adam_update_range(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state,
                       double lr, std::size_t first, std::size_t last);

struct LossTerms {
  Var completeness;
  Var independence;
  Var residual;
  Var prediction;
  Var joint;
};

struct LossValues {
  double completeness = 0.0;
  double independence = 0.0;
  double residual = 0.0;
  double prediction = 0.0;
  double joint = 0.0;

  static LossValues of(const LossTerms& t);
};

/// L_joint = w_c L_c + w_i L_i + w_r L_r + w_p L_p. Terms a variant does not
/// have (masks for ted; masks and residual for monolithic) are zero constants.
LossTerms joint_loss(const dln::DlnModel& model, const dln::BoundModel& bound, Var x, Var target,
                     const LossWeights& weights);

struct EpochRecord {
  std::size_t epoch = 0;
  LossValues train;
  double val_mae = 0.0;
};

struct History {
  LossValues initial;  // training-set means before the first update
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_mae = 0.0;
  bool early_stopped = false;

  /// epoch,L_c,L_i,L_r,L_p,L_joint,val_MAE
  std::string to_csv() const;
};

struct TrainResult {
  dln::DlnModel model;  // best-validation snapshot
  dln::DlnModel final_model;
  History history;
};

/// Model skeleton for a dataset: TED subgraphs are computed here for the ted
/// variant.
dln::DlnModel init_params(const data::Dataset& dataset, const TrainConfig& cfg);

/// Mean loss terms over a sample set without updating anything.
LossValues evaluate_losses(dln::DlnModel& model, const data::SampleSet& samples, const LossWeights& weights,
                           std::size_t batch_size = 256);

/// Test-style metrics in the original signal scale.
metrics::MetricSet evaluate(dln::DlnModel& model, const data::SampleSet& samples, std::size_t batch_size = 256);

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const data::Dataset& dataset, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Same, on prepared splits (the sample sets must share one signal tensor).
TrainResult train(const data::Dataset& dataset, const data::Splits& splits, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace stgdl::training
