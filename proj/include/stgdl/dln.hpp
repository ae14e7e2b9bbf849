#pragma once

// Decomposed learning network: K spatio-temporal blocks chained by a
// subtractive residual on their backcasts and summed by an additive residual
// on their forecasts. Also the single-block monolithic comparator.
//
// Signals are batched as [B, T, N, F]; forecasts are [B, N, F].

#include <cstdint>
#include <string>
#include <vector>

#include "stgdl/agd.hpp"
#include "stgdl/autodiff.hpp"

namespace stgdl::dln {

using ad::Tensor;
using ad::Var;

struct BlockShape {
  std::size_t window = 12;   // T
  std::size_t features = 1;  // F
  std::size_t hidden = 8;    // F_h
};

/// Reference backbone parameters.
///
///   lift      w_in   F   × F_h
///   graph mix w_g    F_h × F_h   H = tanh(Â (X w_in) w_g), per time step
///   temporal  w_t    T   × T     Z = tanh(w_t · H) along the time axis
///   forecast  w_pred T·F_h × F,    b_pred 1 × F
///   backcast  w_ext  T·F_h × T·F,  b_ext  1 × T·F
///
/// The two decoders read the same T×F_h embedding per node and differ only
/// in output length.
struct StBlockParams {
  Tensor w_in, w_g, w_t, w_pred, b_pred, w_ext, b_ext;

  static StBlockParams zeros(const BlockShape& shape);
  static const std::vector<std::string>& field_names();
  std::vector<Tensor*> fields();
  std::vector<const Tensor*> fields() const;
};

struct StBlockVars {
  Var w_in, w_g, w_t, w_pred, b_pred, w_ext, b_ext;
};

StBlockVars bind_block(ad::Tape& tape, const StBlockParams& p, bool tracked);

struct BlockOutput {
  Var backcast;  // [B, T, N, F]
  Var forecast;  // [B, N, F]
};

/// D^{-1/2} (A + I) D^{-1/2} with D the row sums of A + I; differentiable in A.
Var normalized_adjacency(Var a);

BlockOutput st_block_forward(Var x, Var a_k, const StBlockVars& block);

struct DlnOutput {
  Var y_hat;
  std::vector<Var> forecasts;
  std::vector<Var> backcasts;
  Var final_residual;
};

/// Block 1 reads x; block k reads X_{k-1} - X̂_{k-1}; y_hat = Σ_k Ŷ_k.
DlnOutput dln_forward(Var x, std::span<const Var> subgraph_adjs, std::span<const StBlockVars> blocks);

/// ‖X_K‖₁ averaged over the batch.
Var residual_loss(Var final_residual);
/// ‖Ŷ - X^{(t+1)}‖₁ averaged over the batch.
Var prediction_loss(Var y_hat, Var target);

/// One block on the undecomposed adjacency, forecast head only.
Var monolithic_forward(Var x, Var a, const StBlockVars& block);

// ---- model container --------------------------------------------------------

enum class Variant { stgdl, monolithic, ted };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ModelConfig {
  Variant variant = Variant::stgdl;
  std::size_t k = 3;
  std::size_t nodes = 0;
  BlockShape block;
};

/// Everything needed to run a trained model: configuration, the original
/// adjacency, the learnable masks (stgdl), fixed subgraphs (ted), block
/// parameters, and the affine normalization applied to signals.
struct DlnModel {
  ModelConfig config;
  agd::MaskSet mask_set;
  std::vector<Tensor> fixed_subgraphs;
  std::vector<StBlockParams> blocks;
  double norm_mean = 0.0;
  double norm_scale = 1.0;

  struct ParamRef {
    std::string name;
    Tensor* value;
    bool agd;
  };
  /// Trainable parameters: AGD masks first, then block fields in block order.
  std::vector<ParamRef> parameters();
  std::size_t parameter_count() const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) block weights, zero masks.
DlnModel init_model(const ModelConfig& config, const Tensor& adjacency, std::uint64_t seed);

/// A model placed on a tape.
struct BoundModel {
  std::vector<Var> params;  // same order as DlnModel::parameters()
  std::vector<Var> masks;
  Var base;
  std::vector<Var> subgraphs;  // Ã_k, fixed A_k, or {A}
  std::vector<StBlockVars> blocks;
};

BoundModel bind_model(ad::Tape& tape, DlnModel& model, bool tracked);

struct ModelOutput {
  Var y_hat;
  DlnOutput dln;  // empty for the monolithic variant
};

ModelOutput model_forward(const DlnModel& model, const BoundModel& bound, Var x);

/// Forecast for raw (unnormalized) windows [B, T, N, F] → [B, N, F].
Tensor predict(DlnModel& model, const Tensor& windows);

}  // namespace stgdl::dln
