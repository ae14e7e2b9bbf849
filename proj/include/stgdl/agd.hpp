#pragma once

// Automatic graph decomposition: learnable masks M_k turn the base adjacency
// A into K soft subgraphs Ã_k = ψ1(M_k) ⊙ A, trained under a completeness and
// an independence regularizer.

#include <span>
#include <vector>

#include "stgdl/autodiff.hpp"
#include "stgdl/graph.hpp"

namespace stgdl::agd {

using ad::Tensor;
using ad::Var;

/// Mask values plus the untracked base adjacency they scale.
struct MaskSet {
  std::vector<Tensor> masks;
  Tensor base;

  /// K zero masks (edge ratio 0.5 everywhere).
  static MaskSet zeros(const Tensor& base, std::size_t k);
  std::size_t k_factors() const noexcept { return masks.size(); }
};

/// (tanh(x) + 1) / 2
Var psi1(Var x);
/// (tanh(4(x - 0.5)) + 1) / 2
Var psi2(Var x);

double psi1(double x);
double psi2(double x);

std::vector<Var> masked_subgraphs(std::span<const Var> masks, Var base);

/// ‖ψ2(A) - ψ2(Σ_k Ã_k)‖₁ over the full N×N grid.
Var completeness_loss(std::span<const Var> soft_adjs, Var base);

/// (1 / (K(K-1))) Σ_k Σ_{j≠k} ‖Ã_kᵀ Ã_j‖₁. With K < 2 the loss is a zero
/// constant and `degenerate` (when given) is set.
Var independence_loss(std::span<const Var> soft_adjs, bool* degenerate = nullptr);

/// Hard decomposition: edge (i, j) of A goes to k = argmax_k ψ1(m_kij)
/// (smallest k on ties) when that ratio is at least tau, otherwise it is
/// dropped.
graph::Decomposition harden(const MaskSet& masks, double tau = 0.5);

/// Soft adjacencies as plain values.
std::vector<Tensor> soft_subgraphs(const MaskSet& masks);

}  // namespace stgdl::agd
