#include "stgdl/agd.hpp"

#include <cmath>

#include "stgdl/errors.hpp"
#include "stgdl/kernels.hpp"

namespace stgdl::agd {

MaskSet MaskSet::zeros(const Tensor& base, std::size_t k) {
  if (base.rank() != 2 || base.dim(0) != base.dim(1)) throw ShapeError("mask set: base must be square");
  MaskSet m;
  m.base = base;
  m.masks.assign(k, Tensor(base.shape(), 0.0));
  return m;
}

Var psi1(Var x) { return ad::affine(ad::tanh(x), 0.5, 0.5); }

Var psi2(Var x) { return ad::affine(ad::tanh(ad::affine(x, 4.0, -2.0)), 0.5, 0.5); }

double psi1(double x) { return 0.5 * kernels::tanh(x) + 0.5; }

double psi2(double x) { return 0.5 * kernels::tanh(4.0 * x - 2.0) + 0.5; }

std::vector<Var> masked_subgraphs(std::span<const Var> masks, Var base) {
  std::vector<Var> out;
  out.reserve(masks.size());
  for (const Var& m : masks) {
    if (m.shape() != base.shape())
      throw ShapeError("masked_subgraphs: mask " + ad::to_string(m.shape()) + " vs adjacency " +
                       ad::to_string(base.shape()));
    out.push_back(ad::hadamard(psi1(m), base));
  }
  return out;
}

Var completeness_loss(std::span<const Var> soft_adjs, Var base) {
  if (soft_adjs.empty()) throw DomainError("completeness_loss: no subgraphs");
  Var recon = soft_adjs[0];
  for (std::size_t k = 1; k < soft_adjs.size(); ++k) recon = ad::add(recon, soft_adjs[k]);
  return ad::l1(ad::sub(psi2(base), psi2(recon)));
}

Var independence_loss(std::span<const Var> soft_adjs, bool* degenerate) {
  const std::size_t k = soft_adjs.size();
  if (degenerate) *degenerate = k < 2;
  if (k < 2) {
    if (k == 0) throw DomainError("independence_loss: no subgraphs");
    return soft_adjs[0].tape()->constant(Tensor::scalar(0.0));
  }
  // A_jᵀA_k = (A_kᵀA_j)ᵀ, so each unordered pair is computed once and
  // counted twice.
  std::vector<Var> transposed;
  for (const Var& a : soft_adjs) transposed.push_back(ad::transpose(a));
  Var total;
  bool first = true;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      Var term = ad::l1(ad::matmul(transposed[a], soft_adjs[b]));
      total = first ? term : ad::add(total, term);
      first = false;
    }
  }
  return ad::scale(total, 2.0 / static_cast<double>(k * (k - 1)));
}

graph::Decomposition harden(const MaskSet& m, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("harden: tau must lie in (0, 1)");
  const std::size_t k = m.k_factors();
  const std::size_t n = m.base.dim(0);
  graph::Decomposition d;
  d.origin = graph::Origin::learned;
  d.subgraphs.assign(k, Tensor(m.base.shape(), 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = m.base.at(i, j);
      if (i == j || a <= 0.0 || k == 0) continue;
      std::size_t best = 0;
      double best_ratio = psi1(m.masks[0].at(i, j));
      for (std::size_t c = 1; c < k; ++c) {
        const double r = psi1(m.masks[c].at(i, j));
        if (r > best_ratio) {
          best_ratio = r;
          best = c;
        }
      }
      if (best_ratio >= tau) d.subgraphs[best].at(i, j) = a;
    }
  }
  return d;
}

std::vector<Tensor> soft_subgraphs(const MaskSet& m) {
  std::vector<Tensor> out;
  for (const auto& mask : m.masks) {
    Tensor s(m.base.shape());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = psi1(mask[i]) * m.base[i];
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace stgdl::agd
