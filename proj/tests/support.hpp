#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "stgdl/autodiff.hpp"
#include "stgdl/rng.hpp"

namespace stgdl::testing {

using ad::Shape;
using ad::Tensor;
using ad::Var;

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

struct Composite {
  ad::ScalarFn fn;
  std::vector<Tensor> params;
};

/// A random scalar expression touching every op kind: matmul, matmul_last,
/// mix, transpose, reshape, permute, add, sub, hadamard, tanh, scale, affine,
/// sum, mean, l1.
/// Shapes, constants and the order of the binary ops vary with the draw.
inline Composite random_composite(Rng& rng) {
  const std::size_t m = 1 + rng.below(4), k = 1 + rng.below(4), n = 1 + rng.below(4);
  Composite c;
  const std::size_t q = 1 + rng.below(3);
  c.params = {random_tensor(rng, {m, k}), random_tensor(rng, {k, n}), random_tensor(rng, {m, n}),
              random_tensor(rng, {n, q}), random_tensor(rng, {m, m})};
  const double s = rng.uniform(-2.0, 2.0);
  const double a = rng.uniform(0.2, 1.5), b = rng.uniform(-0.5, 0.5);
  const double l1_shift = rng.uniform(0.6, 1.2);
  const std::size_t order = rng.below(3);
  std::vector<std::size_t> perm = {0, 1, 2};
  rng.shuffle(std::span<std::size_t>(perm));

  c.fn = [=](ad::Tape&, std::span<const Var> p) {
    Var x = ad::matmul(p[0], p[1]);  // [m, n]
    Var y;
    switch (order) {
      case 0:
        y = ad::hadamard(ad::add(x, p[2]), ad::sub(p[2], x));
        break;
      case 1:
        y = ad::add(ad::hadamard(x, p[2]), ad::sub(x, p[2]));
        break;
      default:
        y = ad::sub(ad::hadamard(p[2], p[2]), ad::add(x, x));
        break;
    }
    Var z = ad::tanh(ad::affine(ad::scale(y, s), a, b));
    Var t = ad::transpose(z);                                  // [n, m]
    Var r = ad::permute(ad::reshape(t, {n, 1, m}), perm);      // rank 3
    Var back = ad::reshape(r, {m, n});
    Var pos = ad::affine(ad::tanh(back), 0.5, l1_shift);  // stays away from the kink of |.|
    Var mixed = ad::mix(p[4], ad::matmul_last(ad::reshape(back, {m, 1, n}), p[3]), 0);  // [m, 1, q]
    return ad::add(ad::add(ad::sum(ad::hadamard(back, back)), ad::mean(z)),
                   ad::add(ad::l1(pos), ad::mean(ad::tanh(mixed))));
  };
  return c;
}

}  // namespace stgdl::testing
