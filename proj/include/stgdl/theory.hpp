#pragma once

// Entropy, Fano predictability and error lower bounds for decomposed
// prediction. All entropies are in bits.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace stgdl::theory {

struct DiscreteDistribution {
  std::vector<double> support;
  std::vector<double> probs;

  /// Throws DomainError unless probs are nonnegative, sum to 1 within 1e-12,
  /// and support values are distinct.
  void validate() const;
  double mean() const;
  /// Population variance.
  double variance() const;
};

/// Joint probability table over K discrete variables, row-major over
/// `extents` (variable 0 slowest).
struct JointDistribution {
  std::vector<std::size_t> extents;
  std::vector<double> probs;

  std::vector<double> marginal(std::size_t k) const;
  /// True when every other variable is a function of variable k, i.e.
  /// H(X_others | X_k) = 0.
  bool determines_others(std::size_t k) const;
};

/// Equal-width bins over [min, max]; the maximum falls in the top bin and a
/// constant series maps to state 0.
std::vector<int> quantize(std::span<const double> series, int m);

struct BinEdges {
  double lo = 0.0;
  double hi = 0.0;
  int m = 0;
};
BinEdges bin_edges(std::span<const double> series, int m);

double entropy(std::span<const double> probs);
double entropy(const DiscreteDistribution& d);
double entropy(std::span<const int> states);
double joint_entropy(std::span<const std::vector<int>> sequences);
double joint_entropy(const JointDistribution& d);

/// S(π) = H(π) + (1 - π) log2(M - 1).
double fano_entropy(double pi, int m);
/// Inverts S(π) on [1/M, 1] by bisection to |Δπ| < 1e-10.
double fano_pi_max(double s, int m);
double error_rate_lower_bound(double s, int m);

/// Σ_i Σ_j p_i p_j (x_j - x_i)² by full enumeration.
double expected_sq_diff_oracle(const DiscreteDistribution& d);

/// 2 e_k σ_k²
double elbo_single(double e_k, double var_k);

struct FactorBounds {
  double entropy = 0.0;
  double pi_max = 0.0;
  double error_rate = 0.0;
  double variance = 0.0;
  double elbo = 0.0;
  BinEdges bins;
};

struct TheoryReport {
  int states = 0;
  std::vector<FactorBounds> factors;
  FactorBounds mixture;  // elbo field unused
  double sum_factor_variance = 0.0;
  double variance_gap = 0.0;  // σ² - Σσ_k²
  double e_d = 0.0;           // Σ ELBO_k
  double e_o = 0.0;           // 2 e σ²

  /// Flat key=value block, one key per line.
  std::string to_key_value(bool per_factor = true) const;
  /// Header row plus one row per factor and a final "mixture" row.
  std::string to_csv() const;
};

/// Mixture = elementwise sum of the factor series. Entropies come from each
/// series quantized into its own M equal-width bins; variances from the raw
/// values.
TheoryReport bounds_report(std::span<const std::vector<double>> factor_series, int m);

/// Bounds for a single series (no factors known).
FactorBounds series_bounds(std::span<const double> series, int m);

}  // namespace stgdl::theory
