#include "stgdl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "stgdl/errors.hpp"

namespace stgdl::theory {

namespace {

double plogp(double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; }

void write_bounds(std::ostream& os, const std::string& prefix, const FactorBounds& b, bool with_elbo) {
  os << prefix << "entropy=" << b.entropy << '\n'
     << prefix << "pi_max=" << b.pi_max << '\n'
     << prefix << "error_rate=" << b.error_rate << '\n'
     << prefix << "variance=" << b.variance << '\n'
     << prefix << "bin_lo=" << b.bins.lo << '\n'
     << prefix << "bin_hi=" << b.bins.hi << '\n';
  if (with_elbo) os << prefix << "elbo=" << b.elbo << '\n';
}

}  // namespace

void DiscreteDistribution::validate() const {
  if (support.size() != probs.size() || support.empty())
    throw DomainError("distribution: support and probabilities must be nonempty and aligned");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("distribution: probabilities must be finite and >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("distribution: probabilities do not sum to 1");
  std::vector<double> sorted = support;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw DomainError("distribution: support values must be distinct");
}

double DiscreteDistribution::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) m += probs[i] * support[i];
  return m;
}

double DiscreteDistribution::variance() const {
  const double mu = mean();
  double v = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) v += probs[i] * (support[i] - mu) * (support[i] - mu);
  return v;
}

std::vector<double> JointDistribution::marginal(std::size_t k) const {
  if (k >= extents.size()) throw DomainError("marginal: variable index out of range");
  std::size_t inner = 1;
  for (std::size_t d = k + 1; d < extents.size(); ++d) inner *= extents[d];
  std::vector<double> m(extents[k], 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) m[(i / inner) % extents[k]] += probs[i];
  return m;
}

bool JointDistribution::determines_others(std::size_t k) const {
  std::size_t inner = 1;
  for (std::size_t d = k + 1; d < extents.size(); ++d) inner *= extents[d];
  // For each value of X_k, at most one cell with positive mass.
  std::vector<int> cells(extents.at(k), 0);
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0 && ++cells[(i / inner) % extents[k]] > 1) return false;
  return true;
}

BinEdges bin_edges(std::span<const double> series, int m) {
  if (m < 2) throw DomainError("quantize: M must be >= 2");
  if (series.empty()) throw DomainError("quantize: series is empty");
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  return BinEdges{*lo, *hi, m};
}

std::vector<int> quantize(std::span<const double> series, int m) {
  const BinEdges edges = bin_edges(series, m);
  std::vector<int> states(series.size(), 0);
  const double width = edges.hi - edges.lo;
  if (!(width > 0.0)) return states;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto s = static_cast<int>(std::floor((series[i] - edges.lo) / width * m));
    states[i] = std::clamp(s, 0, m - 1);
  }
  return states;
}

double entropy(std::span<const double> probs) {
  double total = 0.0, h = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("entropy: invalid probability");
    total += p;
    h += plogp(p);
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("entropy: probabilities do not sum to 1");
  return h;
}

double entropy(const DiscreteDistribution& d) {
  d.validate();
  return entropy(std::span<const double>(d.probs));
}

double entropy(std::span<const int> states) {
  if (states.empty()) throw DomainError("entropy: empty state sequence");
  std::map<int, std::size_t> counts;
  for (int s : states) ++counts[s];
  const double n = static_cast<double>(states.size());
  double h = 0.0;
  for (const auto& [state, c] : counts) h += plogp(static_cast<double>(c) / n);
  return h;
}

double joint_entropy(std::span<const std::vector<int>> sequences) {
  if (sequences.empty()) throw DomainError("joint_entropy: no sequences");
  const std::size_t len = sequences.front().size();
  if (len == 0) throw DomainError("joint_entropy: empty sequences");
  for (const auto& s : sequences)
    if (s.size() != len) throw ShapeError("joint_entropy: sequence lengths differ");
  std::map<std::vector<int>, std::size_t> counts;
  std::vector<int> tuple(sequences.size());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t k = 0; k < sequences.size(); ++k) tuple[k] = sequences[k][t];
    ++counts[tuple];
  }
  double h = 0.0;
  for (const auto& [key, c] : counts) h += plogp(static_cast<double>(c) / static_cast<double>(len));
  return h;
}

double joint_entropy(const JointDistribution& d) {
  std::size_t cells = 1;
  for (auto e : d.extents) cells *= e;
  if (cells != d.probs.size()) throw ShapeError("joint_entropy: table size does not match extents");
  return entropy(std::span<const double>(d.probs));
}

double fano_entropy(double pi, int m) {
  if (m < 2) throw DomainError("fano: M must be >= 2");
  return plogp(pi) + plogp(1.0 - pi) + (1.0 - pi) * std::log2(static_cast<double>(m - 1));
}

double fano_pi_max(double s, int m) {
  if (m < 2) throw DomainError("fano_pi_max: M must be >= 2");
  const double s_max = std::log2(static_cast<double>(m));
  if (!(s >= -1e-12 && s <= s_max + 1e-12))
    throw DomainError("fano_pi_max: entropy " + std::to_string(s) + " outside [0, log2 M]");
  if (s <= 0.0) return 1.0;
  // S is flat at its maximum; values within rounding of log2 M map to the endpoint.
  if (s >= s_max * (1.0 - 8.0 * std::numeric_limits<double>::epsilon())) return 1.0 / m;
  // S(π) decreases strictly on [1/M, 1].
  double lo = 1.0 / m, hi = 1.0;
  for (int iter = 0; iter < 200 && hi - lo >= 1e-10; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (fano_entropy(mid, m) > s)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double error_rate_lower_bound(double s, int m) { return 1.0 - fano_pi_max(s, m); }

double expected_sq_diff_oracle(const DiscreteDistribution& d) {
  double total = 0.0;
  for (std::size_t i = 0; i < d.probs.size(); ++i)
    for (std::size_t j = 0; j < d.probs.size(); ++j) {
      const double diff = d.support[j] - d.support[i];
      total += d.probs[i] * d.probs[j] * diff * diff;
    }
  return total;
}

double elbo_single(double e_k, double var_k) {
  if (!(e_k >= 0.0 && e_k <= 1.0)) throw DomainError("elbo_single: error rate must lie in [0, 1]");
  if (!(var_k >= 0.0)) throw DomainError("elbo_single: variance must be >= 0");
  return 2.0 * e_k * var_k;
}

FactorBounds series_bounds(std::span<const double> series, int m) {
  FactorBounds b;
  b.bins = bin_edges(series, m);
  const std::vector<int> states = quantize(series, m);
  b.entropy = entropy(std::span<const int>(states));
  b.pi_max = fano_pi_max(b.entropy, m);
  b.error_rate = 1.0 - b.pi_max;
  const double n = static_cast<double>(series.size());
  const double mu = std::accumulate(series.begin(), series.end(), 0.0) / n;
  double v = 0.0;
  for (double x : series) v += (x - mu) * (x - mu);
  b.variance = v / n;
  return b;
}

TheoryReport bounds_report(std::span<const std::vector<double>> factor_series, int m) {
  if (factor_series.empty()) throw DomainError("bounds_report: no factor series");
  const std::size_t len = factor_series.front().size();
  for (const auto& s : factor_series)
    if (s.size() != len) throw ShapeError("bounds_report: factor series lengths differ");

  TheoryReport r;
  r.states = m;
  std::vector<double> mixture(len, 0.0);
  for (const auto& s : factor_series) {
    for (std::size_t i = 0; i < len; ++i) mixture[i] += s[i];
    FactorBounds b = series_bounds(s, m);
    b.elbo = elbo_single(b.error_rate, b.variance);
    r.sum_factor_variance += b.variance;
    r.e_d += b.elbo;
    r.factors.push_back(b);
  }
  r.mixture = series_bounds(mixture, m);
  r.variance_gap = r.mixture.variance - r.sum_factor_variance;
  r.e_o = 2.0 * r.mixture.error_rate * r.mixture.variance;
  return r;
}

std::string TheoryReport::to_key_value(bool per_factor) const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "states=" << states << '\n' << "factors=" << factors.size() << '\n';
  write_bounds(os, "mixture.", mixture, false);
  os << "sum_factor_variance=" << sum_factor_variance << '\n'
     << "variance_gap=" << variance_gap << '\n'
     << "E_d=" << e_d << '\n'
     << "E_o=" << e_o << '\n';
  if (!factors.empty()) os << "E_d_below_E_o=" << (e_d < e_o ? "true" : "false") << '\n';
  if (per_factor)
    for (std::size_t k = 0; k < factors.size(); ++k) write_bounds(os, "factor." + std::to_string(k) + ".", factors[k], true);
  return os.str();
}

std::string TheoryReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "series,entropy,pi_max,error_rate,variance,elbo,bin_lo,bin_hi\n";
  for (std::size_t k = 0; k < factors.size(); ++k) {
    const auto& b = factors[k];
    os << "factor_" << k << ',' << b.entropy << ',' << b.pi_max << ',' << b.error_rate << ',' << b.variance << ','
       << b.elbo << ',' << b.bins.lo << ',' << b.bins.hi << '\n';
  }
  os << "mixture," << mixture.entropy << ',' << mixture.pi_max << ',' << mixture.error_rate << ','
     << mixture.variance << ',' << e_o << ',' << mixture.bins.lo << ',' << mixture.bins.hi << '\n';
  return os.str();
}

}  // namespace stgdl::theory
