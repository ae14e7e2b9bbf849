#include <doctest.h>

#include <cmath>
#include <numeric>

#include "stgdl/data.hpp"
#include "stgdl/errors.hpp"
#include "stgdl/rng.hpp"
#include "stgdl/theory.hpp"

using namespace stgdl;
using namespace stgdl::theory;

namespace {

// S(π) written out directly in bits.
double fano_forward(double pi, int m) {
  auto h = [](double p) { return p <= 0.0 || p >= 1.0 ? 0.0 : -(p * std::log2(p) + (1 - p) * std::log2(1 - p)); };
  return h(pi) + (1.0 - pi) * std::log2(static_cast<double>(m - 1));
}

DiscreteDistribution random_distribution(Rng& rng, std::size_t n) {
  DiscreteDistribution d;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d.support.push_back(static_cast<double>(i) * rng.uniform(0.5, 1.5) + rng.uniform(-0.1, 0.1) + 10.0 * i);
    d.probs.push_back(rng.uniform(0.01, 1.0));
    total += d.probs.back();
  }
  for (double& p : d.probs) p /= total;
  // Renormalize the last entry so the sum is 1 to machine precision.
  d.probs.back() = 1.0 - std::accumulate(d.probs.begin(), d.probs.end() - 1, 0.0);
  return d;
}

}  // namespace

TEST_CASE("quantize examples") {
  const std::vector<double> constant = {2, 2, 2};
  CHECK(quantize(constant, 4) == std::vector<int>{0, 0, 0});
  const std::vector<double> ramp = {0, 1, 2, 3};
  CHECK(quantize(ramp, 4) == std::vector<int>{0, 1, 2, 3});
  CHECK_THROWS_AS(quantize(ramp, 1), DomainError);

  Rng rng(4);
  std::vector<double> xs(200);
  for (double& x : xs) x = rng.normal();
  const auto q = quantize(xs, 7);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(q[i] >= 0);
    CHECK(q[i] < 7);
    for (std::size_t j = 0; j < xs.size(); ++j)
      if (xs[i] <= xs[j]) CHECK(q[i] <= q[j]);
  }
}

TEST_CASE("entropy examples") {
  CHECK(entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(entropy(std::vector<double>{1.0, 0.0}) == 0.0);
  CHECK(entropy(std::vector<double>{0.5, 0.25, 0.25}) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(entropy(std::vector<int>{3, 1, 3, 1}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(entropy(std::vector<double>{0.5, 0.6}), DomainError);
  CHECK_THROWS_AS(entropy(std::vector<double>{1.5, -0.5}), DomainError);

  const DiscreteDistribution dup{{1.0, 1.0}, {0.5, 0.5}};
  CHECK_THROWS_AS(dup.validate(), DomainError);
}

TEST_CASE("joint entropy examples") {
  const std::vector<int> s = {0, 1, 1, 2, 0, 2, 2, 1};
  const std::vector<std::vector<int>> copies = {s, s, s};
  CHECK(joint_entropy(copies) == doctest::Approx(entropy(s)).epsilon(1e-15));

  const std::vector<std::vector<int>> bits = {{0, 0, 1, 1}, {0, 1, 0, 1}};
  CHECK(joint_entropy(bits) == doctest::Approx(2.0).epsilon(1e-15));

  const std::vector<std::vector<int>> ragged = {{0, 1}, {0}};
  CHECK_THROWS(joint_entropy(ragged));
}

TEST_CASE("joint entropy dominates every marginal on sampled joints") {
  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    JointDistribution d;
    const std::size_t k = 2 + rng.below(2);
    std::size_t cells = 1;
    for (std::size_t i = 0; i < k; ++i) {
      d.extents.push_back(2 + rng.below(3));
      cells *= d.extents.back();
    }
    d.probs.resize(cells);
    double total = 0.0;
    for (double& p : d.probs) {
      p = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
      total += p;
    }
    if (total == 0.0) d.probs[0] = total = 1.0;
    for (double& p : d.probs) p /= total;
    const double s = joint_entropy(d);
    for (std::size_t i = 0; i < k; ++i) {
      const double sk = entropy(d.marginal(i));
      CHECK(sk <= s + 1e-12);
      if (!d.determines_others(i)) CHECK(sk < s);
    }
  }
  // Sequence form: quantized factors and their tuples.
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<int>> seqs(3, std::vector<int>(50));
    for (auto& q : seqs)
      for (int& v : q) v = static_cast<int>(rng.below(4));
    const double s = joint_entropy(seqs);
    for (const auto& q : seqs) CHECK(entropy(q) <= s + 1e-12);
  }
}

TEST_CASE("fano inversion examples and round trip") {
  CHECK(fano_pi_max(0.0, 5) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(fano_pi_max(1.0, 2) - 0.5) < 1e-9);
  CHECK(std::abs(fano_pi_max(fano_forward(0.6, 10), 10) - 0.6) < 1e-9);
  CHECK(fano_entropy(0.6, 10) == doctest::Approx(fano_forward(0.6, 10)).epsilon(1e-15));

  for (int m : {2, 3, 7, 16}) {
    for (int i = 0; i <= 50; ++i) {
      const double pi = 1.0 / m + (1.0 - 1.0 / m) * i / 50.0;
      CHECK(std::abs(fano_pi_max(fano_forward(pi, m), m) - pi) < 1e-9);
    }
  }
  CHECK_THROWS_AS(fano_pi_max(-0.1, 4), DomainError);
  CHECK_THROWS_AS(fano_pi_max(2.01, 4), DomainError);
  CHECK_THROWS_AS(fano_pi_max(0.5, 1), DomainError);
}

TEST_CASE("S(pi) strictly decreases on a 10^4-point grid") {
  for (int m : {2, 4, 10}) {
    const double lo = 1.0 / m;
    double prev = fano_entropy(lo, m);
    for (int i = 1; i < 10000; ++i) {
      const double cur = fano_entropy(lo + (1.0 - lo) * i / 9999.0, m);
      CHECK(cur < prev);
      prev = cur;
    }
  }
}

TEST_CASE("error-rate lower bound examples and monotonicity") {
  CHECK(error_rate_lower_bound(0.0, 6) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(std::abs(error_rate_lower_bound(1.0, 2) - 0.5) < 1e-9);
  const int m = 8;
  double prev = error_rate_lower_bound(0.0, m);
  for (int i = 1; i <= 300; ++i) {
    const double e = error_rate_lower_bound(3.0 * i / 300.0, m);
    CHECK(e >= prev);
    prev = e;
  }
}

TEST_CASE("variance oracle examples and identity") {
  CHECK(expected_sq_diff_oracle({{4.0}, {1.0}}) == 0.0);
  CHECK(expected_sq_diff_oracle({{0.0, 1.0}, {0.5, 0.5}}) == doctest::Approx(0.5).epsilon(1e-15));
  const DiscreteDistribution tri{{0.0, 1.0, 2.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  CHECK(expected_sq_diff_oracle(tri) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));

  Rng rng(27);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = random_distribution(rng, 1 + rng.below(10));
    d.validate();
    CHECK(std::abs(expected_sq_diff_oracle(d) - 2.0 * d.variance()) < 1e-12 * std::max(1.0, d.variance()));
    const double e = rng.uniform();
    CHECK(std::abs(elbo_single(e, d.variance()) - e * expected_sq_diff_oracle(d)) <
          1e-12 * std::max(1.0, d.variance()));
  }
}

TEST_CASE("elbo examples") {
  CHECK(elbo_single(0.0, 3.0) == 0.0);
  CHECK(elbo_single(0.5, 0.25) == 0.25);
  CHECK_THROWS_AS(elbo_single(1.5, 1.0), DomainError);
  CHECK_THROWS_AS(elbo_single(0.5, -1.0), DomainError);
}

TEST_CASE("bounds report: single factor is degenerate") {
  Rng rng(2);
  std::vector<double> s(300);
  for (double& v : s) v = rng.normal();
  const std::vector<std::vector<double>> one = {s};
  const auto r = bounds_report(one, 8);
  CHECK(r.e_d == r.e_o);
  CHECK(r.factors.size() == 1);
}

TEST_CASE("bounds report on synthetic factors") {
  data::SyntheticConfig cfg;
  cfg.nodes = 12;
  cfg.steps = 400;
  cfg.seed = 3;
  const auto ds = data::generate_synthetic(cfg);
  std::vector<std::vector<double>> factors;
  for (std::size_t k = 0; k < cfg.factors; ++k) factors.push_back(ds.flat_series(k));
  const auto r = bounds_report(factors, 10);
  CHECK(r.e_d < r.e_o);

  // Stored aggregates equal their definitions bit-for-bit.
  double e_d = 0.0, sum_var = 0.0;
  for (const auto& f : r.factors) {
    e_d += f.elbo;
    sum_var += f.variance;
    CHECK(f.entropy >= 0.0);
    CHECK(f.pi_max >= 1.0 / 10 - 1e-12);
    CHECK(f.pi_max <= 1.0);
    CHECK(f.elbo == 2.0 * f.error_rate * f.variance);
  }
  CHECK(r.e_d == e_d);
  CHECK(r.e_o == 2.0 * r.mixture.error_rate * r.mixture.variance);
  CHECK(r.sum_factor_variance == sum_var);
  CHECK(r.variance_gap == r.mixture.variance - sum_var);
  CHECK(r.mixture.bins.m == 10);

  const std::string kv = r.to_key_value();
  CHECK(kv.find("E_d=") != std::string::npos);
  CHECK(kv.find("E_o=") != std::string::npos);
  const std::string csv = r.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(cfg.factors) + 2);
}

TEST_CASE("bounds report: duplicated factors share the error rate and flag the variance gap") {
  Rng rng(6);
  std::vector<double> s(500);
  for (double& v : s) v = rng.uniform(-1, 1);
  const std::vector<std::vector<double>> dup = {s, s, s};
  const auto r = bounds_report(dup, 6);
  for (const auto& f : r.factors) CHECK(f.error_rate == doctest::Approx(r.mixture.error_rate).epsilon(1e-9));
  CHECK(std::abs(r.variance_gap) > 1e-3);
}
