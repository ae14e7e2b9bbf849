#include "stgdl/metrics.hpp"

#include <cmath>

#include "stgdl/errors.hpp"

namespace stgdl::metrics {

MetricSet compute(const ad::Tensor& pred, const ad::Tensor& truth) {
  if (pred.shape() != truth.shape())
    throw ShapeError("metrics: prediction " + ad::to_string(pred.shape()) + " vs truth " + ad::to_string(truth.shape()));
  if (pred.size() == 0) throw DomainError("metrics: empty prediction set");
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
  std::size_t pct_count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double err = pred[i] - truth[i];
    abs_sum += std::abs(err);
    sq_sum += err * err;
    if (std::abs(truth[i]) > kMapeEpsilon) {
      pct_sum += std::abs(err) / std::abs(truth[i]);
      ++pct_count;
    }
  }
  const double n = static_cast<double>(pred.size());
  MetricSet m;
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  if (pct_count) m.mape_percent = pct_sum / static_cast<double>(pct_count) * 100.0;
  return m;
}

Improvement improvement(const MetricSet& base, const MetricSet& enhanced) {
  if (!(base.mae > 0.0) || !(base.rmse > 0.0)) throw DomainError("improvement: base metrics must be positive");
  Improvement imp;
  imp.mae = (base.mae - enhanced.mae) / base.mae * 100.0;
  imp.rmse = (base.rmse - enhanced.rmse) / base.rmse * 100.0;
  if (base.mape_percent && enhanced.mape_percent) {
    if (!(*base.mape_percent > 0.0)) throw DomainError("improvement: base MAPE must be positive");
    imp.mape_percent = (*base.mape_percent - *enhanced.mape_percent) / *base.mape_percent * 100.0;
  }
  return imp;
}

}  // namespace stgdl::metrics
