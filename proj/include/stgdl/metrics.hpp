#pragma once

#include <optional>

#include "stgdl/autodiff.hpp"

namespace stgdl::metrics {

/// MAE, MAPE (percent) and RMSE. MAPE only averages entries with |truth| >
/// 1e-8 and is absent when there are none.
struct MetricSet {
  double mae = 0.0;
  std::optional<double> mape_percent;
  double rmse = 0.0;
};

inline constexpr double kMapeEpsilon = 1e-8;

MetricSet compute(const ad::Tensor& pred, const ad::Tensor& truth);

/// (base - enhanced) / base × 100 per metric; positive means enhanced is
/// better. MAPE is absent when either side lacks it.
struct Improvement {
  double mae = 0.0;
  std::optional<double> mape_percent;
  double rmse = 0.0;
};

Improvement improvement(const MetricSet& base, const MetricSet& enhanced);

}  // namespace stgdl::metrics
