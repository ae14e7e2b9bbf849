#include <cstdint>

#include "kernels_detail.hpp"
#include "stgdl/errors.hpp"
#include "stgdl/kernels.hpp"

#ifdef STGDL_HAVE_OPENMP
#include <omp.h>
#endif

namespace stgdl::kernels {

namespace omp {

void gemm(const GemmArgs& args) {
  detail::check_gemm(args);
  std::vector<double> a_buf, b_buf;
  const GemmArgs g = detail::pack_operands(args, a_buf, b_buf);
  const auto m = static_cast<std::int64_t>(g.m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) detail::gemm_row(g, static_cast<std::size_t>(i));
}

void pairwise_dtw(const PairwiseDtwArgs& args) {
  detail::check_pairwise(args);
  const std::size_t n = args.series.size();
  const auto pairs = static_cast<std::int64_t>(n * n);
  // Each (i, j) cell is written by exactly one iteration; the lower triangle
  // is mirrored afterwards.
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t p = 0; p < pairs; ++p) {
    const auto i = static_cast<std::size_t>(p) / n;
    const auto j = static_cast<std::size_t>(p) % n;
    if (j < i) continue;
    args.out[i * n + j] = i == j ? 0.0 : detail::dtw_rows(args.series[i], args.series[j]);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) args.out[i * n + j] = args.out[j * n + i];
}

void permute(std::span<const double> in, std::span<const std::size_t> in_shape,
             std::span<const std::size_t> perm, std::span<double> out) {
  const auto plan = detail::plan_permute(in_shape, perm);
  if (in.size() != plan.total || out.size() != plan.total)
    throw ShapeError("permute: buffer size mismatch");
  if (plan.total == 0) return;
  if (plan.out_shape.empty()) {
    out[0] = in[0];
    return;
  }
  const auto rows = static_cast<std::int64_t>(plan.out_shape[0]);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r)
    detail::permute_rows(plan, in, out, static_cast<std::size_t>(r), static_cast<std::size_t>(r) + 1);
}

}  // namespace omp

bool openmp_enabled() {
#ifdef STGDL_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

namespace {

bool use_threads() {
#ifdef STGDL_HAVE_OPENMP
  return omp_get_max_threads() > 1 && !omp_in_parallel();
#else
  return false;
#endif
}

}  // namespace

void gemm(const GemmArgs& args) {
  if (use_threads() && args.m * args.n * args.k >= kParallelGemmThreshold)
    omp::gemm(args);
  else
    serial::gemm(args);
}

void pairwise_dtw(const PairwiseDtwArgs& args) {
  if (use_threads())
    omp::pairwise_dtw(args);
  else
    serial::pairwise_dtw(args);
}

void permute(std::span<const double> in, std::span<const std::size_t> in_shape,
             std::span<const std::size_t> perm, std::span<double> out) {
  if (use_threads() && in.size() >= kParallelGemmThreshold)
    omp::permute(in, in_shape, perm, out);
  else
    serial::permute(in, in_shape, perm, out);
}

}  // namespace stgdl::kernels
