#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "stgdl/kernels.hpp"

namespace stgdl::kernels::detail {

void check_gemm(const GemmArgs& g);
/// Copies transposed operands into row-major buffers; the result has
/// trans_a == trans_b == Trans::no and views the buffers.
GemmArgs pack_operands(const GemmArgs& g, std::vector<double>& a_buf, std::vector<double>& b_buf);
/// Row of a packed product with a compile-time output width; the output stays
/// in registers across the p loop.
template <std::size_t N>
inline void gemm_row_fixed(const double* a_row, const double* b, double* c_row, std::size_t k, bool accumulate) {
  double acc[N];
  for (std::size_t j = 0; j < N; ++j) acc[j] = accumulate ? c_row[j] : 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double a_ip = a_row[p];
    const double* b_row = b + p * N;
    for (std::size_t j = 0; j < N; ++j) acc[j] += a_ip * b_row[j];
  }
  for (std::size_t j = 0; j < N; ++j) c_row[j] = acc[j];
}

/// Row i of a packed product. Shared by the serial and OpenMP kernels so both
/// accumulate every element in the same order (ascending p, starting from 0 or
/// the existing output).
inline void gemm_row(const GemmArgs& g, std::size_t i) {
  double* c_row = g.c.data() + i * g.n;
  const double* a_row = g.a.data() + i * g.k;
  const double* b = g.b.data();
  switch (g.n) {
#define STGDL_FIXED_ROW(N) \
  case N:                  \
    return gemm_row_fixed<N>(a_row, b, c_row, g.k, g.accumulate);
    STGDL_FIXED_ROW(1)
    STGDL_FIXED_ROW(2)
    STGDL_FIXED_ROW(3)
    STGDL_FIXED_ROW(4)
    STGDL_FIXED_ROW(5)
    STGDL_FIXED_ROW(6)
    STGDL_FIXED_ROW(7)
    STGDL_FIXED_ROW(8)
    STGDL_FIXED_ROW(9)
    STGDL_FIXED_ROW(10)
    STGDL_FIXED_ROW(11)
    STGDL_FIXED_ROW(12)
    STGDL_FIXED_ROW(13)
    STGDL_FIXED_ROW(14)
    STGDL_FIXED_ROW(15)
    STGDL_FIXED_ROW(16)
#undef STGDL_FIXED_ROW
    default:
      break;
  }
  if (!g.accumulate) std::fill(c_row, c_row + g.n, 0.0);
  for (std::size_t p = 0; p < g.k; ++p) {
    const double a_ip = a_row[p];
    const double* b_row = b + p * g.n;
    for (std::size_t j = 0; j < g.n; ++j) c_row[j] += a_ip * b_row[j];
  }
}
double dtw_rows(std::span<const double> x, std::span<const double> y);
void check_pairwise(const PairwiseDtwArgs& args);

struct PermutePlan {
  std::vector<std::size_t> out_shape;
  std::vector<std::size_t> src_stride;  // input stride of each output axis
  std::size_t total = 1;
};

PermutePlan plan_permute(std::span<const std::size_t> in_shape,
                         std::span<const std::size_t> perm);
void permute_rows(const PermutePlan& plan, std::span<const double> in, std::span<double> out,
                  std::size_t first, std::size_t last);

}  // namespace stgdl::kernels::detail
