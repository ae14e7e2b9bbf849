#include "stgdl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kernels_detail.hpp"
#include "stgdl/errors.hpp"

namespace stgdl::kernels {

namespace detail {

void check_gemm(const GemmArgs& g) {
  if (g.a.size() != g.m * g.k || g.b.size() != g.k * g.n || g.c.size() != g.m * g.n)
    throw ShapeError("gemm: buffer sizes do not match m, n, k");
}

GemmArgs pack_operands(const GemmArgs& g, std::vector<double>& a_buf, std::vector<double>& b_buf) {
  GemmArgs out = g;
  if (g.trans_a == Trans::yes) {
    a_buf.resize(g.m * g.k);
    for (std::size_t p = 0; p < g.k; ++p)
      for (std::size_t i = 0; i < g.m; ++i) a_buf[i * g.k + p] = g.a[p * g.m + i];
    out.a = a_buf;
    out.trans_a = Trans::no;
  }
  if (g.trans_b == Trans::yes) {
    b_buf.resize(g.k * g.n);
    for (std::size_t j = 0; j < g.n; ++j)
      for (std::size_t p = 0; p < g.k; ++p) b_buf[p * g.n + j] = g.b[j * g.k + p];
    out.b = b_buf;
    out.trans_b = Trans::no;
  }
  return out;
}

double dtw_rows(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw DomainError("dtw: series must be nonempty");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(y.size() + 1, inf), cur(y.size() + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const double best = std::min({prev[j - 1], prev[j], cur[j - 1]});
      cur[j] = best + std::abs(x[i - 1] - y[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

void check_pairwise(const PairwiseDtwArgs& args) {
  const std::size_t n = args.series.size();
  if (args.out.size() != n * n) throw ShapeError("pairwise_dtw: output must be N×N");
  for (const auto& s : args.series)
    if (s.size() != args.series.front().size())
      throw ShapeError("pairwise_dtw: series lengths differ");
}

PermutePlan plan_permute(std::span<const std::size_t> in_shape,
                         std::span<const std::size_t> perm) {
  const std::size_t r = in_shape.size();
  if (perm.size() != r) throw ShapeError("permute: permutation rank mismatch");
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t d = r; d-- > 1;) in_stride[d - 1] = in_stride[d] * in_shape[d];
  PermutePlan plan;
  plan.out_shape.resize(r);
  plan.src_stride.resize(r);
  std::vector<bool> seen(r, false);
  for (std::size_t d = 0; d < r; ++d) {
    if (perm[d] >= r || seen[perm[d]]) throw ShapeError("permute: invalid permutation");
    seen[perm[d]] = true;
    plan.out_shape[d] = in_shape[perm[d]];
    plan.src_stride[d] = in_stride[perm[d]];
    plan.total *= plan.out_shape[d];
  }
  return plan;
}

// Copies the contiguous block of output rows [first, last) along axis 0.
void permute_rows(const PermutePlan& plan, std::span<const double> in, std::span<double> out,
                  std::size_t first, std::size_t last) {
  const std::size_t r = plan.out_shape.size();
  if (r == 0) {
    out[0] = in[0];
    return;
  }
  const std::size_t row_len = plan.total / plan.out_shape[0];
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t row = first; row < last; ++row) {
    std::fill(idx.begin(), idx.end(), 0);
    std::size_t src = row * plan.src_stride[0];
    double* dst = out.data() + row * row_len;
    for (std::size_t e = 0; e < row_len; ++e) {
      dst[e] = in[src];
      for (std::size_t d = r; d-- > 1;) {
        ++idx[d];
        src += plan.src_stride[d];
        if (idx[d] < plan.out_shape[d]) break;
        src -= idx[d] * plan.src_stride[d];
        idx[d] = 0;
      }
    }
  }
}

}  // namespace detail

namespace serial {

void gemm(const GemmArgs& args) {
  detail::check_gemm(args);
  std::vector<double> a_buf, b_buf;
  const GemmArgs g = detail::pack_operands(args, a_buf, b_buf);
  for (std::size_t i = 0; i < g.m; ++i) detail::gemm_row(g, i);
}

double dtw(std::span<const double> x, std::span<const double> y) { return detail::dtw_rows(x, y); }

void pairwise_dtw(const PairwiseDtwArgs& args) {
  detail::check_pairwise(args);
  const std::size_t n = args.series.size();
  for (std::size_t i = 0; i < n; ++i) {
    args.out[i * n + i] = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = detail::dtw_rows(args.series[i], args.series[j]);
      args.out[i * n + j] = d;
      args.out[j * n + i] = d;
    }
  }
}

void permute(std::span<const double> in, std::span<const std::size_t> in_shape,
             std::span<const std::size_t> perm, std::span<double> out) {
  const auto plan = detail::plan_permute(in_shape, perm);
  if (in.size() != plan.total || out.size() != plan.total)
    throw ShapeError("permute: buffer size mismatch");
  if (plan.total == 0) return;
  detail::permute_rows(plan, in, out, 0, plan.out_shape.empty() ? 1 : plan.out_shape[0]);
}

}  // namespace serial

}  // namespace stgdl::kernels
