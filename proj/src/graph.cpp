#include "stgdl/graph.hpp"

#include <cmath>

#include "stgdl/errors.hpp"
#include "stgdl/kernels.hpp"

namespace stgdl::graph {

Graph::Graph(Tensor adjacency) : adjacency_(std::move(adjacency)) {
  if (adjacency_.rank() != 2 || adjacency_.dim(0) != adjacency_.dim(1) || adjacency_.dim(0) == 0)
    throw ShapeError("graph: adjacency must be a nonempty square matrix, got " +
                     ad::to_string(adjacency_.shape()));
  n_ = adjacency_.dim(0);
  for (double v : adjacency_.values())
    if (!std::isfinite(v) || v < 0.0) throw DomainError("graph: adjacency entries must be finite and >= 0");
  for (std::size_t i = 0; i < n_; ++i) {
    adjacency_.at(i, i) = 0.0;
    for (std::size_t j = 0; j < n_; ++j)
      if (i != j && adjacency_.at(i, j) > 0.0) edges_.emplace_back(i, j);
  }
}

std::size_t Graph::degree(std::size_t v) const {
  std::size_t d = 0;
  for (std::size_t u = 0; u < n_; ++u)
    if (u != v && (adjacency_.at(v, u) > 0.0 || adjacency_.at(u, v) > 0.0)) ++d;
  return d;
}

bool Graph::symmetric() const {
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j)
      if (adjacency_.at(i, j) != adjacency_.at(j, i)) return false;
  return true;
}

std::string to_string(Origin origin) {
  switch (origin) {
    case Origin::learned: return "learned";
    case Origin::ted: return "ted";
    case Origin::ground_truth: return "ground_truth";
  }
  return "unknown";
}

Origin origin_from_string(const std::string& s) {
  if (s == "learned") return Origin::learned;
  if (s == "ted") return Origin::ted;
  if (s == "ground_truth") return Origin::ground_truth;
  throw DomainError("unknown decomposition origin '" + s + "'");
}

std::size_t Decomposition::edge_count(std::size_t k) const {
  const Tensor& a = subgraphs.at(k);
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j)
      if (i != j && a.at(i, j) > 0.0) ++count;
  return count;
}

std::size_t Decomposition::node_count(std::size_t k) const {
  const Tensor& a = subgraphs.at(k);
  const std::size_t n = a.dim(0);
  std::vector<bool> touched(n, false);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && a.at(i, j) > 0.0) touched[i] = touched[j] = true;
  std::size_t count = 0;
  for (bool t : touched) count += t;
  return count;
}

double dtw_distance(std::span<const double> x, std::span<const double> y) {
  return kernels::serial::dtw(x, y);
}

Graph build_adjacency_dtw(std::span<const std::vector<double>> series_per_node, double r) {
  if (!(r > 0.0)) throw DomainError("build_adjacency_dtw: threshold must be positive");
  const std::size_t n = series_per_node.size();
  if (n == 0) throw ShapeError("build_adjacency_dtw: no series");
  Tensor dist(ad::Shape{n, n});
  kernels::pairwise_dtw({series_per_node, dist.values()});
  Tensor adj(ad::Shape{n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) adj.at(i, j) = (i != j && dist.at(i, j) <= r) ? 1.0 : 0.0;
  return Graph(std::move(adj));
}

Graph build_adjacency_gaussian(const Tensor& pairwise_dist, double sigma, double epsilon) {
  if (pairwise_dist.rank() != 2 || pairwise_dist.dim(0) != pairwise_dist.dim(1))
    throw ShapeError("build_adjacency_gaussian: distances must be a square matrix");
  if (!(sigma > 0.0)) throw DomainError("build_adjacency_gaussian: sigma must be positive");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw DomainError("build_adjacency_gaussian: epsilon must lie in [0, 1)");
  const std::size_t n = pairwise_dist.dim(0);
  Tensor adj(ad::Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) {
    if (pairwise_dist.at(i, i) != 0.0) throw DomainError("build_adjacency_gaussian: diagonal must be zero");
    for (std::size_t j = 0; j < n; ++j) {
      if (pairwise_dist.at(i, j) != pairwise_dist.at(j, i))
        throw DomainError("build_adjacency_gaussian: distances are not symmetric");
      if (i == j) continue;
      const double d = pairwise_dist.at(i, j);
      const double w = std::exp(-(d * d) / (sigma * sigma));
      adj.at(i, j) = w >= epsilon ? w : 0.0;
    }
  }
  return Graph(std::move(adj));
}

std::size_t check_completeness(const Decomposition& d, const Graph& g) {
  for (const auto& a : d.subgraphs)
    if (a.shape() != g.adjacency().shape())
      throw ShapeError("check_completeness: subgraph shape " + ad::to_string(a.shape()) +
                       " does not match graph " + ad::to_string(g.adjacency().shape()));
  std::size_t missing = 0;
  for (const auto& [i, j] : g.edges()) {
    bool covered = false;
    for (const auto& a : d.subgraphs) covered = covered || a.at(i, j) > 0.0;
    if (!covered) ++missing;
  }
  return missing;
}

std::size_t check_independence(const Decomposition& d) {
  const std::size_t k = d.k_factors();
  std::size_t overlap = 0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      const Tensor& x = d.subgraphs[a];
      const Tensor& y = d.subgraphs[b];
      if (x.shape() != y.shape()) throw ShapeError("check_independence: subgraph shapes differ");
      for (std::size_t i = 0; i < x.dim(0); ++i)
        for (std::size_t j = 0; j < x.dim(1); ++j)
          if (i != j && x.at(i, j) > 0.0 && y.at(i, j) > 0.0) ++overlap;
    }
  }
  return overlap;
}

Decomposition ted_decompose(const Graph& g, std::size_t k) {
  if (k == 0) throw DomainError("ted_decompose: K must be >= 1");
  const std::size_t n = g.n_nodes();
  std::vector<std::size_t> degree(n);
  for (std::size_t v = 0; v < n; ++v) degree[v] = g.degree(v);
  Decomposition d;
  d.origin = Origin::ted;
  d.subgraphs.assign(k, Tensor(ad::Shape{n, n}));
  for (const auto& [i, j] : g.edges()) {
    const std::size_t lo = std::min(i, j), hi = std::max(i, j);
    const std::size_t pivot = degree[hi] < degree[lo] ? hi : lo;
    d.subgraphs[pivot % k].at(i, j) = g.adjacency().at(i, j);
  }
  return d;
}

}  // namespace stgdl::graph
