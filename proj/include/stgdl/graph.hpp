#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stgdl/autodiff.hpp"

namespace stgdl::graph {

using ad::Tensor;
using Edge = std::pair<std::size_t, std::size_t>;

/// G = (V, E, A) with a nonnegative N×N weighted adjacency. Self-loops are
/// never part of E: the diagonal is cleared on construction. E holds ordered
/// pairs, so an undirected edge contributes (i, j) and (j, i).
class Graph {
 public:
  Graph() = default;
  explicit Graph(Tensor adjacency);

  std::size_t n_nodes() const noexcept { return n_; }
  const Tensor& adjacency() const noexcept { return adjacency_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  bool has_edge(std::size_t i, std::size_t j) const { return i != j && adjacency_.at(i, j) > 0.0; }
  /// Number of distinct neighbours (in or out).
  std::size_t degree(std::size_t v) const;
  bool symmetric() const;

 private:
  std::size_t n_ = 0;
  Tensor adjacency_;
  std::vector<Edge> edges_;
};

enum class Origin { learned, ted, ground_truth };

std::string to_string(Origin origin);
Origin origin_from_string(const std::string& s);

/// K hard subgraph adjacencies {A_k} over the node set of an original graph.
struct Decomposition {
  std::vector<Tensor> subgraphs;
  Origin origin = Origin::learned;

  std::size_t k_factors() const noexcept { return subgraphs.size(); }
  std::size_t n_nodes() const { return subgraphs.empty() ? 0 : subgraphs.front().dim(0); }
  /// Off-diagonal support size of A_k.
  std::size_t edge_count(std::size_t k) const;
  /// Problem scale B_P of subgraph k: nodes touched by at least one of its edges.
  std::size_t node_count(std::size_t k) const;
};

double dtw_distance(std::span<const double> x, std::span<const double> y);

/// Binary adjacency: a_ij = 1 when dtw(x_i, x_j) <= r and i != j.
Graph build_adjacency_dtw(std::span<const std::vector<double>> series_per_node, double r);

/// w_ij = exp(-d_ij² / sigma²), kept when w_ij >= epsilon and i != j.
Graph build_adjacency_gaussian(const Tensor& pairwise_dist, double sigma, double epsilon);

/// Edges of g missing from the union of the subgraph edge sets.
std::size_t check_completeness(const Decomposition& d, const Graph& g);

/// Sum over unordered subgraph pairs of the number of shared edges.
std::size_t check_independence(const Decomposition& d);

/// Degree-based hashing: every edge goes to subgraph (v* mod K), v* being its
/// endpoint of lower degree (ties broken by smaller id).
Decomposition ted_decompose(const Graph& g, std::size_t k);

}  // namespace stgdl::graph
