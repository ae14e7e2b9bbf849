#include "stgdl/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"
#include "stgdl/errors.hpp"
#include "stgdl/io.hpp"
#include "stgdl/rng.hpp"

namespace stgdl::data {

namespace fs = std::filesystem;
using ad::Shape;

namespace {

// Distinct seasonal periods, cycled when K exceeds the list.
constexpr std::size_t kPeriods[] = {24, 10, 37, 16, 53, 7, 29, 44, 13, 61};

Tensor normalized_with_self_loops(const Tensor& a) {
  const std::size_t n = a.dim(0);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 1.0;
    for (std::size_t j = 0; j < n; ++j) d += a.at(i, j);
    s[i] = 1.0 / std::sqrt(d);
  }
  Tensor out(a.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = s[i] * (a.at(i, j) + (i == j ? 1.0 : 0.0)) * s[j];
  return out;
}

Tensor signals_from_matrix(const Tensor& m, std::size_t nodes, std::size_t features, const fs::path& file) {
  if (m.dim(1) != nodes * features)
    throw ParseError(file.string(), 0,
                     "expected " + std::to_string(nodes * features) + " columns, found " + std::to_string(m.dim(1)));
  return m.reshaped(Shape{m.dim(0), nodes, features});
}

}  // namespace

std::vector<double> Dataset::flat_series(std::optional<std::size_t> k) const {
  const Tensor& t = k ? ground_truth.value().factor_signals.at(*k) : signals;
  return {t.values().begin(), t.values().end()};
}

Dataset generate_synthetic(const SyntheticConfig& cfg) {
  const std::size_t n = cfg.nodes, k = cfg.factors, tau = cfg.steps, f = cfg.features;
  if (k < 1 || n < k) throw DomainError("generate_synthetic: need N >= K >= 1");
  if (tau <= 2 * cfg.window) throw DomainError("generate_synthetic: need τ > 2T");
  if (!(cfg.edge_prob > 0.0 && cfg.edge_prob <= 1.0)) throw DomainError("generate_synthetic: edge_prob must lie in (0, 1]");
  if (!(cfg.cross_prob >= 0.0 && cfg.cross_prob <= 1.0)) throw DomainError("generate_synthetic: cross_prob must lie in [0, 1]");
  if (!(cfg.noise_std >= 0.0)) throw DomainError("generate_synthetic: noise_std must be >= 0");
  if (f < 1) throw DomainError("generate_synthetic: need F >= 1");

  Rng rng(cfg.seed);

  // Nodes fall into K equal-share communities; factor c owns the edges inside
  // community c, and each cross edge goes to one of its endpoints' factors.
  std::vector<std::size_t> community(n);
  for (std::size_t i = 0; i < n; ++i) community[i] = i % k;
  rng.shuffle(std::span<std::size_t>(community));

  std::vector<graph::Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < (community[i] == community[j] ? cfg.edge_prob : cfg.cross_prob)) edges.emplace_back(i, j);
  if (edges.size() < k)
    throw DomainError("generate_synthetic: graph has " + std::to_string(edges.size()) + " edges, cannot split into " +
                      std::to_string(k) + " factors");

  std::vector<std::size_t> owner(edges.size());
  std::vector<std::size_t> owned(k, 0);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    owner[e] = community[i] == community[j] || rng.uniform() < 0.5 ? community[i] : community[j];
    ++owned[owner[e]];
  }
  // A factor left without edges takes one from the currently largest factor.
  for (std::size_t c = 0; c < k; ++c) {
    if (owned[c] > 0) continue;
    const auto donor = static_cast<std::size_t>(std::max_element(owned.begin(), owned.end()) - owned.begin());
    std::vector<std::size_t> candidates;
    for (std::size_t e = 0; e < edges.size(); ++e)
      if (owner[e] == donor) candidates.push_back(e);
    const std::size_t moved = candidates[static_cast<std::size_t>(rng.below(candidates.size()))];
    owner[moved] = c;
    --owned[donor];
    ++owned[c];
  }

  std::vector<Tensor> factor_adj(k, Tensor(Shape{n, n}));
  Tensor adjacency(Shape{n, n});
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    factor_adj[owner[e]].at(i, j) = factor_adj[owner[e]].at(j, i) = 1.0;
    adjacency.at(i, j) = adjacency.at(j, i) = 1.0;
  }

  Dataset d;
  d.graph = graph::Graph(adjacency);
  d.signals = Tensor(Shape{tau, n, f});
  GroundTruth gt;
  gt.decomposition.origin = graph::Origin::ground_truth;
  gt.decomposition.subgraphs = factor_adj;

  for (std::size_t c = 0; c < k; ++c) {
    const Tensor a_norm = normalized_with_self_loops(factor_adj[c]);
    std::vector<bool> active(n, false);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (factor_adj[c].at(i, j) > 0.0) active[i] = true;

    const double period = static_cast<double>(kPeriods[c % std::size(kPeriods)]) * (1.0 + static_cast<double>(c / std::size(kPeriods)));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<double> amplitude(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (active[i]) amplitude[i] = rng.uniform(0.5, 1.5);

    Tensor x(Shape{n, f}), next(Shape{n, f});
    Tensor out(Shape{tau, n, f});
    for (std::size_t step = 0; step < cfg.burn_in + tau; ++step) {
      const double t = static_cast<double>(step);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ch = 0; ch < f; ++ch) {
          double v = 0.0;
          for (std::size_t j = 0; j < n; ++j) v += a_norm.at(i, j) * x.at(j, ch);
          v *= cfg.rho;
          if (active[i]) {
            const double season =
                amplitude[i] * std::sin(2.0 * std::numbers::pi * t / period + phase + static_cast<double>(ch) * std::numbers::pi / 4.0);
            v += season + (cfg.noise_std > 0.0 ? rng.normal(0.0, cfg.noise_std) : 0.0);
          }
          next.at(i, ch) = v;
        }
      }
      std::swap(x, next);
      if (step >= cfg.burn_in) {
        const std::size_t row = step - cfg.burn_in;
        for (std::size_t e = 0; e < n * f; ++e) out[row * n * f + e] = x[e];
      }
    }
    for (std::size_t e = 0; e < out.size(); ++e) d.signals[e] += out[e];
    gt.factor_signals.push_back(std::move(out));
  }

  d.ground_truth = std::move(gt);
  d.meta.name = "synthetic";
  d.meta.tau = tau;
  d.meta.nodes = n;
  d.meta.features = f;
  d.meta.k = k;
  d.meta.seed = cfg.seed;
  return d;
}

// ---- windows ------------------------------------------------------------------

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::all: return "all";
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
  }
  return "unknown";
}

SplitTag split_from_string(const std::string& s) {
  if (s == "train") return SplitTag::train;
  if (s == "val") return SplitTag::val;
  if (s == "test") return SplitTag::test;
  if (s == "all") return SplitTag::all;
  throw DomainError("unknown split '" + s + "'");
}

SampleSet::SampleSet(std::shared_ptr<const Tensor> signals, WindowOptions opts, std::vector<std::size_t> targets,
                     SplitTag tag)
    : signals_(std::move(signals)), opts_(opts), targets_(std::move(targets)), tag_(tag) {}

std::vector<std::size_t> SampleSet::input_times(std::size_t i) const {
  const std::size_t target = targets_.at(i);
  std::vector<std::size_t> times;
  times.reserve(opts_.input_length());
  for (std::size_t p = opts_.periods; p >= 1; --p) {
    const std::size_t end = target - p * opts_.period;
    for (std::size_t s = end - opts_.window; s < end; ++s) times.push_back(s);
  }
  for (std::size_t s = target - opts_.window; s < target; ++s) times.push_back(s);
  return times;
}

Tensor SampleSet::input(std::size_t i) const {
  const std::size_t idx[] = {i};
  Tensor b = batch_inputs(idx);
  Shape s(b.shape().begin() + 1, b.shape().end());
  return b.reshaped(std::move(s));
}

Tensor SampleSet::target(std::size_t i) const {
  const std::size_t idx[] = {i};
  Tensor b = batch_targets(idx);
  return b.reshaped(Shape{b.dim(1), b.dim(2)});
}

Tensor SampleSet::batch_inputs(std::span<const std::size_t> idx) const {
  const Tensor& sig = *signals_;
  const std::size_t frame = sig.dim(1) * sig.dim(2);
  const std::size_t len = opts_.input_length();
  Tensor out(Shape{idx.size(), len, sig.dim(1), sig.dim(2)});
  double* dst = out.data();
  for (std::size_t b : idx)
    for (std::size_t t : input_times(b)) {
      std::copy_n(sig.data() + t * frame, frame, dst);
      dst += frame;
    }
  return out;
}

Tensor SampleSet::batch_targets(std::span<const std::size_t> idx) const {
  const Tensor& sig = *signals_;
  const std::size_t frame = sig.dim(1) * sig.dim(2);
  Tensor out(Shape{idx.size(), sig.dim(1), sig.dim(2)});
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy_n(sig.data() + targets_.at(idx[r]) * frame, frame, out.data() + r * frame);
  return out;
}

SampleSet SampleSet::subset(std::size_t first, std::size_t count, SplitTag tag) const {
  if (first + count > targets_.size()) throw std::out_of_range("sample subset out of range");
  return SampleSet(signals_, opts_,
                   std::vector<std::size_t>(targets_.begin() + static_cast<std::ptrdiff_t>(first),
                                            targets_.begin() + static_cast<std::ptrdiff_t>(first + count)),
                   tag);
}

SampleSet sliding_windows(const Tensor& signals, std::size_t window) {
  return sliding_windows(signals, WindowOptions{window, 0, 0});
}

SampleSet sliding_windows(const Tensor& signals, const WindowOptions& opts) {
  if (signals.rank() != 3) throw ShapeError("sliding_windows: signals must be [τ, N, F]");
  if (opts.window == 0) throw DomainError("sliding_windows: window must be positive");
  if (opts.periods > 0 && opts.period < opts.window)
    throw DomainError("sliding_windows: period must be at least the window");
  const std::size_t tau = signals.dim(0);
  const std::size_t history = opts.history();
  if (tau < history + 1)
    throw DomainError("sliding_windows: τ = " + std::to_string(tau) + " is too short for " + std::to_string(history) +
                      " steps of history");
  std::vector<std::size_t> targets;
  for (std::size_t t = history; t < tau; ++t) targets.push_back(t);
  return SampleSet(std::make_shared<const Tensor>(signals), opts, std::move(targets));
}

Splits split(const SampleSet& samples, double train_ratio, double val_ratio) {
  const std::size_t n = samples.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(val_ratio * static_cast<double>(n)));
  if (n_train < 1 || n_val < 1 || n_train + n_val >= n)
    throw DomainError("split: " + std::to_string(n) + " samples are too few for a train/val/test split");
  return Splits{samples.subset(0, n_train, SplitTag::train), samples.subset(n_train, n_val, SplitTag::val),
                samples.subset(n_train + n_val, n - n_train - n_val, SplitTag::test)};
}

// ---- persistence ---------------------------------------------------------------

void save_dataset(const Dataset& d, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json meta = {{"name", d.meta.name},
                         {"tau", d.meta.tau},
                         {"N", d.meta.nodes},
                         {"F", d.meta.features},
                         {"interval", d.meta.interval}};
  if (d.meta.k) meta["K"] = *d.meta.k;
  if (d.meta.seed) meta["seed"] = *d.meta.seed;
  io::write_text(dir / "meta.json", meta.dump(2) + "\n");
  io::write_matrix_csv(dir / "adjacency.csv", d.graph.adjacency());
  const std::size_t tau = d.signals.dim(0), nf = d.signals.dim(1) * d.signals.dim(2);
  io::write_matrix_csv(dir / "signals.csv", d.signals.reshaped(Shape{tau, nf}));
  if (d.ground_truth) {
    const auto& gt = *d.ground_truth;
    for (std::size_t k = 0; k < gt.factor_signals.size(); ++k) {
      const fs::path sub = dir / ("factor_" + std::to_string(k));
      io::write_matrix_csv(sub / "adjacency.csv", gt.decomposition.subgraphs.at(k));
      io::write_matrix_csv(sub / "signals.csv", gt.factor_signals[k].reshaped(Shape{tau, nf}));
    }
  }
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_text(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta_path.string(), 0, e.what());
  }
  Dataset d;
  try {
    d.meta.name = meta.value("name", std::string("dataset"));
    d.meta.tau = meta.at("tau").get<std::size_t>();
    d.meta.nodes = meta.at("N").get<std::size_t>();
    d.meta.features = meta.value("F", std::size_t{1});
    d.meta.interval = meta.value("interval", std::string("step"));
    if (meta.contains("K")) d.meta.k = meta["K"].get<std::size_t>();
    if (meta.contains("seed")) d.meta.seed = meta["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta_path.string(), 0, e.what());
  }
  const std::size_t n = d.meta.nodes, f = d.meta.features;

  auto read_adjacency = [&](const fs::path& p) {
    Tensor a = io::read_matrix_csv(p);
    if (a.dim(0) != n || a.dim(1) != n) throw ParseError(p.string(), 0, "adjacency must be " + std::to_string(n) + "×" + std::to_string(n));
    return a;
  };
  auto read_signals = [&](const fs::path& p) {
    Tensor s = signals_from_matrix(io::read_matrix_csv(p), n, f, p);
    if (s.dim(0) != d.meta.tau) throw ParseError(p.string(), 0, "expected " + std::to_string(d.meta.tau) + " rows");
    return s;
  };

  d.graph = graph::Graph(read_adjacency(dir / "adjacency.csv"));
  d.signals = read_signals(dir / "signals.csv");

  if (fs::exists(dir / "factor_0")) {
    GroundTruth gt;
    gt.decomposition.origin = graph::Origin::ground_truth;
    for (std::size_t k = 0; fs::exists(dir / ("factor_" + std::to_string(k))); ++k) {
      const fs::path sub = dir / ("factor_" + std::to_string(k));
      gt.decomposition.subgraphs.push_back(read_adjacency(sub / "adjacency.csv"));
      gt.factor_signals.push_back(read_signals(sub / "signals.csv"));
    }
    d.ground_truth = std::move(gt);
  }
  return d;
}

}  // namespace stgdl::data
