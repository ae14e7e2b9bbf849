#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "stgdl/data.hpp"
#include "stgdl/errors.hpp"
#include "stgdl/theory.hpp"

using namespace stgdl;
using ad::Shape;
using ad::Tensor;
using data::SplitTag;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("stgdl_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

data::SyntheticConfig small_config(std::uint64_t seed) {
  data::SyntheticConfig c;
  c.nodes = 10;
  c.factors = 3;
  c.steps = 120;
  c.window = 4;
  c.edge_prob = 0.4;
  c.seed = seed;
  return c;
}

Tensor ramp_signals(std::size_t tau, std::size_t n) {
  Tensor s(Shape{tau, n, 1});
  for (std::size_t t = 0; t < tau; ++t)
    for (std::size_t i = 0; i < n; ++i) s[t * n + i] = static_cast<double>(t) + 0.01 * i;
  return s;
}

}  // namespace

TEST_CASE("synthetic generation is deterministic per seed") {
  auto cfg = small_config(5);
  cfg.noise_std = 0.0;
  cfg.factors = 1;
  const auto a = data::generate_synthetic(cfg);
  const auto b = data::generate_synthetic(cfg);
  CHECK(a.signals == b.signals);
  CHECK(a.graph.adjacency() == b.graph.adjacency());

  auto noisy = small_config(5);
  const auto c = data::generate_synthetic(noisy);
  const auto d = data::generate_synthetic(noisy);
  CHECK(c.signals == d.signals);
  noisy.seed = 6;
  CHECK_FALSE(data::generate_synthetic(noisy).signals == c.signals);
}

TEST_CASE("synthetic ground truth is an exact decomposition") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = small_config(seed);
    cfg.features = 1 + seed % 2;
    const auto ds = data::generate_synthetic(cfg);
    REQUIRE(ds.ground_truth.has_value());
    const auto& gt = *ds.ground_truth;
    CHECK(gt.decomposition.k_factors() == cfg.factors);
    CHECK(graph::check_completeness(gt.decomposition, ds.graph) == 0);
    CHECK(graph::check_independence(gt.decomposition) == 0);
    CHECK(ds.signals.shape() == Shape{cfg.steps, cfg.nodes, cfg.features});
    for (std::size_t i = 0; i < ds.signals.size(); ++i) {
      double s = 0.0;
      for (const auto& f : gt.factor_signals) s += f[i];
      CHECK(std::abs(s - ds.signals[i]) <= 1e-9);
    }
    CHECK(ds.meta.k == cfg.factors);
    CHECK(ds.meta.seed == seed);
  }
}

TEST_CASE("synthetic generation rejects infeasible configurations") {
  auto cfg = small_config(1);
  cfg.nodes = 2;
  cfg.factors = 3;
  CHECK_THROWS_AS(data::generate_synthetic(cfg), DomainError);
  cfg = small_config(1);
  cfg.steps = 8;
  CHECK_THROWS_AS(data::generate_synthetic(cfg), DomainError);
  cfg = small_config(1);
  cfg.edge_prob = 0.0;
  CHECK_THROWS_AS(data::generate_synthetic(cfg), DomainError);
  cfg = small_config(1);
  cfg.nodes = 3;
  cfg.factors = 3;
  cfg.edge_prob = 0.01;
  CHECK_THROWS_AS(data::generate_synthetic(cfg), DomainError);
}

TEST_CASE("quantized factors are individually less entropic than the mixture") {
  data::SyntheticConfig cfg;
  cfg.seed = 2;
  cfg.steps = 600;
  const auto ds = data::generate_synthetic(cfg);
  std::vector<std::vector<double>> factors;
  for (std::size_t k = 0; k < cfg.factors; ++k) factors.push_back(ds.flat_series(k));
  const auto r = theory::bounds_report(factors, 10);
  for (const auto& f : r.factors) CHECK(f.entropy < r.mixture.entropy);
}

TEST_CASE("sliding window examples") {
  const Tensor s = ramp_signals(10, 2);
  const auto w = data::sliding_windows(s, 3);
  REQUIRE(w.size() == 7);
  CHECK(w.input_times(0) == std::vector<std::size_t>{0, 1, 2});
  CHECK(w.target_time(0) == 3);
  CHECK(w.input(0).shape() == Shape{3, 2, 1});
  CHECK(w.input(0)[0] == 0.0);
  CHECK(w.input(0)[4] == 2.0);
  CHECK(w.target(0)[0] == 3.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto times = w.input_times(i);
    for (std::size_t j = 0; j < times.size(); ++j) CHECK(times[j] == i + j);
    CHECK(w.target_time(i) == times.back() + 1);
  }

  CHECK(data::sliding_windows(ramp_signals(4, 2), 3).size() == 1);
  CHECK_THROWS_AS(data::sliding_windows(ramp_signals(3, 2), 3), DomainError);

  const std::size_t idx[] = {4, 1};
  const Tensor bi = w.batch_inputs(idx);
  CHECK(bi.shape() == Shape{2, 3, 2, 1});
  CHECK(bi[0] == 4.0);
  CHECK(bi[6] == 1.0);
  CHECK(w.batch_targets(idx).shape() == Shape{2, 2, 1});
}

TEST_CASE("windowing disjoint halves never crosses the boundary") {
  const Tensor s = ramp_signals(20, 1);
  Tensor first(Shape{10, 1, 1}), second(Shape{10, 1, 1});
  for (std::size_t t = 0; t < 10; ++t) {
    first[t] = s[t];
    second[t] = s[10 + t];
  }
  const auto a = data::sliding_windows(first, 3), b = data::sliding_windows(second, 3);
  CHECK(a.size() + b.size() == 14);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.target(i)[0] < 10.0);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(b.input(i)[0] >= 10.0);
}

TEST_CASE("long-range context windows") {
  const Tensor s = ramp_signals(40, 1);
  data::WindowOptions o;
  o.window = 2;
  o.period = 10;
  o.periods = 2;
  const auto w = data::sliding_windows(s, o);
  REQUIRE(w.size() == 40 - o.history());
  // Target 22: recent steps 20,21; context ending 10 and 20 steps earlier.
  CHECK(w.target_time(0) == 22);
  CHECK(w.input_times(0) == std::vector<std::size_t>{0, 1, 10, 11, 20, 21});
  CHECK(w.input(0).shape() == Shape{6, 1, 1});
}

TEST_CASE("chronological split examples") {
  const auto ten = data::split(data::sliding_windows(ramp_signals(13, 1), 3));
  CHECK(ten.train.size() == 7);
  CHECK(ten.val.size() == 1);
  CHECK(ten.test.size() == 2);

  const auto hundred = data::split(data::sliding_windows(ramp_signals(103, 1), 3));
  CHECK(hundred.train.size() == 70);
  CHECK(hundred.val.size() == 10);
  CHECK(hundred.test.size() == 20);
  CHECK(hundred.train.tag() == SplitTag::train);
  CHECK(hundred.test.tag() == SplitTag::test);

  std::size_t last_train = 0;
  for (std::size_t i = 0; i < hundred.train.size(); ++i) last_train = std::max(last_train, hundred.train.target_time(i));
  for (std::size_t i = 0; i < hundred.val.size(); ++i) CHECK(hundred.val.target_time(i) > last_train);
  for (std::size_t i = 0; i < hundred.test.size(); ++i) {
    CHECK(hundred.test.target_time(i) > last_train);
    for (std::size_t j = 0; j < hundred.val.size(); ++j) CHECK(hundred.test.target_time(i) > hundred.val.target_time(j));
  }

  CHECK_THROWS_AS(data::split(data::sliding_windows(ramp_signals(8, 1), 3)), DomainError);
  CHECK(data::split_from_string("val") == SplitTag::val);
  CHECK(data::to_string(SplitTag::all) == "all");
}

TEST_CASE("dataset save/load round trip is bit-exact") {
  TempDir dir("roundtrip");
  auto cfg = small_config(9);
  cfg.features = 2;
  const auto ds = data::generate_synthetic(cfg);
  data::save_dataset(ds, dir.path);
  CHECK(fs::exists(dir.path / "meta.json"));
  CHECK(fs::exists(dir.path / "adjacency.csv"));
  CHECK(fs::exists(dir.path / "signals.csv"));
  CHECK(fs::exists(dir.path / "factor_0" / "signals.csv"));

  const auto back = data::load_dataset(dir.path);
  CHECK(back.signals == ds.signals);
  CHECK(back.graph.adjacency() == ds.graph.adjacency());
  CHECK(back.meta.name == ds.meta.name);
  CHECK(back.meta.tau == ds.meta.tau);
  CHECK(back.meta.nodes == ds.meta.nodes);
  CHECK(back.meta.features == ds.meta.features);
  CHECK(back.meta.k == ds.meta.k);
  CHECK(back.meta.seed == ds.meta.seed);
  REQUIRE(back.ground_truth.has_value());
  for (std::size_t k = 0; k < cfg.factors; ++k) {
    CHECK(back.ground_truth->factor_signals[k] == ds.ground_truth->factor_signals[k]);
    CHECK(back.ground_truth->decomposition.subgraphs[k] == ds.ground_truth->decomposition.subgraphs[k]);
  }
}

TEST_CASE("dataset without ground truth loads with it absent") {
  TempDir dir("nogt");
  auto ds = data::generate_synthetic(small_config(3));
  ds.ground_truth.reset();
  ds.meta.k.reset();
  data::save_dataset(ds, dir.path);
  CHECK_FALSE(fs::exists(dir.path / "factor_0"));
  const auto back = data::load_dataset(dir.path);
  CHECK_FALSE(back.ground_truth.has_value());
  CHECK(back.signals == ds.signals);
}

TEST_CASE("malformed or missing files raise parse errors naming the file") {
  TempDir dir("broken");
  data::save_dataset(data::generate_synthetic(small_config(4)), dir.path);
  fs::remove(dir.path / "adjacency.csv");
  try {
    data::load_dataset(dir.path);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.file().find("adjacency.csv") != std::string::npos);
  }

  TempDir bad("badcsv");
  data::save_dataset(data::generate_synthetic(small_config(4)), bad.path);
  {
    std::ofstream out(bad.path / "signals.csv");
    out << "1.0,2.0\nnot-a-number,3\n";
  }
  try {
    data::load_dataset(bad.path);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.file().find("signals.csv") != std::string::npos);
    CHECK(e.line() > 0);
  }

  CHECK_THROWS_AS(data::load_dataset(dir.path / "nope"), ParseError);
}
