#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "stgdl/checkpoint.hpp"
#include "stgdl/errors.hpp"
#include "stgdl/training.hpp"
#include "support.hpp"

using namespace stgdl;
using ad::Tensor;

namespace {

namespace fs = std::filesystem;

dln::DlnModel random_model(dln::Variant v, std::uint64_t seed) {
  data::SyntheticConfig c;
  c.nodes = 7;
  c.factors = 2;
  c.steps = 60;
  c.window = 3;
  c.seed = seed;
  const auto ds = data::generate_synthetic(c);
  training::TrainConfig cfg;
  cfg.variant = v;
  cfg.k = 2;
  cfg.window = 3;
  cfg.hidden = 2;
  cfg.seed = seed;
  auto m = training::init_params(ds, cfg);
  Rng rng(seed);
  for (auto& r : m.parameters())
    for (double& x : r.value->values()) x = rng.normal() * 1e-3 + x / 3.0;
  m.norm_mean = 0.1 + rng.uniform();
  m.norm_scale = 1.0 / 3.0;
  return m;
}

void check_equal(dln::DlnModel& a, dln::DlnModel& b) {
  CHECK(a.config.variant == b.config.variant);
  CHECK(a.config.k == b.config.k);
  CHECK(a.config.nodes == b.config.nodes);
  CHECK(a.config.block.window == b.config.block.window);
  CHECK(a.config.block.features == b.config.block.features);
  CHECK(a.config.block.hidden == b.config.block.hidden);
  CHECK(a.norm_mean == b.norm_mean);
  CHECK(a.norm_scale == b.norm_scale);
  CHECK(a.mask_set.base == b.mask_set.base);
  CHECK(a.fixed_subgraphs == b.fixed_subgraphs);
  const auto pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(*pa[i].value == *pb[i].value);
  }
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact for every variant") {
  const fs::path dir = fs::temp_directory_path() / "stgdl_test_ckpt";
  fs::create_directories(dir);
  for (auto v : {dln::Variant::stgdl, dln::Variant::monolithic, dln::Variant::ted}) {
    auto m = random_model(v, 11);
    auto back = checkpoint::from_json(checkpoint::to_json(m));
    check_equal(m, back);

    const fs::path file = dir / (dln::to_string(v) + ".json");
    checkpoint::save(m, file);
    auto loaded = checkpoint::load(file);
    check_equal(m, loaded);
  }
  fs::remove_all(dir);
}

TEST_CASE("checkpoint keys appear in the documented order") {
  auto m = random_model(dln::Variant::ted, 3);
  const auto j = nlohmann::ordered_json::parse(checkpoint::to_json(m));
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"format", "variant", "k", "nodes", "window", "features", "hidden",
                                         "norm_mean", "norm_scale", "base", "fixed_subgraphs", "params"});
  CHECK(j["format"] == checkpoint::kFormat);
  CHECK(j["params"][0]["name"] == "block.0.w_in");
}

TEST_CASE("malformed checkpoints raise parse errors") {
  auto m = random_model(dln::Variant::stgdl, 5);
  auto j = nlohmann::ordered_json::parse(checkpoint::to_json(m));

  CHECK_THROWS_AS(checkpoint::from_json("{not json"), ParseError);
  CHECK_THROWS_AS(checkpoint::from_json("{}"), ParseError);

  auto wrong_format = j;
  wrong_format["format"] = "other";
  CHECK_THROWS_AS(checkpoint::from_json(wrong_format.dump()), ParseError);

  auto missing = j;
  missing["params"].erase(missing["params"].size() - 1);
  CHECK_THROWS_AS(checkpoint::from_json(missing.dump()), ParseError);

  auto bad_shape = j;
  bad_shape["params"][0]["shape"] = {1, 1};
  bad_shape["params"][0]["values"] = {0.0};
  CHECK_THROWS_AS(checkpoint::from_json(bad_shape.dump()), ParseError);

  auto bad_variant = j;
  bad_variant["variant"] = "gwnet";
  CHECK_THROWS_AS(checkpoint::from_json(bad_variant.dump()), ParseError);

  CHECK_THROWS_AS(checkpoint::load(fs::temp_directory_path() / "stgdl_no_such_checkpoint.json"), ParseError);
}
