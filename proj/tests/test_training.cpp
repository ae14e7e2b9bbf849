#include <doctest.h>

#include <cmath>

#include "stgdl/errors.hpp"
#include "stgdl/training.hpp"
#include "support.hpp"

using namespace stgdl;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;
using training::TrainConfig;

namespace {

data::Dataset tiny_dataset(std::uint64_t seed = 1) {
  data::SyntheticConfig c;
  c.nodes = 8;
  c.factors = 2;
  c.steps = 160;
  c.window = 4;
  c.edge_prob = 0.4;
  c.seed = seed;
  return data::generate_synthetic(c);
}

TrainConfig tiny_config(dln::Variant v = dln::Variant::stgdl) {
  TrainConfig c;
  c.variant = v;
  c.k = 2;
  c.window = 4;
  c.hidden = 3;
  c.max_epochs = 4;
  c.patience = 10;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("adam: first step from zero state moves each entry by about lr against the gradient") {
  Tensor p = Tensor::vector({1.0, -2.0, 0.5});
  const Tensor g = Tensor::vector({0.3, -4.0, 1e-3});
  training::AdamState s = training::AdamState::for_params({&p});
  Tensor* params[] = {&p};
  const Tensor* grads[] = {&g};
  training::adam_step(params, grads, s, 0.01);
  CHECK(s.step == 1);
  CHECK(p[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
  CHECK(p[2] == doctest::Approx(0.5 - 0.01).epsilon(1e-4));
}

TEST_CASE("adam: zero gradient leaves parameters unchanged and still advances the step") {
  Tensor p = Tensor::vector({1.0, 2.0});
  const Tensor g(Shape{2});
  training::AdamState s = training::AdamState::for_params({&p});
  Tensor* params[] = {&p};
  const Tensor* grads[] = {&g};
  for (int i = 0; i < 3; ++i) training::adam_step(params, grads, s, 0.1);
  CHECK(p == Tensor::vector({1.0, 2.0}));
  CHECK(s.step == 3);
}

TEST_CASE("adam: identical parameters with identical gradients stay identical") {
  Rng rng(4);
  Tensor a = testing::random_tensor(rng, {3, 2});
  Tensor b = a;
  training::AdamState s = training::AdamState::for_params({&a, &b});
  for (int i = 0; i < 20; ++i) {
    const Tensor g = testing::random_tensor(rng, {3, 2});
    Tensor* params[] = {&a, &b};
    const Tensor* grads[] = {&g, &g};
    training::adam_step(params, grads, s, 0.05);
  }
  CHECK(a == b);
}

TEST_CASE("adam: shape mismatch is rejected") {
  Tensor p = Tensor::vector({1.0, 2.0});
  const Tensor g(Shape{3});
  training::AdamState s = training::AdamState::for_params({&p});
  Tensor* params[] = {&p};
  const Tensor* grads[] = {&g};
  CHECK_THROWS_AS(training::adam_step(params, grads, s, 0.1), ShapeError);
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK_FALSE(c.k_in_search_range());
  c.k = 6;
  CHECK(c.k_in_search_range());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = TrainConfig{};
  c.learning_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = TrainConfig{};
  c.weights.prediction = std::nan("");
  CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("init_params: determinism, zero masks and seed dependence") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  const auto a = training::init_params(ds, cfg);
  const auto b = training::init_params(ds, cfg);
  for (std::size_t k = 0; k < a.blocks.size(); ++k) CHECK(a.blocks[k].w_g == b.blocks[k].w_g);
  for (const auto& m : a.mask_set.masks) CHECK(m == Tensor(m.shape()));

  cfg.seed = 4;
  const auto c = training::init_params(ds, cfg);
  CHECK_FALSE(c.blocks[0].w_g == a.blocks[0].w_g);
  for (std::size_t k = 0; k < a.mask_set.masks.size(); ++k) CHECK(c.mask_set.masks[k] == a.mask_set.masks[k]);

  // Masks at zero: every soft subgraph is A/2.
  Tape tape;
  auto model = a;
  const auto bound = dln::bind_model(tape, model, false);
  for (const Var& s : bound.subgraphs)
    for (std::size_t i = 0; i < s.value().size(); ++i) CHECK(s.value()[i] == ds.graph.adjacency()[i] / 2.0);

  cfg.variant = dln::Variant::ted;
  const auto ted = training::init_params(ds, cfg);
  CHECK(ted.fixed_subgraphs.size() == cfg.k);
  CHECK(ted.mask_set.masks.empty());
}

TEST_CASE("joint loss: weights select terms and mask gradients pass the finite-difference check") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  auto model = training::init_params(ds, cfg);
  Rng rng(8);
  for (auto& m : model.mask_set.masks) m = testing::random_tensor(rng, m.shape(), -1, 1);
  const auto samples = data::sliding_windows(ds.signals, cfg.window);
  const std::size_t idx[] = {0, 5, 9};
  const Tensor x = samples.batch_inputs(idx), y = samples.batch_targets(idx);

  {
    Tape tape;
    const auto bound = dln::bind_model(tape, model, true);
    const auto t = training::joint_loss(model, bound, tape.constant(x), tape.constant(y), {0, 0, 0, 1});
    CHECK(t.joint.value().item() == t.prediction.value().item());
    const auto all = training::joint_loss(model, bound, tape.constant(x), tape.constant(y), {});
    const auto v = training::LossValues::of(all);
    CHECK(v.joint == doctest::Approx(v.completeness + v.independence + v.residual + v.prediction).epsilon(1e-14));
  }

  std::vector<Tensor> masks = model.mask_set.masks;
  const auto r = ad::finite_diff_check(
      [&](Tape& tape, std::span<const Var> p) {
        dln::BoundModel b = dln::bind_model(tape, model, false);
        b.masks.assign(p.begin(), p.end());
        b.subgraphs = agd::masked_subgraphs(b.masks, b.base);
        return training::joint_loss(model, b, tape.constant(x), tape.constant(y), {}).joint;
      },
      masks);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("joint loss: variants without masks contribute zero regularizers") {
  const auto ds = tiny_dataset();
  const std::size_t idx[] = {1, 2};
  const auto samples = data::sliding_windows(ds.signals, 4);
  for (auto v : {dln::Variant::ted, dln::Variant::monolithic}) {
    auto model = training::init_params(ds, tiny_config(v));
    Tape tape;
    const auto bound = dln::bind_model(tape, model, true);
    const auto t = training::LossValues::of(training::joint_loss(
        model, bound, tape.constant(samples.batch_inputs(idx)), tape.constant(samples.batch_targets(idx)), {}));
    CHECK(t.completeness == 0.0);
    CHECK(t.independence == 0.0);
    if (v == dln::Variant::monolithic) CHECK(t.residual == 0.0);
  }
}

TEST_CASE("train: lr = 0 keeps parameters and history flat") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 3;
  const auto r = training::train(ds, cfg);
  const auto init = training::init_params(ds, cfg);
  REQUIRE(r.history.epochs.size() == 3);
  for (const auto& e : r.history.epochs) {
    CHECK(e.val_mae == r.history.epochs[0].val_mae);
    CHECK(e.train.joint == doctest::Approx(r.history.epochs[0].train.joint).epsilon(1e-12));
  }
  for (std::size_t k = 0; k < init.blocks.size(); ++k) CHECK(r.final_model.blocks[k].w_pred == init.blocks[k].w_pred);
  CHECK(r.final_model.mask_set.masks == init.mask_set.masks);
}

TEST_CASE("train: same seed reproduces the history bit-for-bit; prediction loss falls") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  cfg.learning_rate = 0.01;
  cfg.max_epochs = 6;
  const auto a = training::train(ds, cfg);
  const auto b = training::train(ds, cfg);
  CHECK(a.history.to_csv() == b.history.to_csv());
  REQUIRE(a.history.epochs.size() == b.history.epochs.size());
  for (std::size_t i = 0; i < a.history.epochs.size(); ++i) {
    CHECK(a.history.epochs[i].val_mae == b.history.epochs[i].val_mae);
    CHECK(a.history.epochs[i].train.joint == b.history.epochs[i].train.joint);
  }
  CHECK(a.model.blocks[1].w_ext == b.model.blocks[1].w_ext);
  CHECK(a.history.epochs.back().train.prediction < a.history.epochs.front().train.prediction);
  CHECK(a.history.to_csv().rfind("epoch,L_c,L_i,L_r,L_p,L_joint,val_MAE\n", 0) == 0);
}

TEST_CASE("train: best snapshot is never worse than the final model") {
  const auto ds = tiny_dataset(2);
  auto cfg = tiny_config(dln::Variant::ted);
  cfg.learning_rate = 0.05;
  cfg.max_epochs = 8;
  auto r = training::train(ds, cfg);
  const auto splits = data::split(data::sliding_windows(ds.signals, cfg.window));
  const double best = training::evaluate(r.model, splits.val).mae;
  const double last = training::evaluate(r.final_model, splits.val).mae;
  CHECK(best <= last);
  CHECK(best == r.history.best_val_mae);
  double min_val = r.history.epochs[0].val_mae;
  for (const auto& e : r.history.epochs) min_val = std::min(min_val, e.val_mae);
  CHECK(r.history.best_val_mae == min_val);
}

TEST_CASE("train: early stopping fires after exactly patience stale epochs") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config(dln::Variant::monolithic);
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 50;
  cfg.patience = 3;
  const auto r = training::train(ds, cfg);
  CHECK(r.history.early_stopped);
  CHECK(r.history.best_epoch == 1);
  CHECK(r.history.epochs.size() == 1 + cfg.patience);

  // Real training: stopping point sits `patience` epochs after the best one.
  cfg.learning_rate = 0.05;
  cfg.patience = 2;
  const auto s = training::train(ds, cfg);
  if (s.history.early_stopped) {
    CHECK(s.history.epochs.size() == s.history.best_epoch + cfg.patience);
  } else {
    CHECK(s.history.epochs.size() == cfg.max_epochs);
  }
}

TEST_CASE("train: epoch callback sees every record; divergence is reported") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config(dln::Variant::monolithic);
  cfg.max_epochs = 2;
  std::vector<std::size_t> seen;
  training::train(ds, cfg, [&](const training::EpochRecord& e) { seen.push_back(e.epoch); });
  CHECK(seen == std::vector<std::size_t>{1, 2});

  auto wild = cfg;
  wild.learning_rate = 1e308;
  try {
    training::train(ds, wild);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() >= 1);
    CHECK_FALSE(e.term().empty());
  }

  auto blown = ds;
  blown.signals[0] = 1e300;
  CHECK_THROWS_AS(training::train(blown, cfg), DomainError);
}

TEST_CASE("evaluate_losses and evaluate agree on the scale of the data") {
  const auto ds = tiny_dataset();
  auto cfg = tiny_config();
  auto model = training::init_params(ds, cfg);
  const auto samples = data::sliding_windows(ds.signals, cfg.window);
  const auto full = training::evaluate_losses(model, samples, {}, 1000);
  const auto chunked = training::evaluate_losses(model, samples, {}, 7);
  CHECK(full.prediction == doctest::Approx(chunked.prediction).epsilon(1e-12));
  CHECK(full.residual == doctest::Approx(chunked.residual).epsilon(1e-12));
  const auto m = training::evaluate(model, samples);
  CHECK(m.mae > 0.0);
  CHECK(m.rmse >= m.mae);
}
