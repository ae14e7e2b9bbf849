#include "stgdl/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "stgdl/errors.hpp"
#include "stgdl/io.hpp"
#include "stgdl/rng.hpp"

namespace stgdl::training {

using ad::Shape;

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw DomainError("train config: learning rate must be finite and >= 0");
  if (batch_size == 0) throw DomainError("train config: batch size must be positive");
  if (max_epochs == 0) throw DomainError("train config: max_epochs must be positive");
  if (patience == 0) throw DomainError("train config: patience must be positive");
  if (k == 0) throw DomainError("train config: K must be positive");
  if (window == 0) throw DomainError("train config: window must be positive");
  if (hidden == 0) throw DomainError("train config: hidden width must be positive");
  for (double w : {weights.completeness, weights.independence, weights.residual, weights.prediction})
    if (!(w >= 0.0)) throw DomainError("train config: loss weights must be >= 0");
}

// ---- Adam ---------------------------------------------------------------------

AdamState AdamState::for_params(const std::vector<const Tensor*>& params) {
  AdamState s;
  for (const Tensor* p : params) {
    s.m.emplace_back(p->shape(), 0.0);
    s.v.emplace_back(p->shape(), 0.0);
  }
  return s;
}

void adam_update_range(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& s,
                       double lr, std::size_t first, std::size_t last) {
  if (params.size() != grads.size() || params.size() != s.m.size())
    throw ShapeError("adam: parameter, gradient and state counts differ");
  if (s.step == 0) throw DomainError("adam: step counter must be advanced before updating");
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t p = first; p < last; ++p) {
    Tensor& theta = *params[p];
    const Tensor& g = *grads[p];
    if (theta.shape() != g.shape() || theta.shape() != s.m[p].shape())
      throw ShapeError("adam: shape mismatch for parameter " + std::to_string(p));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      s.m[p][i] = s.beta1 * s.m[p][i] + (1.0 - s.beta1) * g[i];
      s.v[p][i] = s.beta2 * s.v[p][i] + (1.0 - s.beta2) * g[i] * g[i];
      const double m_hat = s.m[p][i] / c1;
      const double v_hat = s.v[p][i] / c2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
  }
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state, double lr) {
  ++state.step;
  adam_update_range(params, grads, state, lr, 0, params.size());
}

// ---- losses -------------------------------------------------------------------

LossValues LossValues::of(const LossTerms& t) {
  return LossValues{t.completeness.value().item(), t.independence.value().item(), t.residual.value().item(),
                    t.prediction.value().item(), t.joint.value().item()};
}

LossTerms joint_loss(const dln::DlnModel& model, const dln::BoundModel& bound, Var x, Var target,
                     const LossWeights& w) {
  ad::Tape& tape = *x.tape();
  auto zero = [&] { return tape.constant(Tensor::scalar(0.0)); };
  const dln::ModelOutput out = dln::model_forward(model, bound, x);

  LossTerms t;
  t.prediction = dln::prediction_loss(out.y_hat, target);
  t.residual = model.config.variant == dln::Variant::monolithic ? zero() : dln::residual_loss(out.dln.final_residual);
  if (model.config.variant == dln::Variant::stgdl) {
    t.completeness = agd::completeness_loss(bound.subgraphs, bound.base);
    t.independence = agd::independence_loss(bound.subgraphs);
  } else {
    t.completeness = zero();
    t.independence = zero();
  }
  t.joint = ad::add(ad::add(ad::scale(t.completeness, w.completeness), ad::scale(t.independence, w.independence)),
                    ad::add(ad::scale(t.residual, w.residual), ad::scale(t.prediction, w.prediction)));
  return t;
}

// ---- helpers ------------------------------------------------------------------

namespace {

void normalize_in_place(Tensor& t, const dln::DlnModel& m) {
  for (double& v : t.values()) v = (v - m.norm_mean) / m.norm_scale;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

void accumulate(LossValues& acc, const LossValues& v, double weight) {
  acc.completeness += weight * v.completeness;
  acc.independence += weight * v.independence;
  acc.residual += weight * v.residual;
  acc.prediction += weight * v.prediction;
  acc.joint += weight * v.joint;
}

const char* first_non_finite(const LossValues& v) {
  if (!std::isfinite(v.completeness)) return "L_c";
  if (!std::isfinite(v.independence)) return "L_i";
  if (!std::isfinite(v.residual)) return "L_r";
  if (!std::isfinite(v.prediction)) return "L_p";
  if (!std::isfinite(v.joint)) return "L_joint";
  return nullptr;
}

}  // namespace

dln::DlnModel init_params(const data::Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  dln::ModelConfig mc;
  mc.variant = cfg.variant;
  mc.k = cfg.k;
  mc.nodes = dataset.graph.n_nodes();
  mc.block = dln::BlockShape{cfg.window, dataset.signals.dim(2), cfg.hidden};
  dln::DlnModel model = dln::init_model(mc, dataset.graph.adjacency(), cfg.seed);
  if (cfg.variant == dln::Variant::ted) model.fixed_subgraphs = graph::ted_decompose(dataset.graph, cfg.k).subgraphs;
  return model;
}

LossValues evaluate_losses(dln::DlnModel& model, const data::SampleSet& samples, const LossWeights& weights,
                           std::size_t batch_size) {
  LossValues total;
  const auto idx = iota_indices(samples.size());
  for (std::size_t first = 0; first < idx.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, idx.size() - first);
    const std::span<const std::size_t> batch(idx.data() + first, count);
    Tensor x = samples.batch_inputs(batch);
    Tensor y = samples.batch_targets(batch);
    normalize_in_place(x, model);
    normalize_in_place(y, model);
    ad::Tape tape;
    const dln::BoundModel bound = dln::bind_model(tape, model, false);
    const LossTerms t = joint_loss(model, bound, tape.constant(std::move(x)), tape.constant(std::move(y)), weights);
    LossValues v = LossValues::of(t);
    // L_c and L_i do not depend on the batch; L_r and L_p are batch means.
    const double w = static_cast<double>(count) / static_cast<double>(idx.size());
    total.completeness = v.completeness;
    total.independence = v.independence;
    total.residual += w * v.residual;
    total.prediction += w * v.prediction;
  }
  total.joint = weights.completeness * total.completeness + weights.independence * total.independence +
                weights.residual * total.residual + weights.prediction * total.prediction;
  return total;
}

metrics::MetricSet evaluate(dln::DlnModel& model, const data::SampleSet& samples, std::size_t batch_size) {
  if (samples.empty()) throw DomainError("evaluate: empty sample set");
  const auto idx = iota_indices(samples.size());
  const std::size_t n = model.config.nodes, f = model.config.block.features;
  Tensor pred(Shape{samples.size(), n, f}), truth(Shape{samples.size(), n, f});
  for (std::size_t first = 0; first < idx.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, idx.size() - first);
    const std::span<const std::size_t> batch(idx.data() + first, count);
    const Tensor p = dln::predict(model, samples.batch_inputs(batch));
    const Tensor y = samples.batch_targets(batch);
    std::copy(p.values().begin(), p.values().end(), pred.data() + first * n * f);
    std::copy(y.values().begin(), y.values().end(), truth.data() + first * n * f);
  }
  return metrics::compute(pred, truth);
}

std::string History::to_csv() const {
  std::ostringstream os;
  os << "epoch,L_c,L_i,L_r,L_p,L_joint,val_MAE\n";
  for (const auto& e : epochs)
    os << e.epoch << ',' << io::format_real(e.train.completeness) << ',' << io::format_real(e.train.independence)
       << ',' << io::format_real(e.train.residual) << ',' << io::format_real(e.train.prediction) << ','
       << io::format_real(e.train.joint) << ',' << io::format_real(e.val_mae) << '\n';
  return os.str();
}

TrainResult train(const data::Dataset& dataset, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  const data::SampleSet all = data::sliding_windows(dataset.signals, cfg.window);
  return train(dataset, data::split(all), cfg, on_epoch);
}

TrainResult train(const data::Dataset& dataset, const data::Splits& splits, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (splits.train.empty() || splits.val.empty()) throw DomainError("train: empty train or validation split");
  if (splits.train.options().input_length() != cfg.window)
    throw DomainError("train: sample window does not match the configured window");

  dln::DlnModel model = init_params(dataset, cfg);

  // Affine normalization from everything the training split can see.
  {
    const Tensor& sig = *splits.train.signals();
    const std::size_t frame = sig.dim(1) * sig.dim(2);
    const std::size_t end = (splits.train.target_time(splits.train.size() - 1) + 1) * frame;
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < end; ++i) sum += sig[i];
    const double mean = sum / static_cast<double>(end);
    for (std::size_t i = 0; i < end; ++i) sq += (sig[i] - mean) * (sig[i] - mean);
    const double sd = std::sqrt(sq / static_cast<double>(end));
    if (!std::isfinite(mean) || !std::isfinite(sd))
      throw DomainError("train: training signal statistics overflow");
    model.norm_mean = mean;
    model.norm_scale = sd > 0.0 ? sd : 1.0;
  }

  auto refs = model.parameters();
  std::vector<const Tensor*> param_values;
  std::size_t agd_count = 0;
  for (const auto& r : refs) {
    param_values.push_back(r.value);
    agd_count += r.agd;
  }
  AdamState adam = AdamState::for_params(param_values);

  TrainResult result;
  result.history.initial = evaluate_losses(model, splits.train, cfg.weights);

  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order = iota_indices(splits.train.size());
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  result.model = model;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    LossValues epoch_loss;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - first);
      const std::span<const std::size_t> batch(order.data() + first, count);
      Tensor x = splits.train.batch_inputs(batch);
      Tensor y = splits.train.batch_targets(batch);
      normalize_in_place(x, model);
      normalize_in_place(y, model);

      ad::Tape tape;
      const dln::BoundModel bound = dln::bind_model(tape, model, true);
      LossTerms terms;
      try {
        terms = joint_loss(model, bound, tape.constant(std::move(x)), tape.constant(std::move(y)), cfg.weights);
      } catch (const DomainError& e) {
        throw DivergenceError(static_cast<int>(epoch), "forward", "epoch " + std::to_string(epoch) + ": " + e.what());
      }
      const LossValues v = LossValues::of(terms);
      if (const char* bad = first_non_finite(v))
        throw DivergenceError(static_cast<int>(epoch), bad,
                              "epoch " + std::to_string(epoch) + ": " + bad + " is not finite");
      accumulate(epoch_loss, v, static_cast<double>(count) / static_cast<double>(order.size()));

      const ad::Gradients grads = tape.backward(terms.joint);
      std::vector<Tensor*> params;
      std::vector<const Tensor*> grad_ptrs;
      for (std::size_t p = 0; p < refs.size(); ++p) {
        params.push_back(refs[p].value);
        grad_ptrs.push_back(&grads.of(bound.params[p]));
      }
      ++adam.step;
      adam_update_range(params, grad_ptrs, adam, cfg.learning_rate, 0, agd_count);            // AGD
      adam_update_range(params, grad_ptrs, adam, cfg.learning_rate, agd_count, refs.size());  // DLN
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train = epoch_loss;
    try {
      rec.val_mae = evaluate(model, splits.val).mae;
    } catch (const DomainError& e) {
      throw DivergenceError(static_cast<int>(epoch), "val_MAE", "epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (!std::isfinite(rec.val_mae))
      throw DivergenceError(static_cast<int>(epoch), "val_MAE", "epoch " + std::to_string(epoch) + ": validation MAE is not finite");
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_mae < best) {
      best = rec.val_mae;
      stale = 0;
      result.model = model;
      result.history.best_epoch = epoch;
      result.history.best_val_mae = best;
    } else if (++stale >= cfg.patience) {
      result.history.early_stopped = true;
      break;
    }
  }
  result.final_model = std::move(model);
  return result;
}

}  // namespace stgdl::training
