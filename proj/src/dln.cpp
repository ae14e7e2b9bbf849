#include "stgdl/dln.hpp"

#include <cmath>

#include "stgdl/errors.hpp"
#include "stgdl/rng.hpp"

namespace stgdl::dln {

using ad::BackwardArgs;
using ad::Shape;

StBlockParams StBlockParams::zeros(const BlockShape& s) {
  const std::size_t t = s.window, f = s.features, h = s.hidden;
  return StBlockParams{Tensor(Shape{f, h}),     Tensor(Shape{h, h}), Tensor(Shape{t, t}),
                       Tensor(Shape{t * h, f}), Tensor(Shape{1, f}), Tensor(Shape{t * h, t * f}),
                       Tensor(Shape{1, t * f})};
}

const std::vector<std::string>& StBlockParams::field_names() {
  static const std::vector<std::string> names = {"w_in", "w_g", "w_t", "w_pred", "b_pred", "w_ext", "b_ext"};
  return names;
}

std::vector<Tensor*> StBlockParams::fields() { return {&w_in, &w_g, &w_t, &w_pred, &b_pred, &w_ext, &b_ext}; }

std::vector<const Tensor*> StBlockParams::fields() const {
  return {&w_in, &w_g, &w_t, &w_pred, &b_pred, &w_ext, &b_ext};
}

StBlockVars bind_block(ad::Tape& tape, const StBlockParams& p, bool tracked) {
  auto put = [&](const Tensor& t) { return tracked ? tape.leaf(t) : tape.constant(t); };
  return StBlockVars{put(p.w_in), put(p.w_g), put(p.w_t), put(p.w_pred), put(p.b_pred), put(p.w_ext), put(p.b_ext)};
}

Var normalized_adjacency(Var a) {
  const Tensor& av = a.value();
  if (av.rank() != 2 || av.dim(0) != av.dim(1))
    throw ShapeError("normalized_adjacency: expected a square matrix, got " + ad::to_string(av.shape()));
  const std::size_t n = av.dim(0);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 1.0;
    for (std::size_t j = 0; j < n; ++j) d += av.at(i, j);
    if (!(d > 0.0)) throw DomainError("normalized_adjacency: nonpositive degree");
    s[i] = 1.0 / std::sqrt(d);
  }
  Tensor out(av.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = s[i] * (av.at(i, j) + (i == j ? 1.0 : 0.0)) * s[j];

  const Var in[] = {a};
  return a.tape()->record(
      std::move(out), in,
      [n, s](const BackwardArgs& args) {
        const Tensor& g = args.grad_output;
        const Tensor& x = *args.inputs[0];
        Tensor& ga = *args.grads[0];
        auto b = [&](std::size_t i, std::size_t j) { return x.at(i, j) + (i == j ? 1.0 : 0.0); };
        // out_ij = s_i b_ij s_j with s_i = d_i^{-1/2}, d_i = Σ_j b_ij
        std::vector<double> grad_d(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          double grad_s = 0.0;
          for (std::size_t j = 0; j < n; ++j) grad_s += g.at(i, j) * b(i, j) * s[j] + g.at(j, i) * s[j] * b(j, i);
          grad_d[i] = -0.5 * s[i] * s[i] * s[i] * grad_s;
        }
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) ga.at(i, j) += g.at(i, j) * s[i] * s[j] + grad_d[i];
      },
      "normalized_adjacency");
}

namespace {

struct Embedding {
  Var embed;  // [BN, T·H]
  Var ones;   // [BN, 1]
  std::size_t b, t, n, f;
};

Embedding block_embedding(Var x, Var a_k, const StBlockVars& p) {
  const Shape& xs = x.shape();
  if (xs.size() != 4) throw ShapeError("st_block_forward: input must be [B,T,N,F], got " + ad::to_string(xs));
  const std::size_t b = xs[0], t = xs[1], n = xs[2], f = xs[3];
  const std::size_t h = p.w_in.shape().at(1);
  if (p.w_in.shape() != Shape{f, h} || p.w_g.shape() != Shape{h, h} || p.w_t.shape() != Shape{t, t} ||
      p.w_pred.shape() != Shape{t * h, f} || p.w_ext.shape() != Shape{t * h, t * f})
    throw ShapeError("st_block_forward: parameters do not match input " + ad::to_string(xs));
  if (a_k.shape() != Shape{n, n})
    throw ShapeError("st_block_forward: adjacency " + ad::to_string(a_k.shape()) + " for " + std::to_string(n) + " nodes");
  ad::Tape& tape = *x.tape();

  const Var a_norm = normalized_adjacency(a_k);

  // Spatial layer on every (batch, step) slice. Â (X W_in) W_g is evaluated as
  // (Â X) (W_in W_g): node mixing runs over F channels and the per-node
  // projection is a single F x H product.
  Var mixed = ad::mix(a_norm, x, 2);                                    // [B, T, N, F]
  Var spatial = ad::tanh(ad::matmul_last(mixed, ad::matmul(p.w_in, p.w_g)));  // [B, T, N, H]

  // Temporal layer along T.
  Var temporal = ad::tanh(ad::mix(p.w_t, spatial, 1));                  // [B, T, N, H]
  Var embed = ad::reshape(ad::permute(temporal, {0, 2, 1, 3}), {b * n, t * h});

  return Embedding{embed, tape.constant(Tensor(Shape{b * n, 1}, 1.0)), b, t, n, f};
}

Var forecast_head(const Embedding& e, const StBlockVars& p) {
  Var forecast = ad::add(ad::matmul(e.embed, p.w_pred), ad::matmul(e.ones, p.b_pred));  // [BN, F]
  return ad::reshape(forecast, {e.b, e.n, e.f});
}

}  // namespace

BlockOutput st_block_forward(Var x, Var a_k, const StBlockVars& p) {
  const Embedding e = block_embedding(x, a_k, p);
  Var backcast = ad::add(ad::matmul(e.embed, p.w_ext), ad::matmul(e.ones, p.b_ext));  // [BN, T·F]
  return BlockOutput{ad::permute(ad::reshape(backcast, {e.b, e.n, e.t, e.f}), {0, 2, 1, 3}), forecast_head(e, p)};
}

DlnOutput dln_forward(Var x, std::span<const Var> subgraph_adjs, std::span<const StBlockVars> blocks) {
  if (subgraph_adjs.size() != blocks.size() || blocks.empty())
    throw ShapeError("dln_forward: need one block per subgraph");
  DlnOutput out;
  Var residual = x;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    BlockOutput o = st_block_forward(residual, subgraph_adjs[k], blocks[k]);
    out.forecasts.push_back(o.forecast);
    out.backcasts.push_back(o.backcast);
    out.y_hat = k == 0 ? o.forecast : ad::add(out.y_hat, o.forecast);
    residual = ad::sub(residual, o.backcast);
  }
  out.final_residual = residual;
  return out;
}

Var residual_loss(Var final_residual) {
  const std::size_t batch = final_residual.shape().empty() ? 1 : final_residual.shape()[0];
  return ad::scale(ad::l1(final_residual), 1.0 / static_cast<double>(batch));
}

Var prediction_loss(Var y_hat, Var target) {
  if (y_hat.shape() != target.shape())
    throw ShapeError("prediction_loss: " + ad::to_string(y_hat.shape()) + " vs " + ad::to_string(target.shape()));
  const std::size_t batch = y_hat.shape().empty() ? 1 : y_hat.shape()[0];
  return ad::scale(ad::l1(ad::sub(y_hat, target)), 1.0 / static_cast<double>(batch));
}

Var monolithic_forward(Var x, Var a, const StBlockVars& block) { return forecast_head(block_embedding(x, a, block), block); }

// ---- model container --------------------------------------------------------

std::string to_string(Variant v) {
  switch (v) {
    case Variant::stgdl: return "stgdl";
    case Variant::monolithic: return "monolithic";
    case Variant::ted: return "ted";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& s) {
  if (s == "stgdl") return Variant::stgdl;
  if (s == "monolithic") return Variant::monolithic;
  if (s == "ted") return Variant::ted;
  throw DomainError("unknown variant '" + s + "' (expected stgdl, monolithic or ted)");
}

std::vector<DlnModel::ParamRef> DlnModel::parameters() {
  std::vector<ParamRef> refs;
  for (std::size_t k = 0; k < mask_set.masks.size(); ++k)
    refs.push_back({"mask." + std::to_string(k), &mask_set.masks[k], true});
  const auto& names = StBlockParams::field_names();
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    auto fields = blocks[k].fields();
    for (std::size_t f = 0; f < fields.size(); ++f)
      refs.push_back({"block." + std::to_string(k) + "." + names[f], fields[f], false});
  }
  return refs;
}

std::size_t DlnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& m : mask_set.masks) n += m.size();
  for (const auto& b : blocks)
    for (const Tensor* t : b.fields()) n += t->size();
  return n;
}

DlnModel init_model(const ModelConfig& config, const Tensor& adjacency, std::uint64_t seed) {
  if (config.k == 0) throw DomainError("init_model: K must be >= 1");
  if (adjacency.shape() != Shape{config.nodes, config.nodes})
    throw ShapeError("init_model: adjacency does not match node count");
  DlnModel model;
  model.config = config;
  const std::size_t blocks = config.variant == Variant::monolithic ? 1 : config.k;
  model.mask_set = agd::MaskSet::zeros(adjacency, config.variant == Variant::stgdl ? config.k : 0);

  Rng rng(seed);
  const BlockShape& s = config.block;
  for (std::size_t k = 0; k < blocks; ++k) {
    StBlockParams p = StBlockParams::zeros(s);
    auto fill = [&](Tensor& t, std::size_t fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& v : t.values()) v = rng.uniform(-bound, bound);
    };
    fill(p.w_in, s.features);
    fill(p.w_g, s.hidden);
    fill(p.w_t, s.window);
    fill(p.w_pred, s.window * s.hidden);
    fill(p.b_pred, s.window * s.hidden);
    fill(p.w_ext, s.window * s.hidden);
    fill(p.b_ext, s.window * s.hidden);
    model.blocks.push_back(std::move(p));
  }
  return model;
}

BoundModel bind_model(ad::Tape& tape, DlnModel& model, bool tracked) {
  BoundModel bound;
  for (const auto& m : model.mask_set.masks) {
    bound.masks.push_back(tracked ? tape.leaf(m) : tape.constant(m));
    bound.params.push_back(bound.masks.back());
  }
  bound.base = tape.constant(model.mask_set.base);
  for (const auto& b : model.blocks) {
    bound.blocks.push_back(bind_block(tape, b, tracked));
    const StBlockVars& v = bound.blocks.back();
    for (Var p : {v.w_in, v.w_g, v.w_t, v.w_pred, v.b_pred, v.w_ext, v.b_ext}) bound.params.push_back(p);
  }
  switch (model.config.variant) {
    case Variant::stgdl:
      bound.subgraphs = agd::masked_subgraphs(bound.masks, bound.base);
      break;
    case Variant::ted:
      for (const auto& a : model.fixed_subgraphs) bound.subgraphs.push_back(tape.constant(a));
      break;
    case Variant::monolithic:
      bound.subgraphs.push_back(bound.base);
      break;
  }
  if (bound.subgraphs.size() != bound.blocks.size())
    throw ShapeError("bind_model: " + std::to_string(bound.subgraphs.size()) + " subgraphs for " +
                     std::to_string(bound.blocks.size()) + " blocks");
  return bound;
}

ModelOutput model_forward(const DlnModel& model, const BoundModel& bound, Var x) {
  ModelOutput out;
  if (model.config.variant == Variant::monolithic) {
    out.y_hat = monolithic_forward(x, bound.subgraphs[0], bound.blocks[0]);
  } else {
    out.dln = dln_forward(x, bound.subgraphs, bound.blocks);
    out.y_hat = out.dln.y_hat;
  }
  return out;
}

Tensor predict(DlnModel& model, const Tensor& windows) {
  ad::Tape tape;
  BoundModel bound = bind_model(tape, model, false);
  Tensor x = windows;
  for (double& v : x.values()) v = (v - model.norm_mean) / model.norm_scale;
  const Var out = model_forward(model, bound, tape.constant(std::move(x))).y_hat;
  Tensor y = out.value();
  for (double& v : y.values()) v = v * model.norm_scale + model.norm_mean;
  return y;
}

}  // namespace stgdl::dln
