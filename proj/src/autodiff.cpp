#include "stgdl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stgdl/errors.hpp"
#include "stgdl/kernels.hpp"

namespace stgdl::ad {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "×" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  if (element_count(shape_) != values_.size())
    throw ShapeError("tensor: shape " + to_string(shape_) + " does not hold " +
                     std::to_string(values_.size()) + " values");
}

Tensor Tensor::uninitialized(Shape shape) {
  Storage values(element_count(shape));
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor(Shape{rows, cols}, std::vector<double>(values));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

double Tensor::item() const {
  if (values_.size() != 1) throw ShapeError("item: tensor " + to_string(shape_) + " is not a scalar");
  return values_[0];
}

bool Tensor::all_finite() const noexcept {
  // v * 0 is zero for finite v and NaN otherwise, so the sums stay zero exactly when all are finite.
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t n = values_.size(), body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4)
    for (std::size_t j = 0; j < 4; ++j) acc[j] += values_[i + j] * 0.0;
  for (std::size_t i = body; i < n; ++i) acc[0] += values_[i] * 0.0;
  return acc[0] + acc[1] + acc[2] + acc[3] == 0.0;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != values_.size())
    throw ShapeError("reshape: " + to_string(shape_) + " -> " + to_string(shape));
  return Tensor(std::move(shape), values_);
}

// ---- Var / Tape -------------------------------------------------------------

const Tensor& Var::value() const {
  if (!tape_) throw std::invalid_argument("var: not attached to a tape");
  return tape_->value(id_);
}

bool Var::tracked() const { return tape_ && tape_->tracked(id_); }

const Tensor& Gradients::of(Var v) const { return of(v.id()); }

const Tensor& Gradients::of(NodeId id) const {
  auto it = grads_.find(id);
  if (it == grads_.end()) throw std::out_of_range("gradients: node " + std::to_string(id) + " is not a tracked leaf");
  return it->second;
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn rule, const char* op_name) {
  Node node;
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape() != this) throw std::invalid_argument(std::string(op_name) + ": input from another tape");
    node.inputs.push_back(v.id());
    node.tracked = node.tracked || nodes_[v.id()].tracked;
  }
  if (!value.all_finite()) throw DomainError(std::string(op_name) + ": non-finite result");
  node.value = std::move(value);
  if (node.tracked) node.rule = std::move(rule);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape() != this || loss.id() >= nodes_.size())
    throw std::invalid_argument("backward: loss is not on this tape");
  const Node& root = nodes_[loss.id()];
  if (root.value.size() != 1 || root.value.rank() > 1)
    throw ShapeError("backward: loss must be a scalar, got " + to_string(root.value.shape()));
  if (!root.tracked) throw std::invalid_argument("backward: loss does not depend on any tracked leaf");

  std::vector<Tensor> grads(loss.id() + 1);
  std::vector<bool> live(loss.id() + 1, false);
  grads[loss.id()] = Tensor(root.value.shape(), 1.0);
  live[loss.id()] = true;

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!live[id] || node.leaf || !node.tracked) continue;
    in_values.clear();
    in_grads.clear();
    for (NodeId in : node.inputs) {
      in_values.push_back(&nodes_[in].value);
      if (nodes_[in].tracked) {
        if (!live[in]) {
          grads[in] = Tensor(nodes_[in].value.shape(), 0.0);
          live[in] = true;
        }
        in_grads.push_back(&grads[in]);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    node.rule(BackwardArgs{node.value, grads[id], in_values, in_grads});
    // Interior gradients are not needed once propagated.
    if (id != loss.id()) grads[id] = Tensor();
  }

  Gradients out;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (!node.leaf || !node.tracked) continue;
    if (id < live.size() && live[id])
      out.grads_.emplace(id, std::move(grads[id]));
    else
      out.grads_.emplace(id, Tensor(node.value.shape(), 0.0));
  }
  return out;
}

// ---- operations -----------------------------------------------------------

namespace {

Tape& tape_of(Var x, const char* op) {
  if (!x.tape()) throw std::invalid_argument(std::string(op) + ": detached var");
  return *x.tape();
}

void require_same_shape(Var x, Var y, const char* op) {
  if (x.tape() != y.tape()) throw std::invalid_argument(std::string(op) + ": vars on different tapes");
  if (x.shape() != y.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(x.shape()) + " vs " +
                     to_string(y.shape()));
}

template <typename Fn>
Tensor map(const Tensor& x, Fn fn) {
  Tensor out = Tensor::uninitialized(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i]);
  return out;
}

}  // namespace

Var elementwise(const ElementwiseSpec& spec, Var x) {
  Tape& tape = tape_of(x, "elementwise");
  const Tensor& xv = x.value();
  const Var in[] = {x};
  switch (spec.kind) {
    case ElementwiseKind::tanh:
      return tape.record(map(xv, [](double v) { return kernels::tanh(v); }), in,
                         [](const BackwardArgs& a) {
                           Tensor& g = *a.grads[0];
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             const double t = a.output[i];
                             g[i] += a.grad_output[i] * (1.0 - t * t);
                           }
                         },
                         "tanh");
    case ElementwiseKind::scale:
    case ElementwiseKind::affine: {
      const double ca = spec.a;
      const double cb = spec.kind == ElementwiseKind::scale ? 0.0 : spec.b;
      return tape.record(map(xv, [=](double v) { return ca * v + cb; }), in,
                         [ca](const BackwardArgs& a) {
                           Tensor& g = *a.grads[0];
                           for (std::size_t i = 0; i < g.size(); ++i) g[i] += ca * a.grad_output[i];
                         },
                         spec.kind == ElementwiseKind::scale ? "scale" : "affine");
    }
    default:
      throw std::invalid_argument("elementwise: binary kind used with one operand");
  }
}

Var elementwise(const ElementwiseSpec& spec, Var x, Var y) {
  require_same_shape(x, y, "elementwise");
  Tape& tape = *x.tape();
  const Tensor& xv = x.value();
  const Tensor& yv = y.value();
  Tensor out = Tensor::uninitialized(xv.shape());
  const Var in[] = {x, y};
  switch (spec.kind) {
    case ElementwiseKind::add:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + yv[i];
      return tape.record(std::move(out), in,
                         [](const BackwardArgs& a) {
                           for (int s = 0; s < 2; ++s)
                             if (Tensor* g = a.grads[s])
                               for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += a.grad_output[i];
                         },
                         "add");
    case ElementwiseKind::sub:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] - yv[i];
      return tape.record(std::move(out), in,
                         [](const BackwardArgs& a) {
                           if (Tensor* g = a.grads[0])
                             for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += a.grad_output[i];
                           if (Tensor* g = a.grads[1])
                             for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= a.grad_output[i];
                         },
                         "sub");
    case ElementwiseKind::hadamard:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * yv[i];
      return tape.record(std::move(out), in,
                         [](const BackwardArgs& a) {
                           const Tensor& xs = *a.inputs[0];
                           const Tensor& ys = *a.inputs[1];
                           if (Tensor* g = a.grads[0])
                             for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += a.grad_output[i] * ys[i];
                           if (Tensor* g = a.grads[1])
                             for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += a.grad_output[i] * xs[i];
                         },
                         "hadamard");
    default:
      throw std::invalid_argument("elementwise: unary kind used with two operands");
  }
}

Var add(Var x, Var y) { return elementwise({ElementwiseKind::add}, x, y); }
Var sub(Var x, Var y) { return elementwise({ElementwiseKind::sub}, x, y); }
Var hadamard(Var x, Var y) { return elementwise({ElementwiseKind::hadamard}, x, y); }
Var tanh(Var x) { return elementwise({ElementwiseKind::tanh}, x); }
Var scale(Var x, double c) { return elementwise({ElementwiseKind::scale, c}, x); }
Var affine(Var x, double a, double b) { return elementwise({ElementwiseKind::affine, a, b}, x); }

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, "matmul");
  if (a.tape() != b.tape()) throw std::invalid_argument("matmul: vars on different tapes");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    throw ShapeError("matmul: cannot multiply " + to_string(av.shape()) + " by " + to_string(bv.shape()));
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out = Tensor::uninitialized(Shape{m, n});
  kernels::gemm({m, n, k, av.values(), kernels::Trans::no, bv.values(), kernels::Trans::no, out.values(), false});
  const Var in[] = {a, b};
  return tape.record(std::move(out), in,
                     [m, n, k](const BackwardArgs& args) {
                       using kernels::Trans;
                       // dA = G·Bᵀ, dB = Aᵀ·G
                       if (Tensor* ga = args.grads[0])
                         kernels::gemm({m, k, n, args.grad_output.values(), Trans::no,
                                        args.inputs[1]->values(), Trans::yes, ga->values(), true});
                       if (Tensor* gb = args.grads[1])
                         kernels::gemm({k, n, m, args.inputs[0]->values(), Trans::yes,
                                        args.grad_output.values(), Trans::no, gb->values(), true});
                     },
                     "matmul");
}

namespace {

// out_o[i][r] += Σ_j W[i][j] x_o[j][r] (Wᵀ when transposed), one slice per o.
void mix_slices(const double* w, bool transposed, std::size_t k, std::size_t outer, std::size_t inner,
                const double* x, double* out) {
  const std::size_t block = k * inner;
  if (inner == 1) {
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < k; ++i) {
        double s = out[o * k + i];
        for (std::size_t j = 0; j < k; ++j) s += (transposed ? w[j * k + i] : w[i * k + j]) * x[o * k + j];
        out[o * k + i] = s;
      }
    return;
  }
  for (std::size_t o = 0; o < outer; ++o) {
    const double* xo = x + o * block;
    double* oo = out + o * block;
    for (std::size_t i = 0; i < k; ++i) {
      double* orow = oo + i * inner;
      for (std::size_t j = 0; j < k; ++j) {
        const double wij = transposed ? w[j * k + i] : w[i * k + j];
        const double* xrow = xo + j * inner;
        for (std::size_t r = 0; r < inner; ++r) orow[r] += wij * xrow[r];
      }
    }
  }
}

}  // namespace

Var matmul_last(Var x, Var w) {
  Tape& tape = tape_of(x, "matmul_last");
  if (x.tape() != w.tape()) throw std::invalid_argument("matmul_last: vars on different tapes");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() < 1 || wv.rank() != 2 || xv.shape().back() != wv.dim(0))
    throw ShapeError("matmul_last: cannot contract " + to_string(xv.shape()) + " with " + to_string(wv.shape()));
  const std::size_t k = wv.dim(0), n = wv.dim(1), m = xv.size() / k;
  Shape out_shape = xv.shape();
  out_shape.back() = n;
  Tensor out = Tensor::uninitialized(out_shape);
  kernels::gemm({m, n, k, xv.values(), kernels::Trans::no, wv.values(), kernels::Trans::no, out.values(), false});
  const Var in[] = {x, w};
  return tape.record(std::move(out), in,
                     [m, n, k](const BackwardArgs& args) {
                       using kernels::Trans;
                       if (Tensor* gx = args.grads[0])
                         kernels::gemm({m, k, n, args.grad_output.values(), Trans::no,
                                        args.inputs[1]->values(), Trans::yes, gx->values(), true});
                       if (Tensor* gw = args.grads[1])
                         kernels::gemm({k, n, m, args.inputs[0]->values(), Trans::yes,
                                        args.grad_output.values(), Trans::no, gw->values(), true});
                     },
                     "matmul_last");
}

Var mix(Var w, Var x, std::size_t axis) {
  Tape& tape = tape_of(x, "mix");
  if (x.tape() != w.tape()) throw std::invalid_argument("mix: vars on different tapes");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (axis >= xv.rank() || wv.rank() != 2 || wv.dim(0) != wv.dim(1) || wv.dim(0) != xv.dim(axis))
    throw ShapeError("mix: cannot apply " + to_string(wv.shape()) + " along axis " + std::to_string(axis) + " of " +
                     to_string(xv.shape()));
  const std::size_t k = wv.dim(0);
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= xv.dim(d);
  for (std::size_t d = axis + 1; d < xv.rank(); ++d) inner *= xv.dim(d);
  const std::size_t block = k * inner;
  Tensor out(xv.shape());
  mix_slices(wv.values().data(), false, k, outer, inner, xv.values().data(), out.values().data());
  const Var in[] = {w, x};
  return tape.record(std::move(out), in,
                     [k, outer, inner, block](const BackwardArgs& args) {
                       using kernels::Trans;
                       const auto g = args.grad_output.values();
                       const auto xs = args.inputs[1]->values();
                       const Tensor& w = *args.inputs[0];
                       // dW[i][j] = Σ_o Σ_r G_o[i][r] X_o[j][r]
                       if (Tensor* gw = args.grads[0])
                         for (std::size_t o = 0; o < outer; ++o)
                           for (std::size_t i = 0; i < k; ++i) {
                             const double* g_row = g.data() + o * block + i * inner;
                             for (std::size_t j = 0; j < k; ++j) {
                               const double* x_row = xs.data() + o * block + j * inner;
                               double s = 0.0;
                               for (std::size_t r = 0; r < inner; ++r) s += g_row[r] * x_row[r];
                               gw->at(i, j) += s;
                             }
                           }
                       // dX_o = Wᵀ G_o
                       if (Tensor* gx = args.grads[1])
                         mix_slices(w.values().data(), true, k, outer, inner, g.data(), gx->values().data());
                     },
                     "mix");
}

Var permute(Var x, std::vector<std::size_t> perm) {
  Tape& tape = tape_of(x, "permute");
  const Tensor& xv = x.value();
  if (perm.size() != xv.rank()) throw ShapeError("permute: permutation rank mismatch");
  Shape out_shape(perm.size());
  for (std::size_t d = 0; d < perm.size(); ++d) {
    if (perm[d] >= xv.rank()) throw ShapeError("permute: axis out of range");
    out_shape[d] = xv.dim(perm[d]);
  }
  Tensor out = Tensor::uninitialized(out_shape);
  kernels::permute(xv.values(), xv.shape(), perm, out.values());
  std::vector<std::size_t> inverse(perm.size());
  for (std::size_t d = 0; d < perm.size(); ++d) inverse[perm[d]] = d;
  const Var in[] = {x};
  return tape.record(std::move(out), in,
                     [inverse, out_shape](const BackwardArgs& a) {
                       Tensor back(a.inputs[0]->shape());
                       kernels::permute(a.grad_output.values(), out_shape, inverse, back.values());
                       Tensor& g = *a.grads[0];
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += back[i];
                     },
                     "permute");
}

Var transpose(Var a) {
  if (a.value().rank() != 2) throw ShapeError("transpose: expected a matrix, got " + to_string(a.shape()));
  return permute(a, {1, 0});
}

Var reshape(Var x, Shape shape) {
  Tape& tape = tape_of(x, "reshape");
  Tensor out = x.value().reshaped(std::move(shape));
  const Var in[] = {x};
  return tape.record(std::move(out), in,
                     [](const BackwardArgs& a) {
                       Tensor& g = *a.grads[0];
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += a.grad_output[i];
                     },
                     "reshape");
}

Var reduce(ReduceKind kind, Var x) {
  Tape& tape = tape_of(x, "reduce");
  const Tensor& xv = x.value();
  const Var in[] = {x};
  double acc = 0.0;
  switch (kind) {
    case ReduceKind::sum:
    case ReduceKind::mean: {
      for (double v : xv.values()) acc += v;
      const double w = kind == ReduceKind::mean && xv.size() ? 1.0 / static_cast<double>(xv.size()) : 1.0;
      return tape.record(Tensor::scalar(acc * w), in,
                         [w](const BackwardArgs& a) {
                           Tensor& g = *a.grads[0];
                           const double go = a.grad_output[0] * w;
                           for (std::size_t i = 0; i < g.size(); ++i) g[i] += go;
                         },
                         kind == ReduceKind::sum ? "sum" : "mean");
    }
    case ReduceKind::l1:
      for (double v : xv.values()) acc += std::abs(v);
      return tape.record(Tensor::scalar(acc), in,
                         [](const BackwardArgs& a) {
                           Tensor& g = *a.grads[0];
                           const Tensor& xs = *a.inputs[0];
                           const double go = a.grad_output[0];
                           for (std::size_t i = 0; i < g.size(); ++i)
                             g[i] += xs[i] > 0.0 ? go : (xs[i] < 0.0 ? -go : 0.0);
                         },
                         "l1");
  }
  throw std::invalid_argument("reduce: unknown kind");
}

Var sum(Var x) { return reduce(ReduceKind::sum, x); }
Var mean(Var x) { return reduce(ReduceKind::mean, x); }
Var l1(Var x) { return reduce(ReduceKind::l1, x); }

// ---- finite differences -----------------------------------------------------

FiniteDiffResult finite_diff_check(const ScalarFn& f, const std::vector<Tensor>& params, double eps,
                                   double floor) {
  if (!(eps > 0.0)) throw DomainError("finite_diff_check: eps must be positive");

  auto evaluate = [&](const std::vector<Tensor>& ps) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : ps) vars.push_back(tape.constant(p));
    const double v = f(tape, vars).value().item();
    if (!std::isfinite(v)) throw DomainError("finite_diff_check: f is not finite");
    return v;
  };

  Tape tape;
  std::vector<Var> vars;
  for (const auto& p : params) vars.push_back(tape.leaf(p));
  const Var loss = f(tape, vars);
  if (!std::isfinite(loss.value().item())) throw DomainError("finite_diff_check: f is not finite");

  std::vector<Tensor> analytic;
  if (loss.tracked()) {
    const Gradients grads = tape.backward(loss);
    for (const Var& v : vars) analytic.push_back(grads.of(v));
  } else {
    for (const auto& p : params) analytic.emplace_back(p.shape(), 0.0);
  }

  FiniteDiffResult result;
  std::vector<Tensor> probe = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double orig = params[p][i];
      probe[p][i] = orig + eps;
      const double up = evaluate(probe);
      probe[p][i] = orig - eps;
      const double down = evaluate(probe);
      probe[p][i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[p][i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (err > result.max_rel_error) result = {err, p, i};
    }
  }
  return result;
}

}  // namespace stgdl::ad
