#include "storygen/autodiff.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>

namespace storygen {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape s) : shape(std::move(s)), values(shape_size(shape), 0.0) {}

Tensor::Tensor(Shape s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
  check_invariants();
}

Tensor Tensor::vector(std::initializer_list<double> v) {
  return Tensor({v.size()}, std::vector<double>(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> v) {
  return Tensor({rows, cols}, std::vector<double>(v));
}

void Tensor::zero_grad() { grad.assign(values.size(), 0.0); }

void Tensor::ensure_grad() {
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::check_invariants() const {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimension must be positive: " + shape_to_string(shape));
  }
  if (shape.empty() || shape_size(shape) != values.size()) {
    throw ShapeError("shape " + shape_to_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  if (!grad.empty() && grad.size() != values.size()) {
    throw ShapeError("gradient size differs from value size for " +
                     shape_to_string(shape));
  }
}

// ---------------------------------------------------------------------------
// Var

const Shape& Var::shape() const { return tape->nodes_[id].shape; }

std::span<const double> Var::value() const { return tape->value_of(id); }

std::span<const double> Var::grad() const {
  const auto& g = tape->nodes_[id].grad;
  return {g.data(), g.size()};
}

double Var::scalar() const {
  auto v = value();
  if (v.size() != 1) throw ShapeError("expected scalar, got " + shape_to_string(shape()));
  return v[0];
}

// ---------------------------------------------------------------------------
// Tape

std::span<const double> Tape::value_of(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.bound) return {n.bound->values.data(), n.bound->values.size()};
  return {n.value.data(), n.value.size()};
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(shape_size(n.shape), 0.0);
  return {n.grad.data(), n.grad.size()};
}

Var Tape::param(const Tensor& t) {
  if (auto it = bound_ids_.find(&t); it != bound_ids_.end()) return {this, it->second};
  t.check_invariants();
  Node n;
  n.shape = t.shape;
  n.bound = &t;
  nodes_.push_back(std::move(n));
  bound_ids_.emplace(&t, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Shape shape, std::vector<double> values) {
  if (shape.empty() || shape_size(shape) != values.size()) {
    throw ShapeError("constant shape " + shape_to_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(values);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::zeros(Shape shape) {
  auto n = shape_size(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("loss belongs to another tape");
  if (shape_size(nodes_[loss.id].shape) != 1) {
    throw ShapeError("backward requires a scalar loss, got " +
                     shape_to_string(nodes_[loss.id].shape));
  }
  if (backward_done_) throw std::logic_error("backward already run on this tape");
  backward_done_ = true;
  grad_buffer(loss.id)[0] += 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.backward && !n.grad.empty()) n.backward(*this, id);
  }
}

std::span<const double> Tape::grad_of(const Tensor& t) const {
  auto it = bound_ids_.find(&t);
  if (it == bound_ids_.end()) return {};
  const auto& g = nodes_[it->second].grad;
  return {g.data(), g.size()};
}

void Tape::accumulate_param_grads(std::span<Tensor* const> params) const {
  for (Tensor* t : params) {
    auto g = grad_of(*t);
    if (g.empty()) continue;
    t->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) t->grad[i] += g[i];
  }
}

// ---------------------------------------------------------------------------
// Op construction

struct OpBuilder {
  static Var push(Tape* tape, Shape shape, std::vector<double> value,
                  std::function<void(Tape&, std::size_t)> backward) {
    Tape::Node n;
    n.shape = std::move(shape);
    n.value = std::move(value);
    n.backward = std::move(backward);
    tape->nodes_.push_back(std::move(n));
    return {tape, tape->nodes_.size() - 1};
  }
  static std::span<double> grad(Tape& tape, std::size_t id) { return tape.grad_buffer(id); }
  static std::span<const double> out_grad(Tape& tape, std::size_t id) {
    const auto& g = tape.nodes_[id].grad;
    return {g.data(), g.size()};
  }
  static std::span<const double> value(Tape& tape, std::size_t id) {
    return tape.value_of(id);
  }
};

namespace {

Tape* same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid()) throw std::invalid_argument("operand is not on a tape");
  if (a.tape != b.tape) throw std::invalid_argument("operands belong to different tapes");
  return a.tape;
}

Tape* tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("operand is not on a tape");
  return a.tape;
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

void require_vector(const char* op, Var a) {
  if (a.shape().size() != 1) {
    throw ShapeError(std::string(op) + ": expected a rank-1 tensor, got " +
                     shape_to_string(a.shape()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape* tape = same_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() > 2 || sb.size() > 2) {
    throw ShapeError("matmul supports rank <= 2, got " + shape_to_string(sa) + " and " +
                     shape_to_string(sb));
  }
  const std::size_t m = sa.size() == 2 ? sa[0] : 1;
  const std::size_t k = sa.back();
  const std::size_t kb = sb[0];
  const std::size_t n = sb.size() == 2 ? sb[1] : 1;
  if (k != kb) {
    throw ShapeError("matmul: inner dimensions differ for " + shape_to_string(sa) + " and " +
                     shape_to_string(sb));
  }
  Shape out_shape;
  if (sa.size() == 2) out_shape.push_back(m);
  if (sb.size() == 2) out_shape.push_back(n);
  if (out_shape.empty()) out_shape.push_back(1);

  auto av = a.value();
  auto bv = b.value();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    const double* arow = av.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  const std::size_t ida = a.id, idb = b.id;
  return OpBuilder::push(tape, std::move(out_shape), std::move(out),
                         [ida, idb, m, k, n](Tape& t, std::size_t self) {
                           auto g = OpBuilder::out_grad(t, self);
                           auto av = OpBuilder::value(t, ida);
                           auto bv = OpBuilder::value(t, idb);
                           auto ga = OpBuilder::grad(t, ida);
                           for (std::size_t i = 0; i < m; ++i) {
                             const double* grow = g.data() + i * n;
                             for (std::size_t p = 0; p < k; ++p) {
                               const double* brow = bv.data() + p * n;
                               double acc = 0.0;
                               for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                               ga[i * k + p] += acc;
                             }
                           }
                           auto gb = OpBuilder::grad(t, idb);
                           for (std::size_t i = 0; i < m; ++i) {
                             const double* grow = g.data() + i * n;
                             for (std::size_t p = 0; p < k; ++p) {
                               const double aip = av[i * k + p];
                               if (aip == 0.0) continue;
                               double* gbrow = gb.data() + p * n;
                               for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                             }
                           }
                         });
}

Var elementwise(Elementwise kind, Var a, Var b) {
  switch (kind) {
    case Elementwise::Add:
    case Elementwise::Sub:
    case Elementwise::Mul: {
      Tape* tape = same_tape(a, b);
      const char* name = kind == Elementwise::Add ? "add" : kind == Elementwise::Sub ? "sub" : "mul";
      require_same_shape(name, a, b);
      auto av = a.value();
      auto bv = b.value();
      std::vector<double> out(av.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = kind == Elementwise::Add   ? av[i] + bv[i]
                 : kind == Elementwise::Sub ? av[i] - bv[i]
                                            : av[i] * bv[i];
      }
      const std::size_t ida = a.id, idb = b.id;
      return OpBuilder::push(tape, a.shape(), std::move(out),
                             [kind, ida, idb](Tape& t, std::size_t self) {
                               auto g = OpBuilder::out_grad(t, self);
                               auto ga = OpBuilder::grad(t, ida);
                               if (kind == Elementwise::Mul) {
                                 auto av = OpBuilder::value(t, ida);
                                 auto bv = OpBuilder::value(t, idb);
                                 for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                                 auto gb = OpBuilder::grad(t, idb);
                                 for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                                 return;
                               }
                               for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                               auto gb = OpBuilder::grad(t, idb);
                               const double sign = kind == Elementwise::Add ? 1.0 : -1.0;
                               for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
                             });
    }
    case Elementwise::Tanh:
    case Elementwise::Sigmoid: {
      Tape* tape = tape_of(a);
      auto av = a.value();
      std::vector<double> out(av.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = kind == Elementwise::Tanh ? std::tanh(av[i]) : 1.0 / (1.0 + std::exp(-av[i]));
      }
      const std::size_t ida = a.id;
      return OpBuilder::push(tape, a.shape(), std::move(out),
                             [kind, ida](Tape& t, std::size_t self) {
                               auto g = OpBuilder::out_grad(t, self);
                               auto y = OpBuilder::value(t, self);
                               auto ga = OpBuilder::grad(t, ida);
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 const double d = kind == Elementwise::Tanh ? 1.0 - y[i] * y[i]
                                                                            : y[i] * (1.0 - y[i]);
                                 ga[i] += g[i] * d;
                               }
                             });
    }
  }
  throw std::invalid_argument("unknown elementwise kind");
}

Var add(Var a, Var b) { return elementwise(Elementwise::Add, a, b); }
Var sub(Var a, Var b) { return elementwise(Elementwise::Sub, a, b); }
Var mul(Var a, Var b) { return elementwise(Elementwise::Mul, a, b); }
Var tanh(Var a) { return elementwise(Elementwise::Tanh, a); }
Var sigmoid(Var a) { return elementwise(Elementwise::Sigmoid, a); }

Var scale(Var a, double factor) {
  Tape* tape = tape_of(a);
  auto av = a.value();
  std::vector<double> out(av.begin(), av.end());
  for (auto& x : out) x *= factor;
  const std::size_t ida = a.id;
  return OpBuilder::push(tape, a.shape(), std::move(out),
                         [ida, factor](Tape& t, std::size_t self) {
                           auto g = OpBuilder::out_grad(t, self);
                           auto ga = OpBuilder::grad(t, ida);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
                         });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no parts");
  Tape* tape = tape_of(parts.front());
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(first));
  }
  for (const Var& p : parts) {
    if (p.tape != tape) throw std::invalid_argument("concat: parts belong to different tapes");
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) ok = false;
    }
    if (!ok) {
      throw ShapeError("concat: non-concat dimensions differ for " + shape_to_string(first) +
                       " and " + shape_to_string(s));
    }
  }
  // Row-major layout: view each part as outer x (axis_len * inner).
  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  std::size_t inner = 1;
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  std::vector<std::size_t> ids;
  std::vector<std::size_t> widths;
  std::size_t total_axis = 0;
  for (const Var& p : parts) {
    ids.push_back(p.id);
    widths.push_back(p.shape()[axis] * inner);
    total_axis += p.shape()[axis];
  }
  const std::size_t out_width = total_axis * inner;
  std::vector<double> out(outer * out_width);
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    auto v = parts[pi].value();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.data() + o * widths[pi], widths[pi], out.data() + o * out_width + offset);
    }
    offset += widths[pi];
  }
  Shape out_shape = first;
  out_shape[axis] = total_axis;
  return OpBuilder::push(tape, std::move(out_shape), std::move(out),
                         [ids, widths, outer, out_width](Tape& t, std::size_t self) {
                           auto g = OpBuilder::out_grad(t, self);
                           std::size_t offset = 0;
                           for (std::size_t pi = 0; pi < ids.size(); ++pi) {
                             auto gp = OpBuilder::grad(t, ids[pi]);
                             for (std::size_t o = 0; o < outer; ++o) {
                               const double* src = g.data() + o * out_width + offset;
                               double* dst = gp.data() + o * widths[pi];
                               for (std::size_t i = 0; i < widths[pi]; ++i) dst[i] += src[i];
                             }
                             offset += widths[pi];
                           }
                         });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  for (const Var& r : rows) require_vector("stack_rows", r);
  const std::size_t width = rows.front().size();
  for (const Var& r : rows) {
    if (r.size() != width) {
      throw ShapeError("stack_rows: row widths differ " + shape_to_string(rows.front().shape()) +
                       " vs " + shape_to_string(r.shape()));
    }
  }
  Var flat = concat(rows, 0);
  // Reinterpret the flat concatenation as a matrix; storage is identical.
  Tape* tape = flat.tape;
  auto v = flat.value();
  const std::size_t idf = flat.id;
  return OpBuilder::push(tape, {rows.size(), width}, std::vector<double>(v.begin(), v.end()),
                         [idf](Tape& t, std::size_t self) {
                           auto g = OpBuilder::out_grad(t, self);
                           auto gf = OpBuilder::grad(t, idf);
                           for (std::size_t i = 0; i < g.size(); ++i) gf[i] += g[i];
                         });
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  Tape* tape = tape_of(a);
  require_vector("slice", a);
  if (length == 0 || offset + length > a.size()) {
    throw ShapeError("slice: range [" + std::to_string(offset) + ", " +
                     std::to_string(offset + length) + ") out of bounds for " +
                     shape_to_string(a.shape()));
  }
  auto v = a.value();
  std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(offset),
                          v.begin() + static_cast<std::ptrdiff_t>(offset + length));
  const std::size_t ida = a.id;
  return OpBuilder::push(tape, {length}, std::move(out),
                         [ida, offset](Tape& t, std::size_t self) {
                           auto g = OpBuilder::out_grad(t, self);
                           auto ga = OpBuilder::grad(t, ida);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
                         });
}

Var row(Var matrix, std::size_t r) {
  Tape* tape = tape_of(matrix);
  const Shape& s = matrix.shape();
  if (s.size() != 2) throw ShapeError("row: expected a matrix, got " + shape_to_string(s));
  if (r >= s[0]) {
    throw ShapeError("row: index " + std::to_string(r) + " out of range for " +
                     shape_to_string(s));
  }
  const std::size_t width = s[1];
  auto v = matrix.value();
  std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(r * width),
                          v.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
  const std::size_t idm = matrix.id;
  return OpBuilder::push(tape, {width}, std::move(out),
                         [idm, r, width](Tape& t, std::size_t self) {
                           auto g = OpBuilder::out_grad(t, self);
                           auto gm = OpBuilder::grad(t, idm);
                           for (std::size_t i = 0; i < width; ++i) gm[r * width + i] += g[i];
                         });
}

Var sum(Var a) {
  Tape* tape = tape_of(a);
  auto v = a.value();
  double s = 0.0;
  for (double x : v) s += x;
  const std::size_t ida = a.id;
  return OpBuilder::push(tape, {1}, {s}, [ida](Tape& t, std::size_t self) {
    const double g = OpBuilder::out_grad(t, self)[0];
    auto ga = OpBuilder::grad(t, ida);
    for (auto& x : ga) x += g;
  });
}

Var dot(Var a, Var b) {
  require_vector("dot", a);
  require_vector("dot", b);
  require_same_shape("dot", a, b);
  return matmul(a, b);
}

namespace {

Var softmax_impl(Var logits, const std::vector<bool>* mask) {
  Tape* tape = tape_of(logits);
  require_vector("softmax", logits);
  auto x = logits.value();
  if (x.empty()) throw ShapeError("softmax: empty input");
  if (mask && mask->size() != x.size()) {
    throw ShapeError("softmax: mask length " + std::to_string(mask->size()) +
                     " differs from logits " + shape_to_string(logits.shape()));
  }
  auto active = [&](std::size_t i) { return !mask || (*mask)[i]; };
  double max_logit = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!active(i)) continue;
    any = true;
    max_logit = std::max(max_logit, x[i]);
  }
  if (!any) throw std::invalid_argument("softmax: every position is masked");
  std::vector<double> out(x.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!active(i)) continue;
    out[i] = std::exp(x[i] - max_logit);
    total += out[i];
  }
  for (auto& y : out) y /= total;
  const std::size_t idx = logits.id;
  return OpBuilder::push(tape, logits.shape(), std::move(out), [idx](Tape& t, std::size_t self) {
    auto g = OpBuilder::out_grad(t, self);
    auto y = OpBuilder::value(t, self);
    double inner = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * y[i];
    auto gx = OpBuilder::grad(t, idx);
    // Masked entries have y == 0 and receive no gradient.
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += y[i] * (g[i] - inner);
  });
}

}  // namespace

Var softmax(Var logits) { return softmax_impl(logits, nullptr); }

Var masked_softmax(Var logits, const std::vector<bool>& mask) {
  return softmax_impl(logits, &mask);
}

Var cross_entropy(Var dist, std::size_t target) {
  Tape* tape = tape_of(dist);
  require_vector("cross_entropy", dist);
  if (target >= dist.size()) {
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) +
                            " out of range for " + shape_to_string(dist.shape()));
  }
  const double p = dist.value()[target];
  const bool clamped = p <= kLogEpsilon;  // NaN passes through
  const double loss = -std::log(clamped ? kLogEpsilon : p);
  const std::size_t idd = dist.id;
  return OpBuilder::push(tape, {1}, {loss}, [idd, target, clamped](Tape& t, std::size_t self) {
    if (clamped) return;
    const double g = OpBuilder::out_grad(t, self)[0];
    const double p = OpBuilder::value(t, idd)[target];
    OpBuilder::grad(t, idd)[target] += -g / p;
  });
}

}  // namespace storygen
