#pragma once

// Define-by-run reverse-mode differentiation over small dense tensors.
//
// A Tape is built fresh for every forward pass. Parameters live outside the
// tape as Tensor values; Tape::param() binds one as a leaf without copying,
// and after backward() the gradient of each bound parameter can be read with
// Tape::grad_of() or added to Tensor::grad with accumulate_param_grads().

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace storygen {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Owned numeric array with an optional gradient slot of the same shape.
struct Tensor {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation

  Tensor() = default;
  explicit Tensor(Shape s);
  Tensor(Shape s, std::vector<double> v);

  static Tensor vector(std::initializer_list<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> v);

  std::size_t size() const { return values.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape.front(); }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  void zero_grad();
  void ensure_grad();
  void check_invariants() const;
};

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  bool valid() const { return tape != nullptr; }
  const Shape& shape() const;
  std::span<const double> value() const;
  std::span<const double> grad() const;
  double scalar() const;
  std::size_t size() const { return value().size(); }
};

enum class Elementwise { Add, Sub, Mul, Tanh, Sigmoid };

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf bound to an externally owned parameter. Repeated calls with the
  /// same tensor return the same node.
  Var param(const Tensor& t);
  /// Leaf holding a copy of the given values; gradients are kept on the tape.
  Var constant(Shape shape, std::vector<double> values);
  Var constant(const Tensor& t) { return constant(t.shape, t.values); }
  Var zeros(Shape shape);

  /// Runs the reverse sweep from a scalar. A tape supports one sweep.
  void backward(Var loss);

  /// Gradient of the loss w.r.t. a bound parameter; empty span if the
  /// parameter never entered this tape.
  std::span<const double> grad_of(const Tensor& t) const;
  /// Adds the gradient of every bound parameter into its Tensor::grad.
  /// The caller passes the mutable tensors it owns.
  void accumulate_param_grads(std::span<Tensor* const> params) const;

  std::size_t node_count() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

 private:
  friend struct Var;
  friend struct OpBuilder;

  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    const Tensor* bound = nullptr;
    std::function<void(Tape&, std::size_t)> backward;
  };

  std::span<const double> value_of(std::size_t id) const;
  std::span<double> grad_buffer(std::size_t id);

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> bound_ids_;
  bool backward_done_ = false;
};

// Primitive ops. Rank-1 operands of matmul are treated as a row (left) or
// column (right) vector and the corresponding output axis is dropped.
Var matmul(Var a, Var b);
Var elementwise(Elementwise kind, Var a, Var b = {});
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var tanh(Var a);
Var sigmoid(Var a);
Var scale(Var a, double factor);
/// Concatenates along the given axis; rank-1 parts only support axis 0.
Var concat(std::span<const Var> parts, std::size_t axis = 0);
Var concat(std::initializer_list<Var> parts, std::size_t axis = 0);
/// Stacks equally sized rank-1 vectors into a rows x width matrix.
Var stack_rows(std::span<const Var> rows);
/// Contiguous sub-range [offset, offset + length) of a rank-1 vector.
Var slice(Var a, std::size_t offset, std::size_t length);
/// Row r of a matrix as a rank-1 vector.
Var row(Var matrix, std::size_t r);
Var sum(Var a);
Var dot(Var a, Var b);
Var softmax(Var logits);
/// Softmax restricted to positions where mask is true; masked entries are 0.
Var masked_softmax(Var logits, const std::vector<bool>& mask);

inline constexpr double kLogEpsilon = 1e-12;
/// -log(max(dist[target], kLogEpsilon)).
Var cross_entropy(Var dist, std::size_t target);

}  // namespace storygen
