#pragma once

// Tape-based reverse-mode differentiation over dense Tensors.
//
// Every primitive evaluates eagerly and, while the tape is recording, appends a
// node holding its output, its input node ids and a closure that pushes the
// output gradient back to the inputs. backward() walks the tape once in reverse
// creation order, which is a topological order by construction.

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ergae/tensor.hpp"

namespace ergae {

/// A trainable (or buffer) tensor owned by a model, with its gradient accumulator.
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Tensor v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), trainable(train) {}

  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid until the tape is cleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr && id_ >= 0; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a model parameter; backward() accumulates into parameter.grad.
  Var param(Parameter& parameter);
  /// Free leaf whose gradient is kept on the tape (used by gradient checks).
  Var leaf(Tensor value);

  Var record(Tensor value, std::vector<int> inputs, BackwardFn fn);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  bool any_requires_grad(std::span<const Var> vars) const;

  /// Gradient buffer of a node, allocated as zeros on first use.
  Tensor& grad_of(int id);
  /// Gradient of a leaf after backward(); zeros if none flowed.
  Tensor grad(Var v) const;

  void backward(Var loss);

  /// Disabling recording turns every later op into a constant (inference mode).
  void set_recording(bool on) { recording_ = on; }
  bool recording() const { return recording_; }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<int> inputs;
    BackwardFn backward;
    Parameter* parameter = nullptr;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  bool recording_ = true;
};

// Primitive operations. Binary elementwise ops broadcast numpy-style (shapes
// aligned on the trailing axis, size-1 or missing axes stretched).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var matmul(Var a, Var b);
Var concat(std::span<const Var> parts, int axis = -1);
Var slice(Var a, int axis, std::size_t begin, std::size_t end);
Var reshape(Var a, Shape shape);
Var sum(Var a, int axis);
Var sum_all(Var a);
Var mean(Var a, int axis);
Var mean_all(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var exp(Var a);
/// Natural log with the argument clamped below at kLogFloor.
Var log(Var a);
Var softmax(Var a);
/// Row gather; index -1 yields a zero row and receives no gradient.
Var gather_rows(Var table, std::span<const std::int64_t> indices);

/// out[i] = sum of w * x[j] over the (j, w) pairs of rows[i].
using SparseRows = std::vector<std::vector<std::pair<std::size_t, double>>>;
Var sparse_mix(Var x, std::size_t out_rows, std::shared_ptr<const SparseRows> rows);

inline constexpr double kLogFloor = 1e-12;

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

/// Output shape of broadcasting a with b; throws ShapeError naming `op`.
Shape broadcast_shape(const Shape& a, const Shape& b, const char* op);

}  // namespace ergae
