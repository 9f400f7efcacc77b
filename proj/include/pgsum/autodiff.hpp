#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pgsum/tensor.hpp"

namespace pgsum {

/// The closed set of differentiable primitives. Anything richer (LSTM cells,
/// attention) is composed from these.
enum class OpKind : std::uint8_t {
  Constant,
  Parameter,
  MatMul,
  Add,        // same shape, or rank-2 plus a 1 x cols row broadcast over rows
  Mul,        // elementwise, same shape
  Sigmoid,
  Tanh,
  Softmax,    // over the last axis
  Concat,     // axis 0 stacks rows, axis 1 joins columns
  Slice,      // contiguous range of the last axis
  Embedding,  // one row of a rank-2 table, as a 1 x cols tensor
  Transpose,
  Log,        // natural log of max(x, floor)
};

std::string_view op_name(OpKind kind);

/// Handle to a node on a Tape. Only meaningful for the tape that issued it.
struct Var {
  std::uint32_t index = 0;
};

/// Extra integer/real arguments some primitives take.
struct OpAttrs {
  std::size_t a = 0;  // Concat: axis; Slice: begin; Embedding: row
  std::size_t b = 0;  // Slice: length
  double real = 0.0;  // Log: floor
};

/// Records executed primitives in execution order, so every node's inputs
/// precede it. One tape per thread; values are owned by the tape except for
/// parameters, which are referenced in place and must outlive it.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Tensor value);
  /// Watches an external tensor for gradients. Watching the same tensor
  /// twice returns the same node.
  Var parameter(const Tensor& value);

  Var forward(OpKind kind, std::span<const Var> inputs, OpAttrs attrs = {});

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var softmax(Var x);
  Var concat(std::span<const Var> parts, std::size_t axis);
  Var concat(std::initializer_list<Var> parts, std::size_t axis);
  Var slice(Var x, std::size_t begin, std::size_t length);
  Var embedding(Var table, std::size_t row);
  Var transpose(Var x);
  Var log(Var x, double floor);

  const Tensor& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  OpKind kind(Var v) const { return nodes_.at(v.index).kind; }
  bool requires_grad(Var v) const { return nodes_.at(v.index).requires_grad; }

  /// Recomputes every non-leaf node from its inputs in recorded order.
  /// Returns true when all recomputed values equal the recorded ones bit for bit.
  bool replay();

  /// Reverse sweep from a scalar node. grads[i] holds d(loss)/d(node i) when
  /// present[i] is set; other slots are untouched defaults.
  struct Adjoints {
    std::vector<Tensor> grads;
    std::vector<bool> present;
  };
  Adjoints backward(Var loss) const;

  /// Parameter leaves in the order they were first watched.
  const std::vector<std::pair<const Tensor*, Var>>& parameters() const { return params_; }

 private:
  struct Node {
    OpKind kind = OpKind::Constant;
    std::vector<std::uint32_t> inputs;
    OpAttrs attrs;
    Tensor owned;
    const Tensor* external = nullptr;
    bool requires_grad = false;
  };

  Tensor evaluate(const Node& node) const;
  void backprop_node(const Node& node, const Tensor& out_grad, Adjoints& adj) const;

  std::vector<Node> nodes_;
  std::vector<std::pair<const Tensor*, Var>> params_;
  std::unordered_map<const Tensor*, std::uint32_t> param_index_;
};

using GradientMap = std::unordered_map<const Tensor*, Tensor>;

/// d(loss)/d(p) for every parameter watched on the tape. Parameters that do
/// not reach the loss get a zero tensor of their own shape.
GradientMap gradient(const Tape& tape, Var loss);

/// A scalar function of some parameters, expressed by building its graph on
/// the tape it is handed.
using TapeFunction = std::function<Var(Tape&)>;

/// Compares analytic gradients of `f` against central differences with the
/// given step, perturbing every element of every tensor in `params`.
/// Returns max |analytic - numeric| / (|numeric| + 1e-8). `f` must be
/// deterministic; fix any seeds it uses.
double finite_difference_check(const TapeFunction& f, std::span<Tensor* const> params, double step);

}  // namespace pgsum
