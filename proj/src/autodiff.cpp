#include "pgsum/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <string>

namespace pgsum {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Constant: return "constant";
    case OpKind::Parameter: return "parameter";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Tanh: return "tanh";
    case OpKind::Softmax: return "softmax";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Embedding: return "embedding";
    case OpKind::Transpose: return "transpose";
    case OpKind::Log: return "log";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_fail(OpKind kind, const std::string& what, std::initializer_list<const Shape*> shapes) {
  std::string msg = std::string(op_name(kind)) + ": " + what + " (operand shapes:";
  for (const Shape* s : shapes) msg += " " + shape_to_string(*s);
  throw ShapeError(msg + ")");
}

void require_rank2(OpKind kind, const Tensor& t) {
  if (t.rank() != 2) shape_fail(kind, "expects rank-2 operand", {&t.shape()});
}

double sigmoid_value(double x) {
  // exp(-x) overflows to +inf for very negative x, giving exactly 0.
  return 1.0 / (1.0 + std::exp(-x));
}

// out[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

}  // namespace

Var Tape::constant(Tensor value) {
  Node node;
  node.kind = OpKind::Constant;
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::parameter(const Tensor& value) {
  if (auto it = param_index_.find(&value); it != param_index_.end()) return Var{it->second};
  Node node;
  node.kind = OpKind::Parameter;
  node.external = &value;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  const auto idx = static_cast<std::uint32_t>(nodes_.size() - 1);
  param_index_.emplace(&value, idx);
  params_.emplace_back(&value, Var{idx});
  return Var{idx};
}

const Tensor& Tape::value(Var v) const {
  const Node& n = nodes_.at(v.index);
  return n.external ? *n.external : n.owned;
}

Var Tape::forward(OpKind kind, std::span<const Var> inputs, OpAttrs attrs) {
  if (kind == OpKind::Constant || kind == OpKind::Parameter) {
    throw std::invalid_argument("forward: leaves are created with constant() or parameter()");
  }
  Node node;
  node.kind = kind;
  node.attrs = attrs;
  node.inputs.reserve(inputs.size());
  for (Var v : inputs) {
    if (v.index >= nodes_.size()) throw std::out_of_range("forward: input var not on this tape");
    node.inputs.push_back(v.index);
    node.requires_grad = node.requires_grad || nodes_[v.index].requires_grad;
  }
  node.owned = evaluate(node);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::matmul(Var a, Var b) { return forward(OpKind::MatMul, std::array{a, b}); }
Var Tape::add(Var a, Var b) { return forward(OpKind::Add, std::array{a, b}); }
Var Tape::mul(Var a, Var b) { return forward(OpKind::Mul, std::array{a, b}); }
Var Tape::sigmoid(Var x) { return forward(OpKind::Sigmoid, std::array{x}); }
Var Tape::tanh(Var x) { return forward(OpKind::Tanh, std::array{x}); }
Var Tape::softmax(Var x) { return forward(OpKind::Softmax, std::array{x}); }
Var Tape::concat(std::span<const Var> parts, std::size_t axis) {
  return forward(OpKind::Concat, parts, OpAttrs{.a = axis});
}
Var Tape::concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}
Var Tape::slice(Var x, std::size_t begin, std::size_t length) {
  return forward(OpKind::Slice, std::array{x}, OpAttrs{.a = begin, .b = length});
}
Var Tape::embedding(Var table, std::size_t row) {
  return forward(OpKind::Embedding, std::array{table}, OpAttrs{.a = row});
}
Var Tape::transpose(Var x) { return forward(OpKind::Transpose, std::array{x}); }
Var Tape::log(Var x, double floor) {
  return forward(OpKind::Log, std::array{x}, OpAttrs{.real = floor});
}

Tensor Tape::evaluate(const Node& node) const {
  auto in = [&](std::size_t i) -> const Tensor& { return value(Var{node.inputs[i]}); };
  auto arity = [&](std::size_t n) {
    if (node.inputs.size() != n) {
      throw ShapeError(std::string(op_name(node.kind)) + ": expects " + std::to_string(n) +
                       " operand(s), got " + std::to_string(node.inputs.size()));
    }
  };

  switch (node.kind) {
    case OpKind::Constant:
    case OpKind::Parameter:
      throw std::logic_error("evaluate called on a leaf node");

    case OpKind::MatMul: {
      arity(2);
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        shape_fail(node.kind, "inner dimensions must agree", {&a.shape(), &b.shape()});
      }
      const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
      Tensor out({m, n});
      gemm_nn(a.data().data(), b.data().data(), out.data().data(), m, k, n);
      return out;
    }

    case OpKind::Add: {
      arity(2);
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor out = a;
      if (a.shape() == b.shape()) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
      } else if (a.rank() == 2 && b.rank() == 2 && b.shape()[0] == 1 && b.shape()[1] == a.shape()[1]) {
        const std::size_t cols = a.cols();
        for (std::size_t r = 0; r < a.rows(); ++r)
          for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += b[c];
      } else {
        shape_fail(node.kind, "shapes must match or broadcast a 1 x cols row", {&a.shape(), &b.shape()});
      }
      return out;
    }

    case OpKind::Mul: {
      arity(2);
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.shape() != b.shape()) shape_fail(node.kind, "shapes must match", {&a.shape(), &b.shape()});
      Tensor out = a;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
      return out;
    }

    case OpKind::Sigmoid: {
      arity(1);
      Tensor out = in(0);
      for (double& v : out.data()) v = sigmoid_value(v);
      return out;
    }

    case OpKind::Tanh: {
      arity(1);
      Tensor out = in(0);
      for (double& v : out.data()) v = std::tanh(v);
      return out;
    }

    case OpKind::Softmax: {
      arity(1);
      Tensor out = in(0);
      const std::size_t cols = out.cols();
      for (std::size_t r = 0; r < out.rows(); ++r) {
        double* row = out.data().data() + r * cols;
        const double mx = *std::max_element(row, row + cols);
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          row[c] = std::exp(row[c] - mx);
          total += row[c];
        }
        for (std::size_t c = 0; c < cols; ++c) row[c] /= total;
      }
      return out;
    }

    case OpKind::Concat: {
      if (node.inputs.empty()) throw ShapeError("concat: needs at least one operand");
      const std::size_t axis = node.attrs.a;
      if (axis > 1) throw ShapeError("concat: axis must be 0 or 1");
      std::size_t rows = 0, cols = 0;
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        const Tensor& t = in(i);
        require_rank2(node.kind, t);
        if (axis == 0) {
          if (i > 0 && t.shape()[1] != cols) shape_fail(node.kind, "column counts differ on axis 0", {&in(0).shape(), &t.shape()});
          cols = t.shape()[1];
          rows += t.shape()[0];
        } else {
          if (i > 0 && t.shape()[0] != rows) shape_fail(node.kind, "row counts differ on axis 1", {&in(0).shape(), &t.shape()});
          rows = t.shape()[0];
          cols += t.shape()[1];
        }
      }
      Tensor out({rows, cols});
      std::size_t offset = 0;
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        const Tensor& t = in(i);
        if (axis == 0) {
          std::copy(t.data().begin(), t.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(offset));
          offset += t.size();
        } else {
          const std::size_t tc = t.shape()[1];
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < tc; ++c) out.at(r, offset + c) = t.at(r, c);
          offset += tc;
        }
      }
      return out;
    }

    case OpKind::Slice: {
      arity(1);
      const Tensor& x = in(0);
      const std::size_t begin = node.attrs.a, len = node.attrs.b;
      if (len == 0 || begin + len > x.cols()) {
        shape_fail(node.kind, "range [" + std::to_string(begin) + ", " + std::to_string(begin + len) +
                                  ") outside last axis", {&x.shape()});
      }
      Shape shape = x.shape();
      shape.back() = len;
      Tensor out(shape);
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < len; ++c) out[r * len + c] = x.at(r, begin + c);
      return out;
    }

    case OpKind::Embedding: {
      arity(1);
      const Tensor& table = in(0);
      require_rank2(node.kind, table);
      if (node.attrs.a >= table.shape()[0]) {
        shape_fail(node.kind, "row " + std::to_string(node.attrs.a) + " out of range", {&table.shape()});
      }
      const std::size_t cols = table.shape()[1];
      std::vector<double> row(table.data().begin() + static_cast<std::ptrdiff_t>(node.attrs.a * cols),
                              table.data().begin() + static_cast<std::ptrdiff_t>((node.attrs.a + 1) * cols));
      return Tensor({1, cols}, std::move(row));
    }

    case OpKind::Transpose: {
      arity(1);
      const Tensor& x = in(0);
      require_rank2(node.kind, x);
      const std::size_t r = x.shape()[0], c = x.shape()[1];
      Tensor out({c, r});
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(j, i) = x.at(i, j);
      return out;
    }

    case OpKind::Log: {
      arity(1);
      Tensor out = in(0);
      const double floor = node.attrs.real;
      for (double& v : out.data()) v = std::log(std::max(v, floor));
      return out;
    }
  }
  throw std::logic_error("unhandled op kind");
}

bool Tape::replay() {
  bool identical = true;
  for (Node& node : nodes_) {
    if (node.kind == OpKind::Constant || node.kind == OpKind::Parameter) continue;
    Tensor fresh = evaluate(node);
    if (fresh.shape() != node.owned.shape() ||
        std::memcmp(fresh.data().data(), node.owned.data().data(), fresh.size() * sizeof(double)) != 0) {
      identical = false;
    }
    node.owned = std::move(fresh);
  }
  return identical;
}

void Tape::backprop_node(const Node& node, const Tensor& g, Adjoints& adj) const {
  auto in = [&](std::size_t i) -> const Tensor& { return value(Var{node.inputs[i]}); };
  auto needs = [&](std::size_t i) { return nodes_[node.inputs[i]].requires_grad; };
  auto slot = [&](std::size_t i) -> Tensor& {
    const std::uint32_t idx = node.inputs[i];
    if (!adj.present[idx]) {
      adj.grads[idx] = Tensor(value(Var{idx}).shape());
      adj.present[idx] = true;
    }
    return adj.grads[idx];
  };
  const Tensor& y = node.owned;

  switch (node.kind) {
    case OpKind::Constant:
    case OpKind::Parameter:
      return;

    case OpKind::MatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
      if (needs(0)) {  // dA = G * B^T
        Tensor& ga = slot(0);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * b[p * n + j];
            ga[i * k + p] += acc;
          }
      }
      if (needs(1)) {  // dB = A^T * G
        Tensor& gb = slot(1);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
          }
      }
      return;
    }

    case OpKind::Add: {
      if (needs(0)) {
        Tensor& ga = slot(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (needs(1)) {
        Tensor& gb = slot(1);
        if (gb.size() == g.size()) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        } else {
          const std::size_t cols = g.cols();
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
        }
      }
      return;
    }

    case OpKind::Mul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (needs(0)) {
        Tensor& ga = slot(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (needs(1)) {
        Tensor& gb = slot(1);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
      return;
    }

    case OpKind::Sigmoid: {
      Tensor& gx = slot(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
      return;
    }

    case OpKind::Tanh: {
      Tensor& gx = slot(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
      return;
    }

    case OpKind::Softmax: {
      Tensor& gx = slot(0);
      const std::size_t cols = y.cols();
      for (std::size_t r = 0; r < y.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
      }
      return;
    }

    case OpKind::Concat: {
      std::size_t offset = 0;
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        const Tensor& t = in(i);
        if (node.attrs.a == 0) {
          if (needs(i)) {
            Tensor& gt = slot(i);
            for (std::size_t j = 0; j < t.size(); ++j) gt[j] += g[offset + j];
          }
          offset += t.size();
        } else {
          const std::size_t tc = t.shape()[1];
          if (needs(i)) {
            Tensor& gt = slot(i);
            for (std::size_t r = 0; r < t.shape()[0]; ++r)
              for (std::size_t c = 0; c < tc; ++c) gt.at(r, c) += g.at(r, offset + c);
          }
          offset += tc;
        }
      }
      return;
    }

    case OpKind::Slice: {
      Tensor& gx = slot(0);
      const std::size_t begin = node.attrs.a, len = node.attrs.b;
      for (std::size_t r = 0; r < gx.rows(); ++r)
        for (std::size_t c = 0; c < len; ++c) gx.at(r, begin + c) += g[r * len + c];
      return;
    }

    case OpKind::Embedding: {
      Tensor& gt = slot(0);
      const std::size_t cols = gt.cols();
      for (std::size_t c = 0; c < cols; ++c) gt[node.attrs.a * cols + c] += g[c];
      return;
    }

    case OpKind::Transpose: {
      Tensor& gx = slot(0);
      const std::size_t r = gx.shape()[0], c = gx.shape()[1];
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gx.at(i, j) += g.at(j, i);
      return;
    }

    case OpKind::Log: {
      const Tensor& x = in(0);
      Tensor& gx = slot(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] >= node.attrs.real) gx[i] += g[i] / x[i];
      }
      return;
    }
  }
}

Tape::Adjoints Tape::backward(Var loss) const {
  const Tensor& lv = value(loss);
  if (lv.size() != 1) {
    throw ShapeError("gradient: loss must be scalar, got shape " + shape_to_string(lv.shape()));
  }
  Adjoints adj;
  adj.grads.resize(nodes_.size());
  adj.present.assign(nodes_.size(), false);
  adj.grads[loss.index] = Tensor(lv.shape(), 1.0);
  adj.present[loss.index] = true;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!adj.present[i] || !node.requires_grad || node.inputs.empty()) continue;
    backprop_node(node, adj.grads[i], adj);
  }
  return adj;
}

GradientMap gradient(const Tape& tape, Var loss) {
  Tape::Adjoints adj = tape.backward(loss);
  GradientMap out;
  for (const auto& [tensor, var] : tape.parameters()) {
    if (adj.present[var.index]) {
      out.emplace(tensor, std::move(adj.grads[var.index]));
    } else {
      out.emplace(tensor, Tensor(tensor->shape()));
    }
  }
  return out;
}

double finite_difference_check(const TapeFunction& f, std::span<Tensor* const> params, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_difference_check: step must be positive");
  constexpr double kEps = 1e-8;

  GradientMap analytic;
  {
    Tape tape;
    for (Tensor* p : params) tape.parameter(*p);
    const Var loss = f(tape);
    analytic = gradient(tape, loss);
  }
  auto eval = [&] {
    Tape tape;
    return tape.value(f(tape)).item();
  };

  double worst = 0.0;
  for (Tensor* p : params) {
    const Tensor& g = analytic.at(p);
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double saved = (*p)[i];
      (*p)[i] = saved + step;
      const double up = eval();
      (*p)[i] = saved - step;
      const double down = eval();
      (*p)[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      worst = std::max(worst, std::abs(g[i] - numeric) / (std::abs(numeric) + kEps));
    }
  }
  return worst;
}

}  // namespace pgsum
