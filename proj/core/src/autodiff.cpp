#include "ergae/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ergae {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

std::size_t normalize_axis(int axis, std::size_t rank, const char* op) {
  int r = static_cast<int>(rank);
  int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

// Maps each output element of a broadcast binary op to its source offsets.
struct Broadcast {
  enum class Kind { kSame, kBTail, kATail, kGeneral };

  Shape out;
  std::size_t n = 0;
  std::size_t a_size = 0;
  std::size_t b_size = 0;
  Kind kind = Kind::kSame;
  std::vector<std::size_t> a_index;
  std::vector<std::size_t> b_index;

  std::size_t a_at(std::size_t i) const {
    switch (kind) {
      case Kind::kSame:
      case Kind::kBTail:
        return i;
      case Kind::kATail:
        return i % a_size;
      default:
        return a_index[i];
    }
  }
  std::size_t b_at(std::size_t i) const {
    switch (kind) {
      case Kind::kSame:
      case Kind::kATail:
        return i;
      case Kind::kBTail:
        return i % b_size;
      default:
        return b_index[i];
    }
  }
};

Shape strip_leading_ones(const Shape& s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] == 1) ++i;
  return Shape(s.begin() + static_cast<std::ptrdiff_t>(i), s.end());
}

bool is_tail_of(const Shape& small, const Shape& big) {
  Shape s = strip_leading_ones(small);
  if (s.size() > big.size()) return false;
  return std::equal(s.rbegin(), s.rend(), big.rbegin());
}

Broadcast plan_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  Broadcast p;
  p.out = broadcast_shape(a.shape(), b.shape(), op);
  p.n = shape_size(p.out);
  p.a_size = a.size();
  p.b_size = b.size();
  if (a.shape() == b.shape()) {
    p.kind = Broadcast::Kind::kSame;
  } else if (a.size() == p.n && is_tail_of(b.shape(), p.out)) {
    p.kind = Broadcast::Kind::kBTail;
  } else if (b.size() == p.n && is_tail_of(a.shape(), p.out)) {
    p.kind = Broadcast::Kind::kATail;
  } else {
    p.kind = Broadcast::Kind::kGeneral;
    const std::size_t rank = p.out.size();
    auto strides_for = [&](const Shape& s) {
      std::vector<std::size_t> st(rank, 0);
      std::size_t stride = 1;
      for (std::size_t k = 0; k < s.size(); ++k) {
        std::size_t src = s.size() - 1 - k;
        std::size_t dst = rank - 1 - k;
        st[dst] = s[src] == 1 ? 0 : stride;
        stride *= s[src];
      }
      return st;
    };
    auto sa = strides_for(a.shape());
    auto sb = strides_for(b.shape());
    p.a_index.resize(p.n);
    p.b_index.resize(p.n);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t oa = 0, ob = 0;
    for (std::size_t i = 0; i < p.n; ++i) {
      p.a_index[i] = oa;
      p.b_index[i] = ob;
      for (std::size_t d = rank; d-- > 0;) {
        ++idx[d];
        oa += sa[d];
        ob += sb[d];
        if (idx[d] < p.out[d]) break;
        oa -= sa[d] * idx[d];
        ob -= sb[d] * idx[d];
        idx[d] = 0;
      }
    }
  }
  return p;
}

template <typename F>
Tensor apply_binary(const Tensor& a, const Tensor& b, const Broadcast& p, F f) {
  Tensor out(p.out);
  double* o = out.data();
  const double* x = a.data();
  const double* y = b.data();
  if (p.kind == Broadcast::Kind::kSame) {
    for (std::size_t i = 0; i < p.n; ++i) o[i] = f(x[i], y[i]);
  } else if (p.kind == Broadcast::Kind::kBTail) {
    for (std::size_t i = 0; i < p.n;) {
      for (std::size_t j = 0; j < p.b_size; ++j, ++i) o[i] = f(x[i], y[j]);
    }
  } else {
    for (std::size_t i = 0; i < p.n; ++i) o[i] = f(x[p.a_at(i)], y[p.b_at(i)]);
  }
  return out;
}

Var unary(Var a, Tensor out, std::function<void(const Tensor& x, const Tensor& y, const Tensor& g, Tensor& gx)> bw) {
  Tape& tape = *a.tape();
  int ia = a.id();
  return tape.record(std::move(out), {ia}, [ia, bw = std::move(bw)](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    bw(t.value(ia), t.value(self), g, t.grad_of(ia));
  });
}

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands on different tapes");
  }
  return *a.tape();
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t k = 0; k < rank; ++k) {
    std::size_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
    std::size_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
    }
    out[rank - 1 - k] = da == 1 ? db : da;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Parameter& parameter) {
  Node n;
  n.value = parameter.value;
  n.requires_grad = recording_ && parameter.trainable;
  n.parameter = n.requires_grad ? &parameter : nullptr;
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = recording_;
  return push(std::move(n));
}

bool Tape::any_requires_grad(std::span<const Var> vars) const {
  return std::any_of(vars.begin(), vars.end(), [this](const Var& v) { return requires_grad(v.id()); });
}

Var Tape::record(Tensor value, std::vector<int> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  bool needs = false;
  if (recording_) {
    for (int i : inputs) needs = needs || nodes_[static_cast<std::size_t>(i)].requires_grad;
  }
  n.requires_grad = needs;
  if (needs) {
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
  }
  return push(std::move(n));
}

Tensor& Tape::grad_of(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id())];
  return n.has_grad ? n.grad : Tensor(n.value.shape());
}

void Tape::backward(Var loss) {
  if (!loss.valid() || loss.tape() != this) throw std::invalid_argument("backward: loss is not on this tape");
  const Node& root = nodes_[static_cast<std::size_t>(loss.id())];
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_string(root.value.shape()));
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
  }
  grad_of(loss.id()).fill(1.0);
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.has_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.parameter != nullptr) {
      auto& dst = n.parameter->grad.storage();
      const auto& src = n.grad.storage();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise binary

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b, "add");
  auto plan = plan_broadcast(a.value(), b.value(), "add");
  Tensor out = apply_binary(a.value(), b.value(), plan, [](double x, double y) { return x + y; });
  int ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib}, [ia, ib, plan = std::move(plan)](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (t.requires_grad(ia)) {
      double* ga = t.grad_of(ia).data();
      for (std::size_t i = 0; i < plan.n; ++i) ga[plan.a_at(i)] += g[i];
    }
    if (t.requires_grad(ib)) {
      double* gb = t.grad_of(ib).data();
      for (std::size_t i = 0; i < plan.n; ++i) gb[plan.b_at(i)] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b, "subtract");
  auto plan = plan_broadcast(a.value(), b.value(), "subtract");
  Tensor out = apply_binary(a.value(), b.value(), plan, [](double x, double y) { return x - y; });
  int ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib}, [ia, ib, plan = std::move(plan)](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (t.requires_grad(ia)) {
      double* ga = t.grad_of(ia).data();
      for (std::size_t i = 0; i < plan.n; ++i) ga[plan.a_at(i)] += g[i];
    }
    if (t.requires_grad(ib)) {
      double* gb = t.grad_of(ib).data();
      for (std::size_t i = 0; i < plan.n; ++i) gb[plan.b_at(i)] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "multiply");
  auto plan = plan_broadcast(a.value(), b.value(), "multiply");
  Tensor out = apply_binary(a.value(), b.value(), plan, [](double x, double y) { return x * y; });
  int ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib}, [ia, ib, plan = std::move(plan)](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    const Tensor& va = t.value(ia);
    const Tensor& vb = t.value(ib);
    if (t.requires_grad(ia)) {
      double* ga = t.grad_of(ia).data();
      for (std::size_t i = 0; i < plan.n; ++i) ga[plan.a_at(i)] += g[i] * vb[plan.b_at(i)];
    }
    if (t.requires_grad(ib)) {
      double* gb = t.grad_of(ib).data();
      for (std::size_t i = 0; i < plan.n; ++i) gb[plan.b_at(i)] += g[i] * va[plan.a_at(i)];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.storage()) v *= factor;
  return unary(a, std::move(out), [factor](const Tensor&, const Tensor&, const Tensor& g, Tensor& gx) {
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
  });
}

// ---------------------------------------------------------------------------
// Linear algebra and structure

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "matmul");
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  if (va.rank() != 2 || vb.rank() != 2 || va.dim(1) != vb.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_string(va.shape()) + " and " +
                     shape_string(vb.shape()));
  }
  const auto m = static_cast<Eigen::Index>(va.dim(0));
  const auto k = static_cast<Eigen::Index>(va.dim(1));
  const auto n = static_cast<Eigen::Index>(vb.dim(1));
  Tensor out(Shape{va.dim(0), vb.dim(1)});
  if (k > 0) {
    MapMat(out.data(), m, n).noalias() = ConstMapMat(va.data(), m, k) * ConstMapMat(vb.data(), k, n);
  }
  int ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& t, int self) {
    if (k == 0) return;
    ConstMapMat g(t.grad_of(self).data(), m, n);
    if (t.requires_grad(ia)) {
      MapMat(t.grad_of(ia).data(), m, k).noalias() += g * ConstMapMat(t.value(ib).data(), k, n).transpose();
    }
    if (t.requires_grad(ib)) {
      MapMat(t.grad_of(ib).data(), k, n).noalias() += ConstMapMat(t.value(ia).data(), m, k).transpose() * g;
    }
  });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concatenate: no inputs");
  Tape& tape = *parts.front().tape();
  const Shape& first = parts.front().shape();
  std::size_t ax = normalize_axis(axis, first.size(), "concatenate");
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < ax; ++d) outer *= first[d];
  for (std::size_t d = ax + 1; d < first.size(); ++d) inner *= first[d];
  Shape out_shape = first;
  out_shape[ax] = 0;
  std::vector<std::size_t> widths;
  std::vector<int> ids;
  for (const Var& p : parts) {
    if (p.tape() != &tape) throw std::invalid_argument("concatenate: operands on different tapes");
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == ax || s[d] == first[d];
    if (!ok) {
      throw ShapeError("concatenate: incompatible shapes " + shape_string(first) + " and " + shape_string(s));
    }
    out_shape[ax] += s[ax];
    widths.push_back(s[ax] * inner);
    ids.push_back(p.id());
  }
  const std::size_t row = out_shape[ax] * inner;
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const double* src = parts[pi].value().data();
    const std::size_t w = widths[pi];
    for (std::size_t o = 0; o < outer; ++o) std::copy_n(src + o * w, w, out.data() + o * row + offset);
    offset += w;
  }
  return tape.record(std::move(out), ids, [ids, widths, outer, row](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < ids.size(); ++pi) {
      const std::size_t w = widths[pi];
      if (t.requires_grad(ids[pi])) {
        double* gp = t.grad_of(ids[pi]).data();
        for (std::size_t o = 0; o < outer; ++o) {
          const double* src = g.data() + o * row + off;
          for (std::size_t j = 0; j < w; ++j) gp[o * w + j] += src[j];
        }
      }
      off += w;
    }
  });
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  std::size_t ax = normalize_axis(axis, s.size(), "slice");
  if (begin > end || end > s[ax]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") outside axis of size " +
                     std::to_string(s[ax]) + " in shape " + shape_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < ax; ++d) outer *= s[d];
  for (std::size_t d = ax + 1; d < s.size(); ++d) inner *= s[d];
  Shape out_shape = s;
  out_shape[ax] = end - begin;
  const std::size_t src_row = s[ax] * inner;
  const std::size_t w = (end - begin) * inner;
  const std::size_t off = begin * inner;
  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(a.value().data() + o * src_row + off, w, out.data() + o * w);
  }
  return unary(a, std::move(out), [outer, src_row, w, off](const Tensor&, const Tensor&, const Tensor& g, Tensor& gx) {
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < w; ++j) gx[o * src_row + off + j] += g[o * w + j];
    }
  });
}

Var reshape(Var a, Shape shape) {
  if (shape_size(shape) != a.value().size()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  }
  return unary(a, a.value().reshaped(std::move(shape)), [](const Tensor&, const Tensor&, const Tensor& g, Tensor& gx) {
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var sum(Var a, int axis) {
  const Shape& s = a.shape();
  std::size_t ax = normalize_axis(axis, s.size(), "sum");
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < ax; ++d) outer *= s[d];
  for (std::size_t d = ax + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t len = s[ax];
  Shape out_shape = s;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(ax));
  Tensor out(out_shape);
  const double* x = a.value().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t l = 0; l < len; ++l) {
      const double* src = x + (o * len + l) * inner;
      double* dst = out.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  return unary(a, std::move(out), [outer, inner, len](const Tensor&, const Tensor&, const Tensor& g, Tensor& gx) {
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t l = 0; l < len; ++l) {
        double* dst = gx.data() + (o * len + l) * inner;
        const double* src = g.data() + o * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Var sum_all(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return unary(a, Tensor::scalar(total), [](const Tensor&, const Tensor&, const Tensor& g, Tensor& gx) {
    const double gv = g[0];
    for (double& v : gx.storage()) v += gv;
  });
}

Var mean(Var a, int axis) {
  std::size_t ax = normalize_axis(axis, a.shape().size(), "mean");
  std::size_t len = a.shape()[ax];
  return scale(sum(a, axis), len == 0 ? 0.0 : 1.0 / static_cast<double>(len));
}

Var mean_all(Var a) {
  std::size_t n = a.value().size();
  return scale(sum_all(a), n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities

Var tanh(Var a) {
  Tensor out = a.value();
  for (double& v : out.storage()) v = std::tanh(v);
  return unary(a, std::move(out), [](const Tensor&, const Tensor& y, const Tensor& g, Tensor& gx) {
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.storage()) v = 1.0 / (1.0 + std::exp(-v));
  return unary(a, std::move(out), [](const Tensor&, const Tensor& y, const Tensor& g, Tensor& gx) {
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (double& v : out.storage()) v = v > 0.0 ? v : 0.0;
  return unary(a, std::move(out), [](const Tensor& x, const Tensor&, const Tensor& g, Tensor& gx) {
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += x[i] > 0.0 ? g[i] : 0.0;
  });
}

Var exp(Var a) {
  Tensor out = a.value();
  for (double& v : out.storage()) v = std::exp(v);
  return unary(a, std::move(out), [](const Tensor&, const Tensor& y, const Tensor& g, Tensor& gx) {
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
  });
}

Var log(Var a) {
  Tensor out = a.value();
  for (double& v : out.storage()) v = std::log(std::max(v, kLogFloor));
  return unary(a, std::move(out), [](const Tensor& x, const Tensor&, const Tensor& g, Tensor& gx) {
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += x[i] > kLogFloor ? g[i] / x[i] : 0.0;
  });
}

Var softmax(Var a) {
  Tensor out = a.value();
  if (out.rank() == 0) throw ShapeError("softmax: scalar input");
  const std::size_t cols = out.cols();
  const std::size_t rows = cols == 0 ? 0 : out.size() / cols;
  for (std::size_t r = 0; r < rows; ++r) {
    double* x = out.data() + r * cols;
    double hi = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      x[j] = std::exp(x[j] - hi);
      z += x[j];
    }
    for (std::size_t j = 0; j < cols; ++j) x[j] /= z;
  }
  return unary(a, std::move(out), [rows, cols](const Tensor&, const Tensor& y, const Tensor& g, Tensor& gx) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yr = y.data() + r * cols;
      const double* gr = g.data() + r * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
      double* out_r = gx.data() + r * cols;
      for (std::size_t j = 0; j < cols; ++j) out_r[j] += yr[j] * (gr[j] - dot);
    }
  });
}

Var gather_rows(Var table, std::span<const std::int64_t> indices) {
  const Tensor& t = table.value();
  if (t.rank() != 2) throw ShapeError("embedding gather: table must be 2-D, got " + shape_string(t.shape()));
  const std::size_t rows = t.dim(0);
  const std::size_t width = t.dim(1);
  std::vector<std::int64_t> idx(indices.begin(), indices.end());
  Tensor out(Shape{idx.size(), width});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < -1 || idx[i] >= static_cast<std::int64_t>(rows)) {
      throw ShapeError("embedding gather: index " + std::to_string(idx[i]) + " out of range for table " +
                       shape_string(t.shape()));
    }
    if (idx[i] >= 0) std::copy_n(t.data() + static_cast<std::size_t>(idx[i]) * width, width, out.data() + i * width);
  }
  return unary(table, std::move(out),
               [idx = std::move(idx), width](const Tensor&, const Tensor&, const Tensor& g, Tensor& gx) {
                 for (std::size_t i = 0; i < idx.size(); ++i) {
                   if (idx[i] < 0) continue;
                   double* dst = gx.data() + static_cast<std::size_t>(idx[i]) * width;
                   const double* src = g.data() + i * width;
                   for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
                 }
               });
}

Var sparse_mix(Var x, std::size_t out_rows, std::shared_ptr<const SparseRows> rows) {
  const Tensor& t = x.value();
  if (t.rank() != 2) throw ShapeError("sparse mix: input must be 2-D, got " + shape_string(t.shape()));
  if (rows->size() != out_rows) throw ShapeError("sparse mix: row list does not match output rows");
  const std::size_t width = t.dim(1);
  Tensor out(Shape{out_rows, width});
  for (std::size_t i = 0; i < out_rows; ++i) {
    double* dst = out.data() + i * width;
    for (const auto& [j, w] : (*rows)[i]) {
      if (j >= t.dim(0)) throw ShapeError("sparse mix: source row " + std::to_string(j) + " out of range");
      const double* src = t.data() + j * width;
      for (std::size_t c = 0; c < width; ++c) dst[c] += w * src[c];
    }
  }
  return unary(x, std::move(out), [rows, width](const Tensor&, const Tensor&, const Tensor& g, Tensor& gx) {
    for (std::size_t i = 0; i < rows->size(); ++i) {
      const double* src = g.data() + i * width;
      for (const auto& [j, w] : (*rows)[i]) {
        double* dst = gx.data() + j * width;
        for (std::size_t c = 0; c < width; ++c) dst[c] += w * src[c];
      }
    }
  });
}

}  // namespace ergae
