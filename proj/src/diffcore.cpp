#include "ganda/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <unordered_set>

#include "ganda/errors.hpp"
#include "ganda/kernels.hpp"

namespace ganda {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool consumed = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

using detail::Node;

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

void check_finite(const char* op, std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw DivergenceError(std::string("non-finite value produced by ") + op);
  }
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

const Node& n(const DiffArray& a) {
  if (!a.defined()) throw std::logic_error("operation on an undefined DiffArray");
  return *a.node();
}

void require_rank2(const char* op, const DiffArray& a) {
  if (n(a).shape.size() != 2)
    throw ShapeError(std::string(op) + ": expected a rank-2 array, got " + shape_str(n(a).shape));
}

// Builds the result node; history is recorded only when some input needs a gradient.
DiffArray make_result(const char* op, Shape shape, std::vector<double> values,
                      std::vector<DiffArray> inputs, std::function<void(Node&)> backward) {
  check_finite(op, values);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->op = op;
  for (const auto& in : inputs) node->requires_grad = node->requires_grad || in.requires_grad();
  if (node->requires_grad) {
    for (auto& in : inputs) node->parents.push_back(in.node_ptr());
    node->backward = std::move(backward);
  }
  return DiffArray(std::move(node));
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

std::vector<double> transpose(std::span<const double> v, std::size_t rows, std::size_t cols) {
  std::vector<double> t(v.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = v[r * cols + c];
  return t;
}

}  // namespace

// ---- DiffArray ---------------------------------------------------------------

DiffArray::DiffArray(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t d : shape)
    if (d == 0) throw ShapeError("DiffArray: zero extent in shape " + shape_str(shape));
  if (numel(shape) != values.size())
    throw ShapeError("DiffArray: shape " + shape_str(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  check_finite("DiffArray construction", values);
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
}

DiffArray DiffArray::zeros(Shape shape, bool requires_grad) {
  const std::size_t count = numel(shape);
  return DiffArray(std::move(shape), std::vector<double>(count, 0.0), requires_grad);
}

DiffArray DiffArray::scalar(double value, bool requires_grad) {
  return DiffArray({1}, {value}, requires_grad);
}

DiffArray DiffArray::from_matrix(const Matrix& m, bool requires_grad) {
  return DiffArray({m.rows, m.cols}, m.data, requires_grad);
}

const Shape& DiffArray::shape() const { return n(*this).shape; }
std::size_t DiffArray::size() const { return n(*this).values.size(); }

std::size_t DiffArray::rows() const {
  require_rank2("rows", *this);
  return node_->shape[0];
}

std::size_t DiffArray::cols() const {
  require_rank2("cols", *this);
  return node_->shape[1];
}

std::span<const double> DiffArray::values() const { return n(*this).values; }

std::span<double> DiffArray::mutable_values() {
  if (!is_leaf()) throw std::logic_error("mutable_values: only leaf arrays may be modified");
  return node_->values;
}

double DiffArray::item() const {
  if (size() != 1) throw ShapeError("item: array of shape " + shape_str(shape()) + " is not a scalar");
  return node_->values[0];
}

Matrix DiffArray::to_matrix() const {
  require_rank2("to_matrix", *this);
  return Matrix(node_->shape[0], node_->shape[1], node_->values);
}

bool DiffArray::requires_grad() const { return n(*this).requires_grad; }
bool DiffArray::is_leaf() const { return std::string_view(n(*this).op) == "leaf"; }
bool DiffArray::has_grad() const { return !n(*this).grad.empty(); }
std::span<const double> DiffArray::grad() const { return n(*this).grad; }

void DiffArray::clear_grad() {
  n(*this);
  node_->grad.clear();
  if (is_leaf()) node_->consumed = false;
}

DiffArray DiffArray::detach() const { return DiffArray(shape(), n(*this).values, false); }

void DiffArray::backward() const {
  Node& root = const_cast<Node&>(n(*this));
  if (root.values.size() != 1)
    throw ShapeError("backward: root must be a scalar, got shape " + shape_str(root.shape));
  if (root.consumed)
    throw std::logic_error("backward: graph already consumed by a previous backward pass");
  if (!root.requires_grad) throw std::logic_error("backward: root does not require a gradient");

  // Iterative post-order DFS -> topological order (inputs before outputs).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{&root, 0}};
  seen.insert(&root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward) continue;
    node->backward(*node);
    for (const auto& p : node->parents)
      if (!p->grad.empty()) check_finite("backward", p->grad);
  }
  for (Node* node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->parents.clear();
      node->consumed = true;
    }
  }
  root.consumed = true;
}

// ---- ops -------------------------------------------------------------------

DiffArray matmul(const DiffArray& a, const DiffArray& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), nn = b.cols();
  if (b.rows() != k) shape_fail("matmul", a.shape(), b.shape());
  std::vector<double> out(m * nn, 0.0);
  kernels::active().gemm_nn(m, nn, k, a.values().data(), b.values().data(), out.data());
  return make_result("matmul", {m, nn}, std::move(out), {a, b}, [m, k, nn](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    const auto& kt = kernels::active();
    if (pa.requires_grad) {
      const auto bt = transpose(pb.values, k, nn);
      kt.gemm_nn(m, k, nn, self.grad.data(), bt.data(), pa.grad_buffer().data());
    }
    if (pb.requires_grad) kt.gemm_tn(k, nn, m, pa.values.data(), self.grad.data(), pb.grad_buffer().data());
  });
}

namespace {

template <class Fwd, class Bwd>
DiffArray elementwise_binary(const char* op, const DiffArray& a, const DiffArray& b, Fwd fwd,
                             Bwd bwd) {
  if (a.shape() != b.shape()) shape_fail(op, a.shape(), b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  return make_result(op, a.shape(), std::move(out), {a, b}, [bwd](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const auto [da, db] = bwd(pa.values[i], pb.values[i]);
      if (pa.requires_grad) pa.grad_buffer()[i] += da * self.grad[i];
      if (pb.requires_grad) pb.grad_buffer()[i] += db * self.grad[i];
    }
  });
}

}  // namespace

DiffArray add(const DiffArray& a, const DiffArray& b) {
  return elementwise_binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return std::pair{1.0, 1.0}; });
}

DiffArray sub(const DiffArray& a, const DiffArray& b) {
  return elementwise_binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return std::pair{1.0, -1.0}; });
}

DiffArray mul(const DiffArray& a, const DiffArray& b) {
  return elementwise_binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y) { return std::pair{y, x}; });
}

DiffArray add_row_bias(const DiffArray& x, const DiffArray& bias) {
  require_rank2("add_row_bias", x);
  const std::size_t rows = x.rows(), cols = x.cols();
  if (bias.size() != cols) shape_fail("add_row_bias", x.shape(), bias.shape());
  std::vector<double> out(x.values().begin(), x.values().end());
  const auto bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
  return make_result("add_row_bias", x.shape(), std::move(out), {x, bias},
                     [rows, cols](Node& self) {
                       Node& px = parent(self, 0);
                       Node& pb = parent(self, 1);
                       if (px.requires_grad)
                         kernels::active().axpy(self.grad.size(), 1.0, self.grad.data(),
                                                px.grad_buffer().data());
                       if (pb.requires_grad) {
                         auto& gb = pb.grad_buffer();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < cols; ++c) gb[c] += self.grad[r * cols + c];
                       }
                     });
}

DiffArray mul_scalar(const DiffArray& a, double s) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= s;
  return make_result("mul_scalar", a.shape(), std::move(out), {a}, [s](Node& self) {
    kernels::active().axpy(self.grad.size(), s, self.grad.data(), parent(self, 0).grad_buffer().data());
  });
}

DiffArray add_scalar(const DiffArray& a, double s) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v += s;
  return make_result("add_scalar", a.shape(), std::move(out), {a}, [](Node& self) {
    kernels::active().axpy(self.grad.size(), 1.0, self.grad.data(), parent(self, 0).grad_buffer().data());
  });
}

DiffArray relu(const DiffArray& a) {
  std::vector<double> out(a.size());
  kernels::active().relu(out.size(), a.values().data(), out.data());
  return make_result("relu", a.shape(), std::move(out), {a}, [](Node& self) {
    Node& pa = parent(self, 0);
    kernels::active().relu_backward(self.grad.size(), pa.values.data(), self.grad.data(),
                                    pa.grad_buffer().data());
  });
}

DiffArray exp(const DiffArray& a) {
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
  return make_result("exp", a.shape(), std::move(out), {a}, [](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.values[i];
  });
}

DiffArray softplus(const DiffArray& a) {
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::max(av[i], 0.0) + std::log1p(std::exp(-std::abs(av[i])));
  return make_result("softplus", a.shape(), std::move(out), {a}, [](Node& self) {
    Node& pa = parent(self, 0);
    auto& g = pa.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = pa.values[i];
      const double sig = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      g[i] += self.grad[i] * sig;
    }
  });
}

DiffArray log_softmax(const DiffArray& a) {
  require_rank2("log_softmax", a);
  const std::size_t rows = a.rows(), cols = a.cols();
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(x[c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[c] - lse;
  }
  return make_result("log_softmax", a.shape(), std::move(out), {a}, [rows, cols](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gsum += self.grad[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t i = r * cols + c;
        g[i] += self.grad[i] - std::exp(self.values[i]) * gsum;
      }
    }
  });
}

DiffArray softmax(const DiffArray& a) { return exp(log_softmax(a)); }

DiffArray sum(const DiffArray& a) {
  const auto av = a.values();
  const double s = std::accumulate(av.begin(), av.end(), 0.0);
  return make_result("sum", {1}, {s}, {a}, [](Node& self) {
    for (double& g : parent(self, 0).grad_buffer()) g += self.grad[0];
  });
}

DiffArray mean(const DiffArray& a) {
  const auto av = a.values();
  const double count = static_cast<double>(av.size());
  const double s = std::accumulate(av.begin(), av.end(), 0.0) / count;
  return make_result("mean", {1}, {s}, {a}, [count](Node& self) {
    for (double& g : parent(self, 0).grad_buffer()) g += self.grad[0] / count;
  });
}

DiffArray sum_squares(const DiffArray& a) {
  const auto av = a.values();
  double s = 0.0;
  for (double v : av) s += v * v;
  return make_result("sum_squares", {1}, {s}, {a}, [](Node& self) {
    Node& pa = parent(self, 0);
    kernels::active().axpy(pa.values.size(), 2.0 * self.grad[0], pa.values.data(),
                           pa.grad_buffer().data());
  });
}

DiffArray mean_rows(const DiffArray& a) {
  require_rank2("mean_rows", a);
  const std::size_t rows = a.rows(), cols = a.cols();
  const auto av = a.values();
  std::vector<double> out(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += av[r * cols + c];
  for (double& v : out) v /= static_cast<double>(rows);
  return make_result("mean_rows", {1, cols}, std::move(out), {a}, [rows, cols](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    const double inv = 1.0 / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[c] * inv;
  });
}

DiffArray concat(const DiffArray& a, const DiffArray& b) {
  require_rank2("concat", a);
  require_rank2("concat", b);
  if (a.rows() != b.rows()) shape_fail("concat", a.shape(), b.shape());
  const std::size_t rows = a.rows(), ca = a.cols(), cb = b.cols(), cols = ca + cb;
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.values().data() + r * ca, ca, out.data() + r * cols);
    std::copy_n(b.values().data() + r * cb, cb, out.data() + r * cols + ca);
  }
  return make_result("concat", {rows, cols}, std::move(out), {a, b}, [rows, ca, cb](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    const std::size_t cols = ca + cb;
    for (std::size_t r = 0; r < rows; ++r) {
      if (pa.requires_grad)
        for (std::size_t c = 0; c < ca; ++c) pa.grad_buffer()[r * ca + c] += self.grad[r * cols + c];
      if (pb.requires_grad)
        for (std::size_t c = 0; c < cb; ++c)
          pb.grad_buffer()[r * cb + c] += self.grad[r * cols + ca + c];
    }
  });
}

DiffArray concat_rows(const DiffArray& a, const DiffArray& b) {
  require_rank2("concat_rows", a);
  require_rank2("concat_rows", b);
  if (a.cols() != b.cols()) shape_fail("concat_rows", a.shape(), b.shape());
  std::vector<double> out(a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t na = a.size();
  return make_result("concat_rows", {a.rows() + b.rows(), a.cols()}, std::move(out), {a, b},
                     [na](Node& self) {
                       Node& pa = parent(self, 0);
                       Node& pb = parent(self, 1);
                       const auto& kt = kernels::active();
                       if (pa.requires_grad) kt.axpy(na, 1.0, self.grad.data(), pa.grad_buffer().data());
                       if (pb.requires_grad)
                         kt.axpy(self.grad.size() - na, 1.0, self.grad.data() + na,
                                 pb.grad_buffer().data());
                     });
}

DiffArray slice_rows(const DiffArray& a, std::size_t begin, std::size_t end) {
  require_rank2("slice_rows", a);
  if (begin >= end || end > a.rows())
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for shape " + shape_str(a.shape()));
  const std::size_t cols = a.cols();
  std::vector<double> out(a.values().begin() + begin * cols, a.values().begin() + end * cols);
  const std::size_t offset = begin * cols;
  return make_result("slice_rows", {end - begin, cols}, std::move(out), {a}, [offset](Node& self) {
    kernels::active().axpy(self.grad.size(), 1.0, self.grad.data(),
                           parent(self, 0).grad_buffer().data() + offset);
  });
}

DiffArray gather_rows(const DiffArray& a, std::span<const std::size_t> indices) {
  require_rank2("gather_rows", a);
  if (indices.empty()) throw ShapeError("gather_rows: empty index list");
  const std::size_t cols = a.cols();
  std::vector<double> out;
  out.reserve(indices.size() * cols);
  for (std::size_t idx : indices) {
    if (idx >= a.rows())
      throw ShapeError("gather_rows: row " + std::to_string(idx) + " out of range for shape " +
                       shape_str(a.shape()));
    out.insert(out.end(), a.values().begin() + idx * cols, a.values().begin() + (idx + 1) * cols);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const std::size_t count = idx.size();
  return make_result("gather_rows", {count, cols}, std::move(out), {a},
                     [idx = std::move(idx), cols](Node& self) {
                       auto& g = parent(self, 0).grad_buffer();
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t c = 0; c < cols; ++c)
                           g[idx[i] * cols + c] += self.grad[i * cols + c];
                     });
}

DiffArray pick(const DiffArray& a, std::span<const int> index) {
  require_rank2("pick", a);
  const std::size_t rows = a.rows(), cols = a.cols();
  if (index.size() != rows)
    throw ShapeError("pick: " + std::to_string(index.size()) + " indices for shape " +
                     shape_str(a.shape()));
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (index[r] < 0 || static_cast<std::size_t>(index[r]) >= cols)
      throw ShapeError("pick: index " + std::to_string(index[r]) + " out of range for shape " +
                       shape_str(a.shape()));
    out[r] = a.values()[r * cols + static_cast<std::size_t>(index[r])];
  }
  std::vector<int> idx(index.begin(), index.end());
  return make_result("pick", {rows}, std::move(out), {a}, [idx = std::move(idx), cols](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r)
      g[r * cols + static_cast<std::size_t>(idx[r])] += self.grad[r];
  });
}

DiffArray rowwise_outer(const DiffArray& f, const DiffArray& y) {
  require_rank2("rowwise_outer", f);
  require_rank2("rowwise_outer", y);
  if (f.rows() != y.rows()) shape_fail("rowwise_outer", f.shape(), y.shape());
  const std::size_t rows = f.rows(), d = f.cols(), c = y.cols();
  const auto fv = f.values();
  const auto yv = y.values();
  std::vector<double> out(rows * d * c);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = 0; q < c; ++q) out[(r * d + p) * c + q] = fv[r * d + p] * yv[r * c + q];
  return make_result("rowwise_outer", {rows, d * c}, std::move(out), {f, y},
                     [rows, d, c](Node& self) {
                       Node& pf = parent(self, 0);
                       Node& py = parent(self, 1);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t p = 0; p < d; ++p)
                           for (std::size_t q = 0; q < c; ++q) {
                             const double g = self.grad[(r * d + p) * c + q];
                             if (pf.requires_grad) pf.grad_buffer()[r * d + p] += g * py.values[r * c + q];
                             if (py.requires_grad) py.grad_buffer()[r * c + q] += g * pf.values[r * d + p];
                           }
                     });
}

DiffArray grad_reverse(const DiffArray& a, double coeff) {
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result("grad_reverse", a.shape(), std::move(out), {a}, [coeff](Node& self) {
    kernels::active().axpy(self.grad.size(), -coeff, self.grad.data(),
                           parent(self, 0).grad_buffer().data());
  });
}

// ---- optimizer -------------------------------------------------------------

void sgd_step(std::span<DiffArray> params, SgdState& state) {
  if (state.velocity.empty()) {
    for (const auto& p : params) state.velocity.emplace_back(p.size(), 0.0);
  }
  if (state.velocity.size() != params.size())
    throw ShapeError("sgd_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(state.velocity.size()) + " velocity buffers");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad())
      throw std::logic_error("sgd_step: parameter " + std::to_string(i) + " has no gradient");
    if (state.velocity[i].size() != params[i].size())
      throw ShapeError("sgd_step: velocity buffer " + std::to_string(i) +
                       " does not match parameter shape " + shape_str(params[i].shape()));
  }
  const auto& kt = kernels::active();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_values();
    kt.sgd_momentum(values.size(), state.learning_rate, state.momentum, state.weight_decay,
                    values.data(), params[i].grad().data(), state.velocity[i].data());
    check_finite("sgd_step", values);
    params[i].clear_grad();
  }
}

}  // namespace ganda
