#pragma once
// Define-by-run reverse-mode differentiation over dense float64 arrays.
//
// A DiffArray is a shared handle to a node in the computation graph. Ops build
// a new node per call; backward() walks the graph from a scalar root and
// accumulates d(root)/d(values) into every reachable node that requires a
// gradient. The graph is released after one backward pass.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ganda/matrix.hpp"

namespace ganda {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

namespace detail {
struct Node;
}

class DiffArray {
 public:
  DiffArray() = default;
  DiffArray(Shape shape, std::vector<double> values, bool requires_grad = false);

  static DiffArray zeros(Shape shape, bool requires_grad = false);
  static DiffArray scalar(double value, bool requires_grad = false);
  static DiffArray from_matrix(const Matrix& m, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  // Leading / trailing extent of a rank-2 array; throws ShapeError otherwise.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  // Only leaves may be mutated in place (parameters, inputs).
  std::span<double> mutable_values();
  double item() const;
  Matrix to_matrix() const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void clear_grad();

  // Root must hold exactly one value.
  void backward() const;

  // Same values, no history, no gradient.
  DiffArray detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
  explicit DiffArray(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// ---- forward ops -----------------------------------------------------------

DiffArray matmul(const DiffArray& a, const DiffArray& b);
DiffArray add(const DiffArray& a, const DiffArray& b);
DiffArray sub(const DiffArray& a, const DiffArray& b);
DiffArray mul(const DiffArray& a, const DiffArray& b);
// x[n x k] + bias[k] broadcast over rows (bias may also be [1 x k]).
DiffArray add_row_bias(const DiffArray& x, const DiffArray& bias);
DiffArray mul_scalar(const DiffArray& a, double s);
DiffArray add_scalar(const DiffArray& a, double s);
DiffArray relu(const DiffArray& a);
DiffArray exp(const DiffArray& a);
// log(1 + e^x), evaluated stably.
DiffArray softplus(const DiffArray& a);
// Row-wise on [n x k].
DiffArray log_softmax(const DiffArray& a);
DiffArray softmax(const DiffArray& a);
DiffArray mean(const DiffArray& a);
DiffArray sum(const DiffArray& a);
DiffArray sum_squares(const DiffArray& a);
// Column-wise mean of [n x k] -> [1 x k].
DiffArray mean_rows(const DiffArray& a);
// Column concatenation of [n x a] and [n x b] -> [n x (a+b)].
DiffArray concat(const DiffArray& a, const DiffArray& b);
DiffArray concat_rows(const DiffArray& a, const DiffArray& b);
DiffArray slice_rows(const DiffArray& a, std::size_t begin, std::size_t end);
DiffArray gather_rows(const DiffArray& a, std::span<const std::size_t> indices);
// out[i] = a[i, index[i]] for a [n x k] -> [n].
DiffArray pick(const DiffArray& a, std::span<const int> index);
// out[i, p*C + q] = f[i, p] * y[i, q] for f [n x D], y [n x C].
DiffArray rowwise_outer(const DiffArray& f, const DiffArray& y);
// Identity forward; backward multiplies the incoming gradient by -coeff.
DiffArray grad_reverse(const DiffArray& a, double coeff);

// ---- optimizer -------------------------------------------------------------

struct SgdState {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // One buffer per parameter, created on the first step.
  std::vector<std::vector<double>> velocity;
};

// v <- momentum*v + grad + weight_decay*param; param <- param - lr*v; grads cleared.
void sgd_step(std::span<DiffArray> params, SgdState& state);

}  // namespace ganda
