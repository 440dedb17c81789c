#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "uck/rng.hpp"

namespace uck {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

class GradMap;

// One node of the recorded computation. Nodes are created in evaluation
// order, so following `inputs` links always reaches earlier nodes; backward
// replays the reachable subgraph in reverse topological order.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  // Accumulates d(loss)/d(input) into the map, given d(loss)/d(this).
  std::function<void(const std::vector<double>& out_grad, GradMap& grads)> backward_fn;
};

// Value-semantics handle to a tape node. All math is 64-bit.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->data.size(); }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::size_t rows() const { return impl_->shape.at(0); }
  std::size_t cols() const { return impl_->shape.at(1); }
  bool requires_grad() const { return impl_->requires_grad; }

  std::vector<double>& data() { return impl_->data; }
  const std::vector<double>& data() const { return impl_->data; }

  double value() const;                      // scalar tensors only
  double at(std::size_t i) const { return impl_->data[i]; }
  double at(std::size_t i, std::size_t j) const { return impl_->data[i * cols() + j]; }

  // Leaf identity, the key used by GradMap.
  const TensorImpl* id() const { return impl_.get(); }
  TensorImpl* impl() const { return impl_.get(); }
  std::shared_ptr<TensorImpl> ptr() const { return impl_; }

  bool all_finite() const;

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;

  friend Tensor make_node(Shape shape, std::vector<double> data,
                          std::vector<Tensor> inputs,
                          std::function<void(const std::vector<double>&, GradMap&)> backward);
  friend Tensor wrap_leaf(Shape shape, std::vector<double> data, bool requires_grad);
};

// Gradients keyed by node identity. Leaves that are not reachable from the
// loss are absent; grad()/find() report zeros/null for them.
class GradMap {
 public:
  std::vector<double>& buffer(const TensorImpl* node);
  const std::vector<double>* find(const Tensor& leaf) const;
  Tensor grad(const Tensor& leaf) const;  // zeros when absent
  void add(const TensorImpl* node, const std::vector<double>& contribution);

 private:
  std::unordered_map<const TensorImpl*, std::vector<double>> grads_;
};

// Reverse-mode pass from a scalar loss. Rejects non-scalar losses. Repeated
// calls over the same graph return bitwise-identical maps.
GradMap backward(const Tensor& loss);

// Extension point for modules that define their own primitives (projections,
// losses): records a node with an explicit backward rule.
using BackwardFn = std::function<void(const std::vector<double>&, GradMap&)>;
Tensor make_node(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                 BackwardFn backward);

// Disables tape recording in scope (evaluation-mode forward passes).
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// ---- elementwise and linear-algebra primitives -----------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);     // [m×k]·[k×n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a · bᵀ, b is [n×k]
Tensor transpose(const Tensor& a);

Tensor add_rowvec(const Tensor& m, const Tensor& v);   // v broadcast over rows
Tensor mul_rowwise(const Tensor& m, const Tensor& v);  // row i scaled by v[i]

Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor concat(const std::vector<Tensor>& parts);       // vectors, end to end
Tensor concat_cols(const std::vector<Tensor>& parts);  // matrices, same rows
Tensor concat_rows(const std::vector<Tensor>& parts);  // matrices, same cols

Tensor mean_axis(const Tensor& x, std::size_t axis);
Tensor sum_axis(const Tensor& x, std::size_t axis);
Tensor mean_all(const Tensor& x);
Tensor sum_all(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor row(const Tensor& m, std::size_t i);                        // -> vector
Tensor rows_slice(const Tensor& m, std::size_t r0, std::size_t r1);
Tensor cols_slice(const Tensor& m, std::size_t c0, std::size_t c1);
Tensor element(const Tensor& v, std::size_t i);                    // -> scalar
Tensor broadcast_row(const Tensor& v, std::size_t n);              // -> [n×d]
Tensor broadcast_scalar_col(const Tensor& s, std::size_t n);       // -> [n×1]
Tensor sum_row_blocks(const Tensor& m, std::size_t blocks);        // [(B·n)×d] -> [n×d]

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

// Inverted dropout; identity when !training or rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

}  // namespace uck
