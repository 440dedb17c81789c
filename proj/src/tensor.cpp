#include "uck/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace uck {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<EMat>;
using MapConstMat = Eigen::Map<const EMat>;

MapConstMat as_mat(const std::vector<double>& d, std::size_t r, std::size_t c) {
  return MapConstMat(d.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
MapMat as_mat(std::vector<double>& d, std::size_t r, std::size_t c) {
  return MapMat(d.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

thread_local bool g_grad_enabled = true;

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw std::invalid_argument(op + ": " + detail);
}

void check_same_shape(const std::string& op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    shape_error(op, "shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
  }
}

void check_matrix(const std::string& op, const Tensor& t) {
  if (t.ndim() != 2) shape_error(op, "expected a matrix, got shape " + shape_str(t.shape()));
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor wrap_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    shape_error("tensor", "shape " + shape_str(shape) + " does not match data length " +
                              std::to_string(data.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor make_node(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                 BackwardFn backward) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  bool any_grad = false;
  for (const auto& t : inputs) any_grad = any_grad || t.requires_grad();
  if (any_grad && g_grad_enabled) {
    impl->requires_grad = true;
    impl->inputs.reserve(inputs.size());
    for (const auto& t : inputs) impl->inputs.push_back(t.ptr());
    impl->backward_fn = std::move(backward);
  }
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> d(shape_size(shape), 0.0);
  return wrap_leaf(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> d(shape_size(shape), value);
  return wrap_leaf(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  return wrap_leaf(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return wrap_leaf(Shape{}, {value}, requires_grad);
}

double Tensor::value() const {
  if (size() != 1) {
    throw std::invalid_argument("value(): tensor has " + std::to_string(size()) + " elements");
  }
  return impl_->data[0];
}

bool Tensor::all_finite() const {
  for (double v : impl_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// ---- GradMap ----------------------------------------------------------------

std::vector<double>& GradMap::buffer(const TensorImpl* node) {
  auto it = grads_.find(node);
  if (it == grads_.end()) {
    it = grads_.emplace(node, std::vector<double>(node->data.size(), 0.0)).first;
  }
  return it->second;
}

const std::vector<double>* GradMap::find(const Tensor& leaf) const {
  auto it = grads_.find(leaf.id());
  return it == grads_.end() ? nullptr : &it->second;
}

Tensor GradMap::grad(const Tensor& leaf) const {
  if (const auto* g = find(leaf)) return Tensor::from_data(leaf.shape(), *g);
  return Tensor::zeros(leaf.shape());
}

void GradMap::add(const TensorImpl* node, const std::vector<double>& contribution) {
  auto& buf = buffer(node);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += contribution[i];
}

GradMap backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  }
  GradMap grads;
  if (!loss.requires_grad()) return grads;

  // Post-order DFS over grad-requiring ancestors; creation order already
  // guarantees acyclicity.
  std::vector<const TensorImpl*> order;
  std::unordered_map<const TensorImpl*, bool> state;  // false=open, true=done
  std::vector<std::pair<const TensorImpl*, std::size_t>> stack;
  stack.emplace_back(loss.id(), 0);
  state[loss.id()] = false;
  while (!stack.empty()) {
    auto& [node, next_input] = stack.back();
    if (next_input < node->inputs.size()) {
      const TensorImpl* child = node->inputs[next_input++].get();
      if (child->requires_grad && !state.count(child)) {
        state[child] = false;
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      state[node] = true;
      stack.pop_back();
    }
  }

  grads.buffer(loss.id())[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const TensorImpl* node = *it;
    if (node->backward_fn) node->backward_fn(grads.buffer(node), grads);
  }
  return grads;
}

// ---- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return make_node(a.shape(), std::move(out), {a, b}, [a, b](const std::vector<double>& g, GradMap& gm) {
    if (a.requires_grad()) gm.add(a.id(), g);
    if (b.requires_grad()) gm.add(b.id(), g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  return make_node(a.shape(), std::move(out), {a, b}, [a, b](const std::vector<double>& g, GradMap& gm) {
    if (a.requires_grad()) gm.add(a.id(), g);
    if (b.requires_grad()) {
      auto& gb = gm.buffer(b.id());
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return make_node(a.shape(), std::move(out), {a, b}, [a, b](const std::vector<double>& g, GradMap& gm) {
    if (a.requires_grad()) {
      auto& ga = gm.buffer(a.id());
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.at(i);
    }
    if (b.requires_grad()) {
      auto& gb = gm.buffer(b.id());
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.at(i);
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * c;
  return make_node(a.shape(), std::move(out), {a}, [a, c](const std::vector<double>& g, GradMap& gm) {
    auto& ga = gm.buffer(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
  });
}

Tensor add_const(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + c;
  return make_node(a.shape(), std::move(out), {a}, [a](const std::vector<double>& g, GradMap& gm) {
    gm.add(a.id(), g);
  });
}

Tensor tanh(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.at(i));
  Tensor y = make_node(x.shape(), std::move(out), {x}, nullptr);
  if (y.requires_grad()) {
    const std::vector<double> yv = y.data();
    y.impl()->backward_fn = [x, yv](const std::vector<double>& g, GradMap& gm) {
      auto& gx = gm.buffer(x.id());
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - yv[i] * yv[i]);
    };
  }
  return y;
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) > 0.0 ? x.at(i) : 0.0;
  return make_node(x.shape(), std::move(out), {x}, [x](const std::vector<double>& g, GradMap& gm) {
    auto& gx = gm.buffer(x.id());
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x.at(i) > 0.0) gx[i] += g[i];
    }
  });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(std::max(x.at(i), lo), hi);
  // Subgradient: passes only strictly inside the interval.
  return make_node(x.shape(), std::move(out), {x}, [x, lo, hi](const std::vector<double>& g, GradMap& gm) {
    auto& gx = gm.buffer(x.id());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = x.at(i);
      if (v > lo && v < hi) gx[i] += g[i];
    }
  });
}

// ---- matrix ops -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_matrix("matmul", a);
  check_matrix("matmul", b);
  if (a.cols() != b.rows()) {
    shape_error("matmul", "inner extents differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  as_mat(out, m, n).noalias() = as_mat(a.data(), m, k) * as_mat(b.data(), k, n);
  return make_node({m, n}, std::move(out), {a, b},
                   [a, b, m, k, n](const std::vector<double>& g, GradMap& gm) {
                     auto G = as_mat(g, m, n);
                     if (a.requires_grad()) {
                       as_mat(gm.buffer(a.id()), m, k).noalias() += G * as_mat(b.data(), k, n).transpose();
                     }
                     if (b.requires_grad()) {
                       as_mat(gm.buffer(b.id()), k, n).noalias() += as_mat(a.data(), m, k).transpose() * G;
                     }
                   });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  check_matrix("matmul_nt", a);
  check_matrix("matmul_nt", b);
  if (a.cols() != b.cols()) {
    shape_error("matmul_nt", "inner extents differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> out(m * n);
  as_mat(out, m, n).noalias() = as_mat(a.data(), m, k) * as_mat(b.data(), n, k).transpose();
  return make_node({m, n}, std::move(out), {a, b},
                   [a, b, m, k, n](const std::vector<double>& g, GradMap& gm) {
                     auto G = as_mat(g, m, n);
                     if (a.requires_grad()) {
                       as_mat(gm.buffer(a.id()), m, k).noalias() += G * as_mat(b.data(), n, k);
                     }
                     if (b.requires_grad()) {
                       as_mat(gm.buffer(b.id()), n, k).noalias() += G.transpose() * as_mat(a.data(), m, k);
                     }
                   });
}

Tensor transpose(const Tensor& a) {
  check_matrix("transpose", a);
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  as_mat(out, n, m) = as_mat(a.data(), m, n).transpose();
  return make_node({n, m}, std::move(out), {a}, [a, m, n](const std::vector<double>& g, GradMap& gm) {
    as_mat(gm.buffer(a.id()), m, n) += as_mat(g, n, m).transpose();
  });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  check_matrix("add_rowvec", m);
  if (v.ndim() != 1 || v.size() != m.cols()) {
    shape_error("add_rowvec", "vector " + shape_str(v.shape()) + " vs matrix " + shape_str(m.shape()));
  }
  const std::size_t r = m.rows(), c = m.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = m.at(i, j) + v.at(j);
  }
  return make_node({r, c}, std::move(out), {m, v}, [m, v, r, c](const std::vector<double>& g, GradMap& gm) {
    if (m.requires_grad()) gm.add(m.id(), g);
    if (v.requires_grad()) {
      auto& gv = gm.buffer(v.id());
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gv[j] += g[i * c + j];
      }
    }
  });
}

Tensor mul_rowwise(const Tensor& m, const Tensor& v) {
  check_matrix("mul_rowwise", m);
  if (v.ndim() != 1 || v.size() != m.rows()) {
    shape_error("mul_rowwise", "vector " + shape_str(v.shape()) + " vs matrix " + shape_str(m.shape()));
  }
  const std::size_t r = m.rows(), c = m.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = m.at(i, j) * v.at(i);
  }
  return make_node({r, c}, std::move(out), {m, v}, [m, v, r, c](const std::vector<double>& g, GradMap& gm) {
    if (m.requires_grad()) {
      auto& gmat = gm.buffer(m.id());
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gmat[i * c + j] += g[i * c + j] * v.at(i);
      }
    }
    if (v.requires_grad()) {
      auto& gv = gm.buffer(v.id());
      for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += g[i * c + j] * m.at(i, j);
        gv[i] += s;
      }
    }
  });
}

// ---- shape ops --------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.ndim() != 1) shape_error("concat", "expected vectors, got " + shape_str(p.shape()));
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  const std::size_t total = out.size();
  return make_node({total}, std::move(out), parts, [parts, offsets](const std::vector<double>& g, GradMap& gm) {
    for (std::size_t p = 0; p < parts.size(); ++p) {
      if (!parts[p].requires_grad()) continue;
      auto& gp = gm.buffer(parts[p].id());
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[p] + i];
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t r = parts.front().ndim() == 2 ? parts.front().rows() : 0;
  std::size_t total_c = 0;
  for (const auto& p : parts) {
    check_matrix("concat_cols", p);
    if (p.rows() != r) shape_error("concat_cols", "row counts differ");
    total_c += p.cols();
  }
  std::vector<double> out(r * total_c);
  std::size_t col0 = 0;
  std::vector<std::size_t> col_offsets;
  for (const auto& p : parts) {
    col_offsets.push_back(col0);
    const std::size_t c = p.cols();
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(p.data().begin() + i * c, c, out.begin() + i * total_c + col0);
    }
    col0 += c;
  }
  return make_node({r, total_c}, std::move(out), parts,
                   [parts, col_offsets, r, total_c](const std::vector<double>& g, GradMap& gm) {
                     for (std::size_t p = 0; p < parts.size(); ++p) {
                       if (!parts[p].requires_grad()) continue;
                       const std::size_t c = parts[p].cols();
                       auto& gp = gm.buffer(parts[p].id());
                       for (std::size_t i = 0; i < r; ++i) {
                         for (std::size_t j = 0; j < c; ++j) {
                           gp[i * c + j] += g[i * total_c + col_offsets[p] + j];
                         }
                       }
                     }
                   });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t c = parts.front().ndim() == 2 ? parts.front().cols() : 0;
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  std::size_t total_r = 0;
  for (const auto& p : parts) {
    check_matrix("concat_rows", p);
    if (p.cols() != c) shape_error("concat_rows", "column counts differ");
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
    total_r += p.rows();
  }
  return make_node({total_r, c}, std::move(out), parts,
                   [parts, offsets](const std::vector<double>& g, GradMap& gm) {
                     for (std::size_t p = 0; p < parts.size(); ++p) {
                       if (!parts[p].requires_grad()) continue;
                       auto& gp = gm.buffer(parts[p].id());
                       for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[p] + i];
                     }
                   });
}

namespace {

Tensor reduce_impl(const Tensor& x, std::size_t axis, bool take_mean, const std::string& name) {
  if (x.ndim() == 1) {
    if (axis != 0) shape_error(name, "axis out of range for vector");
    if (x.size() == 0) shape_error(name, "empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x.at(i);
    const double denom = take_mean ? static_cast<double>(x.size()) : 1.0;
    const std::size_t n = x.size();
    return make_node(Shape{}, {s / denom}, {x}, [x, denom, n](const std::vector<double>& g, GradMap& gm) {
      auto& gx = gm.buffer(x.id());
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[0] / denom;
    });
  }
  check_matrix(name, x);
  const std::size_t r = x.rows(), c = x.cols();
  if (r == 0 || c == 0) shape_error(name, "empty input");
  if (axis == 0) {
    std::vector<double> out(c, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) out[j] += x.at(i, j);
    }
    const double denom = take_mean ? static_cast<double>(r) : 1.0;
    if (take_mean) {
      for (auto& v : out) v /= denom;
    }
    return make_node({c}, std::move(out), {x}, [x, r, c, denom](const std::vector<double>& g, GradMap& gm) {
      auto& gx = gm.buffer(x.id());
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j] / denom;
      }
    });
  }
  if (axis != 1) shape_error(name, "axis out of range for matrix");
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i] += x.at(i, j);
  }
  const double denom = take_mean ? static_cast<double>(c) : 1.0;
  if (take_mean) {
    for (auto& v : out) v /= denom;
  }
  return make_node({r}, std::move(out), {x}, [x, r, c, denom](const std::vector<double>& g, GradMap& gm) {
    auto& gx = gm.buffer(x.id());
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[i] / denom;
    }
  });
}

}  // namespace

Tensor mean_axis(const Tensor& x, std::size_t axis) { return reduce_impl(x, axis, true, "mean_axis"); }
Tensor sum_axis(const Tensor& x, std::size_t axis) { return reduce_impl(x, axis, false, "sum_axis"); }

Tensor mean_all(const Tensor& x) {
  if (x.size() == 0) throw std::invalid_argument("mean_all: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x.at(i);
  const double n = static_cast<double>(x.size());
  return make_node(Shape{}, {s / n}, {x}, [x, n](const std::vector<double>& g, GradMap& gm) {
    auto& gx = gm.buffer(x.id());
    for (auto& v : gx) v += g[0] / n;
  });
}

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x.at(i);
  return make_node(Shape{}, {s}, {x}, [x](const std::vector<double>& g, GradMap& gm) {
    auto& gx = gm.buffer(x.id());
    for (auto& v : gx) v += g[0];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    shape_error("reshape", shape_str(x.shape()) + " -> " + shape_str(shape) + " changes size");
  }
  return make_node(std::move(shape), x.data(), {x}, [x](const std::vector<double>& g, GradMap& gm) {
    gm.add(x.id(), g);
  });
}

Tensor row(const Tensor& m, std::size_t i) {
  check_matrix("row", m);
  if (i >= m.rows()) throw std::out_of_range("row: index " + std::to_string(i) + " out of range");
  const std::size_t c = m.cols();
  std::vector<double> out(m.data().begin() + i * c, m.data().begin() + (i + 1) * c);
  return make_node({c}, std::move(out), {m}, [m, i, c](const std::vector<double>& g, GradMap& gm) {
    auto& gmat = gm.buffer(m.id());
    for (std::size_t j = 0; j < c; ++j) gmat[i * c + j] += g[j];
  });
}

Tensor rows_slice(const Tensor& m, std::size_t r0, std::size_t r1) {
  check_matrix("rows_slice", m);
  if (r0 > r1 || r1 > m.rows()) throw std::out_of_range("rows_slice: bad range");
  const std::size_t c = m.cols();
  std::vector<double> out(m.data().begin() + r0 * c, m.data().begin() + r1 * c);
  return make_node({r1 - r0, c}, std::move(out), {m}, [m, r0, c](const std::vector<double>& g, GradMap& gm) {
    auto& gmat = gm.buffer(m.id());
    for (std::size_t i = 0; i < g.size(); ++i) gmat[r0 * c + i] += g[i];
  });
}

Tensor cols_slice(const Tensor& m, std::size_t c0, std::size_t c1) {
  check_matrix("cols_slice", m);
  if (c0 > c1 || c1 > m.cols()) throw std::out_of_range("cols_slice: bad range");
  const std::size_t r = m.rows(), c = m.cols(), w = c1 - c0;
  std::vector<double> out(r * w);
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(m.data().begin() + i * c + c0, w, out.begin() + i * w);
  }
  return make_node({r, w}, std::move(out), {m}, [m, c0, r, c, w](const std::vector<double>& g, GradMap& gm) {
    auto& gmat = gm.buffer(m.id());
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < w; ++j) gmat[i * c + c0 + j] += g[i * w + j];
    }
  });
}

Tensor element(const Tensor& v, std::size_t i) {
  if (i >= v.size()) throw std::out_of_range("element: index out of range");
  return make_node(Shape{}, {v.at(i)}, {v}, [v, i](const std::vector<double>& g, GradMap& gm) {
    gm.buffer(v.id())[i] += g[0];
  });
}

Tensor broadcast_row(const Tensor& v, std::size_t n) {
  if (v.ndim() != 1) shape_error("broadcast_row", "expected a vector");
  const std::size_t d = v.size();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(v.data().begin(), d, out.begin() + i * d);
  return make_node({n, d}, std::move(out), {v}, [v, n, d](const std::vector<double>& g, GradMap& gm) {
    auto& gv = gm.buffer(v.id());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) gv[j] += g[i * d + j];
    }
  });
}

Tensor broadcast_scalar_col(const Tensor& s, std::size_t n) {
  if (s.size() != 1) shape_error("broadcast_scalar_col", "expected a scalar");
  std::vector<double> out(n, s.at(0));
  return make_node({n, 1}, std::move(out), {s}, [s](const std::vector<double>& g, GradMap& gm) {
    double acc = 0.0;
    for (double v : g) acc += v;
    gm.buffer(s.id())[0] += acc;
  });
}

Tensor sum_row_blocks(const Tensor& m, std::size_t blocks) {
  check_matrix("sum_row_blocks", m);
  if (blocks == 0 || m.rows() % blocks != 0) {
    shape_error("sum_row_blocks", "rows not divisible by block count");
  }
  const std::size_t n = m.rows() / blocks, c = m.cols();
  std::vector<double> out(n * c, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t i = 0; i < n * c; ++i) out[i] += m.data()[b * n * c + i];
  }
  return make_node({n, c}, std::move(out), {m}, [m, blocks, n, c](const std::vector<double>& g, GradMap& gm) {
    auto& gmat = gm.buffer(m.id());
    for (std::size_t b = 0; b < blocks; ++b) {
      for (std::size_t i = 0; i < n * c; ++i) gmat[b * n * c + i] += g[i];
    }
  });
}

// ---- layer norm -------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t d = x.ndim() == 1 ? x.size() : x.cols();
  const std::size_t r = x.ndim() == 1 ? 1 : x.rows();
  if (x.ndim() > 2) shape_error("layer_norm", "expected vector or matrix");
  if (gamma.ndim() != 1 || gamma.size() != d || beta.ndim() != 1 || beta.size() != d) {
    shape_error("layer_norm", "gamma/beta must have length " + std::to_string(d));
  }
  if (d == 0) shape_error("layer_norm", "empty rows");

  std::vector<double> out(r * d);
  std::vector<double> xhat(r * d);
  std::vector<double> inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* xr = x.data().data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (xr[j] - mean) * inv_std[i];
      out[i * d + j] = gamma.at(j) * xhat[i * d + j] + beta.at(j);
    }
  }
  return make_node(x.shape(), std::move(out), {x, gamma, beta},
                   [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), r,
                    d](const std::vector<double>& g, GradMap& gm) {
                     if (gamma.requires_grad()) {
                       auto& gg = gm.buffer(gamma.id());
                       for (std::size_t i = 0; i < r; ++i) {
                         for (std::size_t j = 0; j < d; ++j) gg[j] += g[i * d + j] * xhat[i * d + j];
                       }
                     }
                     if (beta.requires_grad()) {
                       auto& gb = gm.buffer(beta.id());
                       for (std::size_t i = 0; i < r; ++i) {
                         for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
                       }
                     }
                     if (x.requires_grad()) {
                       auto& gx = gm.buffer(x.id());
                       for (std::size_t i = 0; i < r; ++i) {
                         double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                         for (std::size_t j = 0; j < d; ++j) {
                           const double dxh = g[i * d + j] * gamma.at(j);
                           mean_dxhat += dxh;
                           mean_dxhat_xhat += dxh * xhat[i * d + j];
                         }
                         mean_dxhat /= static_cast<double>(d);
                         mean_dxhat_xhat /= static_cast<double>(d);
                         for (std::size_t j = 0; j < d; ++j) {
                           const double dxh = g[i * d + j] * gamma.at(j);
                           gx[i * d + j] +=
                               inv_std[i] * (dxh - mean_dxhat - xhat[i * d + j] * mean_dxhat_xhat);
                         }
                       }
                     }
                   });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  const double keep = 1.0 - rate;
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) * mask[i];
  return make_node(x.shape(), std::move(out), {x},
                   [x, mask = std::move(mask)](const std::vector<double>& g, GradMap& gm) {
                     auto& gx = gm.buffer(x.id());
                     for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
                   });
}

}  // namespace uck
