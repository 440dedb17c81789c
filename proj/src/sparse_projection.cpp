#include "uck/sparse_projection.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace uck {

std::string to_string(ProjectionKind kind) {
  return kind == ProjectionKind::Sparsemax ? "sparsemax" : "softmax";
}

ProjectionKind projection_kind_from_string(const std::string& name) {
  if (name == "sparsemax") return ProjectionKind::Sparsemax;
  if (name == "softmax") return ProjectionKind::Softmax;
  throw std::invalid_argument("unknown projection kind: " + name);
}

SparsemaxResult sparsemax_forward(std::span<const double> z) {
  const std::size_t n = z.size();
  if (n == 0) throw std::invalid_argument("sparsemax: empty input");
  for (double v : z) {
    if (!std::isfinite(v)) throw std::invalid_argument("sparsemax: non-finite input");
  }

  const double z_max = *std::max_element(z.begin(), z.end());
  std::vector<double> shifted(n);
  for (std::size_t i = 0; i < n; ++i) shifted[i] = z[i] - z_max;

  // Stable descending sort: equal inputs keep index order, so ties produce
  // identical outputs deterministically.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return shifted[a] > shifted[b]; });

  // k* = max{k : 1 + k z_(k) > c_k} with c_k the cumulative sum of sorted z.
  double cumsum = 0.0;
  double cumsum_at_kstar = 0.0;
  std::size_t k_star = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double zk = shifted[idx[k - 1]];
    cumsum += zk;
    if (1.0 + static_cast<double>(k) * zk > cumsum) {
      k_star = k;
      cumsum_at_kstar = cumsum;
    }
  }
  assert(k_star >= 1);  // k=1 always satisfies 1 + z_(1) > z_(1)

  const double tau_shifted = (cumsum_at_kstar - 1.0) / static_cast<double>(k_star);

  SparsemaxResult result;
  result.p.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    result.p[i] = std::max(shifted[i] - tau_shifted, 0.0);
    if (result.p[i] > 0.0) result.support.push_back(i);
  }
  result.tau = tau_shifted + z_max;
  return result;
}

std::vector<double> sparsemax_jvp(std::span<const double> p, std::span<const std::size_t> support,
                                  std::span<const double> v) {
  assert(!support.empty());
  if (v.size() != p.size()) throw std::invalid_argument("sparsemax_jvp: size mismatch");
  double mean_v = 0.0;
  for (std::size_t i : support) mean_v += v[i];
  mean_v /= static_cast<double>(support.size());
  std::vector<double> g(p.size(), 0.0);
  for (std::size_t i : support) g[i] = v[i] - mean_v;
  return g;
}

std::vector<double> softmax_forward(std::span<const double> z) {
  if (z.empty()) throw std::invalid_argument("softmax: empty input");
  for (double v : z) {
    if (!std::isfinite(v)) throw std::invalid_argument("softmax: non-finite input");
  }
  const double z_max = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - z_max);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

std::vector<double> softmax_vjp(std::span<const double> p, std::span<const double> v) {
  if (v.size() != p.size()) throw std::invalid_argument("softmax_vjp: size mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * v[i];
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] * (v[i] - dot);
  return g;
}

// ---- tape-recorded wrappers -------------------------------------------------

namespace {

// Shared state for the rowwise backward passes.
struct RowProjection {
  std::vector<double> p;                // full-width probabilities
  std::vector<std::size_t> support;     // sparsemax: support; softmax: the mask
};

Tensor project_impl(ProjectionKind kind, const Tensor& m, std::size_t rows, std::size_t cols,
                    const std::vector<std::vector<std::size_t>>* row_masks) {
  std::vector<double> out(rows * cols, 0.0);
  auto rowdata = std::make_shared<std::vector<RowProjection>>(rows);

  std::vector<double> gathered;
  for (std::size_t i = 0; i < rows; ++i) {
    const double* zr = m.data().data() + i * cols;
    RowProjection& rp = (*rowdata)[i];
    if (row_masks) {
      const auto& mask = (*row_masks)[i];
      if (mask.empty()) throw std::invalid_argument("masked projection: empty row mask");
      gathered.clear();
      for (std::size_t j : mask) gathered.push_back(zr[j]);
      rp.p.assign(cols, 0.0);
      if (kind == ProjectionKind::Sparsemax) {
        SparsemaxResult r = sparsemax_forward(gathered);
        for (std::size_t s : r.support) rp.support.push_back(mask[s]);
        for (std::size_t k = 0; k < mask.size(); ++k) rp.p[mask[k]] = r.p[k];
      } else {
        std::vector<double> p = softmax_forward(gathered);
        rp.support = mask;
        for (std::size_t k = 0; k < mask.size(); ++k) rp.p[mask[k]] = p[k];
      }
    } else {
      std::span<const double> zrow(zr, cols);
      if (kind == ProjectionKind::Sparsemax) {
        SparsemaxResult r = sparsemax_forward(zrow);
        rp.p = std::move(r.p);
        rp.support = std::move(r.support);
      } else {
        rp.p = softmax_forward(zrow);
        rp.support.resize(cols);
        std::iota(rp.support.begin(), rp.support.end(), 0);
      }
    }
    std::copy(rp.p.begin(), rp.p.end(), out.begin() + i * cols);
  }

  return make_node(m.shape(), std::move(out), {m},
                   [m, kind, rows, cols, rowdata](const std::vector<double>& g, GradMap& gm) {
                     auto& gz = gm.buffer(m.id());
                     for (std::size_t i = 0; i < rows; ++i) {
                       const RowProjection& rp = (*rowdata)[i];
                       std::span<const double> grow(g.data() + i * cols, cols);
                       if (kind == ProjectionKind::Sparsemax) {
                         const double ns = static_cast<double>(rp.support.size());
                         double mean_v = 0.0;
                         for (std::size_t j : rp.support) mean_v += grow[j];
                         mean_v /= ns;
                         for (std::size_t j : rp.support) gz[i * cols + j] += grow[j] - mean_v;
                       } else {
                         double dot = 0.0;
                         for (std::size_t j : rp.support) dot += rp.p[j] * grow[j];
                         for (std::size_t j : rp.support) {
                           gz[i * cols + j] += rp.p[j] * (grow[j] - dot);
                         }
                       }
                     }
                   });
}

}  // namespace

Tensor project(ProjectionKind kind, const Tensor& z) {
  if (z.ndim() != 1) throw std::invalid_argument("project: expected a vector");
  Tensor as_row = reshape(z, {1, z.size()});
  Tensor p = project_impl(kind, as_row, 1, z.size(), nullptr);
  return reshape(p, {z.size()});
}

Tensor rowwise_project(ProjectionKind kind, const Tensor& m) {
  if (m.ndim() != 2) throw std::invalid_argument("rowwise_project: expected a matrix");
  return project_impl(kind, m, m.rows(), m.cols(), nullptr);
}

Tensor masked_rowwise_project(ProjectionKind kind, const Tensor& m,
                              const std::vector<std::vector<std::size_t>>& row_masks) {
  if (m.ndim() != 2) throw std::invalid_argument("masked_rowwise_project: expected a matrix");
  if (row_masks.size() != m.rows()) {
    throw std::invalid_argument("masked_rowwise_project: one mask per row required");
  }
  return project_impl(kind, m, m.rows(), m.cols(), &row_masks);
}

}  // namespace uck
