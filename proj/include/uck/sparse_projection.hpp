#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "uck/tensor.hpp"

namespace uck {

enum class ProjectionKind { Sparsemax, Softmax };

std::string to_string(ProjectionKind kind);
ProjectionKind projection_kind_from_string(const std::string& name);

struct SparsemaxResult {
  std::vector<double> p;                 // on the probability simplex
  std::vector<std::size_t> support;      // indices with p > 0, ascending
  double tau = 0.0;                      // p_i = max(z_i - tau, 0)
};

// Euclidean projection of z onto the simplex. Exact zeros off support.
// The input is shifted by max(z) before sorting, which makes the returned
// probabilities bitwise invariant under constant shifts of z.
SparsemaxResult sparsemax_forward(std::span<const double> z);

// Jacobian-vector product of the projection: over the support S the Jacobian
// is I - 11ᵀ/|S|, zero elsewhere.
std::vector<double> sparsemax_jvp(std::span<const double> p, std::span<const std::size_t> support,
                                  std::span<const double> v);

// Max-stabilized softmax; strictly positive output.
std::vector<double> softmax_forward(std::span<const double> z);
std::vector<double> softmax_vjp(std::span<const double> p, std::span<const double> v);

// ---- tape-recorded wrappers -------------------------------------------------

Tensor project(ProjectionKind kind, const Tensor& z);       // vector -> simplex vector
Tensor rowwise_project(ProjectionKind kind, const Tensor& m);

// Per-row projection restricted to an index subset; entries outside the
// row's mask are exactly zero. Every mask must be non-empty.
Tensor masked_rowwise_project(ProjectionKind kind, const Tensor& m,
                              const std::vector<std::vector<std::size_t>>& row_masks);

}  // namespace uck
