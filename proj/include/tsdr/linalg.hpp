#pragma once

#include "tsdr/series.hpp"

#include <span>
#include <vector>

namespace tsdr {

/// Square symmetric matrix. Construction symmetrizes the input as (A + A^T)/2.
class SymMatrix {
public:
  explicit SymMatrix(const Matrix& entries);

  static SymMatrix identity(Index dim);
  static SymMatrix zero(Index dim);

  Index dim() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  double operator()(Index i, Index j) const { return entries_(i, j); }

  /// v^T M v
  double quadratic_form(const Vector& v) const { return v.dot(entries_ * v); }

private:
  Matrix entries_;
};

/// Square matrix with orthonormal rows.
class OrthogonalBasis {
public:
  static constexpr double kTolerance = 1e-8;

  explicit OrthogonalBasis(Matrix rows);

  static OrthogonalBasis identity(Index dim);

  Index dim() const { return rows_.rows(); }
  const Matrix& rows() const { return rows_; }
  Vector row(Index i) const { return rows_.row(i).transpose(); }

private:
  Matrix rows_;
};

struct EigenDecomposition {
  Vector values;  // descending
  OrthogonalBasis vectors;  // eigenvectors as rows: M = V^T diag(values) V
};

EigenDecomposition sym_eig(const SymMatrix& m);

/// Symmetric inverse square root. Every eigenvalue must exceed
/// rel_tol times the largest one.
SymMatrix inv_sqrt(const SymMatrix& m, double rel_tol = 1e-10);

/// Sum over the stack and over rows of (w_i^T G_j w_i)^2.
double diagonality(const Matrix& w, std::span<const SymMatrix> stack);

/// Per-row contribution sum_j (w_i^T G_j w_i)^2.
Vector row_diagonality(const Matrix& w, std::span<const SymMatrix> stack);

struct JointDiagOptions {
  int max_sweeps = 100;
  double conv_tol = 1e-10;  // relative objective change per sweep
};

struct JointDiagResult {
  OrthogonalBasis basis;
  double objective = 0.0;
  std::vector<double> sweep_objectives;  // objective before the first sweep, then after each
  int sweeps = 0;
  bool converged = false;
};

/// Orthogonal approximate joint diagonalization by cyclic Jacobi rotations.
///
/// Maximizes sum_j sum_i (w_i^T G_j w_i)^2 over orthogonal W. The start is
/// the eigenbasis of sum_j G_j, which makes the result equivariant under
/// orthogonal changes of coordinates of the stack. Rows of the result are
/// ordered by descending per-row contribution (ties keep the lower index)
/// and each row's largest-magnitude entry is positive.
JointDiagResult joint_diag(std::span<const SymMatrix> stack,
                           const JointDiagOptions& options = {});

/// Fixed-point iteration W <- (M M^T)^{-1/2} M with rows
/// m(w_i) = sum_j (w_i^T G_j w_i) G_j w_i. Cross-check for joint_diag only.
JointDiagResult fixed_point_diag(std::span<const SymMatrix> stack,
                                 const OrthogonalBasis& init,
                                 int max_iter = 2000, double conv_tol = 1e-13);

/// Orders rows by descending contribution and fixes signs.
OrthogonalBasis canonicalize(const Matrix& w, std::span<const SymMatrix> stack);

}  // namespace tsdr
