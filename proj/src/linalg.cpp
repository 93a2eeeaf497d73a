#include "tsdr/linalg.hpp"

#include "tsdr/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tsdr {

SymMatrix::SymMatrix(const Matrix& entries) {
  if (entries.rows() < 1 || entries.rows() != entries.cols()) {
    throw Error(ErrorCode::InvalidInput,
                fmt::format("symmetric matrix must be square and non-empty, got {}x{}",
                            entries.rows(), entries.cols()));
  }
  entries_ = 0.5 * (entries + entries.transpose());
}

SymMatrix SymMatrix::identity(Index dim) { return SymMatrix(Matrix::Identity(dim, dim)); }

SymMatrix SymMatrix::zero(Index dim) { return SymMatrix(Matrix::Zero(dim, dim)); }

OrthogonalBasis::OrthogonalBasis(Matrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() < 1 || rows_.rows() != rows_.cols()) {
    throw Error(ErrorCode::InvalidInput, "orthogonal basis must be square and non-empty");
  }
  const double err =
      (rows_ * rows_.transpose() - Matrix::Identity(rows_.rows(), rows_.rows())).norm();
  if (!(err <= kTolerance)) {
    throw Error(ErrorCode::InvalidInput,
                fmt::format("rows are not orthonormal (|WW^T - I|_F = {:.3g})", err));
  }
}

OrthogonalBasis OrthogonalBasis::identity(Index dim) {
  return OrthogonalBasis(Matrix::Identity(dim, dim));
}

EigenDecomposition sym_eig(const SymMatrix& m) {
  if (!m.entries().allFinite()) {
    throw Error(ErrorCode::InvalidInput, "eigendecomposition of a matrix with non-finite entries");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.entries());
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidInput, "symmetric eigensolver did not converge");
  }
  // Eigen returns ascending order with eigenvectors as columns.
  const Index n = m.dim();
  Vector values(n);
  Matrix rows(n, n);
  for (Index i = 0; i < n; ++i) {
    values(i) = solver.eigenvalues()(n - 1 - i);
    rows.row(i) = solver.eigenvectors().col(n - 1 - i).transpose();
  }
  return {values, OrthogonalBasis(rows)};
}

SymMatrix inv_sqrt(const SymMatrix& m, double rel_tol) {
  const auto eig = sym_eig(m);
  const double largest = eig.values(0);
  if (!(largest > 0.0)) {
    throw Error(ErrorCode::SingularCovariance,
                "covariance is not positive definite (largest eigenvalue <= 0)");
  }
  for (Index i = 0; i < eig.values.size(); ++i) {
    if (!(eig.values(i) > rel_tol * largest)) {
      throw Error(ErrorCode::SingularCovariance,
                  fmt::format("covariance is singular: eigenvalue {} = {:.6g} is below "
                              "{:.3g} x largest ({:.6g})",
                              i, eig.values(i), rel_tol, largest));
    }
  }
  const Matrix& v = eig.vectors.rows();
  const Vector scale = eig.values.array().rsqrt();
  return SymMatrix(v.transpose() * scale.asDiagonal() * v);
}

Vector row_diagonality(const Matrix& w, std::span<const SymMatrix> stack) {
  Vector out = Vector::Zero(w.rows());
  for (const auto& g : stack) {
    const Matrix wg = w * g.entries();
    for (Index i = 0; i < w.rows(); ++i) {
      const double d = wg.row(i).dot(w.row(i));
      out(i) += d * d;
    }
  }
  return out;
}

double diagonality(const Matrix& w, std::span<const SymMatrix> stack) {
  return row_diagonality(w, stack).sum();
}

OrthogonalBasis canonicalize(const Matrix& w, std::span<const SymMatrix> stack) {
  const Vector contrib = row_diagonality(w, stack);
  std::vector<Index> order(static_cast<std::size_t>(w.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return contrib(a) > contrib(b); });
  Matrix out(w.rows(), w.cols());
  for (Index i = 0; i < w.rows(); ++i) {
    Vector r = w.row(order[i]).transpose();
    Index arg = 0;
    r.cwiseAbs().maxCoeff(&arg);
    if (r(arg) < 0.0) r = -r;
    out.row(i) = r.transpose();
  }
  return OrthogonalBasis(out);
}

namespace {

void check_stack(std::span<const SymMatrix> stack) {
  if (stack.empty()) throw Error(ErrorCode::InvalidInput, "joint diagonalization of an empty stack");
  const Index dim = stack.front().dim();
  for (std::size_t j = 0; j < stack.size(); ++j) {
    if (stack[j].dim() != dim) {
      throw Error(ErrorCode::InvalidInput,
                  fmt::format("stack matrix {} has dimension {}, expected {}", j,
                              stack[j].dim(), dim));
    }
    if (!stack[j].entries().allFinite()) {
      throw Error(ErrorCode::InvalidInput, fmt::format("stack matrix {} has non-finite entries", j));
    }
  }
}

// Sum of squared diagonals of the working (rotated) matrices.
double working_objective(const std::vector<Matrix>& work) {
  double total = 0.0;
  for (const auto& a : work) total += a.diagonal().squaredNorm();
  return total;
}

}  // namespace

JointDiagResult joint_diag(std::span<const SymMatrix> stack, const JointDiagOptions& options) {
  check_stack(stack);
  const Index p = stack.front().dim();

  Matrix total = Matrix::Zero(p, p);
  for (const auto& g : stack) total += g.entries();
  Matrix w = sym_eig(SymMatrix(total)).vectors.rows();

  std::vector<Matrix> work;
  work.reserve(stack.size());
  for (const auto& g : stack) work.push_back(w * g.entries() * w.transpose());

  JointDiagResult result{OrthogonalBasis::identity(p), 0.0, {}, 0, false};
  double objective = working_objective(work);
  result.sweep_objectives.push_back(objective);

  for (int sweep = 0; sweep < options.max_sweeps && p > 1; ++sweep) {
    double largest_sine = 0.0;
    for (Index i = 0; i < p - 1; ++i) {
      for (Index k = i + 1; k < p; ++k) {
        // The pair rotation moves (a_ii - a_kk, 2 a_ik) by the angle 2*theta,
        // so the best angle follows from the leading eigenvector of sum h h^T.
        double g11 = 0.0, g12 = 0.0, g22 = 0.0;
        for (const auto& a : work) {
          const double h1 = a(i, i) - a(k, k);
          const double h2 = a(i, k) + a(k, i);
          g11 += h1 * h1;
          g12 += h1 * h2;
          g22 += h2 * h2;
        }
        const double ton = g11 - g22;
        const double toff = 2.0 * g12;
        const double theta = 0.5 * std::atan2(toff, ton + std::hypot(ton, toff));
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        if (std::abs(s) < 1e-15) continue;
        largest_sine = std::max(largest_sine, std::abs(s));

        for (auto& a : work) {
          // rows
          for (Index col = 0; col < p; ++col) {
            const double ai = a(i, col), ak = a(k, col);
            a(i, col) = c * ai + s * ak;
            a(k, col) = -s * ai + c * ak;
          }
          // columns
          for (Index row = 0; row < p; ++row) {
            const double ai = a(row, i), ak = a(row, k);
            a(row, i) = c * ai + s * ak;
            a(row, k) = -s * ai + c * ak;
          }
        }
        for (Index col = 0; col < p; ++col) {
          const double wi = w(i, col), wk = w(k, col);
          w(i, col) = c * wi + s * wk;
          w(k, col) = -s * wi + c * wk;
        }
      }
    }
    const double next = working_objective(work);
    result.sweep_objectives.push_back(next);
    result.sweeps = sweep + 1;
    const double change = next - objective;
    objective = next;
    if (largest_sine < 1e-12 ||
        change < options.conv_tol * std::max(std::abs(objective), 1e-300)) {
      result.converged = true;
      break;
    }
  }
  if (p == 1) result.converged = true;

  result.basis = canonicalize(w, stack);
  result.objective = diagonality(result.basis.rows(), stack);
  return result;
}

JointDiagResult fixed_point_diag(std::span<const SymMatrix> stack, const OrthogonalBasis& init,
                                 int max_iter, double conv_tol) {
  check_stack(stack);
  const Index p = stack.front().dim();
  if (init.dim() != p) {
    throw Error(ErrorCode::InvalidInput, "initial basis dimension does not match the stack");
  }
  Matrix w = init.rows();
  JointDiagResult result{OrthogonalBasis::identity(p), 0.0, {}, 0, false};
  result.sweep_objectives.push_back(diagonality(w, stack));

  for (int iter = 0; iter < max_iter; ++iter) {
    Matrix m = Matrix::Zero(p, p);
    for (const auto& g : stack) {
      const Matrix gw = g.entries() * w.transpose();  // columns G w_i
      for (Index i = 0; i < p; ++i) {
        const double d = w.row(i).dot(gw.col(i));
        m.row(i) += d * gw.col(i).transpose();
      }
    }
    const Matrix mmt = m * m.transpose();
    SymMatrix gram(mmt);
    const auto eig = sym_eig(gram);
    if (!(eig.values(p - 1) > 1e-14 * std::max(eig.values(0), 1e-300)) || !(eig.values(0) > 0.0)) {
      throw Error(ErrorCode::DegenerateStack,
                  "fixed-point step is undefined: M M^T is singular");
    }
    const Matrix& v = eig.vectors.rows();
    const Matrix next = v.transpose() * eig.values.array().rsqrt().matrix().asDiagonal() * v * m;

    double change = 0.0;
    for (Index i = 0; i < p; ++i) {
      change = std::max(change, 1.0 - std::abs(next.row(i).dot(w.row(i))));
    }
    w = next;
    result.sweeps = iter + 1;
    result.sweep_objectives.push_back(diagonality(w, stack));
    if (change < conv_tol) {
      result.converged = true;
      break;
    }
  }
  // Re-orthonormalize to absorb rounding before the basis check.
  Eigen::HouseholderQR<Matrix> qr(w.transpose());
  Matrix q = qr.householderQ() * Matrix::Identity(p, p);
  for (Index i = 0; i < p; ++i) {
    if (q.col(i).dot(w.row(i).transpose()) < 0.0) q.col(i) = -q.col(i);
  }
  result.basis = canonicalize(q.transpose(), stack);
  result.objective = diagonality(result.basis.rows(), stack);
  return result;
}

}  // namespace tsdr
