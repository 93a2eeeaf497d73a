#pragma once

#include "tsdr/linalg.hpp"
#include "tsdr/series.hpp"
#include "tsdr/supervision.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace tsdr {

enum class Method { TSIR, TSAVE, TSSH };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

std::vector<int> lag_range(int max_lag);

struct FitOptions {
  Method method = Method::TSAVE;
  std::vector<int> lags = lag_range(12);
  int sir_slices = 10;   // TSIR, and the TSIR part of TSSH
  int save_slices = 2;   // TSAVE, and the TSAVE part of TSSH
  double weight = 0.5;   // TSSH weight a on the TSAVE part
  JointDiagOptions diag{};

  /// Uses the same slice count for every part.
  FitOptions& with_slices(int slices) {
    sir_slices = save_slices = slices;
    return *this;
  }
};

/// Output of TSIR / TSAVE / TSSH.
///
/// `lambda(i, j)` is the pseudo-eigenvalue w_i^T G_j w_i of component i at
/// lag `lags[j]` against the whitened stack; `l_matrix` is lambda scaled to
/// sum to one. Rows are ordered by descending row sum of lambda.
struct FitResult {
  Matrix gamma;  // unmixing matrix, gamma = W cov(x)^{-1/2}
  OrthogonalBasis w = OrthogonalBasis::identity(1);
  Vector center;  // mean of x
  Matrix lambda;
  Matrix l_matrix;
  std::vector<int> lags;
  Method method = Method::TSAVE;
  int sir_slices = 0;
  int save_slices = 0;
  double weight = 0.0;
  double objective = 0.0;  // joint diagonalization criterion, = sum of lambda^2

  /// Estimated sources gamma (x_t - center), one column per component.
  TimeSeriesMatrix sources(const TimeSeriesMatrix& x) const;
};

struct Whitening {
  Vector center;
  SymMatrix inv_sqrt_cov;
  TimeSeriesMatrix standardized;
};

/// Mean removal and multiplication by the symmetric cov(x)^{-1/2}.
Whitening whiten(const TimeSeriesMatrix& x);

FitResult tsdr_fit(const TimeSeriesMatrix& x, std::span<const double> y,
                   const FitOptions& options);

/// Fits on x and on x* = A x + b and returns the largest 1 - |corr| between
/// matched component series, after greedy sign/permutation matching. Only
/// the leading `components` rows are compared (all when <= 0).
double check_affine_equivariance(const TimeSeriesMatrix& x, std::span<const double> y,
                                 const Matrix& a, const Vector& b, const FitOptions& options,
                                 int components = 0);

enum class VectorizedMethod { SIR, SAVE };

std::string_view to_string(VectorizedMethod method);

/// iid SIR/SAVE on the stacked predictor x*_t = (x_{t-1}, ..., x_{t-s}).
struct VectorizedFitResult {
  Matrix directions;  // k_hat x (s p) rows in the original stacked coordinates
  Vector eigenvalues; // descending
  int k_hat = 0;
  Vector center;      // mean of x*
  int max_lag = 0;

  /// d_i^T (x*_t - center) for every t; NaN for t < max_lag.
  Series index_series(const TimeSeriesMatrix& x, int i) const;
};

/// Rows of x*, t = s..T-1 (row r belongs to time r + s).
Matrix stack_lags(const TimeSeriesMatrix& x, int max_lag);

VectorizedFitResult vectorized_fit(const TimeSeriesMatrix& x, std::span<const double> y,
                                   VectorizedMethod method, int max_lag, int slices,
                                   double threshold);

}  // namespace tsdr
