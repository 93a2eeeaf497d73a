#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace tsdr {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Univariate series; NaN marks positions where the value is unavailable
/// (e.g. responses whose lags reach before the start of the sample).
using Series = std::vector<double>;

inline constexpr double kUnavailable = std::numeric_limits<double>::quiet_NaN();

inline bool available(double v) { return !std::isnan(v); }

/// T x p panel of finite values, one row per time point.
class TimeSeriesMatrix {
public:
  TimeSeriesMatrix() = default;
  explicit TimeSeriesMatrix(Matrix values);

  Index length() const { return values_.rows(); }
  Index width() const { return values_.cols(); }

  const Matrix& values() const { return values_; }
  double operator()(Index t, Index i) const { return values_(t, i); }

  Series column(Index i) const;
  /// The first `end` rows.
  TimeSeriesMatrix head_rows(Index end) const;

private:
  Matrix values_;
};

/// Sample mean and variance with denominator n.
double mean(std::span<const double> v);
double variance(std::span<const double> v);
double correlation(std::span<const double> a, std::span<const double> b);
/// Lag-k sample autocorrelation.
double autocorrelation(std::span<const double> v, int lag);
/// Empirical quantile, linear interpolation between order statistics.
double quantile(std::vector<double> values, double prob);

}  // namespace tsdr
