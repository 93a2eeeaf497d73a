#pragma once

#include "tsdr/estimators.hpp"
#include "tsdr/selection.hpp"
#include "tsdr/series.hpp"
#include "tsdr/tsgen.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tsdr {

enum class Basis { Linear, QuadraticSpline, CubicSpline };

std::string_view to_string(Basis basis);
Basis parse_basis(std::string_view text);
int degree(Basis basis);

struct PredictorConfig {
  Basis basis = Basis::QuadraticSpline;
  int interior_knots = 3;
  int test_size = 100;
  bool refit_reduction = false;  // refit the dimension reduction at every rolling step
};

/// B-spline basis by the Cox-de Boor recursion.
///
/// `knots` holds the boundary knots and the interior knots, strictly
/// increasing; the boundary knots are repeated degree + 1 times internally.
/// Inputs are clamped to the boundary range. The result has one row per
/// input and (knots.size() - 2) + degree + 1 columns.
Matrix bspline_basis(std::span<const double> xs, int degree, std::span<const double> knots);

/// One predictor series entering the regression at a lag: the row for
/// target time t uses values[t - lag].
struct Regressor {
  Series values;
  int lag = 0;
  std::string label;
};

/// Basis expansion of one regressor, fixed on a training sample.
///
/// Splines use interior knots at training quantiles and boundary knots at
/// the training range; all interior + degree + 1 B-splines are kept, so a
/// design with an intercept is rank deficient by one per spline block.
class RegressorBlock {
public:
  static RegressorBlock fit(std::span<const double> training_values, Basis basis,
                            int interior_knots);

  int width() const { return width_; }
  Basis basis() const { return basis_; }
  const std::vector<double>& knots() const { return knots_; }
  void evaluate(double value, double* out) const;

private:
  Basis basis_ = Basis::Linear;
  std::vector<double> knots_;
  int width_ = 0;
};

struct Design {
  Matrix matrix;               // intercept column first
  Vector target;
  std::vector<Index> times;    // target time of each row
  std::vector<RegressorBlock> blocks;
};

/// Design over target times [begin, end) whose response and lagged
/// regressor values are all available. Blocks are fitted on those rows.
/// Throws EmptySelection for an empty regressor list: the caller should
/// fall back to the unconditional-mean predictor.
Design build_design(std::span<const Regressor> regressors, std::span<const double> y, Basis basis,
                    int interior_knots, Index begin, Index end);

/// Least squares by normal equations, with a 1e-8 ridge when the design is
/// rank deficient. Returns whether the ridge was needed. The first ridge of
/// the process is logged as a warning, later ones at debug level.
bool solve_least_squares(const Matrix& gram, const Vector& moment, Vector& coef);

struct RMSEReport {
  std::string method;
  double rmse = 0.0;
  std::optional<std::string> relative_to;
  std::optional<double> relative_rmse;
  std::vector<double> errors;
  bool ridge_used = false;
};

/// Rolling one-step-ahead forecast of the last `test_size` responses.
/// Step i trains on times i .. T - test_size + i - 1 and predicts
/// T - test_size + i. Blocks are fitted on the first training window.
/// An empty regressor list gives the training-mean predictor.
RMSEReport forecast_regressors(std::span<const Regressor> regressors, std::span<const double> y,
                               const PredictorConfig& config, std::string label);

struct TsdrReduction {
  FitOptions fit{};
  Strategy strategy = Strategy::BiggestValues;
  double threshold = 0.8;
};

struct VectorizedReduction {
  VectorizedMethod method = VectorizedMethod::SAVE;
  int max_lag = 12;
  int slices = 5;
  double threshold = 0.8;
};

using Reduction = std::variant<TsdrReduction, VectorizedReduction>;

std::string reduction_label(const Reduction& reduction);

struct ReducedPredictors {
  std::vector<Regressor> regressors;
  std::optional<SelectionResult> selection;
  int k_hat = 0;
};

/// Fits the reduction on (x_train, y_train) and returns the regressors it
/// selects, evaluated over x_full.
ReducedPredictors reduce(const Reduction& reduction, const TimeSeriesMatrix& x_train,
                         std::span<const double> y_train, const TimeSeriesMatrix& x_full);

struct ForecastOutcome {
  RMSEReport report;
  ReducedPredictors predictors;  // from the first training window
};

ForecastOutcome rolling_forecast(const TimeSeriesMatrix& x, std::span<const double> y,
                                 const Reduction& reduction, const PredictorConfig& config);

/// True transformed regressors of a response model (e.g. z1^2 at lag 1).
std::vector<Regressor> oracle_regressors(ModelId model, const TimeSeriesMatrix& z);

/// OLS on the oracle regressors under the rolling protocol; only the
/// window settings of `config` are used.
RMSEReport oracle_forecast(const TimeSeriesMatrix& z, std::span<const double> y, ModelId model,
                           const PredictorConfig& config);

}  // namespace tsdr
