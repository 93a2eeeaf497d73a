#include "tsdr/predict.hpp"

#include "tsdr/error.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>

namespace tsdr {

namespace {

constexpr double kRidge = 1e-8;
constexpr double kPivotTol = 1e-12;

// Non-zero B-splines at x on the full (repeated) knot vector; writes the
// n_basis values of the whole row into `out`.
void bspline_row(double x, int degree, const std::vector<double>& full, double* out,
                 int n_basis) {
  std::fill(out, out + n_basis, 0.0);
  const double lo = full.front();
  const double hi = full.back();
  x = std::clamp(x, lo, hi);

  int span = n_basis - 1;
  if (x < hi) {
    span = static_cast<int>(std::upper_bound(full.begin(), full.end(), x) - full.begin()) - 1;
    span = std::clamp(span, degree, n_basis - 1);
  }

  std::vector<double> n(degree + 1), left(degree + 1), right(degree + 1);
  n[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[j] = x - full[span + 1 - j];
    right[j] = full[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = n[r] / (right[r + 1] + left[j - r]);
      n[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    n[j] = saved;
  }
  for (int r = 0; r <= degree; ++r) out[span - degree + r] = n[r];
}

std::vector<double> full_knots(std::span<const double> knots, int degree) {
  std::vector<double> full;
  full.insert(full.end(), degree, knots.front());
  full.insert(full.end(), knots.begin(), knots.end());
  full.insert(full.end(), degree, knots.back());
  return full;
}

bool usable_at(std::span<const Regressor> regressors, std::span<const double> y, Index t) {
  if (!available(y[t])) return false;
  for (const auto& r : regressors) {
    const Index s = t - r.lag;
    if (s < 0 || s >= static_cast<Index>(r.values.size()) || !available(r.values[s])) {
      return false;
    }
  }
  return true;
}

int design_width(const std::vector<RegressorBlock>& blocks) {
  int w = 1;
  for (const auto& b : blocks) w += b.width();
  return w;
}

void fill_row(std::span<const Regressor> regressors, const std::vector<RegressorBlock>& blocks,
              Index t, double* out) {
  out[0] = 1.0;
  int col = 1;
  for (std::size_t k = 0; k < regressors.size(); ++k) {
    blocks[k].evaluate(regressors[k].values[t - regressors[k].lag], out + col);
    col += blocks[k].width();
  }
}

std::vector<RegressorBlock> fit_blocks(std::span<const Regressor> regressors,
                                       std::span<const Index> times, Basis basis,
                                       int interior_knots) {
  std::vector<RegressorBlock> blocks;
  std::vector<double> sample(times.size());
  for (const auto& r : regressors) {
    for (std::size_t i = 0; i < times.size(); ++i) sample[i] = r.values[times[i] - r.lag];
    blocks.push_back(RegressorBlock::fit(sample, basis, interior_knots));
  }
  return blocks;
}

void check_config(const PredictorConfig& config, Index length) {
  if (config.test_size < 1) {
    throw Error(ErrorCode::InvalidInput, "test size must be at least 1");
  }
  if (config.interior_knots < 0) {
    throw Error(ErrorCode::InvalidInput, "interior knot count must be non-negative");
  }
  if (length <= config.test_size) {
    throw Error(ErrorCode::InsufficientData,
                fmt::format("series of length {} leaves no training data for {} test points",
                            length, config.test_size));
  }
}

double rmse_of(const std::vector<double>& errors) {
  double ss = 0.0;
  for (double e : errors) ss += e * e;
  return std::sqrt(ss / static_cast<double>(errors.size()));
}

TimeSeriesMatrix window(const TimeSeriesMatrix& x, Index begin, Index end) {
  return TimeSeriesMatrix(x.values().middleRows(begin, end - begin));
}

}  // namespace

std::string_view to_string(Basis basis) {
  switch (basis) {
    case Basis::Linear: return "linear";
    case Basis::QuadraticSpline: return "quadratic";
    case Basis::CubicSpline: return "cubic";
  }
  return "?";
}

Basis parse_basis(std::string_view text) {
  std::string key(text);
  for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto b : {Basis::Linear, Basis::QuadraticSpline, Basis::CubicSpline}) {
    if (key == to_string(b)) return b;
  }
  throw Error(ErrorCode::InvalidInput, fmt::format("unknown basis '{}'", text));
}

int degree(Basis basis) {
  switch (basis) {
    case Basis::Linear: return 1;
    case Basis::QuadraticSpline: return 2;
    case Basis::CubicSpline: return 3;
  }
  return 1;
}

Matrix bspline_basis(std::span<const double> xs, int degree, std::span<const double> knots) {
  if (degree < 0) throw Error(ErrorCode::InvalidInput, "spline degree must be non-negative");
  if (knots.size() < 2) throw Error(ErrorCode::InvalidInput, "need two boundary knots");
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i] > knots[i - 1])) {
      throw Error(ErrorCode::InvalidInput, "knots must be strictly increasing");
    }
  }
  const auto full = full_knots(knots, degree);
  const int n_basis = static_cast<int>(knots.size()) - 2 + degree + 1;
  Matrix out(static_cast<Index>(xs.size()), n_basis);
  std::vector<double> row(n_basis);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i])) throw Error(ErrorCode::InvalidInput, "non-finite spline input");
    bspline_row(xs[i], degree, full, row.data(), n_basis);
    for (int j = 0; j < n_basis; ++j) out(static_cast<Index>(i), j) = row[j];
  }
  return out;
}

RegressorBlock RegressorBlock::fit(std::span<const double> training_values, Basis basis,
                                   int interior_knots) {
  std::vector<double> values;
  for (double v : training_values) {
    if (available(v)) values.push_back(v);
  }
  if (values.empty()) {
    throw Error(ErrorCode::InsufficientData, "regressor has no training values");
  }
  RegressorBlock block;
  block.basis_ = basis;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  // A constant regressor is absorbed by the intercept.
  if (hi - lo <= 1e-12 * std::max(1.0, std::abs(lo))) return block;

  if (basis == Basis::Linear) {
    block.width_ = 1;
    return block;
  }
  block.knots_.push_back(lo);
  for (int k = 1; k <= interior_knots; ++k) {
    const double q = quantile(values, static_cast<double>(k) / (interior_knots + 1));
    if (q > block.knots_.back() && q < hi) block.knots_.push_back(q);
  }
  block.knots_.push_back(hi);
  block.width_ = static_cast<int>(block.knots_.size()) - 2 + degree(basis) + 1;
  return block;
}

void RegressorBlock::evaluate(double value, double* out) const {
  if (width_ == 0) return;
  if (basis_ == Basis::Linear) {
    out[0] = value;
    return;
  }
  const int d = degree(basis_);
  bspline_row(value, d, full_knots(knots_, d), out, width_);
}

Design build_design(std::span<const Regressor> regressors, std::span<const double> y, Basis basis,
                    int interior_knots, Index begin, Index end) {
  if (regressors.empty()) {
    throw Error(ErrorCode::EmptySelection,
                "no regressors selected; use the unconditional-mean predictor");
  }
  begin = std::max<Index>(begin, 0);
  end = std::min<Index>(end, static_cast<Index>(y.size()));
  Design d;
  for (Index t = begin; t < end; ++t) {
    if (usable_at(regressors, y, t)) d.times.push_back(t);
  }
  if (d.times.empty()) {
    throw Error(ErrorCode::InsufficientData, "no time point has all regressors available");
  }
  d.blocks = fit_blocks(regressors, d.times, basis, interior_knots);
  const int w = design_width(d.blocks);
  const auto n = static_cast<Index>(d.times.size());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(n, w);
  d.target.resize(n);
  for (Index r = 0; r < n; ++r) {
    fill_row(regressors, d.blocks, d.times[r], m.row(r).data());
    d.target(r) = y[d.times[r]];
  }
  d.matrix = m;
  return d;
}

bool solve_least_squares(const Matrix& gram, const Vector& moment, Vector& coef) {
  Eigen::LDLT<Matrix> ldlt(gram);
  bool ok = ldlt.info() == Eigen::Success;
  if (ok) {
    const Vector piv = ldlt.vectorD();
    const double top = piv.cwiseAbs().maxCoeff();
    ok = piv.minCoeff() > kPivotTol * top && top > 0.0;
  }
  if (ok) {
    coef = ldlt.solve(moment);
    return false;
  }
  Matrix ridged = gram;
  ridged.diagonal().array() += kRidge;
  coef = ridged.ldlt().solve(moment);
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    spdlog::warn("rank-deficient design, ridge {} applied (further cases logged at debug)",
                 kRidge);
  } else {
    spdlog::debug("rank-deficient design, ridge {} applied", kRidge);
  }
  return true;
}

RMSEReport forecast_regressors(std::span<const Regressor> regressors, std::span<const double> y,
                               const PredictorConfig& config, std::string label) {
  const auto length = static_cast<Index>(y.size());
  check_config(config, length);
  const Index train_end = length - config.test_size;

  std::vector<Index> train_times;
  for (Index t = 0; t < train_end; ++t) {
    if (usable_at(regressors, y, t)) train_times.push_back(t);
  }
  if (train_times.empty()) {
    throw Error(ErrorCode::InsufficientData, "first training window has no usable rows");
  }
  const auto blocks = fit_blocks(regressors, train_times, config.basis, config.interior_knots);
  const int w = design_width(blocks);
  if (static_cast<int>(train_times.size()) <= w) {
    throw Error(ErrorCode::InsufficientData,
                fmt::format("{} training rows for {} coefficients", train_times.size(), w));
  }

  std::vector<char> usable(length, 0);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(length, w);
  rows.setZero();
  for (Index t = 0; t < length; ++t) {
    usable[t] = usable_at(regressors, y, t) ? 1 : 0;
    if (usable[t]) fill_row(regressors, blocks, t, rows.row(t).data());
  }

  Matrix gram = Matrix::Zero(w, w);
  Vector moment = Vector::Zero(w);
  auto update = [&](Index t, double sign) {
    if (!usable[t]) return;
    const Vector r = rows.row(t).transpose();
    gram.selfadjointView<Eigen::Lower>().rankUpdate(r, sign);
    moment += sign * y[t] * r;
  };
  for (Index t : train_times) update(t, 1.0);

  RMSEReport report;
  report.method = std::move(label);
  Vector coef;
  for (int i = 0; i < config.test_size; ++i) {
    if (i > 0) {
      update(i - 1, -1.0);
      update(train_end + i - 1, 1.0);
    }
    const Index target = train_end + i;
    if (!usable[target]) {
      throw Error(ErrorCode::InsufficientData,
                  fmt::format("test point t={} lacks a response or regressor value", target));
    }
    Matrix full = gram.selfadjointView<Eigen::Lower>();
    report.ridge_used = solve_least_squares(full, moment, coef) || report.ridge_used;
    const double pred = rows.row(target).dot(coef.transpose());
    report.errors.push_back(y[target] - pred);
  }
  report.rmse = rmse_of(report.errors);
  return report;
}

std::string reduction_label(const Reduction& reduction) {
  if (const auto* t = std::get_if<TsdrReduction>(&reduction)) {
    return std::string(to_string(t->fit.method));
  }
  return std::string(to_string(std::get<VectorizedReduction>(reduction).method));
}

ReducedPredictors reduce(const Reduction& reduction, const TimeSeriesMatrix& x_train,
                         std::span<const double> y_train, const TimeSeriesMatrix& x_full) {
  ReducedPredictors out;
  if (const auto* t = std::get_if<TsdrReduction>(&reduction)) {
    const FitResult fit = tsdr_fit(x_train, y_train, t->fit);
    auto sel = select(fit.l_matrix, fit.lags, t->strategy, t->threshold);
    const TimeSeriesMatrix sources = fit.sources(x_full);
    for (const auto& c : sel.chosen) {
      out.regressors.push_back(
          {sources.column(c.source), c.lag, fmt::format("z{}[t-{}]", c.source + 1, c.lag)});
    }
    out.k_hat = sel.k_hat;
    out.selection = std::move(sel);
    return out;
  }
  const auto& v = std::get<VectorizedReduction>(reduction);
  const auto fit = vectorized_fit(x_train, y_train, v.method, v.max_lag, v.slices, v.threshold);
  for (int i = 0; i < fit.k_hat; ++i) {
    out.regressors.push_back({fit.index_series(x_full, i), 0, fmt::format("d{}", i + 1)});
  }
  out.k_hat = fit.k_hat;
  return out;
}

ForecastOutcome rolling_forecast(const TimeSeriesMatrix& x, std::span<const double> y,
                                 const Reduction& reduction, const PredictorConfig& config) {
  if (static_cast<Index>(y.size()) != x.length()) {
    throw Error(ErrorCode::InvalidInput, "response and predictors have different lengths");
  }
  check_config(config, x.length());
  const Index train_end = x.length() - config.test_size;
  ForecastOutcome out;
  out.predictors = reduce(reduction, x.head_rows(train_end), y.first(train_end), x);
  const std::string label = reduction_label(reduction);
  if (!config.refit_reduction) {
    out.report = forecast_regressors(out.predictors.regressors, y, config, label);
    return out;
  }

  out.report.method = label;
  for (int i = 0; i < config.test_size; ++i) {
    const Index end = train_end + i;
    const auto step = i == 0 ? out.predictors
                             : reduce(reduction, window(x, i, end), y.subspan(i, end - i), x);
    double pred = 0.0;
    if (step.regressors.empty()) {
      std::vector<double> ys;
      for (Index t = i; t < end; ++t) {
        if (available(y[t])) ys.push_back(y[t]);
      }
      pred = mean(ys);
    } else {
      const Design d =
          build_design(step.regressors, y, config.basis, config.interior_knots, i, end);
      Vector coef;
      const Matrix gram = d.matrix.transpose() * d.matrix;
      out.report.ridge_used =
          solve_least_squares(gram, d.matrix.transpose() * d.target, coef) ||
          out.report.ridge_used;
      if (!usable_at(step.regressors, y, end)) {
        throw Error(ErrorCode::InsufficientData,
                    fmt::format("test point t={} lacks a response or regressor value", end));
      }
      Vector row(d.matrix.cols());
      fill_row(step.regressors, d.blocks, end, row.data());
      pred = row.dot(coef);
    }
    out.report.errors.push_back(y[end] - pred);
  }
  out.report.rmse = rmse_of(out.report.errors);
  return out;
}

std::vector<Regressor> oracle_regressors(ModelId model, const TimeSeriesMatrix& z) {
  auto col = [&](Index i) {
    if (i >= z.width()) {
      throw Error(ErrorCode::InvalidInput,
                  fmt::format("model {} needs source {}", to_string(model), i + 1));
    }
    return z.column(i);
  };
  auto power = [](Series v, int k) {
    for (auto& e : v) e = std::pow(e, k);
    return v;
  };
  switch (model) {
    case ModelId::A: return {{col(0), 1, "z1[t-1]"}, {col(1), 1, "z2[t-1]"}};
    case ModelId::B: return {{power(col(0), 2), 1, "z1^2[t-1]"}, {col(1), 5, "z2[t-5]"}};
    case ModelId::C: {
      Series cross = col(0);
      const Series z2 = col(1);
      for (std::size_t t = 0; t < cross.size(); ++t) cross[t] *= z2[t];
      return {{power(col(0), 2), 1, "z1^2[t-1]"},
              {cross, 1, "z1z2[t-1]"},
              {power(col(1), 2), 1, "z2^2[t-1]"}};
    }
    case ModelId::D:
      return {{power(col(0), 2), 1, "z1^2[t-1]"}, {power(col(1), 2), 5, "z2^2[t-5]"}};
    case ModelId::E:
      return {{power(col(0), 3), 1, "z1^3[t-1]"}, {power(col(1), 2), 5, "z2^2[t-5]"}};
    case ModelId::M1: return {{col(0), 1, "x[t-1]"}, {col(0), 3, "x[t-3]"}};
    case ModelId::M2:
      return {{power(col(0), 2), 1, "x^2[t-1]"}, {power(col(0), 2), 3, "x^2[t-3]"}};
    case ModelId::Big:
      return {{col(0), 1, "z1[t-1]"}, {col(1), 2, "z2[t-2]"}, {col(2), 4, "z3[t-4]"}};
    case ModelId::Null: return {};
  }
  return {};
}

RMSEReport oracle_forecast(const TimeSeriesMatrix& z, std::span<const double> y, ModelId model,
                           const PredictorConfig& config) {
  PredictorConfig linear = config;
  linear.basis = Basis::Linear;
  linear.refit_reduction = false;
  return forecast_regressors(oracle_regressors(model, z), y, linear, "oracle");
}

}  // namespace tsdr
