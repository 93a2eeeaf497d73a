#include "tsdr/estimators.hpp"

#include "tsdr/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <numeric>

namespace tsdr {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::TSIR: return "TSIR";
    case Method::TSAVE: return "TSAVE";
    case Method::TSSH: return "TSSH";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  std::string key(text);
  for (auto& c : key) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (auto m : {Method::TSIR, Method::TSAVE, Method::TSSH}) {
    if (key == to_string(m)) return m;
  }
  throw Error(ErrorCode::InvalidInput, fmt::format("unknown method '{}'", text));
}

std::string_view to_string(VectorizedMethod method) {
  return method == VectorizedMethod::SIR ? "SIR" : "SAVE";
}

std::vector<int> lag_range(int max_lag) {
  std::vector<int> out(static_cast<std::size_t>(std::max(max_lag, 0)));
  std::iota(out.begin(), out.end(), 1);
  return out;
}

TimeSeriesMatrix FitResult::sources(const TimeSeriesMatrix& x) const {
  Matrix centered = x.values().rowwise() - center.transpose();
  return TimeSeriesMatrix(centered * gamma.transpose());
}

namespace {

SymMatrix sample_covariance(const Matrix& centered) {
  return SymMatrix(centered.transpose() * centered / static_cast<double>(centered.rows()));
}

}  // namespace

Whitening whiten(const TimeSeriesMatrix& x) {
  if (x.length() <= x.width()) {
    throw Error(ErrorCode::InsufficientData,
                fmt::format("{} observations cannot whiten {} predictors", x.length(), x.width()));
  }
  Vector center = x.values().colwise().mean().transpose();
  Matrix centered = x.values().rowwise() - center.transpose();
  auto root = inv_sqrt(sample_covariance(centered));
  Matrix standardized = centered * root.entries();
  return {std::move(center), std::move(root), TimeSeriesMatrix(std::move(standardized))};
}

FitResult tsdr_fit(const TimeSeriesMatrix& x, std::span<const double> y, const FitOptions& options) {
  if (options.lags.empty()) throw Error(ErrorCode::InvalidInput, "lag set is empty");
  if (static_cast<Index>(y.size()) != x.length()) {
    throw Error(ErrorCode::InvalidInput, "response and predictors have different lengths");
  }
  const auto white = whiten(x);

  StackOptions stack_options;
  stack_options.lags = options.lags;
  stack_options.sir_slices = options.sir_slices;
  stack_options.save_slices = options.save_slices;
  stack_options.weight = options.weight;
  switch (options.method) {
    case Method::TSIR: stack_options.kind = MomentKind::TSIR; break;
    case Method::TSAVE: stack_options.kind = MomentKind::TSAVE; break;
    case Method::TSSH: stack_options.kind = MomentKind::Hybrid; break;
  }
  const auto stack = moment_stack(white.standardized, y, stack_options);
  // The stack is in whitened coordinates, so its scale is O(1); anything
  // this small is rounding noise around an exactly zero stack.
  double largest = 0.0;
  for (const auto& g : stack.matrices) largest = std::max(largest, g.entries().norm());
  if (!(largest > 1e-12)) {
    throw Error(ErrorCode::DegenerateStack, "all supervised matrices vanish; L is undefined");
  }
  const auto diag = joint_diag(stack.matrices, options.diag);

  const Index p = x.width();
  const auto s = static_cast<Index>(stack.matrices.size());
  Matrix lambda(p, s);
  for (Index j = 0; j < s; ++j) {
    const Matrix wg = diag.basis.rows() * stack.matrices[j].entries();
    for (Index i = 0; i < p; ++i) {
      // PSD matrices give non-negative values up to rounding.
      lambda(i, j) = std::max(0.0, wg.row(i).dot(diag.basis.rows().row(i)));
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  const Vector row_sums = lambda.rowwise().sum();
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return row_sums(a) > row_sums(b); });

  Matrix w(p, p), ordered(p, s);
  for (Index i = 0; i < p; ++i) {
    w.row(i) = diag.basis.rows().row(order[i]);
    ordered.row(i) = lambda.row(order[i]);
  }

  FitResult out;
  out.w = OrthogonalBasis(w);
  out.gamma = w * white.inv_sqrt_cov.entries();
  out.center = white.center;
  out.lambda = ordered;
  out.l_matrix = ordered / ordered.sum();
  out.lags = options.lags;
  out.method = options.method;
  out.sir_slices = options.sir_slices;
  out.save_slices = options.save_slices;
  out.weight = options.method == Method::TSSH ? options.weight : 0.0;
  out.objective = diag.objective;
  return out;
}

double check_affine_equivariance(const TimeSeriesMatrix& x, std::span<const double> y,
                                 const Matrix& a, const Vector& b, const FitOptions& options,
                                 int components) {
  Matrix moved = x.values() * a.transpose();
  moved.rowwise() += b.transpose();
  const TimeSeriesMatrix x_star(std::move(moved));

  const auto fit = tsdr_fit(x, y, options);
  const auto fit_star = tsdr_fit(x_star, y, options);
  const auto s = fit.sources(x);
  const auto s_star = fit_star.sources(x_star);

  const Index p = x.width();
  const Index k = components > 0 ? std::min<Index>(components, p) : p;
  std::vector<bool> used(static_cast<std::size_t>(p), false);
  double worst = 0.0;
  for (Index i = 0; i < k; ++i) {
    const auto si = s.column(i);
    double best = -1.0;
    Index best_j = -1;
    for (Index j = 0; j < p; ++j) {
      if (used[j]) continue;
      const double c = std::abs(correlation(si, s_star.column(j)));
      if (c > best) {
        best = c;
        best_j = j;
      }
    }
    used[best_j] = true;
    worst = std::max(worst, 1.0 - best);
  }
  return worst;
}

Matrix stack_lags(const TimeSeriesMatrix& x, int max_lag) {
  const Index length = x.length(), p = x.width();
  if (max_lag < 1 || max_lag >= length) {
    throw Error(ErrorCode::InsufficientData,
                fmt::format("cannot stack {} lags of a series of length {}", max_lag, length));
  }
  Matrix out(length - max_lag, p * max_lag);
  for (Index t = max_lag; t < length; ++t) {
    for (int l = 1; l <= max_lag; ++l) {
      out.block(t - max_lag, (l - 1) * p, 1, p) = x.values().row(t - l);
    }
  }
  return out;
}

Series VectorizedFitResult::index_series(const TimeSeriesMatrix& x, int i) const {
  Series out(static_cast<std::size_t>(x.length()), kUnavailable);
  const Matrix stacked = stack_lags(x, max_lag);
  const Vector d = directions.row(i).transpose();
  for (Index r = 0; r < stacked.rows(); ++r) {
    out[r + max_lag] = (stacked.row(r).transpose() - center).dot(d);
  }
  return out;
}

VectorizedFitResult vectorized_fit(const TimeSeriesMatrix& x, std::span<const double> y,
                                   VectorizedMethod method, int max_lag, int slices,
                                   double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::InvalidInput, fmt::format("threshold {} is outside (0, 1)", threshold));
  }
  if (static_cast<Index>(y.size()) != x.length()) {
    throw Error(ErrorCode::InvalidInput, "response and predictors have different lengths");
  }
  const Matrix stacked = stack_lags(x, max_lag);
  const Index width = stacked.cols();

  std::vector<Index> rows;
  Series response;
  for (Index r = 0; r < stacked.rows(); ++r) {
    const double v = y[r + max_lag];
    if (available(v)) {
      rows.push_back(r);
      response.push_back(v);
    }
  }
  if (static_cast<Index>(rows.size()) <= width) {
    throw Error(ErrorCode::InsufficientData,
                fmt::format("{} usable rows cannot whiten {} stacked predictors", rows.size(),
                            width));
  }
  Matrix used(static_cast<Index>(rows.size()), width);
  for (std::size_t k = 0; k < rows.size(); ++k) used.row(static_cast<Index>(k)) = stacked.row(rows[k]);

  const auto white = whiten(TimeSeriesMatrix(used));
  const auto slice = slice_response(response, slices);
  const SymMatrix supervised = method == VectorizedMethod::SIR
                                   ? slice_mean_matrix(white.standardized.values(), slice)
                                   : slice_variance_matrix(white.standardized.values(), slice);
  const auto eig = sym_eig(supervised);

  VectorizedFitResult out;
  out.eigenvalues = eig.values;
  out.center = white.center;
  out.max_lag = max_lag;
  const double total = eig.values.cwiseMax(0.0).sum();
  int k = 1;
  if (total > 0.0) {
    double acc = 0.0;
    for (k = 0; k < eig.values.size();) {
      acc += std::max(eig.values(k), 0.0);
      ++k;
      if (acc / total >= threshold) break;
    }
  }
  out.k_hat = k;
  out.directions = eig.vectors.rows().topRows(k) * white.inv_sqrt_cov.entries();
  return out;
}

}  // namespace tsdr
