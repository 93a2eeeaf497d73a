#include "tsdr/series.hpp"

#include "tsdr/error.hpp"

#include <algorithm>
#include <numeric>

namespace tsdr {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::SingularCovariance: return "singular-covariance";
    case ErrorCode::DegenerateSlice: return "degenerate-slice";
    case ErrorCode::TooManySlices: return "too-many-slices";
    case ErrorCode::InvalidSpec: return "invalid-spec";
    case ErrorCode::DegenerateStack: return "degenerate-stack";
    case ErrorCode::UnknownModel: return "unknown-model";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::EmptySelection: return "empty-selection";
    case ErrorCode::Parse: return "parse";
  }
  return "unknown";
}

TimeSeriesMatrix::TimeSeriesMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw Error(ErrorCode::InvalidInput, "time series matrix must be non-empty");
  }
  if (!values_.allFinite()) {
    throw Error(ErrorCode::InvalidInput, "time series matrix contains non-finite values");
  }
}

Series TimeSeriesMatrix::column(Index i) const {
  Series out(static_cast<std::size_t>(length()));
  for (Index t = 0; t < length(); ++t) out[t] = values_(t, i);
  return out;
}

TimeSeriesMatrix TimeSeriesMatrix::head_rows(Index end) const {
  return TimeSeriesMatrix(values_.topRows(end));
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size());
}

double correlation(std::span<const double> a, std::span<const double> b) {
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double autocorrelation(std::span<const double> v, int lag) {
  const double m = mean(v);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < v.size(); ++t) {
    den += (v[t] - m) * (v[t] - m);
    if (t >= static_cast<std::size_t>(lag)) num += (v[t] - m) * (v[t - lag] - m);
  }
  return num / den;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw Error(ErrorCode::InvalidInput, "quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace tsdr
