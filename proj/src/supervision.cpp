#include "tsdr/supervision.hpp"

#include "tsdr/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <set>

namespace tsdr {

std::vector<Index> SliceAssignment::counts() const {
  std::vector<Index> out(static_cast<std::size_t>(slices), 0);
  for (int l : labels) ++out[static_cast<std::size_t>(l)];
  return out;
}

SliceAssignment slice_response(std::span<const double> y, int slices) {
  const auto n = static_cast<Index>(y.size());
  if (slices < 1) throw Error(ErrorCode::InvalidInput, "slice count must be positive");
  if (slices > n) {
    throw Error(ErrorCode::TooManySlices,
                fmt::format("{} slices requested for {} observations", slices, n));
  }
  for (double v : y) {
    if (!available(v)) throw Error(ErrorCode::InvalidInput, "cannot slice unavailable responses");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return y[a] < y[b]; });

  SliceAssignment out;
  out.slices = slices;
  out.labels.assign(static_cast<std::size_t>(n), 0);
  const Index base = n / slices;
  const Index extra = n % slices;
  Index pos = 0;
  for (int h = 0; h < slices; ++h) {
    const Index size = base + (h < extra ? 1 : 0);
    for (Index k = 0; k < size; ++k) out.labels[order[pos + k]] = h;
    pos += size;
    if (h + 1 < slices) out.boundaries.push_back(0.5 * (y[order[pos - 1]] + y[order[pos]]));
  }
  return out;
}

LagPairing pair_lag(Index length, std::span<const double> y, int lag, int slices) {
  if (lag < 1) throw Error(ErrorCode::InvalidInput, fmt::format("lag must be >= 1, got {}", lag));
  if (static_cast<Index>(y.size()) != length) {
    throw Error(ErrorCode::InvalidInput, "response length does not match the predictor length");
  }
  LagPairing out;
  out.lag = lag;
  Series usable;
  for (Index t = 0; t + lag < length; ++t) {
    if (available(y[t + lag])) {
      out.times.push_back(t);
      usable.push_back(y[t + lag]);
    }
  }
  if (static_cast<Index>(usable.size()) < slices) {
    throw Error(ErrorCode::TooManySlices,
                fmt::format("lag {} leaves {} usable pairs for {} slices", lag, usable.size(),
                            slices));
  }
  out.slices = slice_response(usable, slices);
  return out;
}

namespace {

void check_rows(const Matrix& rows, const SliceAssignment& slices) {
  if (rows.rows() != static_cast<Index>(slices.labels.size())) {
    throw Error(ErrorCode::InvalidInput, "slice labels do not match the number of rows");
  }
}

}  // namespace

SymMatrix slice_mean_matrix(const Matrix& rows, const SliceAssignment& slices) {
  check_rows(rows, slices);
  const Index n = rows.rows(), p = rows.cols();
  const Vector overall = rows.colwise().mean().transpose();
  Matrix sums = Matrix::Zero(slices.slices, p);
  std::vector<Index> counts(static_cast<std::size_t>(slices.slices), 0);
  for (Index t = 0; t < n; ++t) {
    const int h = slices.labels[t];
    sums.row(h) += rows.row(t);
    ++counts[h];
  }
  Matrix out = Matrix::Zero(p, p);
  for (int h = 0; h < slices.slices; ++h) {
    if (counts[h] == 0) {
      throw Error(ErrorCode::DegenerateSlice, fmt::format("slice {} is empty", h + 1));
    }
    const Vector m = sums.row(h).transpose() / static_cast<double>(counts[h]) - overall;
    out += (static_cast<double>(counts[h]) / static_cast<double>(n)) * (m * m.transpose());
  }
  return SymMatrix(out);
}

SymMatrix slice_variance_matrix(const Matrix& rows, const SliceAssignment& slices) {
  check_rows(rows, slices);
  const Index n = rows.rows(), p = rows.cols();
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(slices.slices));
  for (Index t = 0; t < n; ++t) members[slices.labels[t]].push_back(t);

  Matrix out = Matrix::Zero(p, p);
  for (int h = 0; h < slices.slices; ++h) {
    const auto& idx = members[h];
    const auto nh = static_cast<Index>(idx.size());
    if (nh < 2) {
      throw Error(ErrorCode::DegenerateSlice,
                  fmt::format("slice {} has {} observations (need at least 2)", h + 1, nh));
    }
    Matrix block(nh, p);
    for (Index k = 0; k < nh; ++k) block.row(k) = rows.row(idx[k]);
    block.rowwise() -= block.colwise().mean();
    const Matrix dev = Matrix::Identity(p, p) - (block.transpose() * block) / static_cast<double>(nh);
    out += (static_cast<double>(nh) / static_cast<double>(n)) * (dev * dev);
  }
  return SymMatrix(out);
}

namespace {

Matrix paired_rows(const TimeSeriesMatrix& z, const LagPairing& pairing) {
  Matrix rows(static_cast<Index>(pairing.times.size()), z.width());
  for (std::size_t k = 0; k < pairing.times.size(); ++k) {
    rows.row(static_cast<Index>(k)) = z.values().row(pairing.times[k]);
  }
  return rows;
}

template <class Kernel>
SymMatrix lagged(const TimeSeriesMatrix& z, const LagPairing& pairing, Kernel kernel) {
  try {
    return kernel(paired_rows(z, pairing), pairing.slices);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateSlice) throw;
    throw Error(ErrorCode::DegenerateSlice, fmt::format("lag {}: {}", pairing.lag, e.what()));
  }
}

}  // namespace

SymMatrix tsir_matrix(const TimeSeriesMatrix& z_st, const LagPairing& pairing) {
  return lagged(z_st, pairing, slice_mean_matrix);
}

SymMatrix tsave_matrix(const TimeSeriesMatrix& z_st, const LagPairing& pairing) {
  return lagged(z_st, pairing, slice_variance_matrix);
}

SymMatrix hybrid_matrix(double a, const SymMatrix& g_tsir, const SymMatrix& g_tsave) {
  if (!(a >= 0.0 && a <= 1.0)) {
    throw Error(ErrorCode::InvalidInput, fmt::format("hybrid weight {} is outside [0, 1]", a));
  }
  if (g_tsir.dim() != g_tsave.dim()) {
    throw Error(ErrorCode::InvalidInput, "hybrid parts have different dimensions");
  }
  if (a == 0.0) return g_tsir;
  if (a == 1.0) return g_tsave;
  return SymMatrix((1.0 - a) * g_tsir.entries() + a * g_tsave.entries());
}

LaggedMomentStack moment_stack(const TimeSeriesMatrix& z_st, std::span<const double> y,
                               const StackOptions& options) {
  if (options.lags.empty()) throw Error(ErrorCode::InvalidInput, "lag set is empty");
  std::set<int> seen;
  for (int lag : options.lags) {
    if (lag < 1) throw Error(ErrorCode::InvalidInput, fmt::format("lag must be >= 1, got {}", lag));
    if (!seen.insert(lag).second) {
      throw Error(ErrorCode::InvalidInput, fmt::format("lag {} listed twice", lag));
    }
  }
  if (options.kind == MomentKind::Hybrid && !(options.weight >= 0.0 && options.weight <= 1.0)) {
    throw Error(ErrorCode::InvalidInput,
                fmt::format("hybrid weight {} is outside [0, 1]", options.weight));
  }

  LaggedMomentStack out;
  out.lags = options.lags;
  out.kind = options.kind;
  out.weight = options.kind == MomentKind::Hybrid ? options.weight : 0.0;
  const Index length = z_st.length();
  for (int lag : options.lags) {
    switch (options.kind) {
      case MomentKind::TSIR:
        out.matrices.push_back(tsir_matrix(z_st, pair_lag(length, y, lag, options.sir_slices)));
        break;
      case MomentKind::TSAVE:
        out.matrices.push_back(tsave_matrix(z_st, pair_lag(length, y, lag, options.save_slices)));
        break;
      case MomentKind::Hybrid: {
        const auto g0 = tsir_matrix(z_st, pair_lag(length, y, lag, options.sir_slices));
        const auto g1 = tsave_matrix(z_st, pair_lag(length, y, lag, options.save_slices));
        out.matrices.push_back(hybrid_matrix(options.weight, g0, g1));
        break;
      }
    }
  }
  return out;
}

}  // namespace tsdr
