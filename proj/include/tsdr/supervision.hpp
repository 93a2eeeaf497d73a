#pragma once

#include "tsdr/linalg.hpp"
#include "tsdr/series.hpp"

#include <span>
#include <vector>

namespace tsdr {

/// Equal-frequency slicing of a response sample.
struct SliceAssignment {
  std::vector<int> labels;        // 0-based slice of each observation
  int slices = 0;                 // H
  std::vector<double> boundaries; // H - 1 cut points (midpoints between blocks)

  std::vector<Index> counts() const;
};

/// Sorted positions are split into H contiguous blocks of size floor(n/H) or
/// ceil(n/H), the larger blocks first. Ties in y are broken by position.
SliceAssignment slice_response(std::span<const double> y, int slices);

/// Pairs (z_t, y_{t+lag}) with an available response, sliced on that
/// response subset.
struct LagPairing {
  int lag = 0;
  std::vector<Index> times;  // t of each usable pair
  SliceAssignment slices;
};

LagPairing pair_lag(Index length, std::span<const double> y, int lag, int slices);

/// sum_h p_h m_h m_h^T, with m_h the slice mean of the rows minus the
/// overall mean.
SymMatrix slice_mean_matrix(const Matrix& rows, const SliceAssignment& slices);

/// sum_h p_h (I - C_h)^2 with C_h the within-slice covariance (denominator n_h).
SymMatrix slice_variance_matrix(const Matrix& rows, const SliceAssignment& slices);

/// cov(E(z_t | y_{t+j})) estimated over the pairs of `pairing`.
SymMatrix tsir_matrix(const TimeSeriesMatrix& z_st, const LagPairing& pairing);

/// E((I - cov(z_t | y_{t+j}))^2) estimated over the pairs of `pairing`.
SymMatrix tsave_matrix(const TimeSeriesMatrix& z_st, const LagPairing& pairing);

/// (1 - a) g_tsir + a g_tsave
SymMatrix hybrid_matrix(double a, const SymMatrix& g_tsir, const SymMatrix& g_tsave);

enum class MomentKind { TSIR, TSAVE, Hybrid };

struct StackOptions {
  MomentKind kind = MomentKind::TSAVE;
  std::vector<int> lags;
  int sir_slices = 10;   // TSIR matrices, and the TSIR part of the hybrid
  int save_slices = 2;   // TSAVE matrices, and the TSAVE part of the hybrid
  double weight = 0.5;   // hybrid only
};

struct LaggedMomentStack {
  std::vector<int> lags;
  std::vector<SymMatrix> matrices;
  MomentKind kind = MomentKind::TSAVE;
  double weight = 0.0;
};

/// One supervised matrix per lag; each lag is paired and sliced separately.
LaggedMomentStack moment_stack(const TimeSeriesMatrix& z_st, std::span<const double> y,
                               const StackOptions& options);

}  // namespace tsdr
