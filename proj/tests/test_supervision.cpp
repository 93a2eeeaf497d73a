#include "oracles.hpp"
#include "test_support.hpp"

#include "tsdr/error.hpp"
#include "tsdr/estimators.hpp"
#include "tsdr/supervision.hpp"
#include "tsdr/tsgen.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace tsdr;
using namespace tsdr::test;

namespace {

double min_eigenvalue(const SymMatrix& m) { return sym_eig(m).values.minCoeff(); }

}  // namespace

TEST_CASE("slicing splits sorted values into equal blocks") {
  std::vector<double> y{3, 1, 4, 10, 5, 9, 2, 6, 8, 7};
  const auto s = slice_response(y, 2);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(s.labels[i] == (y[i] <= 5 ? 0 : 1));
  CHECK(s.boundaries.size() == 1);
  CHECK(s.boundaries[0] == doctest::Approx(5.5));

  const auto c = slice_response(std::vector<double>(10, 1.0), 2);
  for (int i = 0; i < 10; ++i) CHECK(c.labels[i] == (i < 5 ? 0 : 1));

  const auto uneven = slice_response(std::vector<double>{1, 2, 3, 4, 5, 6, 7}, 3);
  CHECK(uneven.counts() == std::vector<Index>{3, 2, 2});
}

TEST_CASE("slicing matches a rank-table oracle and occupancies differ by at most one") {
  std::mt19937_64 rng(1);
  for (int h : {2, 3, 5, 10, 40}) {
    const Matrix g = gaussian(997, 1, rng);
    std::vector<double> y(g.data(), g.data() + g.size());
    const auto s = slice_response(y, h);
    CHECK(s.labels == naive_labels(y, h));
    const auto counts = s.counts();
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*hi - *lo <= 1);
  }
}

TEST_CASE("slicing is invariant under strictly increasing transforms") {
  std::mt19937_64 rng(2);
  const Matrix g = gaussian(500, 1, rng);
  std::vector<double> y(g.data(), g.data() + g.size()), ty(y.size());
  std::transform(y.begin(), y.end(), ty.begin(), [](double v) { return std::exp(3 * v) - 7; });
  for (int h : {2, 5, 10}) CHECK(slice_response(y, h).labels == slice_response(ty, h).labels);
}

TEST_CASE("slice boundaries of a normal sample sit at the normal quintiles") {
  std::mt19937_64 rng(3);
  const Matrix g = gaussian(10000, 1, rng);
  const auto s = slice_response(std::vector<double>(g.data(), g.data() + g.size()), 5);
  const double q[] = {-0.8416, -0.2533, 0.2533, 0.8416};
  for (int k = 0; k < 4; ++k) CHECK(std::abs(s.boundaries[k] - q[k]) <= 0.05);
}

TEST_CASE("slicing rejects bad input") {
  CHECK_THROWS_AS(slice_response(std::vector<double>{1, 2}, 3), Error);
  CHECK_THROWS_AS(slice_response(std::vector<double>{1, 2}, 0), Error);
  CHECK_THROWS_AS(slice_response(std::vector<double>{1, kUnavailable}, 1), Error);
  try {
    slice_response(std::vector<double>{1, 2}, 3);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooManySlices);
  }
}

TEST_CASE("lag pairing keeps the times with an available future response") {
  Series y(10, 1.0);
  y[0] = y[1] = kUnavailable;
  for (int i = 0; i < 10; ++i) y[i] = available(y[i]) ? i : y[i];
  const auto p = pair_lag(10, y, 3, 2);
  CHECK(p.times == std::vector<Index>{0, 1, 2, 3, 4, 5, 6});
  const auto q = pair_lag(10, y, 1, 2);
  CHECK(q.times.front() == 1);
  CHECK(q.times.back() == 8);
}

TEST_CASE("supervised matrices equal naive triple-loop oracles") {
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix z = gaussian(500, 4, rng);
    Series y(500);
    for (Index t = 0; t < 500; ++t) y[t] = z(std::max<Index>(t - 1, 0), 0) * z(t, 1) + 0.3 * gaussian(1, 1, rng)(0);
    y[0] = kUnavailable;
    const TimeSeriesMatrix zs(z);
    for (int h : {2, 5, 10}) {
      for (int j : {1, 5, 12}) {
        const auto pairing = pair_lag(500, y, j, h);
        const auto naive = naive_pairs(z, y, j, h);
        REQUIRE(pairing.slices.labels == naive.label);
        worst = std::max(worst, (tsir_matrix(zs, pairing).entries() - naive_tsir(naive, h, 4))
                                    .cwiseAbs().maxCoeff());
        worst = std::max(worst, (tsave_matrix(zs, pairing).entries() - naive_tsave(naive, h, 4))
                                    .cwiseAbs().maxCoeff());
      }
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("a single slice gives a zero first-moment matrix") {
  std::mt19937_64 rng(5);
  const Matrix z = gaussian(100, 3, rng);
  Series y(100, 0.5);
  const auto pairing = pair_lag(100, y, 1, 1);
  CHECK(tsir_matrix(TimeSeriesMatrix(z), pairing).entries().cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("slices with identity covariance give a zero second-moment matrix") {
  // Each slice holds the four points (+-1, 0), (0, +-1) scaled to unit variance.
  Matrix z(16, 2);
  const double r = std::sqrt(2.0);
  for (int s = 0; s < 2; ++s) {
    const double shift = s == 0 ? -5.0 : 5.0;
    const double pts[4][2] = {{r, 0}, {-r, 0}, {0, r}, {0, -r}};
    for (int k = 0; k < 4; ++k) {
      for (int rep = 0; rep < 2; ++rep) {
        const int row = s * 8 + k * 2 + rep;
        z(row, 0) = pts[k][0] + shift;
        z(row, 1) = pts[k][1];
      }
    }
  }
  SliceAssignment sl;
  sl.slices = 2;
  for (int i = 0; i < 16; ++i) sl.labels.push_back(i < 8 ? 0 : 1);
  CHECK(slice_variance_matrix(z, sl).entries().cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("degenerate slices name the slice and the lag") {
  std::mt19937_64 rng(6);
  const Matrix z = gaussian(12, 2, rng);
  Series y(12);
  std::iota(y.begin(), y.end(), 0.0);
  const auto pairing = pair_lag(12, y, 2, 10);
  try {
    tsave_matrix(TimeSeriesMatrix(z), pairing);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateSlice);
    CHECK(std::string(e.what()).find("lag 2") != std::string::npos);
    CHECK(std::string(e.what()).find("slice") != std::string::npos);
  }
}

TEST_CASE("hybrid matrix interpolates and is exact at the ends") {
  std::mt19937_64 rng(7);
  const SymMatrix a = random_sym(3, rng), b = random_sym(3, rng);
  CHECK(hybrid_matrix(0.0, a, b).entries() == a.entries());
  CHECK(hybrid_matrix(1.0, a, b).entries() == b.entries());
  CHECK((hybrid_matrix(0.5, a, b).entries() - 0.5 * (a.entries() + b.entries())).norm() < 1e-15);
  CHECK_THROWS_AS(hybrid_matrix(1.5, a, b), Error);
}

TEST_CASE("moment stacks are PSD and consistent with the single-lag functions") {
  const auto d = simulate(make_simulation(ModelId::B, Recipe::Table1), 3000, 9);
  const auto w = whiten(d.x);
  for (auto kind : {MomentKind::TSIR, MomentKind::TSAVE, MomentKind::Hybrid}) {
    StackOptions o;
    o.kind = kind;
    o.lags = lag_range(12);
    o.save_slices = 5;
    const auto stack = moment_stack(w.standardized, d.y, o);
    REQUIRE(stack.matrices.size() == 12);
    for (const auto& g : stack.matrices) {
      CHECK(g.dim() == 4);
      CHECK(min_eigenvalue(g) >= -1e-10);
    }
  }
  StackOptions one{MomentKind::TSIR, {1}, 10, 2, 0.5};
  const auto s1 = moment_stack(w.standardized, d.y, one);
  CHECK(s1.matrices[0].entries() ==
        tsir_matrix(w.standardized, pair_lag(3000, d.y, 1, 10)).entries());

  StackOptions hyb{MomentKind::Hybrid, {1, 5}, 10, 2, 0.0};
  StackOptions sir{MomentKind::TSIR, {1, 5}, 10, 2, 0.5};
  const auto h0 = moment_stack(w.standardized, d.y, hyb);
  const auto s0 = moment_stack(w.standardized, d.y, sir);
  for (int k = 0; k < 2; ++k) CHECK(h0.matrices[k].entries() == s0.matrices[k].entries());

  CHECK_THROWS_AS(moment_stack(w.standardized, d.y, StackOptions{MomentKind::TSIR, {0}}), Error);
  CHECK_THROWS_AS(moment_stack(w.standardized, d.y, StackOptions{MomentKind::TSIR, {2, 2}}), Error);
}

TEST_CASE("matrices vanish outside the signal block") {
  // y depends on z1 and z2 only; rows/columns 3..4 are O(1/sqrt(T)).
  const Index t = 10000;
  const auto d = simulate(make_simulation(ModelId::D, Recipe::Low), t, 10);
  const double bound = 5.0 / std::sqrt(static_cast<double>(t));
  for (int lag : {1, 5}) {
    const auto pairing = pair_lag(t, d.y, lag, 2);
    for (const auto& g : {tsir_matrix(d.z, pairing), tsave_matrix(d.z, pairing)}) {
      for (Index i = 2; i < 4; ++i)
        for (Index k = 0; k < 4; ++k) CHECK(std::abs(g(i, k)) <= bound);
    }
  }
}

TEST_CASE("single-source models show their dependence at the true lags") {
  const auto m1 = simulate(make_simulation(ModelId::M1, Recipe::Single), 5000, 11);
  const double sir1 = tsir_matrix(m1.z, pair_lag(5000, m1.y, 1, 10))(0, 0);
  const double sir10 = tsir_matrix(m1.z, pair_lag(5000, m1.y, 10, 10))(0, 0);
  CHECK(sir1 > 0.2);
  CHECK(sir10 < 0.02);

  const auto m2 = simulate(make_simulation(ModelId::M2, Recipe::Single), 5000, 12);
  const double save1 = tsave_matrix(m2.z, pair_lag(5000, m2.y, 1, 5))(0, 0);
  const double save10 = tsave_matrix(m2.z, pair_lag(5000, m2.y, 10, 5))(0, 0);
  CHECK(save1 > 0.1);
  CHECK(save10 < 0.02);
}

TEST_CASE("null responses give small supervised matrices") {
  const auto d = simulate(make_simulation(ModelId::Null, Recipe::Low), 5000, 13);
  const auto w = whiten(d.x);
  for (int lag : {1, 6}) {
    CHECK(tsir_matrix(w.standardized, pair_lag(5000, d.y, lag, 10)).entries().norm() <= 0.05);
    CHECK(tsave_matrix(w.standardized, pair_lag(5000, d.y, lag, 2)).entries().norm() <= 0.05);
  }
}
