#include "test_support.hpp"

#include "tsdr/error.hpp"
#include "tsdr/estimators.hpp"
#include "tsdr/selection.hpp"
#include "tsdr/tsgen.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace tsdr;
using namespace tsdr::test;

namespace {

Dataset example_data(ModelId model, Index length, std::uint64_t seed,
                     Recipe recipe = Recipe::Table1) {
  auto spec = make_simulation(model, recipe);
  std::mt19937_64 rng(seed + 77);
  spec.mixing = random_conditioned(spec.width(), 20.0, rng);
  spec.location = gaussian(spec.width(), 1, rng);
  return simulate(spec, length, seed);
}

Matrix covariance(const Matrix& m) {
  const Matrix c = m.rowwise() - m.colwise().mean();
  return c.transpose() * c / static_cast<double>(m.rows());
}

double abs_corr(const Series& a, const Series& b) { return std::abs(correlation(a, b)); }

// Canonical correlations between the column spaces of a and b.
Vector canonical_correlations(const Matrix& a, const Matrix& b) {
  const Matrix ca = a.rowwise() - a.colwise().mean();
  const Matrix cb = b.rowwise() - b.colwise().mean();
  const Matrix qa = Eigen::HouseholderQR<Matrix>(ca).householderQ() * Matrix::Identity(ca.rows(), ca.cols());
  const Matrix qb = Eigen::HouseholderQR<Matrix>(cb).householderQ() * Matrix::Identity(cb.rows(), cb.cols());
  return Eigen::JacobiSVD<Matrix>(qa.transpose() * qb).singularValues();
}

void check_invariants(const FitResult& fit) {
  CHECK((fit.lambda.array() >= 0.0).all());
  CHECK(std::abs(fit.l_matrix.sum() - 1.0) <= 1e-12);
  const Vector rows = fit.lambda.rowwise().sum();
  for (Index i = 1; i < rows.size(); ++i) CHECK(rows(i - 1) >= rows(i));
  CHECK(fit.lambda.array().square().sum() ==
        doctest::Approx(fit.objective).epsilon(1e-10));
}

}  // namespace

TEST_CASE("whitening gives identity covariance") {
  const auto d = example_data(ModelId::B, 2000, 1);
  const auto w = whiten(d.x);
  CHECK((covariance(w.standardized.values()) - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(w.standardized.values().colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fit results satisfy their invariants") {
  const auto d = example_data(ModelId::B, 3000, 2);
  for (auto m : {Method::TSIR, Method::TSAVE, Method::TSSH}) {
    FitOptions o;
    o.method = m;
    const auto fit = tsdr_fit(d.x, d.y, o);
    check_invariants(fit);
    CHECK(fit.lags == lag_range(12));
    CHECK(fit.lambda.rows() == 4);
    CHECK(fit.lambda.cols() == 12);
    // Gamma unmixes to uncorrelated unit-variance sources.
    CHECK((covariance(fit.sources(d.x).values()) - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <
          1e-10);
  }
}

TEST_CASE("TSAVE recovers both sources of the quadratic example") {
  const auto d = example_data(ModelId::B, 10000, 3);
  FitOptions o;
  o.with_slices(5);
  const auto fit = tsdr_fit(d.x, d.y, o);
  const auto s = fit.sources(d.x);
  // Component 1 carries lag 5 (z2), component 2 carries lag 1 (z1).
  CHECK(abs_corr(s.column(0), d.z.column(1)) > 0.95);
  CHECK(abs_corr(s.column(1), d.z.column(0)) > 0.95);
  CHECK(fit.l_matrix(0, 4) > 0.4);
  CHECK(fit.l_matrix(1, 0) > 0.2);
}

TEST_CASE("TSIR finds the linear index of model A") {
  const auto d = example_data(ModelId::A, 3000, 4, Recipe::Low);
  FitOptions o;
  o.method = Method::TSIR;
  o.with_slices(10);
  const auto fit = tsdr_fit(d.x, d.y, o);
  Series index(3000);
  for (Index t = 0; t < 3000; ++t) index[t] = (2 * d.z(t, 0) + 3 * d.z(t, 1)) / std::sqrt(13.0);
  CHECK(abs_corr(fit.sources(d.x).column(0), index) >= 0.95);
}

TEST_CASE("TSAVE spans both sources of model D") {
  const auto d = example_data(ModelId::D, 3000, 5, Recipe::Low);
  FitOptions o;
  o.with_slices(2);
  const auto fit = tsdr_fit(d.x, d.y, o);
  const Matrix top = fit.sources(d.x).values().leftCols(2);
  CHECK(canonical_correlations(top, d.z.values().leftCols(2)).minCoeff() >= 0.9);
}

TEST_CASE("TSSH reduces to TSIR and TSAVE at the ends of the weight range") {
  const auto d = example_data(ModelId::E, 2000, 6, Recipe::Low);
  FitOptions h;
  h.method = Method::TSSH;
  h.sir_slices = 10;
  h.save_slices = 2;
  FitOptions sir = h, save = h;
  sir.method = Method::TSIR;
  sir.with_slices(10);
  save.method = Method::TSAVE;
  save.with_slices(2);
  h.weight = 0.0;
  CHECK((tsdr_fit(d.x, d.y, h).lambda - tsdr_fit(d.x, d.y, sir).lambda).cwiseAbs().maxCoeff() <= 1e-10);
  h.weight = 1.0;
  CHECK((tsdr_fit(d.x, d.y, h).lambda - tsdr_fit(d.x, d.y, save).lambda).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("fits are affine equivariant") {
  const auto d = example_data(ModelId::B, 2000, 7);
  FitOptions o;
  o.with_slices(5);
  CHECK(check_affine_equivariance(d.x, d.y, Matrix::Identity(4, 4), Vector::Zero(4), o) == 0.0);
  CHECK(check_affine_equivariance(d.x, d.y, 2.0 * Matrix::Identity(4, 4), Vector::Ones(4), o) <=
        1e-8);
  std::mt19937_64 rng(8);
  for (auto m : {Method::TSIR, Method::TSAVE, Method::TSSH}) {
    o.method = m;
    for (int rep = 0; rep < 5; ++rep) {
      const Matrix a = random_conditioned(4, 100.0, rng);
      const Vector b = 10.0 * gaussian(4, 1, rng);
      CHECK(check_affine_equivariance(d.x, d.y, a, b, o) <= 1e-6);
    }
  }
}

TEST_CASE("null responses give a flat L matrix") {
  const auto d = example_data(ModelId::Null, 10000, 9, Recipe::Low);
  FitOptions o;
  o.with_slices(2);
  const auto fit = tsdr_fit(d.x, d.y, o);
  // No cell stands out: the largest is far from the point-mass case and
  // 80% of the mass needs many cells.
  CHECK(fit.l_matrix.maxCoeff() <= 0.25);
  CHECK(select(fit.l_matrix, fit.lags, Strategy::BiggestValues, 0.8).chosen.size() >= 4);
}

TEST_CASE("fit input errors") {
  const auto d = example_data(ModelId::A, 500, 10, Recipe::Low);
  FitOptions o;
  o.lags.clear();
  CHECK_THROWS_AS(tsdr_fit(d.x, d.y, o), Error);
  Series short_y(d.y.begin(), d.y.end() - 1);
  CHECK_THROWS_AS(tsdr_fit(d.x, short_y, FitOptions{}), Error);

  Matrix collinear = d.x.values();
  collinear.col(3) = collinear.col(0);
  try {
    tsdr_fit(TimeSeriesMatrix(collinear), d.y, FitOptions{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularCovariance);
  }

  FitOptions one_slice;
  one_slice.method = Method::TSIR;
  one_slice.with_slices(1);
  try {
    tsdr_fit(d.x, d.y, one_slice);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateStack);
  }
}

TEST_CASE("stacked lags line up with the original series") {
  Matrix v(6, 2);
  for (Index t = 0; t < 6; ++t) v.row(t) << t, 10 + t;
  const Matrix s = stack_lags(TimeSeriesMatrix(v), 2);
  REQUIRE(s.rows() == 4);
  REQUIRE(s.cols() == 4);
  // Row 0 belongs to t = 2: (x_1, x_0).
  CHECK(s(0, 0) == 1);
  CHECK(s(0, 1) == 11);
  CHECK(s(0, 2) == 0);
  CHECK(s(0, 3) == 10);
  CHECK(s(3, 0) == 4);
}

TEST_CASE("vectorized SIR finds the linear index of model A") {
  const auto d = example_data(ModelId::A, 3000, 11, Recipe::Low);
  const auto fit = vectorized_fit(d.x, d.y, VectorizedMethod::SIR, 12, 10, 0.8);
  CHECK(fit.k_hat == 1);
  for (Index i = 1; i < fit.eigenvalues.size(); ++i) {
    CHECK(fit.eigenvalues(i - 1) >= fit.eigenvalues(i));
  }
  CHECK(fit.eigenvalues.minCoeff() >= -1e-10);
  const Series idx = fit.index_series(d.x, 0);
  for (int t = 0; t < 12; ++t) CHECK_FALSE(available(idx[t]));
  std::vector<double> a, b;
  for (Index t = 12; t < 3000; ++t) {
    a.push_back(idx[t]);
    b.push_back(2 * d.z(t - 1, 0) + 3 * d.z(t - 1, 1));
  }
  CHECK(abs_corr(a, b) > 0.95);
}

TEST_CASE("vectorized k_hat is the minimal prefix reaching the threshold") {
  const auto d = example_data(ModelId::B, 2000, 12, Recipe::Low);
  for (double p : {0.5, 0.8, 0.95}) {
    const auto fit = vectorized_fit(d.x, d.y, VectorizedMethod::SAVE, 6, 5, p);
    const double total = fit.eigenvalues.sum();
    CHECK(fit.eigenvalues.head(fit.k_hat).sum() >= p * total * (1 - 1e-12));
    CHECK(fit.eigenvalues.head(fit.k_hat - 1).sum() < p * total);
    CHECK(fit.directions.rows() == fit.k_hat);
    CHECK(fit.directions.cols() == 24);
  }
}

TEST_CASE("vectorized null fit has no dominant direction") {
  const auto d = example_data(ModelId::Null, 10000, 13, Recipe::Low);
  const auto fit = vectorized_fit(d.x, d.y, VectorizedMethod::SIR, 12, 10, 0.8);
  // With H = 10 slices the matrix has rank at most 9; noise spreads over it.
  const double share = fit.eigenvalues(0) / fit.eigenvalues.sum();
  CHECK(share < 0.3);
  CHECK(fit.k_hat >= 4);
}

TEST_CASE("vectorized input errors") {
  const auto d = example_data(ModelId::A, 60, 14, Recipe::Low);
  CHECK_THROWS_AS(vectorized_fit(d.x, d.y, VectorizedMethod::SIR, 12, 5, 0.8), Error);
  const auto e = example_data(ModelId::A, 500, 15, Recipe::Low);
  CHECK_THROWS_AS(vectorized_fit(e.x, e.y, VectorizedMethod::SIR, 2, 5, 1.5), Error);
}
