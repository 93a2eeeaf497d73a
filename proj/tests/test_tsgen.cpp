#include "tsdr/error.hpp"
#include "tsdr/tsgen.hpp"

#include <doctest.h>

#include <cmath>

using namespace tsdr;

namespace {

double sample_autocov(const Series& v, int lag) {
  const double m = mean(v);
  double s = 0.0;
  for (std::size_t t = lag; t < v.size(); ++t) s += (v[t] - m) * (v[t - lag] - m);
  return s / static_cast<double>(v.size());
}

Series squares(Series v) {
  for (auto& e : v) e *= e;
  return v;
}

}  // namespace

TEST_CASE("components are standardized and reproducible") {
  const auto spec = ProcessSpec::arma11(0.3, 0.4);
  const Series a = gen_component(spec, 2000, 11);
  const Series b = gen_component(spec, 2000, 11);
  const Series c = gen_component(spec, 2000, 12);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(std::abs(mean(a)) < 1e-12);
  CHECK(variance(a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("AR(1) and MA(1) autocorrelations match their theoretical values") {
  const Series ar = gen_component(ProcessSpec::ar1(0.8), 10000, 21);
  CHECK(std::abs(autocorrelation(ar, 1) - 0.8) <= 0.05);
  CHECK(std::abs(autocorrelation(ar, 2) - 0.64) <= 0.05);

  const Series ma = gen_component(ProcessSpec::ma1(-0.4), 10000, 22);
  CHECK(std::abs(autocorrelation(ma, 1) - (-0.4 / 1.16)) <= 0.05);
  CHECK(std::abs(autocorrelation(ma, 2)) <= 0.05);

  // rho_1 = (1 + phi theta)(phi + theta) / (1 + 2 phi theta + theta^2)
  const Series arma = gen_component(ProcessSpec::arma11(0.3, 0.4), 10000, 23);
  CHECK(std::abs(autocorrelation(arma, 1) - 1.12 * 0.7 / 1.4) <= 0.05);
  CHECK(std::abs(autocorrelation(arma, 2) - 0.3 * 0.56) <= 0.05);
}

TEST_CASE("autocorrelation agrees with a direct sum") {
  const Series v = gen_component(ProcessSpec::ar1(0.5), 500, 3);
  CHECK(autocorrelation(v, 3) == doctest::Approx(sample_autocov(v, 3) / sample_autocov(v, 0)));
}

TEST_CASE("conditionally heteroskedastic sources are uncorrelated with correlated squares") {
  const Series g = gen_component(ProcessSpec::garch11(0.1, 0.8), 20000, 31);
  CHECK(std::abs(autocorrelation(g, 1)) <= 0.05);
  CHECK(autocorrelation(squares(g), 1) > 0.05);
  const Series a = gen_component(ProcessSpec::arch2(0.3, 0.2), 20000, 32);
  CHECK(std::abs(autocorrelation(a, 1)) <= 0.05);
  CHECK(autocorrelation(squares(a), 1) > 0.1);
}

TEST_CASE("innovation families all give unit-variance output") {
  for (auto inn : {Innovation::Gauss, Innovation::T4, Innovation::Uniform}) {
    const Series v = gen_component(ProcessSpec::iid(inn), 5000, 41);
    CHECK(variance(v) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(autocorrelation(v, 1)) <= 0.05);
  }
  // t4 has heavier tails than the Gaussian.
  auto kurtosis = [](const Series& v) {
    double m4 = 0.0;
    for (double e : v) m4 += e * e * e * e;
    return m4 / static_cast<double>(v.size());
  };
  CHECK(kurtosis(gen_component(ProcessSpec::iid(Innovation::T4), 20000, 42)) > 4.0);
  CHECK(kurtosis(gen_component(ProcessSpec::iid(Innovation::Uniform), 20000, 43)) < 2.2);
}

TEST_CASE("non-stationary specifications are rejected") {
  CHECK_THROWS_AS(ProcessSpec::ar1(1.0).validate(), Error);
  CHECK_THROWS_AS(ProcessSpec::arma11(-1.2, 0.1).validate(), Error);
  CHECK_THROWS_AS(ProcessSpec::garch11(0.3, 0.7).validate(), Error);
  CHECK_THROWS_AS(ProcessSpec::arch2(0.6, 0.5).validate(), Error);
  CHECK_NOTHROW(ProcessSpec::ar1(0.97).validate());
  CHECK_THROWS_AS(gen_component(ProcessSpec::ar1(1.5), 100, 1), Error);
}

TEST_CASE("mix applies omega and mu row by row") {
  Matrix zv(3, 2);
  zv << 1, 0, 0, 1, 1, 1;
  Matrix omega(2, 2);
  omega << 1, 2, 3, 4;
  Vector mu(2);
  mu << 10, 20;
  const auto x = mix(TimeSeriesMatrix(zv), omega, mu);
  CHECK(x(0, 0) == 11);
  CHECK(x(0, 1) == 23);
  CHECK(x(2, 0) == 13);
  CHECK(x(2, 1) == 27);
}

TEST_CASE("responses follow the model equations") {
  auto spec = make_simulation(ModelId::A, Recipe::Low);
  const auto z = gen_sources(spec, 50, 5);
  for (auto model : {ModelId::A, ModelId::B, ModelId::C, ModelId::D, ModelId::E, ModelId::Big}) {
    const Series y = make_response(model, z, 0.0, 9);
    const int lag = max_lag(model);
    for (int t = 0; t < lag; ++t) CHECK_FALSE(available(y[t]));
    for (Index t = lag; t < 50; ++t) {
      const double z1 = z(t - 1, 0), z2_1 = z(t - 1, 1);
      double expect = 0.0;
      switch (model) {
        case ModelId::A: expect = 2 * z1 + 3 * z2_1; break;
        case ModelId::B: expect = z1 * z1 + 3 * z(t - 5, 1); break;
        case ModelId::C: expect = std::pow(2 * z1 + 3 * z2_1, 2); break;
        case ModelId::D: expect = z1 * z1 + 3 * std::pow(z(t - 5, 1), 2); break;
        case ModelId::E: expect = 2 * std::pow(z1, 3) + 3 * std::pow(z(t - 5, 1), 2); break;
        case ModelId::Big: expect = z1 + z(t - 2, 1) + 0.5 * z(t - 4, 2); break;
        default: break;
      }
      CHECK(y[t] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("response noise has the requested spread") {
  const auto spec = make_simulation(ModelId::Null, Recipe::Low);
  const auto z = gen_sources(spec, 20000, 2);
  const Series y = make_response(ModelId::Null, z, 1.0, 3);
  CHECK(std::sqrt(variance(y)) == doctest::Approx(1.0).epsilon(0.03));
  const auto single = gen_sources(make_simulation(ModelId::M1, Recipe::Single), 20000, 2);
  Series resid = make_response(ModelId::M1, single, 1.0, 4);
  for (Index t = 3; t < 20000; ++t) resid[t] -= single(t - 1, 0) + single(t - 3, 0);
  resid.erase(resid.begin(), resid.begin() + 3);
  CHECK(variance(resid) == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("simulate mixes the sources and validates the mixing matrix") {
  auto spec = make_simulation(ModelId::B, Recipe::High);
  spec.mixing = Matrix::Identity(4, 4) * 2.0;
  spec.location = Vector::Constant(4, 1.0);
  const auto d = simulate(spec, 400, 8);
  CHECK((d.x.values() - 2.0 * d.z.values() - Matrix::Ones(400, 4)).norm() <
        1e-12);
  CHECK(d.y.size() == 400);
  const auto again = simulate(spec, 400, 8);
  CHECK(again.x.values() == d.x.values());

  spec.mixing = Matrix::Ones(4, 4);
  CHECK_THROWS_AS(simulate(spec, 400, 8), Error);
}

TEST_CASE("recipes and models round-trip through their names") {
  for (auto m : {ModelId::A, ModelId::B, ModelId::C, ModelId::D, ModelId::E, ModelId::M1,
                 ModelId::M2, ModelId::Big, ModelId::Null}) {
    CHECK(parse_model(to_string(m)) == m);
  }
  for (auto r : {Recipe::Low, Recipe::High, Recipe::NearNonstationary, Recipe::Garch,
                 Recipe::T4Low, Recipe::T4High, Recipe::Table1, Recipe::Big, Recipe::Single}) {
    CHECK(parse_recipe(to_string(r)) == r);
    CHECK_NOTHROW(make_simulation(ModelId::A, r == Recipe::Single ? Recipe::Low : r).validate());
  }
  CHECK_THROWS_AS(parse_model("Z"), Error);
  CHECK(make_simulation(ModelId::Big, Recipe::Big).width() == 10);
}
