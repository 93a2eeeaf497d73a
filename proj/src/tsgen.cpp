#include "tsdr/tsgen.hpp"

#include "tsdr/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <random>

namespace tsdr {

namespace {

constexpr std::uint64_t kStreamStride = 1000003;

class InnovationDraw {
public:
  InnovationDraw(Innovation kind, std::uint64_t seed) : kind_(kind), rng_(seed) {}

  double operator()() {
    switch (kind_) {
      case Innovation::Gauss: return normal_(rng_);
      case Innovation::T4: return std::sqrt(0.5) * student_(rng_);
      case Innovation::Uniform: return std::sqrt(3.0) * uniform_(rng_);
    }
    return 0.0;
  }

private:
  Innovation kind_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::student_t_distribution<double> student_{4.0};
  std::uniform_real_distribution<double> uniform_{-1.0, 1.0};
};

std::string upper(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

ProcessSpec ProcessSpec::iid(Innovation innovation) {
  ProcessSpec s;
  s.kind = ProcessKind::IID;
  s.innovation = innovation;
  return s;
}

ProcessSpec ProcessSpec::ar1(double phi, Innovation innovation) {
  ProcessSpec s;
  s.kind = ProcessKind::AR1;
  s.phi = phi;
  s.innovation = innovation;
  return s;
}

ProcessSpec ProcessSpec::ma1(double theta, Innovation innovation) {
  ProcessSpec s;
  s.kind = ProcessKind::MA1;
  s.theta = theta;
  s.innovation = innovation;
  return s;
}

ProcessSpec ProcessSpec::arma11(double phi, double theta, Innovation innovation) {
  ProcessSpec s;
  s.kind = ProcessKind::ARMA11;
  s.phi = phi;
  s.theta = theta;
  s.innovation = innovation;
  return s;
}

ProcessSpec ProcessSpec::arch2(double alpha1, double alpha2, Innovation innovation) {
  ProcessSpec s;
  s.kind = ProcessKind::ARCH2;
  s.arch_alphas = {alpha1, alpha2};
  s.innovation = innovation;
  return s;
}

ProcessSpec ProcessSpec::garch11(double alpha, double beta, Innovation innovation) {
  ProcessSpec s;
  s.kind = ProcessKind::GARCH11;
  s.arch_alphas = {alpha};
  s.garch_beta = beta;
  s.innovation = innovation;
  return s;
}

void ProcessSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidSpec, msg); };
  if (!std::isfinite(phi) || !std::isfinite(theta) || !std::isfinite(garch_beta)) {
    fail("process parameters must be finite");
  }
  switch (kind) {
    case ProcessKind::AR1:
    case ProcessKind::ARMA11:
      if (!(std::abs(phi) < 1.0)) fail(fmt::format("AR coefficient {} is not stationary (|phi| < 1)", phi));
      break;
    case ProcessKind::ARCH2: {
      if (arch_alphas.size() != 2) fail("ARCH(2) needs exactly two alphas");
      if (arch_alphas[0] < 0.0 || arch_alphas[1] < 0.0) fail("ARCH alphas must be non-negative");
      const double sum = arch_alphas[0] + arch_alphas[1];
      if (!(sum < 1.0)) fail(fmt::format("ARCH(2) alphas sum to {} (must be < 1)", sum));
      break;
    }
    case ProcessKind::GARCH11: {
      if (arch_alphas.size() != 1) fail("GARCH(1,1) needs exactly one alpha");
      if (arch_alphas[0] < 0.0 || garch_beta < 0.0) fail("GARCH parameters must be non-negative");
      if (!(arch_alphas[0] + garch_beta < 1.0)) {
        fail(fmt::format("GARCH(1,1) alpha + beta = {} (must be < 1)", arch_alphas[0] + garch_beta));
      }
      break;
    }
    case ProcessKind::MA1:
    case ProcessKind::IID:
      break;
  }
}

Series gen_component(const ProcessSpec& spec, Index length, std::uint64_t seed, int burn_in) {
  spec.validate();
  if (length < 2) throw Error(ErrorCode::InvalidInput, "component length must be at least 2");
  if (burn_in < 0) throw Error(ErrorCode::InvalidInput, "burn-in must be non-negative");

  InnovationDraw draw(spec.innovation, seed);
  const auto total = static_cast<std::size_t>(length + burn_in);
  Series out;
  out.reserve(static_cast<std::size_t>(length));

  double prev_x = 0.0, prev_e = 0.0;
  double prev_a = 0.0, prev_a2 = 0.0, prev_sigma2 = 1.0;
  for (std::size_t t = 0; t < total; ++t) {
    const double e = draw();
    double x = 0.0;
    switch (spec.kind) {
      case ProcessKind::IID: x = e; break;
      case ProcessKind::AR1: x = spec.phi * prev_x + e; break;
      case ProcessKind::MA1: x = e + spec.theta * prev_e; break;
      case ProcessKind::ARMA11: x = spec.phi * prev_x + e + spec.theta * prev_e; break;
      case ProcessKind::ARCH2: {
        const double a1 = spec.arch_alphas[0], a2 = spec.arch_alphas[1];
        const double sigma2 = (1.0 - a1 - a2) + a1 * prev_a * prev_a + a2 * prev_a2 * prev_a2;
        x = std::sqrt(sigma2) * e;
        prev_a2 = prev_a;
        prev_a = x;
        break;
      }
      case ProcessKind::GARCH11: {
        const double alpha = spec.arch_alphas[0], beta = spec.garch_beta;
        const double sigma2 = (1.0 - alpha - beta) + alpha * prev_a * prev_a + beta * prev_sigma2;
        x = std::sqrt(sigma2) * e;
        prev_a = x;
        prev_sigma2 = sigma2;
        break;
      }
    }
    prev_x = x;
    prev_e = e;
    if (t >= static_cast<std::size_t>(burn_in)) out.push_back(x);
  }

  // Two passes keep the standardized moments within rounding of (0, 1).
  for (int pass = 0; pass < 2; ++pass) {
    const double m = mean(out);
    const double sd = std::sqrt(variance(out));
    if (!(sd > 0.0)) throw Error(ErrorCode::InvalidSpec, "generated component has zero variance");
    for (auto& v : out) v = (v - m) / sd;
  }
  return out;
}

void SimulationSpec::validate() const {
  if (components.empty()) throw Error(ErrorCode::InvalidSpec, "simulation needs at least one component");
  for (const auto& c : components) c.validate();
  const Index p = width();
  if (mixing.size() != 0) {
    if (mixing.rows() != p || mixing.cols() != p) {
      throw Error(ErrorCode::InvalidSpec, fmt::format("mixing matrix must be {}x{}", p, p));
    }
    Eigen::JacobiSVD<Matrix> svd(mixing);
    const auto& sv = svd.singularValues();
    if (!(sv(p - 1) > 1e-10 * sv(0))) {
      throw Error(ErrorCode::InvalidSpec, "mixing matrix is not of full rank");
    }
  }
  if (location.size() != 0 && location.size() != p) {
    throw Error(ErrorCode::InvalidSpec, fmt::format("location must have {} entries", p));
  }
  if (required_width(response_model) > p) {
    throw Error(ErrorCode::InvalidSpec,
                fmt::format("model {} needs {} sources, spec has {}", to_string(response_model),
                            required_width(response_model), p));
  }
  if (!(response_noise_sd >= 0.0)) throw Error(ErrorCode::InvalidSpec, "noise sd must be >= 0");
  if (burn_in < 0) throw Error(ErrorCode::InvalidSpec, "burn-in must be non-negative");
}

TimeSeriesMatrix gen_sources(const SimulationSpec& spec, Index length, std::uint64_t seed) {
  spec.validate();
  const Index p = spec.width();
  Matrix z(length, p);
  for (Index c = 0; c < p; ++c) {
    const auto col = gen_component(spec.components[c], length,
                                   seed + kStreamStride * static_cast<std::uint64_t>(c),
                                   spec.burn_in);
    for (Index t = 0; t < length; ++t) z(t, c) = col[t];
  }
  return TimeSeriesMatrix(std::move(z));
}

TimeSeriesMatrix mix(const TimeSeriesMatrix& z, const Matrix& omega, const Vector& mu) {
  const Index p = z.width();
  if (omega.rows() != p || omega.cols() != p || mu.size() != p) {
    throw Error(ErrorCode::InvalidInput,
                fmt::format("mixing {}x{} / location {} do not conform to width {}", omega.rows(),
                            omega.cols(), mu.size(), p));
  }
  Matrix x = z.values() * omega.transpose();
  x.rowwise() += mu.transpose();
  return TimeSeriesMatrix(std::move(x));
}

std::string_view to_string(ModelId model) {
  switch (model) {
    case ModelId::A: return "A";
    case ModelId::B: return "B";
    case ModelId::C: return "C";
    case ModelId::D: return "D";
    case ModelId::E: return "E";
    case ModelId::M1: return "M1";
    case ModelId::M2: return "M2";
    case ModelId::Big: return "BIG";
    case ModelId::Null: return "NULL";
  }
  return "?";
}

ModelId parse_model(std::string_view text) {
  static constexpr std::array all{ModelId::A,  ModelId::B,  ModelId::C,   ModelId::D,   ModelId::E,
                                  ModelId::M1, ModelId::M2, ModelId::Big, ModelId::Null};
  const auto key = upper(text);
  for (auto m : all) {
    if (key == to_string(m)) return m;
  }
  throw Error(ErrorCode::UnknownModel, fmt::format("unknown model id '{}'", text));
}

int max_lag(ModelId model) {
  switch (model) {
    case ModelId::A:
    case ModelId::C: return 1;
    case ModelId::B:
    case ModelId::D:
    case ModelId::E: return 5;
    case ModelId::M1:
    case ModelId::M2: return 3;
    case ModelId::Big: return 4;
    case ModelId::Null: return 0;
  }
  return 0;
}

int required_width(ModelId model) {
  switch (model) {
    case ModelId::M1:
    case ModelId::M2: return 1;
    case ModelId::Big: return 3;
    case ModelId::Null: return 0;
    default: return 2;
  }
}

Series make_response(ModelId model, const TimeSeriesMatrix& z, double noise_sd,
                     std::uint64_t seed) {
  const Index length = z.length();
  if (z.width() < required_width(model)) {
    throw Error(ErrorCode::InvalidInput,
                fmt::format("model {} needs {} source columns, got {}", to_string(model),
                            required_width(model), z.width()));
  }
  const int lag = max_lag(model);
  if (lag >= length) {
    throw Error(ErrorCode::InsufficientData,
                fmt::format("series of length {} is too short for model {}", length,
                            to_string(model)));
  }
  const bool small_noise = model == ModelId::M1 || model == ModelId::M2;
  const double sd = small_noise ? std::sqrt(0.2) : noise_sd;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Series y(static_cast<std::size_t>(length), kUnavailable);
  for (Index t = 0; t < length; ++t) {
    const double eps = sd * normal(rng);  // drawn for every t to keep streams aligned
    if (t < lag) continue;
    auto v = [&](Index col, Index l) { return z(t - l, col); };
    double signal = 0.0;
    switch (model) {
      case ModelId::A: signal = 2.0 * v(0, 1) + 3.0 * v(1, 1); break;
      case ModelId::B: signal = v(0, 1) * v(0, 1) + 3.0 * v(1, 5); break;
      case ModelId::C: {
        const double u = 2.0 * v(0, 1) + 3.0 * v(1, 1);
        signal = u * u;
        break;
      }
      case ModelId::D: signal = v(0, 1) * v(0, 1) + 3.0 * v(1, 5) * v(1, 5); break;
      case ModelId::E: signal = 2.0 * std::pow(v(0, 1), 3) + 3.0 * v(1, 5) * v(1, 5); break;
      case ModelId::M1: signal = v(0, 1) + v(0, 3); break;
      case ModelId::M2: signal = 1.0 + v(0, 1) * v(0, 1) + v(0, 3) * v(0, 3); break;
      case ModelId::Big: signal = v(0, 1) + v(1, 2) + 0.5 * v(2, 4); break;
      case ModelId::Null: signal = 0.0; break;
    }
    y[t] = signal + eps;
  }
  return y;
}

Dataset simulate(const SimulationSpec& spec, Index length, std::uint64_t seed) {
  spec.validate();
  const Index p = spec.width();
  auto z = gen_sources(spec, length, seed);
  const Matrix omega = spec.mixing.size() ? spec.mixing : Matrix::Identity(p, p);
  const Vector mu = spec.location.size() ? spec.location : Vector::Zero(p);
  auto x = mix(z, omega, mu);
  auto y = make_response(spec.response_model, z, spec.response_noise_sd,
                         seed + kStreamStride * static_cast<std::uint64_t>(p));
  return {std::move(z), std::move(x), std::move(y)};
}

std::string_view to_string(Recipe recipe) {
  switch (recipe) {
    case Recipe::Low: return "low";
    case Recipe::High: return "high";
    case Recipe::NearNonstationary: return "near_nonstationary";
    case Recipe::Garch: return "garch";
    case Recipe::T4Low: return "t4_low";
    case Recipe::T4High: return "t4_high";
    case Recipe::Table1: return "table1";
    case Recipe::Big: return "big";
    case Recipe::Single: return "single";
  }
  return "?";
}

Recipe parse_recipe(std::string_view text) {
  static constexpr std::array all{Recipe::Low,    Recipe::High,   Recipe::NearNonstationary,
                                  Recipe::Garch,  Recipe::T4Low,  Recipe::T4High,
                                  Recipe::Table1, Recipe::Big,    Recipe::Single};
  std::string key(text);
  for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto r : all) {
    if (key == to_string(r)) return r;
  }
  throw Error(ErrorCode::InvalidSpec, fmt::format("unknown component recipe '{}'", text));
}

SimulationSpec make_simulation(ModelId model, Recipe recipe) {
  using P = ProcessSpec;
  const auto t4 = Innovation::T4;
  SimulationSpec spec;
  spec.response_model = model;
  const auto tail = std::vector{P::arma11(0.3, 0.4), P::ma1(-0.4)};
  auto with_tail = [&](P first, P second) {
    std::vector<P> comps{first, second};
    comps.insert(comps.end(), tail.begin(), tail.end());
    return comps;
  };
  switch (recipe) {
    case Recipe::Low: spec.components = with_tail(P::ar1(0.2), P::ar1(0.2)); break;
    case Recipe::High: spec.components = with_tail(P::ar1(0.8), P::ar1(0.8)); break;
    case Recipe::NearNonstationary: spec.components = with_tail(P::ar1(0.97), P::ar1(0.97)); break;
    case Recipe::Garch:
      spec.components = with_tail(P::garch11(0.1, 0.8), P::garch11(0.1, 0.8));
      break;
    case Recipe::T4Low: spec.components = with_tail(P::ar1(0.2, t4), P::ar1(0.2, t4)); break;
    case Recipe::T4High: spec.components = with_tail(P::ar1(0.8, t4), P::ar1(0.8, t4)); break;
    case Recipe::Table1:
      spec.components = {P::ar1(0.2), P::ar1(0.2), P::arma11(0.3, -0.4), P::ma1(-0.4)};
      break;
    case Recipe::Big:
      spec.components = {P::ar1(-0.2),        P::ar1(0.8, t4),
                         P::garch11(0.05, 0.93), P::ar1(0.6, Innovation::Uniform),
                         P::ar1(0.98),         P::arch2(0.3, 0.4),
                         P::garch11(0.1, 0.8), P::arma11(0.3, -0.6),
                         P::iid(),             P::iid(t4)};
      break;
    case Recipe::Single: spec.components = {P::ar1(0.1)}; break;
  }
  spec.validate();
  return spec;
}

}  // namespace tsdr
