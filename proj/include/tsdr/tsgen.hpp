#pragma once

#include "tsdr/series.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tsdr {

enum class ProcessKind { AR1, MA1, ARMA11, ARCH2, GARCH11, IID };
enum class Innovation { Gauss, T4, Uniform };

/// One latent source process. Innovations are scaled to unit variance.
struct ProcessSpec {
  ProcessKind kind = ProcessKind::IID;
  double phi = 0.0;
  double theta = 0.0;
  std::vector<double> arch_alphas;  // GARCH11: {alpha}; ARCH2: {alpha1, alpha2}
  double garch_beta = 0.0;
  Innovation innovation = Innovation::Gauss;

  static ProcessSpec iid(Innovation innovation = Innovation::Gauss);
  static ProcessSpec ar1(double phi, Innovation innovation = Innovation::Gauss);
  static ProcessSpec ma1(double theta, Innovation innovation = Innovation::Gauss);
  static ProcessSpec arma11(double phi, double theta, Innovation innovation = Innovation::Gauss);
  static ProcessSpec arch2(double alpha1, double alpha2, Innovation innovation = Innovation::Gauss);
  static ProcessSpec garch11(double alpha, double beta, Innovation innovation = Innovation::Gauss);

  /// Throws InvalidSpec unless the process is covariance stationary.
  void validate() const;
};

enum class ModelId { A, B, C, D, E, M1, M2, Big, Null };

std::string_view to_string(ModelId model);
ModelId parse_model(std::string_view text);

/// Largest predictor lag in the response equation (0 for the null model).
int max_lag(ModelId model);
/// Number of source columns the response equation reads.
int required_width(ModelId model);

struct SimulationSpec {
  std::vector<ProcessSpec> components;
  Matrix mixing;    // p x p, identity when empty
  Vector location;  // p, zero when empty
  ModelId response_model = ModelId::A;
  double response_noise_sd = 1.0;
  int burn_in = 1000;

  Index width() const { return static_cast<Index>(components.size()); }
  void validate() const;
};

/// Standardized realization (sample mean 0, variance 1) after discarding
/// `burn_in` start-up values. Identical arguments give identical output.
Series gen_component(const ProcessSpec& spec, Index length, std::uint64_t seed,
                     int burn_in = 1000);

/// Column c is drawn from the stream seeded with seed + 1000003 * c.
TimeSeriesMatrix gen_sources(const SimulationSpec& spec, Index length, std::uint64_t seed);

/// x_t = omega z_t + mu, row by row.
TimeSeriesMatrix mix(const TimeSeriesMatrix& z, const Matrix& omega, const Vector& mu);

/// Response of a model. Positions t < max_lag(model) are unavailable (NaN).
/// M1/M2 draw their noise from N(0, 0.2) and ignore noise_sd.
Series make_response(ModelId model, const TimeSeriesMatrix& z, double noise_sd,
                     std::uint64_t seed);

struct Dataset {
  TimeSeriesMatrix z;
  TimeSeriesMatrix x;
  Series y;
};

/// Sources, mixed predictors and response. The response noise uses the
/// stream seeded with seed + 1000003 * p.
Dataset simulate(const SimulationSpec& spec, Index length, std::uint64_t seed);

/// Named source-component settings of the simulation studies.
enum class Recipe {
  Low,                // AR(0.2), AR(0.2), ARMA(0.3, 0.4), MA(-0.4)
  High,               // AR(0.8), AR(0.8), ARMA(0.3, 0.4), MA(-0.4)
  NearNonstationary,  // AR(0.97) for the first two components
  Garch,              // GARCH(1,1) alpha 0.1 beta 0.8 for the first two
  T4Low,              // Low with t4 innovations in the first two
  T4High,             // High with t4 innovations in the first two
  Table1,             // AR(0.2), AR(0.2), ARMA(0.3, -0.4), MA(-0.4)
  Big,                // ten components of the p = 10, k = 3 setting
  Single,             // one AR(0.1) source (M1/M2)
};

std::string_view to_string(Recipe recipe);
Recipe parse_recipe(std::string_view text);

SimulationSpec make_simulation(ModelId model, Recipe recipe);

}  // namespace tsdr
