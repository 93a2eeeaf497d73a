#pragma once

#include "tsdr/predict.hpp"
#include "tsdr/selection.hpp"
#include "tsdr/tsgen.hpp"

#include <cstdint>
#include <functional>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tsdr {

/// Reference for relative RMSE: the oracle fit on the same data, the H = 10
/// cell with the same seed, or nothing.
enum class Baseline { None, Oracle, H10 };

std::string_view to_string(Baseline baseline);

/// Study definition, read from an INI file with a single [study] section.
/// List values are comma separated. See configs/ for complete examples.
struct ExperimentConfig {
  std::string study = "study";
  std::vector<ModelId> models{ModelId::A};
  std::vector<Recipe> recipes{Recipe::Low};
  std::vector<Index> lengths{3000};
  std::vector<std::string> methods{"TSAVE"};  // TSAVE TSIR TSSH SAVE SIR ORACLE
  std::vector<int> slices;                    // empty: TSAVE 2, TSIR 10, SAVE 5, SIR 10
  std::vector<double> weights{0.5};           // TSSH only
  std::vector<double> thresholds{0.8};
  std::vector<Strategy> strategies{Strategy::BiggestValues};
  std::vector<std::string> bases{"auto"};     // auto: cubic for E and BIG, else quadratic
  int interior_knots = 3;
  int test_size = 100;
  int max_lag = 12;        // lags 1..max_lag, also the stacking depth of SIR/SAVE
  int tssh_sir_slices = 10;
  int tssh_save_slices = 2;
  int replicates = 100;
  std::uint64_t seed = 1;  // replicate r uses seed + r
  Baseline baseline = Baseline::Oracle;
  int workers = 1;
  std::filesystem::path output = "results";
  bool refit_reduction = false;
  bool plots = true;

  void validate() const;
};

ExperimentConfig parse_config(std::istream& in, const std::string& source_name);
ExperimentConfig load_config(const std::filesystem::path& path);

/// One combination of study factors. Factors a method ignores are unset.
struct Cell {
  ModelId model = ModelId::A;
  Recipe recipe = Recipe::Low;
  Index length = 0;
  std::string method;
  std::optional<int> slices;
  std::optional<double> weight;
  std::optional<double> threshold;
  std::optional<Strategy> strategy;
  Basis basis = Basis::Linear;

  std::string id() const;
  auto operator<=>(const Cell&) const = default;
};

/// Cartesian product of the config factors with duplicates removed, in
/// config order.
std::vector<Cell> expand_cells(const ExperimentConfig& config);

struct ReplicateRecord {
  int replicate = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string code;     // error code name when !ok
  std::string message;
  double rmse = kUnavailable;
  double baseline_rmse = kUnavailable;
  double relative = kUnavailable;
  int k_hat = -1;
  int s_hat = -1;
  double mass = kUnavailable;
  int success = -1;     // selection matched the true structure; -1 when not applicable
  std::string chosen;
};

struct Quartiles {
  double mean = kUnavailable;
  double q1 = kUnavailable;
  double median = kUnavailable;
  double q3 = kUnavailable;
};

Quartiles summarize(std::vector<double> values);

struct CellReport {
  Cell cell;
  std::vector<ReplicateRecord> records;
  int succeeded = 0;
  bool failed = false;  // fewer than 90% of replicates succeeded
  bool resumed = false;
  double runtime_seconds = 0.0;
  Quartiles rmse;
  Quartiles relative;
  double success_rate = kUnavailable;
};

struct StudyReport {
  std::string study;
  std::filesystem::path directory;
  std::vector<CellReport> cells;  // in expand_cells order
};

/// Runs every cell, writing `<output>/<study>/<cell>.csv`, `summary.csv`,
/// `errors.csv` and, when enabled, SVG box plots. Cells whose CSV exists
/// with matching metadata are loaded instead of recomputed.
StudyReport run_study(const ExperimentConfig& config);

/// Evaluates the cells of one (model, recipe, length) block on a single
/// replicate. Exposed for tests.
std::vector<ReplicateRecord> run_replicate(const std::vector<Cell>& cells,
                                           const ExperimentConfig& config, int replicate);

struct Table1Result {
  Matrix tsave;  // averaged L, rows = components, columns = lags 1..12
  Matrix tsir;
  int replicates = 0;
};

/// Model B on the Table1 recipe, T = 10^4, H = 5, lags 1..12. Writes
/// `table1_tsave.csv` and `table1_tsir.csv` with lags as rows and
/// components as columns, plus row and column sums.
Table1Result run_table1(const std::filesystem::path& out_dir, int replicates = 100,
                        std::uint64_t seed = 1, int workers = 1, Index length = 10000);

/// Scatter plots of y_t against the estimated source at each true lag of a
/// single-source model (M1 or M2), from a TSAVE fit with H = 5 and lags
/// 1..12. Returns the written files.
std::vector<std::filesystem::path> visualize_model(ModelId model,
                                                   const std::filesystem::path& out_dir,
                                                   std::uint64_t seed = 1, Index length = 1000);

/// Runs `count` jobs on up to `workers` threads; job i writes only its own
/// output slot, so results do not depend on the worker count.
void parallel_for(int count, int workers, const std::function<void(int)>& job);

}  // namespace tsdr
