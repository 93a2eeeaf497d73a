#pragma once

#include "tsdr/series.hpp"
#include "tsdr/tsgen.hpp"

#include <compare>
#include <span>
#include <string_view>
#include <vector>

namespace tsdr {

enum class Strategy { AllLags, AllSources, Rectangle, BiggestValues };

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

/// 0-based component index and the lag value (not its column index).
struct SourceLag {
  int source = 0;
  int lag = 0;

  auto operator<=>(const SourceLag&) const = default;
};

struct SelectionResult {
  Strategy strategy = Strategy::BiggestValues;
  double threshold = 0.0;
  std::vector<SourceLag> chosen;  // in order of inclusion
  int k_hat = 0;  // distinct sources in `chosen`
  int s_hat = 0;  // lag bound of the strategy
  double covered_mass = 0.0;
};

/// Chooses components and lags from a scaled L matrix (rows = components in
/// descending row-sum order, columns = `lags`) so that at least `threshold`
/// of the mass is covered.
SelectionResult select(const Matrix& l, std::span<const int> lags, Strategy strategy,
                       double threshold);

/// True when `chosen` contains every (slot, lag) of `truth` under some
/// injective assignment of slots to components and has no components
/// beyond the truth's slot count.
bool expected_structure_check(const SelectionResult& selection, std::span<const SourceLag> truth);

/// (slot, lag) pattern of a response model's dependence on its sources.
std::vector<SourceLag> true_structure(ModelId model);

}  // namespace tsdr
