#include "tsdr/selection.hpp"

#include "tsdr/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>

namespace tsdr {

namespace {

// Cumulative sums compare against P with a little slack for rounding in
// quantities that should hit P exactly.
constexpr double kMassSlack = 1e-12;

}  // namespace

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::AllLags: return "ALL_LAGS";
    case Strategy::AllSources: return "ALL_SOURCES";
    case Strategy::Rectangle: return "RECTANGLE";
    case Strategy::BiggestValues: return "BIGGEST_VALUES";
  }
  return "?";
}

Strategy parse_strategy(std::string_view text) {
  std::string key(text);
  for (auto& c : key) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  std::replace(key.begin(), key.end(), ' ', '_');
  for (auto s : {Strategy::AllLags, Strategy::AllSources, Strategy::Rectangle,
                 Strategy::BiggestValues}) {
    if (key == to_string(s)) return s;
  }
  throw Error(ErrorCode::InvalidInput, fmt::format("unknown selection strategy '{}'", text));
}

SelectionResult select(const Matrix& l, std::span<const int> lags, Strategy strategy,
                       double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::InvalidInput, fmt::format("threshold {} is outside (0, 1)", threshold));
  }
  const Index p = l.rows(), s = l.cols();
  if (p < 1 || s < 1 || static_cast<Index>(lags.size()) != s) {
    throw Error(ErrorCode::InvalidInput, "L matrix shape does not match the lag list");
  }
  if (!l.allFinite() || l.minCoeff() < 0.0) {
    throw Error(ErrorCode::InvalidInput, "L matrix has negative or non-finite entries");
  }
  const double total = l.sum();
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidInput, fmt::format("L entries sum to {}, expected 1", total));
  }
  const double target = threshold - kMassSlack;

  SelectionResult out;
  out.strategy = strategy;
  out.threshold = threshold;

  auto take_block = [&](Index k, Index lag_count) {
    for (Index i = 0; i < k; ++i) {
      for (Index j = 0; j < lag_count; ++j) {
        out.chosen.push_back({static_cast<int>(i), lags[j]});
        out.covered_mass += l(i, j);
      }
    }
    out.k_hat = static_cast<int>(k);
    out.s_hat = lags[lag_count - 1];
  };

  switch (strategy) {
    case Strategy::AllLags: {
      const Vector rows = l.rowwise().sum();
      double acc = 0.0;
      Index k = 0;
      while (k < p) {
        acc += rows(k++);
        if (acc >= target) break;
      }
      take_block(k, s);
      break;
    }
    case Strategy::AllSources: {
      const Vector cols = l.colwise().sum().transpose();
      double acc = 0.0;
      Index j = 0;
      while (j < s) {
        acc += cols(j++);
        if (acc >= target) break;
      }
      take_block(p, j);
      break;
    }
    case Strategy::Rectangle: {
      // Prefix sums over the top-left blocks.
      Matrix prefix = Matrix::Zero(p + 1, s + 1);
      for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j < s; ++j) {
          prefix(i + 1, j + 1) = l(i, j) + prefix(i, j + 1) + prefix(i + 1, j) - prefix(i, j);
        }
      }
      Index best_k = p, best_s = s;
      for (Index k = 1; k <= p; ++k) {
        for (Index j = 1; j <= s; ++j) {
          if (prefix(k, j) < target) continue;
          if (k * j < best_k * best_s || (k * j == best_k * best_s && k < best_k)) {
            best_k = k;
            best_s = j;
          }
          break;  // larger j only grows the product for this k
        }
      }
      take_block(best_k, best_s);
      break;
    }
    case Strategy::BiggestValues: {
      std::vector<std::pair<Index, Index>> cells;
      cells.reserve(static_cast<std::size_t>(p * s));
      for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j < s; ++j) cells.emplace_back(i, j);
      }
      std::stable_sort(cells.begin(), cells.end(), [&](const auto& a, const auto& b) {
        return l(a.first, a.second) > l(b.first, b.second);
      });
      std::set<int> sources;
      int max_lag = 0;
      for (const auto& [i, j] : cells) {
        out.chosen.push_back({static_cast<int>(i), lags[j]});
        out.covered_mass += l(i, j);
        sources.insert(static_cast<int>(i));
        max_lag = std::max(max_lag, lags[j]);
        if (out.covered_mass >= target) break;
      }
      out.k_hat = static_cast<int>(sources.size());
      out.s_hat = max_lag;
      break;
    }
  }
  return out;
}

bool expected_structure_check(const SelectionResult& selection, std::span<const SourceLag> truth) {
  std::map<int, std::set<int>> chosen;  // component -> lags
  for (const auto& c : selection.chosen) chosen[c.source].insert(c.lag);
  std::map<int, std::set<int>> wanted;  // slot -> lags
  for (const auto& t : truth) wanted[t.source].insert(t.lag);
  if (chosen.size() != wanted.size()) return false;

  std::vector<std::set<int>> slots;
  for (auto& [slot, lags] : wanted) slots.push_back(lags);
  std::vector<std::set<int>> components;
  for (auto& [component, lags] : chosen) components.push_back(lags);

  // Small bipartite matching by backtracking; slot counts are tiny.
  std::vector<bool> used(components.size(), false);
  std::function<bool(std::size_t)> assign = [&](std::size_t slot) {
    if (slot == slots.size()) return true;
    for (std::size_t c = 0; c < components.size(); ++c) {
      if (used[c]) continue;
      if (!std::includes(components[c].begin(), components[c].end(), slots[slot].begin(),
                         slots[slot].end())) {
        continue;
      }
      used[c] = true;
      if (assign(slot + 1)) return true;
      used[c] = false;
    }
    return false;
  };
  return assign(0);
}

std::vector<SourceLag> true_structure(ModelId model) {
  switch (model) {
    case ModelId::A:
    case ModelId::C: return {{0, 1}};
    case ModelId::B:
    case ModelId::D:
    case ModelId::E: return {{0, 1}, {1, 5}};
    case ModelId::M1:
    case ModelId::M2: return {{0, 1}, {0, 3}};
    case ModelId::Big: return {{0, 1}, {1, 2}, {2, 4}};
    case ModelId::Null: return {};
  }
  return {};
}

}  // namespace tsdr
