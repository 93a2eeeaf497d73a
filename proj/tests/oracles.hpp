#pragma once

#include "tsdr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace tsdr::test {

// Objective of the rotation [[c, s], [-s, c]] on a 2x2 stack.
inline double rotation_objective(double theta, const std::vector<SymMatrix>& stack) {
  Matrix w(2, 2);
  w << std::cos(theta), std::sin(theta), -std::sin(theta), std::cos(theta);
  return diagonality(w, stack);
}

// Grid search over [0, pi) followed by golden-section refinement.
inline double grid_optimum(const std::vector<SymMatrix>& stack) {
  constexpr int kGrid = 4000;
  const double step = std::numbers::pi / kGrid;
  int best = 0;
  double best_val = -1.0;
  for (int k = 0; k < kGrid; ++k) {
    const double v = rotation_objective(k * step, stack);
    if (v > best_val) {
      best_val = v;
      best = k;
    }
  }
  double a = (best - 1) * step, b = (best + 1) * step;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 100; ++it) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (rotation_objective(c, stack) > rotation_objective(d, stack)) {
      b = d;
    } else {
      a = c;
    }
  }
  return std::max(best_val, rotation_objective((a + b) / 2, stack));
}

// Equal-frequency labels from an explicit rank table.
inline std::vector<int> naive_labels(const std::vector<double>& y, int h) {
  const std::size_t n = y.size();
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < n; ++i) order.emplace_back(y[i], i);
  std::sort(order.begin(), order.end());
  std::vector<int> labels(n);
  std::size_t pos = 0;
  for (int s = 0; s < h; ++s) {
    const std::size_t size = n / h + (static_cast<std::size_t>(s) < n % h ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) labels[order[pos++].second] = s;
  }
  return labels;
}

struct NaivePairs {
  std::vector<std::vector<double>> z;  // rows of usable pairs
  std::vector<int> label;
};

inline NaivePairs naive_pairs(const Matrix& z, const Series& y, int lag, int h) {
  NaivePairs out;
  std::vector<double> ys;
  for (Index t = 0; t + lag < z.rows(); ++t) {
    if (!available(y[t + lag])) continue;
    out.z.emplace_back();
    for (Index i = 0; i < z.cols(); ++i) out.z.back().push_back(z(t, i));
    ys.push_back(y[t + lag]);
  }
  out.label = naive_labels(ys, h);
  return out;
}

inline Matrix naive_tsir(const NaivePairs& d, int h, Index p) {
  const std::size_t n = d.z.size();
  std::vector<double> overall(p, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    for (Index i = 0; i < p; ++i) overall[i] += d.z[t][i] / n;
  Matrix out = Matrix::Zero(p, p);
  for (int s = 0; s < h; ++s) {
    std::vector<double> m(p, 0.0);
    double count = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (d.label[t] != s) continue;
      count += 1;
      for (Index i = 0; i < p; ++i) m[i] += d.z[t][i];
    }
    for (Index i = 0; i < p; ++i) m[i] = m[i] / count - overall[i];
    for (Index i = 0; i < p; ++i)
      for (Index k = 0; k < p; ++k) out(i, k) += count / n * m[i] * m[k];
  }
  return out;
}

inline Matrix naive_tsave(const NaivePairs& d, int h, Index p) {
  const std::size_t n = d.z.size();
  Matrix out = Matrix::Zero(p, p);
  for (int s = 0; s < h; ++s) {
    std::vector<double> m(p, 0.0);
    double count = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (d.label[t] != s) continue;
      count += 1;
      for (Index i = 0; i < p; ++i) m[i] += d.z[t][i];
    }
    for (Index i = 0; i < p; ++i) m[i] /= count;
    Matrix dev = Matrix::Identity(p, p);
    for (std::size_t t = 0; t < n; ++t) {
      if (d.label[t] != s) continue;
      for (Index i = 0; i < p; ++i)
        for (Index k = 0; k < p; ++k) dev(i, k) -= (d.z[t][i] - m[i]) * (d.z[t][k] - m[k]) / count;
    }
    for (Index i = 0; i < p; ++i)
      for (Index k = 0; k < p; ++k) {
        double sq = 0.0;
        for (Index l = 0; l < p; ++l) sq += dev(i, l) * dev(l, k);
        out(i, k) += count / n * sq;
      }
  }
  return out;
}

}  // namespace tsdr::test
