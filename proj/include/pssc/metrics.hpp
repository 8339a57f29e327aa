#pragma once

// Clustering quality (ACC, NMI, purity) and reconstruction PSNR.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "pssc/errors.hpp"
#include "pssc/linalg.hpp"

namespace pssc {

struct MetricReport {
  double acc = 0.0;
  double nmi = 0.0;
  double purity = 0.0;
  std::optional<double> psnr;
};

namespace detail {

// Contingency table with rows = true classes, cols = predicted clusters,
// both compacted to 0..r-1 in order of first appearance in sorted values.
struct Contingency {
  std::vector<std::vector<double>> counts;
  std::size_t n = 0;
};

inline Contingency contingency(std::span<const std::size_t> truth, std::span<const std::size_t> pred) {
  require(truth.size() == pred.size(), "metrics: label vectors differ in length");
  require(!truth.empty(), "metrics: need at least one sample");
  std::map<std::size_t, std::size_t> ti, pi;
  for (auto t : truth) ti.emplace(t, 0);
  for (auto p : pred) pi.emplace(p, 0);
  std::size_t k = 0;
  for (auto& [_, v] : ti) v = k++;
  k = 0;
  for (auto& [_, v] : pi) v = k++;
  Contingency c;
  c.n = truth.size();
  c.counts.assign(ti.size(), std::vector<double>(pi.size(), 0.0));
  for (std::size_t i = 0; i < truth.size(); ++i) c.counts[ti[truth[i]]][pi[pred[i]]] += 1.0;
  return c;
}

// Minimum-cost assignment on a square matrix (Kuhn-Munkres with potentials).
// Returns col_of_row.
inline std::vector<std::size_t> hungarian_min(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<std::size_t> col_of_row(n);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j]) col_of_row[p[j] - 1] = j - 1;
  return col_of_row;
}

inline double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  return h;
}

}  // namespace detail

// Best one-to-one matching of predicted clusters to classes.
inline double acc(std::span<const std::size_t> truth, std::span<const std::size_t> pred) {
  const auto c = detail::contingency(truth, pred);
  const std::size_t k = std::max(c.counts.size(), c.counts.front().size());
  std::vector<std::vector<double>> cost(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < c.counts.size(); ++i)
    for (std::size_t j = 0; j < c.counts[i].size(); ++j) cost[i][j] = -c.counts[i][j];
  const auto match = detail::hungarian_min(cost);
  double hit = 0.0;
  for (std::size_t i = 0; i < k; ++i) hit -= cost[i][match[i]];
  return hit / static_cast<double>(c.n);
}

enum class NmiNorm { arithmetic, geometric };

inline double nmi(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                  NmiNorm norm = NmiNorm::arithmetic) {
  const auto c = detail::contingency(truth, pred);
  const double n = static_cast<double>(c.n);
  std::vector<double> rows(c.counts.size(), 0.0), cols(c.counts.front().size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) {
      rows[i] += c.counts[i][j];
      cols[j] += c.counts[i][j];
    }
  double mi = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double nij = c.counts[i][j];
      if (nij > 0.0) mi += (nij / n) * std::log(nij * n / (rows[i] * cols[j]));
    }
  const double ht = detail::entropy(rows, n);
  const double hp = detail::entropy(cols, n);
  const double denom = norm == NmiNorm::arithmetic ? 0.5 * (ht + hp) : std::sqrt(ht * hp);
  if (ht == 0.0 && hp == 0.0) return 1.0;
  if (denom <= 0.0) return 0.0;
  return std::clamp(mi / denom, 0.0, 1.0);
}

inline double purity(std::span<const std::size_t> truth, std::span<const std::size_t> pred) {
  const auto c = detail::contingency(truth, pred);
  double s = 0.0;
  for (std::size_t j = 0; j < c.counts.front().size(); ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < c.counts.size(); ++i) best = std::max(best, c.counts[i][j]);
    s += best;
  }
  return s / static_cast<double>(c.n);
}

inline constexpr double kPsnrCap = 99.0;

inline double psnr(const Mat& x, const Mat& xhat, double peak) {
  detail::require(x.same_shape(xhat), "psnr: shape mismatch " + shape_str(x) + " vs " + shape_str(xhat));
  detail::require(peak > 0.0, "psnr: peak must be positive");
  detail::require(!x.empty(), "psnr: empty input");
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = x.data()[i] - xhat.data()[i];
    se += e * e;
  }
  const double mse = se / static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

// Default peak: dynamic range of the reference data.
inline double dynamic_range(const Mat& x) {
  if (x.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(x.data().begin(), x.data().end());
  return *hi - *lo;
}

inline MetricReport evaluate(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                             NmiNorm norm = NmiNorm::arithmetic) {
  MetricReport r;
  r.acc = acc(truth, pred);
  r.nmi = nmi(truth, pred, norm);
  r.purity = purity(truth, pred);
  return r;
}

}  // namespace pssc
