#pragma once

// Shared generators and oracles for the test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pssc/loss.hpp"
#include "pssc/model.hpp"

namespace pssc::testing {

inline Mat random_symmetric(std::size_t n, SeededRng& rng) {
  Mat a = random_normal(n, n, rng);
  Mat s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

// Non-negative, symmetric, zero diagonal.
inline Mat random_similarity(std::size_t n, SeededRng& rng) {
  Mat s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) s(i, j) = s(j, i) = rng.uniform();
  return s;
}

inline std::vector<std::size_t> random_labels(std::size_t n, std::size_t k, SeededRng& rng) {
  std::vector<std::size_t> y(n);
  for (auto& v : y) v = rng.below(k);
  return y;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// Small network with a ReLU hidden layer, non-trivial C and a sharpened
// classifier so that some pseudo-labels pass thres = 0.5.
struct GradInstance {
  PsscParams params;
  Mat X;
  PseudoLabels labels;
};

inline GradInstance make_grad_instance(std::uint64_t seed, std::size_t n = 12, std::size_t d = 6,
                                       std::size_t latent = 4, std::size_t k = 3) {
  SeededRng rng(seed);
  const std::vector<std::size_t> widths{d, 5, latent};
  GradInstance g;
  g.params = init_params(widths, n, k, rng);
  g.params.C = random_normal(n, n, rng, 0.3);
  zero_diagonal(g.params.C);
  for (double& w : g.params.classifier.W.data()) w *= 4.0;
  g.X = random_normal(d, n, rng);
  g.labels = pseudo_labels(forward(g.params, g.X, ForwardMode::full).F, 0.5);
  return g;
}

struct FdReport {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_excess = 0.0;  // max |fd - an| / tol over all coordinates
};

// Central differences on every coordinate except diag(C), which is pinned.
inline FdReport finite_difference_check(const GradInstance& g, const LossConfig& cfg, double h = 1e-5,
                                        double rel = 1e-4, double abs_floor = 1e-7) {
  PsscParams p = g.params;
  const auto analytic = total_loss_and_grads(p, g.X, cfg, g.labels).grads;
  auto pb = param_blocks(p);
  const auto gb = param_blocks(analytic);
  const std::size_t c_block = 4 * p.encoder.size();  // W, b per layer in both stacks
  const std::size_t n = p.n();
  FdReport rep;
  for (std::size_t b = 0; b < pb.size(); ++b)
    for (std::size_t i = 0; i < pb[b].size(); ++i) {
      if (b == c_block && i / n == i % n) continue;
      const double old = pb[b][i];
      pb[b][i] = old + h;
      const double fp = total_loss_and_grads(p, g.X, cfg, g.labels).loss.total;
      pb[b][i] = old - h;
      const double fm = total_loss_and_grads(p, g.X, cfg, g.labels).loss.total;
      pb[b][i] = old;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = gb[b][i];
      const double tol = std::max(abs_floor, rel * std::max(std::abs(fd), std::abs(an)));
      const double excess = std::abs(fd - an) / tol;
      rep.worst_excess = std::max(rep.worst_excess, excess);
      if (excess > 1.0) ++rep.failed;
      ++rep.checked;
    }
  return rep;
}

// Brute-force Σ_ij S_ij ‖x_i − x̂_j‖².
inline double pairwise_quadform(const Mat& x, const Mat& xhat, const Mat& s) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.cols(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double d2 = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) d2 += (x(r, i) - xhat(r, j)) * (x(r, i) - xhat(r, j));
      total += s(i, j) * d2;
    }
  return total;
}

// Best accuracy over all relabelings of pred (k! permutations).
inline double brute_force_acc(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred,
                              std::size_t k) {
  std::vector<std::size_t> perm(k);
  for (std::size_t i = 0; i < k; ++i) perm[i] = i;
  std::size_t best = 0;
  do {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += perm[pred[i]] == truth[i];
    best = std::max(best, hit);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(truth.size());
}

}  // namespace pssc::testing
