#pragma once

// Similarity graphs built from self-expression coefficients, their symmetric
// normalized Laplacians, and the pairwise weighted-reconstruction form.

#include <cmath>
#include <vector>

#include "pssc/errors.hpp"
#include "pssc/linalg.hpp"

namespace pssc {

inline constexpr double kDegreeEps = 1e-8;

struct SimilarityGraph {
  Mat S;                         // raw similarity
  Mat S_n;                       // D^{-1/2} S D^{-1/2}
  Mat L_n;                       // D^{-1/2} (D - S) D^{-1/2}
  std::vector<double> degrees;   // row sums of S
  std::vector<double> inv_sqrt;  // 1 / sqrt(degree + eps)
};

// S = ½(|C| + |C|ᵀ) with a zero diagonal.
inline Mat similarity_from_coeff(const Mat& c) {
  detail::require(c.is_square(), "similarity_from_coeff: C must be square, got " + shape_str(c));
  const std::size_t n = c.rows();
  Mat s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      s(i, j) = i == j ? 0.0 : 0.5 * (std::abs(c(i, j)) + std::abs(c(j, i)));
  return s;
}

inline SimilarityGraph normalized_laplacian(const Mat& s, double eps = kDegreeEps) {
  detail::require(s.is_square(), "normalized_laplacian: S must be square, got " + shape_str(s));
  detail::require(is_symmetric(s, 1e-10 * std::max(1.0, max_abs(s))),
                  "normalized_laplacian: S must be symmetric");
  const std::size_t n = s.rows();
  SimilarityGraph g{s, Mat(n, n), Mat(n, n), std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      detail::require(s(i, j) >= 0.0, "normalized_laplacian: negative similarity entry");
      d += s(i, j);
    }
    g.degrees[i] = d;
    g.inv_sqrt[i] = 1.0 / std::sqrt(d + eps);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double sn = g.inv_sqrt[i] * g.inv_sqrt[j] * s(i, j);
      g.S_n(i, j) = sn;
      g.L_n(i, j) = -sn;
    }
    g.L_n(i, i) += g.degrees[i] * g.inv_sqrt[i] * g.inv_sqrt[i];
  }
  return g;
}

// Location of the largest S_n entry in the strict upper triangle, scanned
// row-major; first hit wins on ties.
struct MaxEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

inline MaxEntry max_offdiag_upper(const Mat& m) {
  MaxEntry best;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (m(i, j) > best.value) best = {i, j, m(i, j)};
  return best;
}

// Pseudo-graph target in [0, 1]: S_n divided by its largest entry (left as is
// when S_n is identically zero).
inline Mat pseudo_graph(const SimilarityGraph& g) {
  const MaxEntry mx = max_offdiag_upper(g.S_n);
  if (mx.value <= 0.0) return g.S_n;
  Mat out = g.S_n;
  for (double& v : out.data()) v /= mx.value;
  return out;
}

// Tr[(X−X̂)ᵀ D (X−X̂)] + 2 Tr(Xᵀ L X̂) with L = D − S, samples as columns.
// Equal to Σ_ij S_ij ‖X_i − X̂_j‖² for symmetric S.
inline double weighted_recon_quadform(const Mat& x, const Mat& xhat, const Mat& s) {
  detail::require(x.same_shape(xhat), "weighted_recon_quadform: X and X̂ differ in shape");
  detail::require(s.is_square() && s.rows() == x.cols(),
                  "weighted_recon_quadform: S must be n x n with n = " + std::to_string(x.cols()));
  const std::size_t n = x.cols();
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += s(i, j);

  double diag_term = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t i = 0; i < n; ++i) {
      const double e = x(r, i) - xhat(r, i);
      diag_term += deg[i] * e * e;
    }

  // Tr(Xᵀ L X̂) = Σ_ij L_ij <X_i, X̂_j>
  const Mat gram = matmul_tn(x, xhat);
  double lap_term = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double l = (i == j ? deg[i] : 0.0) - s(i, j);
      lap_term += l * gram(i, j);
    }
  return diag_term + 2.0 * lap_term;
}

}  // namespace pssc
