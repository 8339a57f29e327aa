#pragma once

// Affinity from self-expression coefficients via a truncated SVD of the
// similarity, followed by normalized spectral clustering with seeded k-means.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pssc/errors.hpp"
#include "pssc/graph.hpp"
#include "pssc/linalg.hpp"

namespace pssc {

struct AffinityConfig {
  std::size_t k = 2;         // clusters
  std::size_t q = 1;         // intrinsic subspace dimension
  double alpha_exp = 1.0;    // elementwise exponent
  std::size_t kmeans_restarts = 10;
  std::uint64_t seed = 0;
  bool normalize_rows = true;

  // SVD truncation rank k·q + 1.
  std::size_t rank() const noexcept { return k * q + 1; }

  void validate(std::size_t n) const {
    if (k < 2) throw ConfigError("affinity: k must be at least 2");
    if (q < 1) throw ConfigError("affinity: q must be at least 1");
    if (!(alpha_exp > 0.0)) throw ConfigError("affinity: alpha must be positive");
    if (kmeans_restarts < 1) throw ConfigError("affinity: need at least one k-means restart");
    if (rank() > n)
      throw ConfigError("affinity: rank k*q+1 = " + std::to_string(rank()) + " exceeds n = " + std::to_string(n));
  }
};

struct ClusterResult {
  std::vector<std::size_t> labels;
  Mat A;
  double inertia = 0.0;
};

// A = |ZZᵀ|^α with Z = U_m Σ_m^{1/2} from the SVD of S; Z rows optionally
// scaled to unit length. Symmetrized by averaging with the transpose.
inline Mat affinity_from_similarity(const Mat& s, std::size_t m, double alpha, bool normalize_rows = true) {
  detail::require(s.is_square(), "affinity: S must be square");
  const std::size_t n = s.rows();
  if (m > n) throw ConfigError("affinity: rank " + std::to_string(m) + " exceeds n = " + std::to_string(n));
  const Svd dec = svd(s);
  Mat z(n, m);
  for (std::size_t j = 0; j < m; ++j) {
    const double w = std::sqrt(dec.sigma[j]);
    for (std::size_t i = 0; i < n; ++i) z(i, j) = dec.U(i, j) * w;
  }
  if (normalize_rows) {
    for (std::size_t i = 0; i < n; ++i) {
      double nrm = 0.0;
      for (double v : z.row(i)) nrm += v * v;
      nrm = std::sqrt(nrm);
      if (nrm > 0.0)
        for (double& v : z.row(i)) v /= nrm;
    }
  }
  const Mat g = matmul_nt(z, z);
  Mat a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x = std::abs(g(i, j));
      a(i, j) = alpha == 1.0 ? x : std::pow(x, alpha);
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = avg;
      a(j, i) = avg;
    }
  return a;
}

inline Mat build_affinity(const Mat& c, const AffinityConfig& cfg) {
  detail::require(c.is_square(), "build_affinity: C must be square, got " + shape_str(c));
  cfg.validate(c.rows());
  return affinity_from_similarity(similarity_from_coeff(c), cfg.rank(), cfg.alpha_exp, cfg.normalize_rows);
}

// ---------------------------------------------------------------------------

struct KMeansResult {
  std::vector<std::size_t> labels;
  Mat centers;
  double inertia = 0.0;
};

inline constexpr std::size_t kKMeansMaxIter = 300;
inline constexpr double kKMeansTol = 1e-9;

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double d = a[t] - b[t];
    s += d * d;
  }
  return s;
}

// Nearest center per row (lowest index on ties); returns the inertia.
inline double assign(const Mat& pts, const Mat& centers, std::vector<std::size_t>& labels) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.rows(); ++c) {
      const double d = sq_dist(pts.row(i), centers.row(c));
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    labels[i] = best;
    inertia += bd;
  }
  return inertia;
}

inline KMeansResult kmeans_once(const Mat& pts, std::size_t k, SeededRng& rng) {
  const std::size_t n = pts.rows();
  const std::size_t dim = pts.cols();
  Mat centers(k, dim);

  // Greedy farthest-point seeding from a random first center.
  std::vector<double> mind(n, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < k; ++c) {
    std::copy(pts.row(pick).begin(), pts.row(pick).end(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) mind[i] = std::min(mind[i], sq_dist(pts.row(i), centers.row(c)));
    std::size_t far = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (mind[i] > mind[far]) far = i;
    pick = far;
  }

  KMeansResult r{std::vector<std::size_t>(n), centers, 0.0};
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < kKMeansMaxIter; ++it) {
    r.inertia = assign(pts, r.centers, r.labels);
    if (std::isfinite(prev) && prev - r.inertia <= kKMeansTol * std::max(prev, 1e-300)) break;
    prev = r.inertia;
    Mat sums(k, dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[r.labels[i]];
      auto dst = sums.row(r.labels[i]);
      auto src = pts.row(i);
      for (std::size_t t = 0; t < dim; ++t) dst[t] += src[t];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      for (std::size_t t = 0; t < dim; ++t) r.centers(c, t) = sums(c, t) / static_cast<double>(counts[c]);
    }
  }
  return r;
}

}  // namespace detail

// k-means over the rows of `pts`; best of `restarts` runs (lowest inertia,
// earliest restart on ties).
inline KMeansResult kmeans(const Mat& pts, std::size_t k, std::size_t restarts, const SeededRng& rng) {
  if (k > pts.rows()) throw ConfigError("kmeans: k exceeds number of points");
  detail::require(k >= 1 && restarts >= 1, "kmeans: need k >= 1 and restarts >= 1");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    SeededRng sub = rng.split(r);
    KMeansResult cur = detail::kmeans_once(pts, k, sub);
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  return best;
}

// Eigenvectors of the k smallest eigenvalues of L_n(A), each with its
// largest-magnitude entry made non-negative, as an n x k matrix.
inline Mat spectral_embedding(const Mat& a, std::size_t k) {
  const SimilarityGraph g = normalized_laplacian(a);
  const EigenSym eig = eigh_sym(g.L_n);
  const std::size_t n = a.rows();
  Mat emb(n, k);
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(eig.vectors(i, j)) > std::abs(eig.vectors(arg, j))) arg = i;
    const double sgn = eig.vectors(arg, j) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) emb(i, j) = sgn * eig.vectors(i, j);
  }
  return emb;
}

inline ClusterResult spectral_cluster(const Mat& a, std::size_t k, std::size_t restarts, const SeededRng& rng) {
  detail::require(a.is_square(), "spectral_cluster: A must be square");
  if (k > a.rows()) throw ConfigError("spectral_cluster: k = " + std::to_string(k) + " exceeds n");
  Mat emb = spectral_embedding(a, k);
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    double nrm = 0.0;
    for (double v : emb.row(i)) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (nrm > 0.0)
      for (double& v : emb.row(i)) v /= nrm;
  }
  KMeansResult km = kmeans(emb, k, restarts, rng);
  return ClusterResult{std::move(km.labels), a, km.inertia};
}

}  // namespace pssc
