#pragma once

// Dense row-major real matrices, the handful of BLAS-like kernels the rest of
// the library needs, two small factorizations and a portable seeded RNG.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pssc/errors.hpp"

namespace pssc {

class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  // Nested-list constructor for literals in tests: Mat{{1, 2}, {3, 4}}.
  Mat(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      detail::require(r.size() == cols_, "Mat: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Mat diag(std::span<const double> v) {
    Mat m(v.size(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i) m(i, i) = v[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<double> col(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Mat& operator+=(const Mat& o) {
    detail::require(same_shape(o), "Mat +=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Mat& operator-=(const Mat& o) {
    detail::require(same_shape(o), "Mat -=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Mat& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  bool same_shape(const Mat& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool operator==(const Mat& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Mat operator+(Mat a, const Mat& b) { return a += b; }
inline Mat operator-(Mat a, const Mat& b) { return a -= b; }
inline Mat operator*(Mat a, double s) { return a *= s; }
inline Mat operator*(double s, Mat a) { return a *= s; }

inline std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline Mat transpose(const Mat& a) {
  Mat t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// A·B. i-k-j loop order keeps both inner accesses contiguous.
inline Mat matmul(const Mat& a, const Mat& b) {
  detail::require(a.cols() == b.rows(),
                  "matmul: inner dimension mismatch " + shape_str(a) + " * " + shape_str(b));
  Mat c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* bk = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

// Aᵀ·B without materializing the transpose.
inline Mat matmul_tn(const Mat& a, const Mat& b) {
  detail::require(a.rows() == b.rows(),
                  "matmul_tn: row mismatch " + shape_str(a) + " vs " + shape_str(b));
  Mat c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* ak = a.row(k).data();
    const double* bk = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ak[i];
      if (aki == 0.0) continue;
      double* ci = c.row(i).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

// A·Bᵀ.
inline Mat matmul_nt(const Mat& a, const Mat& b) {
  detail::require(a.cols() == b.cols(),
                  "matmul_nt: column mismatch " + shape_str(a) + " vs " + shape_str(b));
  Mat c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* bj = b.row(j).data();
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  }
  return c;
}

// Σ a_ij b_ij
inline double frob_dot(const Mat& a, const Mat& b) {
  detail::require(a.same_shape(b), "frob_dot: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

inline double frob_norm_sq(const Mat& a) { return frob_dot(a, a); }
inline double frob_norm(const Mat& a) { return std::sqrt(frob_norm_sq(a)); }

inline double max_abs(const Mat& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

inline bool all_finite(const Mat& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

inline bool is_symmetric(const Mat& a, double tol) {
  if (!a.is_square()) return false;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::abs(a(i, j) - a(j, i)) > tol) return false;
  return true;
}

// Columns picked by index, in the given order.
inline Mat select_cols(const Mat& a, std::span<const std::size_t> idx) {
  Mat out(a.rows(), idx.size());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) out(i, j) = a(i, idx[j]);
  return out;
}

// ---------------------------------------------------------------------------
// Seeded randomness. The engine is std::mt19937_64, whose output sequence is
// fixed by the standard; the distributions are written out here because the
// standard library ones are implementation-defined.

class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t below(std::uint64_t n) {
    detail::require(n > 0, "SeededRng::below: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Independent child stream; used to split one root seed per pipeline stage.
  SeededRng split(std::uint64_t stream) const {
    // splitmix64 finalizer over (seed, stream)
    std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return SeededRng(z ^ (z >> 31));
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline Mat random_normal(std::size_t rows, std::size_t cols, SeededRng& rng, double stddev = 1.0) {
  Mat m(rows, cols);
  for (double& v : m.data()) v = rng.normal(0.0, stddev);
  return m;
}

inline Mat random_uniform(std::size_t rows, std::size_t cols, SeededRng& rng, double lo, double hi) {
  Mat m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

// ---------------------------------------------------------------------------
// Row-wise softmax with max subtraction.

inline Mat softmax_rows(const Mat& m) {
  Mat out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto in = m.row(i);
    auto o = out.row(i);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (double& v : o) v /= sum;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Thin SVD by one-sided (Hestenes) Jacobi.

struct Svd {
  Mat U;                      // rows x r, orthonormal columns
  std::vector<double> sigma;  // r values, non-increasing
  Mat V;                      // cols x r, orthonormal columns
};

namespace detail {

// Replaces (near-)zero columns of Q with unit vectors orthogonal to the rest.
inline void complete_orthonormal(Mat& q, std::span<const char> valid) {
  const std::size_t m = q.rows();
  std::size_t probe = 0;
  for (std::size_t j = 0; j < q.cols(); ++j) {
    if (valid[j]) continue;
    while (probe < m) {
      std::vector<double> v(m, 0.0);
      v[probe++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < q.cols(); ++k) {
          if (k == j || (!valid[k] && k > j)) continue;
          double dot = 0.0;
          for (std::size_t i = 0; i < m; ++i) dot += q(i, k) * v[i];
          for (std::size_t i = 0; i < m; ++i) v[i] -= dot * q(i, k);
        }
      }
      double nrm = 0.0;
      for (double x : v) nrm += x * x;
      nrm = std::sqrt(nrm);
      if (nrm > 1e-8) {
        for (std::size_t i = 0; i < m; ++i) q(i, j) = v[i] / nrm;
        break;
      }
    }
  }
}

inline Svd svd_tall(const Mat& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Mat u = a;
  Mat v = Mat::identity(n);
  const std::size_t max_sweeps = 100 * std::max(m, n);
  constexpr double tol = 1e-15;

  bool converged = n < 2;
  for (std::size_t sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double up = u(i, p), uq = u(i, q);
          alpha += up * up;
          beta += uq * uq;
          gamma += up * uq;
        }
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double up = u(i, p), uq = u(i, q);
          u(i, p) = c * up - s * uq;
          u(i, q) = s * up + c * uq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) throw FactorizationError("svd: Jacobi sweeps did not converge");

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += u(i, j) * u(i, j);
    sigma[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  Svd out{Mat(m, n), std::vector<double>(n), Mat(n, n)};
  const double smax = n ? sigma[order[0]] : 0.0;
  const double zero_tol = std::max(smax, 1.0) * 1e-14 * static_cast<double>(std::max(m, n));
  std::vector<char> valid(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.sigma[k] = sigma[j];
    const bool ok = sigma[j] > zero_tol;
    valid[k] = ok;
    for (std::size_t i = 0; i < m; ++i) out.U(i, k) = ok ? u(i, j) / sigma[j] : 0.0;
    for (std::size_t i = 0; i < n; ++i) out.V(i, k) = v(i, j);
  }
  complete_orthonormal(out.U, valid);
  return out;
}

}  // namespace detail

// M = U·diag(sigma)·Vᵀ with r = min(rows, cols) singular triplets.
inline Svd svd(const Mat& m) {
  detail::require(all_finite(m), "svd: non-finite input");
  if (m.rows() >= m.cols()) return detail::svd_tall(m);
  Svd t = detail::svd_tall(transpose(m));
  return Svd{std::move(t.V), std::move(t.sigma), std::move(t.U)};
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition: Householder tridiagonalization followed by
// the implicit QL iteration.

struct EigenSym {
  std::vector<double> values;  // ascending
  Mat vectors;                 // column i pairs with values[i]
};

namespace detail {

inline void tridiagonalize(Mat& v, std::vector<double>& d, std::vector<double>& e) {
  const std::size_t n = v.rows();
  for (std::size_t j = 0; j < n; ++j) d[j] = v(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (std::size_t k = j + 1; k + 1 <= i; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k + 1 <= i; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  // Accumulate transformations.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (std::size_t k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

inline void tridiagonal_ql(Mat& v, std::vector<double>& d, std::vector<double>& e) {
  const std::size_t n = v.rows();
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  const std::size_t max_iter = 100 * n;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      std::size_t iter = 0;
      do {
        if (++iter > max_iter) throw FactorizationError("eigh_sym: QL iteration did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          for (std::size_t k = 0; k < n; ++k) {
            h = v(k, ii + 1);
            v(k, ii + 1) = s * v(k, ii) + c * h;
            v(k, ii) = c * v(k, ii) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace detail

inline EigenSym eigh_sym(const Mat& m) {
  detail::require(m.is_square(), "eigh_sym: matrix must be square, got " + shape_str(m));
  detail::require(all_finite(m), "eigh_sym: non-finite input");
  detail::require(is_symmetric(m, 1e-10 * std::max(1.0, max_abs(m))),
                  "eigh_sym: matrix is not symmetric");
  const std::size_t n = m.rows();
  EigenSym out{std::vector<double>(n), Mat(n, n)};
  if (n == 0) return out;

  Mat v(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) v(i, j) = 0.5 * (m(i, j) + m(j, i));
  std::vector<double> d(n), e(n);
  detail::tridiagonalize(v, d, e);
  detail::tridiagonal_ql(v, d, e);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = d[order[k]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

}  // namespace pssc
