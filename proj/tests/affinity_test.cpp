#include <gtest/gtest.h>

#include <numeric>

#include "pssc/affinity.hpp"
#include "pssc/metrics.hpp"
#include "support.hpp"

using namespace pssc;
using namespace pssc::testing;

namespace {

// Two dense blocks {0,1,2} and {3,4,5}, zero diagonal, random weights and signs.
Mat two_block_coeff(SeededRng& rng) {
  Mat c(6, 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      if (i != j && i / 3 == j / 3) c(i, j) = rng.uniform(0.2, 1.0) * (rng.below(2) ? 1.0 : -1.0);
  return c;
}

Mat noisy_blocks(std::size_t n, SeededRng& rng) {
  Mat a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      a(i, j) = a(j, i) = (i < n / 2) == (j < n / 2) ? rng.uniform(0.8, 1.0) : rng.uniform(0.0, 0.05);
  return a;
}

std::vector<std::size_t> block_truth(std::size_t n) {
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i < n / 2 ? 0 : 1;
  return y;
}

}  // namespace

TEST(AffinityConfig, RankAndValidation) {
  AffinityConfig c{.k = 40, .q = 3};
  EXPECT_EQ(c.rank(), 121u);
  EXPECT_THROW(c.validate(120), ConfigError);
  EXPECT_NO_THROW(c.validate(121));
  c.k = 1;
  EXPECT_THROW(c.validate(500), ConfigError);
  c = AffinityConfig{.k = 2, .q = 1, .alpha_exp = 0.0};
  EXPECT_THROW(c.validate(10), ConfigError);
}

TEST(Affinity, TwoBlocksStaySeparated) {
  SeededRng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Mat a = build_affinity(two_block_coeff(rng), AffinityConfig{.k = 2, .q = 2});
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        if (i / 3 != j / 3) {
          ASSERT_LT(a(i, j), 1e-8);
        }
  }
}

TEST(Affinity, HandComputedTwoByTwo) {
  // S = [[0, ½], [½, 0]] has both singular values ½, so Z Zᵀ = ½ U Uᵀ = ½ I
  // for any orthogonal U; unit rows turn that into I.
  const Mat s = similarity_from_coeff(Mat{{0, 0.5}, {0.5, 0}});
  const Mat a = affinity_from_similarity(s, 2, 1.0);
  EXPECT_LT(max_abs_diff(a, Mat::identity(2)), 1e-14);
  const Mat raw = affinity_from_similarity(s, 2, 1.0, false);
  EXPECT_LT(max_abs_diff(raw, Mat::identity(2) * 0.5), 1e-14);
}

TEST(Affinity, InvariantUnderTransposeAndSigns) {
  SeededRng rng(2);
  const AffinityConfig cfg{.k = 2, .q = 2, .alpha_exp = 1.7};
  for (int t = 0; t < 10; ++t) {
    const Mat c = random_normal(8, 8, rng);
    Mat flipped = c;
    for (double& v : flipped.data())
      if (rng.below(2)) v = -v;
    const Mat a = build_affinity(c, cfg);
    EXPECT_EQ(build_affinity(transpose(c), cfg), a);
    EXPECT_EQ(build_affinity(flipped, cfg), a);
  }
}

TEST(Affinity, BoundedByOneWithUnitRows) {
  SeededRng rng(3);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 3 + rng.below(8);
    const Mat a = affinity_from_similarity(similarity_from_coeff(random_normal(n, n, rng)), n, 1.0);
    ASSERT_TRUE(is_symmetric(a, 0.0));
    for (double v : a.data()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0 + 1e-10);
    }
  }
}

TEST(Spectral, DisconnectedBlocks) {
  Mat a(6, 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      if (i != j && i / 3 == j / 3) a(i, j) = 1.0;
  const ClusterResult r = spectral_cluster(a, 2, 10, SeededRng(0));
  EXPECT_EQ(acc(block_truth(6), r.labels), 1.0);
}

TEST(Spectral, NoisyBlocks) {
  SeededRng rng(4);
  for (int t = 0; t < 10; ++t) {
    const ClusterResult r = spectral_cluster(noisy_blocks(40, rng), 2, 10, SeededRng(t));
    EXPECT_EQ(acc(block_truth(40), r.labels), 1.0);
  }
}

TEST(Spectral, PermutationEquivariant) {
  SeededRng rng(5);
  const std::size_t n = 40;
  const Mat a = noisy_blocks(n, rng);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Mat pa(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) pa(i, j) = a(perm[i], perm[j]);
  const auto base = spectral_cluster(a, 2, 10, SeededRng(1)).labels;
  const auto moved = spectral_cluster(pa, 2, 10, SeededRng(1)).labels;
  std::vector<std::size_t> back(n);
  for (std::size_t i = 0; i < n; ++i) back[perm[i]] = moved[i];
  EXPECT_EQ(acc(base, back), 1.0);
}

TEST(Spectral, Deterministic) {
  SeededRng rng(6);
  const Mat a = noisy_blocks(30, rng);
  const ClusterResult x = spectral_cluster(a, 3, 5, SeededRng(9));
  const ClusterResult y = spectral_cluster(a, 3, 5, SeededRng(9));
  EXPECT_EQ(x.labels, y.labels);
  EXPECT_EQ(x.inertia, y.inertia);
}

TEST(Spectral, RejectsTooManyClusters) {
  EXPECT_THROW(spectral_cluster(Mat(3, 3, 1.0), 4, 1, SeededRng(0)), ConfigError);
}

TEST(KMeans, SeparatedPointsAndLabelRange) {
  SeededRng rng(7);
  Mat pts(60, 2);
  for (std::size_t i = 0; i < 60; ++i) {
    pts(i, 0) = (i % 3) * 10.0 + rng.normal() * 0.1;
    pts(i, 1) = rng.normal() * 0.1;
  }
  const KMeansResult r = kmeans(pts, 3, 5, SeededRng(0));
  std::vector<std::size_t> truth(60);
  for (std::size_t i = 0; i < 60; ++i) truth[i] = i % 3;
  EXPECT_EQ(acc(truth, r.labels), 1.0);
  for (auto l : r.labels) EXPECT_LT(l, 3u);
}
