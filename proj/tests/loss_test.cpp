#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "pssc/loss.hpp"
#include "support.hpp"

using namespace pssc;
using namespace pssc::testing;

namespace {

PseudoLabels all_confident(std::vector<std::size_t> y) {
  PseudoLabels l;
  l.y = std::move(y);
  l.p.assign(l.y.size(), 1.0);
  l.V.assign(l.y.size(), 1);
  return l;
}

}  // namespace

TEST(Locality, DegenerateGraphs) {
  SeededRng rng(1);
  const Mat x = random_normal(3, 5, rng), xhat = random_normal(3, 5, rng);
  EXPECT_EQ(loss_locality(x, x, Mat(5, 5)), 0.0);
  EXPECT_DOUBLE_EQ(loss_locality(x, xhat, Mat(5, 5)), frob_norm_sq(x - xhat));
}

TEST(Locality, UnitDegreeGraphMatchesQuadform) {
  // A perfect matching has unit degrees, so L_n = I − S and the column-form
  // loss equals the pairwise sum Σ S_ij ‖x_i − x̂_j‖² routed through graph_ops.
  SeededRng rng(2);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 6;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Mat s(n, n);
    for (std::size_t i = 0; i < n; i += 2) s(perm[i], perm[i + 1]) = s(perm[i + 1], perm[i]) = 1.0;
    const SimilarityGraph g = normalized_laplacian(s, 0.0);
    const Mat x = random_normal(4, n, rng), xhat = random_normal(4, n, rng);
    // Σ_ij S_ij‖x_i − x̂_j‖² = Σ_i d_i‖x_i‖² + Σ_j d_j‖x̂_j‖² − 2⟨S, XᵀX̂⟩, and with
    // unit degrees ‖X − X̂‖² + 2⟨L_n, XᵀX̂⟩ = ‖X‖² + ‖X̂‖² − 2⟨S, XᵀX̂⟩.
    EXPECT_NEAR(loss_locality(x, xhat, g.L_n), weighted_recon_quadform(x, xhat, s), 1e-10);
  }
}

TEST(SelfExpr, Examples) {
  SeededRng rng(3);
  const Mat z = random_normal(3, 4, rng);
  EXPECT_DOUBLE_EQ(loss_selfexpr(z, Mat(4, 4)), frob_norm_sq(z));

  const Mat twins{{0.3, 0.3}, {-1.2, -1.2}, {2.0, 2.0}};
  EXPECT_EQ(loss_selfexpr(twins, Mat{{0, 1}, {1, 0}}), 0.0);
}

TEST(SelfExpr, ColumnwiseOracle) {
  SeededRng rng(4);
  for (int t = 0; t < 20; ++t) {
    const Mat z = random_normal(3, 6, rng);
    Mat c = random_normal(6, 6, rng);
    zero_diagonal(c);
    double ref = 0.0;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t r = 0; r < 3; ++r) {
        double v = z(r, i);
        for (std::size_t j = 0; j < 6; ++j) v -= c(j, i) * z(r, j);
        ref += v * v;
      }
    EXPECT_NEAR(loss_selfexpr(z, c), ref, 1e-10 * ref);
  }
}

TEST(SelfExpr, RejectsNonzeroDiagonal) {
  Mat c(2, 2);
  c(0, 0) = 1e-30;
  EXPECT_THROW(loss_selfexpr(Mat(1, 2), c), ContractViolation);
}

TEST(Graph, Examples) {
  const Mat same{{0.2, 0.8}, {0.2, 0.8}, {0.2, 0.8}};
  Mat ones(3, 3, 1.0);
  zero_diagonal(ones);
  EXPECT_EQ(loss_graph(same, ones, 1.0), 0.0);

  const Mat apart{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};  // pairwise distance √2 > margin 1
  EXPECT_EQ(loss_graph(apart, Mat(3, 3), 1.0), 0.0);
}

TEST(Graph, HandInstance) {
  const Mat f{{0.9, 0.1}, {0.6, 0.4}, {0.2, 0.8}};
  const Mat sbar{{0, 1, 0.25}, {1, 0, 0.5}, {0.25, 0.5, 0}};
  // d01 = 0.3√2, d02 = 0.7√2, d12 = 0.4√2; margin 1.
  const double d01 = 0.18, d02 = 0.98, d12 = 0.32;  // squared
  auto hinge2 = [](double sq) { return std::pow(std::max(0.0, 1.0 - std::sqrt(sq)), 2); };
  const double sum = 1.0 * d01 + 0.0 * hinge2(d01) + 0.25 * d02 + 0.75 * hinge2(d02) + 0.5 * d12 +
                     0.5 * hinge2(d12);
  EXPECT_NEAR(loss_graph(f, sbar, 1.0, false), sum, 1e-14);
  EXPECT_NEAR(loss_graph(f, sbar, 1.0, true), sum / 3.0, 1e-14);
}

TEST(Graph, RejectsOutOfRangeTargets) {
  EXPECT_THROW(loss_graph(Mat(2, 2), Mat{{0, 1.5}, {1.5, 0}}, 1.0), ContractViolation);
}

TEST(Label, Examples) {
  EXPECT_EQ(loss_label(Mat{{0, 1}, {1, 0}}, all_confident({1, 0})), 0.0);

  PseudoLabels none = all_confident({0, 1});
  none.V = {0, 0};
  EXPECT_EQ(loss_label(Mat{{0.3, 0.7}, {0.6, 0.4}}, none), 0.0);

  EXPECT_NEAR(loss_label(Mat{{0.5, 0.5}}, all_confident({0})), std::log(2.0), 1e-15);
}

TEST(Label, ClampsZeroProbability) {
  EXPECT_NEAR(loss_label(Mat{{0.0, 1.0}}, all_confident({0})), -std::log(kLogClamp), 1e-9);
}

TEST(Total, ComponentsNonNegative) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const GradInstance g = make_grad_instance(s);
    const LossBreakdown l = total_loss_and_grads(g.params, g.X, LossConfig{}, g.labels).loss;
    EXPECT_GE(l.recon, 0.0);
    EXPECT_GE(l.recon + l.locality, -1e-12);
    EXPECT_GE(l.selfexpr, 0.0);
    EXPECT_GE(l.graph, 0.0);
    EXPECT_GE(l.label, 0.0);
  }
}

TEST(Total, ReducesToPlainAutoencoder) {
  // Encoder output pinned at zero and C = 0: both paths feed the decoder a
  // zero latent, so the decoder sees the plain reconstruction objective.
  GradInstance g = make_grad_instance(21);
  g.params.encoder.back().W.fill(0.0);
  std::fill(g.params.encoder.back().b.begin(), g.params.encoder.back().b.end(), 0.0);
  g.params.C.fill(0.0);
  const LossConfig cfg{.gamma1 = 0, .gamma2 = 0, .gamma3 = 0};
  const SimilarityGraph empty = normalized_laplacian(Mat(12, 12));
  const LossAndGrads full = total_loss_and_grads(g.params, g.X, cfg, g.labels, &empty);
  const LossAndGrads ae = recon_loss_and_grads(g.params, g.X);
  EXPECT_EQ(full.loss.total, ae.loss.total);
  EXPECT_EQ(full.grads.decoder, ae.grads.decoder);
  for (double v : full.grads.classifier.W.data()) EXPECT_EQ(v, 0.0);
}

TEST(Total, GammaOneIsLinearInSelfExprGradient) {
  const GradInstance g = make_grad_instance(22);
  LossConfig cfg;
  cfg.gamma2 = cfg.gamma3 = 0.0;
  cfg.gamma1 = 0.0;
  const Mat base = total_loss_and_grads(g.params, g.X, cfg, g.labels).grads.C;
  cfg.gamma1 = 1.5;
  const Mat one = total_loss_and_grads(g.params, g.X, cfg, g.labels).grads.C - base;
  cfg.gamma1 = 3.0;
  const Mat two = total_loss_and_grads(g.params, g.X, cfg, g.labels).grads.C - base;
  EXPECT_LT(max_abs_diff(two, one * 2.0), 1e-10 * std::max(1.0, max_abs(two)));
  EXPECT_GT(max_abs(one), 0.0);
}

TEST(Total, PermutationInvariant) {
  const GradInstance g = make_grad_instance(23);
  const std::size_t n = g.X.cols();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  SeededRng rng(5);
  rng.shuffle(perm);

  PsscParams p = g.params;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p.C(i, j) = g.params.C(perm[i], perm[j]);
  const Mat x = select_cols(g.X, perm);
  PseudoLabels lab = g.labels;
  for (std::size_t i = 0; i < n; ++i) {
    lab.y[i] = g.labels.y[perm[i]];
    lab.p[i] = g.labels.p[perm[i]];
    lab.V[i] = g.labels.V[perm[i]];
  }
  const LossConfig cfg{.gamma1 = 0.7, .gamma2 = 0.5, .gamma3 = 0.3};
  const double a = total_loss_and_grads(g.params, g.X, cfg, g.labels).loss.total;
  const double b = total_loss_and_grads(p, x, cfg, lab).loss.total;
  EXPECT_NEAR(a, b, 1e-10 * std::abs(a));
}

TEST(Total, DiagonalGradientIsZero) {
  const GradInstance g = make_grad_instance(24);
  EXPECT_EQ(max_abs_diagonal(total_loss_and_grads(g.params, g.X, LossConfig{}, g.labels).grads.C), 0.0);
}

TEST(Total, ReportsDivergence) {
  GradInstance g = make_grad_instance(25);
  g.X(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(total_loss_and_grads(g.params, g.X, LossConfig{}, g.labels), DivergenceError);
}

// Finite-difference checks: one configuration per term, plus the full sum.
struct FdCase {
  const char* name;
  LossConfig cfg;
};

class FiniteDifference : public ::testing::TestWithParam<FdCase> {};

TEST_P(FiniteDifference, MatchesAnalyticGradient) {
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    const GradInstance g = make_grad_instance(seed);
    const FdReport r = finite_difference_check(g, GetParam().cfg);
    EXPECT_EQ(r.failed, 0u) << "seed " << seed << " worst " << r.worst_excess;
    EXPECT_GT(r.checked, 200u);
  }
}

INSTANTIATE_TEST_SUITE_P(
    Terms, FiniteDifference,
    ::testing::Values(FdCase{"recon_locality", {.gamma1 = 0, .gamma2 = 0, .gamma3 = 0}},
                      FdCase{"selfexpr", {.gamma1 = 0.8, .gamma2 = 0, .gamma3 = 0}},
                      FdCase{"graph", {.gamma1 = 0, .gamma2 = 0.6, .gamma3 = 0}},
                      FdCase{"label", {.gamma1 = 0, .gamma2 = 0, .gamma3 = 0.4}},
                      FdCase{"total", {.gamma1 = 0.7, .gamma2 = 0.5, .gamma3 = 0.3}},
                      FdCase{"total_raw_sums", {.gamma1 = 0.7, .gamma2 = 0.5, .gamma3 = 0.3,
                                                .normalize_pair_losses = false}}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(FrozenGraph, StopsGradientIntoCoefficients) {
  const GradInstance g = make_grad_instance(30);
  LossConfig cfg{.gamma1 = 0.0, .gamma2 = 0.5, .gamma3 = 0.0};
  cfg.freeze_laplacian = true;
  const LossAndGrads frozen = total_loss_and_grads(g.params, g.X, cfg, g.labels);
  cfg.freeze_laplacian = false;
  const LossAndGrads live = total_loss_and_grads(g.params, g.X, cfg, g.labels);
  EXPECT_EQ(frozen.loss.total, live.loss.total);
  EXPECT_EQ(frozen.grads.classifier, live.grads.classifier);
  EXPECT_NE(frozen.grads.C, live.grads.C);
}
