#include <gtest/gtest.h>

#include <sstream>

#include "pssc/dataset.hpp"
#include "pssc/pipeline.hpp"
#include "pssc/trainer.hpp"
#include "support.hpp"

using namespace pssc;

namespace {

struct Problem {
  Mat X;
  PsscParams params;
};

Problem small_setup(std::uint64_t seed, std::size_t n = 20) {
  SeededRng rng(seed);
  Problem s;
  s.X = matmul(random_normal(6, 2, rng), random_normal(2, n, rng));
  const std::vector<std::size_t> widths{6, 4, 3};
  s.params = init_params(widths, n, 2, rng);
  return s;
}

TrainConfig short_config() {
  TrainConfig c;
  c.epochs_pretrain = 30;
  c.epochs_finetune = 30;
  c.thres = 0.5;
  return c;
}

}  // namespace

namespace {

// Minimizes w² from w = 1 with w stored in a classifier bias; returns |w|
// after each step.
std::vector<double> adam_on_square(double lr, int steps) {
  PsscParams p;
  p.C = Mat(2, 2);
  p.classifier.b = {1.0};
  AdamState st(p);
  std::vector<double> path;
  for (int i = 0; i < steps; ++i) {
    PsscParams g = zeros_like(p);
    g.classifier.b[0] = 2.0 * p.classifier.b[0];
    adam_step(st, p, g, lr);
    path.push_back(std::abs(p.classifier.b[0]));
  }
  return path;
}

}  // namespace

TEST(Adam, DescendsQuadratic) {
  // At lr = 0.1 the iterate reaches the origin in about ten steps, after
  // which momentum carries it past; the approach itself is monotone.
  double prev = 1.0;
  for (double w : adam_on_square(0.1, 11)) {
    ASSERT_LT(w, prev);
    prev = w;
  }
  EXPECT_LT(prev, 0.01);
  prev = 1.0;
  for (double w : adam_on_square(0.01, 20)) {
    ASSERT_LT(w, prev);
    prev = w;
  }
}

TEST(Adam, FirstStepIsLearningRateSized) {
  for (double scale : {1e-3, 1.0, 1e3}) {
    PsscParams p;
    p.C = Mat(2, 2);
    p.classifier.b = {0.5, -0.5};
    AdamState st(p);
    PsscParams g = zeros_like(p);
    g.classifier.b = {3.0 * scale, -0.2 * scale};
    adam_step(st, p, g, 0.01);
    EXPECT_NEAR(p.classifier.b[0], 0.5 - 0.01, 1e-6);
    EXPECT_NEAR(p.classifier.b[1], -0.5 + 0.01, 1e-6);
  }
}

TEST(Adam, FirstStepScaleInvariant) {
  // m̂ = g, v̂ = g² after one step, so the update is lr·g/(|g| + eps).
  const double lr = 0.01, g1 = 0.37;
  for (double g : {g1, 1000 * g1}) {
    PsscParams p;
    p.C = Mat(2, 2);
    p.classifier.b = {0.0};
    AdamState st(p);
    PsscParams gr = zeros_like(p);
    gr.classifier.b = {g};
    adam_step(st, p, gr, lr);
    EXPECT_NEAR(p.classifier.b[0], -lr * g / (g + 1e-8), 1e-15);
  }
}

TEST(Adam, KeepsDiagonalZero) {
  PsscParams p;
  p.C = Mat(3, 3);
  AdamState st(p);
  PsscParams g = zeros_like(p);
  g.C.fill(1.0);
  adam_step(st, p, g, 0.1);
  EXPECT_EQ(max_abs_diagonal(p.C), 0.0);
  EXPECT_NE(p.C(0, 1), 0.0);
}

TEST(Pretrain, LinearAutoencoderReachesExactReconstruction) {
  SeededRng rng(1);
  const Mat x = matmul(random_normal(6, 2, rng), random_normal(2, 20, rng));
  const std::vector<std::size_t> widths{6, 6};
  TrainConfig c;
  c.lr_pretrain = 0.01;
  c.epochs_pretrain = 200;
  const TrainResult r = pretrain(x, init_params(widths, 20, 2, rng), c);
  EXPECT_LT(loss_recon(x, forward(r.params, x, ForwardMode::pretrain).Xhat), 1e-6);
}

TEST(Pretrain, LeavesCoefficientsAndClassifierUntouched) {
  const Problem s = small_setup(2);
  const TrainResult r = pretrain(s.X, s.params, short_config());
  EXPECT_EQ(r.params.C, s.params.C);
  EXPECT_EQ(r.params.classifier, s.params.classifier);
  EXPECT_NE(r.params.encoder, s.params.encoder);
  EXPECT_EQ(r.trace.size(), 30u);
}

TEST(Training, Deterministic) {
  const Problem s = small_setup(3);
  const TrainConfig c = short_config();
  const TrainResult a = finetune(s.X, pretrain(s.X, s.params, c).params, c);
  const TrainResult b = finetune(s.X, pretrain(s.X, s.params, c).params, c);
  EXPECT_EQ(a.params, b.params);
  std::ostringstream ta, tb;
  write_trace_csv(ta, a.trace);
  write_trace_csv(tb, b.trace);
  EXPECT_EQ(ta.str(), tb.str());
}

TEST(Finetune, ConstraintsHoldEveryEpoch) {
  const Problem s = small_setup(4);
  std::size_t seen = 0;
  finetune(s.X, s.params, short_config(), [&](std::size_t, const PsscParams& p) {
    ++seen;
    ASSERT_EQ(max_abs_diagonal(p.C), 0.0);
    const Mat f = forward(p, s.X, ForwardMode::full).F;
    for (std::size_t i = 0; i < f.rows(); ++i) {
      double sum = 0.0;
      for (double v : f.row(i)) sum += v;
      ASSERT_NEAR(sum, 1.0, 1e-12);
    }
  });
  EXPECT_GT(seen, 0u);
}

TEST(Finetune, WarmupSilencesClassifier) {
  const Problem s = small_setup(5);
  TrainConfig c = short_config();
  c.gamma2 = c.gamma3 = 5.0;
  const PseudoLabels labels = pseudo_labels(forward(s.params, s.X, ForwardMode::full).F, 0.0);
  const Grads g = total_loss_and_grads(s.params, s.X, c.loss_config(false), labels).grads;
  for (double v : g.classifier.W.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.classifier.b) EXPECT_EQ(v, 0.0);
  const Grads h = total_loss_and_grads(s.params, s.X, c.loss_config(true), labels).grads;
  EXPECT_GT(max_abs(h.classifier.W), 0.0);
}

TEST(Finetune, StopsEarlyOnPlateau) {
  const Problem s = small_setup(6);
  TrainConfig c = short_config();
  c.epochs_finetune = 500;
  c.lr_finetune = 1e-12;  // parameters effectively frozen
  const TrainResult r = finetune(s.X, s.params, c);
  EXPECT_LT(r.trace.size(), 500u);
  c.early_stop = false;
  c.epochs_finetune = 40;
  EXPECT_EQ(finetune(s.X, s.params, c).trace.size(), 40u);
}

TEST(Finetune, SmoothedLossDecreasesOnSubspaceData) {
  const Dataset ds = make_subspace_data(SynthSpec{});
  const TrainConfig c;
  const Architecture arch{{}, 16};
  SeededRng rng = SeededRng(c.seed).split(kInitStream);
  const auto widths = arch.widths(ds.dim());
  const PsscParams p0 = init_params(widths, ds.n(), 3, rng);
  const TrainResult r = finetune(ds.X, pretrain(ds.X, p0, c).params, c);
  const auto& L = r.trace.losses;
  ASSERT_GE(L.size(), 50u);
  std::vector<double> avg;
  for (std::size_t e = 9; e < L.size(); ++e) {
    double s = 0.0;
    for (std::size_t k = e - 9; k <= e; ++k) s += L[k].total;
    avg.push_back(s / 10.0);
  }
  for (std::size_t i = L.size() / 5; i + 1 < avg.size(); ++i) EXPECT_LE(avg[i + 1], avg[i]) << "window " << i;
}

TEST(Config, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.thres = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lr_finetune = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.gamma2 = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Trace, CsvLayout) {
  TrainTrace t;
  t.push(LossBreakdown{1, 2, 3, 4, 5, 15}, 7);
  std::ostringstream os;
  write_trace_csv(os, t);
  EXPECT_EQ(os.str(), "epoch,recon,locality,selfexpr,graph,label,total,confident_count\n0,1,2,3,4,5,15,7\n");
}
