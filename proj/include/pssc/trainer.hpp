#pragma once

// Two-stage training: plain auto-encoder pretraining, then full-batch
// fine-tuning of the joint objective with per-epoch pseudo-label refresh.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "pssc/errors.hpp"
#include "pssc/graph.hpp"
#include "pssc/loss.hpp"
#include "pssc/model.hpp"

namespace pssc {

struct TrainConfig {
  double gamma1 = 10.0;
  double gamma2 = 0.1;
  double gamma3 = 0.1;
  double lr_pretrain = 1e-3;
  double lr_finetune = 1e-4;
  std::size_t epochs_pretrain = 500;
  std::size_t epochs_finetune = 300;
  double thres = 0.8;
  double margin = 1.0;
  std::size_t warmup_epochs = 1;
  std::uint64_t seed = 0;
  bool freeze_laplacian = false;
  bool normalize_pair_losses = true;
  bool early_stop = true;

  void validate() const {
    if (!(lr_pretrain > 0.0) || !(lr_finetune > 0.0)) throw ConfigError("learning rates must be positive");
    if (!(thres > 0.0 && thres <= 1.0)) throw ConfigError("thres must lie in (0, 1]");
    if (!(gamma1 >= 0.0 && gamma2 >= 0.0 && gamma3 >= 0.0)) throw ConfigError("gammas must be non-negative");
    if (!(margin >= 0.0)) throw ConfigError("margin must be non-negative");
  }

  // Pseudo-supervision weights are held at zero until warm-up ends.
  LossConfig loss_config(bool warmed_up) const {
    LossConfig c;
    c.gamma1 = gamma1;
    c.gamma2 = warmed_up ? gamma2 : 0.0;
    c.gamma3 = warmed_up ? gamma3 : 0.0;
    c.margin = margin;
    c.freeze_laplacian = freeze_laplacian;
    c.normalize_pair_losses = normalize_pair_losses;
    return c;
  }
};

struct AdamState {
  explicit AdamState(const PsscParams& like) : m(zeros_like(like)), v(zeros_like(like)) {}

  PsscParams m;
  PsscParams v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam, coordinatewise; re-zeroes diag(C) afterwards.
inline void adam_step(AdamState& st, PsscParams& params, const Grads& grads, double lr) {
  auto p = param_blocks(params);
  const auto g = param_blocks(grads);
  auto m = param_blocks(st.m);
  auto v = param_blocks(st.v);
  detail::require(p.size() == g.size() && p.size() == m.size(), "adam_step: parameter layout mismatch");
  ++st.t;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (std::size_t b = 0; b < p.size(); ++b) {
    detail::require(p[b].size() == g[b].size(), "adam_step: block size mismatch");
    for (std::size_t i = 0; i < p[b].size(); ++i) {
      const double gi = g[b][i];
      m[b][i] = st.beta1 * m[b][i] + (1.0 - st.beta1) * gi;
      v[b][i] = st.beta2 * v[b][i] + (1.0 - st.beta2) * gi * gi;
      const double mhat = m[b][i] / bc1;
      const double vhat = v[b][i] / bc2;
      p[b][i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
  zero_diagonal(params.C);
}

struct TrainTrace {
  std::vector<LossBreakdown> losses;
  std::vector<std::size_t> confident;

  std::size_t size() const noexcept { return losses.size(); }
  void push(const LossBreakdown& l, std::size_t conf) {
    losses.push_back(l);
    confident.push_back(conf);
  }
  void append(const TrainTrace& o) {
    losses.insert(losses.end(), o.losses.begin(), o.losses.end());
    confident.insert(confident.end(), o.confident.begin(), o.confident.end());
  }
};

// epoch,recon,locality,selfexpr,graph,label,total,confident_count
inline void write_trace_csv(std::ostream& os, const TrainTrace& t) {
  os << "epoch,recon,locality,selfexpr,graph,label,total,confident_count\n";
  char buf[512];
  for (std::size_t e = 0; e < t.size(); ++e) {
    const auto& l = t.losses[e];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu\n", e, l.recon, l.locality,
                  l.selfexpr, l.graph, l.label, l.total, t.confident[e]);
    os << buf;
  }
}

// Called after each epoch's update with the epoch index and new parameters.
using EpochObserver = std::function<void(std::size_t, const PsscParams&)>;

struct TrainResult {
  PsscParams params;
  TrainTrace trace;
};

namespace detail {

inline void rethrow_with_epoch(const DivergenceError& e, const char* stage, std::size_t epoch) {
  throw DivergenceError(e.term(), std::string(stage) + " diverged at epoch " + std::to_string(epoch) + ": " +
                                      e.what());
}

// Relative total-loss change over the last `window` epochs.
inline bool plateaued(const TrainTrace& t, std::size_t window, double tol) {
  if (t.size() <= window) return false;
  const double now = t.losses.back().total;
  const double then = t.losses[t.size() - 1 - window].total;
  return std::abs(now - then) <= tol * std::max(std::abs(then), 1e-300);
}

}  // namespace detail

inline TrainResult pretrain(const Mat& x, PsscParams params, const TrainConfig& cfg,
                            const EpochObserver& observe = {}) {
  cfg.validate();
  TrainResult out{std::move(params), {}};
  AdamState adam(out.params);
  for (std::size_t epoch = 0; epoch < cfg.epochs_pretrain; ++epoch) {
    LossAndGrads lg;
    try {
      lg = recon_loss_and_grads(out.params, x);
    } catch (const DivergenceError& e) {
      detail::rethrow_with_epoch(e, "pretrain", epoch);
    }
    out.trace.push(lg.loss, 0);
    adam_step(adam, out.params, lg.grads, cfg.lr_pretrain);
    if (observe) observe(epoch, out.params);
  }
  return out;
}

inline constexpr std::size_t kPlateauWindow = 10;
inline constexpr double kPlateauTol = 1e-7;

inline TrainResult finetune(const Mat& x, PsscParams params, const TrainConfig& cfg,
                            const EpochObserver& observe = {}) {
  cfg.validate();
  detail::require(x.cols() == params.n(), "finetune: X has " + std::to_string(x.cols()) +
                                              " samples but C is " + shape_str(params.C));
  TrainResult out{std::move(params), {}};
  AdamState adam(out.params);
  for (std::size_t epoch = 0; epoch < cfg.epochs_finetune; ++epoch) {
    const bool warmed_up = epoch >= cfg.warmup_epochs;
    // Snapshot targets from the current (pre-update) parameters.
    const ForwardCache snap = forward(out.params, x, ForwardMode::full);
    const PseudoLabels labels = pseudo_labels(snap.F, cfg.thres);
    LossAndGrads lg;
    try {
      lg = total_loss_and_grads(out.params, x, cfg.loss_config(warmed_up), labels);
    } catch (const DivergenceError& e) {
      detail::rethrow_with_epoch(e, "finetune", epoch);
    }
    out.trace.push(lg.loss, labels.confident());
    adam_step(adam, out.params, lg.grads, cfg.lr_finetune);
    if (observe) observe(epoch, out.params);
    if (cfg.early_stop && warmed_up && epoch >= cfg.warmup_epochs + kPlateauWindow &&
        detail::plateaued(out.trace, kPlateauWindow, kPlateauTol))
      break;
  }
  return out;
}

}  // namespace pssc
