#pragma once

// End-to-end clustering: pretrain, fine-tune, affinity, spectral clustering.

#include <chrono>
#include <vector>

#include "pssc/affinity.hpp"
#include "pssc/model.hpp"
#include "pssc/trainer.hpp"

namespace pssc {

// Hidden widths between the input and the latent layer; the decoder mirrors them.
struct Architecture {
  std::vector<std::size_t> hidden;
  std::size_t latent = 0;

  std::vector<std::size_t> widths(std::size_t input_dim) const {
    std::vector<std::size_t> w{input_dim};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(latent);
    return w;
  }
};

struct StageTimes {
  double pretrain = 0.0;
  double finetune = 0.0;
  double affinity = 0.0;
  double spectral = 0.0;
};

struct PipelineResult {
  PsscParams params;
  TrainTrace pretrain_trace;
  TrainTrace finetune_trace;
  ClusterResult clusters;
  StageTimes seconds;
};

// Seed streams split off the train seed / affinity seed.
inline constexpr std::uint64_t kInitStream = 0;
inline constexpr std::uint64_t kClusterStream = 1;
inline constexpr std::uint64_t kSplitStream = 2;

inline PipelineResult run_pipeline(const Mat& x, const Architecture& arch, const TrainConfig& train,
                                   const AffinityConfig& aff, const EpochObserver& observe_finetune = {},
                                   const EpochObserver& observe_pretrain = {}) {
  train.validate();
  aff.validate(x.cols());
  if (arch.latent == 0) throw ConfigError("architecture: latent width must be positive");
  using clock = std::chrono::steady_clock;
  auto secs = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };

  PipelineResult out;
  SeededRng init_rng = SeededRng(train.seed).split(kInitStream);
  const auto widths = arch.widths(x.rows());
  PsscParams params = init_params(widths, x.cols(), aff.k, init_rng);

  auto t0 = clock::now();
  TrainResult pre = pretrain(x, std::move(params), train, observe_pretrain);
  auto t1 = clock::now();
  TrainResult fin = finetune(x, std::move(pre.params), train, observe_finetune);
  auto t2 = clock::now();
  const Mat a = build_affinity(fin.params.C, aff);
  auto t3 = clock::now();
  out.clusters = spectral_cluster(a, aff.k, aff.kmeans_restarts, SeededRng(aff.seed).split(kClusterStream));
  auto t4 = clock::now();

  out.params = std::move(fin.params);
  out.pretrain_trace = std::move(pre.trace);
  out.finetune_trace = std::move(fin.trace);
  out.seconds = {secs(t0, t1), secs(t1, t2), secs(t2, t3), secs(t3, t4)};
  return out;
}

}  // namespace pssc
