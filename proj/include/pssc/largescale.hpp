#pragma once

// Out-of-sample path: train on a random subsample, cluster it, then label the
// remaining samples by nearest core neighbor in latent space.

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "pssc/affinity.hpp"
#include "pssc/model.hpp"
#include "pssc/pipeline.hpp"

namespace pssc {

inline constexpr std::size_t kDefaultCoreSize = 5000;

struct SplitPlan {
  std::vector<std::size_t> core;  // ascending
  std::vector<std::size_t> rest;  // ascending
  std::uint64_t seed = 0;
};

inline SplitPlan make_split(std::size_t n, std::size_t m, const SeededRng& rng) {
  detail::require(m <= n, "make_split: core size exceeds n");
  SeededRng r = rng;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first m slots become a uniform sample.
  for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + r.below(n - i)]);
  SplitPlan plan;
  plan.seed = rng.seed();
  plan.core.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
  plan.rest.assign(idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end());
  std::sort(plan.core.begin(), plan.core.end());
  std::sort(plan.rest.begin(), plan.rest.end());
  return plan;
}

// Majority vote over the `neighbors` nearest core columns (Euclidean).
// Distance ties go to the lower core index, vote ties to the lower label.
inline std::vector<std::size_t> knn_predict(const Mat& z_core, std::span<const std::size_t> y_core,
                                            const Mat& z_query, std::size_t neighbors = 1) {
  detail::require(z_core.cols() > 0, "knn_predict: empty core set");
  detail::require(y_core.size() == z_core.cols(), "knn_predict: label count does not match core size");
  detail::require(z_core.rows() == z_query.rows(), "knn_predict: core and query dimensions differ");
  detail::require(neighbors >= 1, "knn_predict: neighbors must be at least 1");
  const std::size_t nc = z_core.cols();
  const std::size_t kk = std::min(neighbors, nc);
  const Mat core_t = transpose(z_core);
  const Mat query_t = transpose(z_query);

  std::vector<std::size_t> out(z_query.cols());
  std::vector<std::pair<double, std::size_t>> dist(nc);
  for (std::size_t q = 0; q < query_t.rows(); ++q) {
    for (std::size_t c = 0; c < nc; ++c) dist[c] = {detail::sq_dist(query_t.row(q), core_t.row(c)), c};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    std::map<std::size_t, std::size_t> votes;
    for (std::size_t t = 0; t < kk; ++t) ++votes[y_core[dist[t].second]];
    std::size_t best = votes.begin()->first, best_count = 0;
    for (const auto& [label, count] : votes)
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    out[q] = best;
  }
  return out;
}

struct LargeScaleResult {
  ClusterResult clusters;  // labels over all n; A covers the core only
  SplitPlan plan;
  PipelineResult core_run;
};

inline LargeScaleResult run_largescale(const Mat& x, std::size_t m, const Architecture& arch,
                                       const TrainConfig& train, const AffinityConfig& aff,
                                       const SeededRng& rng, std::size_t neighbors = 1) {
  const std::size_t n = x.cols();
  if (m < aff.k) throw ConfigError("largescale: core size m must be at least k");
  if (m > n) throw ConfigError("largescale: core size m exceeds n");

  LargeScaleResult out;
  out.plan = make_split(n, m, rng);
  const Mat xc = select_cols(x, out.plan.core);
  out.core_run = run_pipeline(xc, arch, train, aff);

  out.clusters.labels.assign(n, 0);
  for (std::size_t i = 0; i < m; ++i) out.clusters.labels[out.plan.core[i]] = out.core_run.clusters.labels[i];
  if (!out.plan.rest.empty()) {
    const Mat z_core = encode(out.core_run.params, xc);
    const Mat z_rest = encode(out.core_run.params, select_cols(x, out.plan.rest));
    const auto y_rest = knn_predict(z_core, out.core_run.clusters.labels, z_rest, neighbors);
    for (std::size_t i = 0; i < y_rest.size(); ++i) out.clusters.labels[out.plan.rest[i]] = y_rest[i];
  }
  out.clusters.A = out.core_run.clusters.A;
  out.clusters.inertia = out.core_run.clusters.inertia;
  return out;
}

}  // namespace pssc
