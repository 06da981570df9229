#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "kmq/clustering.hpp"
#include "kmq/corpus.hpp"

namespace kmq {

// Normalized per-cluster sampling weights (the w vector of the iterative
// pipeline). Always on the simplex: non-negative, sums to 1 within 1e-9.
struct ClusterWeights {
  Eigen::VectorXd weights;

  static ClusterWeights uniform(int k);
  void validate() const;  // throws DataError off the simplex
};

struct BudgetPlan {
  int total = 0;
  std::vector<int> per_cluster;
};

struct SamplerConfig {
  bool replacement = false;
  std::uint64_t seed = 42;
  // Stream index folded into every per-cluster RNG stream; the iterative
  // engine sets this to it-1 so its first iteration reproduces the static
  // sampler bit for bit.
  std::uint64_t stream_epoch = 0;
};

// Largest-remainder (Hamilton) apportionment of b over clusters. Targets are
// proportional to cluster size, or to `weights` when given. Without
// replacement, per-cluster budgets are capped at the cluster size (or at
// `capacity` when provided, e.g. the not-yet-selected count) and the
// overflow is redistributed by the same rule over uncapped clusters.
BudgetPlan allocate_budget(const Clustering& clustering, int b,
                           const std::optional<ClusterWeights>& weights = std::nullopt,
                           bool with_replacement = false,
                           const std::optional<std::vector<int>>& capacity = std::nullopt);

// Quality-weighted multinomial draw within each cluster: p(x|q) = q_x / sum q.
// Without replacement the draw is successive renormalized picks. Output ids
// are grouped by cluster, clusters in index order.
Selection sample_kmq(const Corpus& corpus, const Clustering& clustering,
                     const BudgetPlan& plan, const SamplerConfig& config);

// Uniform within-cluster draw (kM-Random baseline).
Selection sample_km_random(const Corpus& corpus, const Clustering& clustering,
                           const BudgetPlan& plan, const SamplerConfig& config);

// The b_j points closest to each cluster center (kM-Closest baseline);
// ties broken by lexicographic id.
Selection sample_km_closest(const Corpus& corpus, const Clustering& clustering,
                            const BudgetPlan& plan, const SamplerConfig& config);

// Seeded uniform draw of b ids without replacement from the whole corpus.
Selection sample_random(const Corpus& corpus, int b, const SamplerConfig& config);

// The b greedy k-center picks (k-Center baseline, read as k = budget; a
// literal k = n reading selects every point and is available as b = n).
Selection sample_kcenter(const Corpus& corpus, int b, Metric metric,
                         const SamplerConfig& config);

}  // namespace kmq
