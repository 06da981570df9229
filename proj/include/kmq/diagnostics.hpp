#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kmq/clustering.hpp"
#include "kmq/corpus.hpp"

namespace kmq {

struct SilhouetteReport {
  int k = 0;
  double mean_score = 0.0;                        // raw, in [-1, 1]
  std::map<std::string, double> per_point;        // scored points only
  int sample_size = 0;
};

struct ElbowCurve {
  std::vector<std::pair<int, double>> points;  // (k, kmeans objective)
  // k at the maximum discrete second difference; reported, never auto-applied.
  std::optional<int> knee;
};

struct QualityProfile {
  double threshold = 0.0;
  std::vector<double> per_cluster_mean_quality;
  double fraction_below = 0.0;
};

// Mean silhouette s(i) = (b(i) - a(i)) / max(a(i), b(i)) with a(i) the mean
// in-cluster distance and b(i) the best neighboring-cluster mean distance.
// Singleton clusters and 0/0 both give s(i) = 0. If `sample` is set, a
// seeded uniform subsample of points is scored, but a/b are always computed
// against the full cluster memberships; sample >= n is exact.
SilhouetteReport silhouette(const Corpus& corpus, const Clustering& clustering,
                            Metric metric, std::optional<int> sample = std::nullopt,
                            std::uint64_t seed = 42);

// One kmeans run per k (ks strictly increasing). Runs are nested: each k
// also refines the previous solution extended greedily by one-or-more
// centers, so the objective is non-increasing in k.
ElbowCurve elbow_curve(const Corpus& corpus, const std::vector<int>& ks,
                       Metric metric, const KMeansOptions& options = {});

// Per-cluster mean quality and the fraction of clusters whose mean falls
// below `threshold`. Requires quality on every instance.
QualityProfile quality_profile(const Corpus& corpus, const Clustering& clustering,
                               double threshold);

}  // namespace kmq
