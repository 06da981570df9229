#include "kmq/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "kmq/rng.hpp"

namespace kmq {

int planted_label(const SyntheticSpec& spec, Eigen::Index i) {
  return static_cast<int>(i % spec.planted_clusters);
}

Corpus generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 1 || spec.dimension < 1 || spec.planted_clusters < 1)
    throw ConfigError("synthetic spec needs positive n, dimension, clusters");

  Rng center_rng = Rng::stream(spec.seed, 1);
  Eigen::MatrixXd planted(spec.dimension, spec.planted_clusters);
  for (int j = 0; j < spec.planted_clusters; ++j)
    for (int d = 0; d < spec.dimension; ++d)
      planted(d, j) = spec.center_scale * center_rng.next_gaussian();

  const int digits = static_cast<int>(std::to_string(spec.n - 1).size());
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(spec.n));
  Eigen::MatrixXd points(spec.dimension, spec.n);
  Eigen::VectorXd quality(spec.n);
  Rng point_rng = Rng::stream(spec.seed, 2);
  Rng quality_rng = Rng::stream(spec.seed, 3);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const int label = planted_label(spec, i);
    for (int d = 0; d < spec.dimension; ++d)
      points(d, i) = planted(d, label) + spec.point_sigma * point_rng.next_gaussian();
    double mean_q = 0.5;
    if (!spec.cluster_quality.empty())
      mean_q = spec.cluster_quality[static_cast<std::size_t>(label) %
                                    spec.cluster_quality.size()];
    double q = mean_q + spec.quality_sigma * quality_rng.next_gaussian();
    quality[i] = std::clamp(q, 0.0, 1.0);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*lld", digits, static_cast<long long>(i));
    ids.emplace_back(buf);
  }

  if (spec.low_quality_fraction > 0.0) {
    Rng pocket_rng = Rng::stream(spec.seed, 4);
    const auto m = static_cast<std::size_t>(
        std::llround(spec.low_quality_fraction * static_cast<double>(spec.n)));
    for (std::size_t i : pocket_rng.sample_indices(static_cast<std::size_t>(spec.n), m)) {
      double q = spec.low_quality_level +
                 spec.quality_sigma * pocket_rng.next_gaussian();
      quality[static_cast<Eigen::Index>(i)] = std::clamp(q, 0.0, 1.0);
    }
  }

  std::vector<std::optional<std::string>> text(static_cast<std::size_t>(spec.n));
  return Corpus(spec.dimension, std::move(ids), std::move(points), std::move(quality),
                std::move(text), {{"source", "synthetic"}});
}

}  // namespace kmq
