#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kmq/corpus.hpp"

namespace kmq {

// Synthetic corpus: a planted Gaussian mixture with per-cluster quality
// levels, for offline experiments and the test suites.
struct SyntheticSpec {
  int n = 1000;
  int dimension = 8;
  int planted_clusters = 4;
  double center_scale = 10.0;  // planted centers ~ N(0, center_scale^2)
  double point_sigma = 0.5;    // spread around the planted center
  // Mean quality per planted cluster (cycled if shorter than
  // planted_clusters); empty means uniform 0.5.
  std::vector<double> cluster_quality;
  double quality_sigma = 0.05;
  // Fraction of points forced to low quality, drawn uniformly across the
  // corpus (the "low-quality pocket").
  double low_quality_fraction = 0.0;
  double low_quality_level = 0.1;
  std::uint64_t seed = 42;
};

// Deterministic for a fixed spec. Point i's planted cluster is i mod
// planted_clusters; ids are zero-padded decimal so lexicographic id order
// equals corpus order.
Corpus generate_synthetic(const SyntheticSpec& spec);

// The planted label of instance i (i mod planted_clusters).
int planted_label(const SyntheticSpec& spec, Eigen::Index i);

}  // namespace kmq
