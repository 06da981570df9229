#include <doctest.h>

#include <cmath>

#include "kmq/diagnostics.hpp"
#include "kmq/simulate.hpp"
#include "test_support.hpp"

using namespace kmq;
using kmqtest::make_corpus;

namespace {

// Independent O(n^2) silhouette reference: plain pairwise distances, no
// Gram-matrix shortcuts.
double reference_silhouette(const Corpus& corpus, const Clustering& cl, Metric metric) {
  const Eigen::MatrixXd pts = corpus.working_points(metric);
  const Eigen::Index n = pts.cols();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int own = cl.assignment[static_cast<std::size_t>(i)];
    if (cl.cluster_size(own) == 1) continue;  // s = 0
    std::vector<double> sum(static_cast<std::size_t>(cl.k), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      sum[static_cast<std::size_t>(cl.assignment[static_cast<std::size_t>(j)])] +=
          (pts.col(i) - pts.col(j)).norm();
    }
    const double a = sum[static_cast<std::size_t>(own)] /
                     static_cast<double>(cl.cluster_size(own) - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int j = 0; j < cl.k; ++j)
      if (j != own)
        b = std::min(b, sum[static_cast<std::size_t>(j)] /
                            static_cast<double>(cl.cluster_size(j)));
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

Clustering forced_split(const Corpus& corpus, const std::vector<int>& labels, int k,
                        Metric metric) {
  Clustering cl;
  cl.k = k;
  cl.metric = metric;
  cl.assignment = labels;
  cl.members.assign(static_cast<std::size_t>(k), {});
  for (std::size_t i = 0; i < labels.size(); ++i)
    cl.members[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
  cl.centers = Eigen::MatrixXd::Zero(corpus.dimension(), k);
  return cl;
}

}  // namespace

TEST_CASE("silhouette: two tight far-apart pairs score near 1") {
  Corpus c = make_corpus({{0, 0}, {0, 1}, {100, 0}, {100, 1}});
  Clustering cl = kmeans(c, 2, Metric::kEuclidean, {.restarts = 4});
  auto report = silhouette(c, cl, Metric::kEuclidean);
  CHECK(report.mean_score > 0.9);
  // hand computation: a = 1, b = mean(sqrt(100^2), sqrt(100^2+1)) ~ 100.0025
  const double b = (100.0 + std::sqrt(100.0 * 100.0 + 1.0)) / 2.0;
  CHECK(report.per_point.at("a") == doctest::Approx((b - 1.0) / b).epsilon(1e-9));
}

TEST_CASE("silhouette: identical points under a forced split give all zeros") {
  Corpus c = make_corpus({{1, 1}, {1, 1}, {1, 1}, {1, 1}});
  Clustering cl = forced_split(c, {0, 0, 1, 1}, 2, Metric::kEuclidean);
  auto report = silhouette(c, cl, Metric::kEuclidean);
  CHECK(report.mean_score == 0.0);
  for (const auto& [id, s] : report.per_point) CHECK(s == 0.0);
}

TEST_CASE("silhouette matches the quadratic reference on random instances") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticSpec spec;
    spec.n = 25;
    spec.dimension = 3;
    spec.planted_clusters = 3;
    spec.point_sigma = 3.0;
    spec.seed = seed;
    Corpus c = generate_synthetic(spec);
    Clustering cl = kmeans(c, 3, Metric::kEuclidean, {.seed = seed});
    auto report = silhouette(c, cl, Metric::kEuclidean);
    CHECK(report.mean_score ==
          doctest::Approx(reference_silhouette(c, cl, Metric::kEuclidean)).epsilon(1e-9));
  }
}

TEST_CASE("silhouette with sample = n is bit-identical to exact") {
  SyntheticSpec spec;
  spec.n = 40;
  spec.dimension = 4;
  Corpus c = generate_synthetic(spec);
  Clustering cl = kmeans(c, 4, Metric::kEuclideanOnNormalized);
  auto exact = silhouette(c, cl, Metric::kEuclideanOnNormalized);
  auto sampled = silhouette(c, cl, Metric::kEuclideanOnNormalized, 40);
  CHECK(exact.mean_score == sampled.mean_score);
  CHECK(exact.per_point == sampled.per_point);
}

TEST_CASE("sampled silhouette scores the requested number of points") {
  SyntheticSpec spec;
  spec.n = 100;
  spec.dimension = 3;
  Corpus c = generate_synthetic(spec);
  Clustering cl = kmeans(c, 4, Metric::kEuclidean);
  auto report = silhouette(c, cl, Metric::kEuclidean, 30, 7);
  CHECK(report.sample_size == 30);
  CHECK(report.per_point.size() == 30);
  auto again = silhouette(c, cl, Metric::kEuclidean, 30, 7);
  CHECK(report.per_point == again.per_point);
}

TEST_CASE("silhouette rejects k < 2") {
  Corpus c = make_corpus({{0, 0}, {1, 1}});
  Clustering cl = kmeans(c, 1, Metric::kEuclidean);
  CHECK_THROWS_AS(silhouette(c, cl, Metric::kEuclidean), ConfigError);
}

TEST_CASE("silhouette grows monotonically with separation") {
  double last = -1.0;
  for (double gap : {2.0, 8.0, 64.0}) {
    Corpus c = make_corpus({{0, 0}, {0, 1}, {gap, 0}, {gap, 1}});
    Clustering cl = forced_split(c, {0, 0, 1, 1}, 2, Metric::kEuclidean);
    auto report = silhouette(c, cl, Metric::kEuclidean);
    CHECK(report.mean_score > last);
    last = report.mean_score;
  }
  CHECK(last > 0.97);
}

TEST_CASE("elbow: single k equals n times variance") {
  Corpus c = make_corpus({{1, 0}, {3, 0}, {5, 0}});
  auto curve = elbow_curve(c, {1}, Metric::kEuclidean);
  REQUIRE(curve.points.size() == 1);
  CHECK(curve.points[0].second == doctest::Approx(8.0));  // (2^2 + 0 + 2^2)
}

TEST_CASE("elbow: knee lands on the planted cluster count") {
  SyntheticSpec spec;
  spec.n = 400;
  spec.dimension = 4;
  spec.planted_clusters = 4;
  spec.center_scale = 20.0;
  spec.point_sigma = 0.5;
  Corpus c = generate_synthetic(spec);
  auto curve = elbow_curve(c, {1, 2, 3, 4, 5, 6, 7, 8}, Metric::kEuclidean,
                           {.restarts = 3});
  REQUIRE(curve.knee.has_value());
  CHECK(*curve.knee == 4);
  // objective non-increasing in k
  for (std::size_t i = 1; i < curve.points.size(); ++i)
    CHECK(curve.points[i].second <=
          curve.points[i - 1].second * (1.0 + 1e-6));
}

TEST_CASE("elbow rejects unsorted ks") {
  Corpus c = make_corpus({{0, 0}, {1, 1}, {2, 2}});
  CHECK_THROWS_AS(elbow_curve(c, {2, 2}, Metric::kEuclidean), ConfigError);
  CHECK_THROWS_AS(elbow_curve(c, {3, 1}, Metric::kEuclidean), ConfigError);
  CHECK_THROWS_AS(elbow_curve(c, {}, Metric::kEuclidean), ConfigError);
}

TEST_CASE("quality profile: all high quality") {
  Corpus c = make_corpus({{0, 0}, {5, 5}}, {1.0, 1.0});
  Clustering cl = kmeans(c, 2, Metric::kEuclidean);
  auto profile = quality_profile(c, cl, 0.3);
  CHECK(profile.fraction_below == 0.0);
}

TEST_CASE("quality profile: one of two clusters below threshold") {
  Corpus c = make_corpus({{0, 0}, {0, 1}, {9, 0}, {9, 1}}, {0.2, 0.2, 0.8, 0.8});
  Clustering cl = forced_split(c, {0, 0, 1, 1}, 2, Metric::kEuclidean);
  auto profile = quality_profile(c, cl, 0.3);
  CHECK(profile.fraction_below == 0.5);
  CHECK(profile.per_cluster_mean_quality[0] == doctest::Approx(0.2));
  CHECK(profile.per_cluster_mean_quality[1] == doctest::Approx(0.8));
}

TEST_CASE("quality profile reports missing-quality ids") {
  Corpus c = make_corpus({{0, 0}, {1, 1}}, {0.5});
  Clustering cl = forced_split(c, {0, 1}, 2, Metric::kEuclidean);
  CHECK_THROWS_WITH_AS(quality_profile(c, cl, 0.3), doctest::Contains("b"), DataError);
}

TEST_CASE("quality profile is invariant to cluster relabeling") {
  Corpus c = make_corpus({{0, 0}, {0, 1}, {9, 0}, {9, 1}}, {0.2, 0.2, 0.8, 0.8});
  auto p1 = quality_profile(c, forced_split(c, {0, 0, 1, 1}, 2, Metric::kEuclidean), 0.3);
  auto p2 = quality_profile(c, forced_split(c, {1, 1, 0, 0}, 2, Metric::kEuclidean), 0.3);
  CHECK(p1.fraction_below == p2.fraction_below);
}

TEST_CASE("fraction below threshold is non-decreasing in k on pocketed data") {
  SyntheticSpec spec;
  spec.n = 600;
  spec.dimension = 4;
  spec.planted_clusters = 8;
  spec.cluster_quality = {0.7};
  spec.low_quality_fraction = 0.10;
  spec.low_quality_level = 0.1;
  Corpus c = generate_synthetic(spec);
  double last = -1.0;
  for (int k : {2, 8, 32}) {
    Clustering cl = kmeans(c, k, Metric::kEuclidean);
    auto profile = quality_profile(c, cl, 0.3);
    CHECK(profile.fraction_below >= last);
    last = profile.fraction_below;
  }
}
