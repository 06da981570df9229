#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "kmq/clustering.hpp"
#include "kmq/rng.hpp"
#include "kmq/simulate.hpp"
#include "test_support.hpp"

using namespace kmq;
using kmqtest::make_corpus;

namespace {

// Independent O(n*k) nearest-center scan used as the assignment oracle.
std::vector<int> oracle_assign(const Eigen::MatrixXd& pts, const Eigen::MatrixXd& centers) {
  std::vector<int> labels(static_cast<std::size_t>(pts.cols()));
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    int best = 0;
    double best_d = (pts.col(i) - centers.col(0)).squaredNorm();
    for (Eigen::Index j = 1; j < centers.cols(); ++j) {
      const double d = (pts.col(i) - centers.col(j)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

double recompute_kmeans_objective(const Corpus& corpus, const Clustering& c) {
  const Eigen::MatrixXd pts = corpus.working_points(c.metric);
  double total = 0.0;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < c.centers.cols(); ++j)
      best = std::min(best, (pts.col(i) - c.centers.col(j)).squaredNorm());
    total += best;
  }
  return total;
}

}  // namespace

TEST_CASE("kmeans recovers the optimal 2-clustering of two tight pairs") {
  // brute force over all 2-partitions of 4 points gives objective 1.0
  Corpus c = make_corpus({{0, 0}, {0, 1}, {10, 0}, {10, 1}});
  KMeansOptions opts;
  opts.restarts = 8;
  Clustering cl = kmeans(c, 2, Metric::kEuclidean, opts);
  CHECK(cl.kmeans_objective == doctest::Approx(1.0).epsilon(1e-9));
  std::set<std::set<std::string>> partition;
  for (const auto& members : cl.members) {
    std::set<std::string> group;
    for (auto i : members) group.insert(c.id_of(i));
    partition.insert(group);
  }
  CHECK(partition == std::set<std::set<std::string>>{{"a", "b"}, {"c", "d"}});
  // centers are the pair means
  for (Eigen::Index j = 0; j < 2; ++j)
    CHECK(cl.centers(1, j) == doctest::Approx(0.5));
}

TEST_CASE("kmeans k=1 gives the coordinate-wise mean and total variance") {
  Corpus c = make_corpus({{1, 2}, {3, 4}, {5, 0}});
  Clustering cl = kmeans(c, 1, Metric::kEuclidean);
  CHECK(cl.centers(0, 0) == doctest::Approx(3.0));
  CHECK(cl.centers(1, 0) == doctest::Approx(2.0));
  double expected = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i)
    expected += (c.points().col(i) - cl.centers.col(0)).squaredNorm();
  CHECK(cl.kmeans_objective == doctest::Approx(expected));
}

TEST_CASE("kmeans k=n is the zero-objective degenerate case") {
  Corpus c = make_corpus({{0, 0}, {2, 0}, {0, 3}});
  Clustering cl = kmeans(c, 3, Metric::kEuclidean);
  CHECK(cl.kmeans_objective == doctest::Approx(0.0));
  for (const auto& m : cl.members) CHECK(m.size() == 1);
}

TEST_CASE("kmeans argument validation") {
  Corpus c = make_corpus({{0, 0}, {1, 1}});
  CHECK_THROWS_AS(kmeans(c, 0, Metric::kEuclidean), ConfigError);
  CHECK_THROWS_AS(kmeans(c, 3, Metric::kEuclidean), ConfigError);
}

TEST_CASE("kmeans is deterministic for a fixed seed") {
  SyntheticSpec spec;
  spec.n = 300;
  spec.dimension = 5;
  spec.planted_clusters = 6;
  Corpus c = generate_synthetic(spec);
  Clustering a = kmeans(c, 6, Metric::kEuclideanOnNormalized, {.seed = 7, .restarts = 2});
  Clustering b = kmeans(c, 6, Metric::kEuclideanOnNormalized, {.seed = 7, .restarts = 2});
  CHECK(a.assignment == b.assignment);
  CHECK(a.centers == b.centers);
  CHECK(a.kmeans_objective == b.kmeans_objective);
}

TEST_CASE("stored objectives can be recomputed from centers and corpus") {
  SyntheticSpec spec;
  spec.n = 200;
  spec.dimension = 4;
  Corpus c = generate_synthetic(spec);
  Clustering cl = kmeans(c, 5, Metric::kEuclideanOnNormalized);
  CHECK(recompute_kmeans_objective(c, cl) ==
        doctest::Approx(cl.kmeans_objective).epsilon(1e-6));
}

TEST_CASE("Lloyd objective is monotone within a run") {
  // re-running from the returned centers must not improve beyond tolerance
  SyntheticSpec spec;
  spec.n = 150;
  spec.dimension = 3;
  spec.point_sigma = 2.0;
  Corpus c = generate_synthetic(spec);
  Clustering cl = kmeans(c, 4, Metric::kEuclidean, {.max_iters = 100, .tol = 1e-12});
  Clustering refined = lloyd_from(c, cl.centers, Metric::kEuclidean,
                                  {.max_iters = 100, .tol = 1e-12});
  CHECK(refined.kmeans_objective <= cl.kmeans_objective + 1e-9);
}

TEST_CASE("permutation invariance: shuffled corpus gives the same partition") {
  SyntheticSpec spec;
  spec.n = 60;
  spec.dimension = 3;
  spec.planted_clusters = 3;
  Corpus c = generate_synthetic(spec);
  // shuffle the instance order, keeping ids attached to their vectors
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(c.size()));
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<Eigen::Index>(i);
  Rng rng(123);
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.below(i))]);
  std::vector<std::string> ids;
  Eigen::MatrixXd pts(c.dimension(), c.size());
  Eigen::VectorXd q(c.size());
  std::vector<std::optional<std::string>> text(static_cast<std::size_t>(c.size()));
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    ids.push_back(c.id_of(perm[static_cast<std::size_t>(i)]));
    pts.col(i) = c.points().col(perm[static_cast<std::size_t>(i)]);
    q[i] = c.quality()[perm[static_cast<std::size_t>(i)]];
  }
  Corpus shuffled(c.dimension(), ids, pts, q, text);

  Clustering a = kmeans(c, 3, Metric::kEuclidean, {.seed = 9});
  Clustering b = kmeans(shuffled, 3, Metric::kEuclidean, {.seed = 9});
  auto partition = [](const Corpus& corpus, const Clustering& cl) {
    std::set<std::set<std::string>> out;
    for (const auto& m : cl.members) {
      std::set<std::string> group;
      for (auto i : m) group.insert(corpus.id_of(i));
      out.insert(group);
    }
    return out;
  };
  CHECK(partition(c, a) == partition(shuffled, b));
}

TEST_CASE("assignment ties go to the lowest cluster index") {
  Corpus c = make_corpus({{0, 0}});
  Eigen::MatrixXd centers(2, 2);
  centers.col(0) << 1, 0;
  centers.col(1) << -1, 0;
  Assignment a = assign(c, centers, Metric::kEuclidean);
  CHECK(a.labels[0] == 0);
}

TEST_CASE("assignment with centers equal to points has objective zero") {
  Corpus c = make_corpus({{0, 1}, {2, 3}, {4, 5}});
  Assignment a = assign(c, c.points(), Metric::kEuclidean);
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    CHECK(a.labels[static_cast<std::size_t>(i)] == static_cast<int>(i));
    CHECK(a.sq_dists[i] == 0.0);
  }
}

TEST_CASE("assignment matches the exhaustive oracle on random points") {
  SyntheticSpec spec;
  spec.n = 20;
  spec.dimension = 3;
  spec.point_sigma = 3.0;
  Corpus c = generate_synthetic(spec);
  Eigen::MatrixXd centers = c.points().leftCols(3);
  Assignment a = assign(c, centers, Metric::kEuclidean);
  CHECK(a.labels == oracle_assign(c.points(), centers));
}

TEST_CASE("assignment rejects dimension mismatch") {
  Corpus c = make_corpus({{0, 0}});
  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(3, 1);
  CHECK_THROWS_AS(assign(c, centers, Metric::kEuclidean), DataError);
}

TEST_CASE("kcenter greedy: unit square corners") {
  Corpus c = make_corpus({{0, 0}, {1, 0}, {0, 1}, {1, 1}});
  // find a seed whose first draw is the corner (0,0)
  std::uint64_t seed = 0;
  for (; seed < 100; ++seed) {
    Rng rng = Rng::stream(seed, 0);
    if (c.order_by_id()[static_cast<std::size_t>(rng.below(4))] == 0) break;
  }
  Clustering cl = kcenter_greedy(c, 2, Metric::kEuclidean, seed);
  // opposite corner is farthest; enumeration over all 2-subsets gives 1.0
  CHECK(cl.kcenter_objective == doctest::Approx(1.0));
  std::set<std::string> centers_ids;
  for (int j = 0; j < 2; ++j) {
    for (Eigen::Index i = 0; i < c.size(); ++i)
      if (c.points().col(i) == cl.centers.col(j)) centers_ids.insert(c.id_of(i));
  }
  CHECK(centers_ids == std::set<std::string>{"a", "d"});
}

TEST_CASE("kcenter k=1 objective is the max distance to the seeded pick") {
  Corpus c = make_corpus({{0, 0}, {3, 4}, {6, 8}});
  Clustering cl = kcenter_greedy(c, 1, Metric::kEuclidean, 5);
  double expected = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i)
    expected = std::max(expected, (c.points().col(i) - cl.centers.col(0)).norm());
  CHECK(cl.kcenter_objective == doctest::Approx(expected));
}

TEST_CASE("kcenter greedy is within 2x of the brute-force optimum") {
  SyntheticSpec spec;
  spec.n = 5;
  spec.dimension = 3;
  spec.planted_clusters = 5;
  spec.point_sigma = 1.5;
  Corpus c = generate_synthetic(spec);
  Clustering greedy = kcenter_greedy(c, 2, Metric::kEuclidean, 11);
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < c.size(); ++a)
    for (Eigen::Index b = a + 1; b < c.size(); ++b) {
      double worst = 0.0;
      for (Eigen::Index i = 0; i < c.size(); ++i)
        worst = std::max(worst, std::min((c.points().col(i) - c.points().col(a)).norm(),
                                         (c.points().col(i) - c.points().col(b)).norm()));
      best = std::min(best, worst);
    }
  CHECK(greedy.kcenter_objective <= 2.0 * best + 1e-12);
}

TEST_CASE("normalized-metric argmin equals cosine argmax") {
  SyntheticSpec spec;
  spec.n = 40;
  spec.dimension = 6;
  spec.point_sigma = 2.0;
  Corpus c = generate_synthetic(spec);
  const Eigen::MatrixXd unit = c.working_points(Metric::kEuclideanOnNormalized);
  Eigen::MatrixXd centers = unit.leftCols(4);
  Assignment a = assign(c, centers, Metric::kEuclideanOnNormalized);
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    int best = 0;
    double best_cos = unit.col(i).dot(centers.col(0));
    for (Eigen::Index j = 1; j < centers.cols(); ++j) {
      const double cos = unit.col(i).dot(centers.col(j));
      if (cos > best_cos) {
        best_cos = cos;
        best = static_cast<int>(j);
      }
    }
    CHECK(a.labels[static_cast<std::size_t>(i)] == best);
  }
}

TEST_CASE("empty-cluster repair keeps all k clusters alive") {
  // many duplicate points force collisions during seeding and Lloyd
  std::vector<std::vector<double>> pts(12, {0.0, 0.0});
  pts[10] = {5.0, 5.0};
  pts[11] = {5.0, 5.1};
  Corpus c = make_corpus(pts);
  Clustering cl = kmeans(c, 4, Metric::kEuclidean, {.seed = 3});
  std::size_t total = 0;
  for (const auto& m : cl.members) {
    CHECK(!m.empty());
    total += m.size();
  }
  CHECK(total == 12);
}

TEST_CASE("clustering JSON round trip") {
  auto dir = kmqtest::temp_dir("clust_json");
  SyntheticSpec spec;
  spec.n = 30;
  spec.dimension = 3;
  Corpus c = generate_synthetic(spec);
  Clustering cl = kmeans(c, 3, Metric::kEuclideanOnNormalized);
  save_clustering(cl, c, dir / "cl.json");
  Clustering back = load_clustering(c, dir / "cl.json");
  CHECK(back.k == cl.k);
  CHECK(back.metric == cl.metric);
  CHECK(back.assignment == cl.assignment);
  CHECK(back.centers.isApprox(cl.centers, 1e-12));
  CHECK(back.kmeans_objective == doctest::Approx(cl.kmeans_objective));
  std::filesystem::remove_all(dir);
}
