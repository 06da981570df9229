#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "kmq/corpus.hpp"

namespace kmq {

// A fixed partition of a corpus: k centers, nearest-center assignment
// (ties broken by lowest cluster index), and both objective values.
struct Clustering {
  int k = 0;
  Metric metric = Metric::kEuclideanOnNormalized;
  std::uint64_t seed = 0;
  Eigen::MatrixXd centers;                      // dimension x k
  std::vector<int> assignment;                  // per corpus index
  std::vector<std::vector<Eigen::Index>> members;  // per cluster, corpus order
  double kmeans_objective = 0.0;                // sum of squared distances
  double kcenter_objective = 0.0;               // max distance

  std::size_t cluster_size(int j) const { return members[static_cast<std::size_t>(j)].size(); }
};

struct KMeansOptions {
  std::uint64_t seed = 42;
  int max_iters = 100;
  double tol = 1e-4;  // relative objective improvement
  int restarts = 1;
};

struct Assignment {
  std::vector<int> labels;
  std::vector<std::vector<Eigen::Index>> members;
  Eigen::VectorXd sq_dists;  // squared distance to the assigned center
};

// Nearest-center assignment: lowest index wins ties.
// `points` must already be in the metric's working space.
Assignment assign_points(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers);

// Convenience overload that applies the metric transform to the corpus.
Assignment assign(const Corpus& corpus, const Eigen::MatrixXd& centers, Metric metric);

// Lloyd's algorithm with k-means++ seeding; best objective over
// `options.restarts` independent runs, deterministic for a fixed seed.
Clustering kmeans(const Corpus& corpus, int k, Metric metric,
                  const KMeansOptions& options = {});

// Lloyd's algorithm from explicit initial centers (no seeding, no
// restarts). Used by the elbow sweep to refine nested center sets.
Clustering lloyd_from(const Corpus& corpus, const Eigen::MatrixXd& initial_centers,
                      Metric metric, const KMeansOptions& options = {});

// Greedy farthest-first traversal: seeded first pick, then repeatedly the
// point maximizing distance to the chosen set (classic 2-approximation of
// the k-center optimum). Centers are corpus points.
Clustering kcenter_greedy(const Corpus& corpus, int k, Metric metric,
                          std::uint64_t seed = 42);

// Indices (into the corpus) of the greedy k-center picks, in pick order.
std::vector<Eigen::Index> kcenter_greedy_indices(const Eigen::MatrixXd& points,
                                                 const std::vector<Eigen::Index>& order_by_id,
                                                 int k, std::uint64_t seed);

void save_clustering(const Clustering& clustering, const Corpus& corpus,
                     const std::filesystem::path& path);
Clustering load_clustering(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace kmq
