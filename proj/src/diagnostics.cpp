#include "kmq/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kmq/rng.hpp"

namespace kmq {

namespace {

// Accumulates, for each scored point, the sum of distances to every cluster's
// members. Blocked Gram products; the float path covers the large-corpus case
// where n * scored is in the billions.
template <typename Scalar>
void cluster_distance_sums(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& points,
                           const std::vector<int>& labels, int k,
                           const std::vector<Eigen::Index>& scored,
                           Eigen::MatrixXd& sums) {
  const Eigen::Index n = points.cols();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> xsq = points.colwise().squaredNorm().transpose();
  sums = Eigen::MatrixXd::Zero(k, static_cast<Eigen::Index>(scored.size()));

  const Eigen::Index chunk = 64;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> block(points.rows(), chunk);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gram;
  for (std::size_t start = 0; start < scored.size(); start += static_cast<std::size_t>(chunk)) {
    const Eigen::Index m =
        std::min<Eigen::Index>(chunk, static_cast<Eigen::Index>(scored.size() - start));
    for (Eigen::Index c = 0; c < m; ++c)
      block.col(c) = points.col(scored[start + static_cast<std::size_t>(c)]);
    gram.noalias() = points.transpose() * block.leftCols(m);  // n x m
    for (Eigen::Index c = 0; c < m; ++c) {
      const Eigen::Index col = static_cast<Eigen::Index>(start) + c;
      const Eigen::Index i = scored[static_cast<std::size_t>(col)];
      const Scalar xi = xsq[i];
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;  // self-distance is exactly 0
        Scalar d2 = xi + xsq[j] - Scalar(2) * gram(j, c);
        if (d2 < Scalar(0)) d2 = Scalar(0);
        sums(labels[static_cast<std::size_t>(j)], col) += static_cast<double>(std::sqrt(d2));
      }
    }
  }
}

}  // namespace

SilhouetteReport silhouette(const Corpus& corpus, const Clustering& clustering,
                            Metric metric, std::optional<int> sample, std::uint64_t seed) {
  const Eigen::Index n = corpus.size();
  const int k = clustering.k;
  if (k < 2) throw ConfigError("silhouette is undefined for k < 2");
  for (int j = 0; j < k; ++j)
    if (clustering.cluster_size(j) == 0)
      throw DataError("silhouette: cluster " + std::to_string(j) + " is empty");

  std::vector<Eigen::Index> scored;
  if (sample && *sample < n) {
    if (*sample < 1) throw ConfigError("silhouette sample must be positive");
    Rng rng = Rng::stream(seed, 0);
    auto picks = rng.sample_indices(static_cast<std::size_t>(n),
                                    static_cast<std::size_t>(*sample));
    std::sort(picks.begin(), picks.end());
    scored.assign(picks.begin(), picks.end());
  } else {
    scored.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) scored[static_cast<std::size_t>(i)] = i;
  }

  const Eigen::MatrixXd points = corpus.working_points(metric);
  Eigen::MatrixXd sums;
  if (static_cast<double>(n) * static_cast<double>(scored.size()) > 1e8) {
    Eigen::MatrixXf pf = points.cast<float>();
    cluster_distance_sums<float>(pf, clustering.assignment, k, scored, sums);
  } else {
    cluster_distance_sums<double>(points, clustering.assignment, k, scored, sums);
  }

  SilhouetteReport report;
  report.k = k;
  report.sample_size = static_cast<int>(scored.size());
  double total = 0.0;
  for (std::size_t c = 0; c < scored.size(); ++c) {
    const Eigen::Index i = scored[c];
    const int own = clustering.assignment[static_cast<std::size_t>(i)];
    const std::size_t own_size = clustering.cluster_size(own);
    double s = 0.0;
    if (own_size > 1) {
      const double a = sums(own, static_cast<Eigen::Index>(c)) /
                       static_cast<double>(own_size - 1);
      double b = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        if (j == own) continue;
        b = std::min(b, sums(j, static_cast<Eigen::Index>(c)) /
                            static_cast<double>(clustering.cluster_size(j)));
      }
      const double denom = std::max(a, b);
      s = denom > 0.0 ? (b - a) / denom : 0.0;  // 0/0 -> 0
    }
    report.per_point[corpus.id_of(i)] = s;
    total += s;
  }
  report.mean_score = total / static_cast<double>(scored.size());
  return report;
}

ElbowCurve elbow_curve(const Corpus& corpus, const std::vector<int>& ks,
                       Metric metric, const KMeansOptions& options) {
  if (ks.empty()) throw ConfigError("elbow sweep needs at least one k");
  for (std::size_t i = 1; i < ks.size(); ++i)
    if (ks[i] <= ks[i - 1])
      throw ConfigError("elbow ks must be strictly increasing");

  const Eigen::MatrixXd points = corpus.working_points(metric);
  const auto& order = corpus.order_by_id();

  ElbowCurve curve;
  Eigen::MatrixXd prev_centers;
  double prev_obj = std::numeric_limits<double>::infinity();
  for (int k : ks) {
    Clustering best = kmeans(corpus, k, metric, options);
    if (prev_centers.cols() > 0 && best.kmeans_objective > prev_obj) {
      // refine the previous solution extended by greedy farthest picks;
      // adding centers can only lower the objective, keeping the curve
      // non-increasing in k
      Eigen::MatrixXd init(points.rows(), k);
      init.leftCols(prev_centers.cols()) = prev_centers;
      Eigen::VectorXd min_sq(points.cols());
      for (Eigen::Index i = 0; i < points.cols(); ++i)
        min_sq[i] = (prev_centers.colwise() - points.col(i)).colwise().squaredNorm().minCoeff();
      for (Eigen::Index c = prev_centers.cols(); c < k; ++c) {
        Eigen::Index far = order.front();
        double far_val = -1.0;
        for (Eigen::Index i : order)
          if (min_sq[i] > far_val) {
            far_val = min_sq[i];
            far = i;
          }
        init.col(c) = points.col(far);
        Eigen::VectorXd d = (points.colwise() - points.col(far)).colwise().squaredNorm();
        min_sq = min_sq.cwiseMin(d);
      }
      Clustering nested = lloyd_from(corpus, init, metric, options);
      if (nested.kmeans_objective < best.kmeans_objective) best = std::move(nested);
    }
    curve.points.emplace_back(k, best.kmeans_objective);
    prev_centers = best.centers;
    prev_obj = best.kmeans_objective;
  }

  if (curve.points.size() >= 3) {
    // second differences on the log objective; the raw curve's early-k drops
    // are orders of magnitude larger and would always dominate
    auto log_obj = [&](std::size_t i) {
      return std::log(curve.points[i].second + 1e-300);
    };
    double best_dd = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < curve.points.size(); ++i) {
      const double dd = log_obj(i - 1) - 2.0 * log_obj(i) + log_obj(i + 1);
      if (dd > best_dd) {
        best_dd = dd;
        curve.knee = curve.points[i].first;
      }
    }
  }
  return curve;
}

QualityProfile quality_profile(const Corpus& corpus, const Clustering& clustering,
                               double threshold) {
  if (threshold < 0.0 || threshold > 1.0)
    throw ConfigError("quality threshold must lie in [0,1]");
  std::vector<std::string> missing;
  for (Eigen::Index i = 0; i < corpus.size(); ++i)
    if (!corpus.has_quality(i)) {
      missing.push_back(corpus.id_of(i));
      if (missing.size() >= 5) break;
    }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw DataError("quality missing on instances: " + list);
  }

  QualityProfile profile;
  profile.threshold = threshold;
  profile.per_cluster_mean_quality.resize(static_cast<std::size_t>(clustering.k));
  int below = 0;
  for (int j = 0; j < clustering.k; ++j) {
    const auto& members = clustering.members[static_cast<std::size_t>(j)];
    if (members.empty()) throw DataError("quality profile: empty cluster");
    double sum = 0.0;
    for (Eigen::Index i : members) sum += corpus.quality()[i];
    const double mean = sum / static_cast<double>(members.size());
    profile.per_cluster_mean_quality[static_cast<std::size_t>(j)] = mean;
    if (mean < threshold) ++below;
  }
  profile.fraction_below = static_cast<double>(below) / static_cast<double>(clustering.k);
  return profile;
}

}  // namespace kmq
