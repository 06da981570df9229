#include "kmq/clustering.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "kmq/rng.hpp"

namespace kmq {

using nlohmann::json;

namespace {

// Squared-distance argmin via ||c||^2 - 2 c.x (the ||x||^2 term is constant
// per point). Blocked GEMM; a float path keeps the 196K x 2048 case inside
// the time budget, exact sq_dists are recomputed in double afterwards.
template <typename Scalar>
void nearest_labels(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& points,
                    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& centers,
                    std::vector<int>& labels) {
  const Eigen::Index n = points.cols();
  const Eigen::Index k = centers.cols();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> csq = centers.colwise().squaredNorm().transpose();
  const Eigen::Index block = std::max<Eigen::Index>(1, 4'000'000 / std::max<Eigen::Index>(1, k));
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> scores;
  for (Eigen::Index start = 0; start < n; start += block) {
    const Eigen::Index m = std::min(block, n - start);
    scores.noalias() = centers.transpose() * points.middleCols(start, m);
    for (Eigen::Index c = 0; c < m; ++c) {
      int best = 0;
      Scalar best_val = csq[0] - Scalar(2) * scores(0, c);
      for (Eigen::Index j = 1; j < k; ++j) {
        const Scalar val = csq[j] - Scalar(2) * scores(j, c);
        if (val < best_val) {
          best_val = val;
          best = static_cast<int>(j);
        }
      }
      labels[static_cast<std::size_t>(start + c)] = best;
    }
  }
}

void build_members(const std::vector<int>& labels, Eigen::Index k,
                   std::vector<std::vector<Eigen::Index>>& members) {
  members.assign(static_cast<std::size_t>(k), {});
  for (std::size_t i = 0; i < labels.size(); ++i)
    members[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
}

}  // namespace

Assignment assign_points(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers) {
  const Eigen::Index n = points.cols();
  const Eigen::Index k = centers.cols();
  if (k == 0) throw DataError("assign: no centers");
  if (points.rows() != centers.rows())
    throw DataError("assign: dimension mismatch between points and centers");

  Assignment out;
  out.labels.resize(static_cast<std::size_t>(n));
  if (static_cast<double>(n) * static_cast<double>(k) > 5e7) {
    Eigen::MatrixXf pf = points.cast<float>();
    Eigen::MatrixXf cf = centers.cast<float>();
    nearest_labels<float>(pf, cf, out.labels);
  } else {
    nearest_labels<double>(points, centers, out.labels);
  }
  out.sq_dists.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out.sq_dists[i] =
        (points.col(i) - centers.col(out.labels[static_cast<std::size_t>(i)])).squaredNorm();
  build_members(out.labels, k, out.members);
  return out;
}

Assignment assign(const Corpus& corpus, const Eigen::MatrixXd& centers, Metric metric) {
  return assign_points(corpus.working_points(metric), centers);
}

namespace {

// Sums in id-sorted order so the value is invariant to corpus file order.
double objective_sum(const Eigen::VectorXd& sq_dists, const std::vector<Eigen::Index>& order) {
  double total = 0.0;
  for (Eigen::Index i : order) total += sq_dists[i];
  return total;
}

// Reseeds every empty cluster with the point of the largest cluster that is
// farthest from that cluster's center. Keeps k clusters alive.
void repair_empty_clusters(const Eigen::MatrixXd& points, Eigen::MatrixXd& centers,
                           Assignment& a) {
  const Eigen::Index k = centers.cols();
  for (Eigen::Index e = 0; e < k; ++e) {
    if (!a.members[static_cast<std::size_t>(e)].empty()) continue;
    Eigen::Index donor = -1;
    std::size_t donor_size = 1;  // needs at least 2 members to donate
    for (Eigen::Index j = 0; j < k; ++j) {
      if (a.members[static_cast<std::size_t>(j)].size() > donor_size) {
        donor_size = a.members[static_cast<std::size_t>(j)].size();
        donor = j;
      }
    }
    if (donor < 0) throw DataError("cannot repair empty cluster: no donor cluster");
    auto& donors = a.members[static_cast<std::size_t>(donor)];
    std::size_t far_pos = 0;
    for (std::size_t p = 1; p < donors.size(); ++p)
      if (a.sq_dists[donors[p]] > a.sq_dists[donors[far_pos]]) far_pos = p;
    const Eigen::Index moved = donors[far_pos];
    donors.erase(donors.begin() + static_cast<std::ptrdiff_t>(far_pos));
    centers.col(e) = points.col(moved);
    a.labels[static_cast<std::size_t>(moved)] = static_cast<int>(e);
    a.sq_dists[moved] = 0.0;
    auto& mine = a.members[static_cast<std::size_t>(e)];
    mine.push_back(moved);
  }
  // member lists stay sorted by corpus index
  for (auto& m : a.members) std::sort(m.begin(), m.end());
}

// k-means++ seeding; all draws run over id-sorted order so the chosen
// centers depend only on corpus content, not file order.
Eigen::MatrixXd kmeanspp_seed(const Eigen::MatrixXd& points,
                              const std::vector<Eigen::Index>& order, int k, Rng& rng) {
  const Eigen::Index n = points.cols();
  Eigen::MatrixXd centers(points.rows(), k);
  const Eigen::Index first = order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)))];
  centers.col(0) = points.col(first);

  Eigen::VectorXd min_sq = (points.colwise() - points.col(first)).colwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i : order) total += min_sq[i];
    Eigen::Index pick = order.front();
    if (total > 0.0) {
      const double u = rng.next_double() * total;
      double cum = 0.0;
      for (Eigen::Index i : order) {
        cum += min_sq[i];
        if (cum > u) {
          pick = i;
          break;
        }
      }
    } else {
      pick = order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)))];
    }
    centers.col(c) = points.col(pick);
    Eigen::VectorXd d = (points.colwise() - points.col(pick)).colwise().squaredNorm();
    min_sq = min_sq.cwiseMin(d);
  }
  return centers;
}

struct LloydResult {
  Eigen::MatrixXd centers;
  Assignment assignment;
  double objective = std::numeric_limits<double>::infinity();
};

LloydResult lloyd(const Eigen::MatrixXd& points, const std::vector<Eigen::Index>& order,
                  Eigen::MatrixXd centers, const KMeansOptions& options) {
  const Eigen::Index k = centers.cols();
  // rank in id order, for order-invariant centroid accumulation
  std::vector<Eigen::Index> rank(order.size());
  for (std::size_t p = 0; p < order.size(); ++p) rank[static_cast<std::size_t>(order[p])] = static_cast<Eigen::Index>(p);

  LloydResult res;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iters; ++it) {
    Assignment a = assign_points(points, centers);
    repair_empty_clusters(points, centers, a);
    const double obj = objective_sum(a.sq_dists, order);
    res.centers = centers;
    res.assignment = std::move(a);
    res.objective = obj;
    if (it > 0 && prev - obj <= options.tol * prev) break;
    prev = obj;
    if (it + 1 == options.max_iters) break;
    // recenter, accumulating members in id order
    std::vector<Eigen::Index> sorted;
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& m = res.assignment.members[static_cast<std::size_t>(j)];
      sorted.assign(m.begin(), m.end());
      std::sort(sorted.begin(), sorted.end(),
                [&](Eigen::Index x, Eigen::Index y) { return rank[static_cast<std::size_t>(x)] < rank[static_cast<std::size_t>(y)]; });
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(points.rows());
      for (Eigen::Index i : sorted) sum += points.col(i);
      centers.col(j) = sum / static_cast<double>(sorted.size());
    }
  }
  return res;
}

Clustering finalize(Metric metric, std::uint64_t seed, LloydResult res) {
  Clustering c;
  c.k = static_cast<int>(res.centers.cols());
  c.metric = metric;
  c.seed = seed;
  c.centers = std::move(res.centers);
  c.assignment = std::move(res.assignment.labels);
  c.members = std::move(res.assignment.members);
  c.kmeans_objective = res.objective;
  c.kcenter_objective =
      res.assignment.sq_dists.size() > 0 ? std::sqrt(res.assignment.sq_dists.maxCoeff()) : 0.0;
  return c;
}

void check_k(const Corpus& corpus, int k) {
  if (corpus.size() == 0) throw DataError("empty corpus");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (k > corpus.size())
    throw ConfigError("k = " + std::to_string(k) + " exceeds corpus size " +
                      std::to_string(corpus.size()));
}

}  // namespace

Clustering kmeans(const Corpus& corpus, int k, Metric metric, const KMeansOptions& options) {
  check_k(corpus, k);
  if (options.restarts < 1) throw ConfigError("restarts must be at least 1");
  const Eigen::MatrixXd points = corpus.working_points(metric);
  const auto& order = corpus.order_by_id();

  LloydResult best;
  for (int r = 0; r < options.restarts; ++r) {
    Rng rng = Rng::stream(options.seed, static_cast<std::uint64_t>(r));
    Eigen::MatrixXd init = kmeanspp_seed(points, order, k, rng);
    LloydResult res = lloyd(points, order, std::move(init), options);
    if (res.objective < best.objective) best = std::move(res);
  }
  return finalize(metric, options.seed, std::move(best));
}

Clustering lloyd_from(const Corpus& corpus, const Eigen::MatrixXd& initial_centers,
                      Metric metric, const KMeansOptions& options) {
  check_k(corpus, static_cast<int>(initial_centers.cols()));
  if (initial_centers.rows() != corpus.dimension())
    throw DataError("initial centers do not match corpus dimension");
  const Eigen::MatrixXd points = corpus.working_points(metric);
  LloydResult res = lloyd(points, corpus.order_by_id(), initial_centers, options);
  return finalize(metric, options.seed, std::move(res));
}

std::vector<Eigen::Index> kcenter_greedy_indices(const Eigen::MatrixXd& points,
                                                 const std::vector<Eigen::Index>& order_by_id,
                                                 int k, std::uint64_t seed) {
  const Eigen::Index n = points.cols();
  Rng rng = Rng::stream(seed, 0);
  std::vector<Eigen::Index> picks;
  picks.reserve(static_cast<std::size_t>(k));
  const Eigen::Index first =
      order_by_id[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)))];
  picks.push_back(first);
  Eigen::VectorXd min_sq = (points.colwise() - points.col(first)).colwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    Eigen::Index far = order_by_id.front();
    double far_val = -1.0;
    for (Eigen::Index i : order_by_id) {
      if (min_sq[i] > far_val) {
        far_val = min_sq[i];
        far = i;
      }
    }
    picks.push_back(far);
    Eigen::VectorXd d = (points.colwise() - points.col(far)).colwise().squaredNorm();
    min_sq = min_sq.cwiseMin(d);
  }
  return picks;
}

Clustering kcenter_greedy(const Corpus& corpus, int k, Metric metric, std::uint64_t seed) {
  check_k(corpus, k);
  const Eigen::MatrixXd points = corpus.working_points(metric);
  const auto picks = kcenter_greedy_indices(points, corpus.order_by_id(), k, seed);
  Eigen::MatrixXd centers(points.rows(), k);
  for (int j = 0; j < k; ++j) centers.col(j) = points.col(picks[static_cast<std::size_t>(j)]);
  Assignment a = assign_points(points, centers);
  LloydResult res;
  res.centers = std::move(centers);
  res.objective = objective_sum(a.sq_dists, corpus.order_by_id());
  res.assignment = std::move(a);
  return finalize(metric, seed, std::move(res));
}

void save_clustering(const Clustering& clustering, const Corpus& corpus,
                     const std::filesystem::path& path) {
  json obj;
  obj["k"] = clustering.k;
  obj["metric"] = metric_name(clustering.metric);
  obj["seed"] = clustering.seed;
  json centers = json::array();
  for (Eigen::Index j = 0; j < clustering.centers.cols(); ++j) {
    std::vector<double> col(clustering.centers.col(j).data(),
                            clustering.centers.col(j).data() + clustering.centers.rows());
    centers.push_back(col);
  }
  obj["centers"] = std::move(centers);
  json assignment = json::object();
  for (std::size_t i = 0; i < clustering.assignment.size(); ++i)
    assignment[corpus.id_of(static_cast<Eigen::Index>(i))] = clustering.assignment[i];
  obj["assignment"] = std::move(assignment);
  obj["kmeans_objective"] = clustering.kmeans_objective;
  obj["kcenter_objective"] = clustering.kcenter_objective;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << obj.dump(2) << '\n';
}

Clustering load_clustering(const Corpus& corpus, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json obj;
  try {
    in >> obj;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed clustering: " + e.what());
  }
  Clustering c;
  c.k = obj.at("k").get<int>();
  c.metric = metric_from_name(obj.at("metric").get<std::string>());
  c.seed = obj.at("seed").get<std::uint64_t>();
  const auto& centers = obj.at("centers");
  if (centers.empty()) throw DataError("clustering has no centers");
  c.centers.resize(corpus.dimension(), static_cast<Eigen::Index>(centers.size()));
  for (std::size_t j = 0; j < centers.size(); ++j) {
    auto col = centers[j].get<std::vector<double>>();
    if (static_cast<int>(col.size()) != corpus.dimension())
      throw DataError("center dimension mismatch in " + path.string());
    for (int d = 0; d < corpus.dimension(); ++d)
      c.centers(d, static_cast<Eigen::Index>(j)) = col[static_cast<std::size_t>(d)];
  }
  c.assignment.assign(static_cast<std::size_t>(corpus.size()), -1);
  for (const auto& [id, idx] : obj.at("assignment").items()) {
    const int cluster = idx.get<int>();
    if (cluster < 0 || cluster >= c.k)
      throw DataError("assignment index out of range for id '" + id + "'");
    c.assignment[static_cast<std::size_t>(corpus.index_of(id))] = cluster;
  }
  for (std::size_t i = 0; i < c.assignment.size(); ++i)
    if (c.assignment[i] < 0)
      throw DataError("no assignment for id '" + corpus.id_of(static_cast<Eigen::Index>(i)) + "'");
  c.members.assign(static_cast<std::size_t>(c.k), {});
  for (std::size_t i = 0; i < c.assignment.size(); ++i)
    c.members[static_cast<std::size_t>(c.assignment[i])].push_back(static_cast<Eigen::Index>(i));
  c.kmeans_objective = obj.at("kmeans_objective").get<double>();
  c.kcenter_objective = obj.at("kcenter_objective").get<double>();
  return c;
}

}  // namespace kmq
