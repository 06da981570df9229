#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kmq/error.hpp"

namespace kmq {

enum class Metric {
  kEuclidean,
  // L2-normalize vectors before any distance computation; on unit vectors
  // Euclidean nearest-center ordering coincides with cosine ordering
  // (d^2 = 2 - 2 cos).
  kEuclideanOnNormalized,
};

std::string metric_name(Metric m);
Metric metric_from_name(const std::string& name);

// An embedded instruction corpus. Immutable after load; embeddings are held
// column-wise (one point per column) for Eigen-friendly batch math. Quality
// is NaN when absent.
class Corpus {
 public:
  Corpus(int dimension, std::vector<std::string> ids, Eigen::MatrixXd points,
         Eigen::VectorXd quality, std::vector<std::optional<std::string>> text,
         std::map<std::string, std::string> metadata = {});

  int dimension() const { return dimension_; }
  Eigen::Index size() const { return points_.cols(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const Eigen::MatrixXd& points() const { return points_; }
  const Eigen::VectorXd& quality() const { return quality_; }
  const std::vector<std::optional<std::string>>& text() const { return text_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  const std::string& id_of(Eigen::Index i) const { return ids_[static_cast<std::size_t>(i)]; }
  bool has_quality(Eigen::Index i) const { return !std::isnan(quality_[i]); }

  // Throws DataError on unknown id.
  Eigen::Index index_of(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  // Point matrix as seen through `metric`: either the raw embeddings or a
  // unit-normalized copy.
  Eigen::MatrixXd working_points(Metric metric) const;

  // Indices of all instances sorted by id (lexicographic). Cached; used to
  // make seeded draws invariant to corpus file order.
  const std::vector<Eigen::Index>& order_by_id() const;

  // Returns a copy with quality set from `scores` (values in [0,1]);
  // instances absent from the map keep their prior quality.
  Corpus with_scores(const std::map<std::string, double>& scores) const;

 private:
  int dimension_;
  std::vector<std::string> ids_;
  Eigen::MatrixXd points_;   // dimension x n
  Eigen::VectorXd quality_;  // n, NaN = absent
  std::vector<std::optional<std::string>> text_;
  std::map<std::string, std::string> metadata_;
  std::unordered_map<std::string, Eigen::Index> index_;
  mutable std::vector<Eigen::Index> order_by_id_;
};

// A selected subset: ordered ids plus the provenance needed to reproduce it.
struct Selection {
  std::vector<std::string> ids;
  int budget = 0;
  std::string method;
  std::map<std::string, std::string> params;
};

}  // namespace kmq
