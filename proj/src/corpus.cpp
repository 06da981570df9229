#include "kmq/corpus.hpp"

#include <algorithm>
#include <cmath>

namespace kmq {

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::kEuclidean: return "euclidean";
    case Metric::kEuclideanOnNormalized: return "euclidean_on_normalized";
  }
  return "unknown";
}

Metric metric_from_name(const std::string& name) {
  if (name == "euclidean") return Metric::kEuclidean;
  if (name == "euclidean_on_normalized" || name == "cosine")
    return Metric::kEuclideanOnNormalized;
  throw ConfigError("unknown metric: " + name);
}

Corpus::Corpus(int dimension, std::vector<std::string> ids, Eigen::MatrixXd points,
               Eigen::VectorXd quality, std::vector<std::optional<std::string>> text,
               std::map<std::string, std::string> metadata)
    : dimension_(dimension),
      ids_(std::move(ids)),
      points_(std::move(points)),
      quality_(std::move(quality)),
      text_(std::move(text)),
      metadata_(std::move(metadata)) {
  const auto n = points_.cols();
  if (dimension_ <= 0) throw DataError("corpus dimension must be positive");
  if (points_.rows() != dimension_)
    throw DataError("embedding matrix rows do not match declared dimension");
  if (static_cast<Eigen::Index>(ids_.size()) != n || quality_.size() != n ||
      static_cast<Eigen::Index>(text_.size()) != n)
    throw DataError("corpus field lengths disagree");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!points_.col(i).allFinite())
      throw DataError("non-finite embedding component in instance '" + ids_[i] + "'");
    if (!std::isnan(quality_[i]) && (quality_[i] < 0.0 || quality_[i] > 1.0))
      throw DataError("quality outside [0,1] for instance '" + ids_[i] + "'");
    auto [it, inserted] = index_.emplace(ids_[i], i);
    (void)it;
    if (!inserted) throw DataError("duplicate id '" + ids_[i] + "'");
  }
}

Eigen::Index Corpus::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("unknown id '" + id + "'");
  return it->second;
}

Eigen::MatrixXd Corpus::working_points(Metric metric) const {
  if (metric == Metric::kEuclidean) return points_;
  Eigen::MatrixXd out = points_;
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    double norm = out.col(i).norm();
    if (norm > 0.0) out.col(i) /= norm;
  }
  return out;
}

const std::vector<Eigen::Index>& Corpus::order_by_id() const {
  if (order_by_id_.empty() && !ids_.empty()) {
    order_by_id_.resize(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i)
      order_by_id_[i] = static_cast<Eigen::Index>(i);
    std::sort(order_by_id_.begin(), order_by_id_.end(),
              [&](Eigen::Index a, Eigen::Index b) { return ids_[a] < ids_[b]; });
  }
  return order_by_id_;
}

Corpus Corpus::with_scores(const std::map<std::string, double>& scores) const {
  Eigen::VectorXd quality = quality_;
  for (const auto& [id, value] : scores) {
    if (value < 0.0 || value > 1.0)
      throw DataError("score outside [0,1] for id '" + id + "'");
    quality[index_of(id)] = value;
  }
  return Corpus(dimension_, ids_, points_, std::move(quality), text_, metadata_);
}

}  // namespace kmq
