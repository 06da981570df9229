#pragma once

#include <unistd.h>

#include <Eigen/Dense>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kmq/corpus.hpp"

namespace kmqtest {

// Builds a corpus from explicit points; ids are a, b, c, ... then p26, p27...
inline kmq::Corpus make_corpus(const std::vector<std::vector<double>>& pts,
                               const std::vector<double>& quality = {}) {
  const int dim = static_cast<int>(pts.front().size());
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd points(dim, n);
  Eigen::VectorXd q(n);
  std::vector<std::string> ids;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) points(d, i) = pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
    q[i] = i < static_cast<Eigen::Index>(quality.size())
               ? quality[static_cast<std::size_t>(i)]
               : std::numeric_limits<double>::quiet_NaN();
    ids.push_back(i < 26 ? std::string(1, static_cast<char>('a' + i))
                         : "p" + std::to_string(i));
  }
  std::vector<std::optional<std::string>> text(static_cast<std::size_t>(n));
  return kmq::Corpus(dim, std::move(ids), std::move(points), std::move(q), std::move(text));
}

// Unique scratch directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("kmq_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace kmqtest
