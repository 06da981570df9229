#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kmq/clustering.hpp"
#include "kmq/corpus.hpp"
#include "kmq/sampling.hpp"

namespace kmq {

struct ScoreRequest {
  std::string id;
  std::string prompt;
  std::string gold;
};

struct ScoredGeneration {
  std::string id;
  double gen_score = 0.0;
  double gold_score = 0.0;
  double delta = 0.0;  // gold_score - gen_score
};

// Scorer value of the gold completion minus the model generation.
inline double score_delta(double gen_score, double gold_score) {
  return gold_score - gen_score;
}

// Perplexity instantiation of the score: -log(PPL_gen / PPL_gold), i.e. the
// delta of log-perplexities with score(x) = -log PPL(x).
double perplexity_delta(double ppl_gen, double ppl_gold);

// Boundary to any external scorer: given request tuples, return a
// (gen_score, gold_score) per id. Throws ScorerError on failure.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<ScoredGeneration> score(const std::vector<ScoreRequest>& requests) = 0;
};

// Deterministic in-process scorer: per-cluster base delta plus seeded
// per-id Gaussian noise. gold_score = base + noise, gen_score = 0.
class MockScorer : public Scorer {
 public:
  MockScorer(const Clustering& clustering, const Corpus& corpus,
             std::vector<double> cluster_deltas, double noise_sigma = 0.0,
             std::uint64_t seed = 0);
  std::vector<ScoredGeneration> score(const std::vector<ScoreRequest>& requests) override;

 private:
  const Clustering& clustering_;
  const Corpus& corpus_;
  std::vector<double> cluster_deltas_;
  double noise_sigma_;
  std::uint64_t seed_;
};

// Reads pre-computed scores from a response JSONL of
// `{"id":…, "gen_score":…, "gold_score":…}` records.
class FileScorer : public Scorer {
 public:
  explicit FileScorer(const std::filesystem::path& response_path);
  std::vector<ScoredGeneration> score(const std::vector<ScoreRequest>& requests) override;

 private:
  std::map<std::string, std::pair<double, double>> scores_;
};

// Spawns `command <request_path> <response_path>`; the engine writes the
// request JSONL, the command writes the response JSONL. Nonzero exit is a
// scorer failure.
class CommandScorer : public Scorer {
 public:
  CommandScorer(std::string command, std::filesystem::path work_dir);
  std::vector<ScoredGeneration> score(const std::vector<ScoreRequest>& requests) override;

 private:
  std::string command_;
  std::filesystem::path work_dir_;
  int call_count_ = 0;
};

// How cluster scores divide: by the number of scored instances in the
// cluster (default) or by the full cluster size.
enum class ClusterScoreDivisor { kScoredCount, kFullClusterSize };

// Per-cluster mean score delta; clusters with no scored instance this round
// receive the median of the scored clusters' values as a neutral score.
Eigen::VectorXd cluster_scores(const std::vector<ScoredGeneration>& records,
                               const Clustering& clustering, const Corpus& corpus,
                               ClusterScoreDivisor divisor = ClusterScoreDivisor::kScoredCount);

struct WeightUpdateOptions {
  // Per-iteration change cap: each weight may move by at most this factor
  // (up or down) before renormalization. <= 0 disables the cap.
  double max_change_factor = 4.0;
};

// Multiplicative weight update w_j <- (s_j / sum s) * w_j, renormalized to
// the simplex. Scores with a non-positive minimum are first shifted by
// -min(s) + eps to keep the ordering while guaranteeing positivity.
ClusterWeights update_weights(const ClusterWeights& prev, const Eigen::VectorXd& scores,
                              const WeightUpdateOptions& options = {});

// Budgets per iteration: floor(b/N) each, remainder spread one unit at a
// time over the earliest iterations. Requires b >= N.
std::vector<int> iteration_budgets(int b, int n_iterations);

struct IterationRecord {
  int it = 0;  // 1-based
  int budget = 0;
  std::vector<std::string> selected_ids;
  std::vector<ScoredGeneration> scored;
  Eigen::VectorXd cluster_score_values;
  ClusterWeights weights_after;
};

struct IterativeConfig {
  int budget = 0;
  int iterations = 1;
  std::uint64_t seed = 42;
  bool with_replacement = false;
  ClusterScoreDivisor divisor = ClusterScoreDivisor::kScoredCount;
  WeightUpdateOptions weight_update;
  bool score_new_only = false;  // default scores all of D' to date
  // Test hook: stop after this many completed iterations (0 = run to N).
  int stop_after = 0;
};

struct IterativeResult {
  Selection selection;
  std::vector<IterationRecord> records;
  ClusterWeights final_weights;
};

// The iterative selection loop: per iteration, allocate the iteration budget
// across clusters from the current weights (scaled by remaining cluster
// sizes, so uniform weights reproduce proportional allocation), draw a
// quality-weighted sample from the not-yet-selected pool, collect scores
// through the adapter, and update the weights. State is persisted under
// `state_dir` after every iteration and runs are resumable.
IterativeResult run_iterative(const Corpus& corpus, const Clustering& clustering,
                              const IterativeConfig& config, Scorer& scorer,
                              const std::filesystem::path& state_dir);

// Replays persisted iteration records and continues from the first
// incomplete iteration; the final output is identical to an uninterrupted
// run with the same seeds.
IterativeResult resume(const Corpus& corpus, const Clustering& clustering,
                       Scorer& scorer, const std::filesystem::path& state_dir);

}  // namespace kmq
