#include "kmq/iterative.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <unordered_set>

#include "kmq/io.hpp"
#include "kmq/rng.hpp"

namespace kmq {

using nlohmann::json;

double perplexity_delta(double ppl_gen, double ppl_gold) {
  if (ppl_gen <= 0.0 || ppl_gold <= 0.0)
    throw DataError("perplexity must be positive");
  return -std::log(ppl_gen / ppl_gold);
}

namespace {

std::uint64_t fnv64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

MockScorer::MockScorer(const Clustering& clustering, const Corpus& corpus,
                       std::vector<double> cluster_deltas, double noise_sigma,
                       std::uint64_t seed)
    : clustering_(clustering),
      corpus_(corpus),
      cluster_deltas_(std::move(cluster_deltas)),
      noise_sigma_(noise_sigma),
      seed_(seed) {
  if (cluster_deltas_.empty()) throw ConfigError("mock scorer needs cluster deltas");
}

std::vector<ScoredGeneration> MockScorer::score(const std::vector<ScoreRequest>& requests) {
  std::vector<ScoredGeneration> out;
  out.reserve(requests.size());
  for (const auto& req : requests) {
    const auto idx = corpus_.index_of(req.id);
    const int cluster = clustering_.assignment[static_cast<std::size_t>(idx)];
    double delta = cluster_deltas_[static_cast<std::size_t>(cluster) % cluster_deltas_.size()];
    if (noise_sigma_ > 0.0) {
      Rng rng = Rng::stream(seed_, fnv64(req.id));
      delta += noise_sigma_ * rng.next_gaussian();
    }
    out.push_back({req.id, 0.0, delta, delta});
  }
  return out;
}

FileScorer::FileScorer(const std::filesystem::path& response_path) {
  std::ifstream in(response_path);
  if (!in) throw ScorerError("cannot open score file " + response_path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json obj = json::parse(line);
      scores_[obj.at("id").get<std::string>()] = {obj.at("gen_score").get<double>(),
                                                  obj.at("gold_score").get<double>()};
    } catch (const json::exception& e) {
      throw ScorerError(response_path.string() + ":" + std::to_string(lineno) +
                        ": malformed score record: " + e.what());
    }
  }
}

std::vector<ScoredGeneration> FileScorer::score(const std::vector<ScoreRequest>& requests) {
  std::vector<ScoredGeneration> out;
  out.reserve(requests.size());
  for (const auto& req : requests) {
    auto it = scores_.find(req.id);
    if (it == scores_.end())
      throw ScorerError("score file has no entry for id '" + req.id + "'");
    out.push_back({req.id, it->second.first, it->second.second,
                   score_delta(it->second.first, it->second.second)});
  }
  return out;
}

CommandScorer::CommandScorer(std::string command, std::filesystem::path work_dir)
    : command_(std::move(command)), work_dir_(std::move(work_dir)) {
  std::filesystem::create_directories(work_dir_);
}

std::vector<ScoredGeneration> CommandScorer::score(const std::vector<ScoreRequest>& requests) {
  ++call_count_;
  const auto req_path = work_dir_ / ("scorer_request_" + std::to_string(call_count_) + ".jsonl");
  const auto resp_path = work_dir_ / ("scorer_response_" + std::to_string(call_count_) + ".jsonl");
  {
    std::ofstream out(req_path);
    if (!out) throw ScorerError("cannot write " + req_path.string());
    for (const auto& r : requests) {
      json obj;
      obj["id"] = r.id;
      obj["prompt"] = r.prompt;
      obj["gold"] = r.gold;
      out << obj.dump() << '\n';
    }
  }
  const std::string cmd = command_ + " '" + req_path.string() + "' '" + resp_path.string() + "'";
  const int rc = std::system(cmd.c_str());
  if (rc != 0)
    throw ScorerError("scorer command failed with status " + std::to_string(rc));
  FileScorer reader(resp_path);
  return reader.score(requests);
}

Eigen::VectorXd cluster_scores(const std::vector<ScoredGeneration>& records,
                               const Clustering& clustering, const Corpus& corpus,
                               ClusterScoreDivisor divisor) {
  const int k = clustering.k;
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
  for (const auto& rec : records) {
    const auto idx = corpus.index_of(rec.id);
    const int j = clustering.assignment[static_cast<std::size_t>(idx)];
    sums[j] += rec.delta;
    counts[j] += 1.0;
  }
  Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
  std::vector<double> scored_values;
  for (int j = 0; j < k; ++j) {
    if (counts[j] > 0.0) {
      const double div = divisor == ClusterScoreDivisor::kScoredCount
                             ? counts[j]
                             : static_cast<double>(clustering.cluster_size(j));
      s[j] = sums[j] / div;
      scored_values.push_back(s[j]);
    }
  }
  if (!scored_values.empty()) {
    // neutral score for clusters the iteration never touched
    std::sort(scored_values.begin(), scored_values.end());
    const std::size_t m = scored_values.size();
    const double median = m % 2 == 1 ? scored_values[m / 2]
                                     : 0.5 * (scored_values[m / 2 - 1] + scored_values[m / 2]);
    for (int j = 0; j < k; ++j)
      if (counts[j] == 0.0) s[j] = median;
  }
  return s;
}

ClusterWeights update_weights(const ClusterWeights& prev, const Eigen::VectorXd& scores,
                              const WeightUpdateOptions& options) {
  prev.validate();
  if (scores.size() != prev.weights.size())
    throw DataError("score vector length does not match weight vector");
  const double lo = scores.minCoeff();
  const double hi = scores.maxCoeff();
  Eigen::VectorXd s = scores;
  if (lo <= 0.0) {
    // shift preserves the ordering while making every score positive
    const double eps = 1e-6 * (hi - lo + 1.0);
    s = scores.array() - lo + eps;
  }
  Eigen::VectorXd raw = (s.array() / s.sum()) * prev.weights.array();
  double total = raw.sum();
  if (total <= 0.0) throw DataError("weight update produced a zero vector");
  Eigen::VectorXd w = raw / total;
  if (options.max_change_factor > 0.0) {
    const double f = options.max_change_factor;
    for (Eigen::Index j = 0; j < w.size(); ++j)
      w[j] = std::clamp(w[j], prev.weights[j] / f, prev.weights[j] * f);
    w /= w.sum();
  }
  ClusterWeights out;
  out.weights = std::move(w);
  out.validate();
  return out;
}

std::vector<int> iteration_budgets(int b, int n_iterations) {
  if (n_iterations < 1) throw ConfigError("iteration count must be positive");
  if (b < n_iterations)
    throw ConfigError("budget " + std::to_string(b) + " smaller than iteration count " +
                      std::to_string(n_iterations));
  const int q = b / n_iterations;
  const int r = b % n_iterations;
  std::vector<int> out(static_cast<std::size_t>(n_iterations), q);
  for (int i = 0; i < r; ++i) ++out[static_cast<std::size_t>(i)];
  return out;
}

namespace {

std::string divisor_name(ClusterScoreDivisor d) {
  return d == ClusterScoreDivisor::kScoredCount ? "scored_count" : "full_cluster_size";
}

ClusterScoreDivisor divisor_from_name(const std::string& name) {
  if (name == "scored_count") return ClusterScoreDivisor::kScoredCount;
  if (name == "full_cluster_size") return ClusterScoreDivisor::kFullClusterSize;
  throw ConfigError("unknown cluster-score divisor: " + name);
}

void write_json(const json& obj, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << obj.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json obj;
  try {
    in >> obj;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return obj;
}

void save_config(const IterativeConfig& c, const std::filesystem::path& path) {
  json obj;
  obj["budget"] = c.budget;
  obj["iterations"] = c.iterations;
  obj["seed"] = c.seed;
  obj["with_replacement"] = c.with_replacement;
  obj["divisor"] = divisor_name(c.divisor);
  obj["max_change_factor"] = c.weight_update.max_change_factor;
  obj["score_new_only"] = c.score_new_only;
  write_json(obj, path);
}

IterativeConfig load_config(const std::filesystem::path& path) {
  const json obj = read_json(path);
  IterativeConfig c;
  c.budget = obj.at("budget").get<int>();
  c.iterations = obj.at("iterations").get<int>();
  c.seed = obj.at("seed").get<std::uint64_t>();
  c.with_replacement = obj.at("with_replacement").get<bool>();
  c.divisor = divisor_from_name(obj.at("divisor").get<std::string>());
  c.weight_update.max_change_factor = obj.at("max_change_factor").get<double>();
  c.score_new_only = obj.at("score_new_only").get<bool>();
  return c;
}

void save_record(const IterationRecord& rec, const std::filesystem::path& path) {
  json obj;
  obj["it"] = rec.it;
  obj["budget"] = rec.budget;
  obj["selected_ids"] = rec.selected_ids;
  json scored = json::array();
  for (const auto& s : rec.scored) {
    json e;
    e["id"] = s.id;
    e["gen_score"] = s.gen_score;
    e["gold_score"] = s.gold_score;
    e["delta"] = s.delta;
    scored.push_back(std::move(e));
  }
  obj["scored"] = std::move(scored);
  obj["cluster_scores"] = std::vector<double>(
      rec.cluster_score_values.data(),
      rec.cluster_score_values.data() + rec.cluster_score_values.size());
  obj["weights_after"] = std::vector<double>(
      rec.weights_after.weights.data(),
      rec.weights_after.weights.data() + rec.weights_after.weights.size());
  write_json(obj, path);
}

IterationRecord load_record(const std::filesystem::path& path) {
  const json obj = read_json(path);
  IterationRecord rec;
  rec.it = obj.at("it").get<int>();
  rec.budget = obj.at("budget").get<int>();
  rec.selected_ids = obj.at("selected_ids").get<std::vector<std::string>>();
  for (const auto& e : obj.at("scored")) {
    ScoredGeneration s;
    s.id = e.at("id").get<std::string>();
    s.gen_score = e.at("gen_score").get<double>();
    s.gold_score = e.at("gold_score").get<double>();
    s.delta = e.at("delta").get<double>();
    rec.scored.push_back(std::move(s));
  }
  const auto cs = obj.at("cluster_scores").get<std::vector<double>>();
  rec.cluster_score_values = Eigen::Map<const Eigen::VectorXd>(
      cs.data(), static_cast<Eigen::Index>(cs.size()));
  const auto wa = obj.at("weights_after").get<std::vector<double>>();
  rec.weights_after.weights = Eigen::Map<const Eigen::VectorXd>(
      wa.data(), static_cast<Eigen::Index>(wa.size()));
  return rec;
}

ScoreRequest make_request(const Corpus& corpus, const std::string& id) {
  const auto idx = corpus.index_of(id);
  const auto& text = corpus.text()[static_cast<std::size_t>(idx)];
  return {id, text.value_or(""), ""};
}

IterativeResult run_loop(const Corpus& corpus, const Clustering& clustering,
                         const IterativeConfig& config, Scorer& scorer,
                         const std::filesystem::path& state_dir, int start_it,
                         ClusterWeights weights, std::vector<std::string> selected,
                         std::vector<IterationRecord> records) {
  const auto budgets = iteration_budgets(config.budget, config.iterations);
  std::unordered_set<std::string> selected_set(selected.begin(), selected.end());

  for (int it = start_it; it <= config.iterations; ++it) {
    const int b_it = budgets[static_cast<std::size_t>(it - 1)];

    // restrict each cluster to the not-yet-selected pool (D \ D')
    Clustering avail = clustering;
    if (!config.with_replacement) {
      for (auto& members : avail.members) {
        std::vector<Eigen::Index> left;
        for (Eigen::Index i : members)
          if (!selected_set.count(corpus.id_of(i))) left.push_back(i);
        members = std::move(left);
      }
    }

    // allocation weights: w_j scaled by remaining cluster size, so uniform
    // weights reproduce the static sampler's proportional budgets. The
    // exactly-uniform case goes through the unweighted path so that an
    // N=1 run is bit-identical to static kMQ.
    std::optional<ClusterWeights> alloc;
    const bool uniform =
        (weights.weights.array() == weights.weights[0]).all();
    if (!uniform) {
      ClusterWeights scaled;
      scaled.weights = weights.weights;
      double total = 0.0;
      for (int j = 0; j < clustering.k; ++j) {
        scaled.weights[j] *= static_cast<double>(avail.cluster_size(j));
        total += scaled.weights[j];
      }
      if (total <= 0.0) throw DataError("all clusters exhausted before budget was met");
      scaled.weights /= total;
      // renormalize once more to land exactly on the simplex
      scaled.weights /= scaled.weights.sum();
      alloc = std::move(scaled);
    }

    const BudgetPlan plan =
        allocate_budget(avail, b_it, alloc, config.with_replacement);
    SamplerConfig sampler_config;
    sampler_config.replacement = config.with_replacement;
    sampler_config.seed = config.seed;
    sampler_config.stream_epoch = static_cast<std::uint64_t>(it - 1);
    const Selection picked = sample_kmq(corpus, avail, plan, sampler_config);

    for (const auto& id : picked.ids) {
      selected.push_back(id);
      selected_set.insert(id);
    }

    IterationRecord rec;
    rec.it = it;
    rec.budget = b_it;
    rec.selected_ids = picked.ids;
    rec.cluster_score_values = Eigen::VectorXd::Zero(clustering.k);
    if (it < config.iterations) {
      // score all of D' so far (or only the newest slice), then reweight
      std::vector<std::string> to_score =
          config.score_new_only ? picked.ids : selected;
      std::sort(to_score.begin(), to_score.end());
      std::vector<ScoreRequest> requests;
      requests.reserve(to_score.size());
      for (const auto& id : to_score) requests.push_back(make_request(corpus, id));
      {
        std::ofstream out(state_dir / ("iter_" + std::to_string(it) + "_requests.jsonl"));
        for (const auto& r : requests) {
          json obj;
          obj["id"] = r.id;
          obj["prompt"] = r.prompt;
          obj["gold"] = r.gold;
          out << obj.dump() << '\n';
        }
      }
      rec.scored = scorer.score(requests);
      for (auto& s : rec.scored) s.delta = score_delta(s.gen_score, s.gold_score);
      rec.cluster_score_values =
          cluster_scores(rec.scored, clustering, corpus, config.divisor);
      weights = update_weights(weights, rec.cluster_score_values, config.weight_update);
    }
    rec.weights_after = weights;
    records.push_back(rec);

    // persist state after every iteration; a run can resume from here
    save_record(rec, state_dir / ("iter_" + std::to_string(it) + ".json"));
    json wobj;
    wobj["weights"] = std::vector<double>(weights.weights.data(),
                                          weights.weights.data() + weights.weights.size());
    write_json(wobj, state_dir / "weights.json");
    Selection cumulative;
    cumulative.ids = selected;
    cumulative.budget = config.budget;
    cumulative.method = "iterative-kmq";
    cumulative.params = {{"iterations", std::to_string(config.iterations)},
                         {"seed", std::to_string(config.seed)},
                         {"with_replacement", config.with_replacement ? "true" : "false"}};
    save_selection(cumulative, state_dir / "selection.json");

    if (config.stop_after > 0 && it >= config.stop_after && it < config.iterations)
      return {cumulative, records, weights};
    if (it == config.iterations) return {cumulative, records, weights};
  }
  throw DataError("iterative loop ended unexpectedly");
}

}  // namespace

IterativeResult run_iterative(const Corpus& corpus, const Clustering& clustering,
                              const IterativeConfig& config, Scorer& scorer,
                              const std::filesystem::path& state_dir) {
  if (config.budget < 1) throw ConfigError("budget must be positive");
  if (!config.with_replacement && config.budget > corpus.size())
    throw DataError("budget exceeds corpus size without replacement");
  std::filesystem::create_directories(state_dir);
  save_config(config, state_dir / "config.json");
  return run_loop(corpus, clustering, config, scorer, state_dir, 1,
                  ClusterWeights::uniform(clustering.k), {}, {});
}

IterativeResult resume(const Corpus& corpus, const Clustering& clustering,
                       Scorer& scorer, const std::filesystem::path& state_dir) {
  IterativeConfig config = load_config(state_dir / "config.json");
  config.stop_after = 0;
  ClusterWeights weights = ClusterWeights::uniform(clustering.k);
  std::vector<std::string> selected;
  std::vector<IterationRecord> records;
  int next_it = 1;
  for (int it = 1; it <= config.iterations; ++it) {
    const auto path = state_dir / ("iter_" + std::to_string(it) + ".json");
    if (!std::filesystem::exists(path)) break;
    IterationRecord rec = load_record(path);
    if (rec.it != it) throw DataError("iteration record mismatch in " + path.string());
    selected.insert(selected.end(), rec.selected_ids.begin(), rec.selected_ids.end());
    weights = rec.weights_after;
    records.push_back(std::move(rec));
    next_it = it + 1;
  }
  if (next_it > config.iterations) {
    // nothing left to do; rebuild the result from state
    IterativeResult result;
    result.selection = load_selection(state_dir / "selection.json");
    result.records = std::move(records);
    result.final_weights = weights;
    return result;
  }
  return run_loop(corpus, clustering, config, scorer, state_dir, next_it,
                  std::move(weights), std::move(selected), std::move(records));
}

}  // namespace kmq
