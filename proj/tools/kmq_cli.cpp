// kmq: diversity-and-quality subset selection for embedded instruction
// corpora. Subcommands: cluster, diagnose, sample, iterate, simulate, resume.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "kmq/clustering.hpp"
#include "kmq/diagnostics.hpp"
#include "kmq/io.hpp"
#include "kmq/iterative.hpp"
#include "kmq/sampling.hpp"
#include "kmq/simulate.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 42;
  std::string metric = "euclidean_on_normalized";
  std::string format = "jsonl";
  int threads = 0;
};

kmq::Corpus load(const std::string& path, const GlobalOpts& g) {
  return kmq::load_corpus(path, kmq::format_from_name(g.format));
}

std::map<std::string, std::string> base_params(const GlobalOpts& g,
                                               const std::string& corpus_path) {
  return {{"seed", std::to_string(g.seed)},
          {"metric", g.metric},
          {"corpus_hash", kmq::content_hash(corpus_path)}};
}

kmq::Corpus maybe_attach_quality(kmq::Corpus corpus, const std::string& quality_file) {
  if (quality_file.empty()) return corpus;
  std::ifstream in(quality_file);
  if (!in) throw kmq::DataError("cannot open quality file " + quality_file);
  json obj;
  try {
    in >> obj;
  } catch (const json::exception& e) {
    throw kmq::DataError(quality_file + ": " + e.what());
  }
  std::map<std::string, double> scores;
  for (const auto& [id, value] : obj.items()) scores[id] = value.get<double>();
  return corpus.with_scores(scores);
}

std::vector<int> parse_int_list(const std::string& csv, const std::string& what) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stoi(tok));
    } catch (...) {
      throw kmq::ConfigError("bad " + what + " entry: '" + tok + "'");
    }
  }
  if (out.empty()) throw kmq::ConfigError(what + " list is empty");
  return out;
}

std::vector<double> parse_double_list(const std::string& csv, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (...) {
      throw kmq::ConfigError("bad " + what + " entry: '" + tok + "'");
    }
  }
  return out;
}

void print_cluster_summary(const kmq::Clustering& c) {
  std::vector<std::size_t> sizes;
  for (int j = 0; j < c.k; ++j) sizes.push_back(c.cluster_size(j));
  std::sort(sizes.begin(), sizes.end());
  std::cout << "k=" << c.k << "  kmeans_objective=" << c.kmeans_objective
            << "  kcenter_objective=" << c.kcenter_objective << "\n";
  if (c.k <= 16) {
    std::cout << "cluster sizes:";
    for (int j = 0; j < c.k; ++j) std::cout << ' ' << c.cluster_size(j);
    std::cout << "\n";
  } else {
    std::cout << "cluster sizes: min=" << sizes.front()
              << " median=" << sizes[sizes.size() / 2] << " max=" << sizes.back() << "\n";
  }
}

std::unique_ptr<kmq::Scorer> make_scorer(const std::string& spec,
                                         const kmq::Clustering& clustering,
                                         const kmq::Corpus& corpus,
                                         const std::string& mock_deltas,
                                         double mock_noise, std::uint64_t mock_seed,
                                         const fs::path& state_dir) {
  if (spec == "mock") {
    auto deltas = parse_double_list(mock_deltas.empty() ? "0.0" : mock_deltas, "mock deltas");
    return std::make_unique<kmq::MockScorer>(clustering, corpus, deltas, mock_noise, mock_seed);
  }
  if (spec.rfind("file:", 0) == 0)
    return std::make_unique<kmq::FileScorer>(spec.substr(5));
  if (spec.rfind("command:", 0) == 0)
    return std::make_unique<kmq::CommandScorer>(spec.substr(8), state_dir);
  throw kmq::ConfigError("unknown scorer spec '" + spec + "' (mock|file:PATH|command:CMD)");
}

fs::path resolve_state_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("KMQ_STATE_DIR")) return env;
  return "state";
}

int run(int argc, char** argv) {
  CLI::App app{"diversity- and quality-aware instruction data selection"};
  app.require_subcommand(1);
  GlobalOpts g;
  app.add_option("--seed", g.seed, "global random seed")->capture_default_str();
  app.add_option("--metric", g.metric, "euclidean|euclidean_on_normalized")
      ->capture_default_str();
  app.add_option("--format", g.format, "corpus format: jsonl|binary")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (0 = library default)");

  // ---- cluster ----
  auto* cluster = app.add_subcommand("cluster", "partition a corpus (k-means or k-center)");
  std::string c_corpus, c_out = "clustering.json", c_algo = "kmeans";
  int c_k = 0, c_max_iters = 100, c_restarts = 1;
  double c_tol = 1e-4;
  cluster->add_option("--corpus", c_corpus)->required();
  cluster->add_option("--k", c_k)->required();
  cluster->add_option("--algo", c_algo, "kmeans|kcenter")->capture_default_str();
  cluster->add_option("--max-iters", c_max_iters)->capture_default_str();
  cluster->add_option("--tol", c_tol)->capture_default_str();
  cluster->add_option("--restarts", c_restarts)->capture_default_str();
  cluster->add_option("--out", c_out)->capture_default_str();

  // ---- diagnose ----
  auto* diagnose = app.add_subcommand("diagnose", "silhouette / elbow / quality sweep over k");
  std::string d_corpus, d_ks, d_out = "diagnose.json", d_csv;
  int d_sample = 10000;
  double d_threshold = 0.3;
  diagnose->add_option("--corpus", d_corpus)->required();
  diagnose->add_option("--ks", d_ks, "comma-separated, strictly increasing")->required();
  diagnose->add_option("--sample", d_sample, "silhouette sample size (0 = exact)")
      ->capture_default_str();
  diagnose->add_option("--threshold", d_threshold, "low-quality cluster threshold")
      ->capture_default_str();
  diagnose->add_option("--out", d_out)->capture_default_str();
  diagnose->add_option("--csv", d_csv, "optional CSV of (k, objective, silhouette)");

  // ---- sample ----
  auto* sample = app.add_subcommand("sample", "select a subset with a static sampler");
  std::string s_corpus, s_method = "kmq", s_out = "selection.json", s_quality_file,
              s_clustering;
  int s_budget = 0, s_k = 0;
  bool s_with_replacement = false;
  sample->add_option("--corpus", s_corpus)->required();
  sample->add_option("--method", s_method, "random|kcenter|km-closest|km-random|kmq")
      ->capture_default_str();
  sample->add_option("--budget", s_budget, "selection size (default 5% of corpus)");
  sample->add_option("--k", s_k, "cluster count for cluster-based methods");
  sample->add_flag("--with-replacement", s_with_replacement);
  sample->add_option("--quality-file", s_quality_file, "JSON map id -> quality");
  sample->add_option("--clustering", s_clustering, "reuse a persisted clustering");
  sample->add_option("--out", s_out)->capture_default_str();

  // ---- iterate ----
  auto* iterate = app.add_subcommand("iterate", "iterative cluster-reweighting selection");
  std::string i_corpus, i_out = "selection.json", i_scorer = "mock", i_state_dir,
              i_quality_file, i_mock_deltas, i_divisor = "scored_count";
  int i_budget = 0, i_k = 0, i_iterations = 3;
  bool i_with_replacement = false, i_score_new_only = false;
  double i_mock_noise = 0.0, i_max_change = 4.0;
  std::uint64_t i_mock_seed = 0;
  iterate->add_option("--corpus", i_corpus)->required();
  iterate->add_option("--budget", i_budget, "total budget (default 5% of corpus)");
  iterate->add_option("--k", i_k)->required();
  iterate->add_option("--iterations", i_iterations)->capture_default_str();
  iterate->add_option("--scorer", i_scorer, "mock|file:PATH|command:CMD")
      ->capture_default_str();
  iterate->add_option("--state-dir", i_state_dir, "default $KMQ_STATE_DIR or ./state");
  iterate->add_option("--quality-file", i_quality_file);
  iterate->add_option("--mock-deltas", i_mock_deltas, "per-cluster deltas for the mock scorer");
  iterate->add_option("--mock-noise", i_mock_noise)->capture_default_str();
  iterate->add_option("--mock-seed", i_mock_seed)->capture_default_str();
  iterate->add_option("--divisor", i_divisor, "scored_count|full_cluster_size")
      ->capture_default_str();
  iterate->add_flag("--with-replacement", i_with_replacement);
  iterate->add_flag("--score-new-only", i_score_new_only);
  iterate->add_option("--max-change-factor", i_max_change,
                      "per-iteration weight change cap (<=0 disables)")
      ->capture_default_str();
  iterate->add_option("--out", i_out)->capture_default_str();

  // ---- resume ----
  auto* resume_cmd = app.add_subcommand("resume", "continue an interrupted iterate run");
  std::string r_corpus, r_state_dir, r_scorer = "mock", r_mock_deltas, r_quality_file,
              r_out = "selection.json";
  double r_mock_noise = 0.0;
  std::uint64_t r_mock_seed = 0;
  resume_cmd->add_option("--corpus", r_corpus)->required();
  resume_cmd->add_option("--state-dir", r_state_dir);
  resume_cmd->add_option("--scorer", r_scorer)->capture_default_str();
  resume_cmd->add_option("--quality-file", r_quality_file);
  resume_cmd->add_option("--mock-deltas", r_mock_deltas);
  resume_cmd->add_option("--mock-noise", r_mock_noise);
  resume_cmd->add_option("--mock-seed", r_mock_seed);
  resume_cmd->add_option("--out", r_out)->capture_default_str();

  // ---- simulate ----
  auto* simulate = app.add_subcommand("simulate", "offline end-to-end run on synthetic data");
  std::string m_out = "simulate.json", m_deltas = "1.0,0.1,0.1,0.1", m_state_dir,
              m_quality = "0.8,0.5,0.5,0.5";
  int m_n = 4000, m_dim = 8, m_planted = 4, m_k = 4, m_budget = 0, m_iterations = 3;
  double m_noise = 0.0;
  simulate->add_option("--n", m_n)->capture_default_str();
  simulate->add_option("--dim", m_dim)->capture_default_str();
  simulate->add_option("--planted-clusters", m_planted)->capture_default_str();
  simulate->add_option("--k", m_k)->capture_default_str();
  simulate->add_option("--budget", m_budget, "default 5% of n");
  simulate->add_option("--iterations", m_iterations)->capture_default_str();
  simulate->add_option("--deltas", m_deltas, "per-cluster mock scorer deltas")
      ->capture_default_str();
  simulate->add_option("--noise", m_noise, "mock scorer noise sigma")->capture_default_str();
  simulate->add_option("--cluster-quality", m_quality)->capture_default_str();
  simulate->add_option("--state-dir", m_state_dir);
  simulate->add_option("--out", m_out)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  const kmq::Metric metric = kmq::metric_from_name(g.metric);
  if (g.threads > 0) Eigen::setNbThreads(g.threads);

  if (cluster->parsed()) {
    if (c_algo != "kcenter" && c_algo != "kmeans")
      throw kmq::ConfigError("unknown clustering algorithm: " + c_algo);
    kmq::Corpus corpus = load(c_corpus, g);
    kmq::Clustering clustering =
        c_algo == "kcenter"
            ? kmq::kcenter_greedy(corpus, c_k, metric, g.seed)
            : kmq::kmeans(corpus, c_k, metric,
                          {g.seed, c_max_iters, c_tol, c_restarts});
    kmq::save_clustering(clustering, corpus, c_out);
    print_cluster_summary(clustering);
    return 0;
  }

  if (diagnose->parsed()) {
    kmq::Corpus corpus = load(d_corpus, g);
    const auto ks = parse_int_list(d_ks, "ks");
    const kmq::ElbowCurve curve = elbow_curve(corpus, ks, metric, {g.seed});
    bool has_quality = true;
    for (Eigen::Index i = 0; i < corpus.size() && has_quality; ++i)
      has_quality = corpus.has_quality(i);

    json report;
    report["params"] = base_params(g, d_corpus);
    report["ks"] = json::array();
    std::optional<int> best_k;
    double best_sil = -2.0;
    for (const auto& [k, objective] : curve.points) {
      json entry;
      entry["k"] = k;
      entry["kmeans_objective"] = objective;
      kmq::Clustering clustering = kmq::kmeans(corpus, k, metric, {g.seed});
      std::optional<int> sample_n;
      if (d_sample > 0 && corpus.size() > 20000) sample_n = d_sample;
      const auto sil = kmq::silhouette(corpus, clustering, metric, sample_n, g.seed);
      entry["silhouette"] = sil.mean_score;
      entry["silhouette_display"] = sil.mean_score * 100.0;  // table convention
      entry["silhouette_sample_size"] = sil.sample_size;
      if (has_quality) {
        const auto profile = kmq::quality_profile(corpus, clustering, d_threshold);
        entry["fraction_below_threshold"] = profile.fraction_below;
      }
      if (sil.mean_score > best_sil) {
        best_sil = sil.mean_score;
        best_k = k;
      }
      report["ks"].push_back(std::move(entry));
    }
    if (curve.knee) report["elbow_knee"] = *curve.knee;
    if (best_k) report["silhouette_argmax_k"] = *best_k;
    std::ofstream out(d_out);
    out << report.dump(2) << '\n';
    if (!d_csv.empty()) {
      std::ofstream csv(d_csv);
      csv << "k,kmeans_objective,silhouette\n";
      for (const auto& entry : report["ks"])
        csv << entry["k"].get<int>() << ',' << entry["kmeans_objective"].get<double>()
            << ',' << entry["silhouette"].get<double>() << '\n';
    }
    for (const auto& entry : report["ks"])
      std::cout << "k=" << entry["k"].get<int>()
                << "  objective=" << entry["kmeans_objective"].get<double>()
                << "  silhouette=" << entry["silhouette_display"].get<double>() << "\n";
    if (best_k)
      std::cout << "recommended k (silhouette argmax): " << *best_k << "\n";
    if (curve.knee) std::cout << "elbow knee (max second difference): " << *curve.knee << "\n";
    return 0;
  }

  if (sample->parsed()) {
    kmq::Corpus corpus = maybe_attach_quality(load(s_corpus, g), s_quality_file);
    if (s_budget <= 0)
      s_budget = std::max<int>(1, static_cast<int>(corpus.size() / 20));  // 5%
    kmq::SamplerConfig config;
    config.seed = g.seed;
    config.replacement = s_with_replacement;
    kmq::Selection sel;
    if (s_method == "random") {
      sel = kmq::sample_random(corpus, s_budget, config);
    } else if (s_method == "kcenter") {
      sel = kmq::sample_kcenter(corpus, s_budget, metric, config);
    } else {
      kmq::Clustering clustering =
          !s_clustering.empty()
              ? kmq::load_clustering(corpus, s_clustering)
              : kmq::kmeans(corpus, s_k > 0 ? s_k : throw kmq::ConfigError(
                                                        "--k or --clustering required"),
                            metric, {g.seed});
      const auto plan =
          kmq::allocate_budget(clustering, s_budget, std::nullopt, s_with_replacement);
      if (s_method == "kmq")
        sel = kmq::sample_kmq(corpus, clustering, plan, config);
      else if (s_method == "km-random")
        sel = kmq::sample_km_random(corpus, clustering, plan, config);
      else if (s_method == "km-closest")
        sel = kmq::sample_km_closest(corpus, clustering, plan, config);
      else
        throw kmq::ConfigError("unknown sampling method: " + s_method);
    }
    sel.params = base_params(g, s_corpus);
    sel.params["with_replacement"] = s_with_replacement ? "true" : "false";
    if (s_k > 0) sel.params["k"] = std::to_string(s_k);
    kmq::save_selection(sel, s_out);
    std::cout << "selected " << sel.ids.size() << " of " << corpus.size() << " (method "
              << sel.method << ") -> " << s_out << "\n";
    return 0;
  }

  if (iterate->parsed()) {
    kmq::Corpus corpus = maybe_attach_quality(load(i_corpus, g), i_quality_file);
    if (i_budget <= 0)
      i_budget = std::max<int>(1, static_cast<int>(corpus.size() / 20));  // 5%
    const fs::path state_dir = resolve_state_dir(i_state_dir);
    fs::create_directories(state_dir);
    kmq::Clustering clustering = kmq::kmeans(corpus, i_k, metric, {g.seed});
    kmq::save_clustering(clustering, corpus, state_dir / "clustering.json");
    auto scorer = make_scorer(i_scorer, clustering, corpus, i_mock_deltas, i_mock_noise,
                              i_mock_seed, state_dir);
    kmq::IterativeConfig config;
    config.budget = i_budget;
    config.iterations = i_iterations;
    config.seed = g.seed;
    config.with_replacement = i_with_replacement;
    config.divisor = i_divisor == "full_cluster_size"
                         ? kmq::ClusterScoreDivisor::kFullClusterSize
                         : kmq::ClusterScoreDivisor::kScoredCount;
    config.weight_update.max_change_factor = i_max_change;
    config.score_new_only = i_score_new_only;
    auto result = kmq::run_iterative(corpus, clustering, config, *scorer, state_dir);
    result.selection.params = base_params(g, i_corpus);
    result.selection.params["k"] = std::to_string(i_k);
    result.selection.params["iterations"] = std::to_string(i_iterations);
    kmq::save_selection(result.selection, i_out);
    std::cout << "selected " << result.selection.ids.size() << " ids over "
              << result.records.size() << " iterations -> " << i_out << "\n";
    return 0;
  }

  if (resume_cmd->parsed()) {
    kmq::Corpus corpus = maybe_attach_quality(load(r_corpus, g), r_quality_file);
    const fs::path state_dir = resolve_state_dir(r_state_dir);
    kmq::Clustering clustering =
        kmq::load_clustering(corpus, state_dir / "clustering.json");
    auto scorer = make_scorer(r_scorer, clustering, corpus, r_mock_deltas, r_mock_noise,
                              r_mock_seed, state_dir);
    auto result = kmq::resume(corpus, clustering, *scorer, state_dir);
    result.selection.params = base_params(g, r_corpus);
    kmq::save_selection(result.selection, r_out);
    std::cout << "resumed; " << result.selection.ids.size() << " ids selected -> "
              << r_out << "\n";
    return 0;
  }

  if (simulate->parsed()) {
    kmq::SyntheticSpec spec;
    spec.n = m_n;
    spec.dimension = m_dim;
    spec.planted_clusters = m_planted;
    spec.cluster_quality = parse_double_list(m_quality, "cluster quality");
    spec.seed = g.seed;
    kmq::Corpus corpus = kmq::generate_synthetic(spec);
    if (m_budget <= 0) m_budget = std::max(1, m_n / 20);
    const fs::path state_dir =
        m_state_dir.empty() ? fs::path("sim_state") : fs::path(m_state_dir);
    fs::create_directories(state_dir);
    kmq::Clustering clustering = kmq::kmeans(corpus, m_k, metric, {g.seed});
    kmq::MockScorer scorer(clustering, corpus, parse_double_list(m_deltas, "deltas"),
                           m_noise, g.seed);
    kmq::IterativeConfig config;
    config.budget = m_budget;
    config.iterations = m_iterations;
    config.seed = g.seed;
    auto result = kmq::run_iterative(corpus, clustering, config, scorer, state_dir);

    json report;
    report["params"] = {{"seed", std::to_string(g.seed)},
                        {"n", std::to_string(m_n)},
                        {"k", std::to_string(m_k)},
                        {"budget", std::to_string(m_budget)},
                        {"iterations", std::to_string(m_iterations)}};
    json trajectory = json::array();
    std::vector<int> selected_per_cluster(static_cast<std::size_t>(m_k), 0);
    json cumulative = json::array();
    for (const auto& rec : result.records) {
      trajectory.push_back(std::vector<double>(
          rec.weights_after.weights.data(),
          rec.weights_after.weights.data() + rec.weights_after.weights.size()));
      for (const auto& id : rec.selected_ids) {
        const auto idx = corpus.index_of(id);
        ++selected_per_cluster[static_cast<std::size_t>(
            clustering.assignment[static_cast<std::size_t>(idx)])];
      }
      int total = 0;
      for (int c : selected_per_cluster) total += c;
      cumulative.push_back(total);
    }
    report["weight_trajectory"] = std::move(trajectory);
    report["cumulative_selected"] = std::move(cumulative);
    report["selected_per_cluster"] = selected_per_cluster;
    json shares = json::array();
    for (int j = 0; j < m_k; ++j)
      shares.push_back(static_cast<double>(selected_per_cluster[static_cast<std::size_t>(j)]) /
                       static_cast<double>(m_budget));
    report["selection_shares"] = std::move(shares);
    std::ofstream out(m_out);
    out << report.dump(2) << '\n';

    std::cout << "iteration  weights\n";
    for (std::size_t t = 0; t < result.records.size(); ++t) {
      std::cout << "  " << (t + 1) << "        ";
      const auto& w = result.records[t].weights_after.weights;
      for (Eigen::Index j = 0; j < w.size(); ++j) std::cout << ' ' << w[j];
      std::cout << "\n";
    }
    std::cout << "per-cluster selected:";
    for (int c : selected_per_cluster) std::cout << ' ' << c;
    std::cout << "\nreport -> " << m_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const kmq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const kmq::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const kmq::ScorerError& e) {
    std::cerr << "scorer error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
