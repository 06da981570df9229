#include "kmq/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kmq/rng.hpp"

namespace kmq {

ClusterWeights ClusterWeights::uniform(int k) {
  if (k < 1) throw ConfigError("weights need k >= 1");
  ClusterWeights w;
  w.weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  return w;
}

void ClusterWeights::validate() const {
  if (weights.size() == 0) throw DataError("empty cluster weights");
  if ((weights.array() < 0.0).any()) throw DataError("negative cluster weight");
  if (std::abs(weights.sum() - 1.0) > 1e-9)
    throw DataError("cluster weights do not sum to 1");
}

BudgetPlan allocate_budget(const Clustering& clustering, int b,
                           const std::optional<ClusterWeights>& weights,
                           bool with_replacement,
                           const std::optional<std::vector<int>>& capacity) {
  if (b < 1) throw ConfigError("budget must be positive");
  const int k = clustering.k;
  if (weights) {
    weights->validate();
    if (weights->weights.size() != k) throw DataError("weights length does not match k");
  }
  if (capacity && static_cast<int>(capacity->size()) != k)
    throw DataError("capacity length does not match k");

  std::vector<double> share(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j)
    share[static_cast<std::size_t>(j)] =
        weights ? weights->weights[j] : static_cast<double>(clustering.cluster_size(j));

  std::vector<int> cap(static_cast<std::size_t>(k));
  long long total_cap = 0;
  for (int j = 0; j < k; ++j) {
    int c = capacity ? (*capacity)[static_cast<std::size_t>(j)]
                     : static_cast<int>(clustering.cluster_size(j));
    if (with_replacement) c = b;  // no cap
    cap[static_cast<std::size_t>(j)] = c;
    total_cap += c;
  }
  if (total_cap < b)
    throw DataError("budget " + std::to_string(b) + " exceeds available points (" +
                    std::to_string(total_cap) + ") without replacement");

  BudgetPlan plan;
  plan.total = b;
  plan.per_cluster.assign(static_cast<std::size_t>(k), 0);

  // Largest-remainder apportionment over the active (uncapped) clusters;
  // clusters whose target meets their cap are fixed at the cap and the
  // remainder is re-apportioned until every target fits.
  std::vector<int> active(static_cast<std::size_t>(k));
  std::iota(active.begin(), active.end(), 0);
  int remaining = b;
  while (true) {
    double share_sum = 0.0;
    for (int j : active) share_sum += share[static_cast<std::size_t>(j)];
    if (share_sum <= 0.0) {
      if (remaining > 0 && active.empty())
        throw DataError("all clusters capped with budget remaining");
      // zero-weight leftovers: spread uniformly over active clusters
      for (int j : active) share[static_cast<std::size_t>(j)] = 1.0;
      share_sum = static_cast<double>(active.size());
    }
    std::vector<int> capped;
    std::vector<int> still_active;
    for (int j : active) {
      const double target =
          static_cast<double>(remaining) * share[static_cast<std::size_t>(j)] / share_sum;
      if (target >= static_cast<double>(cap[static_cast<std::size_t>(j)]))
        capped.push_back(j);
      else
        still_active.push_back(j);
    }
    if (capped.empty()) {
      // integerize by largest remainder, ties to lowest cluster index
      std::vector<std::pair<double, int>> rema;
      int assigned = 0;
      for (int j : active) {
        const double target =
            static_cast<double>(remaining) * share[static_cast<std::size_t>(j)] / share_sum;
        const int fl = static_cast<int>(std::floor(target));
        plan.per_cluster[static_cast<std::size_t>(j)] += fl;
        assigned += fl;
        rema.emplace_back(target - static_cast<double>(fl), j);
      }
      std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      int leftover = remaining - assigned;
      for (std::size_t p = 0; leftover > 0; p = (p + 1) % rema.size()) {
        const int j = rema[p].second;
        if (plan.per_cluster[static_cast<std::size_t>(j)] < cap[static_cast<std::size_t>(j)]) {
          ++plan.per_cluster[static_cast<std::size_t>(j)];
          --leftover;
        } else if (p + 1 == rema.size()) {
          bool any_room = false;
          for (int q : active)
            if (plan.per_cluster[static_cast<std::size_t>(q)] < cap[static_cast<std::size_t>(q)])
              any_room = true;
          if (!any_room) throw DataError("all clusters capped with budget remaining");
        }
      }
      break;
    }
    for (int j : capped) {
      plan.per_cluster[static_cast<std::size_t>(j)] = cap[static_cast<std::size_t>(j)];
      remaining -= cap[static_cast<std::size_t>(j)];
    }
    active = std::move(still_active);
    if (remaining == 0) break;
    if (active.empty()) throw DataError("all clusters capped with budget remaining");
  }
  return plan;
}

namespace {

void check_plan(const Clustering& clustering, const BudgetPlan& plan) {
  if (static_cast<int>(plan.per_cluster.size()) != clustering.k)
    throw DataError("budget plan length does not match k");
  long long sum = 0;
  for (int bj : plan.per_cluster) {
    if (bj < 0) throw DataError("negative per-cluster budget");
    sum += bj;
  }
  if (sum != plan.total) throw DataError("budget plan does not sum to its total");
}

// Successive renormalized weighted draws (without replacement) or plain
// multinomial draws (with replacement) from `pool` with weights `w`.
std::vector<Eigen::Index> weighted_draw(const std::vector<Eigen::Index>& pool,
                                        std::vector<double> w, int count,
                                        bool replacement, Rng& rng) {
  std::vector<Eigen::Index> picked;
  picked.reserve(static_cast<std::size_t>(count));
  std::vector<Eigen::Index> items = pool;
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (int c = 0; c < count; ++c) {
    if (total <= 0.0) throw DataError("no positive-weight items left to draw");
    const double u = rng.next_double() * total;
    double cum = 0.0;
    std::size_t pick = items.size() - 1;
    for (std::size_t i = 0; i < items.size(); ++i) {
      cum += w[i];
      if (cum > u && w[i] > 0.0) {
        pick = i;
        break;
      }
    }
    picked.push_back(items[pick]);
    if (!replacement) {
      total -= w[pick];
      items.erase(items.begin() + static_cast<std::ptrdiff_t>(pick));
      w.erase(w.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  }
  return picked;
}

Selection per_cluster_sample(const Corpus& corpus, const Clustering& clustering,
                             const BudgetPlan& plan, const SamplerConfig& config,
                             bool quality_weighted, const std::string& method) {
  check_plan(clustering, plan);
  Selection sel;
  sel.method = method;
  sel.budget = plan.total;
  for (int j = 0; j < clustering.k; ++j) {
    const int bj = plan.per_cluster[static_cast<std::size_t>(j)];
    if (bj == 0) continue;
    const auto& members = clustering.members[static_cast<std::size_t>(j)];
    if (!config.replacement && bj > static_cast<int>(members.size()))
      throw DataError("cluster " + std::to_string(j) + " budget " + std::to_string(bj) +
                      " exceeds its size " + std::to_string(members.size()));
    std::vector<double> w(members.size(), 1.0);
    if (quality_weighted) {
      double qsum = 0.0;
      for (std::size_t i = 0; i < members.size(); ++i) {
        if (!corpus.has_quality(members[i]))
          throw DataError("missing quality on id '" + corpus.id_of(members[i]) +
                          "' in cluster " + std::to_string(j));
        w[i] = corpus.quality()[members[i]];
        qsum += w[i];
      }
      if (qsum <= 0.0)
        throw DataError("all-zero quality in cluster " + std::to_string(j) +
                        " with positive budget");
    }
    Rng rng = Rng::stream(config.seed, config.stream_epoch, static_cast<std::uint64_t>(j));
    for (Eigen::Index idx : weighted_draw(members, std::move(w), bj, config.replacement, rng))
      sel.ids.push_back(corpus.id_of(idx));
  }
  return sel;
}

}  // namespace

Selection sample_kmq(const Corpus& corpus, const Clustering& clustering,
                     const BudgetPlan& plan, const SamplerConfig& config) {
  return per_cluster_sample(corpus, clustering, plan, config, true, "kmq");
}

Selection sample_km_random(const Corpus& corpus, const Clustering& clustering,
                           const BudgetPlan& plan, const SamplerConfig& config) {
  return per_cluster_sample(corpus, clustering, plan, config, false, "km-random");
}

Selection sample_km_closest(const Corpus& corpus, const Clustering& clustering,
                            const BudgetPlan& plan, const SamplerConfig& config) {
  check_plan(clustering, plan);
  const Eigen::MatrixXd points = corpus.working_points(clustering.metric);
  Selection sel;
  sel.method = "km-closest";
  sel.budget = plan.total;
  for (int j = 0; j < clustering.k; ++j) {
    const int bj = plan.per_cluster[static_cast<std::size_t>(j)];
    if (bj == 0) continue;
    const auto& members = clustering.members[static_cast<std::size_t>(j)];
    if (bj > static_cast<int>(members.size()))
      throw DataError("cluster " + std::to_string(j) + " budget exceeds its size");
    std::vector<std::pair<double, Eigen::Index>> by_dist;
    by_dist.reserve(members.size());
    for (Eigen::Index i : members)
      by_dist.emplace_back((points.col(i) - clustering.centers.col(j)).squaredNorm(), i);
    std::sort(by_dist.begin(), by_dist.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return corpus.id_of(a.second) < corpus.id_of(b.second);
    });
    for (int c = 0; c < bj; ++c)
      sel.ids.push_back(corpus.id_of(by_dist[static_cast<std::size_t>(c)].second));
  }
  return sel;
}

Selection sample_random(const Corpus& corpus, int b, const SamplerConfig& config) {
  if (b < 1) throw ConfigError("budget must be positive");
  if (b > corpus.size())
    throw DataError("budget exceeds corpus size without replacement");
  Rng rng = Rng::stream(config.seed, config.stream_epoch, 0);
  Selection sel;
  sel.method = "random";
  sel.budget = b;
  for (std::size_t i : rng.sample_indices(static_cast<std::size_t>(corpus.size()),
                                          static_cast<std::size_t>(b)))
    sel.ids.push_back(corpus.id_of(static_cast<Eigen::Index>(i)));
  return sel;
}

Selection sample_kcenter(const Corpus& corpus, int b, Metric metric,
                         const SamplerConfig& config) {
  if (b < 1) throw ConfigError("budget must be positive");
  if (b > corpus.size()) throw DataError("budget exceeds corpus size");
  const Eigen::MatrixXd points = corpus.working_points(metric);
  Selection sel;
  sel.method = "kcenter";
  sel.budget = b;
  for (Eigen::Index i :
       kcenter_greedy_indices(points, corpus.order_by_id(), b, config.seed))
    sel.ids.push_back(corpus.id_of(i));
  return sel;
}

}  // namespace kmq
