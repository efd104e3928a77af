#include "ope_mnar/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ope_mnar {

EmbeddingMap::EmbeddingMap(std::vector<int> assignment, int n_embeddings)
    : assignment_(std::move(assignment)), n_embeddings_(n_embeddings) {
  if (n_embeddings_ < 1) throw ConfigError("embedding map needs at least one embedding");
  if (static_cast<int>(assignment_.size()) < n_embeddings_)
    throw ConfigError("embedding map needs at least as many actions as embeddings");
  counts_.assign(static_cast<std::size_t>(n_embeddings_), 0);
  members_.resize(static_cast<std::size_t>(n_embeddings_));
  for (std::size_t a = 0; a < assignment_.size(); ++a) {
    int e = assignment_[a];
    if (e < 0 || e >= n_embeddings_)
      throw ConfigError("embedding index " + std::to_string(e) + " out of range");
    ++counts_[static_cast<std::size_t>(e)];
    members_[static_cast<std::size_t>(e)].push_back(static_cast<int>(a));
  }
  for (int e = 0; e < n_embeddings_; ++e) {
    if (counts_[static_cast<std::size_t>(e)] == 0)
      throw ConfigError("embedding " + std::to_string(e) + " has no actions");
  }
}

RankingAction RankingAction::from_actions(std::vector<int> actions, const EmbeddingMap& map) {
  RankingAction r;
  r.embeddings.reserve(actions.size());
  for (int a : actions) {
    if (a < 0 || a >= map.n_actions())
      throw ConfigError("action index " + std::to_string(a) + " out of range");
    r.embeddings.push_back(map[static_cast<std::size_t>(a)]);
  }
  r.actions = std::move(actions);
  return r;
}

int ObservationVector::count() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

PolicyDistribution::PolicyDistribution(int ranking_length, int n_actions)
    : ranking_length_(ranking_length),
      n_actions_(n_actions),
      probs_(static_cast<std::size_t>(ranking_length) * n_actions, 0.0) {}

void PolicyDistribution::check(double tol) const {
  for (int k = 0; k < ranking_length_; ++k) {
    auto r = row(k);
    double total = 0.0;
    for (double p : r) {
      if (!(p >= 0.0)) throw ConfigError("policy row " + std::to_string(k) + " has a negative entry");
      total += p;
    }
    if (std::abs(total - 1.0) > tol)
      throw ConfigError("policy row " + std::to_string(k) + " sums to " + std::to_string(total));
  }
}

std::vector<double> marginal_embedding_probs(std::span<const double> row, const EmbeddingMap& map) {
  if (static_cast<int>(row.size()) != map.n_actions())
    throw ConfigError("policy row has " + std::to_string(row.size()) + " actions, embedding map has " +
                      std::to_string(map.n_actions()));
  std::vector<double> out(static_cast<std::size_t>(map.n_embeddings()), 0.0);
  for (std::size_t a = 0; a < row.size(); ++a) out[static_cast<std::size_t>(map[a])] += row[a];
  return out;
}

EmbeddingMarginals embedding_marginals(const PolicyDistribution& policy, const EmbeddingMap& map) {
  EmbeddingMarginals m(policy.ranking_length(), map.n_embeddings());
  for (int k = 0; k < policy.ranking_length(); ++k) {
    auto marg = marginal_embedding_probs(policy.row(k), map);
    for (int e = 0; e < map.n_embeddings(); ++e) m(k, e) = marg[static_cast<std::size_t>(e)];
  }
  return m;
}

ValidationReport validate_dataset(const LoggedDataset& d) {
  ValidationReport report;
  const auto K = static_cast<std::size_t>(d.ranking_length);
  const auto dx = static_cast<std::size_t>(d.d_x);
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const auto& rec = d.records[i];
    auto fail = [&](std::string rule) { report.violations.push_back({i, std::move(rule)}); };

    if (rec.context.dim() != dx) fail("context length differs from d_x");
    if (!std::all_of(rec.context.values.begin(), rec.context.values.end(),
                     [](double v) { return std::isfinite(v); }))
      fail("context has a non-finite entry");
    if (rec.ranking.actions.size() != K || rec.ranking.embeddings.size() != K) {
      fail("ranking length differs from K");
      continue;
    }
    if (rec.observation.length() != K) fail("observation mask length differs from K");
    if (rec.rewards.size() != K) fail("reward vector length differs from K");

    for (std::size_t k = 0; k < K; ++k) {
      int a = rec.ranking.actions[k];
      if (a < 0 || a >= d.map.n_actions()) {
        fail("action out of range at position " + std::to_string(k));
      } else if (rec.ranking.embeddings[k] != d.map[static_cast<std::size_t>(a)]) {
        fail("embedding inconsistent with map at position " + std::to_string(k));
      }
    }
    if (rec.observation.length() != K || rec.rewards.size() != K) continue;
    for (std::size_t k = 0; k < K; ++k) {
      bool observed = rec.observation.mask[k];
      bool present = rec.rewards[k].has_value();
      if (present && !observed) fail("reward present but unobserved at position " + std::to_string(k));
      if (!present && observed) fail("reward missing but observed at position " + std::to_string(k));
      if (present && !std::isfinite(*rec.rewards[k]))
        fail("non-finite reward at position " + std::to_string(k));
    }
  }
  return report;
}

}  // namespace ope_mnar
