#include "ope_mnar/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace ope_mnar {

namespace {

EstimatorReport finish(std::string name, std::vector<double> sums, std::size_t n, std::size_t n_effective) {
  EstimatorReport r;
  r.name = std::move(name);
  r.n_effective = n_effective;
  r.per_position = std::move(sums);
  for (auto& v : r.per_position) v /= static_cast<double>(n);
  for (double v : r.per_position) r.total += v;
  return r;
}

void require_nonempty(const LoggedDataset& d) {
  if (d.n() == 0) throw ConfigError("dataset is empty");
}

}  // namespace

ThetaProvider ThetaProvider::true_model(const EnvModel& env) {
  return {Mode::TrueModel, [&env](const Context& x, int k) {
            return marginal_observation_prob(observation_distribution(x, env), k);
          }};
}

ThetaProvider ThetaProvider::heuristic(std::vector<double> per_position) {
  return {Mode::Heuristic, [p = std::move(per_position)](const Context&, int k) {
            return p.at(static_cast<std::size_t>(k));
          }};
}

ThetaProvider ThetaProvider::constant(double value) {
  return {Mode::Custom, [value](const Context&, int) { return value; }};
}

double embedding_weight(const EmbeddingMarginals& target, const EmbeddingMarginals& logging, int e, int k) {
  if (k < 0 || k >= target.ranking_length() || k >= logging.ranking_length())
    throw ConfigError("position index out of range");
  if (e < 0 || e >= target.n_embeddings() || e >= logging.n_embeddings())
    throw ConfigError("embedding index out of range");
  const double num = target(k, e);
  const double den = logging(k, e);
  if (den <= 0.0) {
    if (num > 0.0)
      throw SupportError("logging policy has no mass on embedding " + std::to_string(e) + " at position " +
                         std::to_string(k) + " but the target does");
    return 0.0;
  }
  return num / den;
}

double embedding_weight(const Context&, int e, int k, const PolicyDistribution& target,
                        const PolicyDistribution& logging, const EmbeddingMap& map) {
  if (target.ranking_length() != logging.ranking_length())
    throw ConfigError("target and logging policies have different ranking lengths");
  if (k < 0 || k >= target.ranking_length()) throw ConfigError("position index out of range");
  auto t = marginal_embedding_probs(target.row(k), map);
  auto l = marginal_embedding_probs(logging.row(k), map);
  if (e < 0 || e >= map.n_embeddings()) throw ConfigError("embedding index out of range");
  EmbeddingMarginals tm(1, map.n_embeddings());
  EmbeddingMarginals lm(1, map.n_embeddings());
  for (int j = 0; j < map.n_embeddings(); ++j) {
    tm(0, j) = t[static_cast<std::size_t>(j)];
    lm(0, j) = l[static_cast<std::size_t>(j)];
  }
  return embedding_weight(tm, lm, e, 0);
}

WeightMatrix embedding_weights(const LoggedDataset& d, const MarginalPolicyFn& target_fn,
                               const MarginalPolicyFn& logging_fn) {
  WeightMatrix w{d.n(), d.ranking_length, std::vector<double>(d.n() * static_cast<std::size_t>(d.ranking_length))};
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto& rec = d.records[i];
    auto t = target_fn(rec.context);
    auto l = logging_fn(rec.context);
    for (int k = 0; k < d.ranking_length; ++k)
      w.values[i * static_cast<std::size_t>(d.ranking_length) + static_cast<std::size_t>(k)] =
          embedding_weight(t, l, rec.ranking.embeddings[static_cast<std::size_t>(k)], k);
  }
  return w;
}

WeightMatrix embedding_weights(const LoggedDataset& d, const PolicyFn& target_fn, const PolicyFn& logging_fn) {
  const auto& map = d.map;
  return embedding_weights(
      d, [&](const Context& x) { return embedding_marginals(target_fn(x), map); },
      [&](const Context& x) { return embedding_marginals(logging_fn(x), map); });
}

WeightMatrix observation_propensities(const LoggedDataset& d, const ThetaProvider& theta) {
  WeightMatrix p{d.n(), d.ranking_length, std::vector<double>(d.n() * static_cast<std::size_t>(d.ranking_length))};
  for (std::size_t i = 0; i < d.n(); ++i)
    for (int k = 0; k < d.ranking_length; ++k)
      p.values[i * static_cast<std::size_t>(d.ranking_length) + static_cast<std::size_t>(k)] =
          theta(d.records[i].context, k);
  return p;
}

EstimatorReport mips(const LoggedDataset& d, const WeightMatrix& weights) {
  require_nonempty(d);
  const int K = d.ranking_length;
  std::vector<double> sums(static_cast<std::size_t>(K), 0.0);
  std::size_t n_eff = 0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto& rec = d.records[i];
    for (int k = 0; k < K; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (!rec.observation.mask[uk]) continue;
      sums[uk] += weights(i, k) * *rec.rewards[uk];
      ++n_eff;
    }
  }
  return finish(std::string(kMips), std::move(sums), d.n(), n_eff);
}

EstimatorReport mips(const LoggedDataset& d, const PolicyFn& target_fn, const PolicyFn& logging_fn,
                     const EmbeddingMap& map) {
  if (!(map == d.map)) throw ConfigError("embedding map differs from the dataset's map");
  return mips(d, embedding_weights(d, target_fn, logging_fn));
}

EstimatorReport mips_roips(const LoggedDataset& d, const WeightMatrix& weights, const WeightMatrix& propensities) {
  require_nonempty(d);
  const int K = d.ranking_length;
  std::vector<double> sums(static_cast<std::size_t>(K), 0.0);
  std::size_t n_eff = 0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto& rec = d.records[i];
    for (int k = 0; k < K; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (!rec.observation.mask[uk]) continue;
      const double theta = propensities(i, k);
      if (!(theta > 0.0) || theta > 1.0 + 1e-12 || !std::isfinite(theta))
        throw PropensityError("observation propensity " + std::to_string(theta) + " at record " +
                              std::to_string(i) + ", position " + std::to_string(k) + " is outside (0, 1]");
      sums[uk] += weights(i, k) * *rec.rewards[uk] / theta;
      ++n_eff;
    }
  }
  return finish("mips-roips", std::move(sums), d.n(), n_eff);
}

EstimatorReport mips_roips(const LoggedDataset& d, const PolicyFn& target_fn, const PolicyFn& logging_fn,
                           const EmbeddingMap& map, const ThetaProvider& theta) {
  if (!(map == d.map)) throw ConfigError("embedding map differs from the dataset's map");
  auto report = mips_roips(d, embedding_weights(d, target_fn, logging_fn), observation_propensities(d, theta));
  report.name = theta.mode == ThetaProvider::Mode::TrueModel   ? std::string(kMipsTrueRoips)
                : theta.mode == ThetaProvider::Mode::Heuristic ? std::string(kMipsHeuristicRoips)
                                                               : "mips-roips";
  return report;
}

std::vector<double> heuristic_theta(const LoggedDataset& d, bool apply_floor) {
  require_nonempty(d);
  const auto K = static_cast<std::size_t>(d.ranking_length);
  std::vector<double> rate(K, 0.0);
  for (const auto& rec : d.records)
    for (std::size_t k = 0; k < K; ++k)
      if (rec.observation.mask[k]) rate[k] += 1.0;
  const double n = static_cast<double>(d.n());
  for (auto& r : rate) {
    r /= n;
    if (apply_floor) r = std::max(r, 1.0 / n);
  }
  return rate;
}

EstimatorReport dm_value(const LoggedDataset& d, const MarginalPolicyFn& target_fn, const RewardModel& reward_model) {
  require_nonempty(d);
  const int K = d.ranking_length;
  const int E = d.map.n_embeddings();
  std::vector<double> sums(static_cast<std::size_t>(K), 0.0);
  for (const auto& rec : d.records) {
    auto pi = target_fn(rec.context);
    for (int k = 0; k < K; ++k)
      for (int e = 0; e < E; ++e) {
        double p = pi(k, e);
        if (p != 0.0) sums[static_cast<std::size_t>(k)] += p * reward_model(rec.context, e, k);
      }
  }
  return finish(std::string(kDmFm), std::move(sums), d.n(), 0);
}

EstimatorReport dm_value(const LoggedDataset& d, const PolicyFn& target_fn, const EmbeddingMap& map,
                         const RewardModel& reward_model) {
  return dm_value(
      d, [&](const Context& x) { return embedding_marginals(target_fn(x), map); }, reward_model);
}

}  // namespace ope_mnar
