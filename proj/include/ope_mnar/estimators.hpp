#pragma once

// Off-policy estimators for position-wise ranking value under missing
// rewards: marginalized IPS, its reward-observation-reweighted variant and
// the direct method over a learned reward model.

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "ope_mnar/core.hpp"
#include "ope_mnar/synthetic_env.hpp"

namespace ope_mnar {

inline constexpr std::string_view kDmFm = "dm-fm";
inline constexpr std::string_view kMips = "mips";
inline constexpr std::string_view kMipsTrueRoips = "mips-true-roips";
inline constexpr std::string_view kMipsHeuristicRoips = "mips-heuristic-roips";

struct EstimatorReport {
  std::string name;
  double total = 0.0;
  std::vector<double> per_position;
  /// Number of observed (record, position) pairs that contributed.
  std::size_t n_effective = 0;
};

/// Observation propensity theta(o_k = 1 | x) used to reweight observed
/// rewards.
struct ThetaProvider {
  enum class Mode { TrueModel, Heuristic, Custom };

  Mode mode = Mode::Custom;
  std::function<double(const Context&, int)> lookup;

  double operator()(const Context& x, int k) const { return lookup(x, k); }

  /// Marginal of the environment's observation model.
  static ThetaProvider true_model(const EnvModel& env);
  /// Context-free per-position rates, e.g. from heuristic_theta.
  static ThetaProvider heuristic(std::vector<double> per_position);
  static ThetaProvider constant(double value);
};

/// pi(e|x) / pi_0(e|x) at position k.
double embedding_weight(const Context& x, int e, int k, const PolicyDistribution& target,
                        const PolicyDistribution& logging, const EmbeddingMap& map);

/// Same ratio from precomputed marginals.
double embedding_weight(const EmbeddingMarginals& target, const EmbeddingMarginals& logging, int e, int k);

/// Row-major n x K matrix of w(x_i, e_{a_{i,k}}).
struct WeightMatrix {
  std::size_t n = 0;
  int ranking_length = 0;
  std::vector<double> values;

  double operator()(std::size_t i, int k) const {
    return values[i * static_cast<std::size_t>(ranking_length) + static_cast<std::size_t>(k)];
  }
};

WeightMatrix embedding_weights(const LoggedDataset& d, const PolicyFn& target_fn, const PolicyFn& logging_fn);
WeightMatrix embedding_weights(const LoggedDataset& d, const MarginalPolicyFn& target_fn,
                               const MarginalPolicyFn& logging_fn);

/// theta(o_k | x_i) for every record and position, n x K.
WeightMatrix observation_propensities(const LoggedDataset& d, const ThetaProvider& theta);

EstimatorReport mips(const LoggedDataset& d, const PolicyFn& target_fn, const PolicyFn& logging_fn,
                     const EmbeddingMap& map);
EstimatorReport mips(const LoggedDataset& d, const WeightMatrix& weights);

EstimatorReport mips_roips(const LoggedDataset& d, const PolicyFn& target_fn, const PolicyFn& logging_fn,
                           const EmbeddingMap& map, const ThetaProvider& theta);
EstimatorReport mips_roips(const LoggedDataset& d, const WeightMatrix& weights, const WeightMatrix& propensities);

/// Per-position fraction of records with o_k = 1. With apply_floor the
/// result is clipped below at 1/n.
std::vector<double> heuristic_theta(const LoggedDataset& d, bool apply_floor = true);

using RewardModel = std::function<double(const Context&, int embedding, int position)>;

EstimatorReport dm_value(const LoggedDataset& d, const PolicyFn& target_fn, const EmbeddingMap& map,
                         const RewardModel& reward_model);
EstimatorReport dm_value(const LoggedDataset& d, const MarginalPolicyFn& target_fn, const RewardModel& reward_model);

}  // namespace ope_mnar
