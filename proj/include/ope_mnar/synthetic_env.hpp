#pragma once

// Synthetic ranking world: expected rewards, logging and target policies,
// the position-biased observation model, dataset sampling and ground truth.

#include <cstdint>
#include <functional>
#include <vector>

#include "ope_mnar/core.hpp"
#include "ope_mnar/rng.hpp"

namespace ope_mnar {

/// Scalar knobs of the synthetic world. Defaults follow the reference setup
/// (five-dimensional contexts, 500 actions in 5 categories, rankings of 5).
struct EnvParams {
  int d_x = 5;
  int n_actions = 500;
  int n_embeddings = 5;
  int ranking_length = 5;
  double position_decay = 0.9;
  double alpha = 0.0;
  double beta = 1.0;
  double epsilon = 0.2;
  double reward_noise = 0.5;
  std::uint64_t env_seed = 12345;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Frozen environment. Immutable after construction.
class EnvModel {
 public:
  /// Draws the embedding map, reward weights and observation weights from
  /// params.env_seed.
  static EnvModel generate(const EnvParams& params);

  /// Explicit parameterization. reward_weights is n_embeddings x d_x,
  /// obs_weights is 2^K x d_x.
  EnvModel(EnvParams params, EmbeddingMap map, std::vector<std::vector<double>> reward_weights,
           std::vector<double> reward_bias, std::vector<std::vector<double>> obs_weights);

  /// Same world, different observation-bias strength.
  EnvModel with_alpha(double alpha) const;

  const EnvParams& params() const { return params_; }
  const EmbeddingMap& map() const { return map_; }
  int d_x() const { return params_.d_x; }
  int n_actions() const { return params_.n_actions; }
  int n_embeddings() const { return params_.n_embeddings; }
  int ranking_length() const { return params_.ranking_length; }
  int n_patterns() const { return 1 << params_.ranking_length; }
  const std::vector<std::vector<double>>& reward_weights() const { return reward_weights_; }
  const std::vector<double>& reward_bias() const { return reward_bias_; }
  const std::vector<std::vector<double>>& obs_weights() const { return obs_weights_; }

 private:
  EnvParams params_;
  EmbeddingMap map_;
  std::vector<std::vector<double>> reward_weights_;
  std::vector<double> reward_bias_;
  std::vector<std::vector<double>> obs_weights_;
};

/// Probability of each observation pattern o in {0,1}^K. Pattern index bit
/// (K-1-k) holds o_k, so position 0 is the leading bit.
struct ObservationDistribution {
  int ranking_length = 0;
  std::vector<double> probs;

  static bool observed(unsigned pattern, int k, int ranking_length) {
    return ((pattern >> (ranking_length - 1 - k)) & 1U) != 0;
  }
};

using PolicyFn = std::function<PolicyDistribution(const Context&)>;
using MarginalPolicyFn = std::function<EmbeddingMarginals(const Context&)>;

/// q_k(x, e) = decay^k * logistic(x . w_e + b_e).
double expected_reward(const Context& x, int e, int k, const EnvModel& env);

/// Expected reward for every (k, e), ranking_length x n_embeddings.
EmbeddingMarginals expected_reward_table(const Context& x, const EnvModel& env);

/// Per-position softmax over actions with logits beta * q_k(x, e_a).
PolicyDistribution logging_policy(const Context& x, const EnvModel& env);
/// Embedding marginals of logging_policy computed in O(K |E|).
EmbeddingMarginals logging_marginals(const Context& x, const EnvModel& env);

/// Per-position epsilon-greedy over q_k(x, e_a); ties go to the lowest action.
PolicyDistribution target_policy(const Context& x, const EnvModel& env);
EmbeddingMarginals target_marginals(const Context& x, const EnvModel& env);

ObservationDistribution observation_distribution(const Context& x, const EnvModel& env);

/// theta(o_k = 1 | x).
double marginal_observation_prob(const ObservationDistribution& dist, int k);

/// Which policy plays the role of the evaluation target.
enum class TargetKind { EpsilonGreedy, Logging };

PolicyFn policy_fn(const EnvModel& env, TargetKind kind);
MarginalPolicyFn marginal_policy_fn(const EnvModel& env, TargetKind kind);
inline PolicyFn logging_policy_fn(const EnvModel& env) {
  return [&env](const Context& x) { return logging_policy(x, env); };
}

/// Draws a standard-normal context.
Context sample_context(const EnvModel& env, Rng& rng);

/// Samples one record given its context, using separate streams for
/// actions, observation patterns and rewards.
LoggedRecord sample_record(const EnvModel& env, Context x, Rng& action_rng, Rng& obs_rng,
                           Rng& reward_rng);

/// n i.i.d. records; deterministic in (env_seed, data_seed).
LoggedDataset sample_dataset(const EnvModel& env, std::size_t n, std::uint64_t data_seed);

/// Identifier of the environment and data seed that produced a dataset.
std::string dataset_fingerprint(const EnvModel& env, std::uint64_t data_seed);

struct PolicyValue {
  double total = 0.0;
  std::vector<double> per_position;
  /// Monte Carlo standard error of total.
  double std_error = 0.0;
};

/// sum_k sum_e pi^(k)(e|x) q_k(x, e) for a single context.
std::vector<double> conditional_policy_value(const Context& x, const EnvModel& env,
                                             const EmbeddingMarginals& target);

/// Ground truth V(pi) by averaging the analytic per-context value over n_mc
/// fresh contexts.
PolicyValue true_policy_value(const EnvModel& env, std::size_t n_mc, std::uint64_t eval_seed,
                              TargetKind target = TargetKind::EpsilonGreedy);
PolicyValue true_policy_value(const EnvModel& env, std::span<const Context> contexts,
                              const MarginalPolicyFn& target);

}  // namespace ope_mnar
