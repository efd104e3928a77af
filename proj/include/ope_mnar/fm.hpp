#pragma once

// Second-order factorization machine trained with the observation-IPS
// weighted squared loss; serves as the reward model of the direct method.

#include <cstdint>
#include <span>
#include <vector>

#include "ope_mnar/core.hpp"
#include "ope_mnar/estimators.hpp"

namespace ope_mnar {

/// Feature encoding [x | onehot(e) | onehot(k)].
struct FeatureLayout {
  int d_x = 0;
  int n_embeddings = 0;
  int ranking_length = 0;

  int size() const { return d_x + n_embeddings + ranking_length; }
};

std::vector<double> featurize(const Context& x, int e, int k, const FeatureLayout& layout);

struct FmParams {
  double w0 = 0.0;
  std::vector<double> w;
  /// p x rank, row-major.
  std::vector<double> v;
  int rank = 0;

  FmParams() = default;
  FmParams(int p, int rank) : w(static_cast<std::size_t>(p), 0.0), v(static_cast<std::size_t>(p) * rank, 0.0), rank(rank) {}

  int p() const { return static_cast<int>(w.size()); }
  double& factor(int j, int f) { return v[static_cast<std::size_t>(j) * rank + f]; }
  double factor(int j, int f) const { return v[static_cast<std::size_t>(j) * rank + f]; }
  bool finite() const;
};

/// w0 + sum_j w_j z_j + sum_{j<l} <V_j, V_l> z_j z_l, in O(p * rank).
double fm_predict(std::span<const double> z, const FmParams& params);

struct FmTrainConfig {
  int rank = 10;
  double learning_rate = 0.01;
  int epochs = 50;
  double l2 = 1e-4;
  double init_scale = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One observed (record, position) entry of the training objective.
struct FmSample {
  std::vector<double> z;
  double target = 0.0;
  /// 1 / theta(o_k | x).
  double weight = 1.0;
};

std::vector<FmSample> fm_training_samples(const LoggedDataset& d, const ThetaProvider& theta,
                                          const FeatureLayout& layout);

/// sum_s weight_s (target_s - f(z_s))^2 + l2 * (w0^2 + |w|^2 + |V|^2).
double fm_objective(std::span<const FmSample> samples, const FmParams& params, double l2);

/// Analytic gradient of fm_objective, shaped like params.
FmParams fm_objective_gradient(std::span<const FmSample> samples, const FmParams& params, double l2);

FmParams fm_init(int p, const FmTrainConfig& cfg);

struct FmTrainResult {
  FmParams params;
  double initial_loss = 0.0;
  /// Objective value after each epoch.
  std::vector<double> loss_trace;
};

/// SGD over shuffled samples. Each step follows the per-sample gradient of
/// the objective divided by the mean sample weight, which leaves the
/// minimizer unchanged and keeps the step size independent of the
/// propensity scale.
FmTrainResult fm_train(std::span<const FmSample> samples, const FmTrainConfig& cfg);
FmTrainResult fm_train(const LoggedDataset& d, const ThetaProvider& theta, const FmTrainConfig& cfg);

/// Wraps trained parameters as a reward model for dm_value.
RewardModel fm_reward_model(FmParams params, FeatureLayout layout);

}  // namespace ope_mnar
