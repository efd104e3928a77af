#pragma once

// Seed-replicated experiments, the MSE = bias^2 + variance decomposition and
// the observation-bias sweep.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ope_mnar/estimators.hpp"
#include "ope_mnar/fm.hpp"
#include "ope_mnar/synthetic_env.hpp"

namespace ope_mnar {

struct SweepConfig {
  /// Environment template; its alpha is replaced by each swept value.
  EnvParams env;
  std::vector<double> alphas{0.0, 1.0, 2.0, 3.0};
  std::size_t n = 1000;
  std::size_t n_seeds = 100;
  std::size_t n_mc = 100000;
  std::vector<std::string> estimators{std::string(kDmFm), std::string(kMips), std::string(kMipsTrueRoips),
                                      std::string(kMipsHeuristicRoips)};
  FmTrainConfig fm;
  /// Train the reward model with the heuristic propensities instead of the
  /// true observation marginals.
  bool fm_heuristic_theta = false;
  TargetKind target = TargetKind::EpsilonGreedy;
  /// Redraw the environment parameters for every seed.
  bool resample_env = false;
  std::uint64_t eval_seed = 0;
  /// Worker cap; 0 means OPE_MNAR_THREADS or the hardware concurrency.
  int threads = 0;

  void validate() const;
};

struct MseDecomposition {
  double mse = 0.0;
  double squared_bias = 0.0;
  double variance = 0.0;
};

/// mse = mean (true - v)^2, squared_bias = (true - mean v)^2, variance is
/// the population variance of the estimates.
MseDecomposition mse_decomposition(std::span<const double> estimates, double true_value);

struct ReplicationResult {
  double alpha = 0.0;
  PolicyValue truth;
  /// Per-seed ground truth; only differs from truth.total when the
  /// environment is redrawn per seed.
  std::vector<double> seed_truth;
  std::map<std::string, std::vector<double>> estimates;
};

ReplicationResult run_replications(const SweepConfig& cfg, double alpha);

struct SweepRow {
  double alpha = 0.0;
  std::string estimator;
  double mse = 0.0;
  double squared_bias = 0.0;
  double variance = 0.0;
  double mean_estimate = 0.0;
  double true_value = 0.0;
  std::size_t n_seeds = 0;
  /// Standard error of mean_estimate.
  double std_error = 0.0;
};

struct SweepSummary {
  std::vector<SweepRow> rows;
  /// Monte Carlo standard error of the ground truth, per alpha.
  std::map<double, double> truth_std_error;

  const SweepRow* find(double alpha, std::string_view estimator) const;
};

SweepSummary summarize(const ReplicationResult& rep, const std::vector<std::string>& roster);
/// Runs every alpha in order; on_alpha (optional) sees each finished block.
SweepSummary alpha_sweep(const SweepConfig& cfg,
                         const std::function<void(const SweepSummary&)>& on_alpha = nullptr);

/// Worker count from OPE_MNAR_THREADS, falling back to the hardware.
int worker_count(int requested);

}  // namespace ope_mnar
