#include "ope_mnar/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ope_mnar/core.hpp"
#include "ope_mnar/estimators.hpp"
#include "ope_mnar/oracle.hpp"
#include "ope_mnar/rng.hpp"

namespace ope_mnar {

namespace {

std::uint64_t instance_seed(const VerifyOptions& opts, std::size_t i) { return derive_seed({opts.seed, i}); }

PropertyResult finish(std::string name, double deviation, double tol, std::string detail) {
  return {std::move(name), deviation <= tol, deviation, tol, std::move(detail)};
}

// Largest per-position |lhs - rhs| over a batch of random instances.
template <class Fn>
double max_deviation(const VerifyOptions& opts, std::optional<double> alpha, Fn per_instance) {
  double worst = 0.0;
  for (std::size_t i = 0; i < opts.instances; ++i) {
    const auto t = random_tiny_instance(instance_seed(opts, i), alpha);
    const auto target = policy_fn(t.env, TargetKind::EpsilonGreedy);
    const auto logging = policy_fn(t.env, TargetKind::Logging);
    auto [lhs, rhs] = per_instance(t, target, logging);
    for (std::size_t k = 0; k < lhs.size(); ++k) {
      double dev = std::abs(lhs[k] - rhs[k]);
      if (!std::isfinite(dev)) dev = std::numeric_limits<double>::infinity();
      worst = std::max(worst, dev);
    }
  }
  return worst;
}

}  // namespace

void VerifyOptions::validate() const {
  if (instances < 1) throw ConfigError("verification needs at least one instance");
  if (mc_seeds < 2) throw ConfigError("monte carlo check needs at least two seeds");
}

PropertyResult check_roips_unbiased(const VerifyOptions& opts) {
  opts.validate();
  double dev = max_deviation(opts, std::nullopt, [](const TinyInstance& t, const PolicyFn& target, const PolicyFn& logging) {
    return std::pair{oracle_expected_value(t, OracleEstimator::MipsTrueRoips, target, logging),
                     tiny_true_value(t, target)};
  });
  return finish("roips-unbiased", dev, kOracleTolerance,
                std::to_string(opts.instances) + " instances: E[mips-true-roips] vs V per position");
}

PropertyResult check_mips_bias_closed_form(const VerifyOptions& opts) {
  opts.validate();
  double dev = max_deviation(opts, std::nullopt, [](const TinyInstance& t, const PolicyFn& target, const PolicyFn& logging) {
    auto expected = oracle_expected_value(t, OracleEstimator::Mips, target, logging);
    auto truth = tiny_true_value(t, target);
    std::vector<double> enumerated(truth.size());
    for (std::size_t k = 0; k < truth.size(); ++k) enumerated[k] = truth[k] - expected[k];
    return std::pair{enumerated, mips_bias_closed_form(t, target)};
  });
  return finish("mips-bias-closed-form", dev, kOracleTolerance,
                std::to_string(opts.instances) + " instances: V - E[mips] vs E[q (1 - theta_k)] per position");
}

PropertyResult check_full_observation(const VerifyOptions& opts) {
  opts.validate();
  double dev = max_deviation(opts, 0.0, [](const TinyInstance& t, const PolicyFn& target, const PolicyFn& logging) {
    return std::pair{oracle_expected_value(t, OracleEstimator::Mips, target, logging), tiny_true_value(t, target)};
  });
  return finish("mips-unbiased-at-alpha-0", dev, kOracleTolerance,
                std::to_string(opts.instances) + " instances at alpha = 0: E[mips] vs V per position");
}

PropertyResult check_monte_carlo(const VerifyOptions& opts) {
  opts.validate();
  const auto t = random_tiny_instance(instance_seed(opts, 0x3c), 2.0);
  const auto target = policy_fn(t.env, TargetKind::EpsilonGreedy);
  const auto logging = policy_fn(t.env, TargetKind::Logging);
  const auto expected = oracle_expected_value(t, OracleEstimator::Mips, target, logging);
  double expected_total = 0.0;
  for (double v : expected) expected_total += v;

  const auto target_m = marginal_policy_fn(t.env, TargetKind::EpsilonGreedy);
  const auto logging_m = marginal_policy_fn(t.env, TargetKind::Logging);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t s = 0; s < opts.mc_seeds; ++s) {
    const auto d = sample_tiny_dataset(t, 1, s);
    const double v = mips(d, embedding_weights(d, target_m, logging_m)).total;
    sum += v;
    sum_sq += v * v;
  }
  const double m = static_cast<double>(opts.mc_seeds);
  const double mean = sum / m;
  const double se = std::sqrt(std::max(0.0, (sum_sq - m * mean * mean) / (m - 1.0)) / m);
  std::ostringstream detail;
  detail << opts.mc_seeds << " single-record datasets: mean " << mean << ", exact " << expected_total
         << ", standard error " << se;
  return finish("mips-monte-carlo", std::abs(mean - expected_total), kMonteCarloSigmas * se, detail.str());
}

PropertyResult check_heuristic_floor(const VerifyOptions& opts) {
  opts.validate();
  double worst = 0.0;
  bool ok = true;
  std::string detail = "datasets with one never-observed position";
  const std::size_t n_cases = std::min<std::size_t>(opts.instances, 20);
  for (std::size_t i = 0; i < n_cases; ++i) {
    const auto t = random_tiny_instance(instance_seed(opts, 0x10000 + i));
    auto d = sample_tiny_dataset(t, 50, i);
    for (auto& rec : d.records) {
      rec.observation.mask[0] = false;
      rec.rewards[0].reset();
    }
    const auto theta = heuristic_theta(d, !opts.disable_theta_floor);
    for (double th : theta) {
      if (!(th > 0.0 && th <= 1.0)) {
        ok = false;
        worst = std::numeric_limits<double>::infinity();
        detail = "heuristic propensity " + std::to_string(th) + " outside (0, 1]";
      }
    }
    try {
      const auto target_m = marginal_policy_fn(t.env, TargetKind::EpsilonGreedy);
      const auto logging_m = marginal_policy_fn(t.env, TargetKind::Logging);
      const auto est = mips_roips(d, embedding_weights(d, target_m, logging_m),
                                  observation_propensities(d, ThetaProvider::heuristic(theta)));
      if (!std::isfinite(est.total)) {
        ok = false;
        worst = std::numeric_limits<double>::infinity();
        detail = "non-finite mips-heuristic-roips estimate";
      }
    } catch (const OpeError& e) {
      ok = false;
      worst = std::numeric_limits<double>::infinity();
      detail = e.what();
    }
  }
  PropertyResult r{"heuristic-roips-finite", ok, worst, 0.0, detail};
  return r;
}

std::vector<PropertyResult> run_verification(const VerifyOptions& opts) {
  opts.validate();
  return {check_roips_unbiased(opts), check_mips_bias_closed_form(opts), check_full_observation(opts), check_monte_carlo(opts),
          check_heuristic_floor(opts)};
}

}  // namespace ope_mnar
