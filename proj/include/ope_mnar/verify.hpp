#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ope_mnar {

struct VerifyOptions {
  std::size_t instances = 100;
  std::size_t mc_seeds = 10000;
  std::uint64_t seed = 2024;
  /// Fault injection: drop the 1/n floor on heuristic propensities.
  bool disable_theta_floor = false;

  void validate() const;
};

struct PropertyResult {
  std::string name;
  bool passed = false;
  double max_abs_deviation = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

inline constexpr double kOracleTolerance = 1e-10;
inline constexpr double kMonteCarloSigmas = 4.0;

PropertyResult check_roips_unbiased(const VerifyOptions& opts);
PropertyResult check_mips_bias_closed_form(const VerifyOptions& opts);
PropertyResult check_full_observation(const VerifyOptions& opts);
PropertyResult check_monte_carlo(const VerifyOptions& opts);
PropertyResult check_heuristic_floor(const VerifyOptions& opts);

/// Runs every property above in order.
std::vector<PropertyResult> run_verification(const VerifyOptions& opts);

}  // namespace ope_mnar
