#pragma once

// Exact expectations on small, fully enumerable environments. Used to
// check the MNAR bias of marginalized IPS and the unbiasedness of its
// observation-reweighted variant without sampling error.

#include <cstdint>
#include <string>
#include <vector>

#include "ope_mnar/estimators.hpp"
#include "ope_mnar/synthetic_env.hpp"

namespace ope_mnar {

/// Environment with a finite context distribution.
struct TinyInstance {
  EnvModel env;
  std::vector<Context> contexts;
  std::vector<double> context_probs;

  /// |X| * |A|^K * 2^K.
  std::size_t enumeration_terms() const;
};

inline constexpr std::size_t kEnumerationBudget = 1'000'000;

/// Random instance with d_x <= 3, |A| <= 4, |E| <= 2, K <= 2 and at most five
/// contexts. alpha is drawn from [0.25, 3] unless given.
TinyInstance random_tiny_instance(std::uint64_t seed, std::optional<double> alpha = std::nullopt);

enum class OracleEstimator { Mips, MipsTrueRoips };

/// E_D[estimate^(k)] for a single-record dataset, by summing over every
/// (context, action tuple, observation pattern) with rewards replaced by
/// their conditional means.
std::vector<double> oracle_expected_value(const TinyInstance& t, OracleEstimator estimator, const PolicyFn& target,
                                          const PolicyFn& logging);

/// V^(k)(pi) by enumerating contexts and per-position target actions.
std::vector<double> tiny_true_value(const TinyInstance& t, const PolicyFn& target);

/// Closed form E_{p(x) pi(e|x)}[q_k(x, e) (1 - theta(o_k|x))] per position.
std::vector<double> mips_bias_closed_form(const TinyInstance& t, const PolicyFn& target);

/// Dataset of n records with contexts drawn from the instance's discrete
/// distribution.
LoggedDataset sample_tiny_dataset(const TinyInstance& t, std::size_t n, std::uint64_t data_seed);

}  // namespace ope_mnar
