#pragma once

// Shared domain types for ranking off-policy evaluation with partially
// observed (missing-not-at-random) rewards.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ope_mnar {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class OpeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent sizes, indices out of range, invalid parameter values.
class ConfigError : public OpeError {
 public:
  using OpeError::OpeError;
};

/// Input for which a normalized distribution cannot be formed.
class DegenerateInputError : public OpeError {
 public:
  using OpeError::OpeError;
};

/// Logging policy puts zero mass on an embedding the target policy uses.
class SupportError : public OpeError {
 public:
  using OpeError::OpeError;
};

/// Observation propensity outside (0, 1].
class PropensityError : public OpeError {
 public:
  using OpeError::OpeError;
};

class TrainingError : public OpeError {
 public:
  using OpeError::OpeError;
};

class StatisticsError : public OpeError {
 public:
  using OpeError::OpeError;
};

class InstanceTooLargeError : public OpeError {
 public:
  using OpeError::OpeError;
};

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

struct Context {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
};

/// Deterministic action -> embedding (category) assignment. Every embedding
/// index in [0, n_embeddings) is used by at least one action.
class EmbeddingMap {
 public:
  EmbeddingMap() = default;
  EmbeddingMap(std::vector<int> assignment, int n_embeddings);

  int operator[](std::size_t action) const { return assignment_[action]; }
  int n_actions() const { return static_cast<int>(assignment_.size()); }
  int n_embeddings() const { return n_embeddings_; }
  const std::vector<int>& assignment() const { return assignment_; }
  /// Number of actions carrying each embedding.
  const std::vector<int>& counts() const { return counts_; }
  /// Actions carrying embedding e, ascending.
  const std::vector<int>& members(int e) const { return members_[static_cast<std::size_t>(e)]; }

  bool operator==(const EmbeddingMap&) const = default;

 private:
  std::vector<int> assignment_;
  int n_embeddings_ = 0;
  std::vector<int> counts_;
  std::vector<std::vector<int>> members_;
};

struct RankingAction {
  std::vector<int> actions;
  std::vector<int> embeddings;

  static RankingAction from_actions(std::vector<int> actions, const EmbeddingMap& map);
  std::size_t length() const { return actions.size(); }
};

struct ObservationVector {
  std::vector<bool> mask;

  std::size_t length() const { return mask.size(); }
  int count() const;
};

struct LoggedRecord {
  Context context;
  RankingAction ranking;
  ObservationVector observation;
  std::vector<std::optional<double>> rewards;
};

struct LoggedDataset {
  std::vector<LoggedRecord> records;
  EmbeddingMap map;
  int d_x = 0;
  int ranking_length = 0;
  std::string fingerprint;

  std::size_t n() const { return records.size(); }
};

/// Per-position probability vectors over the full action set, stored
/// row-major as ranking_length x n_actions.
class PolicyDistribution {
 public:
  PolicyDistribution() = default;
  PolicyDistribution(int ranking_length, int n_actions);

  int ranking_length() const { return ranking_length_; }
  int n_actions() const { return n_actions_; }

  std::span<double> row(int k) {
    return {probs_.data() + static_cast<std::size_t>(k) * n_actions_,
            static_cast<std::size_t>(n_actions_)};
  }
  std::span<const double> row(int k) const {
    return {probs_.data() + static_cast<std::size_t>(k) * n_actions_,
            static_cast<std::size_t>(n_actions_)};
  }
  double operator()(int k, int a) const {
    return probs_[static_cast<std::size_t>(k) * n_actions_ + a];
  }

  /// Throws ConfigError when a row is negative or does not sum to 1.
  void check(double tol = 1e-9) const;

 private:
  int ranking_length_ = 0;
  int n_actions_ = 0;
  std::vector<double> probs_;
};

/// Embedding marginals pi(e|x) per position, ranking_length x n_embeddings.
class EmbeddingMarginals {
 public:
  EmbeddingMarginals() = default;
  EmbeddingMarginals(int ranking_length, int n_embeddings)
      : ranking_length_(ranking_length),
        n_embeddings_(n_embeddings),
        probs_(static_cast<std::size_t>(ranking_length) * n_embeddings, 0.0) {}

  int ranking_length() const { return ranking_length_; }
  int n_embeddings() const { return n_embeddings_; }
  double& operator()(int k, int e) {
    return probs_[static_cast<std::size_t>(k) * n_embeddings_ + e];
  }
  double operator()(int k, int e) const {
    return probs_[static_cast<std::size_t>(k) * n_embeddings_ + e];
  }
  std::span<const double> row(int k) const {
    return {probs_.data() + static_cast<std::size_t>(k) * n_embeddings_,
            static_cast<std::size_t>(n_embeddings_)};
  }

 private:
  int ranking_length_ = 0;
  int n_embeddings_ = 0;
  std::vector<double> probs_;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// output[e] = sum_a row[a] * 1{map[a] == e}.
std::vector<double> marginal_embedding_probs(std::span<const double> row, const EmbeddingMap& map);

/// Marginalizes every row of a policy distribution.
EmbeddingMarginals embedding_marginals(const PolicyDistribution& policy, const EmbeddingMap& map);

struct Violation {
  std::size_t record;
  std::string rule;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

ValidationReport validate_dataset(const LoggedDataset& d);

}  // namespace ope_mnar
