#include "ope_mnar/synthetic_env.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

namespace ope_mnar {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double ez = std::exp(z);
  return ez / (1.0 + ez);
}

// 0^0 = 1, so alpha = 0 leaves only the fully observed pattern.
double alpha_power(double alpha, int exponent) {
  if (exponent == 0) return 1.0;
  return std::pow(alpha, exponent);
}

std::vector<double> standard_normal_vector(std::size_t n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

// Index of the first cumulative weight exceeding u * total.
std::size_t sample_index(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  // u landed on the rounding tail; return the last positive entry.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return weights.size() - 1;
}

// Lowest action carrying the best embedding under q_k (same for every k
// because the decay factor is shared across embeddings).
int greedy_action(const EmbeddingMarginals& q, const EnvModel& env, int k) {
  double best = -std::numeric_limits<double>::infinity();
  for (int e = 0; e < env.n_embeddings(); ++e) best = std::max(best, q(k, e));
  int action = env.n_actions();
  for (int e = 0; e < env.n_embeddings(); ++e)
    if (q(k, e) == best) action = std::min(action, env.map().members(e).front());
  return action;
}

}  // namespace

void EnvParams::validate() const {
  if (d_x < 1) throw ConfigError("d_x must be >= 1");
  if (n_embeddings < 1) throw ConfigError("n_embeddings must be >= 1");
  if (n_actions < n_embeddings) throw ConfigError("n_actions must be >= n_embeddings");
  if (ranking_length < 1) throw ConfigError("ranking_length must be >= 1");
  if (ranking_length > 20) throw ConfigError("ranking_length must be <= 20 (2^K observation patterns)");
  if (!(position_decay > 0.0 && position_decay <= 1.0))
    throw ConfigError("position_decay must lie in (0, 1]");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be >= 0");
  if (!std::isfinite(beta)) throw ConfigError("beta must be finite");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
  if (!(reward_noise > 0.0) || !std::isfinite(reward_noise)) throw ConfigError("reward_noise must be > 0");
}

EnvModel EnvModel::generate(const EnvParams& params) {
  params.validate();
  Rng rng(derive_seed({params.env_seed, kStreamEnv}));

  std::uniform_int_distribution<int> pick(0, params.n_embeddings - 1);
  std::vector<int> assignment(static_cast<std::size_t>(params.n_actions));
  for (;;) {
    std::vector<int> counts(static_cast<std::size_t>(params.n_embeddings), 0);
    for (auto& e : assignment) {
      e = pick(rng);
      ++counts[static_cast<std::size_t>(e)];
    }
    if (std::find(counts.begin(), counts.end(), 0) == counts.end()) break;
  }

  std::vector<std::vector<double>> w;
  std::vector<double> b;
  for (int e = 0; e < params.n_embeddings; ++e) {
    w.push_back(standard_normal_vector(static_cast<std::size_t>(params.d_x), rng));
    b.push_back(std::normal_distribution<double>(0.0, 1.0)(rng));
  }
  std::vector<std::vector<double>> v;
  for (int o = 0; o < (1 << params.ranking_length); ++o)
    v.push_back(standard_normal_vector(static_cast<std::size_t>(params.d_x), rng));

  return EnvModel(params, EmbeddingMap(std::move(assignment), params.n_embeddings), std::move(w),
                  std::move(b), std::move(v));
}

EnvModel::EnvModel(EnvParams params, EmbeddingMap map, std::vector<std::vector<double>> reward_weights,
                   std::vector<double> reward_bias, std::vector<std::vector<double>> obs_weights)
    : params_(params),
      map_(std::move(map)),
      reward_weights_(std::move(reward_weights)),
      reward_bias_(std::move(reward_bias)),
      obs_weights_(std::move(obs_weights)) {
  params_.validate();
  if (map_.n_actions() != params_.n_actions || map_.n_embeddings() != params_.n_embeddings)
    throw ConfigError("embedding map does not match n_actions / n_embeddings");
  if (static_cast<int>(reward_weights_.size()) != params_.n_embeddings ||
      static_cast<int>(reward_bias_.size()) != params_.n_embeddings)
    throw ConfigError("reward weights must have one entry per embedding");
  for (const auto& w : reward_weights_)
    if (static_cast<int>(w.size()) != params_.d_x) throw ConfigError("reward weight length differs from d_x");
  if (obs_weights_.size() != (std::size_t{1} << params_.ranking_length))
    throw ConfigError("obs_weights must have exactly 2^K entries");
  for (const auto& v : obs_weights_)
    if (static_cast<int>(v.size()) != params_.d_x) throw ConfigError("obs weight length differs from d_x");
}

EnvModel EnvModel::with_alpha(double alpha) const {
  EnvModel copy = *this;
  copy.params_.alpha = alpha;
  copy.params_.validate();
  return copy;
}

double expected_reward(const Context& x, int e, int k, const EnvModel& env) {
  if (e < 0 || e >= env.n_embeddings()) throw ConfigError("embedding index out of range");
  if (k < 0 || k >= env.ranking_length()) throw ConfigError("position index out of range");
  if (static_cast<int>(x.dim()) != env.d_x()) throw ConfigError("context length differs from d_x");
  const auto ue = static_cast<std::size_t>(e);
  double z = dot(x.values, env.reward_weights()[ue]) + env.reward_bias()[ue];
  return std::pow(env.params().position_decay, k) * logistic(z);
}

EmbeddingMarginals expected_reward_table(const Context& x, const EnvModel& env) {
  if (static_cast<int>(x.dim()) != env.d_x()) throw ConfigError("context length differs from d_x");
  const int K = env.ranking_length();
  const int E = env.n_embeddings();
  EmbeddingMarginals q(K, E);
  for (int e = 0; e < E; ++e) {
    const auto ue = static_cast<std::size_t>(e);
    double base = logistic(dot(x.values, env.reward_weights()[ue]) + env.reward_bias()[ue]);
    double decay = 1.0;
    for (int k = 0; k < K; ++k) {
      q(k, e) = decay * base;
      decay *= env.params().position_decay;
    }
  }
  return q;
}

namespace {

// exp(beta * q_k(e)) per embedding, shifted by the row max for stability,
// and the softmax normalizer over all actions.
struct SoftmaxTerms {
  EmbeddingMarginals unnormalized;
  std::vector<double> normalizer;
};

SoftmaxTerms softmax_terms(const EmbeddingMarginals& q, const EnvModel& env) {
  const int K = env.ranking_length();
  const int E = env.n_embeddings();
  const double beta = env.params().beta;
  SoftmaxTerms t{EmbeddingMarginals(K, E), std::vector<double>(static_cast<std::size_t>(K), 0.0)};
  for (int k = 0; k < K; ++k) {
    double shift = -std::numeric_limits<double>::infinity();
    for (int e = 0; e < E; ++e) shift = std::max(shift, beta * q(k, e));
    for (int e = 0; e < E; ++e) {
      double u = std::exp(beta * q(k, e) - shift);
      t.unnormalized(k, e) = u;
      t.normalizer[static_cast<std::size_t>(k)] += u * env.map().counts()[static_cast<std::size_t>(e)];
    }
  }
  return t;
}

}  // namespace

PolicyDistribution logging_policy(const Context& x, const EnvModel& env) {
  auto q = expected_reward_table(x, env);
  auto t = softmax_terms(q, env);
  PolicyDistribution pi(env.ranking_length(), env.n_actions());
  for (int k = 0; k < env.ranking_length(); ++k) {
    auto row = pi.row(k);
    const double z = t.normalizer[static_cast<std::size_t>(k)];
    for (int a = 0; a < env.n_actions(); ++a)
      row[static_cast<std::size_t>(a)] = t.unnormalized(k, env.map()[static_cast<std::size_t>(a)]) / z;
  }
  return pi;
}

EmbeddingMarginals logging_marginals(const Context& x, const EnvModel& env) {
  auto q = expected_reward_table(x, env);
  auto t = softmax_terms(q, env);
  EmbeddingMarginals m(env.ranking_length(), env.n_embeddings());
  for (int k = 0; k < env.ranking_length(); ++k)
    for (int e = 0; e < env.n_embeddings(); ++e)
      m(k, e) = t.unnormalized(k, e) * env.map().counts()[static_cast<std::size_t>(e)] /
                t.normalizer[static_cast<std::size_t>(k)];
  return m;
}

PolicyDistribution target_policy(const Context& x, const EnvModel& env) {
  auto q = expected_reward_table(x, env);
  const double eps = env.params().epsilon;
  const double floor = eps / env.n_actions();
  PolicyDistribution pi(env.ranking_length(), env.n_actions());
  for (int k = 0; k < env.ranking_length(); ++k) {
    auto row = pi.row(k);
    std::fill(row.begin(), row.end(), floor);
    row[static_cast<std::size_t>(greedy_action(q, env, k))] += 1.0 - eps;
  }
  return pi;
}

EmbeddingMarginals target_marginals(const Context& x, const EnvModel& env) {
  auto q = expected_reward_table(x, env);
  const double eps = env.params().epsilon;
  EmbeddingMarginals m(env.ranking_length(), env.n_embeddings());
  for (int k = 0; k < env.ranking_length(); ++k) {
    for (int e = 0; e < env.n_embeddings(); ++e)
      m(k, e) = eps * env.map().counts()[static_cast<std::size_t>(e)] / env.n_actions();
    m(k, env.map()[static_cast<std::size_t>(greedy_action(q, env, k))]) += 1.0 - eps;
  }
  return m;
}

ObservationDistribution observation_distribution(const Context& x, const EnvModel& env) {
  const int K = env.ranking_length();
  const double alpha = env.params().alpha;
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (static_cast<int>(x.dim()) != env.d_x()) throw ConfigError("context length differs from d_x");
  ObservationDistribution dist{K, std::vector<double>(static_cast<std::size_t>(env.n_patterns()))};
  double total = 0.0;
  for (unsigned o = 0; o < static_cast<unsigned>(env.n_patterns()); ++o) {
    int n_obs = std::popcount(o);
    double w = std::abs(dot(x.values, env.obs_weights()[o])) * alpha_power(alpha, K - n_obs);
    dist.probs[o] = w;
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total))
    throw DegenerateInputError("all observation-pattern weights are zero for this context");
  for (auto& p : dist.probs) p /= total;
  return dist;
}

double marginal_observation_prob(const ObservationDistribution& dist, int k) {
  if (k < 0 || k >= dist.ranking_length) throw ConfigError("position index out of range");
  double s = 0.0;
  for (unsigned o = 0; o < dist.probs.size(); ++o)
    if (ObservationDistribution::observed(o, k, dist.ranking_length)) s += dist.probs[o];
  return std::min(s, 1.0);
}

PolicyFn policy_fn(const EnvModel& env, TargetKind kind) {
  if (kind == TargetKind::Logging) return [&env](const Context& x) { return logging_policy(x, env); };
  return [&env](const Context& x) { return target_policy(x, env); };
}

MarginalPolicyFn marginal_policy_fn(const EnvModel& env, TargetKind kind) {
  if (kind == TargetKind::Logging) return [&env](const Context& x) { return logging_marginals(x, env); };
  return [&env](const Context& x) { return target_marginals(x, env); };
}

Context sample_context(const EnvModel& env, Rng& rng) {
  return Context{standard_normal_vector(static_cast<std::size_t>(env.d_x()), rng)};
}

LoggedRecord sample_record(const EnvModel& env, Context x, Rng& action_rng, Rng& obs_rng, Rng& reward_rng) {
  const int K = env.ranking_length();
  const auto& map = env.map();
  auto q = expected_reward_table(x, env);
  auto pi0 = logging_marginals(x, env);

  // Within one embedding every action has the same logging probability, so
  // drawing the embedding from its marginal and then a uniform member is
  // the same as drawing from the full action row.
  std::vector<int> actions(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    auto e = static_cast<int>(sample_index(pi0.row(k), action_rng));
    const auto& members = map.members(e);
    int pick = std::uniform_int_distribution<int>(0, static_cast<int>(members.size()) - 1)(action_rng);
    actions[static_cast<std::size_t>(k)] = members[static_cast<std::size_t>(pick)];
  }

  auto theta = observation_distribution(x, env);
  auto pattern = static_cast<unsigned>(sample_index(theta.probs, obs_rng));

  LoggedRecord rec;
  rec.ranking = RankingAction::from_actions(std::move(actions), map);
  rec.observation.mask.resize(static_cast<std::size_t>(K));
  rec.rewards.resize(static_cast<std::size_t>(K));
  std::normal_distribution<double> noise(0.0, env.params().reward_noise);
  for (int k = 0; k < K; ++k) {
    // Rewards are drawn for every position so the reward stream does not
    // depend on the observation pattern.
    double r = q(k, rec.ranking.embeddings[static_cast<std::size_t>(k)]) + noise(reward_rng);
    bool seen = ObservationDistribution::observed(pattern, k, K);
    rec.observation.mask[static_cast<std::size_t>(k)] = seen;
    if (seen) rec.rewards[static_cast<std::size_t>(k)] = r;
  }
  rec.context = std::move(x);
  return rec;
}

std::string dataset_fingerprint(const EnvModel& env, std::uint64_t data_seed) {
  const auto& p = env.params();
  std::ostringstream os;
  os << "env_seed=" << p.env_seed << ";data_seed=" << data_seed << ";d_x=" << p.d_x << ";A=" << p.n_actions
     << ";E=" << p.n_embeddings << ";K=" << p.ranking_length << ";alpha=" << p.alpha << ";beta=" << p.beta
     << ";decay=" << p.position_decay << ";sigma=" << p.reward_noise;
  return os.str();
}

LoggedDataset sample_dataset(const EnvModel& env, std::size_t n, std::uint64_t data_seed) {
  if (n < 1) throw ConfigError("dataset size must be >= 1");
  const auto seed = env.params().env_seed;
  Rng ctx_rng(derive_seed({seed, data_seed, kStreamContexts}));
  Rng action_rng(derive_seed({seed, data_seed, kStreamActions}));
  Rng obs_rng(derive_seed({seed, data_seed, kStreamObservations}));
  Rng reward_rng(derive_seed({seed, data_seed, kStreamRewards}));

  LoggedDataset d;
  d.map = env.map();
  d.d_x = env.d_x();
  d.ranking_length = env.ranking_length();
  d.fingerprint = dataset_fingerprint(env, data_seed);
  d.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    d.records.push_back(sample_record(env, sample_context(env, ctx_rng), action_rng, obs_rng, reward_rng));
  return d;
}

std::vector<double> conditional_policy_value(const Context& x, const EnvModel& env,
                                             const EmbeddingMarginals& target) {
  auto q = expected_reward_table(x, env);
  std::vector<double> v(static_cast<std::size_t>(env.ranking_length()), 0.0);
  for (int k = 0; k < env.ranking_length(); ++k)
    for (int e = 0; e < env.n_embeddings(); ++e) v[static_cast<std::size_t>(k)] += target(k, e) * q(k, e);
  return v;
}

PolicyValue true_policy_value(const EnvModel& env, std::span<const Context> contexts,
                              const MarginalPolicyFn& target) {
  if (contexts.empty()) throw ConfigError("ground truth needs at least one context");
  const auto K = static_cast<std::size_t>(env.ranking_length());
  PolicyValue out;
  out.per_position.assign(K, 0.0);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& x : contexts) {
    auto v = conditional_policy_value(x, env, target(x));
    double t = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      out.per_position[k] += v[k];
      t += v[k];
    }
    sum += t;
    sum_sq += t * t;
  }
  const double n = static_cast<double>(contexts.size());
  for (auto& v : out.per_position) v /= n;
  for (double v : out.per_position) out.total += v;
  if (contexts.size() > 1) {
    double mean = sum / n;
    double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    out.std_error = std::sqrt(var / n);
  }
  return out;
}

PolicyValue true_policy_value(const EnvModel& env, std::size_t n_mc, std::uint64_t eval_seed, TargetKind target) {
  if (n_mc < 1) throw ConfigError("n_mc must be >= 1");
  Rng rng(derive_seed({env.params().env_seed, eval_seed, kStreamTruth}));
  std::vector<Context> contexts;
  contexts.reserve(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) contexts.push_back(sample_context(env, rng));
  return true_policy_value(env, contexts, marginal_policy_fn(env, target));
}

}  // namespace ope_mnar
