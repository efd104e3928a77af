#include "ope_mnar/oracle.hpp"

#include <cmath>

#include "ope_mnar/rng.hpp"

namespace ope_mnar {

std::size_t TinyInstance::enumeration_terms() const {
  std::size_t terms = contexts.size();
  for (int k = 0; k < env.ranking_length(); ++k) {
    terms *= static_cast<std::size_t>(env.n_actions());
    terms *= 2;
    if (terms > kEnumerationBudget * 16) break;
  }
  return terms;
}

namespace {

void require_enumerable(const TinyInstance& t) {
  if (t.contexts.empty() || t.contexts.size() != t.context_probs.size())
    throw ConfigError("tiny instance needs one probability per context");
  if (t.enumeration_terms() > kEnumerationBudget)
    throw InstanceTooLargeError("enumeration needs " + std::to_string(t.enumeration_terms()) +
                                " terms, budget is " + std::to_string(kEnumerationBudget));
}

}  // namespace

TinyInstance random_tiny_instance(std::uint64_t seed, std::optional<double> alpha) {
  Rng rng(derive_seed({seed, 0x7197}));
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  EnvParams p;
  p.d_x = uniform_int(1, 3);
  p.n_actions = uniform_int(1, 4);
  p.n_embeddings = uniform_int(1, std::min(2, p.n_actions));
  p.ranking_length = uniform_int(1, 2);
  p.position_decay = uniform(0.5, 1.0);
  p.alpha = alpha.value_or(uniform(0.25, 3.0));
  p.beta = uniform(-2.0, 3.0);
  p.epsilon = uniform(0.0, 1.0);
  p.reward_noise = uniform(0.1, 1.0);
  p.env_seed = rng();

  TinyInstance t{EnvModel::generate(p), {}, {}};
  const int n_contexts = uniform_int(1, 5);
  std::normal_distribution<double> normal(0.0, 1.0);
  double total = 0.0;
  for (int i = 0; i < n_contexts; ++i) {
    Context x;
    for (int j = 0; j < p.d_x; ++j) x.values.push_back(normal(rng));
    t.contexts.push_back(std::move(x));
    double w = uniform(0.1, 1.0);
    t.context_probs.push_back(w);
    total += w;
  }
  for (auto& w : t.context_probs) w /= total;
  return t;
}

std::vector<double> oracle_expected_value(const TinyInstance& t, OracleEstimator estimator, const PolicyFn& target,
                                          const PolicyFn& logging) {
  require_enumerable(t);
  const auto& env = t.env;
  const int K = env.ranking_length();
  const int A = env.n_actions();
  const auto& map = env.map();
  std::vector<double> expectation(static_cast<std::size_t>(K), 0.0);

  for (std::size_t xi = 0; xi < t.contexts.size(); ++xi) {
    const auto& x = t.contexts[xi];
    const auto pi = target(x);
    const auto pi0 = logging(x);
    const auto theta = observation_distribution(x, env);
    std::vector<double> theta_k(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) theta_k[static_cast<std::size_t>(k)] = marginal_observation_prob(theta, k);

    // Odometer over action tuples a = (a_0, ..., a_{K-1}).
    std::vector<int> a(static_cast<std::size_t>(K), 0);
    for (;;) {
      double p_actions = t.context_probs[xi];
      for (int k = 0; k < K; ++k) p_actions *= pi0(k, a[static_cast<std::size_t>(k)]);
      for (unsigned o = 0; o < theta.probs.size(); ++o) {
        const double p = p_actions * theta.probs[o];
        if (p == 0.0) continue;
        for (int k = 0; k < K; ++k) {
          if (!ObservationDistribution::observed(o, k, K)) continue;
          const int ak = a[static_cast<std::size_t>(k)];
          const int e = map[static_cast<std::size_t>(ak)];
          double value = embedding_weight(x, e, k, pi, pi0, map) * expected_reward(x, e, k, env);
          if (estimator == OracleEstimator::MipsTrueRoips) value /= theta_k[static_cast<std::size_t>(k)];
          expectation[static_cast<std::size_t>(k)] += p * value;
        }
      }
      int k = K - 1;
      while (k >= 0 && ++a[static_cast<std::size_t>(k)] == A) a[static_cast<std::size_t>(k--)] = 0;
      if (k < 0) break;
    }
  }
  return expectation;
}

std::vector<double> tiny_true_value(const TinyInstance& t, const PolicyFn& target) {
  require_enumerable(t);
  const auto& env = t.env;
  const int K = env.ranking_length();
  std::vector<double> value(static_cast<std::size_t>(K), 0.0);
  for (std::size_t xi = 0; xi < t.contexts.size(); ++xi) {
    const auto& x = t.contexts[xi];
    const auto pi = target(x);
    for (int k = 0; k < K; ++k)
      for (int a = 0; a < env.n_actions(); ++a)
        value[static_cast<std::size_t>(k)] +=
            t.context_probs[xi] * pi(k, a) * expected_reward(x, env.map()[static_cast<std::size_t>(a)], k, env);
  }
  return value;
}

std::vector<double> mips_bias_closed_form(const TinyInstance& t, const PolicyFn& target) {
  require_enumerable(t);
  const auto& env = t.env;
  const int K = env.ranking_length();
  std::vector<double> bias(static_cast<std::size_t>(K), 0.0);
  for (std::size_t xi = 0; xi < t.contexts.size(); ++xi) {
    const auto& x = t.contexts[xi];
    const auto pi = target(x);
    const auto theta = observation_distribution(x, env);
    for (int k = 0; k < K; ++k) {
      const auto marginal = marginal_embedding_probs(pi.row(k), env.map());
      const double miss = 1.0 - marginal_observation_prob(theta, k);
      for (int e = 0; e < env.n_embeddings(); ++e)
        bias[static_cast<std::size_t>(k)] +=
            t.context_probs[xi] * marginal[static_cast<std::size_t>(e)] * expected_reward(x, e, k, env) * miss;
    }
  }
  return bias;
}

LoggedDataset sample_tiny_dataset(const TinyInstance& t, std::size_t n, std::uint64_t data_seed) {
  if (n < 1) throw ConfigError("dataset size must be >= 1");
  const auto& env = t.env;
  const auto seed = env.params().env_seed;
  Rng ctx_rng(derive_seed({seed, data_seed, kStreamContexts}));
  Rng action_rng(derive_seed({seed, data_seed, kStreamActions}));
  Rng obs_rng(derive_seed({seed, data_seed, kStreamObservations}));
  Rng reward_rng(derive_seed({seed, data_seed, kStreamRewards}));
  std::discrete_distribution<std::size_t> pick(t.context_probs.begin(), t.context_probs.end());

  LoggedDataset d;
  d.map = env.map();
  d.d_x = env.d_x();
  d.ranking_length = env.ranking_length();
  d.fingerprint = dataset_fingerprint(env, data_seed) + ";tiny";
  for (std::size_t i = 0; i < n; ++i)
    d.records.push_back(sample_record(env, t.contexts[pick(ctx_rng)], action_rng, obs_rng, reward_rng));
  return d;
}

}  // namespace ope_mnar
