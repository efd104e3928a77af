#include "ope_mnar/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "ope_mnar/rng.hpp"

namespace ope_mnar {

namespace {

const std::set<std::string, std::less<>>& known_estimators() {
  static const std::set<std::string, std::less<>> names{std::string(kDmFm), std::string(kMips),
                                                        std::string(kMipsTrueRoips),
                                                        std::string(kMipsHeuristicRoips)};
  return names;
}

bool rostered(const SweepConfig& cfg, std::string_view name) {
  return std::find(cfg.estimators.begin(), cfg.estimators.end(), name) != cfg.estimators.end();
}

template <class E>
bool rethrow_as(const std::exception_ptr& ptr, const std::string& prefix) {
  try {
    std::rethrow_exception(ptr);
  } catch (const E& e) {
    throw E(prefix + e.what());
  } catch (...) {
  }
  return false;
}

[[noreturn]] void rethrow_with_seed(const std::exception_ptr& ptr, std::size_t seed) {
  const std::string prefix = "seed " + std::to_string(seed) + ": ";
  rethrow_as<TrainingError>(ptr, prefix);
  rethrow_as<SupportError>(ptr, prefix);
  rethrow_as<PropensityError>(ptr, prefix);
  rethrow_as<DegenerateInputError>(ptr, prefix);
  rethrow_as<ConfigError>(ptr, prefix);
  rethrow_as<OpeError>(ptr, prefix);
  std::rethrow_exception(ptr);
}

// Runs body(i) for i in [0, count) on up to `workers` threads. The first
// failure (lowest index) is rethrown after all workers stop.
template <class Body>
void parallel_for(std::size_t count, int workers, Body body) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
      }
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::max(1, workers));
  if (n_threads == 1 || count <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(n_threads, count); ++t) pool.emplace_back(work);
  }
  for (std::size_t i = 0; i < count; ++i)
    if (errors[i]) rethrow_with_seed(errors[i], i);
}

struct SeedEstimates {
  double truth = 0.0;
  std::map<std::string, double> values;
};

SeedEstimates run_seed(const SweepConfig& cfg, const EnvModel& env, std::size_t seed, double shared_truth) {
  SeedEstimates out;
  out.truth = shared_truth;
  if (cfg.resample_env) out.truth = true_policy_value(env, cfg.n_mc, cfg.eval_seed, cfg.target).total;

  const auto data = sample_dataset(env, cfg.n, seed);
  const auto target_fn = marginal_policy_fn(env, cfg.target);
  const auto logging_fn = marginal_policy_fn(env, TargetKind::Logging);
  const auto weights = embedding_weights(data, target_fn, logging_fn);
  const auto true_theta = ThetaProvider::true_model(env);
  const auto theta_hat = heuristic_theta(data);

  if (rostered(cfg, kMips)) out.values[std::string(kMips)] = mips(data, weights).total;
  if (rostered(cfg, kMipsTrueRoips))
    out.values[std::string(kMipsTrueRoips)] =
        mips_roips(data, weights, observation_propensities(data, true_theta)).total;
  if (rostered(cfg, kMipsHeuristicRoips))
    out.values[std::string(kMipsHeuristicRoips)] =
        mips_roips(data, weights, observation_propensities(data, ThetaProvider::heuristic(theta_hat))).total;
  if (rostered(cfg, kDmFm)) {
    FmTrainConfig fm = cfg.fm;
    fm.seed = derive_seed({cfg.env.env_seed, seed, kStreamTrain, cfg.fm.seed});
    const auto train_theta = cfg.fm_heuristic_theta ? ThetaProvider::heuristic(theta_hat) : true_theta;
    auto trained = fm_train(data, train_theta, fm);
    FeatureLayout layout{data.d_x, data.map.n_embeddings(), data.ranking_length};
    out.values[std::string(kDmFm)] =
        dm_value(data, target_fn, fm_reward_model(std::move(trained.params), layout)).total;
  }
  return out;
}

}  // namespace

void SweepConfig::validate() const {
  env.validate();
  if (alphas.empty()) throw ConfigError("alphas must not be empty");
  for (double a : alphas)
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("alphas must be non-negative");
  if (n < 1) throw ConfigError("n must be >= 1");
  if (n_seeds < 2) throw ConfigError("n_seeds must be >= 2 so the variance is defined");
  if (n_mc < 1) throw ConfigError("n_mc must be >= 1");
  if (estimators.empty()) throw ConfigError("estimator roster must not be empty");
  for (const auto& name : estimators)
    if (!known_estimators().contains(name)) throw ConfigError("unknown estimator '" + name + "'");
  if (rostered(*this, kDmFm)) fm.validate();
  if (threads < 0) throw ConfigError("threads must be >= 0");
}

MseDecomposition mse_decomposition(std::span<const double> estimates, double true_value) {
  if (estimates.size() < 2) throw StatisticsError("mse decomposition needs at least 2 estimates");
  const double n = static_cast<double>(estimates.size());
  double mean = 0.0;
  for (double v : estimates) mean += v;
  mean /= n;
  MseDecomposition out;
  for (double v : estimates) {
    out.mse += (true_value - v) * (true_value - v);
    out.variance += (v - mean) * (v - mean);
  }
  out.mse /= n;
  out.variance /= n;
  out.squared_bias = (true_value - mean) * (true_value - mean);
  return out;
}

int worker_count(int requested) {
  if (requested > 0) return requested;
  int hw = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("OPE_MNAR_THREADS")) {
    char* end = nullptr;
    long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) return static_cast<int>(std::min<long>(cap, hw));
  }
  return hw;
}

ReplicationResult run_replications(const SweepConfig& cfg, double alpha) {
  cfg.validate();
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  EnvParams params = cfg.env;
  params.alpha = alpha;
  const auto env = EnvModel::generate(params);

  ReplicationResult rep;
  rep.alpha = alpha;
  rep.truth = true_policy_value(env, cfg.n_mc, cfg.eval_seed, cfg.target);

  std::vector<SeedEstimates> per_seed(cfg.n_seeds);
  parallel_for(cfg.n_seeds, worker_count(cfg.threads), [&](std::size_t s) {
    if (cfg.resample_env) {
      EnvParams p = params;
      p.env_seed = derive_seed({cfg.env.env_seed, s, kStreamEnv});
      per_seed[s] = run_seed(cfg, EnvModel::generate(p), s, 0.0);
    } else {
      per_seed[s] = run_seed(cfg, env, s, rep.truth.total);
    }
  });

  for (const auto& name : cfg.estimators) rep.estimates[name].reserve(cfg.n_seeds);
  for (const auto& s : per_seed) {
    rep.seed_truth.push_back(s.truth);
    for (const auto& [name, v] : s.values) rep.estimates[name].push_back(v);
  }
  if (cfg.resample_env) {
    double mean = 0.0;
    for (double t : rep.seed_truth) mean += t;
    rep.truth.total = mean / static_cast<double>(rep.seed_truth.size());
  }
  return rep;
}

const SweepRow* SweepSummary::find(double alpha, std::string_view estimator) const {
  for (const auto& r : rows)
    if (r.alpha == alpha && r.estimator == estimator) return &r;
  return nullptr;
}

SweepSummary summarize(const ReplicationResult& rep, const std::vector<std::string>& roster) {
  SweepSummary summary;
  summary.truth_std_error[rep.alpha] = rep.truth.std_error;
  for (const auto& name : roster) {
    const auto& est = rep.estimates.at(name);
    // With a per-seed environment the decomposition runs on the errors
    // against each seed's own ground truth.
    std::vector<double> centered(est.size());
    for (std::size_t s = 0; s < est.size(); ++s)
      centered[s] = rep.seed_truth[s] == rep.truth.total ? est[s] : est[s] - rep.seed_truth[s] + rep.truth.total;
    auto dec = mse_decomposition(centered, rep.truth.total);

    SweepRow row;
    row.alpha = rep.alpha;
    row.estimator = name;
    row.mse = dec.mse;
    row.squared_bias = dec.squared_bias;
    row.variance = dec.variance;
    double mean = 0.0;
    for (double v : est) mean += v;
    row.mean_estimate = mean / static_cast<double>(est.size());
    row.true_value = rep.truth.total;
    row.n_seeds = est.size();
    const double n = static_cast<double>(est.size());
    row.std_error = std::sqrt(dec.variance * n / (n - 1.0) / n);
    summary.rows.push_back(std::move(row));
  }
  return summary;
}

SweepSummary alpha_sweep(const SweepConfig& cfg, const std::function<void(const SweepSummary&)>& on_alpha) {
  cfg.validate();
  SweepSummary summary;
  for (double alpha : cfg.alphas) {
    auto part = summarize(run_replications(cfg, alpha), cfg.estimators);
    if (on_alpha) on_alpha(part);
    summary.rows.insert(summary.rows.end(), part.rows.begin(), part.rows.end());
    summary.truth_std_error.insert(part.truth_std_error.begin(), part.truth_std_error.end());
  }
  return summary;
}

}  // namespace ope_mnar
