#include "ope_mnar/fm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ope_mnar/rng.hpp"

namespace ope_mnar {

namespace {

// Shares the O(p * rank) pass between prediction and gradient: returns the
// score and fills sum_f = sum_j V_jf z_j.
double fm_score(std::span<const double> z, const FmParams& params, std::vector<double>& sum_f) {
  const int p = params.p();
  const int rank = params.rank;
  sum_f.assign(static_cast<std::size_t>(rank), 0.0);
  double linear = params.w0;
  double sq = 0.0;
  for (int j = 0; j < p; ++j) {
    const double zj = z[static_cast<std::size_t>(j)];
    if (zj == 0.0) continue;
    linear += params.w[static_cast<std::size_t>(j)] * zj;
    for (int f = 0; f < rank; ++f) {
      const double t = params.factor(j, f) * zj;
      sum_f[static_cast<std::size_t>(f)] += t;
      sq += t * t;
    }
  }
  double pair = 0.0;
  for (double s : sum_f) pair += s * s;
  return linear + 0.5 * (pair - sq);
}

double squared_norm(const FmParams& params) {
  double s = params.w0 * params.w0;
  for (double x : params.w) s += x * x;
  for (double x : params.v) s += x * x;
  return s;
}

}  // namespace

std::vector<double> featurize(const Context& x, int e, int k, const FeatureLayout& layout) {
  if (static_cast<int>(x.dim()) != layout.d_x) throw ConfigError("context length differs from d_x");
  if (e < 0 || e >= layout.n_embeddings) throw ConfigError("embedding index out of range");
  if (k < 0 || k >= layout.ranking_length) throw ConfigError("position index out of range");
  std::vector<double> z(static_cast<std::size_t>(layout.size()), 0.0);
  std::copy(x.values.begin(), x.values.end(), z.begin());
  z[static_cast<std::size_t>(layout.d_x + e)] = 1.0;
  z[static_cast<std::size_t>(layout.d_x + layout.n_embeddings + k)] = 1.0;
  return z;
}

bool FmParams::finite() const {
  auto ok = [](double x) { return std::isfinite(x); };
  return std::isfinite(w0) && std::all_of(w.begin(), w.end(), ok) && std::all_of(v.begin(), v.end(), ok);
}

double fm_predict(std::span<const double> z, const FmParams& params) {
  if (static_cast<int>(z.size()) != params.p()) throw ConfigError("feature length differs from model size");
  std::vector<double> sum_f;
  return fm_score(z, params, sum_f);
}

void FmTrainConfig::validate() const {
  if (rank < 1) throw ConfigError("fm rank must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("fm learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("fm epochs must be >= 1");
  if (!(l2 >= 0.0)) throw ConfigError("fm l2 must be >= 0");
  if (!(init_scale > 0.0)) throw ConfigError("fm init_scale must be > 0");
}

std::vector<FmSample> fm_training_samples(const LoggedDataset& d, const ThetaProvider& theta,
                                          const FeatureLayout& layout) {
  std::vector<FmSample> samples;
  for (const auto& rec : d.records) {
    for (int k = 0; k < d.ranking_length; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (!rec.observation.mask[uk]) continue;
      const double t = theta(rec.context, k);
      if (!(t > 0.0) || !std::isfinite(t))
        throw PropensityError("training propensity " + std::to_string(t) + " is not positive");
      samples.push_back({featurize(rec.context, rec.ranking.embeddings[uk], k, layout), *rec.rewards[uk], 1.0 / t});
    }
  }
  return samples;
}

double fm_objective(std::span<const FmSample> samples, const FmParams& params, double l2) {
  std::vector<double> sum_f;
  double loss = 0.0;
  for (const auto& s : samples) {
    const double r = s.target - fm_score(s.z, params, sum_f);
    loss += s.weight * r * r;
  }
  return loss + l2 * squared_norm(params);
}

FmParams fm_objective_gradient(std::span<const FmSample> samples, const FmParams& params, double l2) {
  const int p = params.p();
  const int rank = params.rank;
  FmParams g(p, rank);
  std::vector<double> sum_f;
  for (const auto& s : samples) {
    const double pred = fm_score(s.z, params, sum_f);
    const double c = 2.0 * s.weight * (pred - s.target);
    g.w0 += c;
    for (int j = 0; j < p; ++j) {
      const double zj = s.z[static_cast<std::size_t>(j)];
      if (zj == 0.0) continue;
      g.w[static_cast<std::size_t>(j)] += c * zj;
      for (int f = 0; f < rank; ++f)
        g.factor(j, f) += c * zj * (sum_f[static_cast<std::size_t>(f)] - params.factor(j, f) * zj);
    }
  }
  g.w0 += 2.0 * l2 * params.w0;
  for (int j = 0; j < p; ++j) g.w[static_cast<std::size_t>(j)] += 2.0 * l2 * params.w[static_cast<std::size_t>(j)];
  for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += 2.0 * l2 * params.v[i];
  return g;
}

FmParams fm_init(int p, const FmTrainConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed({cfg.seed, kStreamTrain}));
  std::normal_distribution<double> normal(0.0, cfg.init_scale);
  FmParams params(p, cfg.rank);
  for (auto& x : params.v) x = normal(rng);
  return params;
}

FmTrainResult fm_train(std::span<const FmSample> samples, const FmTrainConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw TrainingError("no observed rewards to train on");
  const int p = static_cast<int>(samples.front().z.size());
  const int rank = cfg.rank;

  FmTrainResult result;
  result.params = fm_init(p, cfg);
  result.initial_loss = fm_objective(samples, result.params, cfg.l2);
  auto& params = result.params;

  double mean_weight = 0.0;
  for (const auto& s : samples) mean_weight += s.weight;
  mean_weight /= static_cast<double>(samples.size());
  const double lr = cfg.learning_rate;
  // Per-sample share of the regularizer after dividing by mean_weight.
  const double decay = 2.0 * cfg.l2 / (mean_weight * static_cast<double>(samples.size()));

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed({cfg.seed, kStreamTrain, 1}));
  std::vector<double> sum_f;
  std::vector<double> grad_v(static_cast<std::size_t>(p) * rank);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t idx : order) {
      const auto& s = samples[idx];
      const double pred = fm_score(s.z, params, sum_f);
      const double c = 2.0 * (s.weight / mean_weight) * (pred - s.target);

      params.w0 -= lr * (c + decay * params.w0);
      for (int j = 0; j < p; ++j) {
        const double zj = s.z[static_cast<std::size_t>(j)];
        auto& wj = params.w[static_cast<std::size_t>(j)];
        wj -= lr * (c * zj + decay * wj);
        for (int f = 0; f < rank; ++f) {
          double& vjf = params.factor(j, f);
          const double g = zj == 0.0 ? 0.0 : c * zj * (sum_f[static_cast<std::size_t>(f)] - vjf * zj);
          vjf -= lr * (g + decay * vjf);
        }
      }
    }
    const double loss = fm_objective(samples, params, cfg.l2);
    if (!std::isfinite(loss) || !params.finite())
      throw TrainingError("training diverged at epoch " + std::to_string(epoch + 1));
    result.loss_trace.push_back(loss);
  }
  return result;
}

FmTrainResult fm_train(const LoggedDataset& d, const ThetaProvider& theta, const FmTrainConfig& cfg) {
  FeatureLayout layout{d.d_x, d.map.n_embeddings(), d.ranking_length};
  auto samples = fm_training_samples(d, theta, layout);
  if (samples.empty()) throw TrainingError("dataset has no observed rewards");
  return fm_train(samples, cfg);
}

RewardModel fm_reward_model(FmParams params, FeatureLayout layout) {
  return [params = std::move(params), layout](const Context& x, int e, int k) {
    return fm_predict(featurize(x, e, k, layout), params);
  };
}

}  // namespace ope_mnar
