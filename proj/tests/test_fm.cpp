#include <cmath>
#include <random>

#include "doctest.h"
#include "ope_mnar/fm.hpp"

using namespace ope_mnar;

namespace {

// Central differences over every parameter of an FmParams, in the order
// w0, w, V.
std::vector<double*> parameter_slots(FmParams& p) {
  std::vector<double*> slots{&p.w0};
  for (auto& x : p.w) slots.push_back(&x);
  for (auto& x : p.v) slots.push_back(&x);
  return slots;
}

std::vector<FmSample> random_samples(std::mt19937_64& rng, int p, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> theta(0.05, 1.0);
  std::vector<FmSample> samples(static_cast<std::size_t>(n));
  for (auto& s : samples) {
    s.z.resize(static_cast<std::size_t>(p));
    for (auto& z : s.z) z = normal(rng);
    s.target = normal(rng);
    s.weight = 1.0 / theta(rng);
  }
  return samples;
}

EnvModel train_env(double alpha) {
  EnvParams p;
  p.n_actions = 50;
  p.alpha = alpha;
  p.env_seed = 5;
  return EnvModel::generate(p);
}

}  // namespace

TEST_CASE("featurize concatenates context and one-hot indices") {
  FeatureLayout layout{2, 2, 2};
  CHECK(featurize(Context{{0.3, -0.1}}, 1, 0, layout) == std::vector<double>{0.3, -0.1, 0, 1, 1, 0});
  CHECK(featurize(Context{{0.0, 0.0}}, 0, 1, layout) == std::vector<double>{0, 0, 1, 0, 0, 1});
  CHECK(featurize(Context{{0.3, -0.1}}, 1, 0, layout) == featurize(Context{{0.3, -0.1}}, 1, 0, layout));
  CHECK_THROWS_AS(featurize(Context{{0.0, 0.0}}, 2, 0, layout), ConfigError);
  CHECK_THROWS_AS(featurize(Context{{0.0, 0.0}}, 0, 2, layout), ConfigError);
  CHECK_THROWS_AS(featurize(Context{{0.0}}, 0, 0, layout), ConfigError);
}

TEST_CASE("fm_predict") {
  FmParams zero(3, 2);
  CHECK(fm_predict(std::vector<double>{1.0, -2.0, 0.5}, zero) == 0.0);

  FmParams linear(3, 2);
  linear.w0 = 0.5;
  linear.w = {1.0, 2.0, -1.0};
  CHECK(fm_predict(std::vector<double>{1.0, -2.0, 0.5}, linear) == doctest::Approx(0.5 + 1.0 - 4.0 - 0.5));

  FmParams small(2, 1);
  small.w0 = 1.0;
  small.w = {1.0, 2.0};
  small.v = {1.0, 2.0};
  CHECK(fm_predict(std::vector<double>{1.0, 1.0}, small) == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("fm_predict matches the explicit pairwise sum") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 2 + trial % 7, rank = 1 + trial % 4;
    FmParams params(p, rank);
    params.w0 = normal(rng);
    for (auto& x : params.w) x = normal(rng);
    for (auto& x : params.v) x = normal(rng);
    std::vector<double> z(static_cast<std::size_t>(p));
    for (auto& x : z) x = normal(rng);

    double expected = params.w0;
    for (int j = 0; j < p; ++j) expected += params.w[static_cast<std::size_t>(j)] * z[static_cast<std::size_t>(j)];
    for (int j = 0; j < p; ++j)
      for (int l = j + 1; l < p; ++l) {
        double dot = 0.0;
        for (int f = 0; f < rank; ++f) dot += params.factor(j, f) * params.factor(l, f);
        expected += dot * z[static_cast<std::size_t>(j)] * z[static_cast<std::size_t>(l)];
      }
    CHECK(std::abs(fm_predict(z, params) - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));
  }
}

TEST_CASE("analytic gradient matches central differences") {
  constexpr double kStep = 1e-5;
  constexpr double kRelTol = 1e-4;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (int instance = 0; instance < 20; ++instance) {
    const int p = 3 + instance % 5, rank = 1 + instance % 3;
    auto samples = random_samples(rng, p, 8);
    FmParams params(p, rank);
    params.w0 = normal(rng);
    for (auto& x : params.w) x = normal(rng);
    for (auto& x : params.v) x = normal(rng);
    const double l2 = 0.01 * (instance % 3);

    auto analytic = fm_objective_gradient(samples, params, l2);
    auto a_slots = parameter_slots(analytic);
    auto slots = parameter_slots(params);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const double saved = *slots[i];
      *slots[i] = saved + kStep;
      const double up = fm_objective(samples, params, l2);
      *slots[i] = saved - kStep;
      const double down = fm_objective(samples, params, l2);
      *slots[i] = saved;
      const double numeric = (up - down) / (2 * kStep);
      const double rel = std::abs(numeric - *a_slots[i]) / std::max(1.0, std::abs(numeric));
      INFO("instance " << instance << " slot " << i);
      CHECK(rel <= kRelTol);
    }
  }
}

TEST_CASE("unit propensities give the unweighted squared loss") {
  auto env = train_env(1.0);
  auto d = sample_dataset(env, 200, 1);
  FeatureLayout layout{d.d_x, d.map.n_embeddings(), d.ranking_length};
  auto samples = fm_training_samples(d, ThetaProvider::constant(1.0), layout);
  FmTrainConfig cfg;
  auto params = fm_init(layout.size(), cfg);

  double unweighted = 0.0;
  std::size_t observed = 0;
  for (const auto& rec : d.records)
    for (int k = 0; k < d.ranking_length; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (!rec.observation.mask[uk]) continue;
      ++observed;
      const double r = *rec.rewards[uk] - fm_predict(featurize(rec.context, rec.ranking.embeddings[uk], k, layout), params);
      unweighted += r * r;
    }
  CHECK(samples.size() == observed);
  CHECK(fm_objective(samples, params, 0.0) == unweighted);
}

TEST_CASE("training lowers the weighted loss") {
  auto env = train_env(1.0);
  auto d = sample_dataset(env, 1000, 9);
  FmTrainConfig cfg;
  cfg.seed = 4;
  auto result = fm_train(d, ThetaProvider::true_model(env), cfg);
  REQUIRE(result.loss_trace.size() == static_cast<std::size_t>(cfg.epochs));
  CHECK(result.loss_trace.back() < result.initial_loss);
  CHECK(result.params.finite());
}

TEST_CASE("training recovers a linear target") {
  std::mt19937_64 rng(8);
  FeatureLayout layout{3, 2, 2};
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 1);
  std::uniform_real_distribution<double> theta(0.2, 1.0);
  const std::vector<double> coef{0.4, -0.3, 0.2, 0.1, -0.2, 0.3, 0.05};
  const double intercept = 0.25;

  std::vector<FmSample> samples;
  for (int i = 0; i < 2000; ++i) {
    Context x{{normal(rng), normal(rng), normal(rng)}};
    FmSample s;
    s.z = featurize(x, pick(rng), pick(rng), layout);
    s.target = intercept;
    for (std::size_t j = 0; j < coef.size(); ++j) s.target += coef[j] * s.z[j];
    s.weight = 1.0 / theta(rng);
    samples.push_back(std::move(s));
  }
  FmTrainConfig cfg;
  cfg.l2 = 0.0;
  cfg.seed = 1;
  auto result = fm_train(samples, cfg);

  double weighted = 0.0, total_weight = 0.0;
  for (const auto& s : samples) {
    const double r = s.target - fm_predict(s.z, result.params);
    weighted += s.weight * r * r;
    total_weight += s.weight;
  }
  CHECK(weighted / total_weight <= 1e-3);
}

TEST_CASE("training is deterministic and rejects empty input") {
  auto env = train_env(2.0);
  auto d = sample_dataset(env, 300, 2);
  FmTrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 3;
  auto a = fm_train(d, ThetaProvider::true_model(env), cfg);
  auto b = fm_train(d, ThetaProvider::true_model(env), cfg);
  CHECK(a.params.w0 == b.params.w0);
  CHECK(a.params.w == b.params.w);
  CHECK(a.params.v == b.params.v);
  CHECK(a.loss_trace == b.loss_trace);

  for (auto& rec : d.records) {
    rec.observation.mask.assign(rec.observation.mask.size(), false);
    for (auto& r : rec.rewards) r.reset();
  }
  CHECK_THROWS_AS(fm_train(d, ThetaProvider::true_model(env), cfg), TrainingError);
  CHECK_THROWS_AS(fm_train(std::span<const FmSample>{}, cfg), TrainingError);

  cfg.rank = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
