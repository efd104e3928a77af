#include <cmath>
#include <string>

#include "doctest.h"
#include "ope_mnar/harness.hpp"

using namespace ope_mnar;

namespace {

SweepConfig small_config() {
  SweepConfig cfg;
  cfg.env.n_actions = 40;
  cfg.env.n_embeddings = 3;
  cfg.env.ranking_length = 3;
  cfg.alphas = {0.0, 2.0};
  cfg.n = 200;
  cfg.n_seeds = 6;
  cfg.n_mc = 2000;
  cfg.fm.epochs = 3;
  return cfg;
}

}  // namespace

TEST_CASE("mse_decomposition") {
  auto check = [](std::vector<double> v, double truth, double mse, double bias2, double var) {
    auto d = mse_decomposition(v, truth);
    CHECK(d.mse == doctest::Approx(mse).epsilon(1e-14));
    CHECK(d.squared_bias == doctest::Approx(bias2).epsilon(1e-14));
    CHECK(d.variance == doctest::Approx(var).epsilon(1e-14));
  };
  check({1, 3}, 2, 1, 0, 1);
  check({2, 2, 2}, 2, 0, 0, 0);
  check({0, 0}, 2, 4, 4, 0);
  CHECK_THROWS_AS(mse_decomposition(std::vector<double>{1.0}, 0.0), StatisticsError);
  CHECK_THROWS_AS(mse_decomposition(std::vector<double>{}, 0.0), StatisticsError);
}

TEST_CASE("sweep config validation") {
  auto cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.n_seeds = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.alphas = {-1.0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.estimators = {"vanilla-ips"};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("sweep shape, identity and determinism") {
  auto cfg = small_config();
  auto a = alpha_sweep(cfg);
  auto b = alpha_sweep(cfg);
  REQUIRE(a.rows.size() == cfg.alphas.size() * cfg.estimators.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& r = a.rows[i];
    CHECK(std::abs(r.mse - r.squared_bias - r.variance) <= 1e-9 * std::max(1.0, r.mse));
    CHECK(r.n_seeds == cfg.n_seeds);
    CHECK(r.mse == b.rows[i].mse);
    CHECK(r.mean_estimate == b.rows[i].mean_estimate);
  }
  CHECK(a.find(2.0, kMips) != nullptr);
  CHECK(a.find(5.0, kMips) == nullptr);
}

TEST_CASE("thread count does not change results") {
  auto cfg = small_config();
  cfg.alphas = {1.0};
  cfg.threads = 1;
  auto serial = run_replications(cfg, 1.0);
  cfg.threads = 4;
  auto parallel = run_replications(cfg, 1.0);
  CHECK(serial.estimates == parallel.estimates);
  CHECK(serial.truth.total == parallel.truth.total);
}

TEST_CASE("full observation makes mips and true-propensity mips coincide") {
  auto cfg = small_config();
  cfg.estimators = {std::string(kMips), std::string(kMipsTrueRoips), std::string(kMipsHeuristicRoips)};
  auto rep = run_replications(cfg, 0.0);
  const auto& m = rep.estimates.at(std::string(kMips));
  const auto& t = rep.estimates.at(std::string(kMipsTrueRoips));
  const auto& h = rep.estimates.at(std::string(kMipsHeuristicRoips));
  for (std::size_t s = 0; s < m.size(); ++s) {
    CHECK(std::abs(m[s] - t[s]) <= 1e-12);
    CHECK(m[s] == h[s]);
  }
}

TEST_CASE("on-policy mips is centred on the truth") {
  auto cfg = small_config();
  cfg.estimators = {std::string(kMips)};
  cfg.target = TargetKind::Logging;
  cfg.n_seeds = 40;
  cfg.n_mc = 20000;
  auto rep = run_replications(cfg, 0.0);
  auto summary = summarize(rep, cfg.estimators);
  const auto* row = summary.find(0.0, kMips);
  REQUIRE(row != nullptr);
  const double se = std::hypot(row->std_error, summary.truth_std_error.at(0.0));
  CHECK(std::abs(row->mean_estimate - row->true_value) <= 3.0 * se);
}

TEST_CASE("mips bias grows with the observation bias") {
  auto cfg = small_config();
  cfg.estimators = {std::string(kMips)};
  cfg.alphas = {0.0, 3.0};
  cfg.n_seeds = 10;
  auto s = alpha_sweep(cfg);
  CHECK(s.find(3.0, kMips)->squared_bias > s.find(0.0, kMips)->squared_bias);
}

TEST_CASE("resampled environments centre errors on per-seed truth") {
  auto cfg = small_config();
  cfg.estimators = {std::string(kMips)};
  cfg.resample_env = true;
  auto rep = run_replications(cfg, 1.0);
  REQUIRE(rep.seed_truth.size() == cfg.n_seeds);
  CHECK(rep.seed_truth.front() != rep.seed_truth.back());
  auto row = summarize(rep, cfg.estimators).rows.at(0);
  CHECK(std::abs(row.mse - row.squared_bias - row.variance) <= 1e-9 * std::max(1.0, row.mse));
}

TEST_CASE("training failures report the offending seed") {
  auto cfg = small_config();
  cfg.estimators = {std::string(kDmFm)};
  cfg.fm.learning_rate = 1e6;
  try {
    run_replications(cfg, 1.0);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).rfind("seed 0: ", 0) == 0);
  }
}

TEST_CASE("worker_count") {
  CHECK(worker_count(3) == 3);
  CHECK(worker_count(0) >= 1);
}
