#include <cmath>
#include <random>

#include "doctest.h"
#include "ope_mnar/core.hpp"

using namespace ope_mnar;

namespace {

LoggedDataset three_records() {
  EmbeddingMap map({0, 0, 1}, 2);
  LoggedDataset d;
  d.map = map;
  d.d_x = 2;
  d.ranking_length = 2;
  for (int i = 0; i < 3; ++i) {
    LoggedRecord r;
    r.context = Context{{0.1 * i, -0.2}};
    r.ranking = RankingAction::from_actions({i % 3, 2}, map);
    r.observation.mask = {true, i != 1};
    r.rewards = {0.5, i != 1 ? std::optional<double>(0.25) : std::nullopt};
    d.records.push_back(r);
  }
  return d;
}

std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  double total = 0.0;
  for (auto& x : p) total += (x = u(rng));
  for (auto& x : p) x /= total;
  return p;
}

}  // namespace

TEST_CASE("marginal_embedding_probs sums actions per embedding") {
  auto m = marginal_embedding_probs(std::vector<double>{0.5, 0.3, 0.2}, EmbeddingMap({0, 0, 1}, 2));
  REQUIRE(m.size() == 2);
  CHECK(m[0] == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(m[1] == doctest::Approx(0.2).epsilon(1e-14));
  auto uniform = marginal_embedding_probs(std::vector<double>(4, 0.25), EmbeddingMap({0, 1, 0, 1}, 2));
  CHECK(uniform == std::vector<double>{0.5, 0.5});
  CHECK(marginal_embedding_probs(std::vector<double>{0, 0, 1}, EmbeddingMap({0, 0, 1}, 2)) ==
        std::vector<double>{0, 1});
}

TEST_CASE("marginal_embedding_probs rejects a length mismatch") {
  CHECK_THROWS_AS(marginal_embedding_probs(std::vector<double>{0.5, 0.5}, EmbeddingMap({0, 0, 1}, 2)), ConfigError);
}

TEST_CASE("marginalization preserves mass and is linear") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int A = std::uniform_int_distribution<int>(2, 40)(rng);
    const int E = std::uniform_int_distribution<int>(1, A)(rng);
    std::vector<int> assign(static_cast<std::size_t>(A));
    for (int a = 0; a < A; ++a) assign[static_cast<std::size_t>(a)] = a < E ? a : std::uniform_int_distribution<int>(0, E - 1)(rng);
    EmbeddingMap map(assign, E);
    auto p = random_distribution(rng, static_cast<std::size_t>(A));
    auto q = random_distribution(rng, static_cast<std::size_t>(A));
    const double mix = std::uniform_real_distribution<double>(0.0, 1.0)(rng);

    auto mp = marginal_embedding_probs(p, map);
    auto mq = marginal_embedding_probs(q, map);
    double total = 0.0;
    for (double v : mp) total += v;
    CHECK(std::abs(total - 1.0) <= 1e-9);

    std::vector<double> blend(static_cast<std::size_t>(A));
    for (std::size_t a = 0; a < blend.size(); ++a) blend[a] = mix * p[a] + (1 - mix) * q[a];
    auto mb = marginal_embedding_probs(blend, map);
    for (std::size_t e = 0; e < mb.size(); ++e) CHECK(std::abs(mb[e] - (mix * mp[e] + (1 - mix) * mq[e])) <= 1e-9);
  }
}

TEST_CASE("embedding map rejects empty categories and bad indices") {
  CHECK_THROWS_AS(EmbeddingMap({0, 0, 0}, 2), ConfigError);
  CHECK_THROWS_AS(EmbeddingMap({0, 2}, 2), ConfigError);
  EmbeddingMap m({1, 0, 1}, 2);
  CHECK(m.counts() == std::vector<int>{1, 2});
  CHECK(m.members(1) == std::vector<int>{0, 2});
}

TEST_CASE("policy distribution check") {
  PolicyDistribution p(1, 2);
  p.row(0)[0] = 0.4;
  p.row(0)[1] = 0.6;
  CHECK_NOTHROW(p.check());
  p.row(0)[1] = 0.5;
  CHECK_THROWS_AS(p.check(), ConfigError);
}

TEST_CASE("validate_dataset") {
  SUBCASE("well-formed dataset is ok") { CHECK(validate_dataset(three_records()).ok()); }

  SUBCASE("reward present on an unobserved position") {
    auto d = three_records();
    d.records[1].rewards[1] = 1.0;
    auto report = validate_dataset(d);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].record == 1);
    CHECK(report.violations[0].rule.find("unobserved") != std::string::npos);
  }

  SUBCASE("embedding inconsistent with the map") {
    auto d = three_records();
    d.records[2].ranking.embeddings[0] = 0;  // action 2 belongs to embedding 1
    auto report = validate_dataset(d);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].record == 2);
    CHECK(report.violations[0].rule.find("embedding") != std::string::npos);
  }

  SUBCASE("observed position without reward") {
    auto d = three_records();
    d.records[0].rewards[0].reset();
    CHECK_FALSE(validate_dataset(d).ok());
  }

  SUBCASE("wrong context length") {
    auto d = three_records();
    d.records[0].context.values.push_back(1.0);
    CHECK(validate_dataset(d).violations.at(0).record == 0);
  }
}
