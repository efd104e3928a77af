#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "ope_mnar/report_io.hpp"

using namespace ope_mnar;

namespace {

SweepSummary sample_summary() {
  SweepSummary s;
  for (double alpha : {0.0, 1.5}) {
    for (const char* name : {"mips", "mips-heuristic-roips"}) {
      std::vector<double> est{0.1 + alpha, 0.35, 1.0 / 3.0, -0.2 * alpha};
      auto d = mse_decomposition(est, 0.4);
      SweepRow r;
      r.alpha = alpha;
      r.estimator = name;
      r.mse = d.mse;
      r.squared_bias = d.squared_bias;
      r.variance = d.variance;
      r.mean_estimate = (est[0] + est[1] + est[2] + est[3]) / 4;
      r.true_value = 0.4;
      r.n_seeds = est.size();
      r.std_error = 0.01;
      s.rows.push_back(r);
    }
    s.truth_std_error[alpha] = 0.002;
  }
  return s;
}

std::size_t error_line(std::string_view text) {
  try {
    parse_run_config(text);
  } catch (const ConfigFileError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("empty config resolves to defaults") {
  auto cfg = parse_run_config("{}");
  CHECK(cfg.sweep.n == 1000);
  CHECK(cfg.sweep.n_seeds == 100);
  CHECK(cfg.sweep.alphas == std::vector<double>{0, 1, 2, 3});
  CHECK(cfg.sweep.env.n_actions == 500);
  CHECK(cfg.sweep.env.n_embeddings == 5);
  CHECK(cfg.sweep.env.ranking_length == 5);
  CHECK(cfg.sweep.estimators.size() == 4);
  CHECK(cfg.chart);
}

TEST_CASE("config values override defaults") {
  auto cfg = parse_run_config(R"({
  "env": {"n_actions": 20, "beta": -1.0},
  "alphas": [0.5],
  "n_seeds": 3,
  "estimators": ["mips"],
  "fm": {"epochs": 7},
  "fm_theta": "heuristic",
  "target": "logging",
  "output_dir": "out",
  "chart": false
})");
  CHECK(cfg.sweep.env.n_actions == 20);
  CHECK(cfg.sweep.env.beta == -1.0);
  CHECK(cfg.sweep.alphas == std::vector<double>{0.5});
  CHECK(cfg.sweep.n_seeds == 3);
  CHECK(cfg.sweep.estimators == std::vector<std::string>{"mips"});
  CHECK(cfg.sweep.fm.epochs == 7);
  CHECK(cfg.sweep.fm_heuristic_theta);
  CHECK(cfg.sweep.target == TargetKind::Logging);
  CHECK(cfg.output_dir == "out");
  CHECK_FALSE(cfg.chart);

  auto round = parse_run_config(run_config_json(cfg));
  CHECK(run_config_json(round) == run_config_json(cfg));
}

TEST_CASE("config errors carry line numbers") {
  CHECK(error_line("{\n  \"n\": 10,\n  \"bogus\": 1\n}") == 3);
  CHECK(error_line("{\n  \"env\": {\n    \"d_x\": 2,\n    \"colour\": 1\n  }\n}") == 4);
  CHECK(error_line("{\n  \"n_seeds\": 1\n}") == 2);
  CHECK(error_line("{\n  \"n\": 10,\n  \"n_seeds\": ,\n}") == 3);
  CHECK(error_line("{\n  \"target\": \"greedy\"\n}") == 2);
  CHECK(error_line("{\n  \"n\": -4\n}") == 2);
  CHECK_THROWS_AS(parse_run_config("[1, 2]"), ConfigError);
}

TEST_CASE("results CSV round trip") {
  auto s = sample_summary();
  auto text = results_csv(s);
  CHECK(text.rfind(std::string(kResultsHeader) + "\n", 0) == 0);
  auto back = parse_results_csv(text);
  REQUIRE(back.rows.size() == s.rows.size());
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    const auto& a = s.rows[i];
    const auto& b = back.rows[i];
    CHECK(a.alpha == b.alpha);
    CHECK(a.estimator == b.estimator);
    CHECK(a.mse == b.mse);
    CHECK(a.squared_bias == b.squared_bias);
    CHECK(a.variance == b.variance);
    CHECK(a.mean_estimate == b.mean_estimate);
    CHECK(a.n_seeds == b.n_seeds);
    CHECK(std::abs(b.mse - b.squared_bias - b.variance) <= 1e-9 * std::max(1.0, b.mse));
  }
  CHECK(results_csv(back) == text);
  CHECK_THROWS_AS(parse_results_csv("alpha,estimator\n"), ConfigError);
  CHECK_THROWS_AS(parse_results_csv(std::string(kResultsHeader) + "\n0,mips,1,2\n"), ConfigError);
}

TEST_CASE("summary JSON holds the resolved config and standard errors") {
  RunConfig cfg;
  auto j = nlohmann::json::parse(summary_json(cfg, sample_summary()));
  CHECK(j["config"]["n_seeds"] == 100);
  CHECK(j["config"]["env"]["n_actions"] == 500);
  REQUIRE(j["standard_errors"].size() == 2);
  CHECK(j["standard_errors"][1]["alpha"] == 1.5);
  CHECK(j["standard_errors"][1]["true_value_std_error"] == 0.002);
  CHECK(j["standard_errors"][0]["estimate_std_errors"]["mips"] == 0.01);
  CHECK(j["rows"].size() == 4);
}

TEST_CASE("figure has three panels and a legend") {
  auto s = sample_summary();
  s.rows[0].squared_bias = 0.0;  // floored on the log axis
  auto svg = figure_svg(s);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find(">MSE</text>") != std::string::npos);
  CHECK(svg.find(">Squared bias</text>") != std::string::npos);
  CHECK(svg.find(">Variance</text>") != std::string::npos);
  CHECK(svg.find("mips-heuristic-roips") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
  CHECK(svg.find("inf") == std::string::npos);
}

TEST_CASE("write_text_file") {
  auto dir = std::filesystem::temp_directory_path() / "ope_mnar_report_io_test";
  std::filesystem::create_directories(dir);
  write_text_file(dir / "a.txt", "hello\n");
  std::ifstream in(dir / "a.txt");
  std::string line;
  std::getline(in, line);
  CHECK(line == "hello");
  CHECK_THROWS(write_text_file(dir / "missing" / "b.txt", "x"));
  std::filesystem::remove_all(dir);
}
