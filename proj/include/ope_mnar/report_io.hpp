#pragma once

// Run configuration files and result artifacts (CSV, JSON summary, SVG).

#include <filesystem>
#include <string>
#include <string_view>

#include "ope_mnar/harness.hpp"

namespace ope_mnar {

struct RunConfig {
  SweepConfig sweep;
  std::string output_dir;
  bool chart = true;
  int verbosity = 1;
};

/// Thrown for malformed configuration text; line() is 1-based, 0 if unknown.
class ConfigFileError : public ConfigError {
 public:
  ConfigFileError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Parses JSON configuration text. Unknown keys are rejected; missing keys
/// keep their defaults. The resolved sweep config is validated.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Resolved configuration as JSON text (every field, defaults filled in).
std::string run_config_json(const RunConfig& cfg, int indent = 2);

inline constexpr std::string_view kResultsHeader =
    "alpha,estimator,mse,squared_bias,variance,mean_estimate,true_value,n_seeds";

std::string results_csv(const SweepSummary& summary);
/// Parses results_csv output back into rows. std_error is not stored in the
/// CSV and is left at zero.
SweepSummary parse_results_csv(std::string_view text);

std::string summary_json(const RunConfig& cfg, const SweepSummary& summary);

/// Three panels (MSE, squared bias, variance) against alpha, one line per
/// estimator, log-scaled vertical axis floored at 1e-12.
std::string figure_svg(const SweepSummary& summary);

/// Writes text to path; throws std::runtime_error when the write fails.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace ope_mnar
