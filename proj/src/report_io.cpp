#include "ope_mnar/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ope_mnar {

using nlohmann::json;
using nlohmann::ordered_json;

ConfigFileError::ConfigFileError(std::size_t line, const std::string& message)
    : ConfigError(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

namespace {

std::size_t line_at(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

// Locates keys in the raw text so semantic errors can carry a line number.
class KeyLocator {
 public:
  explicit KeyLocator(std::string_view text) : text_(text) {}

  /// Line of the first occurrence of "key" after the line of `parent`
  /// (or from the top when parent is empty).
  std::size_t line(std::string_view key, std::string_view parent = {}) const {
    std::size_t from = 0;
    if (!parent.empty()) {
      auto p = text_.find("\"" + std::string(parent) + "\"");
      if (p != std::string_view::npos) from = p;
    }
    auto pos = text_.find("\"" + std::string(key) + "\"", from);
    return pos == std::string_view::npos ? 0 : line_at(text_, pos);
  }

 private:
  std::string_view text_;
};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const KeyLocator& loc,
                    std::string_view parent = {}) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) {
      std::string where = parent.empty() ? "" : std::string(parent) + ".";
      throw ConfigFileError(loc.line(key, parent), "unknown config key '" + where + key + "'");
    }
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const KeyLocator& loc, std::string_view parent = {}) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_unsigned_v<T> && std::is_integral_v<T>) {
      if (it->is_number_integer() && it->template get<long long>() < 0)
        throw ConfigFileError(loc.line(key, parent), std::string("'") + key + "' must be non-negative");
    }
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigFileError(loc.line(key, parent), std::string("bad value for '") + key + "': " + e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string target_name(TargetKind t) { return t == TargetKind::Logging ? "logging" : "epsilon-greedy"; }

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigFileError(line_at(text, e.byte == 0 ? 0 : e.byte - 1), std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigFileError(1, "config must be a JSON object");
  KeyLocator loc(text);

  reject_unknown(root,
                 {"env", "alphas", "n", "n_seeds", "n_mc", "estimators", "fm", "fm_theta", "target", "resample_env",
                  "eval_seed", "threads", "output_dir", "chart", "verbosity"},
                 loc);

  RunConfig cfg;
  auto& s = cfg.sweep;
  if (auto it = root.find("env"); it != root.end()) {
    if (!it->is_object()) throw ConfigFileError(loc.line("env"), "'env' must be an object");
    reject_unknown(*it,
                   {"d_x", "n_actions", "n_embeddings", "ranking_length", "position_decay", "beta", "epsilon",
                    "reward_noise", "env_seed"},
                   loc, "env");
    read(*it, "d_x", s.env.d_x, loc, "env");
    read(*it, "n_actions", s.env.n_actions, loc, "env");
    read(*it, "n_embeddings", s.env.n_embeddings, loc, "env");
    read(*it, "ranking_length", s.env.ranking_length, loc, "env");
    read(*it, "position_decay", s.env.position_decay, loc, "env");
    read(*it, "beta", s.env.beta, loc, "env");
    read(*it, "epsilon", s.env.epsilon, loc, "env");
    read(*it, "reward_noise", s.env.reward_noise, loc, "env");
    read(*it, "env_seed", s.env.env_seed, loc, "env");
  }
  read(root, "alphas", s.alphas, loc);
  read(root, "n", s.n, loc);
  read(root, "n_seeds", s.n_seeds, loc);
  read(root, "n_mc", s.n_mc, loc);
  read(root, "estimators", s.estimators, loc);
  if (auto it = root.find("fm"); it != root.end()) {
    if (!it->is_object()) throw ConfigFileError(loc.line("fm"), "'fm' must be an object");
    reject_unknown(*it, {"rank", "learning_rate", "epochs", "l2", "init_scale", "seed"}, loc, "fm");
    read(*it, "rank", s.fm.rank, loc, "fm");
    read(*it, "learning_rate", s.fm.learning_rate, loc, "fm");
    read(*it, "epochs", s.fm.epochs, loc, "fm");
    read(*it, "l2", s.fm.l2, loc, "fm");
    read(*it, "init_scale", s.fm.init_scale, loc, "fm");
    read(*it, "seed", s.fm.seed, loc, "fm");
  }
  std::string fm_theta = s.fm_heuristic_theta ? "heuristic" : "true";
  read(root, "fm_theta", fm_theta, loc);
  if (fm_theta != "true" && fm_theta != "heuristic")
    throw ConfigFileError(loc.line("fm_theta"), "'fm_theta' must be \"true\" or \"heuristic\"");
  s.fm_heuristic_theta = fm_theta == "heuristic";
  std::string target = target_name(s.target);
  read(root, "target", target, loc);
  if (target != "epsilon-greedy" && target != "logging")
    throw ConfigFileError(loc.line("target"), "'target' must be \"epsilon-greedy\" or \"logging\"");
  s.target = target == "logging" ? TargetKind::Logging : TargetKind::EpsilonGreedy;
  read(root, "resample_env", s.resample_env, loc);
  read(root, "eval_seed", s.eval_seed, loc);
  read(root, "threads", s.threads, loc);
  read(root, "output_dir", cfg.output_dir, loc);
  read(root, "chart", cfg.chart, loc);
  read(root, "verbosity", cfg.verbosity, loc);

  // Attach the line of the offending key where the message names one.
  try {
    s.validate();
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    std::size_t line = 0;
    for (const char* key : {"n_seeds", "n_mc", "alphas", "estimators", "threads", "d_x", "n_actions", "n_embeddings",
                            "ranking_length", "position_decay", "beta", "epsilon", "reward_noise", "rank",
                            "learning_rate", "epochs", "l2", "init_scale"}) {
      if (msg.find(key) != std::string::npos) {
        line = loc.line(key);
        break;
      }
    }
    if (line == 0 && msg.find("n must") != std::string::npos) line = loc.line("n");
    throw ConfigFileError(line, msg);
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigFileError(0, "cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

namespace {

ordered_json config_to_json(const RunConfig& cfg) {
  const auto& s = cfg.sweep;
  ordered_json j;
  j["env"] = {{"d_x", s.env.d_x},
              {"n_actions", s.env.n_actions},
              {"n_embeddings", s.env.n_embeddings},
              {"ranking_length", s.env.ranking_length},
              {"position_decay", s.env.position_decay},
              {"beta", s.env.beta},
              {"epsilon", s.env.epsilon},
              {"reward_noise", s.env.reward_noise},
              {"env_seed", s.env.env_seed}};
  j["alphas"] = s.alphas;
  j["n"] = s.n;
  j["n_seeds"] = s.n_seeds;
  j["n_mc"] = s.n_mc;
  j["estimators"] = s.estimators;
  j["fm"] = {{"rank", s.fm.rank},   {"learning_rate", s.fm.learning_rate}, {"epochs", s.fm.epochs},
             {"l2", s.fm.l2},       {"init_scale", s.fm.init_scale},       {"seed", s.fm.seed}};
  j["fm_theta"] = s.fm_heuristic_theta ? "heuristic" : "true";
  j["target"] = target_name(s.target);
  j["resample_env"] = s.resample_env;
  j["eval_seed"] = s.eval_seed;
  j["threads"] = s.threads;
  j["output_dir"] = cfg.output_dir;
  j["chart"] = cfg.chart;
  j["verbosity"] = cfg.verbosity;
  return j;
}

}  // namespace

std::string run_config_json(const RunConfig& cfg, int indent) { return config_to_json(cfg).dump(indent); }

std::string results_csv(const SweepSummary& summary) {
  std::string out(kResultsHeader);
  out += '\n';
  for (const auto& r : summary.rows) {
    out += format_double(r.alpha) + ',' + r.estimator + ',' + format_double(r.mse) + ',' +
           format_double(r.squared_bias) + ',' + format_double(r.variance) + ',' + format_double(r.mean_estimate) +
           ',' + format_double(r.true_value) + ',' + std::to_string(r.n_seeds) + '\n';
  }
  return out;
}

SweepSummary parse_results_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw ConfigError("results CSV has an unexpected header");
  SweepSummary summary;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw ConfigError("results CSV line " + std::to_string(line_no) + " has " +
                                             std::to_string(cells.size()) + " columns");
    try {
      SweepRow r;
      r.alpha = std::stod(cells[0]);
      r.estimator = cells[1];
      r.mse = std::stod(cells[2]);
      r.squared_bias = std::stod(cells[3]);
      r.variance = std::stod(cells[4]);
      r.mean_estimate = std::stod(cells[5]);
      r.true_value = std::stod(cells[6]);
      r.n_seeds = std::stoull(cells[7]);
      summary.rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ConfigError("results CSV line " + std::to_string(line_no) + " has a malformed number");
    }
  }
  return summary;
}

std::string summary_json(const RunConfig& cfg, const SweepSummary& summary) {
  ordered_json j;
  j["config"] = config_to_json(cfg);
  ordered_json per_alpha = ordered_json::array();
  std::vector<double> alphas;
  for (const auto& r : summary.rows)
    if (std::find(alphas.begin(), alphas.end(), r.alpha) == alphas.end()) alphas.push_back(r.alpha);
  for (double a : alphas) {
    ordered_json entry;
    entry["alpha"] = a;
    auto it = summary.truth_std_error.find(a);
    entry["true_value_std_error"] = it == summary.truth_std_error.end() ? 0.0 : it->second;
    ordered_json se;
    for (const auto& r : summary.rows)
      if (r.alpha == a) se[r.estimator] = r.std_error;
    entry["estimate_std_errors"] = se;
    per_alpha.push_back(entry);
  }
  j["standard_errors"] = per_alpha;
  ordered_json rows = ordered_json::array();
  for (const auto& r : summary.rows) {
    rows.push_back({{"alpha", r.alpha},
                    {"estimator", r.estimator},
                    {"mse", r.mse},
                    {"squared_bias", r.squared_bias},
                    {"variance", r.variance},
                    {"mean_estimate", r.mean_estimate},
                    {"true_value", r.true_value},
                    {"n_seeds", r.n_seeds},
                    {"std_error", r.std_error}});
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

std::string figure_svg(const SweepSummary& summary) {
  constexpr double kFloor = 1e-12;
  constexpr int kPanelW = 360;
  constexpr int kPanelH = 280;
  constexpr int kMarginL = 70;
  constexpr int kMarginT = 40;
  constexpr int kGap = 40;
  constexpr int kLegendH = 30;
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::vector<std::string> names;
  std::vector<double> alphas;
  for (const auto& r : summary.rows) {
    if (std::find(names.begin(), names.end(), r.estimator) == names.end()) names.push_back(r.estimator);
    if (std::find(alphas.begin(), alphas.end(), r.alpha) == alphas.end()) alphas.push_back(r.alpha);
  }
  std::sort(alphas.begin(), alphas.end());
  const double a_lo = alphas.empty() ? 0.0 : alphas.front();
  const double a_hi = alphas.empty() ? 1.0 : std::max(alphas.back(), a_lo + 1e-9);

  struct Panel {
    const char* title;
    double SweepRow::*field;
  };
  const Panel panels[] = {{"MSE", &SweepRow::mse},
                          {"Squared bias", &SweepRow::squared_bias},
                          {"Variance", &SweepRow::variance}};

  const int width = 3 * (kMarginL + kPanelW) + 2 * kGap;
  const int height = kMarginT + kPanelH + 50 + kLegendH;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (int pi = 0; pi < 3; ++pi) {
    const auto& panel = panels[pi];
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& r : summary.rows) {
      double v = std::log10(std::max(r.*panel.field, kFloor));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) lo = std::log10(kFloor), hi = 0.0;
    lo = std::floor(lo);
    hi = std::max(std::ceil(hi), lo + 1.0);

    const int x0 = pi * (kMarginL + kPanelW + kGap) + kMarginL;
    const int y0 = kMarginT;
    auto px = [&](double a) { return x0 + (a - a_lo) / (a_hi - a_lo) * kPanelW; };
    auto py = [&](double v) { return y0 + kPanelH - (std::log10(std::max(v, kFloor)) - lo) / (hi - lo) * kPanelH; };

    svg << "<text x=\"" << x0 + kPanelW / 2 << "\" y=\"" << y0 - 15 << "\" text-anchor=\"middle\" font-size=\"14\">"
        << panel.title << "</text>\n";
    svg << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << kPanelW << "\" height=\"" << kPanelH
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int decade = static_cast<int>(lo); decade <= static_cast<int>(hi); ++decade) {
      double y = y0 + kPanelH - (decade - lo) / (hi - lo) * kPanelH;
      svg << "<line x1=\"" << x0 << "\" y1=\"" << y << "\" x2=\"" << x0 + kPanelW << "\" y2=\"" << y
          << "\" stroke=\"#ddd\"/>\n";
      svg << "<text x=\"" << x0 - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << decade << "</text>\n";
    }
    for (double a : alphas) {
      svg << "<text x=\"" << px(a) << "\" y=\"" << y0 + kPanelH + 16 << "\" text-anchor=\"middle\">" << a
          << "</text>\n";
    }
    svg << "<text x=\"" << x0 + kPanelW / 2 << "\" y=\"" << y0 + kPanelH + 34
        << "\" text-anchor=\"middle\">alpha</text>\n";

    for (std::size_t ni = 0; ni < names.size(); ++ni) {
      std::vector<std::pair<double, double>> pts;
      for (const auto& r : summary.rows)
        if (r.estimator == names[ni]) pts.emplace_back(r.alpha, r.*panel.field);
      std::sort(pts.begin(), pts.end());
      const char* color = palette[ni % std::size(palette)];
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (const auto& [a, v] : pts) svg << px(a) << ',' << py(v) << ' ';
      svg << "\"/>\n";
      for (const auto& [a, v] : pts)
        svg << "<circle cx=\"" << px(a) << "\" cy=\"" << py(v) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
  }

  const int legend_y = kMarginT + kPanelH + 65;
  for (std::size_t ni = 0; ni < names.size(); ++ni) {
    const int lx = kMarginL + static_cast<int>(ni) * 220;
    svg << "<line x1=\"" << lx << "\" y1=\"" << legend_y - 4 << "\" x2=\"" << lx + 24 << "\" y2=\"" << legend_y - 4
        << "\" stroke=\"" << palette[ni % std::size(palette)] << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << lx + 30 << "\" y=\"" << legend_y << "\">" << names[ni] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace ope_mnar
