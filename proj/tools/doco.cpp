#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "doco/config.hpp"
#include "doco/report.hpp"

namespace {

// "8..13" is the exponent range 2^8..2^13; "100,200,400" lists horizons.
std::vector<std::size_t> parse_horizons(const std::string& text) {
  std::vector<std::size_t> out;
  if (auto dots = text.find(".."); dots != std::string::npos) {
    const int lo = std::stoi(text.substr(0, dots)), hi = std::stoi(text.substr(dots + 2));
    if (lo < 0 || hi < lo || hi > 40) throw doco::ConfigError("horizons", "bad exponent range '" + text + "'");
    for (int k = lo; k <= hi; ++k) out.push_back(std::size_t{1} << k);
    return out;
  }
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const long long v = std::stoll(cell);
    if (v < 1) throw doco::ConfigError("horizons", "horizons must be positive");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed online constrained optimization simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, trace_dir, horizons = "8..13";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool strict = false, audit = false;
  std::size_t seeds = 1;

  auto* run = app.add_subcommand("run", "run one experiment and write trace, metrics and summary");
  run->add_option("--config", config_path, "JSON config file")->required();
  run->add_option("--out", out_dir, "output directory (falls back to DOCO_OUT_DIR)");
  auto* f_strict = run->add_flag("--strict", strict, "abort on the first invariant violation");
  run->add_flag("--audit", audit, "log invariant violations and continue")->excludes(f_strict);
  run->add_option("--threads", threads, "worker threads for the per-node updates");
  run->add_option("--seed", seed, "override problem.seed");

  auto* evaluate = app.add_subcommand("evaluate", "recompute metrics from a stored run");
  evaluate->add_option("--trace", trace_dir, "run directory containing summary.json and trace.csv")->required();

  auto* sweep = app.add_subcommand("sweep", "regret and fit over a range of horizons");
  sweep->add_option("--config", config_path, "JSON config file")->required();
  sweep->add_option("--horizons", horizons, "exponent range lo..hi (powers of two) or a comma list");
  sweep->add_option("--seeds", seeds, "number of consecutive seeds; medians are reported");
  sweep->add_option("--out", out_dir, "output directory (falls back to DOCO_OUT_DIR)");
  sweep->add_option("--threads", threads, "worker threads");
  sweep->add_option("--seed", seed, "override problem.seed");

  auto* check = app.add_subcommand("check", "property suites and an audited run");
  check->add_option("--config", config_path, "JSON config file")->required();
  check->add_option("--seed", seed, "override problem.seed");

  CLI11_PARSE(app, argc, argv);

  namespace report = doco::report;
  doco::config::RunConfig cfg;
  if (!evaluate->parsed()) {
    try {
      cfg = doco::config::load_config(config_path, seed);
      if (strict) cfg.mode = doco::algorithm::Mode::strict;
      if (audit) cfg.mode = doco::algorithm::Mode::audit;
      if (threads) {
        if (*threads < 1) throw doco::ConfigError("threads", "must be at least 1");
        cfg.threads = *threads;
      }
    } catch (const doco::ConfigError& e) {
      std::cerr << nlohmann::json{{"status", "config_error"}, {"key", e.key()}, {"detail", e.what()}}.dump() << "\n";
      return report::kConfigError;
    } catch (const std::exception& e) {
      std::cerr << nlohmann::json{{"status", "config_error"}, {"detail", e.what()}}.dump() << "\n";
      return report::kConfigError;
    }
  }

  auto out_for = [&](const doco::config::RunConfig& c) -> std::optional<std::filesystem::path> {
    try {
      return report::resolve_out_dir(out_dir.empty() ? std::nullopt : std::optional<std::string>(out_dir), c);
    } catch (const doco::ConfigError& e) {
      std::cerr << nlohmann::json{{"status", "config_error"}, {"key", e.key()}, {"detail", e.what()}}.dump() << "\n";
      return std::nullopt;
    }
  };

  if (run->parsed()) {
    auto dir = out_for(cfg);
    return dir ? report::orchestrate(cfg, *dir) : report::kConfigError;
  }
  if (evaluate->parsed()) return report::evaluate_dir(trace_dir);
  if (sweep->parsed()) {
    auto dir = out_for(cfg);
    if (!dir) return report::kConfigError;
    std::vector<std::size_t> hs;
    try {
      hs = parse_horizons(horizons);
    } catch (const std::exception& e) {
      std::cerr << nlohmann::json{{"status", "config_error"}, {"key", "horizons"}, {"detail", e.what()}}.dump()
                << "\n";
      return report::kConfigError;
    }
    return report::sweep_to_dir(cfg, hs, seeds, *dir);
  }
  return report::check(cfg);
}
