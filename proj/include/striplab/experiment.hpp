#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "striplab/harness.hpp"

namespace striplab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One requested check; params are check-specific key/value pairs taken
// from the config (unknown keys are rejected at parse time).
struct CheckRequest {
  std::string name;
  bool negative_control = false;
  std::vector<std::pair<std::string, double>> params;
  std::vector<std::pair<std::string, std::string>> string_params;

  double get(const std::string& key, double fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<std::int64_t> get_schedule(const std::string& key,
                                         std::vector<std::int64_t> fallback) const;
};

struct ExperimentConfig {
  int schema_version = 1;
  std::uint64_t seed = 1;
  int jobs = 0;  // 0 = all available
  std::string out_dir;
  EnvironmentSpec spec;
  std::vector<CheckRequest> checks;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_json(const std::string& text);

struct ExperimentResult {
  std::vector<CheckReport> reports;
  bool all_satisfied = true;
};

// Runs checks in order; every report is a pure function of (config,
// seed), independent of the worker count. Partial rows are flushed to
// `ledger_stream` as they complete when it is non-null.
ExperimentResult run_experiment(const ExperimentConfig& cfg, ExecMode mode,
                                std::ostream* progress = nullptr,
                                std::ostream* ledger_stream = nullptr);

std::string ledger_header();
std::string ledger_row(const CheckReport& rep, bool include_time);
std::string ledger_csv(const std::vector<CheckReport>& reports, bool include_time);
std::string report_detail_text(const CheckReport& rep);

// summary CSV row for `describe`
std::string spectral_summary_csv(const SpectralSummary& s);
std::string spectral_summary_text(const SpectralSummary& s);

void write_outputs(const ExperimentResult& result, const std::string& out_dir);

}  // namespace striplab
