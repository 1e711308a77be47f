#pragma once

#include <map>
#include <string>
#include <vector>

#include "winres/records.hpp"
#include "winres/simulation.hpp"
#include "winres/truth.hpp"

namespace winres {

struct LongData {
  std::vector<LongRow> rows;
  std::vector<std::string> covariate_names;  // Z columns in header order
};

// CSV with header id,A,time,status,event_type,Z1,...,Zp. Malformed rows raise
// with the 1-based line number. `covariates` optionally selects a subset of
// the Z columns (default: all, in header order).
LongData read_long_csv(const std::string& path,
                       const std::vector<std::string>& covariates = {});

struct ResultRow {
  double tau = 0.0;
  std::string method;    // IPCW | m-IPCW
  std::string copula;    // family or "--"
  std::string estimand;  // NB | WR | WO
  double estimate = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool valid = true;     // false rows print NA fields
};

std::string format_result_table(const std::vector<ResultRow>& rows);
std::string format_result_csv(const std::vector<ResultRow>& rows,
                              const std::string& header_comment = "");

std::string format_summary_table(const MonteCarloSummary& summary);
std::string format_summary_csv(const MonteCarloSummary& summary);

std::string format_truth_table(const std::vector<TruthResult>& truths);
std::string format_truth_csv(const std::vector<TruthResult>& truths,
                             std::uint64_t seed);

// key=value configuration file with # comments and optional [section] headers;
// each section is one scenario, keys before any header are shared defaults.
struct ConfigSection {
  std::string name;
  std::map<std::string, std::string> values;
};

std::vector<ConfigSection> parse_config(const std::string& path);

// Build a scenario from a config section; throws listing unknown keys.
ScenarioConfig scenario_from_config(const ConfigSection& section);

}  // namespace winres
