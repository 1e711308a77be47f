#include "winres/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace winres {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& s, int line_no, const std::string& col) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("line " + std::to_string(line_no) +
                                ": cannot parse '" + s + "' in column " + col);
  }
}

int parse_int(const std::string& s, int line_no, const std::string& col) {
  double v = parse_double(s, line_no, col);
  int i = static_cast<int>(v);
  if (i != v)
    throw std::invalid_argument("line " + std::to_string(line_no) +
                                ": non-integer '" + s + "' in column " + col);
  return i;
}

std::string fmt(double v, const char* spec = "%.3f") {
  if (!std::isfinite(v)) return "NA";
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

void pad(std::string& line, const std::string& cell, size_t width) {
  line += cell;
  for (size_t k = cell.size(); k < width; ++k) line += ' ';
  line += ' ';
}

}  // namespace

LongData read_long_csv(const std::string& path,
                       const std::vector<std::string>& covariates) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  std::vector<std::string> header = split(line, ',');
  for (auto& h : header) h = trim(h);
  const std::vector<std::string> fixed = {"id", "A", "time", "status", "event_type"};
  if (header.size() < fixed.size())
    throw std::runtime_error(path + ": header must start with id,A,time,status,event_type");
  for (size_t k = 0; k < fixed.size(); ++k)
    if (header[k] != fixed[k])
      throw std::runtime_error(path + ": expected column '" + fixed[k] +
                               "' at position " + std::to_string(k + 1));

  std::vector<std::string> all_z(header.begin() + fixed.size(), header.end());
  std::vector<int> z_cols;
  LongData data;
  if (covariates.empty()) {
    data.covariate_names = all_z;
    for (size_t k = 0; k < all_z.size(); ++k)
      z_cols.push_back(static_cast<int>(fixed.size() + k));
  } else {
    for (const auto& name : covariates) {
      auto it = std::find(all_z.begin(), all_z.end(), name);
      if (it == all_z.end())
        throw std::runtime_error(path + ": covariate column '" + name + "' not found");
      z_cols.push_back(static_cast<int>(fixed.size() + (it - all_z.begin())));
      data.covariate_names.push_back(name);
    }
  }

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split(line, ',');
    if (cells.size() != header.size())
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(cells.size()));
    LongRow row;
    row.id = trim(cells[0]);
    row.arm = parse_int(trim(cells[1]), line_no, "A");
    if (row.arm != 0 && row.arm != 1)
      throw std::invalid_argument("line " + std::to_string(line_no) + ": A must be 0 or 1");
    row.time = parse_double(trim(cells[2]), line_no, "time");
    row.status = parse_int(trim(cells[3]), line_no, "status");
    row.event_type = parse_int(trim(cells[4]), line_no, "event_type");
    row.covariates.resize(z_cols.size());
    for (size_t k = 0; k < z_cols.size(); ++k) {
      std::string cell = trim(cells[z_cols[k]]);
      if (cell.empty() || cell == "NA")
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": missing covariate value");
      row.covariates[k] = parse_double(cell, line_no, data.covariate_names[k]);
    }
    data.rows.push_back(std::move(row));
  }
  return data;
}

// ---- result formatting -------------------------------------------------------

static const char* kResultHeader[] = {"tau", "method", "copula", "estimand",
                                      "estimate", "se", "lower", "upper"};

std::string format_result_table(const std::vector<ResultRow>& rows) {
  const size_t w[] = {6, 7, 12, 8, 9, 8, 8, 8};
  std::string out;
  std::string line;
  for (int k = 0; k < 8; ++k) pad(line, kResultHeader[k], w[k]);
  out += trim(line) + "\n";
  for (const auto& r : rows) {
    line.clear();
    pad(line, fmt(r.tau, "%g"), w[0]);
    pad(line, r.method, w[1]);
    pad(line, r.copula, w[2]);
    pad(line, r.estimand, w[3]);
    if (r.valid) {
      pad(line, fmt(r.estimate), w[4]);
      pad(line, fmt(r.se), w[5]);
      pad(line, fmt(r.lower), w[6]);
      pad(line, fmt(r.upper), w[7]);
    } else {
      for (int k = 4; k < 8; ++k) pad(line, "NA", w[k]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::string format_result_csv(const std::vector<ResultRow>& rows,
                              const std::string& header_comment) {
  std::string out;
  if (!header_comment.empty()) out += "# " + header_comment + "\n";
  out += "tau,method,copula,estimand,estimate,se,lower,upper\n";
  for (const auto& r : rows) {
    out += fmt(r.tau, "%g") + "," + r.method + "," + r.copula + "," + r.estimand + ",";
    if (r.valid)
      out += fmt(r.estimate) + "," + fmt(r.se) + "," + fmt(r.lower) + "," + fmt(r.upper);
    else
      out += "NA,NA,NA,NA";
    out += "\n";
  }
  return out;
}

std::string format_summary_table(const MonteCarloSummary& summary) {
  std::string out;
  out += "reps=" + std::to_string(summary.reps) +
         " failures=" + std::to_string(summary.failures) +
         " lambda_c=" + fmt(summary.lambda_c, "%.6g") +
         " achieved_censoring=" + fmt(summary.achieved_censoring, "%.3f") + "\n";
  for (const auto& note : summary.notes) out += "note: " + note + "\n";
  const size_t w[] = {6, 7, 8, 8, 8, 8, 8, 8, 6};
  const char* head[] = {"tau", "method", "estimand", "true", "rbias%", "mcsd", "ase", "cov", "re"};
  std::string line;
  for (int k = 0; k < 9; ++k) pad(line, head[k], w[k]);
  out += trim(line) + "\n";
  for (const auto& c : summary.cells) {
    line.clear();
    pad(line, fmt(c.tau, "%g"), w[0]);
    pad(line, c.method == Method::ipcw ? "IPCW" : "m-IPCW", w[1]);
    pad(line, c.estimand, w[2]);
    pad(line, fmt(c.true_value), w[3]);
    pad(line, fmt(c.rbias_pct, "%.1f"), w[4]);
    pad(line, fmt(c.mcsd, "%.4f"), w[5]);
    pad(line, fmt(c.ase, "%.4f"), w[6]);
    pad(line, fmt(c.coverage), w[7]);
    pad(line, c.re > 0.0 ? fmt(c.re, "%.2f") : "--", w[8]);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::string format_summary_csv(const MonteCarloSummary& summary) {
  std::string out = "# seed=" + std::to_string(summary.seed) +
                    " lambda_c=" + fmt(summary.lambda_c, "%.6g") +
                    " failures=" + std::to_string(summary.failures) + "\n";
  out += "tau,method,estimand,true,rbias_pct,mcsd,ase,coverage,re\n";
  for (const auto& c : summary.cells) {
    out += fmt(c.tau, "%g");
    out += std::string(",") + (c.method == Method::ipcw ? "IPCW" : "m-IPCW") + "," +
           c.estimand + "," + fmt(c.true_value) + "," + fmt(c.rbias_pct, "%.1f") + "," +
           fmt(c.mcsd, "%.4f") + "," + fmt(c.ase, "%.4f") + "," + fmt(c.coverage) + "," +
           (c.re > 0.0 ? fmt(c.re, "%.2f") : "NA") + "\n";
  }
  return out;
}

std::string format_truth_table(const std::vector<TruthResult>& truths) {
  std::string out;
  const size_t w = 8;
  std::string line;
  pad(line, "tau", 6);
  if (!truths.empty())
    for (size_t q = 0; q < truths[0].pi_tq.size(); ++q) {
      pad(line, "pi_t" + std::to_string(q + 1), w);
      pad(line, "pi_c" + std::to_string(q + 1), w);
    }
  for (const char* h : {"pi_t", "pi_c", "NB", "WR", "WO"}) pad(line, h, w);
  out += trim(line) + "\n";
  for (const auto& t : truths) {
    line.clear();
    pad(line, fmt(t.tau, "%g"), 6);
    for (size_t q = 0; q < t.pi_tq.size(); ++q) {
      pad(line, fmt(t.pi_tq[q], "%.4f"), w);
      pad(line, fmt(t.pi_cq[q], "%.4f"), w);
    }
    pad(line, fmt(t.pi_t, "%.4f"), w);
    pad(line, fmt(t.pi_c, "%.4f"), w);
    pad(line, fmt(t.nb), w);
    pad(line, fmt(t.wr), w);
    pad(line, fmt(t.wo), w);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::string format_truth_csv(const std::vector<TruthResult>& truths,
                             std::uint64_t seed) {
  std::string out = "# seed=" + std::to_string(seed) + "\n";
  out += "tau";
  if (!truths.empty())
    for (size_t q = 0; q < truths[0].pi_tq.size(); ++q)
      out += ",pi_t" + std::to_string(q + 1) + ",pi_c" + std::to_string(q + 1);
  out += ",pi_t,pi_c,NB,WR,WO\n";
  for (const auto& t : truths) {
    out += fmt(t.tau, "%g");
    for (size_t q = 0; q < t.pi_tq.size(); ++q)
      out += "," + fmt(t.pi_tq[q], "%.4f") + "," + fmt(t.pi_cq[q], "%.4f");
    out += "," + fmt(t.pi_t, "%.4f") + "," + fmt(t.pi_c, "%.4f") + "," + fmt(t.nb) +
           "," + fmt(t.wr) + "," + fmt(t.wo) + "\n";
  }
  return out;
}

// ---- config files --------------------------------------------------------------

std::vector<ConfigSection> parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<ConfigSection> sections;
  ConfigSection shared;  // keys before any [section]
  ConfigSection* cur = &shared;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[' && s.back() == ']') {
      ConfigSection sec;
      sec.name = trim(s.substr(1, s.size() - 2));
      sec.values = shared.values;  // sections inherit the shared defaults
      sections.push_back(std::move(sec));
      cur = &sections.back();
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + " line " + std::to_string(line_no) +
                                  ": expected key=value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument(path + " line " + std::to_string(line_no) +
                                  ": empty key");
    cur->values[key] = value;
  }
  if (sections.empty()) sections.push_back(std::move(shared));
  return sections;
}

namespace {

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split(s, ','))
    if (!trim(tok).empty()) out.push_back(std::stod(trim(tok)));
  return out;
}

}  // namespace

ScenarioConfig scenario_from_config(const ConfigSection& section) {
  static const std::set<std::string> known = {
      "n_per_arm", "reps", "seed", "taus", "theta", "dgp_copula", "working",
      "target_censoring", "lambda_c", "methods", "eps", "conf_level",
      "working_copula", "calibration_horizon",
      "rho1", "lambda10", "beta11", "beta12", "beta13", "beta1a",
      "rho2", "lambda20", "beta21", "beta22", "beta23", "beta2a"};
  std::string unknown;
  for (const auto& [key, value] : section.values)
    if (!known.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  if (!unknown.empty())
    throw std::invalid_argument("unknown config keys: " + unknown);

  ScenarioConfig cfg = ScenarioConfig::defaults();
  auto get = [&](const std::string& key) -> const std::string* {
    auto it = section.values.find(key);
    return it == section.values.end() ? nullptr : &it->second;
  };
  auto require = [&](const std::string& key) -> const std::string& {
    const std::string* v = get(key);
    if (!v) throw std::invalid_argument("missing required config key: " + key);
    return *v;
  };

  if (auto* v = get("n_per_arm")) cfg.n_per_arm = std::stoi(*v);
  if (auto* v = get("reps")) cfg.reps = std::stoi(*v);
  if (auto* v = get("seed")) cfg.seed = std::stoull(*v);
  cfg.taus = parse_list(require("taus"));
  if (cfg.taus.empty()) throw std::invalid_argument("taus must be nonempty");

  CopulaFamily fam = CopulaFamily::gumbel;
  if (auto* v = get("dgp_copula")) fam = family_from_name(*v);
  if (fam == CopulaFamily::independence) {
    cfg.dgp_copula = CopulaSpec::independence();
  } else {
    cfg.dgp_copula = CopulaSpec::make(fam, std::stod(require("theta")));
  }

  if (auto* v = get("working")) cfg.working = working_from_name(*v);
  if (auto* v = get("working_copula")) {
    cfg.working_copula_override = family_from_name(*v);
    cfg.has_working_copula_override = true;
  }
  if (auto* v = get("target_censoring")) cfg.target_censoring = std::stod(*v);
  if (auto* v = get("lambda_c")) cfg.censor_lambda = std::stod(*v);
  if (auto* v = get("calibration_horizon")) cfg.calibration_horizon = std::stod(*v);
  if (auto* v = get("eps")) cfg.eps = std::stod(*v);
  if (auto* v = get("conf_level")) cfg.conf_level = std::stod(*v);
  if (auto* v = get("methods")) {
    cfg.methods.clear();
    for (const auto& tok : split(*v, ','))
      if (!trim(tok).empty()) cfg.methods.push_back(method_from_name(trim(tok)));
  }

  auto set_comp = [&](int q, const char* rho, const char* lam, const char* b1,
                      const char* b2, const char* b3, const char* ba) {
    if (auto* v = get(rho)) cfg.components[q].rho = std::stod(*v);
    if (auto* v = get(lam)) cfg.components[q].lambda0 = std::stod(*v);
    if (auto* v = get(b1)) cfg.components[q].beta[0] = std::stod(*v);
    if (auto* v = get(b2)) cfg.components[q].beta[1] = std::stod(*v);
    if (auto* v = get(b3)) cfg.components[q].beta[2] = std::stod(*v);
    if (auto* v = get(ba)) cfg.components[q].beta_arm = std::stod(*v);
  };
  set_comp(0, "rho1", "lambda10", "beta11", "beta12", "beta13", "beta1a");
  set_comp(1, "rho2", "lambda20", "beta21", "beta22", "beta23", "beta2a");
  return cfg;
}

}  // namespace winres
