#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "winres/io.hpp"
#include "winres/truth.hpp"
#include "winres/variance.hpp"

namespace {

using namespace winres;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void write_output(const std::string& table, const std::string& csv,
                  const std::string& out_path) {
  std::fputs(table.c_str(), stdout);
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << csv;
  }
}

int cmd_estimate(const std::string& csv_path, const std::string& taus_s,
                 const std::string& methods_s, const std::string& censor_s,
                 const std::string& margin_s, const std::string& copula_s,
                 const std::string& priority_s, const std::string& covariates_s,
                 double eps, double conf_level, const std::string& out_path) {
  if (margin_s != "cox")
    throw CLI::ValidationError("--margin", "only 'cox' margins are supported");
  LongData data = read_long_csv(csv_path, split_list(covariates_s));

  std::vector<double> taus;
  for (const auto& t : split_list(taus_s)) taus.push_back(std::stod(t));
  if (taus.empty()) throw CLI::ValidationError("--tau", "no restriction times given");
  std::vector<Method> methods;
  for (const auto& m : split_list(methods_s)) methods.push_back(method_from_name(m));
  std::vector<int> priority;
  for (const auto& p : split_list(priority_s)) priority.push_back(std::stoi(p));
  CopulaFamily family = family_from_name(copula_s);
  CensorKind censor = censor_s == "cox" ? CensorKind::cox : CensorKind::km;
  if (censor_s != "cox" && censor_s != "km")
    throw CLI::ValidationError("--censor", "must be km or cox");

  bool need_event = false;
  for (Method m : methods) need_event |= (m == Method::m_ipcw);

  std::vector<ResultRow> rows_out;
  for (double tau : taus) {
    std::vector<RestrictedRecord> records = restrict_records(data.rows, tau, priority);
    NuisanceOptions opt;
    opt.censor = censor;
    opt.margin = MarginKind::cox;
    opt.copula = family;
    opt.eps = eps;
    opt.event_model = need_event;
    NuisanceBundle bundle = fit_nuisances(records, tau, opt);
    for (Method method : methods) {
      std::string mname = method == Method::ipcw ? "IPCW" : "m-IPCW";
      std::string cop = method == Method::m_ipcw ? family_name(family) : "--";
      try {
        AnalysisResult res = analyze(records, tau, method, bundle, conf_level);
        if (res.components.floored_denominators > 0)
          std::fprintf(stderr,
                       "note: tau=%g %s: %ld pair weights hit the eps^2 floor\n",
                       tau, mname.c_str(), res.components.floored_denominators);
        rows_out.push_back({tau, mname, cop, "NB", res.summary.nb, res.sw.se_nb,
                            res.ci.nb_lo, res.ci.nb_hi, true});
        rows_out.push_back({tau, mname, cop, "WR", res.summary.wr,
                            res.summary.wr * res.sw.se_logwr, res.ci.wr_lo,
                            res.ci.wr_hi, true});
        rows_out.push_back({tau, mname, cop, "WO", res.summary.wo,
                            res.summary.wo * res.sw.se_logwo, res.ci.wo_lo,
                            res.ci.wo_hi, true});
      } catch (const std::domain_error& e) {
        std::fprintf(stderr, "note: tau=%g %s: %s\n", tau, mname.c_str(), e.what());
        for (const char* est : {"NB", "WR", "WO"})
          rows_out.push_back({tau, mname, cop, est, 0, 0, 0, 0, false});
      }
    }
  }
  write_output(format_result_table(rows_out), format_result_csv(rows_out), out_path);
  return 0;
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed_override,
                 bool has_seed, const std::string& out_path) {
  auto sections = parse_config(config_path);
  std::string table, csv;
  for (const auto& sec : sections) {
    ScenarioConfig cfg = scenario_from_config(sec);
    if (has_seed) cfg.seed = seed_override;
    if (cfg.reps <= 0)
      throw CLI::ValidationError("config", "reps must be >= 1" +
                                               (sec.name.empty() ? "" : " in [" + sec.name + "]"));
    MonteCarloSummary summary = run_scenario(cfg);
    if (!sec.name.empty()) table += "[" + sec.name + "]\n";
    table += format_summary_table(summary);
    csv += format_summary_csv(summary);
  }
  write_output(table, csv, out_path);
  return 0;
}

int cmd_truth(const std::string& config_path, const std::string& out_path) {
  auto sections = parse_config(config_path);
  std::string table, csv;
  for (const auto& sec : sections) {
    ScenarioConfig cfg = scenario_from_config(sec);
    std::vector<TruthResult> truths;
    for (double tau : cfg.taus) truths.push_back(true_values(cfg, tau));
    if (!sec.name.empty()) table += "[" + sec.name + "]\n";
    table += format_truth_table(truths);
    csv += format_truth_csv(truths, cfg.seed);
  }
  write_output(table, csv, out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Restricted-time win statistics (IPCW and conditional-tie m-IPCW)"};
  app.require_subcommand(1);

  int threads = 0;
  std::uint64_t seed = 0;
  bool has_seed = false;
  app.add_option("--threads", threads, "cap the OpenMP worker count");
  app.add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
    has_seed = true;
  });

  // estimate
  auto* est = app.add_subcommand("estimate", "win statistics from a long-format CSV");
  std::string csv_path, taus = "36", methods = "ipcw,m-ipcw", censor = "cox";
  std::string margin = "cox", copula = "gumbel", priority = "1,2", covariates;
  std::string out_path;
  double eps = 1e-6, conf_level = 0.95;
  est->add_option("data", csv_path, "long-format CSV (id,A,time,status,event_type,Z...)")
      ->required();
  est->add_option("--tau", taus, "restriction times, comma list");
  est->add_option("--method", methods, "ipcw,m-ipcw");
  est->add_option("--censor", censor, "censoring model: km|cox");
  est->add_option("--margin", margin, "event-time margins: cox");
  est->add_option("--copula", copula,
                  "working copula: independence|gumbel|clayton|frank|plackett");
  est->add_option("--priority", priority, "event_type codes, highest priority first");
  est->add_option("--covariates", covariates, "Z columns to use (default: all)");
  est->add_option("--eps", eps, "truncation constant for weights and copula inputs");
  est->add_option("--conf-level", conf_level, "confidence level");
  est->add_option("--out", out_path, "write machine-readable CSV here");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo scenario from a config file");
  std::string sim_config, sim_out;
  sim->add_option("config", sim_config, "key=value scenario config")->required();
  sim->add_option("--out", sim_out, "write machine-readable CSV here");

  // truth
  auto* tru = app.add_subcommand("truth", "quadrature truth values from a config file");
  std::string truth_config, truth_out;
  tru->add_option("config", truth_config, "key=value scenario config")->required();
  tru->add_option("--out", truth_out, "write machine-readable CSV here");

  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  try {
    if (est->parsed())
      return cmd_estimate(csv_path, taus, methods, censor, margin, copula, priority,
                          covariates, eps, conf_level, out_path);
    if (sim->parsed()) return cmd_simulate(sim_config, seed, has_seed, sim_out);
    if (tru->parsed()) return cmd_truth(truth_config, truth_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
