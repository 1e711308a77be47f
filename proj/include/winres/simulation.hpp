#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "winres/copula.hpp"
#include "winres/estimate.hpp"
#include "winres/records.hpp"

namespace winres {

// Weibull proportional-hazards margin of one component:
//   S(t | a, z) = exp(-lambda0 t^rho exp(beta'z + beta_arm a))
struct WeibullComponent {
  double rho = 1.0;
  double lambda0 = 0.01;
  Eigen::Vector3d beta = Eigen::Vector3d::Zero();
  double beta_arm = 0.0;
};

enum class WorkingModel { M1, M2, M3, M4 };

std::string working_name(WorkingModel w);
WorkingModel working_from_name(const std::string& name);

struct ScenarioConfig {
  int n_per_arm = 400;
  std::vector<WeibullComponent> components;  // defaults: the two-component design
  CopulaSpec dgp_copula{CopulaFamily::gumbel, 1.25};
  Eigen::Vector3d censor_coefs{0.80, 1.00, 0.65};
  double censor_lambda = std::numeric_limits<double>::quiet_NaN();
  double target_censoring = std::numeric_limits<double>::quiet_NaN();  // at tau 36
  double calibration_horizon = 36.0;
  std::vector<double> taus{12.0, 24.0, 36.0};
  WorkingModel working = WorkingModel::M1;
  CopulaFamily working_copula_override = CopulaFamily::independence;
  bool has_working_copula_override = false;
  std::vector<Method> methods{Method::ipcw, Method::m_ipcw};
  int reps = 0;
  std::uint64_t seed = 20240801;
  double eps = 1e-6;
  double conf_level = 0.95;

  static ScenarioConfig defaults();  // Weibull parameters of the simulation design
  int q_count() const { return static_cast<int>(components.size()); }
};

// counter-derived RNG substream, identical regardless of thread scheduling
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index);

struct Subject {
  Eigen::Vector3d z;
  std::vector<double> event_times;
  double censor_time = 0.0;
};

Subject gen_subject(std::mt19937_64& rng, int arm, const ScenarioConfig& config);

// One generated two-arm trial in long format (follow-up row carries the
// censoring time; component rows are emitted when the event precedes it).
std::vector<LongRow> gen_dataset(std::mt19937_64& rng, const ScenarioConfig& config);

// Bisection calibration of the baseline censoring rate so that the fraction of
// subjects censored before the horizon with unresolved components matches the
// target, using 2e5 simulated subjects and the config seed.
double calibrate_lambda_c(const ScenarioConfig& config, double target);

// Resolve censor_lambda (calibrating when only a target is given).
double resolve_lambda_c(const ScenarioConfig& config);

// Working-nuisance options implied by M1-M4.
NuisanceOptions working_options(const ScenarioConfig& config);

// Oracle bundle carrying the true G, margins, and copula of the DGP; no
// influence machinery (point estimation only).
NuisanceBundle make_true_bundle(const ScenarioConfig& config, double lambda_c);

struct SummaryCell {
  double tau = 0.0;
  Method method = Method::ipcw;
  std::string estimand;  // NB | WR | WO
  double true_value = 0.0;
  double rbias_pct = 0.0;
  double mcsd = 0.0;  // log scale for WR/WO
  double ase = 0.0;
  double coverage = 0.0;
  double re = 0.0;    // MCSD^2(ipcw) / MCSD^2(m-ipcw), same value on both rows
};

struct MonteCarloSummary {
  std::vector<SummaryCell> cells;
  int reps = 0;
  int failures = 0;
  double lambda_c = 0.0;
  double achieved_censoring = 0.0;  // on the calibration draw
  std::uint64_t seed = 0;
  std::vector<std::string> notes;
};

MonteCarloSummary run_scenario(const ScenarioConfig& config);

}  // namespace winres
