#pragma once

#include <Eigen/Core>
#include <vector>

#include "winres/estimate.hpp"

namespace winres {

// Per-subject influence rows, aligned with the record vector. psi = xi + rg +
// re; re is identically zero on the ipcw path.
struct InfluenceRows {
  std::vector<Eigen::Vector2d> xi;
  std::vector<Eigen::Vector2d> rg;
  std::vector<Eigen::Vector2d> re;
  std::vector<Eigen::Vector2d> psi;
  std::vector<int> arm;
  int n1 = 0;
  int n0 = 0;
};

InfluenceRows influence_rows(const PairwiseEngine& engine,
                             const WinComponents& components);
InfluenceRows influence_rows(const std::vector<RestrictedRecord>& records,
                             double tau, Method method,
                             const NuisanceBundle& bundle,
                             const WinComponents& components);

// spec-facing slices of the combined assembly
std::vector<Eigen::Vector2d> hoeffding_rows(const std::vector<RestrictedRecord>& records,
                                            double tau, Method method,
                                            const NuisanceBundle& bundle,
                                            const WinComponents& components);
std::vector<Eigen::Vector2d> censoring_correction_rows(
    const std::vector<RestrictedRecord>& records, double tau, Method method,
    const NuisanceBundle& bundle, const WinComponents& components);
std::vector<Eigen::Vector2d> event_correction_rows(
    const std::vector<RestrictedRecord>& records, double tau,
    const NuisanceBundle& bundle, const WinComponents& components);

struct SandwichResult {
  Eigen::Matrix2d omega = Eigen::Matrix2d::Zero();
  double se_nb = 0.0;
  double se_logwr = 0.0;
  double se_logwo = 0.0;
};

SandwichResult sandwich(const InfluenceRows& rows, const WinComponents& components);

struct ConfidenceIntervals {
  double conf_level = 0.95;
  double nb_lo = 0.0, nb_hi = 0.0;
  double wr_lo = 0.0, wr_hi = 0.0;
  double wo_lo = 0.0, wo_hi = 0.0;
};

// NB on the natural scale; WR and WO Wald intervals on the log scale, then
// exponentiated.
ConfidenceIntervals delta_ci(const WinComponents& components,
                             const SandwichResult& sw, double conf_level);

double normal_quantile(double p);

struct AnalysisResult {
  WinComponents components;
  WinSummary summary;
  SandwichResult sw;
  ConfidenceIntervals ci;
};

// estimate + influence rows + sandwich + intervals in one pass
AnalysisResult analyze(const std::vector<RestrictedRecord>& records, double tau,
                       Method method, const NuisanceBundle& bundle,
                       double conf_level);

}  // namespace winres
