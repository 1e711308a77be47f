#pragma once

#include <Eigen/Core>
#include <vector>

namespace winres {

// One subject's record for a univariate survival fit. `indicator` flags the
// event being modeled: for reverse Kaplan-Meier censoring fits it is 1 when
// the subject was censored at observed_time.
struct SurvivalSample {
  double observed_time = 0.0;
  int indicator = 0;
  Eigen::VectorXd covariates;  // ignored by KM fits
  int arm = 0;
};

struct KaplanMeierCurve {
  std::vector<double> jump_times;      // strictly increasing event times
  std::vector<double> survival_values; // value of S at and after each jump
  std::vector<int> n_at_risk;          // risk-set size at each jump

  // Right-continuous step evaluation; 1 before the first jump.
  double eval(double t) const;
};

// Product-limit estimator treating `indicator`==1 as the modeled event.
KaplanMeierCurve fit_km(const std::vector<SurvivalSample>& samples);

// Reverse KM for the censoring survival G(t) = P(C > t); `indicator`==1 must
// flag censoring.
KaplanMeierCurve fit_censoring_km(const std::vector<SurvivalSample>& samples);

}  // namespace winres
