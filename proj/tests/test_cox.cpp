#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "winres/cox.hpp"

using namespace winres;

namespace {

SurvivalSample make(double t, int ind, std::initializer_list<double> z) {
  SurvivalSample s;
  s.observed_time = t;
  s.indicator = ind;
  s.covariates = Eigen::VectorXd(z.size());
  int k = 0;
  for (double v : z) s.covariates[k++] = v;
  return s;
}

// the fixed 6-subject design used as the solver oracle
std::vector<SurvivalSample> oracle_data() {
  return {make(1, 1, {1.0}), make(2, 1, {0.0}), make(3, 0, {1.0}),
          make(4, 1, {1.0}), make(5, 0, {0.0}), make(6, 1, {0.0})};
}

// brute-force Breslow partial log-likelihood, one covariate
double bf_loglik(const std::vector<SurvivalSample>& data, double b) {
  double ll = 0.0;
  for (const auto& si : data) {
    if (si.indicator != 1) continue;
    double denom = 0.0;
    for (const auto& sj : data)
      if (sj.observed_time >= si.observed_time)
        denom += std::exp(b * sj.covariates[0]);
    ll += b * si.covariates[0] - std::log(denom);
  }
  return ll;
}

// independent Newton solve by finite differences of the brute-force loglik
double bf_newton(const std::vector<SurvivalSample>& data) {
  double b = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double h = 1e-6;
    double g = (bf_loglik(data, b + h) - bf_loglik(data, b - h)) / (2 * h);
    double hess = (bf_loglik(data, b + h) - 2 * bf_loglik(data, b) +
                   bf_loglik(data, b - h)) / (h * h);
    b -= g / hess;
    if (std::fabs(g) < 1e-12) break;
  }
  return b;
}

}  // namespace

TEST_CASE("partial-likelihood solve matches the brute-force Newton oracle") {
  auto data = oracle_data();
  CoxFit fit = fit_cox(data, 1e-8, 50);
  CHECK(fit.converged);
  CHECK(fit.score_norm <= 1e-8);
  double b = bf_newton(data);
  CHECK(fit.beta[0] == doctest::Approx(b).epsilon(1e-8));
  CHECK(fit.beta[0] == doctest::Approx(1.0730678).epsilon(1e-6));  // frozen oracle value

  // Breslow baseline against direct risk-set sums at the oracle beta
  double cum = 0.0;
  for (size_t k = 0; k < fit.baseline_times.size(); ++k) {
    double s0 = 0.0;
    int events = 0;
    for (const auto& s : data) {
      if (s.observed_time >= fit.baseline_times[k]) s0 += std::exp(b * s.covariates[0]);
      if (s.observed_time == fit.baseline_times[k] && s.indicator == 1) ++events;
    }
    CHECK(fit.baseline_increments[k] == doctest::Approx(events / s0).epsilon(1e-8));
    CHECK(fit.baseline_increments[k] > 0.0);
    cum += events / s0;
    CHECK(fit.baseline_cumhaz[k] == doctest::Approx(cum).epsilon(1e-8));
  }
}

TEST_CASE("gradient matches a central finite difference of the log partial likelihood") {
  auto data = oracle_data();
  // evaluate at a non-optimal beta through the fit's own score: move the fit
  // by overriding tolerance so the score at the reported beta is tiny, then
  // check the finite-difference derivative around an off-optimum point
  const double b = 0.4;
  const double h = 1e-5;
  double fd = (bf_loglik(data, b + h) - bf_loglik(data, b - h)) / (2 * h);
  // reproduce the analytic score at b via risk-set sums
  double score = 0.0;
  for (const auto& si : data) {
    if (si.indicator != 1) continue;
    double s0 = 0.0, s1 = 0.0;
    for (const auto& sj : data)
      if (sj.observed_time >= si.observed_time) {
        double w = std::exp(b * sj.covariates[0]);
        s0 += w;
        s1 += w * sj.covariates[0];
      }
    score += si.covariates[0] - s1 / s0;
  }
  CHECK(score == doctest::Approx(fd).epsilon(1e-5));
}

TEST_CASE("all-zero covariates reduce to the Nelson-Aalen baseline") {
  std::vector<SurvivalSample> data = {make(1, 1, {0.0}), make(2, 1, {0.0}),
                                      make(3, 0, {0.0}), make(4, 1, {0.0})};
  CoxFit fit = fit_cox(data);
  CHECK(fit.beta[0] == 0.0);
  // Nelson-Aalen: 1/4, 1/3, (skip censored), 1/1
  CHECK(fit.baseline_cumhaz.back() ==
        doctest::Approx(0.25 + 1.0 / 3.0 + 1.0).epsilon(1e-12));
  Eigen::VectorXd z = Eigen::VectorXd::Zero(1);
  CHECK(cox_survival(fit, 2.0, z) ==
        doctest::Approx(std::exp(-(0.25 + 1.0 / 3.0))).epsilon(1e-12));
}

TEST_CASE("survival boundary and proportional-hazards power relation") {
  auto data = oracle_data();
  CoxFit fit = fit_cox(data);
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(1);
  CHECK(cox_survival(fit, 0.0, z0) == 1.0);
  // scaled covariate with e^{beta z} = 2: survival is the null curve squared
  Eigen::VectorXd z2(1);
  z2[0] = std::log(2.0) / fit.beta[0];
  double s0 = cox_survival(fit, 4.0, z0);
  CHECK(cox_survival(fit, 4.0, z2) == doctest::Approx(s0 * s0).epsilon(1e-12));
  // nonincreasing in t
  double prev = 1.0;
  for (double t : {0.5, 1.0, 2.0, 3.0, 4.5, 6.0, 9.0}) {
    double s = cox_survival(fit, t, z0);
    CHECK(s <= prev + 1e-15);
    prev = s;
  }
}

TEST_CASE("perfect separation raises a non-convergence error") {
  // the binary covariate is 1 exactly for the early events: monotone
  // likelihood, beta grows without bound (about one unit per Newton step, so
  // a ten-step budget leaves the score visibly nonzero)
  std::vector<SurvivalSample> data = {make(1, 1, {1.0}), make(2, 1, {1.0}),
                                      make(3, 1, {1.0}), make(4, 1, {0.0}),
                                      make(5, 1, {0.0}), make(6, 1, {0.0})};
  CHECK_THROWS_AS(fit_cox(data, 1e-8, 10), CoxNonConvergence);
  try {
    fit_cox(data, 1e-8, 10);
  } catch (const CoxNonConvergence& e) {
    CHECK(e.last_beta.size() == 1);
    CHECK(std::fabs(e.last_beta[0]) > 3.0);  // diverging iterate carried out
    CHECK(e.score_norm > 1e-8);
  }
}

TEST_CASE("no events is rejected") {
  std::vector<SurvivalSample> data = {make(1, 0, {0.5}), make(2, 0, {1.0})};
  CHECK_THROWS_AS(fit_cox(data), std::invalid_argument);
}

TEST_CASE("per-subject scores sum to zero and kappa has exact zero mean") {
  auto data = oracle_data();
  CoxFit fit = fit_cox(data);
  CoxSurvInfluence inf(fit, data);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(1);
  for (int i = 0; i < 6; ++i) total += inf.score(i);
  CHECK(total.lpNorm<Eigen::Infinity>() <= 1e-6);
  // kappa(t, z) averages to zero at the fitted model: probe three (t, z)
  for (double t : {1.5, 3.5, 5.5}) {
    for (double zv : {0.0, 0.7, 1.0}) {
      Eigen::VectorXd z = Eigen::VectorXd::Constant(1, zv);
      double mean = 0.0;
      for (int i = 0; i < 6; ++i) mean += inf.kappa(i, t, z);
      CHECK(std::fabs(mean / 6.0) <= 1e-12);
    }
  }
}

TEST_CASE("kappa vanishes at t = 0 and reduces to the KM form under the null model") {
  auto data = oracle_data();
  CoxFit fit = fit_cox(data);
  CoxSurvInfluence inf(fit, data);
  Eigen::VectorXd z = Eigen::VectorXd::Constant(1, 0.3);
  for (int i = 0; i < 6; ++i) CHECK(inf.kappa(i, 0.0, z) == 0.0);

  // p = 0: the Cox influence collapses to the KM martingale form
  std::vector<SurvivalSample> null_data;
  for (const auto& s : data) {
    SurvivalSample t = s;
    t.covariates = Eigen::VectorXd();
    null_data.push_back(t);
  }
  CoxFit null_fit = fit_cox(null_data);
  CoxSurvInfluence cox_inf(null_fit, null_data);
  KaplanMeierCurve km = fit_km(null_data);
  KmSurvInfluence km_inf(km, null_data);
  Eigen::VectorXd ez;
  for (int i = 0; i < 6; ++i)
    for (double t : {0.5, 2.5, 4.5, 6.0}) {
      // the same martingale integral drives both; survival prefactors differ
      // (exp(-Nelson-Aalen) vs product-limit), so compare kappa / S
      CHECK(cox_inf.kappa_over_s_own(i, t) ==
            doctest::Approx(km_inf.kappa_over_s_own(i, t)).epsilon(1e-10));
    }
}

TEST_CASE("covariate centering is invisible at the interface") {
  // shifting a covariate by a constant leaves beta and the survival curve
  // at correspondingly shifted covariates unchanged
  auto data = oracle_data();
  auto shifted = data;
  for (auto& s : shifted) s.covariates[0] += 5.0;
  CoxFit fit = fit_cox(data);
  CoxFit fit_shift = fit_cox(shifted);
  CHECK(fit_shift.beta[0] == doctest::Approx(fit.beta[0]).epsilon(1e-8));
  Eigen::VectorXd z(1), zs(1);
  z[0] = 1.0;
  zs[0] = 6.0;
  CHECK(fit_shift.survival(3.0, zs) == doctest::Approx(fit.survival(3.0, z)).epsilon(1e-8));
}
