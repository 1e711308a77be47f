#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

#include "winres/kaplan_meier.hpp"

namespace winres {

// Cox proportional hazards fit with Breslow tie handling and Breslow baseline.
// p = 0 (or all-constant covariates) degenerates to the Nelson-Aalen baseline.
struct CoxFit {
  Eigen::VectorXd beta;                    // on the original covariate scale
  std::vector<double> baseline_times;      // event times carrying dLambda0 > 0
  std::vector<double> baseline_increments; // Breslow dLambda0
  std::vector<double> baseline_cumhaz;     // running Lambda0 at baseline_times
  std::vector<double> s0;                  // n^{-1} sum Y_i(t) exp(beta'z_i)
  std::vector<Eigen::VectorXd> zbar;       // s1/s0 at baseline_times
  Eigen::MatrixXd information;             // observed partial-likelihood info (sum scale)
  bool converged = false;
  double score_norm = 0.0;
  int n = 0;
  int n_events = 0;

  double cumhaz(double t) const;  // Lambda0(t), right-continuous, 0 at t<first jump
  double survival(double t, const Eigen::VectorXd& z) const;
};

struct CoxNonConvergence : std::runtime_error {
  CoxNonConvergence(const std::string& msg, Eigen::VectorXd last, double norm)
      : std::runtime_error(msg), last_beta(std::move(last)), score_norm(norm) {}
  Eigen::VectorXd last_beta;
  double score_norm;
};

CoxFit fit_cox(const std::vector<SurvivalSample>& samples, double tol = 1e-8,
               int max_iter = 50);

double cox_survival(const CoxFit& fit, double t, const Eigen::VectorXd& z);

// Step-function grid shared by a fitted curve's influence expansion: baseline
// jump times with the cumulative pieces needed to integrate weights against
// each subject's martingale. bcum has one row per jump (0 x p when p = 0).
struct StepCorrectionBasis {
  std::vector<double> times;
  std::vector<double> psi;      // cumulative dLambda0 / s0
  std::vector<double> lambda0;  // cumulative baseline hazard
  Eigen::MatrixXd bcum;         // rows: cumulative int zbar dLambda0

  int bucket(double t) const;   // last index with times[k] <= t, -1 if none
};

// Per-subject martingale pieces: kappa_i(t,z) = -S(t|z)e^{b'z} [ jump 1{X_i<=t}
// - explin_i Psi(t ^ X_i) - B(t)'v_i + Lambda0(t) z'v_i ].
struct SubjectMartingale {
  double jump = 0.0;      // indicator / s0(X_i) (n / at-risk for KM)
  double explin = 1.0;    // exp(beta' z_i)
  double x_time = 0.0;    // own observed time
  int x_bucket = -1;      // basis bucket of x_time
  Eigen::VectorXd v;      // A^{-1} U_i (empty for KM)
};

// Influence of each fitting subject on a fitted survival curve S(t|z),
// evaluated either at the subject's own covariates or at arbitrary z.
class SurvInfluence {
 public:
  virtual ~SurvInfluence() = default;
  virtual double kappa_own(int i, double t) const = 0;          // kappa_i(t | z_i)
  virtual double kappa_over_s_own(int i, double t) const = 0;   // kappa_i(t|z_i)/S(t|z_i)
  // decomposition pieces for the pairwise-averaged nuisance corrections; a
  // null basis signals a scalar-parameter influence instead (see scalar_score)
  virtual const StepCorrectionBasis* basis() const { return nullptr; }
  virtual SubjectMartingale subject(int) const { return {}; }
  // scalar-parameter route: kappa_i(t,z) = weight_fn(t) * score_i
  virtual double scalar_score(int) const { return 0.0; }
  virtual double scalar_weight(double) const { return 0.0; }
};

// Martingale/score expansion pieces for a Cox fit: per-subject scores U_i,
// Breslow-baseline influence phi_i(t), and the delta-method kappa for the
// fitted survival curve.
class CoxSurvInfluence : public SurvInfluence {
 public:
  CoxSurvInfluence(const CoxFit& fit, const std::vector<SurvivalSample>& samples);

  const Eigen::VectorXd& score(int i) const { return score_[i]; }
  double phi(int i, double t) const;            // Breslow baseline influence
  double kappa(int i, double t, const Eigen::VectorXd& z) const;
  double kappa_own(int i, double t) const override;
  double kappa_over_s_own(int i, double t) const override;
  const StepCorrectionBasis* basis() const override { return &basis_; }
  SubjectMartingale subject(int i) const override;

 private:
  double mart_int_s0(int i, double t) const;    // int_0^t dM_i(u)/s0(u)
  double bdotv(int i, double t) const;          // B(t)' A^{-1} U_i

  CoxFit fit_;
  int n_ = 0;
  int p_ = 0;
  std::vector<double> obs_time_;
  std::vector<int> indicator_;
  std::vector<double> explin_;       // exp(beta'z_i)
  std::vector<double> jump_;         // 1/s0(X_i) when indicator, else 0
  std::vector<Eigen::VectorXd> score_;
  std::vector<Eigen::VectorXd> ainv_score_;  // A^{-1} U_i (A on mean scale)
  std::vector<double> w_own_;        // z_i' A^{-1} U_i
  std::vector<Eigen::VectorXd> z_;
  StepCorrectionBasis basis_;
};

// Same expansion for a reverse Kaplan-Meier censoring fit.
class KmSurvInfluence : public SurvInfluence {
 public:
  KmSurvInfluence(const KaplanMeierCurve& curve,
                  const std::vector<SurvivalSample>& samples);

  double kappa_own(int i, double t) const override;
  double kappa_over_s_own(int i, double t) const override;
  const StepCorrectionBasis* basis() const override { return &basis_; }
  SubjectMartingale subject(int i) const override;

 private:
  double mart_int_y(int i, double t) const;

  KaplanMeierCurve curve_;
  int n_ = 0;
  std::vector<double> obs_time_;
  std::vector<double> jump_;   // n/at_risk(X_i) when indicator, else 0
  StepCorrectionBasis basis_;
};

}  // namespace winres
