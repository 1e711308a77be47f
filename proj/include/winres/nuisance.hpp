#pragma once

#include <Eigen/Core>
#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "winres/copula.hpp"
#include "winres/cox.hpp"
#include "winres/kaplan_meier.hpp"
#include "winres/records.hpp"

namespace winres {

// Arm-specific censoring survival G_a(t|z); evaluations are floored at 1e-10
// so IPCW denominators never divide by exact zero.
class CensoringModel {
 public:
  virtual ~CensoringModel() = default;
  virtual double survival(double t, const Eigen::VectorXd& z) const = 0;
};

class KmCensoring : public CensoringModel {
 public:
  explicit KmCensoring(KaplanMeierCurve curve) : curve_(std::move(curve)) {}
  double survival(double t, const Eigen::VectorXd&) const override;
  const KaplanMeierCurve& curve() const { return curve_; }

 private:
  KaplanMeierCurve curve_;
};

class CoxCensoring : public CensoringModel {
 public:
  explicit CoxCensoring(CoxFit fit) : fit_(std::move(fit)) {}
  double survival(double t, const Eigen::VectorXd& z) const override;
  const CoxFit& fit() const { return fit_; }

 private:
  CoxFit fit_;
};

// Exponential proportional-hazards censoring with known parameters (the
// simulation DGP form), for oracle-nuisance runs.
class TrueExpPhCensoring : public CensoringModel {
 public:
  TrueExpPhCensoring(double lambda, Eigen::VectorXd coefs)
      : lambda_(lambda), coefs_(std::move(coefs)) {}
  double survival(double t, const Eigen::VectorXd& z) const override;

 private:
  double lambda_;
  Eigen::VectorXd coefs_;
};

// Arm- and component-specific event-time margin S_{q,a}(t|z).
class MarginModel {
 public:
  virtual ~MarginModel() = default;
  virtual double survival(double t, const Eigen::VectorXd& z) const = 0;
};

class CoxMargin : public MarginModel {
 public:
  explicit CoxMargin(CoxFit fit) : fit_(std::move(fit)) {}
  double survival(double t, const Eigen::VectorXd& z) const override {
    return fit_.survival(t, z);
  }
  const CoxFit& fit() const { return fit_; }

 private:
  CoxFit fit_;
};

// One-parameter exponential rate fit ignoring covariates.
struct ExpFit {
  double rate = 0.0;
  double mean_time = 0.0;
  int n = 0;
};

ExpFit fit_exponential(const std::vector<SurvivalSample>& samples);

class ExponentialMargin : public MarginModel {
 public:
  explicit ExponentialMargin(ExpFit fit) : fit_(fit) {}
  double survival(double t, const Eigen::VectorXd&) const override;
  const ExpFit& fit() const { return fit_; }

 private:
  ExpFit fit_;
};

class ExpSurvInfluence : public SurvInfluence {
 public:
  ExpSurvInfluence(const ExpFit& fit, const std::vector<SurvivalSample>& samples);
  double kappa_own(int i, double t) const override;
  double kappa_over_s_own(int i, double t) const override;
  // scalar-parameter route: kappa_i(t) = -t e^{-rate t} kappa_rate_i
  double scalar_score(int i) const override { return kappa_rate_[i]; }
  double scalar_weight(double t) const override {
    return -t * std::exp(-fit_.rate * t);
  }

 private:
  ExpFit fit_;
  std::vector<double> kappa_rate_;  // per-subject influence on the rate
};

// Weibull proportional-hazards margin with known parameters (DGP truth).
class TrueWeibullMargin : public MarginModel {
 public:
  TrueWeibullMargin(double rho, double lambda0, Eigen::VectorXd coefs, double intercept)
      : rho_(rho), lambda0_(lambda0), coefs_(std::move(coefs)), intercept_(intercept) {}
  double survival(double t, const Eigen::VectorXd& z) const override;

 private:
  double rho_, lambda0_;
  Eigen::VectorXd coefs_;
  double intercept_;  // absorbs the arm effect for arm-specific margins
};

class FlatMargin : public MarginModel {
 public:
  double survival(double, const Eigen::VectorXd&) const override { return 1.0; }
};

// ---- bundle -------------------------------------------------------------------

struct ArmNuisance {
  std::shared_ptr<const CensoringModel> censoring;
  std::vector<std::shared_ptr<const MarginModel>> margins;  // one per component
  CopulaSpec copula = CopulaSpec::independence();

  // influence machinery, present when the models above were fit from data;
  // indices follow the order of the arm's subjects in the record vector
  std::shared_ptr<const SurvInfluence> censoring_influence;
  std::vector<std::shared_ptr<const SurvInfluence>> margin_influences;
  std::vector<double> copula_theta_influence;  // empty when absent
  bool copula_influence_dropped = false;       // degenerate pseudo-information
};

struct NuisanceBundle {
  std::array<ArmNuisance, 2> arm;
  double eps = 1e-6;

  bool has_event_model(int q_count) const {
    for (int a = 0; a < 2; ++a)
      if (static_cast<int>(arm[a].margins.size()) < q_count) return false;
    return true;
  }
};

enum class CensorKind { km, cox };
enum class MarginKind { cox, exponential };

struct NuisanceOptions {
  CensorKind censor = CensorKind::cox;
  MarginKind margin = MarginKind::cox;
  CopulaFamily copula = CopulaFamily::gumbel;
  double eps = 1e-6;
  bool event_model = true;  // m-ipcw needs margins + copula, ipcw does not
};

// Per-subject censoring observation implied by a restricted record: time
// min(follow-up, tau) and indicator 1 when follow-up ended in censoring
// before tau.
SurvivalSample censoring_sample(const RestrictedRecord& rec, double tau);

// Fit all nuisances on the restricted records (both arms). Influence pieces
// are built alongside each fit.
NuisanceBundle fit_nuisances(const std::vector<RestrictedRecord>& records,
                             double tau, const NuisanceOptions& options);

}  // namespace winres
