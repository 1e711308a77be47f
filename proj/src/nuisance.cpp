#include "winres/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace winres {

namespace {
constexpr double kSurvivalFloor = 1e-10;
}

double KmCensoring::survival(double t, const Eigen::VectorXd&) const {
  return std::max(curve_.eval(t), kSurvivalFloor);
}

double CoxCensoring::survival(double t, const Eigen::VectorXd& z) const {
  return std::max(fit_.survival(t, z), kSurvivalFloor);
}

double TrueExpPhCensoring::survival(double t, const Eigen::VectorXd& z) const {
  return std::max(std::exp(-lambda_ * t * std::exp(coefs_.dot(z))), kSurvivalFloor);
}

ExpFit fit_exponential(const std::vector<SurvivalSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("fit_exponential: no samples");
  double events = 0.0, time = 0.0;
  for (const auto& s : samples) {
    events += s.indicator;
    time += s.observed_time;
  }
  if (time <= 0.0) throw std::invalid_argument("fit_exponential: no exposure time");
  ExpFit fit;
  fit.n = static_cast<int>(samples.size());
  fit.mean_time = time / fit.n;
  fit.rate = events / time;
  return fit;
}

double ExponentialMargin::survival(double t, const Eigen::VectorXd&) const {
  return std::exp(-fit_.rate * t);
}

ExpSurvInfluence::ExpSurvInfluence(const ExpFit& fit,
                                   const std::vector<SurvivalSample>& samples)
    : fit_(fit) {
  kappa_rate_.resize(samples.size());
  for (size_t i = 0; i < samples.size(); ++i)
    kappa_rate_[i] =
        (samples[i].indicator - fit.rate * samples[i].observed_time) / fit.mean_time;
}

double ExpSurvInfluence::kappa_own(int i, double t) const {
  return -t * std::exp(-fit_.rate * t) * kappa_rate_[i];
}

double ExpSurvInfluence::kappa_over_s_own(int i, double t) const {
  return -t * kappa_rate_[i];
}

double TrueWeibullMargin::survival(double t, const Eigen::VectorXd& z) const {
  if (t <= 0.0) return 1.0;
  return std::exp(-lambda0_ * std::pow(t, rho_) * std::exp(coefs_.dot(z) + intercept_));
}

SurvivalSample censoring_sample(const RestrictedRecord& rec, double) {
  SurvivalSample s;
  s.observed_time = rec.censor_time;
  s.indicator = rec.censor_status;
  s.covariates = rec.covariates;
  s.arm = rec.arm;
  return s;
}

NuisanceBundle fit_nuisances(const std::vector<RestrictedRecord>& records,
                             double tau, const NuisanceOptions& options) {
  if (records.empty()) throw std::invalid_argument("fit_nuisances: no records");
  const int q_count = records[0].q_count();

  NuisanceBundle bundle;
  bundle.eps = options.eps;
  for (int a = 0; a < 2; ++a) {
    std::vector<SurvivalSample> cens;
    std::vector<std::vector<SurvivalSample>> marg(q_count);
    std::vector<const RestrictedRecord*> arm_recs;
    for (const auto& rec : records) {
      if (rec.arm != a) continue;
      arm_recs.push_back(&rec);
      cens.push_back(censoring_sample(rec, tau));
      for (int q = 0; q < q_count; ++q) {
        SurvivalSample s;
        s.observed_time = rec.y_tilde[q];
        s.indicator = rec.delta[q];
        s.covariates = rec.covariates;
        s.arm = a;
        marg[q].push_back(s);
      }
    }
    if (arm_recs.empty()) throw std::invalid_argument("fit_nuisances: empty arm");
    ArmNuisance& arm = bundle.arm[a];

    int censor_events = 0;
    for (const auto& s : cens) censor_events += s.indicator;
    if (options.censor == CensorKind::km || censor_events == 0) {
      // a Cox censoring model with zero censoring events degenerates to G == 1
      KaplanMeierCurve curve = fit_censoring_km(cens);
      arm.censoring_influence = std::make_shared<KmSurvInfluence>(curve, cens);
      arm.censoring = std::make_shared<KmCensoring>(std::move(curve));
    } else {
      auto model = std::make_shared<CoxCensoring>(fit_cox(cens));
      arm.censoring_influence = std::make_shared<CoxSurvInfluence>(model->fit(), cens);
      arm.censoring = std::move(model);
    }

    if (!options.event_model) continue;

    arm.margins.resize(q_count);
    arm.margin_influences.resize(q_count);
    for (int q = 0; q < q_count; ++q) {
      int margin_events = 0;
      for (const auto& s : marg[q]) margin_events += s.indicator;
      if (margin_events == 0 || options.margin == MarginKind::exponential) {
        // with no observed component-q events the margin degenerates to S == 1
        // (a rate-zero exponential with zero influence)
        ExpFit fit = fit_exponential(marg[q]);
        arm.margins[q] = std::make_shared<ExponentialMargin>(fit);
        arm.margin_influences[q] = std::make_shared<ExpSurvInfluence>(fit, marg[q]);
      } else {
        auto model = std::make_shared<CoxMargin>(fit_cox(marg[q]));
        arm.margin_influences[q] =
            std::make_shared<CoxSurvInfluence>(model->fit(), marg[q]);
        arm.margins[q] = std::move(model);
      }
    }

    if (options.copula == CopulaFamily::independence || q_count < 2) {
      arm.copula = CopulaSpec::independence();
      continue;
    }
    // pseudo-likelihood pairs on truncated fitted uniforms; for hierarchies
    // beyond two components the exchangeable parameter pools all component
    // pairs as a composite likelihood
    std::vector<CensoredUniformPair> pairs;
    auto trunc = [&](double x) {
      return std::clamp(x, options.eps, 1.0 - options.eps);
    };
    for (int q1 = 0; q1 < q_count; ++q1)
      for (int q2 = q1 + 1; q2 < q_count; ++q2)
        for (const auto* rp : arm_recs) {
          CensoredUniformPair p;
          p.u1 = trunc(arm.margins[q1]->survival(rp->y_tilde[q1], rp->covariates));
          p.u2 = trunc(arm.margins[q2]->survival(rp->y_tilde[q2], rp->covariates));
          p.d1 = rp->delta[q1];
          p.d2 = rp->delta[q2];
          pairs.push_back(p);
        }
    CopulaFitResult cop = fit_copula(options.copula, pairs);
    arm.copula = cop.spec;
    const size_t n_arm = arm_recs.size();
    if (cop.pseudo_information > 1e-8) {
      arm.copula_theta_influence.assign(n_arm, 0.0);
      // composite scores: subject i owns one score term per component pair
      const size_t n_pairsets = pairs.size() / n_arm;
      for (size_t block = 0; block < n_pairsets; ++block)
        for (size_t i = 0; i < n_arm; ++i)
          arm.copula_theta_influence[i] +=
              n_arm * cop.scores[block * n_arm + i] / cop.pseudo_information;
    } else {
      arm.copula_influence_dropped = true;
    }
  }
  return bundle;
}

}  // namespace winres
