#include "winres/cox.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace winres {

namespace {

// last index k with times[k] <= t, or -1
int step_index(const std::vector<double>& times, double t) {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  return static_cast<int>(it - times.begin()) - 1;
}

struct Design {
  int n = 0;
  int p = 0;
  std::vector<double> time;
  std::vector<int> status;
  Eigen::MatrixXd z;              // n x p, original scale
  std::vector<int> order_desc;    // indices sorted by time descending
  std::vector<int> active;        // non-constant columns
};

Design prepare(const std::vector<SurvivalSample>& samples) {
  Design d;
  d.n = static_cast<int>(samples.size());
  d.p = samples.empty() ? 0 : static_cast<int>(samples[0].covariates.size());
  d.time.resize(d.n);
  d.status.resize(d.n);
  d.z.resize(d.n, d.p);
  for (int i = 0; i < d.n; ++i) {
    if (static_cast<int>(samples[i].covariates.size()) != d.p)
      throw std::invalid_argument("fit_cox: covariate vectors differ in length");
    d.time[i] = samples[i].observed_time;
    d.status[i] = samples[i].indicator;
    if (d.p > 0) d.z.row(i) = samples[i].covariates.transpose();
  }
  d.order_desc.resize(d.n);
  std::iota(d.order_desc.begin(), d.order_desc.end(), 0);
  std::sort(d.order_desc.begin(), d.order_desc.end(),
            [&](int a, int b) { return d.time[a] > d.time[b]; });
  for (int j = 0; j < d.p; ++j) {
    double mn = d.z.col(j).minCoeff(), mx = d.z.col(j).maxCoeff();
    if (mx - mn > 0.0) d.active.push_back(j);
  }
  return d;
}

struct PartialLik {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;
};

// Breslow-ties partial likelihood pieces over the active-column design x.
PartialLik eval_partial(const Design& d, const Eigen::MatrixXd& x,
                        const Eigen::VectorXd& beta) {
  const int pa = static_cast<int>(x.cols());
  PartialLik out;
  out.score = Eigen::VectorXd::Zero(pa);
  out.info = Eigen::MatrixXd::Zero(pa, pa);
  Eigen::VectorXd eta = x * beta;

  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(pa);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(pa, pa);
  int k = 0;
  const int n = d.n;
  while (k < n) {
    const double t = d.time[d.order_desc[k]];
    // absorb everyone entering the risk set at this time
    int k2 = k;
    while (k2 < n && d.time[d.order_desc[k2]] == t) {
      int i = d.order_desc[k2];
      double w = std::exp(eta[i]);
      s0 += w;
      s1.noalias() += w * x.row(i).transpose();
      s2.noalias() += w * x.row(i).transpose() * x.row(i);
      ++k2;
    }
    int events = 0;
    double eta_events = 0.0;
    Eigen::VectorXd zsum = Eigen::VectorXd::Zero(pa);
    for (int kk = k; kk < k2; ++kk) {
      int i = d.order_desc[kk];
      if (d.status[i] == 1) {
        ++events;
        eta_events += eta[i];
        zsum += x.row(i).transpose();
      }
    }
    if (events > 0) {
      Eigen::VectorXd zb = s1 / s0;
      out.loglik += eta_events - events * std::log(s0);
      out.score += zsum - events * zb;
      out.info += events * (s2 / s0 - zb * zb.transpose());
    }
    k = k2;
  }
  return out;
}

}  // namespace

int StepCorrectionBasis::bucket(double t) const {
  return step_index(times, t);
}

double CoxFit::cumhaz(double t) const {
  int k = step_index(baseline_times, t);
  return k < 0 ? 0.0 : baseline_cumhaz[k];
}

double CoxFit::survival(double t, const Eigen::VectorXd& z) const {
  double lin = beta.size() > 0 ? beta.dot(z) : 0.0;
  return std::exp(-cumhaz(t) * std::exp(lin));
}

double cox_survival(const CoxFit& fit, double t, const Eigen::VectorXd& z) {
  return fit.survival(t, z);
}

CoxFit fit_cox(const std::vector<SurvivalSample>& samples, double tol, int max_iter) {
  if (samples.empty()) throw std::invalid_argument("fit_cox: no samples");
  Design d = prepare(samples);
  int n_events = std::accumulate(d.status.begin(), d.status.end(), 0);
  if (n_events == 0) throw std::invalid_argument("fit_cox: no events");

  const int pa = static_cast<int>(d.active.size());
  Eigen::MatrixXd x(d.n, pa);
  for (int j = 0; j < pa; ++j) x.col(j) = d.z.col(d.active[j]);
  // center for conditioning; beta is unaffected, the baseline is rebuilt on
  // the original scale afterwards
  Eigen::VectorXd colmean = pa > 0 ? Eigen::VectorXd(x.colwise().mean()) : Eigen::VectorXd();
  for (int j = 0; j < pa; ++j) x.col(j).array() -= colmean[j];

  Eigen::VectorXd beta_a = Eigen::VectorXd::Zero(pa);
  bool converged = (pa == 0);
  double snorm = 0.0;
  if (pa > 0) {
    PartialLik cur = eval_partial(d, x, beta_a);
    for (int it = 0; it < max_iter; ++it) {
      snorm = cur.score.lpNorm<Eigen::Infinity>();
      if (snorm <= tol) { converged = true; break; }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(cur.info);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
          ldlt.vectorD().minCoeff() <= 1e-12 * cur.info.trace())
        throw std::runtime_error("fit_cox: information not invertible");
      Eigen::VectorXd step = ldlt.solve(cur.score);
      double scale = 1.0;
      for (int h = 0; h < 30; ++h) {
        Eigen::VectorXd cand = beta_a + scale * step;
        PartialLik next = eval_partial(d, x, cand);
        if (next.loglik >= cur.loglik - 1e-12) {
          beta_a = cand;
          cur = next;
          break;
        }
        scale *= 0.5;
        if (h == 29) { beta_a += scale * step; cur = eval_partial(d, x, beta_a); }
      }
    }
    if (!converged) {
      snorm = cur.score.lpNorm<Eigen::Infinity>();
      if (snorm > tol) {
        Eigen::VectorXd full = Eigen::VectorXd::Zero(d.p);
        for (int j = 0; j < pa; ++j) full[d.active[j]] = beta_a[j];
        throw CoxNonConvergence("fit_cox: no convergence after max_iter", full, snorm);
      }
      converged = true;
    }
  }

  CoxFit fit;
  fit.n = d.n;
  fit.n_events = n_events;
  fit.converged = converged;
  fit.score_norm = snorm;
  fit.beta = Eigen::VectorXd::Zero(d.p);
  for (int j = 0; j < pa; ++j) fit.beta[d.active[j]] = beta_a[j];

  // Breslow baseline and risk summaries on the original covariate scale
  Eigen::VectorXd eta = d.p > 0 ? Eigen::VectorXd(d.z * fit.beta)
                                : Eigen::VectorXd::Zero(d.n);
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d.p);
  struct JumpRow { double t; int events; double s0; Eigen::VectorXd s1; };
  std::vector<JumpRow> rows;
  int k = 0;
  while (k < d.n) {
    const double t = d.time[d.order_desc[k]];
    int k2 = k;
    while (k2 < d.n && d.time[d.order_desc[k2]] == t) {
      int i = d.order_desc[k2];
      double w = std::exp(eta[i]);
      s0 += w;
      if (d.p > 0) s1.noalias() += w * d.z.row(i).transpose();
      ++k2;
    }
    int events = 0;
    for (int kk = k; kk < k2; ++kk) events += d.status[d.order_desc[kk]];
    if (events > 0) rows.push_back({t, events, s0, s1});
    k = k2;
  }
  std::reverse(rows.begin(), rows.end());
  double cum = 0.0;
  for (auto& r : rows) {
    double inc = r.events / r.s0;
    cum += inc;
    fit.baseline_times.push_back(r.t);
    fit.baseline_increments.push_back(inc);
    fit.baseline_cumhaz.push_back(cum);
    fit.s0.push_back(r.s0 / d.n);
    fit.zbar.push_back(d.p > 0 ? Eigen::VectorXd(r.s1 / r.s0)
                               : Eigen::VectorXd());
  }

  // observed information, embedded at the active columns
  fit.information = Eigen::MatrixXd::Zero(d.p, d.p);
  if (pa > 0) {
    PartialLik fin = eval_partial(d, x, beta_a);
    for (int a = 0; a < pa; ++a)
      for (int b = 0; b < pa; ++b)
        fit.information(d.active[a], d.active[b]) = fin.info(a, b);
  }
  return fit;
}

// ---- Cox influence pieces ---------------------------------------------------

CoxSurvInfluence::CoxSurvInfluence(const CoxFit& fit,
                                   const std::vector<SurvivalSample>& samples)
    : fit_(fit) {
  if (!fit.converged) throw std::invalid_argument("CoxSurvInfluence: fit not converged");
  n_ = static_cast<int>(samples.size());
  p_ = static_cast<int>(fit.beta.size());
  const int m = static_cast<int>(fit.baseline_times.size());

  basis_.times = fit.baseline_times;
  basis_.lambda0 = fit.baseline_cumhaz;
  basis_.psi.resize(m);
  basis_.bcum.resize(m, p_);
  double acc = 0.0;
  Eigen::VectorXd bacc = Eigen::VectorXd::Zero(p_);
  for (int k = 0; k < m; ++k) {
    acc += fit.baseline_increments[k] / fit.s0[k];
    basis_.psi[k] = acc;
    if (p_ > 0) bacc += fit.zbar[k] * fit.baseline_increments[k];
    basis_.bcum.row(k) = bacc.transpose();
  }

  // A on the mean scale; invert on the active block only
  Eigen::MatrixXd a_mean = fit.information / n_;
  std::vector<int> active;
  for (int j = 0; j < p_; ++j)
    if (a_mean(j, j) > 0.0) active.push_back(j);
  Eigen::MatrixXd a_act(active.size(), active.size());
  for (size_t a = 0; a < active.size(); ++a)
    for (size_t b = 0; b < active.size(); ++b)
      a_act(a, b) = a_mean(active[a], active[b]);
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  if (!active.empty()) {
    ldlt.compute(a_act);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("CoxSurvInfluence: singular information");
  }

  obs_time_.resize(n_);
  indicator_.resize(n_);
  explin_.resize(n_);
  jump_.resize(n_);
  score_.resize(n_);
  ainv_score_.resize(n_);
  w_own_.resize(n_);
  z_.resize(n_);
  for (int i = 0; i < n_; ++i) {
    obs_time_[i] = samples[i].observed_time;
    indicator_[i] = samples[i].indicator;
    z_[i] = samples[i].covariates;
    explin_[i] = std::exp(p_ > 0 ? fit.beta.dot(z_[i]) : 0.0);
    jump_[i] = 0.0;
    if (indicator_[i] == 1) {
      int k = step_index(fit.baseline_times, obs_time_[i]);
      // an event time always carries a baseline jump at that time
      if (k < 0 || fit.baseline_times[k] != obs_time_[i])
        throw std::logic_error("CoxSurvInfluence: event time missing from baseline");
      jump_[i] = 1.0 / fit.s0[k];
    }
    // U_i = delta_i (z_i - zbar(X_i)) - explin_i [z_i Lambda0(X_i) - B(X_i)]
    Eigen::VectorXd u = Eigen::VectorXd::Zero(p_);
    if (p_ > 0) {
      int kx = step_index(fit.baseline_times, obs_time_[i]);
      double lam = kx < 0 ? 0.0 : fit.baseline_cumhaz[kx];
      Eigen::VectorXd b = kx < 0 ? Eigen::VectorXd::Zero(p_)
                                 : Eigen::VectorXd(basis_.bcum.row(kx).transpose());
      if (indicator_[i] == 1) u += z_[i] - fit.zbar[kx];
      u -= explin_[i] * (z_[i] * lam - b);
    }
    score_[i] = u;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(p_);
    if (!active.empty()) {
      Eigen::VectorXd ua(active.size());
      for (size_t a = 0; a < active.size(); ++a) ua[a] = u[active[a]];
      Eigen::VectorXd va = ldlt.solve(ua);
      for (size_t a = 0; a < active.size(); ++a) v[active[a]] = va[a];
    }
    ainv_score_[i] = v;
    w_own_[i] = p_ > 0 ? z_[i].dot(v) : 0.0;
  }
}

double CoxSurvInfluence::mart_int_s0(int i, double t) const {
  double out = (indicator_[i] == 1 && obs_time_[i] <= t) ? jump_[i] : 0.0;
  int k = step_index(fit_.baseline_times, std::min(t, obs_time_[i]));
  if (k >= 0) out -= explin_[i] * basis_.psi[k];
  return out;
}

double CoxSurvInfluence::bdotv(int i, double t) const {
  if (p_ == 0) return 0.0;
  int k = step_index(fit_.baseline_times, t);
  if (k < 0) return 0.0;
  return basis_.bcum.row(k).dot(ainv_score_[i]);
}

SubjectMartingale CoxSurvInfluence::subject(int i) const {
  SubjectMartingale s;
  s.jump = jump_[i];
  s.explin = explin_[i];
  s.x_time = obs_time_[i];
  s.x_bucket = basis_.bucket(obs_time_[i]);
  s.v = ainv_score_[i];
  return s;
}

double CoxSurvInfluence::phi(int i, double t) const {
  return mart_int_s0(i, t) - bdotv(i, t);
}

double CoxSurvInfluence::kappa(int i, double t, const Eigen::VectorXd& z) const {
  double lin = p_ > 0 ? fit_.beta.dot(z) : 0.0;
  double s = std::exp(-fit_.cumhaz(t) * std::exp(lin));
  double zv = p_ > 0 ? z.dot(ainv_score_[i]) : 0.0;
  return -s * std::exp(lin) * (phi(i, t) + fit_.cumhaz(t) * zv);
}

double CoxSurvInfluence::kappa_own(int i, double t) const {
  double s = std::exp(-fit_.cumhaz(t) * explin_[i]);
  return -s * explin_[i] * (phi(i, t) + fit_.cumhaz(t) * w_own_[i]);
}

double CoxSurvInfluence::kappa_over_s_own(int i, double t) const {
  return -explin_[i] * (phi(i, t) + fit_.cumhaz(t) * w_own_[i]);
}

// ---- reverse-KM influence ---------------------------------------------------

KmSurvInfluence::KmSurvInfluence(const KaplanMeierCurve& curve,
                                 const std::vector<SurvivalSample>& samples)
    : curve_(curve) {
  n_ = static_cast<int>(samples.size());
  const int m = static_cast<int>(curve.jump_times.size());

  // recount modeled events per jump (the curve stores times and risk sets)
  std::vector<int> events(m, 0);
  obs_time_.resize(n_);
  jump_.resize(n_, 0.0);
  std::vector<int> jump_of(n_, -1);
  for (int i = 0; i < n_; ++i) {
    obs_time_[i] = samples[i].observed_time;
    if (samples[i].indicator == 1) {
      int k = step_index(curve.jump_times, obs_time_[i]);
      if (k < 0 || curve.jump_times[k] != obs_time_[i])
        throw std::logic_error("KmSurvInfluence: event time missing from curve");
      events[k]++;
      jump_of[i] = k;
    }
  }
  basis_.times = curve.jump_times;
  basis_.psi.resize(m);
  basis_.lambda0.resize(m);
  basis_.bcum.resize(m, 0);
  double acc = 0.0, lam = 0.0;
  for (int k = 0; k < m; ++k) {
    double r = curve.n_at_risk[k];
    acc += n_ * events[k] / (r * r);
    basis_.psi[k] = acc;
    lam += events[k] / r;
    basis_.lambda0[k] = lam;
  }
  for (int i = 0; i < n_; ++i)
    if (jump_of[i] >= 0) jump_[i] = static_cast<double>(n_) / curve.n_at_risk[jump_of[i]];
}

SubjectMartingale KmSurvInfluence::subject(int i) const {
  SubjectMartingale s;
  s.jump = jump_[i];
  s.explin = 1.0;
  s.x_time = obs_time_[i];
  s.x_bucket = basis_.bucket(obs_time_[i]);
  return s;
}

double KmSurvInfluence::mart_int_y(int i, double t) const {
  double out = (jump_[i] > 0.0 && obs_time_[i] <= t) ? jump_[i] : 0.0;
  int k = step_index(curve_.jump_times, std::min(t, obs_time_[i]));
  if (k >= 0) out -= basis_.psi[k];
  return out;
}

double KmSurvInfluence::kappa_own(int i, double t) const {
  return -curve_.eval(t) * mart_int_y(i, t);
}

double KmSurvInfluence::kappa_over_s_own(int i, double t) const {
  return -mart_int_y(i, t);
}

}  // namespace winres
