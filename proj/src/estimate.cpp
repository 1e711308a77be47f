#include "winres/estimate.hpp"

#include <algorithm>
#include <cmath>

namespace winres {

std::string method_name(Method m) {
  switch (m) {
    case Method::ipcw: return "ipcw";
    case Method::m_ipcw: return "m-ipcw";
    case Method::raw: return "raw";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "ipcw") return Method::ipcw;
  if (name == "m-ipcw" || name == "m_ipcw" || name == "mipcw") return Method::m_ipcw;
  if (name == "raw") return Method::raw;
  throw std::invalid_argument("unknown method: " + name);
}

double tree_sum(const double* xs, int n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += xs[i];
    return acc;
  }
  int half = n / 2;
  return tree_sum(xs, half) + tree_sum(xs + half, n - half);
}

namespace {
double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }
}  // namespace

// ---- standalone conditional tie ratios ----------------------------------------

namespace {

double ratio_impl(const NuisanceBundle& bundle, double tau, int arm, int q,
                  double u, double t, const Eigen::VectorXd& z, bool eq) {
  if (!(0.0 <= t && t <= u && u <= tau))
    throw std::invalid_argument("tie ratio requires 0 <= t <= u <= tau");
  if (q < 1) return 1.0;
  const ArmNuisance& an = bundle.arm[arm];
  if (static_cast<int>(an.margins.size()) <= q)
    throw std::invalid_argument("tie ratio: margins missing for component");
  const double eps = bundle.eps;
  auto trunc = [&](double x) { return std::clamp(x, eps, 1.0 - eps); };
  std::vector<double> num_args(q + 1), den_args(q + 1);
  for (int k = 0; k < q; ++k) {
    num_args[k] = trunc(an.margins[k]->survival(tau, z));
    den_args[k] = trunc(an.margins[k]->survival(u, z));
  }
  num_args[q] = den_args[q] = trunc(an.margins[q]->survival(t, z));
  double num, den;
  if (eq) {
    num = std::fabs(archimedean_prefix_dlast(an.copula, num_args));
    den = std::fabs(archimedean_prefix_dlast(an.copula, den_args));
  } else {
    num = archimedean_prefix_cdf(an.copula, num_args);
    den = archimedean_prefix_cdf(an.copula, den_args);
  }
  if (!(den >= eps * eps))
    throw PositivityError("conditional tie ratio denominator below eps^2 at component " +
                          std::to_string(q + 1));
  return clamp01(num / den);
}

}  // namespace

double ratio_gt(const NuisanceBundle& bundle, double tau, int arm, int q, double u,
                double t, const Eigen::VectorXd& z) {
  return ratio_impl(bundle, tau, arm, q, u, t, z, false);
}

double ratio_eq(const NuisanceBundle& bundle, double tau, int arm, int q, double u,
                double t, const Eigen::VectorXd& z) {
  return ratio_impl(bundle, tau, arm, q, u, t, z, true);
}

// ---- engine --------------------------------------------------------------------

PairwiseEngine::PairwiseEngine(const std::vector<RestrictedRecord>& records,
                               double tau, Method method,
                               const NuisanceBundle& bundle, bool with_influence)
    : records_(&records),
      bundle_(&bundle),
      tau_(tau),
      method_(method),
      with_influence_(with_influence) {
  if (records.empty()) throw std::invalid_argument("estimate: no records");
  q_count_ = records[0].q_count();
  arm_ordinal_.resize(records.size());
  for (int r = 0; r < static_cast<int>(records.size()); ++r) {
    const RestrictedRecord& rec = records[r];
    if (rec.q_count() != q_count_)
      throw std::invalid_argument("estimate: inconsistent component counts");
    if (rec.arm == 1) {
      arm_ordinal_[r] = static_cast<int>(treated_.size());
      treated_.push_back(r);
    } else {
      arm_ordinal_[r] = static_cast<int>(control_.size());
      control_.push_back(r);
    }
  }
  if (treated_.empty() || control_.empty())
    throw std::invalid_argument("estimate: both arms must be nonempty");
  if (method_ == Method::raw) return;

  if (method_ == Method::m_ipcw && q_count_ >= 2) {
    if (!bundle.has_event_model(q_count_))
      throw std::invalid_argument("m-ipcw requires fitted margins and a copula");
    bivariate_ = (q_count_ == 2);
  }
  build_subject_caches();
  if (with_influence_) build_influence_caches();
}

double PairwiseEngine::margin_survival(int arm, int q, double t,
                                       const Eigen::VectorXd& z) const {
  const double eps = bundle_->eps;
  return std::clamp(bundle_->arm[arm].margins[q]->survival(t, z), eps, 1.0 - eps);
}

double PairwiseEngine::tie_ratio(int arm, int rec_idx, int q, double s_qt,
                                 bool eq) const {
  const CopulaSpec& cop = bundle_->arm[arm].copula;
  const Pre& pre = pre_[rec_idx];
  double num, den;
  if (bivariate_) {
    num = eq ? copula_dv(cop, pre.s1_tau, s_qt) : copula_cdf(cop, pre.s1_tau, s_qt);
    den = eq ? copula_dv(cop, pre.s1_u, s_qt) : copula_cdf(cop, pre.s1_u, s_qt);
  } else if (eq) {
    num = std::fabs(arch_psi_deriv(cop, pre.phi_tau[q] + arch_phi(cop, s_qt)));
    den = std::fabs(arch_psi_deriv(cop, pre.phi_u[q] + arch_phi(cop, s_qt)));
  } else {
    num = arch_psi(cop, pre.phi_tau[q] + arch_phi(cop, s_qt));
    den = arch_psi(cop, pre.phi_u[q] + arch_phi(cop, s_qt));
  }
  const double eps = bundle_->eps;
  if (!(den >= eps * eps))
    throw PositivityError("conditional tie ratio denominator below eps^2 at component " +
                          std::to_string(q + 1));
  return clamp01(num / den);
}

void PairwiseEngine::build_subject_caches() {
  const auto& records = *records_;
  const bool mipcw = (method_ == Method::m_ipcw && q_count_ >= 2);
  const double eps = bundle_->eps;
  auto trunc = [&](double x) { return std::clamp(x, eps, 1.0 - eps); };

  if (mipcw) {
    pre_.resize(records.size());
    for (size_t r = 0; r < records.size(); ++r) {
      const RestrictedRecord& rec = records[r];
      const ArmNuisance& arm = bundle_->arm[rec.arm];
      Pre& pre = pre_[r];
      if (bivariate_) {
        pre.s1_tau = trunc(arm.margins[0]->survival(tau_, rec.covariates));
        pre.s1_u = trunc(arm.margins[0]->survival(rec.gate_u[1], rec.covariates));
      } else {
        pre.phi_tau.assign(q_count_, 0.0);
        pre.phi_u.assign(q_count_, 0.0);
        for (int q = 1; q < q_count_; ++q) {
          for (int k = 0; k < q; ++k) {
            pre.phi_tau[q] += arch_phi(
                arm.copula, trunc(arm.margins[k]->survival(tau_, rec.covariates)));
            pre.phi_u[q] += arch_phi(
                arm.copula,
                trunc(arm.margins[k]->survival(rec.gate_u[q], rec.covariates)));
          }
        }
      }
    }
  }

  // event lists per component and side
  for (int a = 0; a < 2; ++a) {
    ev_[a].assign(q_count_, {});
    evpos_[a].assign(q_count_, {});
    const auto& own = (a == 1) ? treated_ : control_;
    for (int q = 0; q < q_count_; ++q) {
      evpos_[a][q].assign(own.size(), -1);
      for (size_t o = 0; o < own.size(); ++o) {
        if (records[own[o]].delta[q] == 1) {
          evpos_[a][q][o] = static_cast<int>(ev_[a][q].size());
          ev_[a][q].push_back(static_cast<int>(o));
        }
      }
    }
  }

  // censoring weights and tie ratios at opposite-arm event times
  const CensoringModel* g[2] = {bundle_->arm[0].censoring.get(),
                                bundle_->arm[1].censoring.get()};
  for (int side = 0; side < 2; ++side) {
    const int opp = 1 - side;
    const auto& own = (side == 1) ? treated_ : control_;
    const auto& other = (opp == 1) ? treated_ : control_;
    g_opp_[side].resize(q_count_);
    rgt_opp_[side].resize(q_count_);
    g_own_[side].assign(q_count_, {});
    req_own_[side].assign(q_count_, {});
    g_tau_[side].resize(own.size());
    for (size_t o = 0; o < own.size(); ++o) {
      const RestrictedRecord& rec = records[own[o]];
      g_tau_[side][o] = g[side]->survival(tau_, rec.covariates);
    }
    for (int q = 0; q < q_count_; ++q) {
      const auto& evs = ev_[opp][q];
      Table& gt = g_opp_[side][q];
      gt.cols = static_cast<int>(evs.size());
      gt.data.assign(own.size() * evs.size(), 0.0);
      Table& rt = rgt_opp_[side][q];
      const bool need_ratio = mipcw && q >= 1;
      if (need_ratio) {
        rt.cols = gt.cols;
        rt.data.assign(own.size() * evs.size(), 0.0);
      }
      g_own_[side][q].assign(own.size(), 0.0);
      req_own_[side][q].assign(own.size(), 0.0);
      for (size_t o = 0; o < own.size(); ++o) {
        const RestrictedRecord& rec = records[own[o]];
        for (size_t e = 0; e < evs.size(); ++e) {
          double t = records[other[evs[e]]].y_tilde[q];
          gt.at(o, e) = g[side]->survival(t, rec.covariates);
          if (need_ratio && rec.bar_delta[q])
            rt.at(o, e) = tie_ratio(side, own[o], q,
                                    margin_survival(side, q, t, rec.covariates),
                                    false);
        }
        if (rec.delta[q] == 1) {
          g_own_[side][q][o] = g[side]->survival(rec.y_tilde[q], rec.covariates);
          if (need_ratio && rec.bar_delta[q])
            req_own_[side][q][o] =
                tie_ratio(side, own[o], q,
                          margin_survival(side, q, rec.y_tilde[q], rec.covariates),
                          true);
        }
      }
    }
  }
}

void PairwiseEngine::build_influence_caches() {
  if (method_ == Method::raw)
    throw std::invalid_argument("influence rows are defined for ipcw/m-ipcw only");
  const auto& records = *records_;
  const bool event_corr = (method_ == Method::m_ipcw && q_count_ == 2);
  const double eps = bundle_->eps;
  const double floor2 = eps * eps;

  for (int side = 0; side < 2; ++side) {
    const ArmNuisance& an = bundle_->arm[side];
    if (!an.censoring_influence)
      throw std::invalid_argument("bundle carries no censoring influence pieces");
    const auto& own = (side == 1) ? treated_ : control_;
    const auto& other = (side == 1) ? control_ : treated_;
    const int opp = 1 - side;

    explin_cens_[side].resize(own.size());
    for (size_t o = 0; o < own.size(); ++o)
      explin_cens_[side][o] =
          an.censoring_influence->subject(static_cast<int>(o)).explin;

    if (!event_corr) continue;
    const CopulaSpec& cop = an.copula;
    const auto& evs = ev_[opp][1];
    Table& s2t = s2_opp_[side];
    s2t.cols = static_cast<int>(evs.size());
    s2t.data.assign(own.size() * evs.size(), 0.0);
    ReCoef& gt = re_gt_[side];
    for (Table* t : {&gt.c1n, &gt.c1d, &gt.c2, &gt.cth}) {
      t->cols = s2t.cols;
      t->data.assign(own.size() * evs.size(), 0.0);
    }
    re_eq_[side].assign(own.size(), {0.0, 0.0, 0.0, 0.0});
    s2_own_[side].assign(own.size(), 1.0);

#pragma omp parallel for schedule(static)
    for (int o = 0; o < static_cast<int>(own.size()); ++o) {
      const RestrictedRecord& rec = records[own[o]];
      if (!rec.bar_delta[1]) continue;  // gated out of every q=2 kernel
      const Pre& pre = pre_[own[o]];
      for (size_t e = 0; e < evs.size(); ++e) {
        const double t = records[other[evs[e]]].y_tilde[1];
        const double s2 = margin_survival(side, 1, t, rec.covariates);
        s2t.at(o, e) = s2;
        const double cn = std::max(copula_cdf(cop, pre.s1_tau, s2), floor2);
        const double cd = std::max(copula_cdf(cop, pre.s1_u, s2), floor2);
        gt.c1n.at(o, e) = copula_du(cop, pre.s1_tau, s2) / cn;
        gt.c1d.at(o, e) = copula_du(cop, pre.s1_u, s2) / cd;
        gt.c2.at(o, e) =
            copula_dv(cop, pre.s1_tau, s2) / cn - copula_dv(cop, pre.s1_u, s2) / cd;
        gt.cth.at(o, e) = copula_dtheta(cop, pre.s1_tau, s2) / cn -
                          copula_dtheta(cop, pre.s1_u, s2) / cd;
      }
      if (rec.delta[1] == 1) {
        const double t = rec.y_tilde[1];
        const double s2 = margin_survival(side, 1, t, rec.covariates);
        s2_own_[side][o] = s2;
        const double an_ = std::max(copula_dv(cop, pre.s1_tau, s2), floor2);
        const double ad = std::max(copula_dv(cop, pre.s1_u, s2), floor2);
        re_eq_[side][o] = {copula_density(cop, pre.s1_tau, s2) / an_,
                           copula_density(cop, pre.s1_u, s2) / ad,
                           copula_dv_dv(cop, pre.s1_tau, s2) / an_ -
                               copula_dv_dv(cop, pre.s1_u, s2) / ad,
                           copula_dv_dtheta(cop, pre.s1_tau, s2) / an_ -
                               copula_dv_dtheta(cop, pre.s1_u, s2) / ad};
      }
    }
  }
}

// ---- kernels --------------------------------------------------------------------

int PairwiseEngine::pair_kernels(int it, int jc, double* win, double* loss) const {
  const RestrictedRecord& ri = treated(it);
  const RestrictedRecord& rj = control(jc);
  const int qn = q_count_;
  std::fill(win, win + qn, 0.0);
  std::fill(loss, loss + qn, 0.0);

  if (method_ == Method::raw) {
    for (int q = 0; q < qn; ++q) {
      bool tied = true;
      for (int k = 0; k < q; ++k)
        if (ri.y_tilde[k] != rj.y_tilde[k]) { tied = false; break; }
      if (!tied) break;
      if (ri.y_tilde[q] > rj.y_tilde[q]) { win[q] = 1.0; break; }
      if (rj.y_tilde[q] > ri.y_tilde[q]) { loss[q] = 1.0; break; }
    }
    return 0;
  }

  const double eps2 = bundle_->eps * bundle_->eps;
  int floored = 0;
  auto weight = [&](double denom) {
    if (denom < eps2) { denom = eps2; ++floored; }
    return 1.0 / denom;
  };

  if (ri.y_tilde[0] > rj.y_tilde[0] && rj.delta[0] == 1) {
    int e = evpos_[0][0][jc];
    win[0] = weight(g_opp_[1][0].at(it, e) * g_own_[0][0][jc]);
  }
  if (rj.y_tilde[0] > ri.y_tilde[0] && ri.delta[0] == 1) {
    int e = evpos_[1][0][it];
    loss[0] = weight(g_own_[1][0][it] * g_opp_[0][0].at(jc, e));
  }

  for (int q = 1; q < qn; ++q) {
    if (method_ == Method::ipcw) {
      bool gate = true;
      for (int k = 0; k < q; ++k)
        if (ri.y_tilde[k] != tau_ || rj.y_tilde[k] != tau_) { gate = false; break; }
      if (!gate) continue;
      double w_tau = 0.0;
      bool have_w = false;
      if (ri.y_tilde[q] > rj.y_tilde[q] && rj.delta[q] == 1) {
        w_tau = weight(g_tau_[1][it] * g_tau_[0][jc]);
        have_w = true;
        win[q] = w_tau;
      }
      if (rj.y_tilde[q] > ri.y_tilde[q] && ri.delta[q] == 1)
        loss[q] = have_w ? w_tau : weight(g_tau_[1][it] * g_tau_[0][jc]);
    } else {  // m-ipcw
      if (!ri.bar_delta[q] || !rj.bar_delta[q]) continue;
      if (ri.y_tilde[q] > rj.y_tilde[q] && rj.delta[q] == 1) {
        int e = evpos_[0][q][jc];
        win[q] = rgt_opp_[1][q].at(it, e) * req_own_[0][q][jc] *
                 weight(g_opp_[1][q].at(it, e) * g_own_[0][q][jc]);
      }
      if (rj.y_tilde[q] > ri.y_tilde[q] && ri.delta[q] == 1) {
        int e = evpos_[1][q][it];
        loss[q] = req_own_[1][q][it] * rgt_opp_[0][q].at(jc, e) *
                  weight(g_own_[1][q][it] * g_opp_[0][q].at(jc, e));
      }
    }
  }
  return floored;
}

void PairwiseEngine::weight_times(int it, int jc, double* tw, double* tl) const {
  const RestrictedRecord& ri = treated(it);
  const RestrictedRecord& rj = control(jc);
  tw[0] = rj.y_tilde[0];
  tl[0] = ri.y_tilde[0];
  for (int q = 1; q < q_count_; ++q) {
    if (method_ == Method::ipcw) {
      tw[q] = tau_;
      tl[q] = tau_;
    } else {
      tw[q] = rj.y_tilde[q];
      tl[q] = ri.y_tilde[q];
    }
  }
}

long PairwiseEngine::estimate_row_treated(int it, double* row) const {
  const int qn = q_count_;
  std::vector<double> win(qn), loss(qn);
  long floored = 0;
  for (int jc = 0; jc < n0(); ++jc) {
    floored += pair_kernels(it, jc, win.data(), loss.data());
    for (int q = 0; q < qn; ++q) {
      row[q] += win[q];
      row[qn + q] += loss[q];
    }
  }
  return floored;
}

// ---- estimation ------------------------------------------------------------------

WinComponents estimate(const PairwiseEngine& engine) {
  const int n1 = engine.n1(), n0 = engine.n0(), qn = engine.q_count();
  std::vector<double> rows(static_cast<size_t>(n1) * 2 * qn, 0.0);
  std::vector<long> floored(n1, 0);
#pragma omp parallel for schedule(static)
  for (int it = 0; it < n1; ++it)
    floored[it] = engine.estimate_row_treated(it, &rows[static_cast<size_t>(it) * 2 * qn]);

  WinComponents out;
  out.method = engine.method();
  out.tau = engine.tau();
  out.pi_tq.resize(qn);
  out.pi_cq.resize(qn);
  const double scale = 1.0 / (static_cast<double>(n1) * n0);
  std::vector<double> col(n1);
  for (int q = 0; q < 2 * qn; ++q) {
    for (int it = 0; it < n1; ++it)
      col[it] = rows[static_cast<size_t>(it) * 2 * qn + q];
    double total = tree_sum(col.data(), n1) * scale;
    if (q < qn) out.pi_tq[q] = total;
    else out.pi_cq[q - qn] = total;
  }
  out.pi_t = tree_sum(out.pi_tq.data(), qn);
  out.pi_c = tree_sum(out.pi_cq.data(), qn);
  out.pi_u = 1.0 - out.pi_t - out.pi_c;
  for (int it = 0; it < n1; ++it) out.floored_denominators += floored[it];
  return out;
}

WinComponents estimate(const std::vector<RestrictedRecord>& records, double tau,
                       Method method, const NuisanceBundle& bundle) {
  PairwiseEngine engine(records, tau, method, bundle);
  return estimate(engine);
}

WinSummary summarize(const WinComponents& c) {
  WinSummary s;
  s.nb = c.pi_t - c.pi_c;
  if (!(c.pi_c > 0.0))
    throw std::domain_error("summarize: win ratio undefined (pi_c <= 0)");
  s.wr = c.pi_t / c.pi_c;
  if (!(std::fabs(s.nb) < 1.0))
    throw std::domain_error("summarize: win odds undefined (|NB| >= 1)");
  s.wo = (1.0 + s.nb) / (1.0 - s.nb);
  return s;
}

}  // namespace winres
