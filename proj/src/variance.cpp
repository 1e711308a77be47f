#include "winres/variance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace winres {

namespace {

// Aggregates pairwise weights against one fitted curve's step basis. Each add
// pushes a = sum of (pair weight x S(t|z) e^{b'z}) and az = the same sum
// carrying the pair member's covariates, bucketed at k(t); apply() then
// integrates a subject's martingale pieces against the collected weights:
//   sum_pairs w * kappa_l(t,z)
//     = -[ jump_l SA(x_l) - explin_l F(x_l) - bvec'v_l + zvec'v_l ] with the
// sign folded into the caller's a.
struct StepAgg {
  const StepCorrectionBasis* basis = nullptr;
  std::vector<double> a;
  std::vector<double> suffix_a;    // sum_{k' >= k} a
  std::vector<double> prefix_apsi; // sum_{k' < k} a psi
  Eigen::VectorXd bvec, zvec;

  void init(const StepCorrectionBasis* b, int) {
    basis = b;
    a.assign(b->times.size(), 0.0);
    // the regression terms live on the fit's own covariate dimension (0 for KM)
    const int p = static_cast<int>(b->bcum.cols());
    bvec = Eigen::VectorXd::Zero(p);
    zvec = Eigen::VectorXd::Zero(p);
  }
  void add(double aw, int k, const Eigen::VectorXd& az) {
    if (k < 0) return;  // before the first jump every basis piece vanishes
    a[k] += aw;
    if (bvec.size() > 0) {
      bvec.noalias() += aw * basis->bcum.row(k).transpose();
      zvec.noalias() += basis->lambda0[k] * az;
    }
  }
  void finalize() {
    const int m = static_cast<int>(a.size());
    suffix_a.assign(m + 1, 0.0);
    for (int k = m - 1; k >= 0; --k) suffix_a[k] = suffix_a[k + 1] + a[k];
    prefix_apsi.assign(m + 1, 0.0);
    for (int k = 0; k < m; ++k)
      prefix_apsi[k + 1] = prefix_apsi[k] + a[k] * basis->psi[k];
  }
  double apply(const SubjectMartingale& s) const {
    double out = 0.0;
    if (s.jump > 0.0 && s.x_bucket >= 0) out += s.jump * suffix_a[s.x_bucket];
    if (s.x_bucket >= 0)
      out -= s.explin * (prefix_apsi[s.x_bucket] +
                         basis->psi[s.x_bucket] * suffix_a[s.x_bucket]);
    if (s.v.size() > 0) out += (zvec - bvec).dot(s.v);
    return out;
  }
};

// One (fitted curve, coordinate) aggregator: step-basis route for Cox/KM fits,
// scalar-score route for one-parameter fits.
struct NuisanceAgg {
  const SurvInfluence* inf = nullptr;
  bool is_step = false;
  StepAgg step;
  double coef = 0.0;

  void init(const SurvInfluence* influence, int p) {
    inf = influence;
    is_step = influence->basis() != nullptr;
    if (is_step) step.init(influence->basis(), p);
  }
  int bucket(double t) const { return is_step ? inf->basis()->bucket(t) : 0; }
  void finalize() {
    if (is_step) step.finalize();
  }
  double apply(int i, const SubjectMartingale* subj) const {
    if (is_step) return step.apply(*subj);
    return coef * inf->scalar_score(i);
  }
};

}  // namespace

InfluenceRows influence_rows(const PairwiseEngine& engine,
                             const WinComponents& components) {
  if (!engine.with_influence())
    throw std::invalid_argument("influence_rows: engine built without influence caches");
  if (!engine.event_correction_supported())
    throw std::invalid_argument(
        "m-ipcw variance is implemented for two-component hierarchies only; "
        "hierarchies beyond Q=2 are an open extension");

  const auto& records = *engine.records_;
  const int n1 = engine.n1(), n0 = engine.n0(), qn = engine.q_count();
  const double npairs = static_cast<double>(n1) * n0;
  const bool mipcw = (engine.method_ == Method::m_ipcw && qn >= 2);
  const bool event_corr = mipcw && qn == 2;
  const Eigen::Vector2d pi_hat(components.pi_t, components.pi_c);

  InfluenceRows rows;
  rows.n1 = n1;
  rows.n0 = n0;
  const int n = n1 + n0;
  rows.xi.assign(n, Eigen::Vector2d::Zero());
  rows.rg.assign(n, Eigen::Vector2d::Zero());
  rows.re.assign(n, Eigen::Vector2d::Zero());
  rows.psi.assign(n, Eigen::Vector2d::Zero());
  rows.arm.assign(n, 0);

  const ArmNuisance* an[2] = {&engine.bundle_->arm[0], &engine.bundle_->arm[1]};
  int pz = static_cast<int>(records[0].covariates.size());

  // aggregators: [arm][coordinate 0=win 1=loss]
  NuisanceAgg cens[2][2], marg1[2][2], marg2[2][2];
  double theta_coef[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c) {
      cens[a][c].init(an[a]->censoring_influence.get(), pz);
      if (event_corr) {
        marg1[a][c].init(an[a]->margin_influences[0].get(), pz);
        marg2[a][c].init(an[a]->margin_influences[1].get(), pz);
      }
    }

  // per-subject explin of the margin fits (pair members are fitting subjects)
  std::vector<double> em1[2], em2[2];
  if (event_corr)
    for (int a = 0; a < 2; ++a) {
      const auto& own = (a == 1) ? engine.treated_ : engine.control_;
      em1[a].resize(own.size());
      em2[a].resize(own.size());
      const SurvInfluence* m1 = an[a]->margin_influences[0].get();
      const SurvInfluence* m2 = an[a]->margin_influences[1].get();
      for (size_t o = 0; o < own.size(); ++o) {
        em1[a][o] = m1->basis() ? m1->subject(static_cast<int>(o)).explin : 1.0;
        em2[a][o] = m2->basis() ? m2->subject(static_cast<int>(o)).explin : 1.0;
      }
    }

  // ---- per-row sums (parallel, serial inner loops) -----------------------------

  struct TreatedRow {
    double hw = 0.0, hl = 0.0;                  // xi sums
    std::vector<double> sumL;                   // per q
    std::vector<double> sumL_e0;                // per q: sum L e^{a0'zj}
    std::vector<Eigen::VectorXd> vecL_e0z;      // per q
    std::vector<double> sumK;                   // per q (for ipcw tau adds)
    // rE pieces (i-keyed adds)
    double w_th = 0.0;                          // win-kernel theta coefficient
    double sum_c1n_w = 0.0, sum_c1d_w = 0.0;    // win margin-1 weights (sum over j)
    double sumL2 = 0.0;                         // loss-kernel kernel mass
    double l_th = 0.0;
    double sum_m2l_0 = 0.0;                     // loss margin-2 arm-0 weight
    Eigen::VectorXd vec_m2l_0z;
    double l_exp2_0 = 0.0;                      // arm-0 exp margin-2 scalar (loss)
  };
  struct ControlRow {
    double hw = 0.0, hl = 0.0;
    std::vector<double> sumK;
    std::vector<double> sumK_e1;
    std::vector<Eigen::VectorXd> vecK_e1z;
    std::vector<double> sumL;
    double sum_c1n_l = 0.0, sum_c1d_l = 0.0;    // loss margin-1 arm-0 weights
    double sumK2 = 0.0;
    double sum_m2w_1 = 0.0;                     // win margin-2 arm-1 weight
    Eigen::VectorXd vec_m2w_1z;
    double w_exp2_1 = 0.0;
  };

  std::vector<TreatedRow> trow(n1);
  std::vector<ControlRow> crow(n0);

#pragma omp parallel for schedule(static)
  for (int it = 0; it < n1; ++it) {
    TreatedRow& row = trow[it];
    row.sumL.assign(qn, 0.0);
    row.sumL_e0.assign(qn, 0.0);
    row.vecL_e0z.assign(qn, Eigen::VectorXd::Zero(pz));
    row.sumK.assign(qn, 0.0);
    row.vec_m2l_0z = Eigen::VectorXd::Zero(pz);
    std::vector<double> win(qn), loss(qn);
    const int e_i = event_corr ? engine.evpos_[1][1][it] : -1;
    for (int jc = 0; jc < n0; ++jc) {
      engine.pair_kernels(it, jc, win.data(), loss.data());
      for (int q = 0; q < qn; ++q) {
        if (win[q] != 0.0) {
          row.hw += win[q];
          row.sumK[q] += win[q];
        }
        if (loss[q] != 0.0) {
          row.hl += loss[q];
          row.sumL[q] += loss[q];
          row.sumL_e0[q] += loss[q] * engine.explin_cens_[0][jc];
          row.vecL_e0z[q] +=
              loss[q] * engine.explin_cens_[0][jc] * engine.control(jc).covariates;
        }
      }
      if (event_corr) {
        if (win[1] != 0.0) {
          const int e = engine.evpos_[0][1][jc];
          row.w_th += win[1] * engine.re_gt_[1].cth.at(it, e);
          row.sum_c1n_w += win[1] * engine.re_gt_[1].c1n.at(it, e);
          row.sum_c1d_w += win[1] * engine.re_gt_[1].c1d.at(it, e);
        }
        if (loss[1] != 0.0) {
          row.sumL2 += loss[1];
          // arm-0 survivor (R^> at (u_j, y2_i)): margin-2 bucket is i-keyed
          const double c2 = engine.re_gt_[0].c2.at(jc, e_i);
          const double s2 = engine.s2_opp_[0].at(jc, e_i);
          if (marg2[0][1].is_step) {
            double w = -loss[1] * c2 * s2 * em2[0][jc];
            row.sum_m2l_0 += w;
            row.vec_m2l_0z += w * engine.control(jc).covariates;
          } else {
            row.l_exp2_0 += loss[1] * c2;
          }
          row.l_th += loss[1] * engine.re_gt_[0].cth.at(jc, e_i);
        }
      }
    }
  }

#pragma omp parallel for schedule(static)
  for (int jc = 0; jc < n0; ++jc) {
    ControlRow& row = crow[jc];
    row.sumK.assign(qn, 0.0);
    row.sumK_e1.assign(qn, 0.0);
    row.vecK_e1z.assign(qn, Eigen::VectorXd::Zero(pz));
    row.sumL.assign(qn, 0.0);
    row.vec_m2w_1z = Eigen::VectorXd::Zero(pz);
    std::vector<double> win(qn), loss(qn);
    const int e_j = event_corr ? engine.evpos_[0][1][jc] : -1;
    for (int it = 0; it < n1; ++it) {
      engine.pair_kernels(it, jc, win.data(), loss.data());
      for (int q = 0; q < qn; ++q) {
        if (win[q] != 0.0) {
          row.hw += win[q];
          row.sumK[q] += win[q];
          row.sumK_e1[q] += win[q] * engine.explin_cens_[1][it];
          row.vecK_e1z[q] +=
              win[q] * engine.explin_cens_[1][it] * engine.treated(it).covariates;
        }
        if (loss[q] != 0.0) {
          row.hl += loss[q];
          row.sumL[q] += loss[q];
        }
      }
      if (event_corr) {
        if (loss[1] != 0.0) {
          const int e = engine.evpos_[1][1][it];
          row.sum_c1n_l += loss[1] * engine.re_gt_[0].c1n.at(jc, e);
          row.sum_c1d_l += loss[1] * engine.re_gt_[0].c1d.at(jc, e);
        }
        if (win[1] != 0.0) {
          row.sumK2 += win[1];
          // arm-1 survivor (R^> at (u_i, y2_j)): margin-2 bucket is j-keyed
          const double c2 = engine.re_gt_[1].c2.at(it, e_j);
          const double s2 = engine.s2_opp_[1].at(it, e_j);
          if (marg2[1][0].is_step) {
            double w = -win[1] * c2 * s2 * em2[1][it];
            row.sum_m2w_1 += w;
            row.vec_m2w_1z += w * engine.treated(it).covariates;
          } else {
            row.w_exp2_1 += win[1] * c2;
          }
        }
      }
    }
  }

  // ---- serial bucket assembly (fixed index order: deterministic) ---------------

  for (int it = 0; it < n1; ++it) {
    const TreatedRow& row = trow[it];
    const RestrictedRecord& rec = engine.treated(it);
    for (int q = 0; q < qn; ++q) {
      const bool pairwise_time = (q == 0) || mipcw;
      const double tl = pairwise_time ? rec.y_tilde[q] : engine.tau_;
      if (row.sumL[q] != 0.0) {
        double a1 = row.sumL[q] * engine.explin_cens_[1][it];
        cens[1][1].step.add(a1, cens[1][1].bucket(tl), a1 * rec.covariates);
        cens[0][1].step.add(row.sumL_e0[q], cens[0][1].bucket(tl), row.vecL_e0z[q]);
      }
      // ipcw lower-level win weights sit at tau and are i-keyed through Z_i
      if (!pairwise_time && q >= 1 && row.sumK[q] != 0.0) {
        double a1 = row.sumK[q] * engine.explin_cens_[1][it];
        cens[1][0].step.add(a1, cens[1][0].bucket(engine.tau_), a1 * rec.covariates);
      }
    }
    if (!event_corr) continue;
    const auto& pre = engine.pre_[engine.treated_[it]];
    // win kernel, treated survivor: margin-1 pieces at (tau, u_i)
    if (row.sum_c1n_w != 0.0 || row.sum_c1d_w != 0.0) {
      if (marg1[1][0].is_step) {
        double anum = -row.sum_c1n_w * pre.s1_tau * em1[1][it];
        double aden = row.sum_c1d_w * pre.s1_u * em1[1][it];
        marg1[1][0].step.add(anum, marg1[1][0].bucket(engine.tau_), anum * rec.covariates);
        marg1[1][0].step.add(aden, marg1[1][0].bucket(rec.gate_u[1]), aden * rec.covariates);
      } else {
        const SurvInfluence* m1 = an[1]->margin_influences[0].get();
        marg1[1][0].coef += row.sum_c1n_w * m1->scalar_weight(engine.tau_) -
                            row.sum_c1d_w * m1->scalar_weight(rec.gate_u[1]);
      }
    }
    theta_coef[1][0] += row.w_th;
    // loss kernel, treated resolver: margin pieces at (tau, u_i) and own y2
    if (row.sumL2 != 0.0) {
      const auto& eq = engine.re_eq_[1][it];
      if (marg1[1][1].is_step) {
        double anum = -row.sumL2 * eq[0] * pre.s1_tau * em1[1][it];
        double aden = row.sumL2 * eq[1] * pre.s1_u * em1[1][it];
        marg1[1][1].step.add(anum, marg1[1][1].bucket(engine.tau_), anum * rec.covariates);
        marg1[1][1].step.add(aden, marg1[1][1].bucket(rec.gate_u[1]), aden * rec.covariates);
      } else {
        const SurvInfluence* m1 = an[1]->margin_influences[0].get();
        marg1[1][1].coef += row.sumL2 * (eq[0] * m1->scalar_weight(engine.tau_) -
                                         eq[1] * m1->scalar_weight(rec.gate_u[1]));
      }
      if (marg2[1][1].is_step) {
        double a2 = -row.sumL2 * eq[2] * engine.s2_own_[1][it] * em2[1][it];
        marg2[1][1].step.add(a2, marg2[1][1].bucket(rec.y_tilde[1]), a2 * rec.covariates);
      } else {
        const SurvInfluence* m2 = an[1]->margin_influences[1].get();
        marg2[1][1].coef += row.sumL2 * eq[2] * m2->scalar_weight(rec.y_tilde[1]);
      }
      theta_coef[1][1] += row.sumL2 * eq[3];
    }
    // loss kernel, arm-0 survivor: margin-2 bucket at treated's own y2
    if (marg2[0][1].is_step) {
      if (row.sum_m2l_0 != 0.0)
        marg2[0][1].step.add(row.sum_m2l_0, marg2[0][1].bucket(rec.y_tilde[1]),
                             row.vec_m2l_0z);
    } else if (row.l_exp2_0 != 0.0) {
      const SurvInfluence* m2 = an[0]->margin_influences[1].get();
      marg2[0][1].coef += row.l_exp2_0 * m2->scalar_weight(rec.y_tilde[1]);
    }
    theta_coef[0][1] += row.l_th;
  }

  for (int jc = 0; jc < n0; ++jc) {
    const ControlRow& row = crow[jc];
    const RestrictedRecord& rec = engine.control(jc);
    for (int q = 0; q < qn; ++q) {
      const bool pairwise_time = (q == 0) || mipcw;
      const double tw = pairwise_time ? rec.y_tilde[q] : engine.tau_;
      if (row.sumK[q] != 0.0) {
        // the ipcw tau-time arm-1 win weights are added in the treated pass
        if (pairwise_time)
          cens[1][0].step.add(row.sumK_e1[q], cens[1][0].bucket(tw),
                              row.vecK_e1z[q]);
        double a0 = row.sumK[q] * engine.explin_cens_[0][jc];
        cens[0][0].step.add(a0, cens[0][0].bucket(tw), a0 * rec.covariates);
      }
    }
    if (!event_corr) continue;
    const auto& pre = engine.pre_[engine.control_[jc]];
    // loss kernel, control survivor: margin-1 pieces at (tau, u_j)
    if (row.sum_c1n_l != 0.0 || row.sum_c1d_l != 0.0) {
      if (marg1[0][1].is_step) {
        double anum = -row.sum_c1n_l * pre.s1_tau * em1[0][jc];
        double aden = row.sum_c1d_l * pre.s1_u * em1[0][jc];
        marg1[0][1].step.add(anum, marg1[0][1].bucket(engine.tau_), anum * rec.covariates);
        marg1[0][1].step.add(aden, marg1[0][1].bucket(rec.gate_u[1]), aden * rec.covariates);
      } else {
        const SurvInfluence* m1 = an[0]->margin_influences[0].get();
        marg1[0][1].coef += row.sum_c1n_l * m1->scalar_weight(engine.tau_) -
                            row.sum_c1d_l * m1->scalar_weight(rec.gate_u[1]);
      }
    }
    // win kernel, control resolver: margin pieces at (tau, u_j) and own y2
    if (row.sumK2 != 0.0) {
      const auto& eq = engine.re_eq_[0][jc];
      if (marg1[0][0].is_step) {
        double anum = -row.sumK2 * eq[0] * pre.s1_tau * em1[0][jc];
        double aden = row.sumK2 * eq[1] * pre.s1_u * em1[0][jc];
        marg1[0][0].step.add(anum, marg1[0][0].bucket(engine.tau_), anum * rec.covariates);
        marg1[0][0].step.add(aden, marg1[0][0].bucket(rec.gate_u[1]), aden * rec.covariates);
      } else {
        const SurvInfluence* m1 = an[0]->margin_influences[0].get();
        marg1[0][0].coef += row.sumK2 * (eq[0] * m1->scalar_weight(engine.tau_) -
                                         eq[1] * m1->scalar_weight(rec.gate_u[1]));
      }
      if (marg2[0][0].is_step) {
        double a2 = -row.sumK2 * eq[2] * engine.s2_own_[0][jc] * em2[0][jc];
        marg2[0][0].step.add(a2, marg2[0][0].bucket(rec.y_tilde[1]), a2 * rec.covariates);
      } else {
        const SurvInfluence* m2 = an[0]->margin_influences[1].get();
        marg2[0][0].coef += row.sumK2 * eq[2] * m2->scalar_weight(rec.y_tilde[1]);
      }
      theta_coef[0][0] += row.sumK2 * eq[3];
    }
    // win kernel, arm-1 survivor: margin-2 bucket at control's own y2
    if (marg2[1][0].is_step) {
      if (row.sum_m2w_1 != 0.0)
        marg2[1][0].step.add(row.sum_m2w_1, marg2[1][0].bucket(rec.y_tilde[1]),
                             row.vec_m2w_1z);
    } else if (row.w_exp2_1 != 0.0) {
      const SurvInfluence* m2 = an[1]->margin_influences[1].get();
      marg2[1][0].coef += row.w_exp2_1 * m2->scalar_weight(rec.y_tilde[1]);
    }
  }

  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c) {
      cens[a][c].finalize();
      if (event_corr) {
        marg1[a][c].finalize();
        marg2[a][c].finalize();
      }
    }

  // ---- per-subject application ---------------------------------------------------

  const double inv_pairs = 1.0 / npairs;
#pragma omp parallel for schedule(static)
  for (int it = 0; it < n1; ++it) {
    const int r = engine.treated_record(it);
    rows.arm[r] = 1;
    rows.xi[r] = Eigen::Vector2d(trow[it].hw / n0, trow[it].hl / n0) - pi_hat;
    SubjectMartingale sc = an[1]->censoring_influence->subject(it);
    rows.rg[r] = inv_pairs * Eigen::Vector2d(cens[1][0].step.apply(sc),
                                             cens[1][1].step.apply(sc));
    if (event_corr) {
      const SurvInfluence* m1 = an[1]->margin_influences[0].get();
      const SurvInfluence* m2 = an[1]->margin_influences[1].get();
      SubjectMartingale s1, s2;
      if (m1->basis()) s1 = m1->subject(it);
      if (m2->basis()) s2 = m2->subject(it);
      const double kth = an[1]->copula_theta_influence.empty()
                             ? 0.0
                             : an[1]->copula_theta_influence[it];
      for (int c = 0; c < 2; ++c)
        rows.re[r][c] = inv_pairs * (marg1[1][c].apply(it, &s1) +
                                     marg2[1][c].apply(it, &s2) +
                                     theta_coef[1][c] * kth);
    }
    rows.psi[r] = rows.xi[r] + rows.rg[r] + rows.re[r];
  }
#pragma omp parallel for schedule(static)
  for (int jc = 0; jc < n0; ++jc) {
    const int r = engine.control_record(jc);
    rows.arm[r] = 0;
    rows.xi[r] = Eigen::Vector2d(crow[jc].hw / n1, crow[jc].hl / n1) - pi_hat;
    SubjectMartingale sc = an[0]->censoring_influence->subject(jc);
    rows.rg[r] = inv_pairs * Eigen::Vector2d(cens[0][0].step.apply(sc),
                                             cens[0][1].step.apply(sc));
    if (event_corr) {
      const SurvInfluence* m1 = an[0]->margin_influences[0].get();
      const SurvInfluence* m2 = an[0]->margin_influences[1].get();
      SubjectMartingale s1, s2;
      if (m1->basis()) s1 = m1->subject(jc);
      if (m2->basis()) s2 = m2->subject(jc);
      const double kth = an[0]->copula_theta_influence.empty()
                             ? 0.0
                             : an[0]->copula_theta_influence[jc];
      for (int c = 0; c < 2; ++c)
        rows.re[r][c] = inv_pairs * (marg1[0][c].apply(jc, &s1) +
                                     marg2[0][c].apply(jc, &s2) +
                                     theta_coef[0][c] * kth);
    }
    rows.psi[r] = rows.xi[r] + rows.rg[r] + rows.re[r];
  }
  return rows;
}

InfluenceRows influence_rows(const std::vector<RestrictedRecord>& records,
                             double tau, Method method,
                             const NuisanceBundle& bundle,
                             const WinComponents& components) {
  PairwiseEngine engine(records, tau, method, bundle, /*with_influence=*/true);
  return influence_rows(engine, components);
}

std::vector<Eigen::Vector2d> hoeffding_rows(const std::vector<RestrictedRecord>& records,
                                            double tau, Method method,
                                            const NuisanceBundle& bundle,
                                            const WinComponents& components) {
  return influence_rows(records, tau, method, bundle, components).xi;
}

std::vector<Eigen::Vector2d> censoring_correction_rows(
    const std::vector<RestrictedRecord>& records, double tau, Method method,
    const NuisanceBundle& bundle, const WinComponents& components) {
  return influence_rows(records, tau, method, bundle, components).rg;
}

std::vector<Eigen::Vector2d> event_correction_rows(
    const std::vector<RestrictedRecord>& records, double tau,
    const NuisanceBundle& bundle, const WinComponents& components) {
  if (!records.empty() && records[0].q_count() > 2)
    throw std::invalid_argument(
        "event-model correction is implemented for two components; hierarchies "
        "beyond Q=2 are an open extension");
  return influence_rows(records, tau, Method::m_ipcw, bundle, components).re;
}

SandwichResult sandwich(const InfluenceRows& rows, const WinComponents& components) {
  const double n1 = rows.n1, n0 = rows.n0;
  if (n1 <= 0 || n0 <= 0) throw std::invalid_argument("sandwich: empty arm");
  const double n = n1 + n0;
  Eigen::Matrix2d omega1 = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d omega0 = Eigen::Matrix2d::Zero();
  for (size_t r = 0; r < rows.psi.size(); ++r) {
    const Eigen::Matrix2d outer = rows.psi[r] * rows.psi[r].transpose();
    if (rows.arm[r] == 1) omega1 += outer; else omega0 += outer;
  }
  SandwichResult out;
  out.omega = (n / (n1 * n1)) * omega1 + (n / (n0 * n0)) * omega0;

  const Eigen::Vector2d g_nb(1.0, -1.0);
  out.se_nb = std::sqrt(std::max(0.0, g_nb.dot(out.omega * g_nb) / n));
  if (components.pi_t > 0.0 && components.pi_c > 0.0) {
    const Eigen::Vector2d g_wr(1.0 / components.pi_t, -1.0 / components.pi_c);
    out.se_logwr = std::sqrt(std::max(0.0, g_wr.dot(out.omega * g_wr) / n));
  } else {
    out.se_logwr = std::numeric_limits<double>::quiet_NaN();
  }
  const double nb = components.pi_t - components.pi_c;
  if (std::fabs(nb) < 1.0) {
    const Eigen::Vector2d g_wo = 2.0 / (1.0 - nb * nb) * Eigen::Vector2d(1.0, -1.0);
    out.se_logwo = std::sqrt(std::max(0.0, g_wo.dot(out.omega * g_wo) / n));
  } else {
    out.se_logwo = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p in (0,1)");
  // Acklam's rational approximation, |relative error| < 1.2e-9
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > phigh) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

ConfidenceIntervals delta_ci(const WinComponents& components,
                             const SandwichResult& sw, double conf_level) {
  if (!(conf_level > 0.0 && conf_level < 1.0))
    throw std::invalid_argument("delta_ci: conf_level in (0,1)");
  WinSummary s = summarize(components);
  const double z = normal_quantile(0.5 + conf_level / 2.0);
  ConfidenceIntervals ci;
  ci.conf_level = conf_level;
  ci.nb_lo = s.nb - z * sw.se_nb;
  ci.nb_hi = s.nb + z * sw.se_nb;
  ci.wr_lo = std::exp(std::log(s.wr) - z * sw.se_logwr);
  ci.wr_hi = std::exp(std::log(s.wr) + z * sw.se_logwr);
  ci.wo_lo = std::exp(std::log(s.wo) - z * sw.se_logwo);
  ci.wo_hi = std::exp(std::log(s.wo) + z * sw.se_logwo);
  return ci;
}

AnalysisResult analyze(const std::vector<RestrictedRecord>& records, double tau,
                       Method method, const NuisanceBundle& bundle,
                       double conf_level) {
  PairwiseEngine engine(records, tau, method, bundle, /*with_influence=*/true);
  AnalysisResult out;
  out.components = estimate(engine);
  out.summary = summarize(out.components);
  InfluenceRows rows = influence_rows(engine, out.components);
  out.sw = sandwich(rows, out.components);
  out.ci = delta_ci(out.components, out.sw, conf_level);
  return out;
}

}  // namespace winres
