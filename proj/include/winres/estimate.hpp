#pragma once

#include <Eigen/Core>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "winres/nuisance.hpp"
#include "winres/records.hpp"

namespace winres {

enum class Method { ipcw, m_ipcw, raw };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct WinComponents {
  Method method = Method::ipcw;
  double tau = 0.0;
  std::vector<double> pi_tq;  // treated-win probability by component
  std::vector<double> pi_cq;  // control-win probability by component
  double pi_t = 0.0;
  double pi_c = 0.0;
  double pi_u = 0.0;          // 1 - pi_t - pi_c
  long floored_denominators = 0;  // pairs whose IPCW denominator hit the eps^2 floor
};

struct WinSummary {
  double nb = 0.0;
  double wr = 0.0;
  double wo = 0.0;
};

struct PositivityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Conditional tie ratios R^>_{q,a}(u,t|z) and R^=_{q,a}(u,t|z), clamped to
// [0,1]. q is the zero-based priority level (q >= 1 has higher-priority gates).
double ratio_gt(const NuisanceBundle& bundle, double tau, int arm, int q, double u,
                double t, const Eigen::VectorXd& z);
double ratio_eq(const NuisanceBundle& bundle, double tau, int arm, int q, double u,
                double t, const Eigen::VectorXd& z);

struct InfluenceRows;
class PairwiseEngine;
InfluenceRows influence_rows(const PairwiseEngine& engine,
                             const WinComponents& components);

// Pairwise kernel engine shared by estimation and influence assembly. All
// per-subject and per-(subject, opposite event time) quantities are cached at
// construction, so the n1 x n0 sweeps reduce to table lookups.
class PairwiseEngine {
 public:
  PairwiseEngine(const std::vector<RestrictedRecord>& records, double tau,
                 Method method, const NuisanceBundle& bundle,
                 bool with_influence = false);

  int n1() const { return static_cast<int>(treated_.size()); }
  int n0() const { return static_cast<int>(control_.size()); }
  int q_count() const { return q_count_; }
  int treated_record(int it) const { return treated_[it]; }
  int control_record(int jc) const { return control_[jc]; }
  const RestrictedRecord& treated(int it) const { return (*records_)[treated_[it]]; }
  const RestrictedRecord& control(int jc) const { return (*records_)[control_[jc]]; }
  double tau() const { return tau_; }
  Method method() const { return method_; }
  const NuisanceBundle& bundle() const { return *bundle_; }

  // component-wise kernels for one pair; returns the floored-denominator count
  int pair_kernels(int it, int jc, double* win, double* loss) const;

  // censoring-weight evaluation times t^W, t^L per component for the pair
  void weight_times(int it, int jc, double* tw, double* tl) const;

  // row sweep for estimation: adds the pair kernels over the opposite arm
  // (serial, fixed order); row has layout [win_0..win_{Q-1}, loss_0..]
  long estimate_row_treated(int it, double* row) const;

  bool with_influence() const { return with_influence_; }
  // event-model correction is assembled for two-component hierarchies only
  bool event_correction_supported() const {
    return method_ != Method::m_ipcw || q_count_ <= 2;
  }

 private:
  // per-subject margin caches: bivariate closed-form path for Q = 2,
  // generator-sum path otherwise
  struct Pre {
    double s1_tau = 1.0, s1_u = 1.0;
    std::vector<double> phi_tau, phi_u;
  };
  void build_subject_caches();
  void build_influence_caches();
  double margin_survival(int arm, int q, double t, const Eigen::VectorXd& z) const;
  double tie_ratio(int arm, int rec_idx, int q, double s_qt, bool eq) const;

  const std::vector<RestrictedRecord>* records_;
  const NuisanceBundle* bundle_;
  double tau_;
  Method method_;
  bool with_influence_ = false;
  int q_count_ = 0;
  std::vector<int> treated_, control_;
  std::vector<int> arm_ordinal_;  // record index -> within-arm ordinal

  // event lists per component: within-arm ordinals with delta_q = 1, and the
  // inverse map ordinal -> event position (-1 if censored)
  std::vector<std::vector<int>> ev_[2];
  std::vector<std::vector<int>> evpos_[2];

  // caches indexed [q][subject ordinal][event position of opposite arm]
  struct Table {
    std::vector<double> data;
    int cols = 0;
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  };
  std::vector<Table> g_opp_[2];     // censoring survival at opposite event times
  std::vector<Table> rgt_opp_[2];   // R^> at opposite event times (m-ipcw, q>=1)

  // per-subject constants, indexed [q][ordinal]
  std::vector<std::vector<double>> g_own_[2];       // G_a(y_q | z) at own event
  std::vector<std::vector<double>> req_own_[2];     // R^= at own event time
  std::vector<double> g_tau_[2];                    // G_a(tau | z)
  std::vector<double> explin_cens_[2];              // e^{alpha'z} of the censoring fit

  // event-model correction caches (m-ipcw, Q == 2): truncated margin-2 values
  // and copula partial-derivative ratios at num = (S1(tau|z), S2(t|z)) and
  // den = (S1(u|z), S2(t|z)); survivor role has t at the opposite arm's event
  // times, resolver role at the subject's own event time
  struct ReCoef {
    Table c1n, c1d, c2, cth;
  };
  ReCoef re_gt_[2];                               // survivor role (R^> path)
  std::vector<std::array<double, 4>> re_eq_[2];   // resolver role (R^= path)
  Table s2_opp_[2];
  std::vector<double> s2_own_[2];

  // m-ipcw per-subject margin values (Q = 2 fast path) and generator sums
  std::vector<Pre> pre_;
  bool bivariate_ = false;

  friend InfluenceRows influence_rows(const PairwiseEngine&, const WinComponents&);
};

// Point estimation: mean of the pairwise kernels over all n1 x n0 pairs.
// OpenMP-parallel over treated subjects with a fixed-topology reduction, so
// results are identical for any thread count.
WinComponents estimate(const PairwiseEngine& engine);
WinComponents estimate(const std::vector<RestrictedRecord>& records, double tau,
                       Method method, const NuisanceBundle& bundle);

WinSummary summarize(const WinComponents& components);

// deterministic pairwise tree sum in index order
double tree_sum(const double* xs, int n);

}  // namespace winres
