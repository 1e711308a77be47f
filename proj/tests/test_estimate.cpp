#include <doctest.h>

#include <cmath>
#include <random>

#include "winres/estimate.hpp"
#include "winres/reference.hpp"
#include "winres/variance.hpp"
#include "winres/simulation.hpp"
#include "test_support.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace winres;
using namespace winres::testing;

TEST_CASE("two-per-arm fully observed pairs match hand enumeration") {
  const double tau = 12.0;
  std::vector<RestrictedRecord> recs = {
      record(1, {12, 8}, {0, 1}, tau, 100.0),   // treated A: tied on death, NF at 8
      record(1, {5, 12}, {1, 0}, tau, 100.0),   // treated B: death at 5
      record(0, {12, 3}, {0, 1}, tau, 100.0),   // control C: NF at 3
      record(0, {9, 12}, {1, 0}, tau, 100.0)};  // control D: death at 9
  NuisanceBundle bundle;
  set_trivial_censoring(bundle, recs);
  WinComponents c = estimate(recs, tau, Method::raw, bundle);
  // pairs: (A,C): death tied, 8 > 3 -> q2 win. (A,D): A outlives D on death -> q1 win.
  // (B,C): B dies at 5, C death-free -> q1 loss. (B,D): 5 < 9 -> q1 loss.
  CHECK(c.pi_tq[0] == doctest::Approx(0.25));
  CHECK(c.pi_tq[1] == doctest::Approx(0.25));
  CHECK(c.pi_cq[0] == doctest::Approx(0.5));
  CHECK(c.pi_cq[1] == doctest::Approx(0.0));
  CHECK(c.pi_t == doctest::Approx(0.5));
  CHECK(c.pi_c == doctest::Approx(0.5));
  CHECK(c.pi_u == doctest::Approx(0.0));
  // uncensored data: ipcw matches raw exactly
  WinComponents ci = estimate(recs, tau, Method::ipcw, bundle);
  CHECK(ci.pi_t == doctest::Approx(c.pi_t).epsilon(1e-15));
  CHECK(ci.pi_c == doctest::Approx(c.pi_c).epsilon(1e-15));
}

TEST_CASE("summaries and the win-odds identity") {
  WinComponents c;
  c.pi_tq = {0.2, 0.1};
  c.pi_cq = {0.15, 0.05};
  c.pi_t = 0.3;
  c.pi_c = 0.2;
  c.pi_u = 0.5;
  WinSummary s = summarize(c);
  CHECK(s.nb == doctest::Approx(0.1));
  CHECK(s.wr == doctest::Approx(1.5));
  CHECK(s.wo == doctest::Approx(1.1 / 0.9).epsilon(1e-14));
  CHECK(s.wo == doctest::Approx((c.pi_t + c.pi_u / 2) / (c.pi_c + c.pi_u / 2)).epsilon(1e-14));

  WinComponents eq = c;
  eq.pi_t = eq.pi_c = 0.25;
  WinSummary se = summarize(eq);
  CHECK(se.nb == 0.0);
  CHECK(se.wr == 1.0);
  CHECK(se.wo == 1.0);

  WinComponents bad = c;
  bad.pi_c = 0.0;
  CHECK_THROWS_AS(summarize(bad), std::domain_error);
  WinComponents bad2 = c;
  bad2.pi_t = 1.2;
  bad2.pi_c = 0.1;
  CHECK_THROWS_AS(summarize(bad2), std::domain_error);
}

TEST_CASE("per-pair q = 1 kernels are identical between ipcw and m-ipcw") {
  auto recs = sim_records(40, 24.0, 0.4, 11);
  NuisanceOptions opt;
  opt.copula = CopulaFamily::gumbel;
  NuisanceBundle bundle = fit_nuisances(recs, 24.0, opt);
  PairwiseEngine e1(recs, 24.0, Method::ipcw, bundle);
  PairwiseEngine e2(recs, 24.0, Method::m_ipcw, bundle);
  std::vector<double> w1(2), l1(2), w2(2), l2(2);
  for (int it = 0; it < e1.n1(); ++it)
    for (int jc = 0; jc < e1.n0(); ++jc) {
      e1.pair_kernels(it, jc, w1.data(), l1.data());
      e2.pair_kernels(it, jc, w2.data(), l2.data());
      CHECK(w1[0] == w2[0]);  // bit-for-bit
      CHECK(l1[0] == l2[0]);
    }
}

TEST_CASE("no-censoring collapse across all three methods") {
  auto recs = sim_records(60, 12.0, 0.2, 5);
  // force complete follow-up by construction: regenerate with huge censoring times
  for (auto& r : recs) {
    r.censor_status = 0;
    r.censor_time = 12.0;
    for (int q = 0; q < r.q_count(); ++q)
      if (!r.delta[q]) r.y_tilde[q] = 12.0;
    r.gate_u = {12.0, r.bar_delta[1] ? 12.0 : 12.0};
  }
  NuisanceOptions opt;
  opt.copula = CopulaFamily::gumbel;
  NuisanceBundle bundle = fit_nuisances(recs, 12.0, opt);
  WinComponents a = estimate(recs, 12.0, Method::ipcw, bundle);
  WinComponents b = estimate(recs, 12.0, Method::m_ipcw, bundle);
  WinComponents c = estimate(recs, 12.0, Method::raw, bundle);
  CHECK(std::fabs(a.pi_t - b.pi_t) <= 1e-12);
  CHECK(std::fabs(a.pi_t - c.pi_t) <= 1e-12);
  CHECK(std::fabs(a.pi_c - b.pi_c) <= 1e-12);
  CHECK(std::fabs(a.pi_c - c.pi_c) <= 1e-12);
  CHECK(a.pi_t + a.pi_c + a.pi_u == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("gate exclusivity: one nonzero component per pair, no win-loss overlap") {
  auto recs = sim_records(50, 36.0, 0.0001, 17);
  NuisanceBundle bundle;
  set_trivial_censoring(bundle, recs);
  PairwiseEngine eng(recs, 36.0, Method::raw, bundle);
  std::vector<double> w(2), l(2);
  for (int it = 0; it < eng.n1(); ++it)
    for (int jc = 0; jc < eng.n0(); ++jc) {
      eng.pair_kernels(it, jc, w.data(), l.data());
      int nonzero = 0;
      for (int q = 0; q < 2; ++q) {
        if (w[q] != 0.0) ++nonzero;
        if (l[q] != 0.0) ++nonzero;
        CHECK(w[q] * l[q] == 0.0);
      }
      CHECK(nonzero <= 1);
    }
}

TEST_CASE("conditional tie ratios: u = tau gives exactly one") {
  auto recs = sim_records(120, 24.0, 0.4, 23);
  NuisanceOptions opt;
  opt.copula = CopulaFamily::gumbel;
  NuisanceBundle bundle = fit_nuisances(recs, 24.0, opt);
  Eigen::VectorXd z(3);
  z << 1.0, 0.4, 0.0;
  for (double t : {0.0, 5.0, 24.0}) {
    CHECK(ratio_gt(bundle, 24.0, 1, 1, 24.0, t, z) == 1.0);
    CHECK(ratio_eq(bundle, 24.0, 0, 1, 24.0, t, z) == 1.0);
  }
}

TEST_CASE("independence copula reduces both ratios to the margin-1 conditional") {
  auto recs = sim_records(120, 24.0, 0.4, 29);
  NuisanceOptions opt;
  opt.censor = CensorKind::km;
  opt.copula = CopulaFamily::independence;
  NuisanceBundle bundle = fit_nuisances(recs, 24.0, opt);
  Eigen::VectorXd z(3);
  z << 0.0, 0.8, 1.0;
  const double u = 10.0, t = 4.0, tau = 24.0, eps = bundle.eps;
  double s_tau = std::clamp(bundle.arm[1].margins[0]->survival(tau, z), eps, 1 - eps);
  double s_u = std::clamp(bundle.arm[1].margins[0]->survival(u, z), eps, 1 - eps);
  CHECK(ratio_gt(bundle, tau, 1, 1, u, t, z) ==
        doctest::Approx(s_tau / s_u).epsilon(1e-12));
  CHECK(ratio_eq(bundle, tau, 1, 1, u, t, z) ==
        doctest::Approx(s_tau / s_u).epsilon(1e-12));
}

TEST_CASE("ratio against a Monte Carlo conditional probability (frailty oracle)") {
  // gumbel theta = 2, exponential margins S1 = e^{-0.05 s}, S2 = e^{-0.1 s}
  NuisanceBundle bundle;
  bundle.eps = 1e-6;
  for (int a = 0; a < 2; ++a) {
    ExpFit f1{0.05, 0.0, 0};
    ExpFit f2{0.10, 0.0, 0};
    bundle.arm[a].margins = {std::make_shared<ExponentialMargin>(f1),
                             std::make_shared<ExponentialMargin>(f2)};
    bundle.arm[a].copula = CopulaSpec::make(CopulaFamily::gumbel, 2.0);
  }
  const double tau = 12.0, u = 6.0, t = 3.0;
  Eigen::VectorXd z;
  double r = ratio_gt(bundle, tau, 1, 1, u, t, z);
  std::mt19937_64 rng(99);
  CopulaSpec spec{CopulaFamily::gumbel, 2.0};
  long num = 0, den = 0;
  for (int i = 0; i < 1000000; ++i) {
    auto v = sample_copula(spec, 2, rng);
    double t1 = -std::log(v[0]) / 0.05;
    double t2 = -std::log(v[1]) / 0.10;
    if (t1 > u && t2 > t) {
      ++den;
      if (t1 > tau) ++num;
    }
  }
  double mc = static_cast<double>(num) / den;
  double se = std::sqrt(mc * (1.0 - mc) / den);
  CHECK(std::fabs(r - mc) <= 3.0 * se);
}

TEST_CASE("figure-1 scenario: censored higher-priority tie keeps a fractional win") {
  const double tau = 12.0;
  // control hospitalized at 3, censored at 7; treated fully observed, no events
  std::vector<RestrictedRecord> recs = {
      record(1, {12, 12}, {0, 0}, tau, 100.0, {0.0, 0.5, 0.0}),
      record(1, {12, 10}, {0, 1}, tau, 100.0, {1.0, 0.5, 0.0}),
      record(0, {7, 3}, {0, 1}, tau, 7.0, {0.0, 0.5, 1.0}),
      record(0, {12, 12}, {0, 0}, tau, 100.0, {1.0, 0.2, 0.0})};
  NuisanceOptions opt;
  opt.censor = CensorKind::km;
  opt.margin = MarginKind::exponential;  // four subjects cannot support Cox margins
  opt.copula = CopulaFamily::independence;
  NuisanceBundle bundle = fit_nuisances(recs, tau, opt);
  PairwiseEngine ipcw(recs, tau, Method::ipcw, bundle);
  PairwiseEngine mipcw(recs, tau, Method::m_ipcw, bundle);
  std::vector<double> w(2), l(2);
  // pair (treated 0, control 0): treated event-free through tau, control
  // resolves hospitalization at 3 but the death tie is censoring-induced
  ipcw.pair_kernels(0, 0, w.data(), l.data());
  CHECK(w[1] == 0.0);
  CHECK(l[1] == 0.0);
  mipcw.pair_kernels(0, 0, w.data(), l.data());
  CHECK(w[1] > 0.0);
}

TEST_CASE("flat higher-priority margin reduces m-ipcw to re-timed ipcw weights") {
  const double tau = 12.0;
  std::vector<RestrictedRecord> recs = {
      record(1, {12, 9}, {0, 1}, tau, 100.0),
      record(1, {10, 10}, {0, 0}, tau, 10.0),
      record(0, {7, 3}, {0, 1}, tau, 7.0),
      record(0, {12, 12}, {0, 0}, tau, 100.0)};
  NuisanceBundle bundle;
  set_trivial_censoring(bundle, recs);  // keep G from the data (here G == 1)
  for (int a = 0; a < 2; ++a) {
    bundle.arm[a].margins = {std::make_shared<FlatMargin>(),
                             std::make_shared<FlatMargin>()};
    bundle.arm[a].copula = CopulaSpec::independence();
  }
  PairwiseEngine eng(recs, tau, Method::m_ipcw, bundle);
  std::vector<double> w(2), l(2);
  // with S1 == 1 both tie ratios are exactly 1, so the q=2 win term equals the
  // plain indicator with weights at the resolving time (G == 1 here)
  eng.pair_kernels(0, 0, w.data(), l.data());
  CHECK(w[1] == 1.0);
}

TEST_CASE("engine matches the serial reference implementation") {
  auto recs = sim_records(60, 24.0, 0.4, 31);
  NuisanceOptions opt;
  opt.copula = CopulaFamily::gumbel;
  NuisanceBundle bundle = fit_nuisances(recs, 24.0, opt);
  for (Method m : {Method::ipcw, Method::m_ipcw, Method::raw}) {
    WinComponents fast = estimate(recs, 24.0, m, bundle);
    WinComponents ref = reference::estimate(recs, 24.0, m, bundle);
    for (int q = 0; q < 2; ++q) {
      CHECK(fast.pi_tq[q] == doctest::Approx(ref.pi_tq[q]).epsilon(1e-12));
      CHECK(fast.pi_cq[q] == doctest::Approx(ref.pi_cq[q]).epsilon(1e-12));
    }
  }
}

TEST_CASE("results are bit-identical across thread counts") {
#ifdef _OPENMP
  auto recs = sim_records(50, 24.0, 0.4, 37);
  NuisanceOptions opt;
  opt.copula = CopulaFamily::gumbel;
  NuisanceBundle bundle = fit_nuisances(recs, 24.0, opt);
  std::vector<double> pit, pic, se;
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    AnalysisResult res = analyze(recs, 24.0, Method::m_ipcw, bundle, 0.95);
    pit.push_back(res.components.pi_t);
    pic.push_back(res.components.pi_c);
    se.push_back(res.sw.se_nb);
  }
  omp_set_num_threads(1);
  CHECK(pit[0] == pit[1]);
  CHECK(pit[0] == pit[2]);
  CHECK(pic[0] == pic[2]);
  CHECK(se[0] == se[1]);
  CHECK(se[0] == se[2]);
#endif
}

TEST_CASE("pi decomposition sums exactly and empty arms are rejected") {
  auto recs = sim_records(40, 24.0, 0.4, 41);
  NuisanceOptions opt;
  opt.event_model = false;
  NuisanceBundle bundle = fit_nuisances(recs, 24.0, opt);
  WinComponents c = estimate(recs, 24.0, Method::ipcw, bundle);
  CHECK(c.pi_t == c.pi_tq[0] + c.pi_tq[1]);
  CHECK(c.pi_c == c.pi_cq[0] + c.pi_cq[1]);

  std::vector<RestrictedRecord> one_arm(recs.begin(), recs.begin() + 3);
  for (auto& r : one_arm) r.arm = 1;
  CHECK_THROWS_AS(estimate(one_arm, 24.0, Method::ipcw, bundle), std::invalid_argument);
}

TEST_CASE("three-component hierarchies estimate end to end") {
  ScenarioConfig cfg = ScenarioConfig::defaults();
  WeibullComponent third;
  third.rho = 1.1;
  third.lambda0 = 0.03;
  third.beta = Eigen::Vector3d(0.2, 0.4, 0.1);
  third.beta_arm = -0.25;
  cfg.components.push_back(third);
  cfg.n_per_arm = 120;
  cfg.dgp_copula = CopulaSpec::make(CopulaFamily::gumbel, 1.5);
  cfg.seed = 83;
  cfg.censor_lambda = 0.004;
  std::mt19937_64 rng = substream(cfg.seed, 1);
  auto records = restrict_records(gen_dataset(rng, cfg), 24.0, {1, 2, 3});
  REQUIRE(records[0].q_count() == 3);

  NuisanceOptions opt;
  opt.censor = CensorKind::km;
  opt.copula = CopulaFamily::gumbel;
  NuisanceBundle bundle = fit_nuisances(records, 24.0, opt);
  WinComponents mipcw = estimate(records, 24.0, Method::m_ipcw, bundle);
  WinComponents ipcw = estimate(records, 24.0, Method::ipcw, bundle);
  CHECK(mipcw.pi_tq.size() == 3);
  CHECK(mipcw.pi_t == doctest::Approx(mipcw.pi_tq[0] + mipcw.pi_tq[1] + mipcw.pi_tq[2]));
  // the first-priority component is method-invariant
  CHECK(mipcw.pi_tq[0] == ipcw.pi_tq[0]);
  CHECK(mipcw.pi_cq[0] == ipcw.pi_cq[0]);
  // conditional tie weighting recovers censored lower-priority comparisons
  CHECK(mipcw.pi_tq[2] >= ipcw.pi_tq[2]);
  // serial reference agrees on the generic prefix path
  WinComponents ref = reference::estimate(records, 24.0, Method::m_ipcw, bundle);
  for (int q = 0; q < 3; ++q)
    CHECK(mipcw.pi_tq[q] == doctest::Approx(ref.pi_tq[q]).epsilon(1e-12));
}

TEST_CASE("uncensored q = 1 kernel is the plain indicator pair") {
  const double tau = 12.0;
  std::vector<RestrictedRecord> recs = {record(1, {8, 12}, {1, 0}, tau, 100.0),
                                        record(0, {5, 12}, {1, 0}, tau, 100.0)};
  NuisanceBundle bundle;
  set_trivial_censoring(bundle, recs);  // G identically one
  PairwiseEngine eng(recs, tau, Method::ipcw, bundle);
  std::vector<double> w(2), l(2);
  eng.pair_kernels(0, 0, w.data(), l.data());
  CHECK(w[0] == 1.0);
  CHECK(l[0] == 0.0);
  CHECK(w[1] == 0.0);
  CHECK(l[1] == 0.0);
}

TEST_CASE("truncation constant is wired through the bundle") {
  auto recs = sim_records(80, 24.0, 0.4, 97);
  NuisanceOptions tight, loose;
  tight.censor = loose.censor = CensorKind::km;
  tight.copula = loose.copula = CopulaFamily::gumbel;
  tight.eps = 1e-6;
  loose.eps = 0.01;  // the tutorial-scale truncation
  NuisanceBundle b1 = fit_nuisances(recs, 24.0, tight);
  NuisanceBundle b2 = fit_nuisances(recs, 24.0, loose);
  CHECK(b1.eps == 1e-6);
  CHECK(b2.eps == 0.01);
  WinComponents c1 = estimate(recs, 24.0, Method::m_ipcw, b1);
  WinComponents c2 = estimate(recs, 24.0, Method::m_ipcw, b2);
  // a 1% truncation floor visibly perturbs the copula inputs
  CHECK(c1.pi_t != c2.pi_t);
  CHECK(std::fabs(c1.pi_t - c2.pi_t) < 0.05);
}

TEST_CASE("covariate-free data run through the null-model path") {
  auto recs = sim_records(40, 24.0, 0.4, 101);
  for (auto& r : recs) r.covariates = Eigen::VectorXd();
  NuisanceOptions opt;
  opt.censor = CensorKind::cox;  // degenerates to the null model
  opt.copula = CopulaFamily::gumbel;
  NuisanceBundle bundle = fit_nuisances(recs, 24.0, opt);
  AnalysisResult res = analyze(recs, 24.0, Method::m_ipcw, bundle, 0.95);
  CHECK(std::isfinite(res.summary.nb));
  CHECK(res.sw.se_nb > 0.0);
}
