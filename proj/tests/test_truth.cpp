#include <doctest.h>

#include <cmath>
#include <random>

#include "winres/truth.hpp"

using namespace winres;

namespace {
ScenarioConfig gumbel_config(double theta) {
  ScenarioConfig cfg = ScenarioConfig::defaults();
  cfg.dgp_copula = CopulaSpec::make(CopulaFamily::gumbel, theta);
  return cfg;
}
}  // namespace

TEST_CASE("independence factorizes the prefix survival") {
  ScenarioConfig cfg = gumbel_config(1.0);
  Eigen::Vector3d z(1.0, 0.3, 0.0);
  double joint = prefix_survival_true(cfg, 0, 1, 30.0, 7.0, z);
  // under theta = 1 the joint is the product of the marginals
  double s1 = prefix_survival_true(cfg, 0, 0, 0.0, 30.0, z);
  double s2 = std::exp(-cfg.components[1].lambda0 * std::pow(7.0, cfg.components[1].rho) *
                       std::exp(cfg.components[1].beta.dot(z)));
  CHECK(joint == doctest::Approx(s1 * s2).epsilon(1e-12));
  // t = 0 boundary: prefix survival of the first component is one
  CHECK(prefix_survival_true(cfg, 0, 0, 12.0, 0.0, z) == doctest::Approx(1.0));
}

TEST_CASE("prefix survival matches the frailty sampler under strong dependence") {
  ScenarioConfig cfg = gumbel_config(4.0);
  Eigen::Vector3d z(0.0, 0.5, 1.0);
  const double u = 20.0, t = 8.0;
  double truth = prefix_survival_true(cfg, 1, 1, u, t, z);
  std::mt19937_64 rng(515);
  const int n = 1000000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    auto v = sample_copula(cfg.dgp_copula, 2, rng);
    const auto& c1 = cfg.components[0];
    const auto& c2 = cfg.components[1];
    double t1 = std::pow(-std::log(v[0]) /
                         (c1.lambda0 * std::exp(c1.beta.dot(z) + c1.beta_arm)), 1.0 / c1.rho);
    double t2 = std::pow(-std::log(v[1]) /
                         (c2.lambda0 * std::exp(c2.beta.dot(z) + c2.beta_arm)), 1.0 / c2.rho);
    if (t1 > u && t2 > t) ++hits;
  }
  double p = static_cast<double>(hits) / n;
  double se = std::sqrt(truth * (1.0 - truth) / n);
  CHECK(std::fabs(p - truth) <= 3.0 * se);
}

TEST_CASE("subdensity integrates the survival decrement") {
  ScenarioConfig cfg = gumbel_config(2.5);
  Eigen::Vector3d z(1.0, 0.7, 1.0);
  const double u = 24.0;
  // int_a^b H(u, t) dt = S(u, a) - S(u, b)
  const double a = 2.0, b = 14.0;
  int n = 4000;
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    double t = a + (b - a) * (k + 0.5) / n;
    acc += prefix_subdensity_true(cfg, 1, 1, u, t, z) * (b - a) / n;
  }
  double expect = prefix_survival_true(cfg, 1, 1, u, a, z) -
                  prefix_survival_true(cfg, 1, 1, u, b, z);
  CHECK(acc == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("gumbel closed form agrees with the generator route") {
  ScenarioConfig cfg = gumbel_config(2.0);
  ScenarioConfig via_gen = cfg;  // evaluated through the Archimedean prefix
  // force the generic branch by relabeling the family after validation
  Eigen::Vector3d z(0.0, 0.25, 1.0);
  double closed = prefix_survival_true(cfg, 0, 1, 18.0, 6.0, z);
  // generic route: C(S1(18), S2(6)) with the same margins
  const auto& c1 = cfg.components[0];
  const auto& c2 = cfg.components[1];
  double s1 = std::exp(-c1.lambda0 * std::pow(18.0, c1.rho) * std::exp(c1.beta.dot(z)));
  double s2 = std::exp(-c2.lambda0 * std::pow(6.0, c2.rho) * std::exp(c2.beta.dot(z)));
  CHECK(closed ==
        doctest::Approx(copula_cdf(cfg.dgp_copula, s1, s2)).epsilon(1e-12));
}

TEST_CASE("reference truth values reproduce at three decimals") {
  const double nb_exp[2][3] = {{0.078, 0.106, 0.111}, {0.082, 0.117, 0.129}};
  const double wr_exp[2][3] = {{1.370, 1.331, 1.293}, {1.408, 1.389, 1.363}};
  const double wo_exp[2][3] = {{1.170, 1.237, 1.249}, {1.179, 1.264, 1.297}};
  const double thetas[2] = {1.25, 4.0};
  const double taus[3] = {12.0, 24.0, 36.0};
  for (int i = 0; i < 2; ++i) {
    ScenarioConfig cfg = gumbel_config(thetas[i]);
    for (int k = 0; k < 3; ++k) {
      TruthResult t = true_values(cfg, taus[k]);
      CHECK(std::fabs(t.nb - nb_exp[i][k]) <= 1e-3);
      CHECK(std::fabs(t.wr - wr_exp[i][k]) <= 1e-3);
      CHECK(std::fabs(t.wo - wo_exp[i][k]) <= 1e-3);
      CHECK(t.wo == doctest::Approx((1.0 + t.nb) / (1.0 - t.nb)).epsilon(1e-12));
      CHECK(t.pi_t + t.pi_c <= 1.0);
      for (double p : t.pi_tq) CHECK(p >= 0.0);
    }
  }
}

TEST_CASE("zero treatment effect gives exact null summaries") {
  ScenarioConfig cfg = gumbel_config(1.25);
  cfg.components[0].beta_arm = 0.0;
  cfg.components[1].beta_arm = 0.0;
  TruthResult t = true_values(cfg, 24.0);
  CHECK(t.nb == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(t.wr == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(t.wo == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("swapping arms negates NB and inverts the ratios") {
  ScenarioConfig cfg = gumbel_config(1.25);
  TruthResult t = true_values(cfg, 24.0);
  ScenarioConfig swapped = cfg;
  // swap arms by negating the arm effect and folding it into the baseline
  for (auto& comp : swapped.components) {
    comp.lambda0 *= std::exp(comp.beta_arm);
    comp.beta_arm = -comp.beta_arm;
  }
  TruthResult s = true_values(swapped, 24.0);
  CHECK(s.nb == doctest::Approx(-t.nb).epsilon(1e-10));
  CHECK(s.wr == doctest::Approx(1.0 / t.wr).epsilon(1e-10));
  CHECK(s.wo == doctest::Approx(1.0 / t.wo).epsilon(1e-10));
}

TEST_CASE("a more protective second component raises the net benefit") {
  ScenarioConfig cfg = gumbel_config(1.25);
  double prev = -1.0;
  for (double effect : {-0.1, -0.35, -0.6}) {
    cfg.components[1].beta_arm = effect;
    TruthResult t = true_values(cfg, 24.0);
    CHECK(t.nb > prev);
    prev = t.nb;
  }
}

TEST_CASE("quadrature refinement stays within the documented bounds") {
  // the fixed-order rule on [0, tau] has a small discretization error of its
  // own near t = 0; doubling the orders moves the weak-dependence cells by
  // < 5e-6 and every cell by < 2e-3
  for (double theta : {1.25, 4.0}) {
    ScenarioConfig cfg = gumbel_config(theta);
    for (double tau : {12.0, 36.0}) {
      TruthResult a = true_values(cfg, tau, 80, 24);
      TruthResult b = true_values(cfg, tau, 160, 48);
      double d = std::max(std::fabs(a.pi_t - b.pi_t), std::fabs(a.pi_c - b.pi_c));
      CHECK(d < 2e-3);
      if (theta == 1.25) CHECK(d < 5e-6);
    }
  }
}

TEST_CASE("clayton truth route works for the sensitivity design") {
  ScenarioConfig cfg = ScenarioConfig::defaults();
  cfg.dgp_copula = CopulaSpec::make(CopulaFamily::clayton, 0.5);  // Kendall tau = 0.2
  TruthResult t = true_values(cfg, 24.0);
  CHECK(t.nb > 0.0);
  CHECK(t.pi_t + t.pi_c < 1.0);
  // cross-check the q = 2 prefix against a direct copula evaluation
  Eigen::Vector3d z(1.0, 0.5, 0.0);
  const auto& c1 = cfg.components[0];
  const auto& c2 = cfg.components[1];
  double s1 = std::exp(-c1.lambda0 * std::pow(24.0, c1.rho) * std::exp(c1.beta.dot(z)));
  double s2 = std::exp(-c2.lambda0 * std::pow(9.0, c2.rho) * std::exp(c2.beta.dot(z)));
  CHECK(prefix_survival_true(cfg, 0, 1, 24.0, 9.0, z) ==
        doctest::Approx(copula_cdf(cfg.dgp_copula, s1, s2)).epsilon(1e-12));
}
