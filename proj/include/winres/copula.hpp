#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace winres {

enum class CopulaFamily { independence, gumbel, clayton, frank, plackett };

std::string family_name(CopulaFamily f);
CopulaFamily family_from_name(const std::string& name);

// One-parameter bivariate survival copula spec. theta is validated against the
// family domain (gumbel theta>=1, clayton theta>0, frank theta!=0, plackett
// psi>0 psi!=1) on every evaluation entry point.
struct CopulaSpec {
  CopulaFamily family = CopulaFamily::independence;
  double theta = 0.0;

  static CopulaSpec independence() { return {CopulaFamily::independence, 0.0}; }
  static CopulaSpec make(CopulaFamily f, double theta);
};

// C(u,v) and its partial derivatives. du/dv are the first partials in u and v,
// density the mixed second partial, dv_dv the second partial in v, dtheta and
// dv_dtheta the parameter derivatives used by the event-model correction.
double copula_cdf(const CopulaSpec& spec, double u, double v);
double copula_du(const CopulaSpec& spec, double u, double v);
double copula_dv(const CopulaSpec& spec, double u, double v);
double copula_density(const CopulaSpec& spec, double u, double v);
double copula_dtheta(const CopulaSpec& spec, double u, double v);
double copula_dv_dv(const CopulaSpec& spec, double u, double v);
double copula_dv_dtheta(const CopulaSpec& spec, double u, double v);
double copula_du_dtheta(const CopulaSpec& spec, double u, double v);
// d log c(u,v) / d theta, the complete-pair pseudo-score term
double copula_log_density_dtheta(const CopulaSpec& spec, double u, double v);

// Exchangeable Archimedean extension C(u_1..u_q) = psi(sum phi(u_k)) and its
// partial in the last argument. plackett is bivariate-only and routed to the
// closed form for q == 2.
double archimedean_prefix_cdf(const CopulaSpec& spec, const std::vector<double>& us);
double archimedean_prefix_dlast(const CopulaSpec& spec, const std::vector<double>& us);

// generator pieces (archimedean families + independence)
double arch_phi(const CopulaSpec& spec, double u);
double arch_phi_deriv(const CopulaSpec& spec, double u);
double arch_psi(const CopulaSpec& spec, double s);
double arch_psi_deriv(const CopulaSpec& spec, double s);

// ---- pseudo-likelihood fitting ----------------------------------------------

struct CensoredUniformPair {
  double u1 = 1.0;
  double u2 = 1.0;
  int d1 = 0;
  int d2 = 0;
};

struct CopulaFitResult {
  CopulaSpec spec;
  double loglik = 0.0;
  double pseudo_information = 0.0;  // -ell''(theta_hat), summed over pairs
  bool boundary = false;            // optimizer stopped at the search bound
  std::vector<double> scores;       // per-pair d ell_i / d theta at theta_hat
};

struct DegenerateCopulaFit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double copula_pair_loglik(const CopulaSpec& spec, const CensoredUniformPair& p);
double copula_pair_score(const CopulaSpec& spec, const CensoredUniformPair& p);

CopulaFitResult fit_copula(CopulaFamily family,
                           const std::vector<CensoredUniformPair>& pairs);

// first Debye function D1 and Kendall-tau based initial values
double debye1(double theta);
double frank_kendall_tau(double theta);
double kendall_tau_start(CopulaFamily family, double tau_k);
double empirical_kendall_tau(const std::vector<CensoredUniformPair>& pairs);

// ---- sampling ----------------------------------------------------------------

// Draw q dependent uniforms from the copula: Gumbel via positive-stable
// frailty, Clayton via gamma frailty, Frank/Plackett by conditional inversion
// (bivariate only).
std::vector<double> sample_copula(const CopulaSpec& spec, int q, std::mt19937_64& rng);

}  // namespace winres
