#include "winres/copula.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "winres/quadrature.hpp"

namespace winres {

namespace {

constexpr double kPi = 3.14159265358979323846;

double logsumexp2(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void check_theta(CopulaFamily f, double th) {
  switch (f) {
    case CopulaFamily::independence:
      return;
    case CopulaFamily::gumbel:
      if (!(th >= 1.0)) throw std::domain_error("gumbel requires theta >= 1");
      return;
    case CopulaFamily::clayton:
      if (!(th > 0.0)) throw std::domain_error("clayton requires theta > 0");
      return;
    case CopulaFamily::frank:
      if (!(th != 0.0)) throw std::domain_error("frank requires theta != 0");
      return;
    case CopulaFamily::plackett:
      if (!(th > 0.0) || th == 1.0)
        throw std::domain_error("plackett requires psi > 0, psi != 1");
      return;
  }
  throw std::logic_error("unknown copula family");
}

// ---- Gumbel, evaluated through logs of -log u -------------------------------

struct GumbelCtx {
  double th, lx, ly, la, logB, B, C, logC, rA;  // rA = (dA/dtheta)/A
  double u, v;
};

GumbelCtx gumbel_ctx(double th, double u, double v) {
  GumbelCtx g;
  g.th = th;
  g.u = u;
  g.v = v;
  double x = -std::log(u), y = -std::log(v);
  g.lx = std::log(x);
  g.ly = std::log(y);
  g.la = logsumexp2(th * g.lx, th * g.ly);
  g.logB = g.la / th;
  g.B = std::exp(g.logB);
  g.logC = -g.B;
  g.C = std::exp(g.logC);
  double wx = std::exp(th * g.lx - g.la), wy = std::exp(th * g.ly - g.la);
  g.rA = g.lx * wx + g.ly * wy;
  return g;
}

double gumbel_cdf(double th, double u, double v) {
  return gumbel_ctx(th, u, v).C;
}

double gumbel_dv(double th, double u, double v) {
  GumbelCtx g = gumbel_ctx(th, u, v);
  return std::exp(g.logC + (1.0 / th - 1.0) * g.la + (th - 1.0) * g.ly - std::log(v));
}

double gumbel_density(double th, double u, double v) {
  GumbelCtx g = gumbel_ctx(th, u, v);
  double lead = g.logC + (1.0 / th - 2.0) * g.la + (th - 1.0) * (g.lx + g.ly) -
                std::log(u) - std::log(v);
  return std::exp(lead) * (g.B + th - 1.0);
}

double gumbel_dtheta(double th, double u, double v) {
  GumbelCtx g = gumbel_ctx(th, u, v);
  double dB = g.B * (-g.la / (th * th) + g.rA / th);
  return -g.C * dB;
}

double gumbel_dv_dv(double th, double u, double v) {
  GumbelCtx g = gumbel_ctx(th, u, v);
  double lv = std::log(v);
  double t1 = std::exp(g.logC + 2.0 * (1.0 / th - 1.0) * g.la + (2.0 * th - 2.0) * g.ly - 2.0 * lv);
  double t2 = (th - 1.0) *
              std::exp(g.logC + (1.0 / th - 2.0) * g.la + (2.0 * th - 2.0) * g.ly - 2.0 * lv);
  double y = std::exp(g.ly);
  double t3 = std::exp(g.logC + (1.0 / th - 1.0) * g.la + (th - 2.0) * g.ly - 2.0 * lv) *
              (th - 1.0 + y);
  return t1 + t2 - t3;
}

double gumbel_dv_dtheta(double th, double u, double v) {
  GumbelCtx g = gumbel_ctx(th, u, v);
  double dv = std::exp(g.logC + (1.0 / th - 1.0) * g.la + (th - 1.0) * g.ly - std::log(v));
  double dlogC = -g.B * (-g.la / (th * th) + g.rA / th);
  double dlogP = -g.la / (th * th) + (1.0 / th - 1.0) * g.rA;
  return dv * (dlogC + dlogP + g.ly);
}

double gumbel_log_density_dtheta(double th, double u, double v) {
  GumbelCtx g = gumbel_ctx(th, u, v);
  double dB = g.B * (-g.la / (th * th) + g.rA / th);
  return -dB + (-g.la / (th * th) + (1.0 / th - 2.0) * g.rA) + (g.lx + g.ly) +
         (dB + 1.0) / (g.B + th - 1.0);
}

// ---- Clayton, log-space for large theta --------------------------------------

struct ClaytonCtx {
  double th, lu, lv, a, b, logB, rBt;  // a=-th*lu, b=-th*lv, rBt=(dB/dtheta)/B
};

ClaytonCtx clayton_ctx(double th, double u, double v) {
  ClaytonCtx c;
  c.th = th;
  c.lu = std::log(u);
  c.lv = std::log(v);
  c.a = -th * c.lu;
  c.b = -th * c.lv;
  double m = std::max(c.a, c.b);
  c.logB = m + std::log(std::exp(c.a - m) + std::exp(c.b - m) - std::exp(-m));
  double ra = std::exp(c.a - c.logB), rb = std::exp(c.b - c.logB);
  c.rBt = (-c.lu) * ra + (-c.lv) * rb;
  return c;
}

double clayton_cdf(double th, double u, double v) {
  return std::exp(-clayton_ctx(th, u, v).logB / th);
}

double clayton_dv(double th, double u, double v) {
  ClaytonCtx c = clayton_ctx(th, u, v);
  return std::exp(-(th + 1.0) * c.lv - (1.0 / th + 1.0) * c.logB);
}

double clayton_density(double th, double u, double v) {
  ClaytonCtx c = clayton_ctx(th, u, v);
  return (th + 1.0) *
         std::exp(-(th + 1.0) * (c.lu + c.lv) - (1.0 / th + 2.0) * c.logB);
}

double clayton_dv_dv(double th, double u, double v) {
  ClaytonCtx c = clayton_ctx(th, u, v);
  // -(th+1) v^{-th-2} B^{-1/th-2} (u^{-th} - 1)
  if (c.a <= 0.0) return 0.0;
  double logfac = c.a + std::log1p(-std::exp(-c.a));
  return -(th + 1.0) *
         std::exp(-(th + 2.0) * c.lv - (1.0 / th + 2.0) * c.logB + logfac);
}

double clayton_dtheta(double th, double u, double v) {
  ClaytonCtx c = clayton_ctx(th, u, v);
  double cdf = std::exp(-c.logB / th);
  return cdf * (c.logB / (th * th) - c.rBt / th);
}

double clayton_dv_dtheta(double th, double u, double v) {
  ClaytonCtx c = clayton_ctx(th, u, v);
  double dv = std::exp(-(th + 1.0) * c.lv - (1.0 / th + 1.0) * c.logB);
  return dv * (-c.lv + c.logB / (th * th) - (1.0 / th + 1.0) * c.rBt);
}

double clayton_log_density_dtheta(double th, double u, double v) {
  ClaytonCtx c = clayton_ctx(th, u, v);
  return 1.0 / (th + 1.0) - (c.lu + c.lv) + c.logB / (th * th) -
         (1.0 / th + 2.0) * c.rBt;
}

// ---- Frank -------------------------------------------------------------------

struct FrankCtx {
  double th, gu, gv, D, B, eu, ev;  // gu=e^{-th u}-1, D=e^{-th}-1, B=1+gu gv/D
  double Bt, Dt;                    // theta derivatives
};

FrankCtx frank_ctx(double th, double u, double v) {
  FrankCtx f;
  f.th = th;
  f.eu = std::exp(-th * u);
  f.ev = std::exp(-th * v);
  f.gu = std::expm1(-th * u);
  f.gv = std::expm1(-th * v);
  f.D = std::expm1(-th);
  f.B = 1.0 + f.gu * f.gv / f.D;
  f.Dt = -std::exp(-th);
  double guv_t = -u * f.eu * f.gv - v * f.ev * f.gu;
  f.Bt = (guv_t * f.D - f.gu * f.gv * f.Dt) / (f.D * f.D);
  return f;
}

double frank_cdf(double th, double u, double v) {
  FrankCtx f = frank_ctx(th, u, v);
  return -std::log(f.B) / th;
}

double frank_dv(double th, double u, double v) {
  FrankCtx f = frank_ctx(th, u, v);
  return f.ev * f.gu / (f.D * f.B);
}

double frank_density(double th, double u, double v) {
  FrankCtx f = frank_ctx(th, u, v);
  return -th * f.eu * f.ev / (f.D * f.B * f.B);
}

double frank_dv_dv(double th, double u, double v) {
  FrankCtx f = frank_ctx(th, u, v);
  return -th * f.gu * f.ev * (1.0 - f.gu / f.D) / (f.D * f.B * f.B);
}

double frank_dtheta(double th, double u, double v) {
  FrankCtx f = frank_ctx(th, u, v);
  return std::log(f.B) / (th * th) - f.Bt / (th * f.B);
}

double frank_dv_dtheta(double th, double u, double v) {
  FrankCtx f = frank_ctx(th, u, v);
  double n = f.ev * f.gu;
  double nt = -v * f.ev * f.gu + f.ev * (-u * f.eu);
  double m = f.D * f.B;
  double mt = f.Dt * f.B + f.D * f.Bt;
  return (nt * m - n * mt) / (m * m);
}

double frank_log_density_dtheta(double th, double u, double v) {
  FrankCtx f = frank_ctx(th, u, v);
  return 1.0 / th - (u + v) - f.Dt / f.D - 2.0 * f.Bt / f.B;
}

// ---- Plackett ----------------------------------------------------------------

struct PlackettCtx {
  double ps, B, D, sq, Dp, m;  // Dp = dD/dpsi, m = u+v-2uv
};

PlackettCtx plackett_ctx(double ps, double u, double v) {
  PlackettCtx p;
  p.ps = ps;
  p.B = 1.0 + (ps - 1.0) * (u + v);
  p.D = p.B * p.B - 4.0 * ps * (ps - 1.0) * u * v;
  p.sq = std::sqrt(p.D);
  p.Dp = 2.0 * p.B * (u + v) - 4.0 * (2.0 * ps - 1.0) * u * v;
  p.m = u + v - 2.0 * u * v;
  return p;
}

double plackett_cdf(double ps, double u, double v) {
  PlackettCtx p = plackett_ctx(ps, u, v);
  return (p.B - p.sq) / (2.0 * (ps - 1.0));
}

double plackett_dv(double ps, double u, double v) {
  PlackettCtx p = plackett_ctx(ps, u, v);
  return 0.5 * (1.0 - (p.B - 2.0 * ps * u) / p.sq);
}

double plackett_density(double ps, double u, double v) {
  PlackettCtx p = plackett_ctx(ps, u, v);
  return ps * (1.0 + (ps - 1.0) * p.m) / (p.D * p.sq);
}

double plackett_dv_dv(double ps, double u, double v) {
  PlackettCtx p = plackett_ctx(ps, u, v);
  double g = p.B - 2.0 * ps * u;
  return -(ps - 1.0) / (2.0 * p.D * p.sq) * (p.D - g * g);
}

double plackett_dtheta(double ps, double u, double v) {
  PlackettCtx p = plackett_ctx(ps, u, v);
  double term = (u + v - p.Dp / (2.0 * p.sq)) * (ps - 1.0) - (p.B - p.sq);
  return term / (2.0 * (ps - 1.0) * (ps - 1.0));
}

double plackett_dv_dtheta(double ps, double u, double v) {
  PlackettCtx p = plackett_ctx(ps, u, v);
  double g = p.B - 2.0 * ps * u;
  return -0.5 * ((v - u) / p.sq - g * p.Dp / (2.0 * p.D * p.sq));
}

double plackett_log_density_dtheta(double ps, double u, double v) {
  PlackettCtx p = plackett_ctx(ps, u, v);
  return 1.0 / ps + p.m / (1.0 + (ps - 1.0) * p.m) - 1.5 * p.Dp / p.D;
}

double nudged_plackett(double ps) {
  // optimizer paths may pass arbitrarily close to the excluded psi = 1
  if (std::fabs(ps - 1.0) < 1e-7) return ps < 1.0 ? 1.0 - 1e-7 : 1.0 + 1e-7;
  return ps;
}

}  // namespace

std::string family_name(CopulaFamily f) {
  switch (f) {
    case CopulaFamily::independence: return "independence";
    case CopulaFamily::gumbel: return "gumbel";
    case CopulaFamily::clayton: return "clayton";
    case CopulaFamily::frank: return "frank";
    case CopulaFamily::plackett: return "plackett";
  }
  return "?";
}

CopulaFamily family_from_name(const std::string& name) {
  if (name == "independence") return CopulaFamily::independence;
  if (name == "gumbel") return CopulaFamily::gumbel;
  if (name == "clayton") return CopulaFamily::clayton;
  if (name == "frank") return CopulaFamily::frank;
  if (name == "plackett") return CopulaFamily::plackett;
  throw std::invalid_argument("unknown copula family: " + name);
}

CopulaSpec CopulaSpec::make(CopulaFamily f, double theta) {
  check_theta(f, theta);
  return {f, theta};
}

#define WINRES_DISPATCH(fn_indep, fn_g, fn_c, fn_f, fn_p)                    \
  check_theta(spec.family, spec.theta);                                      \
  switch (spec.family) {                                                     \
    case CopulaFamily::independence: return fn_indep;                        \
    case CopulaFamily::gumbel: return fn_g(spec.theta, u, v);                \
    case CopulaFamily::clayton: return fn_c(spec.theta, u, v);               \
    case CopulaFamily::frank: return fn_f(spec.theta, u, v);                 \
    case CopulaFamily::plackett:                                             \
      return fn_p(nudged_plackett(spec.theta), u, v);                        \
  }                                                                          \
  throw std::logic_error("unknown copula family")

double copula_cdf(const CopulaSpec& spec, double u, double v) {
  WINRES_DISPATCH(u * v, gumbel_cdf, clayton_cdf, frank_cdf, plackett_cdf);
}

double copula_dv(const CopulaSpec& spec, double u, double v) {
  WINRES_DISPATCH(u, gumbel_dv, clayton_dv, frank_dv, plackett_dv);
}

double copula_du(const CopulaSpec& spec, double u, double v) {
  // all implemented families are exchangeable
  std::swap(u, v);
  WINRES_DISPATCH(u, gumbel_dv, clayton_dv, frank_dv, plackett_dv);
}

double copula_density(const CopulaSpec& spec, double u, double v) {
  WINRES_DISPATCH(1.0, gumbel_density, clayton_density, frank_density,
                  plackett_density);
}

double copula_dtheta(const CopulaSpec& spec, double u, double v) {
  WINRES_DISPATCH(0.0, gumbel_dtheta, clayton_dtheta, frank_dtheta,
                  plackett_dtheta);
}

double copula_dv_dv(const CopulaSpec& spec, double u, double v) {
  WINRES_DISPATCH(0.0, gumbel_dv_dv, clayton_dv_dv, frank_dv_dv,
                  plackett_dv_dv);
}

double copula_dv_dtheta(const CopulaSpec& spec, double u, double v) {
  WINRES_DISPATCH(0.0, gumbel_dv_dtheta, clayton_dv_dtheta, frank_dv_dtheta,
                  plackett_dv_dtheta);
}

double copula_du_dtheta(const CopulaSpec& spec, double u, double v) {
  std::swap(u, v);
  WINRES_DISPATCH(0.0, gumbel_dv_dtheta, clayton_dv_dtheta, frank_dv_dtheta,
                  plackett_dv_dtheta);
}

double copula_log_density_dtheta(const CopulaSpec& spec, double u, double v) {
  WINRES_DISPATCH(0.0, gumbel_log_density_dtheta, clayton_log_density_dtheta,
                  frank_log_density_dtheta, plackett_log_density_dtheta);
}

#undef WINRES_DISPATCH

// ---- exchangeable Archimedean machinery ---------------------------------------

double arch_phi(const CopulaSpec& spec, double u) {
  switch (spec.family) {
    case CopulaFamily::independence: return -std::log(u);
    case CopulaFamily::gumbel: return std::pow(-std::log(u), spec.theta);
    case CopulaFamily::clayton:
      return std::expm1(-spec.theta * std::log(u)) / spec.theta;
    case CopulaFamily::frank:
      return -std::log(std::expm1(-spec.theta * u) / std::expm1(-spec.theta));
    default:
      throw std::invalid_argument("no Archimedean generator for " +
                                  family_name(spec.family));
  }
}

double arch_phi_deriv(const CopulaSpec& spec, double u) {
  switch (spec.family) {
    case CopulaFamily::independence: return -1.0 / u;
    case CopulaFamily::gumbel:
      return -spec.theta * std::pow(-std::log(u), spec.theta - 1.0) / u;
    case CopulaFamily::clayton:
      return -std::exp(-(spec.theta + 1.0) * std::log(u));
    case CopulaFamily::frank:
      return spec.theta * std::exp(-spec.theta * u) / std::expm1(-spec.theta * u);
    default:
      throw std::invalid_argument("no Archimedean generator for " +
                                  family_name(spec.family));
  }
}

double arch_psi(const CopulaSpec& spec, double s) {
  switch (spec.family) {
    case CopulaFamily::independence: return std::exp(-s);
    case CopulaFamily::gumbel: return std::exp(-std::pow(s, 1.0 / spec.theta));
    case CopulaFamily::clayton:
      return std::pow(1.0 + spec.theta * s, -1.0 / spec.theta);
    case CopulaFamily::frank:
      return -std::log1p(std::exp(-s) * std::expm1(-spec.theta)) / spec.theta;
    default:
      throw std::invalid_argument("no Archimedean generator for " +
                                  family_name(spec.family));
  }
}

double arch_psi_deriv(const CopulaSpec& spec, double s) {
  switch (spec.family) {
    case CopulaFamily::independence: return -std::exp(-s);
    case CopulaFamily::gumbel: {
      double r = std::pow(s, 1.0 / spec.theta);
      return -(1.0 / spec.theta) * r / s * std::exp(-r);
    }
    case CopulaFamily::clayton:
      return -std::pow(1.0 + spec.theta * s, -1.0 / spec.theta - 1.0);
    case CopulaFamily::frank: {
      double d = std::expm1(-spec.theta);
      double e = std::exp(-s) * d;
      return e / (spec.theta * (1.0 + e));
    }
    default:
      throw std::invalid_argument("no Archimedean generator for " +
                                  family_name(spec.family));
  }
}

double archimedean_prefix_cdf(const CopulaSpec& spec, const std::vector<double>& us) {
  check_theta(spec.family, spec.theta);
  if (us.size() < 2) throw std::invalid_argument("prefix copula needs q >= 2");
  if (spec.family == CopulaFamily::plackett) {
    if (us.size() != 2)
      throw std::invalid_argument("plackett copula supports q = 2 only");
    return copula_cdf(spec, us[0], us[1]);
  }
  double s = 0.0;
  for (double u : us) s += arch_phi(spec, u);
  return arch_psi(spec, s);
}

double archimedean_prefix_dlast(const CopulaSpec& spec, const std::vector<double>& us) {
  check_theta(spec.family, spec.theta);
  if (us.size() < 2) throw std::invalid_argument("prefix copula needs q >= 2");
  if (spec.family == CopulaFamily::plackett) {
    if (us.size() != 2)
      throw std::invalid_argument("plackett copula supports q = 2 only");
    return copula_dv(spec, us[0], us[1]);
  }
  double s = 0.0;
  for (double u : us) s += arch_phi(spec, u);
  return arch_psi_deriv(spec, s) * arch_phi_deriv(spec, us.back());
}

// ---- Debye function and Kendall-tau starts ------------------------------------

double debye1(double theta) {
  if (theta == 0.0) return 1.0;
  if (theta < 0.0) return debye1(-theta) - theta / 2.0;
  static const QuadratureRule base = gauss_legendre(64);
  double acc = 0.0;
  for (size_t i = 0; i < base.nodes.size(); ++i) {
    double x = 0.5 * theta * (base.nodes[i] + 1.0);
    double f = x < 1e-8 ? 1.0 - x / 2.0 : x / std::expm1(x);
    acc += base.weights[i] * f;
  }
  return acc * 0.5;  // (1/theta) * (theta/2) * sum
}

double frank_kendall_tau(double theta) {
  if (theta == 0.0) return 0.0;
  return 1.0 - 4.0 / theta + 4.0 * debye1(theta) / theta;
}

double kendall_tau_start(CopulaFamily family, double tau_k) {
  switch (family) {
    case CopulaFamily::independence:
      return 0.0;
    case CopulaFamily::gumbel: {
      if (tau_k <= 0.0 || tau_k >= 0.99) return 1.5;  // inadmissible: default
      return 1.0 / (1.0 - tau_k);
    }
    case CopulaFamily::clayton: {
      if (tau_k <= 0.0 || tau_k >= 0.99) return 0.5;
      return 2.0 * tau_k / (1.0 - tau_k);
    }
    case CopulaFamily::frank: {
      double target = std::fabs(tau_k);
      if (target < 1e-6) return tau_k >= 0.0 ? 1e-4 : -1e-4;
      double lo = 1e-8, hi = 50.0;
      if (frank_kendall_tau(hi) <= target) return tau_k > 0 ? hi : -hi;
      for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (frank_kendall_tau(mid) < target) lo = mid; else hi = mid;
      }
      double th = 0.5 * (lo + hi);
      return tau_k > 0 ? th : -th;
    }
    case CopulaFamily::plackett:
      // no closed form; coarse monotone map, the fit refines via a grid scan
      return std::exp(3.0 * tau_k);
  }
  throw std::logic_error("unknown copula family");
}

double empirical_kendall_tau(const std::vector<CensoredUniformPair>& pairs) {
  size_t n = std::min<size_t>(pairs.size(), 2000);
  if (n < 2) return 0.0;
  long long conc = 0, disc = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      double a = (pairs[i].u1 - pairs[j].u1) * (pairs[i].u2 - pairs[j].u2);
      if (a > 0) ++conc;
      else if (a < 0) ++disc;
    }
  return static_cast<double>(conc - disc) / (0.5 * n * (n - 1));
}

// ---- pseudo-likelihood --------------------------------------------------------

double copula_pair_loglik(const CopulaSpec& spec, const CensoredUniformPair& p) {
  if (p.d1 == 1 && p.d2 == 1) return std::log(copula_density(spec, p.u1, p.u2));
  if (p.d1 == 1 && p.d2 == 0) return std::log(copula_du(spec, p.u1, p.u2));
  if (p.d1 == 0 && p.d2 == 1) return std::log(copula_dv(spec, p.u1, p.u2));
  return std::log(copula_cdf(spec, p.u1, p.u2));
}

double copula_pair_score(const CopulaSpec& spec, const CensoredUniformPair& p) {
  if (p.d1 == 1 && p.d2 == 1) return copula_log_density_dtheta(spec, p.u1, p.u2);
  if (p.d1 == 1 && p.d2 == 0)
    return copula_du_dtheta(spec, p.u1, p.u2) / copula_du(spec, p.u1, p.u2);
  if (p.d1 == 0 && p.d2 == 1)
    return copula_dv_dtheta(spec, p.u1, p.u2) / copula_dv(spec, p.u1, p.u2);
  return copula_dtheta(spec, p.u1, p.u2) / copula_cdf(spec, p.u1, p.u2);
}

namespace {

struct Transform {
  std::function<double(double)> to_theta;    // search scale -> theta
  std::function<double(double)> from_theta;  // theta -> search scale
  double lo, hi;                             // search-scale bounds
};

Transform make_transform(CopulaFamily family) {
  switch (family) {
    case CopulaFamily::gumbel:
      return {[](double s) { return 1.0 + std::exp(s); },
              [](double t) { return std::log(t - 1.0); },
              std::log(1e-6), std::log(49.0)};
    case CopulaFamily::clayton:
      return {[](double s) { return std::exp(s); },
              [](double t) { return std::log(t); },
              std::log(1e-4), std::log(50.0)};
    case CopulaFamily::frank:
      return {[](double s) {
                if (std::fabs(s) < 1e-6) return s < 0.0 ? -1e-6 : 1e-6;
                return s;
              },
              [](double t) { return t; }, -50.0, 50.0};
    case CopulaFamily::plackett:
      return {[](double s) { return nudged_plackett(std::exp(s)); },
              [](double t) { return std::log(t); },
              std::log(1e-4), std::log(1e4)};
    default:
      throw std::logic_error("no transform");
  }
}

// Brent minimizer on [a, b] with initial abscissa x0.
double brent_min(const std::function<double(double)>& f, double a, double b,
                 double x0, double tol, int max_iter = 200) {
  const double gold = 0.3819660112501051;
  double x = std::clamp(x0, a, b), w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    double xm = 0.5 * (a + b);
    double tol1 = tol * std::fabs(x) + 1e-12;
    double tol2 = 2.0 * tol1;
    if (std::fabs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    double dnew;
    bool parab = false;
    if (std::fabs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::fabs(q);
      if (std::fabs(p) < std::fabs(0.5 * q * e) && p > q * (a - x) &&
          p < q * (b - x)) {
        dnew = p / q;
        parab = true;
      } else {
        dnew = 0.0;
      }
    } else {
      dnew = 0.0;
    }
    if (!parab) {
      e = (x >= xm) ? a - x : b - x;
      dnew = gold * e;
    } else {
      e = d;
    }
    d = dnew;
    double u = (std::fabs(d) >= tol1) ? x + d : x + (d > 0 ? tol1 : -tol1);
    double fu = f(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return x;
}

}  // namespace

CopulaFitResult fit_copula(CopulaFamily family,
                           const std::vector<CensoredUniformPair>& pairs) {
  if (pairs.size() < 2) throw std::invalid_argument("fit_copula: need >= 2 pairs");
  CopulaFitResult result;
  if (family == CopulaFamily::independence) {
    result.spec = CopulaSpec::independence();
    result.scores.assign(pairs.size(), 0.0);
    for (const auto& p : pairs)
      result.loglik += copula_pair_loglik(result.spec, p);
    return result;
  }

  Transform tr = make_transform(family);
  auto negll = [&](double s) {
    CopulaSpec spec{family, tr.to_theta(s)};
    double acc = 0.0;
    for (const auto& p : pairs) acc += copula_pair_loglik(spec, p);
    return std::isfinite(acc) ? -acc : std::numeric_limits<double>::max() / 2;
  };

  double s0;
  if (family == CopulaFamily::plackett) {
    // 25-point log-spaced grid scan initializer
    double best = std::numeric_limits<double>::max();
    s0 = 0.0;
    for (int k = 0; k < 25; ++k) {
      double s = tr.lo + (tr.hi - tr.lo) * k / 24.0;
      double f = negll(s);
      if (f < best) { best = f; s0 = s; }
    }
  } else {
    double tau = empirical_kendall_tau(pairs);
    double th0 = kendall_tau_start(family, tau);
    s0 = std::clamp(tr.from_theta(th0), tr.lo, tr.hi);
  }

  double shat = brent_min(negll, tr.lo, tr.hi, s0, 1e-10);
  // a boundary optimum means the bracketed search never crossed an interior
  // minimum; flag it instead of failing
  bool boundary = (shat - tr.lo < 1e-6 * (tr.hi - tr.lo)) ||
                  (tr.hi - shat < 1e-6 * (tr.hi - tr.lo));
  double theta_hat = tr.to_theta(shat);

  CopulaSpec spec{family, theta_hat};
  auto total_ll = [&](double th) {
    CopulaSpec sp{family, th};
    double acc = 0.0;
    for (const auto& p : pairs) acc += copula_pair_loglik(sp, p);
    return acc;
  };
  double h = 1e-4 * std::max(1.0, std::fabs(theta_hat));
  if (family == CopulaFamily::gumbel) h = std::min(h, 0.5 * (theta_hat - 1.0) + 1e-9);
  if (family == CopulaFamily::clayton || family == CopulaFamily::plackett)
    h = std::min(h, 0.5 * theta_hat);
  double l0 = total_ll(theta_hat);
  double lp = total_ll(theta_hat + h), lm = total_ll(theta_hat - h);
  double info = -(lp - 2.0 * l0 + lm) / (h * h);
  if (!(info > 1e-8))
    throw DegenerateCopulaFit("fit_copula: flat pseudo-likelihood (information " +
                              std::to_string(info) + ")");

  result.spec = spec;
  result.loglik = l0;
  result.pseudo_information = info;
  result.boundary = boundary;
  result.scores.resize(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i)
    result.scores[i] = copula_pair_score(spec, pairs[i]);
  return result;
}

// ---- sampling ----------------------------------------------------------------

namespace {

// Kanter/CMS sampler for the positive stable law with Laplace transform
// exp(-t^alpha), 0 < alpha < 1.
double sample_positive_stable(double alpha, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
  std::exponential_distribution<double> expo(1.0);
  double u = unif(rng);
  double w = expo(rng);
  double su = std::sin(kPi * u);
  double s1 = std::sin(alpha * kPi * u);
  double s2 = std::sin((1.0 - alpha) * kPi * u);
  double a = std::pow(s1, alpha / (1.0 - alpha)) * s2 /
             std::pow(su, 1.0 / (1.0 - alpha));
  return std::pow(a / w, (1.0 - alpha) / alpha);
}

double conditional_inverse(const CopulaSpec& spec, double v1, double target) {
  // solve dC/du (v1, x) = target for x by bisection
  double lo = 1e-14, hi = 1.0 - 1e-14;
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    if (copula_du(spec, v1, mid) < target) lo = mid; else hi = mid;
    if (hi - lo < 1e-12) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> sample_copula(const CopulaSpec& spec, int q, std::mt19937_64& rng) {
  check_theta(spec.family, spec.theta);
  if (q < 1) throw std::invalid_argument("sample_copula: q >= 1");
  std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> out(q);

  switch (spec.family) {
    case CopulaFamily::independence:
      for (int k = 0; k < q; ++k) out[k] = unif(rng);
      return out;
    case CopulaFamily::gumbel: {
      if (spec.theta == 1.0) {
        for (int k = 0; k < q; ++k) out[k] = unif(rng);
        return out;
      }
      double s = sample_positive_stable(1.0 / spec.theta, rng);
      for (int k = 0; k < q; ++k)
        out[k] = std::exp(-std::pow(expo(rng) / s, 1.0 / spec.theta));
      return out;
    }
    case CopulaFamily::clayton: {
      std::gamma_distribution<double> gamma(1.0 / spec.theta, 1.0);
      double g = gamma(rng);
      for (int k = 0; k < q; ++k)
        out[k] = std::pow(1.0 + expo(rng) / g, -1.0 / spec.theta);
      return out;
    }
    case CopulaFamily::frank:
    case CopulaFamily::plackett: {
      if (q > 2)
        throw std::invalid_argument("conditional-inversion sampling is bivariate only");
      out[0] = unif(rng);
      if (q == 2) out[1] = conditional_inverse(spec, out[0], unif(rng));
      return out;
    }
  }
  throw std::logic_error("unknown copula family");
}

}  // namespace winres
