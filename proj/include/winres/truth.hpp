#pragma once

#include <vector>

#include "winres/simulation.hpp"

namespace winres {

struct TruthResult {
  double tau = 0.0;
  std::vector<double> pi_tq;
  std::vector<double> pi_cq;
  double pi_t = 0.0;
  double pi_c = 0.0;
  double nb = 0.0;
  double wr = 0.0;
  double wo = 0.0;
};

// S_{q,a}(u, t | z) = P(T_1 > u, .., T_{q-1} > u, T_q > t | arm a, z) under the
// DGP copula (closed Gumbel form; generator route for the other families), and
// the matching subdensity H_{q,a}(u, t | z) = -dS/dt. q is zero-based.
double prefix_survival_true(const ScenarioConfig& config, int arm, int q, double u,
                            double t, const Eigen::Vector3d& z);
double prefix_subdensity_true(const ScenarioConfig& config, int arm, int q, double u,
                              double t, const Eigen::Vector3d& z);

// Deterministic win-probability truth by Gauss-Legendre quadrature: gl_t nodes
// on [0, tau] for the pairwise time integral, gl_z nodes on [0,1] for the
// continuous covariate, exact enumeration over the binary covariates.
TruthResult true_values(const ScenarioConfig& config, double tau, int gl_t = 80,
                        int gl_z = 24);

}  // namespace winres
