#pragma once

#include <vector>

namespace winres {

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Gauss-Legendre nodes/weights on [-1,1], computed by Newton iteration on P_n.
QuadratureRule gauss_legendre(int n);

// Same rule mapped to [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

}  // namespace winres
