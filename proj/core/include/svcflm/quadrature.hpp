#pragma once

#include <vector>

namespace svcflm {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule with `points` nodes on [-1, 1]; exact for
/// polynomials of degree 2*points - 1.
QuadratureRule gauss_legendre(int points);

/// Composite Gauss-Legendre rule over the consecutive, non-degenerate
/// intervals of `breaks` (which must be nondecreasing). Zero-length
/// intervals are skipped.
QuadratureRule composite_gauss_legendre(const std::vector<double>& breaks,
                                        int points_per_interval);

}  // namespace svcflm
