#include "svcflm/basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svcflm/errors.hpp"
#include "svcflm/quadrature.hpp"

namespace svcflm {

BSplineBasis::BSplineBasis(double lower, double upper, int order,
                           std::vector<double> interior_knots)
    : lower_(lower), upper_(upper), order_(order), interior_(std::move(interior_knots)) {
  if (!std::isfinite(lower_) || !std::isfinite(upper_) || !(lower_ < upper_)) {
    throw std::invalid_argument("BSplineBasis: domain must be a finite interval with lower < upper");
  }
  if (order_ < 1) throw std::invalid_argument("BSplineBasis: order must be >= 1");
  for (std::size_t k = 0; k < interior_.size(); ++k) {
    const double u = interior_[k];
    if (!(u > lower_ && u < upper_)) {
      throw std::invalid_argument("BSplineBasis: interior knots must lie strictly inside the domain");
    }
    if (k > 0 && u < interior_[k - 1]) {
      throw std::invalid_argument("BSplineBasis: interior knots must be nondecreasing");
    }
  }
  // Multiplicity above order would make a basis function vanish identically.
  for (std::size_t k = 0; k < interior_.size();) {
    std::size_t m = k;
    while (m < interior_.size() && interior_[m] == interior_[k]) ++m;
    if (static_cast<int>(m - k) > order_) {
      throw std::invalid_argument("BSplineBasis: interior knot multiplicity exceeds order");
    }
    k = m;
  }
  knots_.reserve(interior_.size() + 2 * order_);
  knots_.insert(knots_.end(), order_, lower_);
  knots_.insert(knots_.end(), interior_.begin(), interior_.end());
  knots_.insert(knots_.end(), order_, upper_);
}

BSplineBasis BSplineBasis::uniform(double lower, double upper, int order, int n_basis) {
  if (n_basis < order) {
    throw std::invalid_argument("BSplineBasis::uniform: n_basis (" + std::to_string(n_basis) +
                                ") must be >= order (" + std::to_string(order) + ")");
  }
  const int n_interior = n_basis - order;
  std::vector<double> interior(n_interior);
  for (int k = 0; k < n_interior; ++k) {
    interior[k] = lower + (upper - lower) * (k + 1) / (n_interior + 1);
  }
  return BSplineBasis(lower, upper, order, std::move(interior));
}

int BSplineBasis::find_span(double s) const {
  const int n = size();
  // knots_[order-1 .. n] bracket the domain.
  if (s >= upper_) {
    int i = n - 1;
    while (i > order_ - 1 && knots_[i] == knots_[i + 1]) --i;
    return i;
  }
  const auto it = std::upper_bound(knots_.begin() + order_, knots_.begin() + n + 1, s);
  return static_cast<int>(it - knots_.begin()) - 1;
}

Eigen::VectorXd BSplineBasis::evaluate(double s) const {
  if (!contains(s)) {
    throw DomainError("BSplineBasis::evaluate: s=" + std::to_string(s) + " outside [" +
                      std::to_string(lower_) + ", " + std::to_string(upper_) + "]");
  }
  const int p = order_ - 1;
  const int span = find_span(s);
  // Cox-de Boor triangle for the `order` nonzero functions on this span.
  std::vector<double> local(order_, 0.0), left(order_), right(order_);
  local[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = s - knots_[span + 1 - j];
    right[j] = knots_[span + j] - s;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom > 0.0 ? local[r] / denom : 0.0;
      local[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    local[j] = saved;
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(size());
  for (int r = 0; r <= p; ++r) out[span - p + r] = local[r];
  return out;
}

Eigen::MatrixXd BSplineBasis::evaluate(std::span<const double> s) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(s.size()), size());
  for (std::size_t a = 0; a < s.size(); ++a) out.row(static_cast<Eigen::Index>(a)) = evaluate(s[a]).transpose();
  return out;
}

std::vector<double> BSplineBasis::breakpoints() const {
  std::vector<double> out;
  out.push_back(lower_);
  for (double u : interior_) {
    if (u != out.back()) out.push_back(u);
  }
  out.push_back(upper_);
  return out;
}

Eigen::MatrixXd gram_matrix(const BSplineBasis& basis) {
  const QuadratureRule rule = composite_gauss_legendre(basis.breakpoints(), basis.order());
  const int m = basis.size();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    const Eigen::VectorXd phi = basis.evaluate(rule.nodes[q]);
    gram.noalias() += rule.weights[q] * phi * phi.transpose();
  }
  // Exact symmetry; the rank-one sums are symmetric up to rounding only.
  return 0.5 * (gram + gram.transpose());
}

Eigen::VectorXd smooth_curve(const RawCurve& curve, const BSplineBasis& basis) {
  const std::size_t n_points = curve.time.size();
  if (curve.value.size() != n_points) {
    throw DimensionError("smooth_curve: " + std::to_string(n_points) + " time points but " +
                         std::to_string(curve.value.size()) + " values");
  }
  for (std::size_t a = 0; a < n_points; ++a) {
    if (!std::isfinite(curve.time[a]) || !std::isfinite(curve.value[a])) {
      throw std::invalid_argument("smooth_curve: non-finite observation at index " + std::to_string(a));
    }
    if (a > 0 && !(curve.time[a] > curve.time[a - 1])) {
      throw std::invalid_argument("smooth_curve: time points must be strictly increasing");
    }
  }
  const int m = basis.size();
  const auto singular = [&] {
    return SingularFitError("smooth_curve: basis of size " + std::to_string(m) +
                            " cannot be fitted from N=" + std::to_string(n_points) +
                            " observations (rank deficient)");
  };
  if (static_cast<int>(n_points) < m) throw singular();

  const Eigen::MatrixXd phi = basis.evaluate(curve.time);
  const Eigen::Map<const Eigen::VectorXd> values(curve.value.data(), static_cast<Eigen::Index>(n_points));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
  if (qr.rank() < m) throw singular();
  return qr.solve(values);
}

}  // namespace svcflm
