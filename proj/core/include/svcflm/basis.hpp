#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace svcflm {

/// B-spline system of a given order (degree + 1) on a closed interval,
/// built on an open knot vector: the boundary knots are repeated `order`
/// times. Order 1 with no interior knots is the constant basis.
///
/// Immutable after construction.
class BSplineBasis {
 public:
  BSplineBasis(double lower, double upper, int order,
               std::vector<double> interior_knots = {});

  /// `n_basis` functions of the given order with equally spaced interior
  /// knots. Requires n_basis >= order.
  static BSplineBasis uniform(double lower, double upper, int order,
                              int n_basis);

  static BSplineBasis constant(double lower, double upper) {
    return BSplineBasis(lower, upper, 1);
  }

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  int order() const { return order_; }
  int size() const { return static_cast<int>(interior_.size()) + order_; }
  const std::vector<double>& interior_knots() const { return interior_; }
  const std::vector<double>& knots() const { return knots_; }

  bool contains(double s) const { return s >= lower_ && s <= upper_; }

  /// Values of all basis functions at s. Throws DomainError outside
  /// [lower, upper].
  Eigen::VectorXd evaluate(double s) const;

  /// Row a holds evaluate(s[a]).
  Eigen::MatrixXd evaluate(std::span<const double> s) const;

  /// Distinct breakpoints lower = u_0 < ... < u_K = upper.
  std::vector<double> breakpoints() const;

  bool operator==(const BSplineBasis&) const = default;

 private:
  // Largest i with knots_[i] <= s < knots_[i+1], clamped at the upper end.
  int find_span(double s) const;

  double lower_;
  double upper_;
  int order_;
  std::vector<double> interior_;
  std::vector<double> knots_;
};

/// L2 inner products of the basis functions over the domain. Exact up to
/// rounding: Gauss-Legendre with `order` nodes on every knot interval.
Eigen::MatrixXd gram_matrix(const BSplineBasis& basis);

/// Discretely observed curve.
struct RawCurve {
  std::vector<double> time;
  std::vector<double> value;
};

/// Least-squares basis coefficients of a raw curve. Throws SingularFitError
/// when the basis matrix at the time points is rank deficient, and
/// DimensionError / DomainError for malformed curves.
Eigen::VectorXd smooth_curve(const RawCurve& curve, const BSplineBasis& basis);

}  // namespace svcflm
