#pragma once

#include <Eigen/Dense>

#include "svcflm/basis.hpp"

namespace svcflm {

/// n curves expressed in a common basis: row i of `coef` holds the basis
/// coefficients of curve i.
struct FunctionalSample {
  BSplineBasis basis;
  Eigen::MatrixXd coef;
};

/// Truncated Karhunen-Loeve expansion of a functional sample.
///
/// Eigenfunctions are returned as basis coefficients (columns of
/// `eigen_coef`) and are L2-orthonormal: eigen_coef^T * gram * eigen_coef = I.
/// `scores(i, k)` is the inner product of the centered curve i with
/// eigenfunction k. The covariance uses divisor n, so the (divisor n)
/// variance of score column k equals `eigenvalues[k]`.
struct FPCAResult {
  BSplineBasis basis;
  Eigen::MatrixXd gram;
  Eigen::VectorXd mean_coef;
  Eigen::MatrixXd eigen_coef;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd scores;
  /// Every eigenvalue of the Gram-space covariance, not just the retained
  /// ones. Used for the explained-variance rule.
  Eigen::VectorXd all_eigenvalues;

  int components() const { return static_cast<int>(eigenvalues.size()); }
  int samples() const { return static_cast<int>(scores.rows()); }
};

/// FPCA retaining `components` eigenpairs; 1 <= components <= min(n, M).
/// Throws DecompositionError when the Gram matrix is not positive definite.
FPCAResult fpca(const FunctionalSample& sample, int components);

/// Smallest number of leading eigenvalues whose cumulative share of the
/// total reaches `share`. Returns 1 when the total is zero.
int components_for_share(const Eigen::VectorXd& eigenvalues_desc, double share);

/// FPCA with m1 chosen by components_for_share (default 99%).
FPCAResult fpca_by_share(const FunctionalSample& sample, double share = 0.99);

/// mean + sum_{k<m} scores(i,k) * eigenfunction_k, as basis coefficients.
Eigen::VectorXd reconstruct(const FPCAResult& result, int i, int m);

/// Scores of a new curve (basis coefficients) against the training mean and
/// eigenfunctions.
Eigen::VectorXd project_scores(const FPCAResult& result, const Eigen::VectorXd& coef);

/// Row-wise project_scores over a coefficient matrix.
Eigen::MatrixXd project_scores(const FPCAResult& result, const Eigen::MatrixXd& coef);

}  // namespace svcflm
