#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "svcflm/basis.hpp"
#include "svcflm/design.hpp"
#include "svcflm/fpca.hpp"

namespace svcflm {

/// Per-group rescaled thin QR: Z_j = U_j R_j with U_j^T U_j = n I and R_j
/// upper triangular.
struct OrthogonalizedDesign {
  int n = 0;
  std::vector<Eigen::MatrixXd> u;
  std::vector<Eigen::MatrixXd> r;

  int groups() const { return static_cast<int>(u.size()); }
  int dim(int j) const { return static_cast<int>(u[static_cast<std::size_t>(j)].cols()); }
  /// Z_j reassembled as U_j R_j.
  Eigen::MatrixXd block(int j) const { return u[static_cast<std::size_t>(j)] * r[static_cast<std::size_t>(j)]; }
};

/// Throws SingularFitError naming the group and its smallest singular value
/// when a block is rank deficient.
OrthogonalizedDesign orthogonalize(std::span<const Eigen::MatrixXd> blocks);
OrthogonalizedDesign orthogonalize(const VCFLMDesign& design);

/// Group adaptive elastic-net penalty parameters.
struct PenaltySpec {
  double lambda = 0.0;
  double alpha = 1.0;
  Eigen::VectorXd weights;  // one per group; all ones for the plain variant
};

/// (1 - kappa/||x||)_+ x. Zero whenever ||x|| <= kappa.
Eigen::VectorXd soft_threshold_group(const Eigen::VectorXd& x, double kappa);

enum class PilotEstimator {
  joint,      // minimum-norm least squares over all groups at once
  per_group,  // separate least squares on each Z_j
};

inline constexpr double kWeightCap = 1e12;

/// w_j = 1 / ||Z_j b~_j|| with b~ a least-squares pilot. Fitted norms below
/// 1e-12 give the cap kWeightCap.
Eigen::VectorXd adaptive_weights(const OrthogonalizedDesign& orth, const Eigen::VectorXd& y,
                                 PilotEstimator pilot = PilotEstimator::joint);

/// Exact minimizer over theta_j of the working objective given the
/// correlation U_j^T r_j with the partial residual r_j.
Eigen::VectorXd block_update_from_correlation(const Eigen::VectorXd& correlation, int n, double lambda,
                                              double alpha, double weight);

Eigen::VectorXd block_update(int j, const Eigen::VectorXd& partial_residual, const OrthogonalizedDesign& orth,
                             const PenaltySpec& penalty);

struct FitOptions {
  double tol = 1e-6;     // on max |theta_new - theta_old| over a sweep
  int max_sweeps = 10000;
};

struct FitResult {
  std::vector<Eigen::VectorXd> theta;  // orthonormalized coordinates
  std::vector<Eigen::VectorXd> b;      // R_j^{-1} theta_j
  std::vector<bool> active;
  std::vector<double> objective_trace;
  Eigen::VectorXd fitted;  // sum_j U_j theta_j, standardized scale
  int sweeps = 0;
  bool converged = false;

  int n_active() const;
};

/// (1/2n)||y - sum U_j theta_j||^2 + alpha lambda sum w_j ||theta_j||
///   + ((1 - alpha) lambda / 2) sum ||theta_j||^2
double working_objective(const OrthogonalizedDesign& orth, const Eigen::VectorXd& y, const PenaltySpec& penalty,
                         std::span<const Eigen::VectorXd> theta);

/// Blockwise coordinate descent from theta = 0 (or `warm_start`), groups in
/// ascending order. Running out of sweeps is reported through `converged`;
/// a non-finite objective throws NumericError.
FitResult fit(const OrthogonalizedDesign& orth, const Eigen::VectorXd& y, const PenaltySpec& penalty,
              const FitOptions& options = {}, const std::vector<Eigen::VectorXd>* warm_start = nullptr);

struct KktReport {
  double active_residual = 0.0;  // worst inf-norm stationarity residual over active groups
  double inactive_ratio = 0.0;   // worst ||U_j^T r_j|| / (n alpha lambda w_j) over inactive groups
  bool ok = true;
};

/// Stationarity check of a fit at tolerance `tol`: active groups within
/// tol in the inf-norm, inactive groups below the threshold by a factor
/// (1 + tol).
KktReport check_kkt(const OrthogonalizedDesign& orth, const Eigen::VectorXd& y, const PenaltySpec& penalty,
                    const FitResult& fit, double tol);

/// beta_j(s_a, t_b) = phi_j(s_a)^T B_j psi(t_b) with B_j = unvec(b_j).
Eigen::MatrixXd coefficient_surface(const Eigen::VectorXd& b_j, const FPCAResult& fpca_j,
                                    const BSplineBasis& t_basis, std::span<const double> grid_s,
                                    std::span<const double> grid_t);

/// Everything needed to score new observations.
struct FittedModel {
  std::vector<FPCAResult> fpca;
  BSplineBasis t_basis{0.0, 1.0, 1};
  std::vector<Eigen::VectorXd> b;
  Standardization standardization;
};

/// Raw-scale predictions from new basis coefficients (coef[j] is n_new x M_j)
/// and exogenous values. Throws DomainError when t leaves the training
/// t-basis domain.
Eigen::VectorXd predict_from_coefficients(const FittedModel& model, std::span<const Eigen::MatrixXd> coef,
                                          const Eigen::VectorXd& t);

/// Smooths curves[j][i] with the training bases, scores them against the
/// training FPCA, and predicts.
Eigen::VectorXd predict(const FittedModel& model, const std::vector<std::vector<RawCurve>>& curves,
                        const Eigen::VectorXd& t);

}  // namespace svcflm
