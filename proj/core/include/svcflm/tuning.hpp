#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "svcflm/design.hpp"
#include "svcflm/solver.hpp"

namespace svcflm {

/// Which coefficient norm enters the df shrinkage term.
enum class DfNorm {
  theta,  // ||theta_j||, the coordinates the penalty acts on
  b,      // ||b_j||
};

/// sum over active groups of tr{(I + Omega_j)^{-1}}, with
/// Omega_j = (alpha lambda w_j / ||theta_j|| + (1 - alpha) lambda) I.
double effective_df(const FitResult& fit, const PenaltySpec& penalty, DfNorm norm = DfNorm::theta);

/// Residual variance floor applied before the log.
inline constexpr double kSigma2Floor = 1e-12;

/// RSS / n of a fit, floored at kSigma2Floor.
double residual_variance(const FitResult& fit, const Eigen::VectorXd& y);

/// n log(sigma2) + df log(n).
double bic(const FitResult& fit, const Eigen::VectorXd& y, double df);

/// max_j ||U_j^T y|| / (n alpha w_j), rounded up to the first double at which
/// the fit is exactly zero.
double lambda_max(const OrthogonalizedDesign& orth, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                  double alpha);

/// Geometric sequence from lambda_max down to ratio * lambda_max.
std::vector<double> default_lambda_grid(const OrthogonalizedDesign& orth, const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& weights, double alpha, int n_points, double ratio);

struct TuningGrid {
  std::vector<double> lambdas;  // explicit, descending; empty means default_lambda_grid per (m2, alpha)
  int n_lambda = 50;
  double lambda_ratio = 1e-3;
  std::vector<double> alphas{0.5, 0.9, 1.0};
  std::vector<int> m2_values{1, 4, 6, 8};
};

struct TuningRow {
  int m2 = 0;
  double alpha = 0.0;
  double lambda = 0.0;
  double bic = 0.0;
  double sigma2 = 0.0;
  double df = 0.0;
  int n_active = 0;

  bool operator==(const TuningRow&) const = default;
};

struct TuningReport {
  std::vector<TuningRow> rows;
  std::size_t best = 0;
  std::vector<std::string> failures;  // (m2, alpha) combinations that could not be fitted
};

struct SelectOptions {
  bool adaptive = true;
  PilotEstimator pilot = PilotEstimator::joint;
  DfNorm df_norm = DfNorm::theta;
  FitOptions fit;
  /// A lambda path stops at the first fit whose effective df reaches
  /// max_df_fraction * n; that fit and smaller lambdas are not evaluated.
  double max_df_fraction = 1.0;
  int threads = 1;
};

struct Selection {
  FitResult fit;
  PenaltySpec penalty;
  int m2 = 0;
  VCFLMDesign design;
  TuningReport report;
};

using DesignBuilder = std::function<VCFLMDesign(int m2)>;

/// BIC search over (m2, alpha, lambda). Each (m2, alpha) path runs
/// lambda descending with warm starts; the argmin keeps the earliest row on
/// ties, which is the larger lambda within a path. Throws std::runtime_error
/// listing the failures when nothing could be fitted.
Selection select(const DesignBuilder& build, const TuningGrid& grid, const SelectOptions& options = {});

}  // namespace svcflm
