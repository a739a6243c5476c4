#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "svcflm/basis.hpp"
#include "svcflm/fpca.hpp"

namespace svcflm {

/// Linearized varying-coefficient regression problem y = sum_j Z_j b_j + e.
///
/// Row i of block j is psi(t_i) kron xi_ij (psi outer, scores inner), so
/// b_j = vec(B_j) with B_j an m1_j x m2 matrix stored column-major. The
/// response is standardized to mean 0 and SD 1 (divisor n).
struct VCFLMDesign {
  Eigen::VectorXd y;
  double y_center = 0.0;
  double y_scale = 1.0;
  Eigen::VectorXd t;
  BSplineBasis t_basis{0.0, 1.0, 1};
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<int> group_dims;
  std::vector<int> score_dims;

  int samples() const { return static_cast<int>(y.size()); }
  int groups() const { return static_cast<int>(blocks.size()); }
};

struct Standardization {
  double center = 0.0;
  double scale = 1.0;
};

/// Mean and SD (divisor n). Throws std::invalid_argument for a constant
/// vector.
Standardization standardization_of(const Eigen::VectorXd& y);

/// Block with row i equal to psi_row(i) kron scores_row(i).
Eigen::MatrixXd design_block(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& psi);

VCFLMDesign build_design(std::span<const FPCAResult> fpca_results, const Eigen::VectorXd& t,
                         const BSplineBasis& t_basis, const Eigen::VectorXd& y_raw);

/// Back to the raw response scale: fitted * y_scale + y_center.
Eigen::VectorXd fitted_to_response(const VCFLMDesign& design, const Eigen::VectorXd& fitted);
Eigen::VectorXd fitted_to_response(const Standardization& st, const Eigen::VectorXd& fitted);

/// Column-major vec / unvec of an m1 x m2 coefficient matrix.
Eigen::VectorXd vec(const Eigen::MatrixXd& b);
Eigen::MatrixXd unvec(const Eigen::VectorXd& b, int rows, int cols);

}  // namespace svcflm
