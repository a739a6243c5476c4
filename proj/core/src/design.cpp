#include "svcflm/design.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "svcflm/errors.hpp"

namespace svcflm {

Standardization standardization_of(const Eigen::VectorXd& y) {
  if (y.size() == 0) throw std::invalid_argument("standardization: empty response");
  Standardization st;
  st.center = y.mean();
  st.scale = std::sqrt((y.array() - st.center).square().mean());
  if (!(st.scale > 0.0) || !std::isfinite(st.scale)) {
    throw std::invalid_argument("standardization: response has zero standard deviation");
  }
  return st;
}

Eigen::MatrixXd design_block(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& psi) {
  if (scores.rows() != psi.rows()) {
    throw DimensionError("design_block: " + std::to_string(scores.rows()) + " score rows vs " +
                         std::to_string(psi.rows()) + " basis rows");
  }
  const Eigen::Index m1 = scores.cols();
  const Eigen::Index m2 = psi.cols();
  Eigen::MatrixXd z(scores.rows(), m1 * m2);
  for (Eigen::Index l = 0; l < m2; ++l) {
    z.middleCols(l * m1, m1) = psi.col(l).asDiagonal() * scores;
  }
  return z;
}

VCFLMDesign build_design(std::span<const FPCAResult> fpca_results, const Eigen::VectorXd& t,
                         const BSplineBasis& t_basis, const Eigen::VectorXd& y_raw) {
  const Eigen::Index n = y_raw.size();
  if (t.size() != n) {
    throw DimensionError("build_design: " + std::to_string(t.size()) + " exogenous values for " +
                         std::to_string(n) + " responses");
  }
  for (std::size_t j = 0; j < fpca_results.size(); ++j) {
    if (fpca_results[j].scores.rows() != n) {
      throw DimensionError("build_design: predictor " + std::to_string(j) + " has " +
                           std::to_string(fpca_results[j].scores.rows()) + " score rows, expected " +
                           std::to_string(n));
    }
  }
  VCFLMDesign d;
  d.t = t;
  d.t_basis = t_basis;
  // evaluate() raises DomainError for t outside the basis domain.
  const Eigen::MatrixXd psi = t_basis.evaluate(std::span<const double>(t.data(), static_cast<std::size_t>(n)));
  const Standardization st = standardization_of(y_raw);
  d.y_center = st.center;
  d.y_scale = st.scale;
  d.y = (y_raw.array() - st.center) / st.scale;
  for (const FPCAResult& f : fpca_results) {
    d.blocks.push_back(design_block(f.scores, psi));
    d.score_dims.push_back(f.components());
    d.group_dims.push_back(f.components() * t_basis.size());
  }
  return d;
}

Eigen::VectorXd fitted_to_response(const Standardization& st, const Eigen::VectorXd& fitted) {
  return (fitted.array() * st.scale + st.center).matrix();
}

Eigen::VectorXd fitted_to_response(const VCFLMDesign& design, const Eigen::VectorXd& fitted) {
  if (fitted.size() != design.samples()) {
    throw DimensionError("fitted_to_response: length " + std::to_string(fitted.size()) + ", expected " +
                         std::to_string(design.samples()));
  }
  return fitted_to_response(Standardization{design.y_center, design.y_scale}, fitted);
}

Eigen::VectorXd vec(const Eigen::MatrixXd& b) {
  return Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
}

Eigen::MatrixXd unvec(const Eigen::VectorXd& b, int rows, int cols) {
  if (b.size() != static_cast<Eigen::Index>(rows) * cols) {
    throw DimensionError("unvec: length " + std::to_string(b.size()) + " is not " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  return Eigen::Map<const Eigen::MatrixXd>(b.data(), rows, cols);
}

}  // namespace svcflm
