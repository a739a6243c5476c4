#include "svcflm/fpca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "svcflm/errors.hpp"

namespace svcflm {
namespace {

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (std::abs(v[k]) > best) {
      best = std::abs(v[k]);
      arg = k;
    }
  }
  if (v[arg] < 0.0) v = -v;
}

bool tied(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace

FPCAResult fpca(const FunctionalSample& sample, int components) {
  const Eigen::Index n = sample.coef.rows();
  const int m = sample.basis.size();
  if (sample.coef.cols() != m) {
    throw DimensionError("fpca: coefficient matrix has " + std::to_string(sample.coef.cols()) +
                         " columns, basis has " + std::to_string(m) + " functions");
  }
  if (n < 2) throw std::invalid_argument("fpca: need at least 2 curves");
  if (!sample.coef.allFinite()) throw std::invalid_argument("fpca: non-finite coefficients");
  const int max_components = static_cast<int>(std::min<Eigen::Index>(n, m));
  if (components < 1 || components > max_components) {
    throw std::out_of_range("fpca: components=" + std::to_string(components) + " not in [1, " +
                            std::to_string(max_components) + "]");
  }

  FPCAResult out{sample.basis, gram_matrix(sample.basis), {}, {}, {}, {}, {}};
  const Eigen::MatrixXd& gram = out.gram;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram_eig(gram);
  const Eigen::VectorXd gvals = gram_eig.eigenvalues();
  if (gvals.minCoeff() <= 1e-14 * std::max(1.0, gvals.maxCoeff())) {
    throw DecompositionError("fpca: Gram matrix is not positive definite (smallest eigenvalue " +
                             std::to_string(gvals.minCoeff()) + ")");
  }
  const Eigen::MatrixXd& gvecs = gram_eig.eigenvectors();
  const Eigen::MatrixXd gram_sqrt = gvecs * gvals.cwiseSqrt().asDiagonal() * gvecs.transpose();
  const Eigen::MatrixXd gram_isqrt = gvecs * gvals.cwiseSqrt().cwiseInverse().asDiagonal() * gvecs.transpose();

  out.mean_coef = sample.coef.colwise().mean().transpose();
  const Eigen::MatrixXd centered = sample.coef.rowwise() - out.mean_coef.transpose();

  Eigen::MatrixXd cov = gram_sqrt * (centered.transpose() * centered) * gram_sqrt / static_cast<double>(n);
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw DecompositionError("fpca: covariance eigendecomposition failed");

  // Descending order, sign-normalized eigenfunctions, ties broken by the
  // first differing coefficient.
  Eigen::MatrixXd funcs = gram_isqrt * eig.eigenvectors();
  for (Eigen::Index k = 0; k < funcs.cols(); ++k) fix_sign(funcs.col(k));
  const Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0);
  std::vector<Eigen::Index> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return vals[a] > vals[b]; });
  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo + 1;
    while (hi < order.size() && tied(vals[order[lo]], vals[order[hi]])) ++hi;
    if (hi - lo > 1) {
      std::sort(order.begin() + lo, order.begin() + hi, [&](Eigen::Index a, Eigen::Index b) {
        for (int r = 0; r < m; ++r) {
          if (funcs(r, a) != funcs(r, b)) return funcs(r, a) > funcs(r, b);
        }
        return a < b;
      });
    }
    lo = hi;
  }

  out.all_eigenvalues.resize(m);
  for (int k = 0; k < m; ++k) out.all_eigenvalues[k] = vals[order[k]];
  out.eigenvalues = out.all_eigenvalues.head(components);
  out.eigen_coef.resize(m, components);
  for (int k = 0; k < components; ++k) out.eigen_coef.col(k) = funcs.col(order[k]);
  out.scores = centered * gram * out.eigen_coef;
  return out;
}

int components_for_share(const Eigen::VectorXd& eigenvalues_desc, double share) {
  if (!(share > 0.0 && share <= 1.0)) throw std::invalid_argument("components_for_share: share must be in (0, 1]");
  const double total = eigenvalues_desc.sum();
  if (eigenvalues_desc.size() == 0) throw std::invalid_argument("components_for_share: no eigenvalues");
  if (!(total > 0.0)) return 1;
  double cumulative = 0.0;
  for (Eigen::Index k = 0; k < eigenvalues_desc.size(); ++k) {
    cumulative += eigenvalues_desc[k];
    // Small slack so share=1 is reachable despite rounding.
    if (cumulative >= share * total * (1.0 - 1e-12)) return static_cast<int>(k + 1);
  }
  return static_cast<int>(eigenvalues_desc.size());
}

FPCAResult fpca_by_share(const FunctionalSample& sample, double share) {
  const int max_components = static_cast<int>(std::min<Eigen::Index>(sample.coef.rows(), sample.basis.size()));
  FPCAResult full = fpca(sample, max_components);
  const int m1 = components_for_share(full.all_eigenvalues, share);
  full.eigenvalues.conservativeResize(m1);
  full.eigen_coef.conservativeResize(Eigen::NoChange, m1);
  full.scores.conservativeResize(Eigen::NoChange, m1);
  return full;
}

Eigen::VectorXd reconstruct(const FPCAResult& result, int i, int m) {
  if (i < 0 || i >= result.samples()) {
    throw std::out_of_range("reconstruct: sample index " + std::to_string(i) + " out of range");
  }
  if (m < 0 || m > result.components()) {
    throw std::out_of_range("reconstruct: m=" + std::to_string(m) + " exceeds " +
                            std::to_string(result.components()) + " components");
  }
  return result.mean_coef + result.eigen_coef.leftCols(m) * result.scores.row(i).head(m).transpose();
}

Eigen::VectorXd project_scores(const FPCAResult& result, const Eigen::VectorXd& coef) {
  if (coef.size() != result.mean_coef.size()) {
    throw DimensionError("project_scores: coefficient vector has length " + std::to_string(coef.size()) +
                         ", expected " + std::to_string(result.mean_coef.size()));
  }
  return result.eigen_coef.transpose() * (result.gram * (coef - result.mean_coef));
}

Eigen::MatrixXd project_scores(const FPCAResult& result, const Eigen::MatrixXd& coef) {
  if (coef.cols() != result.mean_coef.size()) {
    throw DimensionError("project_scores: coefficient matrix has " + std::to_string(coef.cols()) +
                         " columns, expected " + std::to_string(result.mean_coef.size()));
  }
  const Eigen::MatrixXd centered = coef.rowwise() - result.mean_coef.transpose();
  return centered * result.gram * result.eigen_coef;
}

}  // namespace svcflm
