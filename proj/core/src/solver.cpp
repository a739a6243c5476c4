#include "svcflm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "svcflm/errors.hpp"

namespace svcflm {
namespace {

void check_penalty(const PenaltySpec& penalty, int groups) {
  if (!(penalty.lambda >= 0.0) || !std::isfinite(penalty.lambda)) {
    throw std::invalid_argument("penalty: lambda must be finite and >= 0");
  }
  if (!(penalty.alpha >= 0.0 && penalty.alpha <= 1.0)) {
    throw std::invalid_argument("penalty: alpha must be in [0, 1]");
  }
  if (penalty.weights.size() != groups) {
    throw DimensionError("penalty: " + std::to_string(penalty.weights.size()) + " weights for " +
                         std::to_string(groups) + " groups");
  }
  if ((penalty.weights.array() < 0.0).any() || !penalty.weights.allFinite()) {
    throw std::invalid_argument("penalty: weights must be finite and >= 0");
  }
}

void check_response(const OrthogonalizedDesign& orth, const Eigen::VectorXd& y) {
  if (y.size() != orth.n) {
    throw DimensionError("response has length " + std::to_string(y.size()) + ", design has " +
                         std::to_string(orth.n) + " rows");
  }
}

}  // namespace

OrthogonalizedDesign orthogonalize(std::span<const Eigen::MatrixXd> blocks) {
  OrthogonalizedDesign out;
  if (blocks.empty()) return out;
  out.n = static_cast<int>(blocks.front().rows());
  const double root_n = std::sqrt(static_cast<double>(out.n));
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const Eigen::MatrixXd& z = blocks[j];
    if (z.rows() != out.n) {
      throw DimensionError("orthogonalize: group " + std::to_string(j) + " has " + std::to_string(z.rows()) +
                           " rows, expected " + std::to_string(out.n));
    }
    const Eigen::Index d = z.cols();
    if (d == 0 || d > z.rows()) {
      throw SingularFitError("orthogonalize: group " + std::to_string(j) + " has " + std::to_string(d) +
                             " columns for " + std::to_string(z.rows()) + " rows");
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(z.rows(), d);
    Eigen::MatrixXd r = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();

    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues();
    const double smallest = sv[d - 1];
    if (!(smallest > 1e-10 * std::max(sv[0], 1e-300))) {
      std::ostringstream msg;
      msg << "orthogonalize: group " << j << " is rank deficient (smallest singular value " << smallest
          << "); reduce m1 or m2";
      throw SingularFitError(msg.str());
    }
    // Positive diagonal makes the factorization unique.
    for (Eigen::Index k = 0; k < d; ++k) {
      if (r(k, k) < 0.0) {
        r.row(k) *= -1.0;
        q.col(k) *= -1.0;
      }
    }
    out.u.push_back(q * root_n);
    out.r.push_back(r / root_n);
  }
  return out;
}

OrthogonalizedDesign orthogonalize(const VCFLMDesign& design) {
  OrthogonalizedDesign out = orthogonalize(std::span<const Eigen::MatrixXd>(design.blocks));
  if (design.blocks.empty()) out.n = design.samples();
  return out;
}

Eigen::VectorXd soft_threshold_group(const Eigen::VectorXd& x, double kappa) {
  const double norm = x.norm();
  if (norm <= kappa || norm == 0.0) return Eigen::VectorXd::Zero(x.size());
  return (x.array() * (norm - kappa) / norm).matrix();
}

Eigen::VectorXd adaptive_weights(const OrthogonalizedDesign& orth, const Eigen::VectorXd& y, PilotEstimator pilot) {
  check_response(orth, y);
  const int p = orth.groups();
  Eigen::VectorXd w(p);
  std::vector<Eigen::VectorXd> fitted(static_cast<std::size_t>(p));
  if (pilot == PilotEstimator::per_group) {
    for (int j = 0; j < p; ++j) {
      const auto& u = orth.u[static_cast<std::size_t>(j)];
      fitted[static_cast<std::size_t>(j)] = u * (u.transpose() * y) / static_cast<double>(orth.n);
    }
  } else {
    Eigen::Index total = 0;
    for (int j = 0; j < p; ++j) total += orth.dim(j);
    Eigen::MatrixXd z(orth.n, total);
    Eigen::Index col = 0;
    for (int j = 0; j < p; ++j) {
      z.middleCols(col, orth.dim(j)) = orth.block(j);
      col += orth.dim(j);
    }
    const Eigen::VectorXd b = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(z).solve(y);
    col = 0;
    for (int j = 0; j < p; ++j) {
      fitted[static_cast<std::size_t>(j)] = z.middleCols(col, orth.dim(j)) * b.segment(col, orth.dim(j));
      col += orth.dim(j);
    }
  }
  for (int j = 0; j < p; ++j) {
    const double norm = fitted[static_cast<std::size_t>(j)].norm();
    w[j] = norm < 1e-12 ? kWeightCap : std::min(1.0 / norm, kWeightCap);
  }
  return w;
}

Eigen::VectorXd block_update_from_correlation(const Eigen::VectorXd& correlation, int n, double lambda, double alpha,
                                              double weight) {
  const double nd = static_cast<double>(n);
  const double kappa = nd * alpha * lambda * weight;
  const double denom = nd * (1.0 - alpha) * lambda + nd;
  return soft_threshold_group(correlation, kappa) / denom;
}

Eigen::VectorXd block_update(int j, const Eigen::VectorXd& partial_residual, const OrthogonalizedDesign& orth,
                             const PenaltySpec& penalty) {
  check_penalty(penalty, orth.groups());
  check_response(orth, partial_residual);
  if (j < 0 || j >= orth.groups()) throw std::out_of_range("block_update: group index out of range");
  const auto& u = orth.u[static_cast<std::size_t>(j)];
  return block_update_from_correlation(u.transpose() * partial_residual, orth.n, penalty.lambda, penalty.alpha,
                                       penalty.weights[j]);
}

int FitResult::n_active() const {
  return static_cast<int>(std::count(active.begin(), active.end(), true));
}

double working_objective(const OrthogonalizedDesign& orth, const Eigen::VectorXd& y, const PenaltySpec& penalty,
                         std::span<const Eigen::VectorXd> theta) {
  Eigen::VectorXd r = y;
  double group_norms = 0.0;
  double ridge = 0.0;
  for (int j = 0; j < orth.groups(); ++j) {
    const auto& th = theta[static_cast<std::size_t>(j)];
    r.noalias() -= orth.u[static_cast<std::size_t>(j)] * th;
    const double norm = th.norm();
    if (norm > 0.0) group_norms += penalty.weights[j] * norm;
    ridge += th.squaredNorm();
  }
  return r.squaredNorm() / (2.0 * orth.n) + penalty.alpha * penalty.lambda * group_norms +
         0.5 * (1.0 - penalty.alpha) * penalty.lambda * ridge;
}

FitResult fit(const OrthogonalizedDesign& orth, const Eigen::VectorXd& y, const PenaltySpec& penalty,
              const FitOptions& options, const std::vector<Eigen::VectorXd>* warm_start) {
  check_response(orth, y);
  check_penalty(penalty, orth.groups());
  if (!(options.tol > 0.0)) throw std::invalid_argument("fit: tol must be > 0");
  if (options.max_sweeps < 1) throw std::invalid_argument("fit: max_sweeps must be >= 1");

  const int p = orth.groups();
  FitResult out;
  out.theta.resize(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    auto& th = out.theta[static_cast<std::size_t>(j)];
    if (warm_start != nullptr) {
      if (static_cast<int>(warm_start->size()) != p || (*warm_start)[static_cast<std::size_t>(j)].size() != orth.dim(j)) {
        throw DimensionError("fit: warm start does not match the design");
      }
      th = (*warm_start)[static_cast<std::size_t>(j)];
    } else {
      th = Eigen::VectorXd::Zero(orth.dim(j));
    }
  }

  Eigen::VectorXd r = y;
  for (int j = 0; j < p; ++j) {
    if (out.theta[static_cast<std::size_t>(j)].squaredNorm() > 0.0) {
      r.noalias() -= orth.u[static_cast<std::size_t>(j)] * out.theta[static_cast<std::size_t>(j)];
    }
  }

  const double nd = static_cast<double>(orth.n);
  const double ridge_factor = 0.5 * (1.0 - penalty.alpha) * penalty.lambda;
  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    double max_change = 0.0;
    double group_norms = 0.0;
    double ridge = 0.0;
    for (int j = 0; j < p; ++j) {
      const auto& u = orth.u[static_cast<std::size_t>(j)];
      auto& th = out.theta[static_cast<std::size_t>(j)];
      const bool was_zero = th.squaredNorm() == 0.0;
      if (!was_zero) r.noalias() += u * th;
      Eigen::VectorXd updated =
          block_update_from_correlation(u.transpose() * r, orth.n, penalty.lambda, penalty.alpha, penalty.weights[j]);
      max_change = std::max(max_change, (updated - th).cwiseAbs().maxCoeff());
      th = std::move(updated);
      const double norm = th.norm();
      if (norm > 0.0) {
        r.noalias() -= u * th;
        group_norms += penalty.weights[j] * norm;
        ridge += norm * norm;
      }
    }
    const double objective =
        r.squaredNorm() / (2.0 * nd) + penalty.alpha * penalty.lambda * group_norms + ridge_factor * ridge;
    if (!std::isfinite(objective)) {
      throw NumericError("fit: objective became non-finite at sweep " + std::to_string(sweep));
    }
    out.objective_trace.push_back(objective);
    out.sweeps = sweep;
    if (max_change < options.tol) {
      out.converged = true;
      break;
    }
  }

  out.fitted = Eigen::VectorXd::Zero(orth.n);
  out.b.resize(static_cast<std::size_t>(p));
  out.active.resize(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    const auto& th = out.theta[static_cast<std::size_t>(j)];
    out.active[static_cast<std::size_t>(j)] = th.squaredNorm() > 0.0;
    out.b[static_cast<std::size_t>(j)] = orth.r[static_cast<std::size_t>(j)].triangularView<Eigen::Upper>().solve(th);
    if (out.active[static_cast<std::size_t>(j)]) out.fitted.noalias() += orth.u[static_cast<std::size_t>(j)] * th;
  }
  return out;
}

KktReport check_kkt(const OrthogonalizedDesign& orth, const Eigen::VectorXd& y, const PenaltySpec& penalty,
                    const FitResult& fit, double tol) {
  KktReport report;
  const double nd = static_cast<double>(orth.n);
  const Eigen::VectorXd residual = y - fit.fitted;
  for (int j = 0; j < orth.groups(); ++j) {
    const auto& u = orth.u[static_cast<std::size_t>(j)];
    const auto& th = fit.theta[static_cast<std::size_t>(j)];
    const Eigen::VectorXd corr = u.transpose() * (residual + u * th);
    const double norm = th.norm();
    if (norm > 0.0) {
      const Eigen::VectorXd grad = (1.0 + (1.0 - penalty.alpha) * penalty.lambda) * th - corr / nd +
                                   penalty.alpha * penalty.lambda * penalty.weights[j] * th / norm;
      report.active_residual = std::max(report.active_residual, grad.cwiseAbs().maxCoeff());
      if (!(grad.cwiseAbs().maxCoeff() < tol)) report.ok = false;
    } else {
      const double threshold = nd * penalty.alpha * penalty.lambda * penalty.weights[j];
      const double cn = corr.norm();
      const double ratio = threshold > 0.0 ? cn / threshold : (cn > 0.0 ? INFINITY : 0.0);
      report.inactive_ratio = std::max(report.inactive_ratio, ratio);
      if (!(cn <= threshold * (1.0 + tol))) report.ok = false;
    }
  }
  return report;
}

Eigen::MatrixXd coefficient_surface(const Eigen::VectorXd& b_j, const FPCAResult& fpca_j,
                                    const BSplineBasis& t_basis, std::span<const double> grid_s,
                                    std::span<const double> grid_t) {
  const int m1 = fpca_j.components();
  const int m2 = t_basis.size();
  const Eigen::MatrixXd b = unvec(b_j, m1, m2);
  const Eigen::MatrixXd phi = fpca_j.basis.evaluate(grid_s) * fpca_j.eigen_coef;  // |s| x m1
  const Eigen::MatrixXd psi = t_basis.evaluate(grid_t);                        // |t| x m2
  return phi * b * psi.transpose();
}

Eigen::VectorXd predict_from_coefficients(const FittedModel& model, std::span<const Eigen::MatrixXd> coef,
                                          const Eigen::VectorXd& t) {
  const std::size_t p = model.fpca.size();
  if (coef.size() != p || model.b.size() != p) {
    throw DimensionError("predict: expected " + std::to_string(p) + " predictors, got " +
                         std::to_string(coef.size()));
  }
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!model.t_basis.contains(t[i])) {
      std::ostringstream msg;
      msg << "predict: t=" << t[i] << " outside the training domain [" << model.t_basis.lower() << ", "
          << model.t_basis.upper() << "] (extrapolation)";
      throw DomainError(msg.str());
    }
  }
  const Eigen::MatrixXd psi = model.t_basis.evaluate(std::span<const double>(t.data(), static_cast<std::size_t>(t.size())));
  Eigen::VectorXd fitted = Eigen::VectorXd::Zero(t.size());
  for (std::size_t j = 0; j < p; ++j) {
    if (coef[j].rows() != t.size()) {
      throw DimensionError("predict: predictor " + std::to_string(j) + " has " + std::to_string(coef[j].rows()) +
                           " curves for " + std::to_string(t.size()) + " exogenous values");
    }
    const Eigen::MatrixXd scores = project_scores(model.fpca[j], coef[j]);
    fitted.noalias() += design_block(scores, psi) * model.b[j];
  }
  return fitted_to_response(model.standardization, fitted);
}

Eigen::VectorXd predict(const FittedModel& model, const std::vector<std::vector<RawCurve>>& curves,
                        const Eigen::VectorXd& t) {
  std::vector<Eigen::MatrixXd> coef;
  coef.reserve(curves.size());
  for (std::size_t j = 0; j < curves.size() && j < model.fpca.size(); ++j) {
    const BSplineBasis& basis = model.fpca[j].basis;
    Eigen::MatrixXd c(static_cast<Eigen::Index>(curves[j].size()), basis.size());
    for (std::size_t i = 0; i < curves[j].size(); ++i) {
      c.row(static_cast<Eigen::Index>(i)) = smooth_curve(curves[j][i], basis).transpose();
    }
    coef.push_back(std::move(c));
  }
  if (curves.size() != model.fpca.size()) {
    throw DimensionError("predict: expected " + std::to_string(model.fpca.size()) + " predictors, got " +
                         std::to_string(curves.size()));
  }
  return predict_from_coefficients(model, coef, t);
}

}  // namespace svcflm
