#include "svcflm/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "svcflm/errors.hpp"
#include "svcflm/parallel.hpp"

namespace svcflm {

double effective_df(const FitResult& fit, const PenaltySpec& penalty, DfNorm norm) {
  double df = 0.0;
  for (std::size_t j = 0; j < fit.theta.size(); ++j) {
    if (!fit.active[j]) continue;
    const double size = norm == DfNorm::theta ? fit.theta[j].norm() : fit.b[j].norm();
    if (!(size > 0.0)) continue;
    const double omega = penalty.alpha * penalty.lambda * penalty.weights[static_cast<Eigen::Index>(j)] / size +
                         (1.0 - penalty.alpha) * penalty.lambda;
    df += static_cast<double>(fit.theta[j].size()) / (1.0 + omega);
  }
  return df;
}

double residual_variance(const FitResult& fit, const Eigen::VectorXd& y) {
  if (fit.fitted.size() != y.size()) {
    throw DimensionError("residual_variance: fitted values and response differ in length");
  }
  const double sigma2 = (y - fit.fitted).squaredNorm() / static_cast<double>(y.size());
  return std::max(sigma2, kSigma2Floor);
}

double bic(const FitResult& fit, const Eigen::VectorXd& y, double df) {
  if (y.size() < 2) throw std::invalid_argument("bic: need n > 1");
  const double n = static_cast<double>(y.size());
  return n * std::log(residual_variance(fit, y)) + df * std::log(n);
}

double lambda_max(const OrthogonalizedDesign& orth, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                  double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("lambda_max: alpha must be > 0; supply lambdas explicitly");
  if (weights.size() != orth.groups()) throw DimensionError("lambda_max: weight count does not match groups");
  double out = 0.0;
  for (int j = 0; j < orth.groups(); ++j) {
    const double corr = (orth.u[static_cast<std::size_t>(j)].transpose() * y).norm();
    if (corr == 0.0) continue;
    const double nd = static_cast<double>(orth.n);
    double lam = corr / (nd * alpha * weights[j]);
    // step up until the block threshold (same arithmetic) actually zeroes it
    while (nd * alpha * lam * weights[j] < corr) lam = std::nextafter(lam, INFINITY);
    out = std::max(out, lam);
  }
  return out;
}

std::vector<double> default_lambda_grid(const OrthogonalizedDesign& orth, const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& weights, double alpha, int n_points, double ratio) {
  if (n_points < 2) throw std::invalid_argument("default_lambda_grid: n_points must be >= 2");
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("default_lambda_grid: ratio must be in (0, 1)");
  const double top = lambda_max(orth, y, weights, alpha);
  if (!(top > 0.0)) throw std::invalid_argument("default_lambda_grid: response is orthogonal to every group");
  std::vector<double> grid(static_cast<std::size_t>(n_points));
  const double log_ratio = std::log(ratio);
  grid.front() = top;
  for (int k = 1; k < n_points - 1; ++k) {
    grid[static_cast<std::size_t>(k)] = top * std::exp(log_ratio * k / (n_points - 1));
  }
  grid.back() = top * ratio;
  return grid;
}

namespace {

void check_grid(const TuningGrid& grid) {
  if (grid.alphas.empty() || grid.m2_values.empty()) throw std::invalid_argument("select: empty tuning grid");
  for (double a : grid.alphas) {
    if (!(a > 0.0 && a <= 1.0)) throw std::invalid_argument("select: alphas must lie in (0, 1]");
  }
  for (int m2 : grid.m2_values) {
    if (m2 < 1) throw std::invalid_argument("select: m2 values must be >= 1");
  }
  for (std::size_t k = 0; k < grid.lambdas.size(); ++k) {
    if (!(grid.lambdas[k] > 0.0)) throw std::invalid_argument("select: lambdas must be > 0");
    if (k > 0 && !(grid.lambdas[k] < grid.lambdas[k - 1])) {
      throw std::invalid_argument("select: lambdas must be strictly descending");
    }
  }
}

struct Prepared {
  std::optional<VCFLMDesign> design;
  OrthogonalizedDesign orth;
  Eigen::VectorXd weights;
  std::string error;
};

struct PathResult {
  std::vector<TuningRow> rows;
  std::optional<FitResult> best_fit;
  std::size_t best_row = 0;
  PenaltySpec best_penalty;
  std::string error;
};

bool better(const TuningRow& a, const TuningRow& b) {
  if (a.bic != b.bic) return a.bic < b.bic;
  return a.lambda > b.lambda;
}

}  // namespace

Selection select(const DesignBuilder& build, const TuningGrid& grid, const SelectOptions& options) {
  check_grid(grid);

  std::vector<Prepared> prepared(grid.m2_values.size());
  parallel_for(prepared.size(), options.threads, [&](std::size_t k) {
    Prepared& slot = prepared[k];
    try {
      slot.design = build(grid.m2_values[k]);
      slot.orth = orthogonalize(*slot.design);
      slot.weights = options.adaptive ? adaptive_weights(slot.orth, slot.design->y, options.pilot)
                                      : Eigen::VectorXd::Ones(slot.orth.groups());
    } catch (const std::exception& e) {
      slot.design.reset();
      slot.error = e.what();
    }
  });

  const std::size_t n_alpha = grid.alphas.size();
  std::vector<PathResult> paths(prepared.size() * n_alpha);
  parallel_for(paths.size(), options.threads, [&](std::size_t idx) {
    const Prepared& prep = prepared[idx / n_alpha];
    const double alpha = grid.alphas[idx % n_alpha];
    const int m2 = grid.m2_values[idx / n_alpha];
    PathResult& path = paths[idx];
    if (!prep.design) {
      path.error = prep.error;
      return;
    }
    try {
      const Eigen::VectorXd& y = prep.design->y;
      const std::vector<double> lambdas =
          grid.lambdas.empty()
              ? default_lambda_grid(prep.orth, y, prep.weights, alpha, grid.n_lambda, grid.lambda_ratio)
              : grid.lambdas;
      std::optional<FitResult> previous;
      for (double lambda : lambdas) {
        PenaltySpec penalty{lambda, alpha, prep.weights};
        FitResult result = fit(prep.orth, y, penalty, options.fit, previous ? &previous->theta : nullptr);
        TuningRow row;
        row.m2 = m2;
        row.alpha = alpha;
        row.lambda = lambda;
        row.df = effective_df(result, penalty, options.df_norm);
        row.sigma2 = residual_variance(result, y);
        row.bic = bic(result, y, row.df);
        row.n_active = result.n_active();
        if (row.df >= options.max_df_fraction * static_cast<double>(y.size())) break;
        path.rows.push_back(row);
        if (!path.best_fit || better(row, path.rows[path.best_row])) {
          path.best_row = path.rows.size() - 1;
          path.best_fit = result;
          path.best_penalty = penalty;
        }
        previous = std::move(result);
      }
    } catch (const std::exception& e) {
      path.rows.clear();
      path.best_fit.reset();
      path.error = e.what();
    }
  });

  Selection out;
  std::optional<std::size_t> best_path;
  std::size_t best_global_row = 0;
  for (std::size_t idx = 0; idx < paths.size(); ++idx) {
    PathResult& path = paths[idx];
    if (!path.error.empty() || !path.best_fit) {
      std::ostringstream msg;
      msg << "m2=" << grid.m2_values[idx / n_alpha] << " alpha=" << grid.alphas[idx % n_alpha] << ": "
          << (path.error.empty() ? "no lambda values" : path.error);
      out.report.failures.push_back(msg.str());
      continue;
    }
    const std::size_t offset = out.report.rows.size();
    out.report.rows.insert(out.report.rows.end(), path.rows.begin(), path.rows.end());
    if (!best_path || better(path.rows[path.best_row], out.report.rows[best_global_row])) {
      best_path = idx;
      best_global_row = offset + path.best_row;
    }
  }
  if (!best_path) {
    std::ostringstream msg;
    msg << "select: every tuning combination failed";
    for (const auto& f : out.report.failures) msg << "\n  " << f;
    throw std::runtime_error(msg.str());
  }
  PathResult& winner = paths[*best_path];
  out.report.best = best_global_row;
  out.fit = std::move(*winner.best_fit);
  out.penalty = winner.best_penalty;
  out.m2 = grid.m2_values[*best_path / n_alpha];
  out.design = std::move(*prepared[*best_path / n_alpha].design);
  return out;
}

}  // namespace svcflm
