#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "svcflm/basis.hpp"
#include "svcflm/solver.hpp"
#include "svcflm/tuning.hpp"

namespace svcflm {

/// Data-generating process of the Monte-Carlo study.
struct SimulationConfig {
  int n = 100;
  int p = 6;       // even; the first p/2 predictors are relevant
  int m1_gen = 5;  // generator B-spline basis size in s
  int m2_gen = 4;  // generator B-spline basis size in t
  int gen_order = 4;
  int n_points = 21;  // observations per curve
  double s = 0.1;     // response noise SD as a fraction of the signal range
  double predictor_noise_factor = 0.1;
  double s_lower = 0.0;
  double s_upper = 1.0;
  double t_lower = 0.0;
  double t_upper = 1.0;
  std::uint64_t seed = 1;
  int replicates = 20;
};

void validate(const SimulationConfig& config);

struct SyntheticDataset {
  BSplineBasis s_basis{0.0, 1.0, 1};  // generator basis for curves and beta in s
  BSplineBasis t_basis{0.0, 1.0, 1};  // generator basis for beta in t
  std::vector<double> time_points;    // shared observation grid s_1..s_N
  std::vector<Eigen::MatrixXd> w;     // per predictor: n x m1_gen true curve coefficients
  std::vector<Eigen::MatrixXd> x;     // per predictor: n x N noisy observations
  std::vector<Eigen::MatrixXd> B;     // per predictor: m1_gen x m2_gen
  Eigen::VectorXd t;
  Eigen::VectorXd f;  // noiseless signal
  Eigen::VectorXd y;
  double signal_range = 0.0;  // max f - min f
  double noise_sd = 0.0;
  std::vector<bool> true_active;

  int samples() const { return static_cast<int>(t.size()); }
  int predictors() const { return static_cast<int>(B.size()); }
  RawCurve curve(int j, int i) const;
};

/// Stream-split seed: replicate r draws the same data regardless of how
/// many other replicates run or in which order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replicate, std::uint64_t stream);

SyntheticDataset generate(const SimulationConfig& config, int replicate = 0);

/// f_i = sum_j int g_ij(s) beta_j(s, t_i) ds by composite Gauss-Legendre
/// quadrature (64 panels x 8 nodes) on the true curves.
Eigen::VectorXd true_signal(const BSplineBasis& s_basis, const BSplineBasis& t_basis,
                            std::span<const Eigen::MatrixXd> w, std::span<const Eigen::MatrixXd> B,
                            const Eigen::VectorXd& t);

double rmse(const Eigen::VectorXd& f_true, const Eigen::VectorXd& f_hat);

/// (APR %, ANR %). Throws std::domain_error when either denominator is zero.
std::pair<double, double> apr_anr(const std::vector<bool>& true_active, const std::vector<bool>& est_active);

enum class Method { svcflm, asvcflm, sflm, asflm };

inline constexpr Method kAllMethods[] = {Method::svcflm, Method::asvcflm, Method::sflm, Method::asflm};

std::string_view method_name(Method method);
bool is_adaptive(Method method);
bool is_varying(Method method);

/// Estimator settings shared by every method.
/// Study grid: the default grid widened with m2 in {2, 3}.
TuningGrid study_grid();

struct EstimatorConfig {
  int smooth_order = 4;
  int smooth_basis = 8;
  double fpca_share = 0.99;
  // > 0 overrides the share rule. Two components keep d_j = m1*m2 small
  // enough for BIC to admit weak groups at n in the low hundreds.
  int fpca_components = 2;
  int t_order = 4;
  // m2 = 1 entries feed the SFLM variants, m2 > 1 the SVCFLM variants
  TuningGrid grid = study_grid();
  FitOptions fit;
  PilotEstimator pilot = PilotEstimator::joint;
  DfNorm df_norm = DfNorm::theta;
  double max_df_fraction = 1.0;
};

/// Basis for psi(t): constant for m2 = 1, otherwise m2 uniform B-splines of
/// order min(order, m2).
BSplineBasis exogenous_basis(double lower, double upper, int m2, int order = 4);

struct ReplicateOutcome {
  int replicate = 0;
  Method method = Method::svcflm;
  bool ok = false;
  std::string error;
  double rmse = 0.0;
  double apr = 0.0;
  double anr = 0.0;
  int m2 = 0;
  double alpha = 0.0;
  double lambda = 0.0;
  int n_active = 0;
};

struct MethodSummary {
  Method method = Method::svcflm;
  double mean_rmse = 0.0;
  double sd_rmse = 0.0;  // divisor (count - 1); 0 for a single replicate
  double mean_apr = 0.0;
  double mean_anr = 0.0;
  int succeeded = 0;
  int failed = 0;
};

struct StudyReport {
  int n = 0;
  double s = 0.0;
  std::vector<MethodSummary> methods;
  std::vector<ReplicateOutcome> outcomes;  // replicate-major, methods in input order
};

/// Fits one replicate with one method: smooth, FPCA, BIC tuning.
ReplicateOutcome run_replicate(const SyntheticDataset& data, Method method, const EstimatorConfig& estimator);

/// Generates `config.replicates` datasets and fits every method to each.
/// Throws std::runtime_error only if every fit failed.
StudyReport run_study(const SimulationConfig& config, std::span<const Method> methods,
                      const EstimatorConfig& estimator, int threads = 1);

}  // namespace svcflm
