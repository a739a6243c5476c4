#include "svcflm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <tuple>

#include "svcflm/design.hpp"
#include "svcflm/errors.hpp"
#include "svcflm/fpca.hpp"
#include "svcflm/parallel.hpp"
#include "svcflm/quadrature.hpp"

namespace svcflm {
namespace {

enum Stream : std::uint64_t {
  kCoefficientMatrices = 1,
  kExogenous = 2,
  kCurveCoefficients = 3,
  kPredictorNoise = 4,
  kResponseNoise = 5,
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 engine(std::uint64_t master, int replicate, Stream stream, int index = 0) {
  const std::uint64_t base = derive_seed(master, static_cast<std::uint64_t>(replicate), stream);
  return std::mt19937_64(splitmix64(base ^ static_cast<std::uint64_t>(index)));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replicate, std::uint64_t stream) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ replicate);
  return splitmix64(h ^ (stream * 0x632be59bd9b4e019ULL));
}

void validate(const SimulationConfig& c) {
  if (c.n < 2) throw std::invalid_argument("simulation: n must be >= 2");
  if (c.p < 2 || c.p % 2 != 0) throw std::invalid_argument("simulation: p must be even and >= 2");
  if (c.gen_order < 1 || c.m1_gen < c.gen_order || c.m2_gen < 1) {
    throw std::invalid_argument("simulation: generator s-basis size must be >= the spline order, m2 >= 1");
  }
  if (c.n_points < c.m1_gen) throw std::invalid_argument("simulation: N must be >= the generator basis size");
  if (!(c.s >= 0.0) || !std::isfinite(c.s)) throw std::invalid_argument("simulation: s must be >= 0");
  if (!(c.predictor_noise_factor >= 0.0)) throw std::invalid_argument("simulation: predictor noise factor must be >= 0");
  if (!(c.s_lower < c.s_upper) || !(c.t_lower < c.t_upper)) throw std::invalid_argument("simulation: empty domain");
  if (c.replicates < 1) throw std::invalid_argument("simulation: replicates must be >= 1");
}

RawCurve SyntheticDataset::curve(int j, int i) const {
  const Eigen::MatrixXd& xj = x[static_cast<std::size_t>(j)];
  RawCurve c;
  c.time = time_points;
  c.value.resize(static_cast<std::size_t>(xj.cols()));
  for (Eigen::Index a = 0; a < xj.cols(); ++a) c.value[static_cast<std::size_t>(a)] = xj(i, a);
  return c;
}

Eigen::VectorXd true_signal(const BSplineBasis& s_basis, const BSplineBasis& t_basis,
                            std::span<const Eigen::MatrixXd> w, std::span<const Eigen::MatrixXd> B,
                            const Eigen::VectorXd& t) {
  if (w.size() != B.size()) throw DimensionError("true_signal: curve and coefficient counts differ");
  std::vector<double> breaks(65);
  for (int k = 0; k <= 64; ++k) {
    breaks[static_cast<std::size_t>(k)] = s_basis.lower() + (s_basis.upper() - s_basis.lower()) * k / 64.0;
  }
  breaks.back() = s_basis.upper();
  const QuadratureRule rule = composite_gauss_legendre(breaks, 8);
  const Eigen::MatrixXd phi = s_basis.evaluate(rule.nodes);  // Q x m1
  const Eigen::Map<const Eigen::VectorXd> qw(rule.weights.data(), static_cast<Eigen::Index>(rule.weights.size()));
  const Eigen::MatrixXd psi = t_basis.evaluate(std::span<const double>(t.data(), static_cast<std::size_t>(t.size())));

  Eigen::VectorXd f = Eigen::VectorXd::Zero(t.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    const Eigen::MatrixXd g = w[j] * phi.transpose();                 // n x Q curve values
    const Eigen::MatrixXd inner = g * qw.asDiagonal() * phi;           // n x m1: int g_ij phi^T
    f += ((inner * B[j]).array() * psi.array()).rowwise().sum().matrix();
  }
  return f;
}

SyntheticDataset generate(const SimulationConfig& c, int replicate) {
  validate(c);
  SyntheticDataset d;
  d.s_basis = BSplineBasis::uniform(c.s_lower, c.s_upper, c.gen_order, c.m1_gen);
  d.t_basis = exogenous_basis(c.t_lower, c.t_upper, c.m2_gen, c.gen_order);
  const int half = c.p / 2;

  d.time_points.resize(static_cast<std::size_t>(c.n_points));
  for (int a = 0; a < c.n_points; ++a) {
    d.time_points[static_cast<std::size_t>(a)] =
        c.n_points == 1 ? c.s_lower : c.s_lower + (c.s_upper - c.s_lower) * a / (c.n_points - 1);
  }
  d.time_points.back() = c.s_upper;
  const Eigen::MatrixXd phi_obs = d.s_basis.evaluate(d.time_points);  // N x m1

  std::normal_distribution<double> normal(0.0, 1.0);
  {
    auto rng = engine(c.seed, replicate, kCoefficientMatrices);
    for (int j = 0; j < c.p; ++j) {
      Eigen::MatrixXd b = Eigen::MatrixXd::Zero(c.m1_gen, d.t_basis.size());
      if (j < half) {
        for (Eigen::Index col = 0; col < b.cols(); ++col)
          for (Eigen::Index row = 0; row < b.rows(); ++row) b(row, col) = normal(rng);
      }
      d.B.push_back(std::move(b));
      d.true_active.push_back(j < half);
    }
  }
  {
    auto rng = engine(c.seed, replicate, kExogenous);
    std::uniform_real_distribution<double> uniform(c.t_lower, c.t_upper);
    d.t.resize(c.n);
    for (int i = 0; i < c.n; ++i) d.t[i] = uniform(rng);
  }
  for (int j = 0; j < c.p; ++j) {
    auto coef_rng = engine(c.seed, replicate, kCurveCoefficients, j);
    auto noise_rng = engine(c.seed, replicate, kPredictorNoise, j);
    Eigen::MatrixXd w(c.n, c.m1_gen);
    for (int i = 0; i < c.n; ++i)
      for (int k = 0; k < c.m1_gen; ++k) w(i, k) = normal(coef_rng);
    Eigen::MatrixXd x = w * phi_obs.transpose();  // n x N noiseless
    for (int i = 0; i < c.n; ++i) {
      const double range = x.row(i).maxCoeff() - x.row(i).minCoeff();
      const double tau = c.predictor_noise_factor * range;
      for (int a = 0; a < c.n_points; ++a) x(i, a) += tau * normal(noise_rng);
    }
    d.w.push_back(std::move(w));
    d.x.push_back(std::move(x));
  }

  d.f = true_signal(d.s_basis, d.t_basis, d.w, d.B, d.t);
  d.signal_range = d.f.maxCoeff() - d.f.minCoeff();
  d.noise_sd = c.s * d.signal_range;
  d.y = d.f;
  if (d.noise_sd > 0.0) {
    auto rng = engine(c.seed, replicate, kResponseNoise);
    for (int i = 0; i < c.n; ++i) d.y[i] += d.noise_sd * normal(rng);
  }
  return d;
}

double rmse(const Eigen::VectorXd& f_true, const Eigen::VectorXd& f_hat) {
  if (f_true.size() != f_hat.size() || f_true.size() == 0) {
    throw DimensionError("rmse: vectors must have equal, nonzero length");
  }
  return std::sqrt((f_true - f_hat).squaredNorm() / static_cast<double>(f_true.size()));
}

std::pair<double, double> apr_anr(const std::vector<bool>& true_active, const std::vector<bool>& est_active) {
  if (true_active.size() != est_active.size()) throw DimensionError("apr_anr: set sizes differ");
  int pos = 0, neg = 0, true_pos = 0, true_neg = 0;
  for (std::size_t j = 0; j < true_active.size(); ++j) {
    if (true_active[j]) {
      ++pos;
      if (est_active[j]) ++true_pos;
    } else {
      ++neg;
      if (!est_active[j]) ++true_neg;
    }
  }
  if (pos == 0 || neg == 0) throw std::domain_error("apr_anr: undefined metric (empty positive or negative set)");
  return {100.0 * true_pos / pos, 100.0 * true_neg / neg};
}

std::string_view method_name(Method method) {
  switch (method) {
    case Method::svcflm: return "SVCFLM";
    case Method::asvcflm: return "aSVCFLM";
    case Method::sflm: return "SFLM";
    case Method::asflm: return "aSFLM";
  }
  return "?";
}

bool is_adaptive(Method method) { return method == Method::asvcflm || method == Method::asflm; }
bool is_varying(Method method) { return method == Method::svcflm || method == Method::asvcflm; }

TuningGrid study_grid() {
  TuningGrid g;
  g.m2_values = {1, 2, 3, 4, 6, 8};
  return g;
}

BSplineBasis exogenous_basis(double lower, double upper, int m2, int order) {
  if (m2 < 1) throw std::invalid_argument("exogenous_basis: m2 must be >= 1");
  if (m2 == 1) return BSplineBasis::constant(lower, upper);
  return BSplineBasis::uniform(lower, upper, std::min(order, m2), m2);
}

ReplicateOutcome run_replicate(const SyntheticDataset& data, Method method, const EstimatorConfig& est) {
  ReplicateOutcome out;
  out.method = method;
  const int n = data.samples();
  const BSplineBasis smooth_basis =
      BSplineBasis::uniform(data.s_basis.lower(), data.s_basis.upper(), est.smooth_order, est.smooth_basis);

  std::vector<FPCAResult> fpcas;
  for (int j = 0; j < data.predictors(); ++j) {
    FunctionalSample sample{smooth_basis, Eigen::MatrixXd(n, smooth_basis.size())};
    for (int i = 0; i < n; ++i) sample.coef.row(i) = smooth_curve(data.curve(j, i), smooth_basis).transpose();
    if (est.fpca_components > 0) {
      fpcas.push_back(fpca(sample, std::min(est.fpca_components, std::min(n, smooth_basis.size()))));
    } else {
      fpcas.push_back(fpca_by_share(sample, est.fpca_share));
    }
  }

  TuningGrid grid = est.grid;
  grid.m2_values.clear();
  for (int m2 : est.grid.m2_values) {
    if (is_varying(method) ? m2 > 1 : m2 == 1) grid.m2_values.push_back(m2);
  }
  if (grid.m2_values.empty()) grid.m2_values.push_back(is_varying(method) ? 4 : 1);

  const double t_lower = data.t_basis.lower();
  const double t_upper = data.t_basis.upper();
  const DesignBuilder builder = [&](int m2) {
    return build_design(fpcas, data.t, exogenous_basis(t_lower, t_upper, m2, est.t_order), data.y);
  };
  SelectOptions options;
  options.adaptive = is_adaptive(method);
  options.pilot = est.pilot;
  options.df_norm = est.df_norm;
  options.fit = est.fit;
  options.max_df_fraction = est.max_df_fraction;

  const Selection sel = select(builder, grid, options);
  const Eigen::VectorXd f_hat = fitted_to_response(sel.design, sel.fit.fitted);
  out.rmse = rmse(data.f, f_hat);
  std::tie(out.apr, out.anr) = apr_anr(data.true_active, sel.fit.active);
  out.m2 = sel.m2;
  out.alpha = sel.penalty.alpha;
  out.lambda = sel.penalty.lambda;
  out.n_active = sel.fit.n_active();
  out.ok = true;
  return out;
}

StudyReport run_study(const SimulationConfig& config, std::span<const Method> methods,
                      const EstimatorConfig& estimator, int threads) {
  validate(config);
  if (methods.empty()) throw std::invalid_argument("run_study: no methods");
  const std::size_t n_methods = methods.size();
  std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(config.replicates) * n_methods);

  parallel_for(static_cast<std::size_t>(config.replicates), threads, [&](std::size_t r) {
    const int replicate = static_cast<int>(r);
    std::optional<SyntheticDataset> data;
    std::string data_error;
    try {
      data = generate(config, replicate);
    } catch (const std::exception& e) {
      data_error = e.what();
    }
    for (std::size_t k = 0; k < n_methods; ++k) {
      ReplicateOutcome& slot = outcomes[r * n_methods + k];
      if (!data) {
        slot.replicate = replicate;
        slot.method = methods[k];
        slot.error = data_error;
        continue;
      }
      try {
        slot = run_replicate(*data, methods[k], estimator);
      } catch (const std::exception& e) {
        slot = ReplicateOutcome{};
        slot.method = methods[k];
        slot.error = e.what();
      }
      slot.replicate = replicate;
    }
  });

  StudyReport report;
  report.n = config.n;
  report.s = config.s;
  bool any_ok = false;
  for (std::size_t k = 0; k < n_methods; ++k) {
    MethodSummary sum;
    sum.method = methods[k];
    std::vector<double> errors;
    double apr = 0.0, anr = 0.0;
    for (std::size_t r = 0; r < static_cast<std::size_t>(config.replicates); ++r) {
      const ReplicateOutcome& o = outcomes[r * n_methods + k];
      if (!o.ok) {
        ++sum.failed;
        continue;
      }
      ++sum.succeeded;
      errors.push_back(o.rmse);
      apr += o.apr;
      anr += o.anr;
    }
    if (sum.succeeded > 0) {
      any_ok = true;
      const double count = static_cast<double>(sum.succeeded);
      double total = 0.0;
      for (double e : errors) total += e;
      sum.mean_rmse = total / count;
      double ss = 0.0;
      for (double e : errors) ss += (e - sum.mean_rmse) * (e - sum.mean_rmse);
      sum.sd_rmse = sum.succeeded > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
      sum.mean_apr = apr / count;
      sum.mean_anr = anr / count;
    } else {
      sum.mean_rmse = sum.sd_rmse = sum.mean_apr = sum.mean_anr = std::nan("");
    }
    report.methods.push_back(sum);
  }
  report.outcomes = std::move(outcomes);
  if (!any_ok) {
    std::string msg = "run_study: every replicate failed";
    for (const auto& o : report.outcomes) {
      if (!o.error.empty()) {
        msg += "; first error: " + o.error;
        break;
      }
    }
    throw std::runtime_error(msg);
  }
  return report;
}

}  // namespace svcflm
