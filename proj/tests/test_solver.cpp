#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "svcflm/errors.hpp"
#include "svcflm/solver.hpp"
#include "svcflm/tuning.hpp"

using namespace svcflm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<MatrixXd> random_blocks(std::mt19937_64& rng, int n, std::vector<int> dims) {
  std::vector<MatrixXd> out;
  for (int d : dims) out.push_back(oracle::gaussian(rng, n, d));
  return out;
}

// y built from the first `signal` groups plus unit-variance noise scaled by `noise`.
VectorXd response(std::mt19937_64& rng, const std::vector<MatrixXd>& blocks, int signal, double noise) {
  VectorXd y = noise * oracle::gaussian_vector(rng, blocks.front().rows());
  for (int j = 0; j < signal; ++j) y += blocks[static_cast<std::size_t>(j)] * oracle::gaussian_vector(rng, blocks[static_cast<std::size_t>(j)].cols());
  return y;
}

VectorXd stacked(const std::vector<VectorXd>& parts) {
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.size();
  VectorXd out(total);
  Eigen::Index col = 0;
  for (const auto& p : parts) {
    out.segment(col, p.size()) = p;
    col += p.size();
  }
  return out;
}

FitOptions tight() { return FitOptions{1e-12, 100000}; }

}  // namespace

TEST_CASE("orthogonalize: already orthogonal and single-column blocks") {
  const int n = 8;
  MatrixXd h = MatrixXd::Zero(n, 2);
  for (int i = 0; i < n; ++i) {
    h(i, 0) = 1.0;
    h(i, 1) = i % 2 ? 1.0 : -1.0;
  }
  // columns of +-1 entries: Z^T Z = n I
  const OrthogonalizedDesign o = orthogonalize(std::vector<MatrixXd>{h});
  CHECK((o.u[0] - h).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((o.r[0] - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);

  // ||z||^2 = 4n
  const MatrixXd z = 2.0 * h.col(1);
  const OrthogonalizedDesign o1 = orthogonalize(std::vector<MatrixXd>{z});
  CHECK((o1.u[0] - z / 2.0).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(o1.r[0](0, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("property: orthogonalize gives U^T U = n I, upper-triangular R with positive diagonal, U R = Z") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 20 + 10 * rep;
    const auto blocks = random_blocks(rng, n, {6, 1, 3 + rep % 4});
    const OrthogonalizedDesign o = orthogonalize(blocks);
    REQUIRE(o.groups() == 3);
    for (int j = 0; j < 3; ++j) {
      const auto& u = o.u[static_cast<std::size_t>(j)];
      const auto& r = o.r[static_cast<std::size_t>(j)];
      const auto d = u.cols();
      CHECK((u.transpose() * u - n * MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-10 * n);
      CHECK((o.block(j) - blocks[static_cast<std::size_t>(j)]).cwiseAbs().maxCoeff() < 1e-10);
      for (Eigen::Index a = 0; a < d; ++a) {
        CHECK(r(a, a) > 0.0);
        for (Eigen::Index b = 0; b < a; ++b) CHECK(r(a, b) == 0.0);
      }
    }
  }
}

TEST_CASE("orthogonalize: rank-deficient block names the group") {
  std::mt19937_64 rng(2);
  auto blocks = random_blocks(rng, 15, {3, 3});
  blocks[1].col(2) = blocks[1].col(0) - 2.0 * blocks[1].col(1);
  try {
    orthogonalize(blocks);
    FAIL("expected SingularFitError");
  } catch (const SingularFitError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("group 1") != std::string::npos);
    CHECK(msg.find("singular value") != std::string::npos);
  }
  CHECK_THROWS_AS(orthogonalize(random_blocks(rng, 3, {4})), SingularFitError);
  auto mismatched = random_blocks(rng, 10, {2});
  mismatched.push_back(oracle::gaussian(rng, 9, 2));
  CHECK_THROWS_AS(orthogonalize(mismatched), DimensionError);
}

TEST_CASE("soft_threshold_group examples") {
  const VectorXd x = (VectorXd(2) << 3.0, 4.0).finished();
  CHECK(soft_threshold_group(x, 5.0) == VectorXd::Zero(2));
  CHECK(soft_threshold_group(x, 7.0) == VectorXd::Zero(2));
  CHECK(soft_threshold_group(x, 0.0) == x);
  const VectorXd s = soft_threshold_group(x, 2.0);
  CHECK(s[0] == doctest::Approx(1.8).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(2.4).epsilon(1e-15));
  CHECK(soft_threshold_group(VectorXd::Zero(3), 0.0) == VectorXd::Zero(3));
}

TEST_CASE("property: soft threshold shrinks the norm by exactly kappa and keeps the direction") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int rep = 0; rep < 200; ++rep) {
    const VectorXd x = oracle::gaussian_vector(rng, 1 + rep % 6);
    const double kappa = u(rng);
    const VectorXd s = soft_threshold_group(x, kappa);
    if (x.norm() <= kappa) {
      CHECK(s.norm() == 0.0);
    } else {
      CHECK(std::abs(s.norm() - (x.norm() - kappa)) < 1e-12);
      CHECK(std::abs(s.dot(x) - s.norm() * x.norm()) < 1e-10);
    }
  }
}

TEST_CASE("adaptive weights: single orthonormal group with ||U theta|| = 2") {
  const int n = 16;
  MatrixXd h(n, 2);
  for (int i = 0; i < n; ++i) {
    h(i, 0) = 1.0;
    h(i, 1) = (i / 2) % 2 ? 1.0 : -1.0;
  }
  const OrthogonalizedDesign o = orthogonalize(std::vector<MatrixXd>{h});
  // ||U theta|| = sqrt(n) ||theta|| = 2
  const VectorXd theta = (VectorXd(2) << 0.3, 0.4).finished() * (2.0 / (std::sqrt(16.0) * 0.5));
  const VectorXd y = o.u[0] * theta;
  CHECK(adaptive_weights(o, y)[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(adaptive_weights(o, y, PilotEstimator::per_group)[0] == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("adaptive weights: a response orthogonal to every column gets the cap") {
  const int n = 8;
  MatrixXd z = MatrixXd::Zero(n, 2);
  for (int i = 0; i < n; ++i) z(i, i % 2) = 1.0;
  VectorXd y = VectorXd::Zero(n);
  y[0] = 1.0;
  y[2] = -1.0;
  const OrthogonalizedDesign o = orthogonalize(std::vector<MatrixXd>{z});
  CHECK(adaptive_weights(o, y)[0] == kWeightCap);
}

TEST_CASE("adaptive weights agree with an SVD pseudoinverse pilot") {
  std::mt19937_64 rng(4);
  SUBCASE("correlated groups, n > D") {
    auto blocks = random_blocks(rng, 40, {3, 3});
    blocks[1] += 0.8 * blocks[0];
    const VectorXd y = response(rng, blocks, 2, 0.5);
    const VectorXd w = adaptive_weights(orthogonalize(blocks), y);
    const VectorXd ref = oracle::pinv_weights(blocks, y);
    CHECK(((w - ref).array() / ref.array()).abs().maxCoeff() < 1e-8);
  }
  SUBCASE("D > n: minimum-norm pilot") {
    const auto blocks = random_blocks(rng, 12, {5, 5, 5});
    const VectorXd y = response(rng, blocks, 1, 0.3);
    const VectorXd w = adaptive_weights(orthogonalize(blocks), y);
    const VectorXd ref = oracle::pinv_weights(blocks, y);
    CHECK(((w - ref).array() / ref.array()).abs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("block update examples") {
  const VectorXd c = (VectorXd(2) << 8.0, 6.0).finished();
  // lambda = 0: plain least squares in the orthonormal coordinates
  CHECK((block_update_from_correlation(c, 4, 0.0, 1.0, 1.0) - c / 4.0).cwiseAbs().maxCoeff() == 0.0);
  // n alpha lambda w = 10 >= ||c||
  CHECK(block_update_from_correlation(c, 4, 2.5, 1.0, 1.0) == VectorXd::Zero(2));
  // kappa = 4 * 0.5 * 1 * 1 = 2, denom = 4 * 0.5 * 1 + 4 = 6 -> (8,6)*0.8/6
  const VectorXd en = block_update_from_correlation(c, 4, 1.0, 0.5, 1.0);
  CHECK(en[0] == doctest::Approx(6.4 / 6.0).epsilon(1e-15));
  CHECK(en[1] == doctest::Approx(4.8 / 6.0).epsilon(1e-15));
  // kappa = 2, alpha = 1: (8,6) * 0.8 / 4
  const VectorXd lasso = block_update_from_correlation(c, 4, 0.5, 1.0, 1.0);
  CHECK(lasso[0] == 1.6);
  CHECK(lasso[1] == 1.2);
}

TEST_CASE("property: the block update minimizes the one-block objective") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto blocks = random_blocks(rng, 25, {2, 3});
  const OrthogonalizedDesign o = orthogonalize(blocks);
  for (int rep = 0; rep < 50; ++rep) {
    const VectorXd r = oracle::gaussian_vector(rng, 25);
    const PenaltySpec pen{0.5 * u(rng), u(rng), (VectorXd(2) << 0.5 + u(rng), 0.5 + u(rng)).finished()};
    const int j = rep % 2;
    const VectorXd th = block_update(j, r, o, pen);
    const auto obj = [&](const VectorXd& v) {
      return (r - o.u[static_cast<std::size_t>(j)] * v).squaredNorm() / 50.0 + pen.alpha * pen.lambda * pen.weights[j] * v.norm() +
             0.5 * (1.0 - pen.alpha) * pen.lambda * v.squaredNorm();
    };
    const double best = obj(th);
    for (int k = 0; k < 20; ++k) CHECK(obj(th + 1e-3 * oracle::gaussian_vector(rng, th.size())) >= best - 1e-14);
  }
  CHECK_THROWS_AS(block_update(2, VectorXd::Zero(25), o, PenaltySpec{0.1, 1.0, VectorXd::Ones(2)}), std::out_of_range);
  CHECK_THROWS_AS(block_update(0, VectorXd::Zero(25), o, PenaltySpec{0.1, 1.0, VectorXd::Ones(3)}), DimensionError);
  CHECK_THROWS_AS(block_update(0, VectorXd::Zero(25), o, PenaltySpec{0.1, 1.5, VectorXd::Ones(2)}), std::invalid_argument);
  CHECK_THROWS_AS(block_update(0, VectorXd::Zero(25), o, PenaltySpec{-0.1, 1.0, VectorXd::Ones(2)}), std::invalid_argument);
}

TEST_CASE("fit: large lambda gives the zero fit immediately") {
  std::mt19937_64 rng(6);
  const auto blocks = random_blocks(rng, 30, {3, 2});
  const VectorXd y = response(rng, blocks, 2, 0.1);
  const OrthogonalizedDesign o = orthogonalize(blocks);
  const FitResult f = fit(o, y, PenaltySpec{1e6, 1.0, VectorXd::Ones(2)});
  CHECK(f.n_active() == 0);
  CHECK(f.converged);
  CHECK(f.sweeps <= 2);
  CHECK(f.fitted == VectorXd::Zero(30));
}

TEST_CASE("fit: one group at lambda = 0 is least squares after one sweep") {
  std::mt19937_64 rng(7);
  const auto blocks = random_blocks(rng, 30, {4});
  const VectorXd y = response(rng, blocks, 1, 1.0);
  const OrthogonalizedDesign o = orthogonalize(blocks);
  const FitResult one = fit(o, y, PenaltySpec{0.0, 1.0, VectorXd::Ones(1)}, FitOptions{1e-12, 1});
  CHECK((one.theta[0] - o.u[0].transpose() * y / 30.0).cwiseAbs().maxCoeff() < 1e-12);
  const FitResult f = fit(o, y, PenaltySpec{0.0, 1.0, VectorXd::Ones(1)});
  CHECK(f.converged);
  CHECK(f.sweeps == 2);
  const VectorXd ls = blocks[0] * blocks[0].colPivHouseholderQr().solve(y);
  CHECK((f.fitted - ls).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((blocks[0] * f.b[0] - ls).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit agrees with an independent FISTA solver") {
  std::mt19937_64 rng(8);
  for (double alpha : {0.5, 1.0, 0.0}) {
    const auto blocks = random_blocks(rng, 30, {4, 4, 4});
    const VectorXd y = response(rng, blocks, 2, 0.5);
    const OrthogonalizedDesign o = orthogonalize(blocks);
    const VectorXd w = (VectorXd(3) << 1.0, 0.7, 1.5).finished();
    const FitResult f = fit(o, y, PenaltySpec{0.1, alpha, w}, tight());
    REQUIRE(f.converged);
    const VectorXd ref = oracle::fista(o, y, 0.1, alpha, w);
    CHECK((stacked(f.theta) - ref).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("fit: errors and non-convergence") {
  std::mt19937_64 rng(9);
  const auto blocks = random_blocks(rng, 20, {2, 2});
  const OrthogonalizedDesign o = orthogonalize(blocks);
  CHECK_THROWS_AS(fit(o, VectorXd::Constant(20, 1e300), PenaltySpec{0.0, 1.0, VectorXd::Ones(2)}), NumericError);
  CHECK_THROWS_AS(fit(o, VectorXd::Zero(19), PenaltySpec{0.0, 1.0, VectorXd::Ones(2)}), DimensionError);
  CHECK_THROWS_AS(fit(o, VectorXd::Zero(20), PenaltySpec{0.0, 1.0, VectorXd::Ones(2)}, FitOptions{0.0, 10}),
                  std::invalid_argument);
  // strongly correlated groups need many sweeps; one is not enough
  auto corr = random_blocks(rng, 20, {2, 2});
  corr[1] = corr[0] + 0.05 * corr[1];
  const VectorXd y = response(rng, corr, 2, 0.1);
  const FitResult f = fit(orthogonalize(corr), y, PenaltySpec{1e-4, 1.0, VectorXd::Ones(2)}, FitOptions{1e-12, 1});
  CHECK_FALSE(f.converged);
  CHECK(f.sweeps == 1);
}

TEST_CASE("property: objective trace is nonincreasing and the converged fit satisfies KKT") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 30 + rep;
    auto blocks = random_blocks(rng, n, {2 + rep % 3, 4, 1, 3});
    blocks[1] += 0.5 * oracle::gaussian(rng, n, 1).replicate(1, 4);
    const VectorXd y = response(rng, blocks, 2, 0.5);
    const OrthogonalizedDesign o = orthogonalize(blocks);
    const VectorXd w = (0.5 + u(rng)) * VectorXd::Ones(4) + 0.3 * oracle::uniform_vector(rng, 4);
    const double alpha = rep % 3 == 0 ? 1.0 : u(rng);
    const double lmax = lambda_max(o, y, w, std::max(alpha, 1e-3));
    const PenaltySpec pen{lmax * (0.02 + 0.5 * u(rng)), alpha, w};
    const FitResult f = fit(o, y, pen, tight());
    REQUIRE(f.converged);
    for (std::size_t k = 1; k < f.objective_trace.size(); ++k) {
      CHECK(f.objective_trace[k] <= f.objective_trace[k - 1] + 1e-12);
    }
    CHECK(f.objective_trace.back() == doctest::Approx(working_objective(o, y, pen, f.theta)).epsilon(1e-12));
    const KktReport kkt = check_kkt(o, y, pen, f, 1e-6);
    CHECK(kkt.ok);
    // the fitted vector in both coordinate systems
    VectorXd zb = VectorXd::Zero(n);
    for (int j = 0; j < 4; ++j) {
      zb += blocks[static_cast<std::size_t>(j)] * f.b[static_cast<std::size_t>(j)];
      const VectorXd back = o.r[static_cast<std::size_t>(j)] * f.b[static_cast<std::size_t>(j)];
      CHECK((back - f.theta[static_cast<std::size_t>(j)]).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(f.active[static_cast<std::size_t>(j)] == (f.theta[static_cast<std::size_t>(j)].norm() > 0.0));
    }
    CHECK((zb - f.fitted).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("property: group permutation equivariance") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const auto blocks = random_blocks(rng, 40, {2, 3, 2, 4});
    const VectorXd y = response(rng, blocks, 3, 0.5);
    const VectorXd w = oracle::uniform_vector(rng, 4, 0.5, 1.5);
    std::vector<int> perm{0, 1, 2, 3};
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<MatrixXd> pb;
    VectorXd pw(4);
    for (int k = 0; k < 4; ++k) {
      pb.push_back(blocks[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])]);
      pw[k] = w[perm[static_cast<std::size_t>(k)]];
    }
    const double alpha = 0.6;
    const FitResult a = fit(orthogonalize(blocks), y, PenaltySpec{0.05, alpha, w}, tight());
    const FitResult b = fit(orthogonalize(pb), y, PenaltySpec{0.05, alpha, pw}, tight());
    for (int k = 0; k < 4; ++k) {
      CHECK((a.b[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] - b.b[static_cast<std::size_t>(k)]).cwiseAbs().maxCoeff() <
            1e-8);
    }
  }
}

TEST_CASE("property: lambda_max is the smallest lambda with an all-zero fit") {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    const auto blocks = random_blocks(rng, 35, {3, 2, 4});
    const VectorXd y = response(rng, blocks, 1 + rep % 3, 1.0);
    const OrthogonalizedDesign o = orthogonalize(blocks);
    const VectorXd w = oracle::uniform_vector(rng, 3, 0.5, 2.0);
    const double alpha = rep % 2 ? 1.0 : 0.5;
    const double lmax = lambda_max(o, y, w, alpha);
    CHECK(fit(o, y, PenaltySpec{lmax, alpha, w}).n_active() == 0);
    CHECK(fit(o, y, PenaltySpec{0.99 * lmax, alpha, w}).n_active() >= 1);
    CHECK(oracle::bisect_lambda_max(o, y, alpha, w, 10.0 * lmax) == doctest::Approx(lmax).epsilon(1e-8));
  }
}

TEST_CASE("coefficient_surface: zero, constant and loop oracle") {
  std::mt19937_64 rng(13);
  const std::vector<double> gs{0.0, 0.2, 0.55, 1.0}, gt{0.0, 0.4, 1.0};
  const FPCAResult f = fpca(oracle::random_sample(rng, 20, 6), 3);
  const BSplineBasis tb = BSplineBasis::uniform(0.0, 1.0, 3, 4);
  CHECK(coefficient_surface(VectorXd::Zero(12), f, tb, gs, gt) == MatrixXd::Zero(4, 3));

  // m1 = m2 = 1: beta(s, t) = b * phi_1(s)
  const FPCAResult f1 = fpca(oracle::random_sample(rng, 20, 6), 1);
  const MatrixXd s1 = coefficient_surface(VectorXd::Constant(1, 2.5), f1, BSplineBasis::constant(0.0, 1.0), gs, gt);
  for (std::size_t a = 0; a < gs.size(); ++a) {
    const double phi = f1.basis.evaluate(gs[a]).dot(f1.eigen_coef.col(0));
    for (Eigen::Index c = 0; c < 3; ++c) CHECK(s1(static_cast<Eigen::Index>(a), c) == doctest::Approx(2.5 * phi).epsilon(1e-13));
  }

  for (int rep = 0; rep < 5; ++rep) {
    const VectorXd b = oracle::gaussian_vector(rng, 12);
    CHECK((coefficient_surface(b, f, tb, gs, gt) - oracle::surface_loops(b, f, tb, gs, gt)).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK_THROWS_AS(coefficient_surface(VectorXd::Zero(12), f, tb, std::vector<double>{1.5}, gt), DomainError);
  CHECK_THROWS_AS(coefficient_surface(VectorXd::Zero(11), f, tb, gs, gt), DimensionError);
}

namespace {

struct Problem {
  std::vector<FunctionalSample> samples;
  VectorXd t;
  VectorXd f;  // noiseless signal
  VectorXd y;
};

// Curves in a cubic basis, truth beta_j(s, t) = phi(s)^T G_j psi(t) with
// the curves centered at `center` (the training mean when scoring new data).
Problem make_problem(std::mt19937_64& rng, int n, const std::vector<MatrixXd>& g, const BSplineBasis& tb,
                     double noise, const std::vector<VectorXd>* center) {
  Problem p;
  p.t = oracle::uniform_vector(rng, n);
  p.f = VectorXd::Zero(n);
  const MatrixXd psi = tb.evaluate(std::span<const double>(p.t.data(), static_cast<std::size_t>(n)));
  for (std::size_t j = 0; j < g.size(); ++j) {
    FunctionalSample s = oracle::random_sample(rng, n, static_cast<int>(g[j].rows()));
    const VectorXd mu = center ? (*center)[j] : VectorXd(s.coef.colwise().mean().transpose());
    const MatrixXd w = gram_matrix(s.basis);
    const MatrixXd centered = s.coef.rowwise() - mu.transpose();
    p.f += ((centered * w * g[j]).array() * psi.array()).rowwise().sum().matrix();
    p.samples.push_back(std::move(s));
  }
  p.y = p.f + noise * oracle::gaussian_vector(rng, n);
  return p;
}

FittedModel train(const Problem& p, const BSplineBasis& tb, double lambda, FitResult* out = nullptr,
                  VCFLMDesign* design_out = nullptr) {
  FittedModel model;
  for (const auto& s : p.samples) model.fpca.push_back(fpca(s, s.basis.size()));
  model.t_basis = tb;
  const VCFLMDesign d = build_design(model.fpca, p.t, tb, p.y);
  const OrthogonalizedDesign o = orthogonalize(d);
  const FitResult f = fit(o, d.y, PenaltySpec{lambda, 0.5, VectorXd::Ones(d.groups())}, tight());
  model.b = f.b;
  model.standardization = Standardization{d.y_center, d.y_scale};
  if (out) *out = f;
  if (design_out) *design_out = d;
  return model;
}

}  // namespace

TEST_CASE("predict: training curves reproduce the fitted values") {
  std::mt19937_64 rng(14);
  const BSplineBasis tb = BSplineBasis::uniform(0.0, 1.0, 2, 3);
  const std::vector<MatrixXd> g{oracle::gaussian(rng, 5, 3), MatrixXd::Zero(6, 3)};
  const Problem p = make_problem(rng, 60, g, tb, 0.2, nullptr);
  FitResult f;
  VCFLMDesign d;
  const FittedModel model = train(p, tb, 0.01, &f, &d);
  std::vector<MatrixXd> coef;
  for (const auto& s : p.samples) coef.push_back(s.coef);
  const VectorXd pred = predict_from_coefficients(model, coef, p.t);
  CHECK((pred - fitted_to_response(d, f.fitted)).cwiseAbs().maxCoeff() < 1e-10);

  // through raw curves sampled exactly on the basis
  std::vector<std::vector<RawCurve>> curves(2);
  std::vector<double> grid;
  for (int a = 0; a <= 20; ++a) grid.push_back(a / 20.0);
  for (std::size_t j = 0; j < 2; ++j) {
    const MatrixXd phi = p.samples[j].basis.evaluate(grid);
    for (int i = 0; i < 60; ++i) {
      const VectorXd v = phi * p.samples[j].coef.row(i).transpose();
      curves[j].push_back(RawCurve{grid, std::vector<double>(v.data(), v.data() + v.size())});
    }
  }
  CHECK((predict(model, curves, p.t) - pred).cwiseAbs().maxCoeff() < 1e-8);

  VectorXd outside = p.t;
  outside[3] = 1.2;
  try {
    predict_from_coefficients(model, coef, outside);
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("extrapolation") != std::string::npos);
  }
  CHECK_THROWS_AS(predict_from_coefficients(model, std::vector<MatrixXd>{coef[0]}, p.t), DimensionError);
}

TEST_CASE("predict: a zero fit predicts the response center") {
  std::mt19937_64 rng(15);
  const BSplineBasis tb = BSplineBasis::constant(0.0, 1.0);
  const Problem p = make_problem(rng, 30, {oracle::gaussian(rng, 5, 1)}, tb, 0.1, nullptr);
  FitResult f;
  VCFLMDesign d;
  const FittedModel model = train(p, tb, 1e6, &f, &d);
  REQUIRE(f.n_active() == 0);
  const VectorXd pred = predict_from_coefficients(model, std::vector<MatrixXd>{p.samples[0].coef}, p.t);
  CHECK((pred.array() - d.y_center).abs().maxCoeff() < 1e-12);
}

TEST_CASE("predict: out-of-sample error shrinks as n grows") {
  std::mt19937_64 rng(16);
  const BSplineBasis tb = BSplineBasis::uniform(0.0, 1.0, 2, 2);
  const std::vector<MatrixXd> g{oracle::gaussian(rng, 6, 2), oracle::gaussian(rng, 6, 2)};
  const auto error_at = [&](int n) {
    double total = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      const Problem train_p = make_problem(rng, n, g, tb, 0.1, nullptr);
      const FittedModel model = train(train_p, tb, 1e-8);
      std::vector<VectorXd> means;
      for (const auto& f : model.fpca) means.push_back(f.mean_coef);
      const Problem test_p = make_problem(rng, 200, g, tb, 0.0, &means);
      std::vector<MatrixXd> coef;
      for (const auto& s : test_p.samples) coef.push_back(s.coef);
      total += std::sqrt((predict_from_coefficients(model, coef, test_p.t) - test_p.f).squaredNorm() / 200.0);
    }
    return total / 5.0;
  };
  const double small = error_at(50), large = error_at(800);
  MESSAGE("out-of-sample RMSE n=50: " << small << ", n=800: " << large);
  CHECK(large < 0.5 * small);
  CHECK(large < 0.05);
}
