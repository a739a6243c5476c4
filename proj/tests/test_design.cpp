#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "svcflm/design.hpp"
#include "svcflm/errors.hpp"
#include "svcflm/simulation.hpp"

using namespace svcflm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<FPCAResult> random_fpcas(std::mt19937_64& rng, int n, std::vector<int> m1) {
  std::vector<FPCAResult> out;
  for (int m : m1) out.push_back(fpca(oracle::random_sample(rng, n, 7), m));
  return out;
}

}  // namespace

TEST_CASE("design_block: SFLM reduction and the ones column") {
  std::mt19937_64 rng(1);
  const MatrixXd scores = oracle::gaussian(rng, 9, 3);
  CHECK(design_block(scores, MatrixXd::Ones(9, 1)) == scores);
  const MatrixXd ones = design_block(MatrixXd::Ones(4, 1), MatrixXd::Ones(4, 1));
  CHECK(ones == MatrixXd::Ones(4, 1));
  CHECK_THROWS_AS(design_block(scores, MatrixXd::Ones(8, 1)), DimensionError);
}

TEST_CASE("design_block matches the explicit Kronecker loop") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const MatrixXd scores = oracle::gaussian(rng, 5, 2 + rep % 3);
    const MatrixXd psi = oracle::gaussian(rng, 5, 1 + rep % 4);
    CHECK((design_block(scores, psi) - oracle::kron_block(scores, psi)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("build_design: dimensions and standardized response") {
  std::mt19937_64 rng(3);
  const int n = 30;
  const auto fp = random_fpcas(rng, n, {2, 3, 1});
  const VectorXd t = oracle::uniform_vector(rng, n);
  const VectorXd y = 5.0 + 3.0 * oracle::gaussian_vector(rng, n).array();
  const BSplineBasis tb = BSplineBasis::uniform(0.0, 1.0, 3, 4);
  const VCFLMDesign d = build_design(fp, t, tb, y);
  CHECK(d.groups() == 3);
  CHECK(d.samples() == n);
  CHECK(d.group_dims == std::vector<int>{8, 12, 4});
  CHECK(d.score_dims == std::vector<int>{2, 3, 1});
  CHECK(std::abs(d.y.mean()) < 1e-10);
  CHECK(std::abs(d.y.squaredNorm() / n - 1.0) < 1e-10);
  CHECK((fitted_to_response(d, d.y) - y).cwiseAbs().maxCoeff() < 1e-10);
  const MatrixXd psi = tb.evaluate(std::span<const double>(t.data(), n));
  for (int j = 0; j < 3; ++j) CHECK(d.blocks[static_cast<std::size_t>(j)] == design_block(fp[static_cast<std::size_t>(j)].scores, psi));
}

TEST_CASE("build_design: errors") {
  std::mt19937_64 rng(4);
  const auto fp = random_fpcas(rng, 10, {2});
  const BSplineBasis tb = BSplineBasis::uniform(0.0, 1.0, 2, 3);
  const VectorXd y = oracle::gaussian_vector(rng, 10);
  CHECK_THROWS_AS(build_design(fp, VectorXd::Constant(9, 0.5), tb, y), DimensionError);
  CHECK_THROWS_AS(build_design(fp, VectorXd::Constant(10, 1.5), tb, y), DomainError);
  CHECK_THROWS_AS(build_design(fp, VectorXd::Constant(10, 0.5), tb, VectorXd::Constant(10, 2.0)),
                  std::invalid_argument);
  const auto other = random_fpcas(rng, 11, {2});
  std::vector<FPCAResult> mixed{fp[0], other[0]};
  CHECK_THROWS_AS(build_design(mixed, VectorXd::Constant(10, 0.5), tb, y), DimensionError);
}

TEST_CASE("fitted_to_response arithmetic") {
  const Standardization st{3.0, 2.0};
  const VectorXd out = fitted_to_response(st, (VectorXd(2) << 1.0, -1.0).finished());
  CHECK(out[0] == 5.0);
  CHECK(out[1] == 1.0);
  CHECK(fitted_to_response(st, VectorXd::Zero(4)) == VectorXd::Constant(4, 3.0));
  const Standardization s2 = standardization_of((VectorXd(4) << 1.0, 2.0, 3.0, 6.0).finished());
  CHECK(s2.center == doctest::Approx(3.0));
  CHECK(s2.scale == doctest::Approx(std::sqrt(3.5)));
}

TEST_CASE("vec / unvec are column-major inverses") {
  MatrixXd b(2, 3);
  b << 1, 2, 3, 4, 5, 6;
  const VectorXd v = vec(b);
  CHECK(v == (VectorXd(6) << 1, 4, 2, 5, 3, 6).finished());
  CHECK(unvec(v, 2, 3) == b);
  CHECK_THROWS_AS(unvec(v, 4, 2), DimensionError);
}

TEST_CASE("property: Z_j vec(B_j) equals the integral of the centered curve against beta_j(., t_i)") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 12, m = 6 + rep % 3, m1 = 1 + rep % 4, m2 = 1 + rep % 3;
    const FunctionalSample sample = oracle::random_sample(rng, n, m);
    const FPCAResult f = fpca(sample, m1);
    const BSplineBasis tb = m2 == 1 ? BSplineBasis::constant(0.0, 1.0) : BSplineBasis::uniform(0.0, 1.0, 2, m2);
    const VectorXd t = oracle::uniform_vector(rng, n);
    const MatrixXd B = oracle::gaussian(rng, m1, m2);
    const MatrixXd psi = tb.evaluate(std::span<const double>(t.data(), n));
    const VectorXd lhs = design_block(f.scores, psi) * vec(B);
    for (int i = 0; i < n; ++i) {
      const VectorXd centered = sample.coef.row(i).transpose() - f.mean_coef;
      const VectorXd bt = B * tb.evaluate(t[i]);
      const auto integrand = [&](double s) {
        const VectorXd phi_s = sample.basis.evaluate(s);
        const double x = phi_s.dot(centered);
        const double beta = (f.eigen_coef.transpose() * phi_s).dot(bt);
        return x * beta;
      };
      double rhs = 0.0;
      const auto bp = sample.basis.breakpoints();
      for (std::size_t q = 0; q + 1 < bp.size(); ++q) rhs += oracle::simpson(integrand, bp[q], bp[q + 1], 50);
      CHECK(std::abs(lhs[i] - rhs) < 1e-6);
    }
  }
}
