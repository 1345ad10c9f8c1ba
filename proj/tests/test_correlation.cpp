#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "gpsm/common.hpp"
#include "gpsm/correlation.hpp"
#include "gpsm/simlab.hpp"
#include "support.hpp"

using namespace gpsm;

namespace {

std::vector<double> normals(testing::Rng& g, int n) {
  std::vector<double> v(n);
  for (auto& e : v) e = testing::normal(g);
  return v;
}

// Arm-restricted copy keeping only the listed covariates.
Dataset arm_columns(const Dataset& ds, const std::vector<int>& cols) {
  Eigen::MatrixXd x(ds.n(), static_cast<Eigen::Index>(cols.size()));
  std::vector<std::string> names;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    x.col(static_cast<Eigen::Index>(k)) = ds.x.col(cols[k]);
    names.push_back(ds.names[cols[k]]);
  }
  return make_dataset(ds.y, ds.w, x, names, ds.t);
}

}  // namespace

TEST_CASE("ball covariance matches the cubic definition") {
  testing::Rng g(31);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = testing::uniform_int(g, 3, 30);
    std::vector<double> x(n), y(n);
    for (int k = 0; k < n; ++k) {
      // Mix of continuous values and heavy ties.
      x[k] = trial % 2 ? testing::normal(g) : testing::uniform_int(g, 0, 4);
      y[k] = trial % 3 ? x[k] * x[k] + testing::normal(g) : testing::uniform_int(g, 0, 3);
    }
    CHECK(std::abs(ball_cov(x, y) - testing::brute_ball_cov(x, y)) < 1e-12);
    CHECK(std::abs(ball_cov(x, y) - ball_cov(y, x)) < 1e-12);
  }
}

TEST_CASE("ball covariance of a constant is zero") {
  const std::vector<double> c(8, 2.5), y{1, 5, 2, 8, 3, 3, 9, 0};
  CHECK(ball_cov(c, y) == 0.0);
  CHECK(ball_cov(y, c) == 0.0);
  CHECK_THROWS_AS(ball_cor(c, y), NumericalError);
}

TEST_CASE("ball correlation of a variable with itself is one") {
  testing::Rng g(32);
  for (int n : {5, 20, 100}) {
    const auto x = normals(g, n);
    CHECK(ball_cor(x, x) == 1.0);
  }
}

TEST_CASE("ball covariance is invariant under joint permutation of pairs") {
  testing::Rng g(33);
  const auto x = normals(g, 25);
  auto y = normals(g, 25);
  for (int k = 0; k < 25; ++k) y[k] += x[k];
  std::vector<int> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), g);
  std::vector<double> px(25), py(25);
  for (int k = 0; k < 25; ++k) {
    px[k] = x[perm[k]];
    py[k] = y[perm[k]];
  }
  CHECK(std::abs(ball_cov(x, y) - ball_cov(px, py)) < 1e-12);
}

TEST_CASE("ball correlation separates independence from quadratic dependence") {
  testing::Rng g(34);
  const int n = 200, seeds = 100;
  std::vector<double> indep;
  int below = 0;
  for (int s = 0; s < seeds; ++s) {
    const auto x = normals(g, n), y = normals(g, n);
    const double r = ball_cor(x, y);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    below += r < 0.1;
    indep.push_back(r);
  }
  CHECK(below >= 95);
  std::sort(indep.begin(), indep.end());
  const double q99 = indep[98];
  for (int s = 0; s < 10; ++s) {
    const auto x = normals(g, n);
    std::vector<double> y(n);
    for (int k = 0; k < n; ++k) y[k] = x[k] * x[k];
    CHECK(ball_cor(x, y) > q99);
  }
}

TEST_CASE("permutation test: identical inputs give the minimum p-value") {
  testing::Rng g(35);
  const auto x = normals(g, 100);
  CHECK(ball_test(x, x, 99, 7) == 1.0 / 100.0);
}

TEST_CASE("permutation test is deterministic in the seed") {
  testing::Rng g(36);
  const auto x = normals(g, 40), y = normals(g, 40);
  CHECK(ball_test(x, y, 99, 11) == ball_test(x, y, 99, 11));
  CHECK_THROWS_AS(ball_test(std::vector<double>(5, 1.0), std::vector<double>(5, 1.0), 9, 1), ValidationError);
}

TEST_CASE("permutation test rejects at roughly the nominal rate under independence") {
  testing::Rng g(37);
  int rejected = 0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    const auto x = normals(g, 30), y = normals(g, 30);
    rejected += ball_test(x, y, 99, derive_seed(99, s)) < 0.05;
  }
  const double rate = rejected / static_cast<double>(seeds);
  CHECK(rate > 0.01);
  CHECK(rate < 0.10);
}

TEST_CASE("rho_ols recovers an exact linear relation") {
  testing::Rng g(38);
  const int n = 60;
  Eigen::MatrixXd x(n, 3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) x(i, j) = testing::normal(g);
  const Eigen::VectorXd y = 3.0 * x.col(0);
  const Dataset ds = make_dataset(y, testing::random_arms(g, n, 2), x, {"a", "b", "c"}, 2);
  const RhoProfile r = rho_ols(ds, 1);
  CHECK(r.rho[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(r.raw[1] < 1e-10);
  CHECK(r.raw[2] < 1e-10);
  CHECK(r.rho[1] >= kRhoFloor);
  CHECK(r.delta == doctest::Approx(std::cbrt(60.0)));
}

TEST_CASE("delta is the cube root of the full sample size") {
  testing::Rng g(39);
  const Dataset ds = testing::random_dataset(g, 1000, 3, 2);
  CHECK(rho_ols(ds, 2).delta == 10.0);
}

TEST_CASE("rho_ols scales with the covariate standardization") {
  testing::Rng g(40);
  Dataset ds = testing::random_dataset(g, 120, 2, 3);
  ds.x.col(1) *= 5.0;
  ds.x.col(2) = ds.x.col(2).array() * 0.3 + 2.0;
  const Dataset s = standardize(ds);
  const RhoProfile raw = rho_ols(ds, 1), st = rho_ols(s, 1);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(st.raw[j] - raw.raw[j] * s.scale[j]) < 1e-10);
}

TEST_CASE("rho_ols names collinear columns") {
  testing::Rng g(41);
  Dataset ds = testing::random_dataset(g, 40, 2, 3);
  ds.x.col(2) = ds.x.col(0) * 2.0;
  CHECK_THROWS_WITH_AS(rho_ols(ds, 1), doctest::Contains("collinear"), NumericalError);
}

TEST_CASE("linear simulation arm: precision covariates near v, noise near zero") {
  Scenario sc;
  sc.n_per_arm = 2000;
  const Dataset ds = generate(sc, 0);
  const RhoProfile r = rho_ols(ds, 1);
  for (int j : {5, 6, 7}) CHECK(r.raw[j] == doctest::Approx(2.0).epsilon(0.05));
  CHECK(r.raw[8] < 0.1);
}

TEST_CASE("threshold edge rules") {
  const std::vector<double> rho{0.2, 0.8, 0.6};
  CHECK(bcor_threshold(rho, {0}, {1}) == 0.5);
  CHECK(1.0 / (0.5 * 0.5) == 4.0);
  CHECK(bcor_threshold(rho, {}, {1, 2}) == 0.3);
  CHECK(bcor_threshold(rho, {0, 2}, {}) == 0.3);
}

TEST_CASE("rho_ball on the nonlinear design splits precision from noise") {
  // Reduced scale: 20 seeds with 99 permutations each.
  Scenario sc;
  sc.outcome = OutcomeForm::Nonlinear;
  int hits = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    sc.base_seed = derive_seed(4242, s);
    const Dataset ds = arm_columns(generate(sc, 0), {5, 6, 7, 8});
    BallOptions opts;
    opts.permutations = 99;
    opts.seed = s;
    const RhoProfile r = rho_ball(ds, 1, opts);
    hits += r.h1 == std::vector<int>{0, 1, 2} && r.h0 == std::vector<int>{3};
    CHECK(std::abs(1.0 / r.bcor_star - r.delta * r.bcor_star) <= 1e-12 / r.bcor_star);
  }
  CHECK(hits >= 18);
}
