#include "doctest.h"
#include "gpsm/mnlogit.hpp"
#include "support.hpp"

using namespace gpsm;

namespace {

// Three arms with a logistic dependence on the first two covariates.
Dataset logit_dataset(testing::Rng& g, int n, int d) {
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = testing::normal(g);
  std::vector<int> w(n);
  for (int i = 0; i < n; ++i) {
    const double e2 = std::exp(0.3 + 0.8 * x(i, 0)), e3 = std::exp(-0.2 + 0.5 * x(i, 1) - 0.4 * x(i, 0));
    const double u = testing::uniform(g) * (1 + e2 + e3);
    w[i] = u < 1 ? 1 : (u < 1 + e2 ? 2 : 3);
  }
  std::vector<std::string> names;
  for (int j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
  return make_dataset(Eigen::VectorXd::Zero(n), w, x, names, 3);
}

}  // namespace

TEST_CASE("intercept-only model on equal arms gives 1/3 everywhere") {
  testing::Rng g(1);
  const int n = 1500;
  Eigen::MatrixXd x(n, 1);
  std::vector<int> w(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = testing::normal(g);
    w[i] = i % 3 + 1;
  }
  const Dataset ds = make_dataset(Eigen::VectorXd::Zero(n), w, x, {"a"}, 3);
  const FittedGps f = fit(ds, {"int", {}});
  CHECK(f.converged);
  CHECK((f.gps.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("fitted probabilities are row-stochastic and vcov is symmetric PSD") {
  testing::Rng g(2);
  const Dataset ds = logit_dataset(g, 800, 3);
  const FittedGps f = fit(ds, {"m", {0, 1, 2}});
  REQUIRE(f.converged);
  CHECK(f.beta.rows() == 2);
  CHECK(f.beta.cols() == 4);
  CHECK((f.gps.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);
  CHECK(f.gps.minCoeff() > 0.0);
  CHECK(f.gps.maxCoeff() < 1.0);
  CHECK((f.vcov - f.vcov.transpose()).cwiseAbs().maxCoeff() < 1e-8);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.vcov);
  CHECK(es.eigenvalues().minCoeff() > -1e-8);
  CHECK(f.grad_norm < 1e-8);
}

TEST_CASE("analytic gradient agrees with central differences") {
  testing::Rng g(3);
  const Dataset ds = logit_dataset(g, 400, 2);
  const GpsModelSpec spec{"m", {0, 1}};
  const Eigen::MatrixXd design = design_matrix(ds, spec);
  const FittedGps f = fit(ds, spec);
  // At the optimum and at an arbitrary point.
  Eigen::MatrixXd elsewhere(2, 3);
  elsewhere << 0.4, -0.7, 1.1, 0.2, 0.3, -0.5;
  for (const Eigen::MatrixXd& beta : {f.beta, elsewhere}) {
    Eigen::VectorXd grad;
    mnl_loglik(design, ds.w, 3, beta, &grad);
    const double h = 1e-5;
    for (int r = 0; r < beta.rows(); ++r)
      for (int c = 0; c < beta.cols(); ++c) {
        Eigen::MatrixXd up = beta, dn = beta;
        up(r, c) += h;
        dn(r, c) -= h;
        const double fd = (mnl_loglik(design, ds.w, 3, up) - mnl_loglik(design, ds.w, 3, dn)) / (2 * h);
        CHECK(std::abs(fd - grad[r * beta.cols() + c]) < 1e-4);
      }
  }
}

TEST_CASE("predict: zero coefficients give the uniform vector") {
  FittedGps f;
  f.t = 4;
  f.spec = {"m", {0, 1}};
  f.beta = Eigen::MatrixXd::Zero(3, 3);
  const Eigen::VectorXd p = predict(f, Eigen::Vector2d(1.3, -0.2));
  CHECK((p.array() - 0.25).abs().maxCoeff() < 1e-15);
}

TEST_CASE("predict: huge linear predictor saturates without overflow") {
  FittedGps f;
  f.t = 3;
  f.spec = {"m", {0}};
  f.beta = Eigen::MatrixXd::Zero(2, 2);
  f.beta(0, 1) = 1000.0;
  const Eigen::VectorXd p = predict(f, Eigen::VectorXd::Constant(1, 5.0));
  CHECK(p.allFinite());
  CHECK(p[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p[0] >= 0.0);
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK_THROWS_AS(predict(f, Eigen::Vector2d(1, 2)), ValidationError);
}

TEST_CASE("predict: two levels reduce to the logistic sigmoid") {
  FittedGps f;
  f.t = 2;
  f.spec = {"m", {0}};
  f.beta = Eigen::MatrixXd(1, 2);
  f.beta << 0.3, -1.7;
  for (double x : {-4.0, -0.5, 0.0, 0.25, 3.0}) {
    const double eta = 0.3 - 1.7 * x;
    const Eigen::VectorXd p = predict(f, Eigen::VectorXd::Constant(1, x));
    CHECK(std::abs(p[1] - 1.0 / (1.0 + std::exp(-eta))) < 1e-14);
  }
}

TEST_CASE("adding a covariate never lowers the maximized log-likelihood") {
  testing::Rng g(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset ds = logit_dataset(g, 300, 4);
    const FittedGps small = fit(ds, {"s", {0}});
    const FittedGps big = fit(ds, {"b", {0, 3}});
    CHECK(big.loglik >= small.loglik - 1e-9);
  }
}

TEST_CASE("fitted probabilities do not depend on the reference level") {
  testing::Rng g(5);
  const Dataset ds = logit_dataset(g, 600, 2);
  Dataset relabeled = ds;
  // Swap levels 1 and 3.
  for (auto& w : relabeled.w) w = 4 - w;
  const FittedGps a = fit(ds, {"m", {0, 1}});
  const FittedGps b = fit(relabeled, {"m", {0, 1}});
  for (int v = 1; v <= 3; ++v) CHECK((a.gps.col(v - 1) - b.gps.col(3 - v)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("estimates approach the generating coefficients") {
  testing::Rng g(6);
  const Dataset ds = logit_dataset(g, 20000, 2);
  const FittedGps f = fit(ds, {"m", {0, 1}});
  Eigen::MatrixXd truth(2, 3);
  truth << 0.3, 0.8, 0.0, -0.2, -0.4, 0.5;
  CHECK((f.beta - truth).cwiseAbs().maxCoeff() < 0.08);
}

TEST_CASE("perfect separation is reported as a convergence failure") {
  const int n = 40;
  Eigen::MatrixXd x(n, 1);
  std::vector<int> w(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = i - 19.5;
    w[i] = x(i, 0) < 0 ? 1 : 2;
  }
  const Dataset ds = make_dataset(Eigen::VectorXd::Zero(n), w, x, {"a"}, 2);
  CHECK_THROWS_AS(fit(ds, {"sep", {0}}), ConvergenceError);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(validate_spec({"m", {0, 0}}, 3), ValidationError);
  CHECK_THROWS_AS(validate_spec({"m", {3}}, 3), ValidationError);
  CHECK_NOTHROW(validate_spec({"m", {}}, 3));
  CHECK(GpsModelSpec{"m", {2, 0}}.includes(2));
  CHECK_FALSE(GpsModelSpec{"m", {2, 0}}.includes(1));
}
