#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "gpsm/common.hpp"
#include "gpsm/dataset.hpp"

namespace gpsm {

// A candidate GPS model: multinomial logit on an intercept plus a subset of
// the dataset's covariate columns (0-based, in the order given).
struct GpsModelSpec {
  std::string name;
  std::vector<int> covariates;

  int size() const { return static_cast<int>(covariates.size()); }
  bool includes(int column) const;
};

// Throws ValidationError if indices repeat or fall outside [0, d).
void validate_spec(const GpsModelSpec& spec, int d);

struct FitOptions {
  int max_iter = 100;
  double grad_tol = 1e-8;    // max-abs gradient
  double rel_ll_tol = 1e-12; // relative log-likelihood change
};

// Maximum-likelihood multinomial logit fit with level 1 as reference.
//
// beta row v-2 holds the coefficients of level v (v = 2..t), columns are
// [intercept, spec.covariates...]. The parameter vector used by vcov stacks
// these rows: index (v-2) * (|S|+1) + k.
struct FittedGps {
  GpsModelSpec spec;
  int t = 0;
  Eigen::MatrixXd beta;
  Eigen::MatrixXd gps;   // n x t fitted probabilities
  Eigen::MatrixXd vcov;  // inverse observed information
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;  // max-abs gradient at beta
  bool ridge_used = false;

  int n_params() const { return static_cast<int>(beta.size()); }
  // Column of gps for arm `level` (1-based).
  Eigen::VectorXd scores(int level) const { return gps.col(level - 1); }
};

// Thrown when Newton iterations fail to converge (usually separation).
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, Eigen::MatrixXd last_beta, double grad_norm)
      : NumericalError(what), last_beta_(std::move(last_beta)), grad_norm_(grad_norm) {}
  const Eigen::MatrixXd& last_beta() const { return last_beta_; }
  double grad_norm() const { return grad_norm_; }

 private:
  Eigen::MatrixXd last_beta_;
  double grad_norm_;
};

FittedGps fit(const Dataset& ds, const GpsModelSpec& spec, const FitOptions& opts = {});

// Softmax over {0, x'beta_2, ..., x'beta_t} evaluated with log-sum-exp.
// `x_row` holds the model's covariates in spec order (no intercept).
Eigen::VectorXd predict(const FittedGps& fit, const Eigen::VectorXd& x_row);

// Probabilities for a (t-1) x (|S|+1) coefficient matrix; used by fit().
Eigen::VectorXd mnl_probabilities(const Eigen::MatrixXd& beta, const Eigen::VectorXd& design_row);

// Design matrix [1, X_S] for a model.
Eigen::MatrixXd design_matrix(const Dataset& ds, const GpsModelSpec& spec);

// Log-likelihood and its gradient (stacked like vcov) at an arbitrary beta.
double mnl_loglik(const Eigen::MatrixXd& design, const std::vector<int>& w, int t, const Eigen::MatrixXd& beta,
                  Eigen::VectorXd* gradient = nullptr);

}  // namespace gpsm
