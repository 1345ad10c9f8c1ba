#include "gpsm/mnlogit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace gpsm {

bool GpsModelSpec::includes(int column) const {
  return std::find(covariates.begin(), covariates.end(), column) != covariates.end();
}

void validate_spec(const GpsModelSpec& spec, int d) {
  std::set<int> seen;
  for (int c : spec.covariates) {
    if (c < 0 || c >= d)
      throw ValidationError("model '" + spec.name + "': covariate index " + std::to_string(c) + " outside [0, " +
                            std::to_string(d) + ")");
    if (!seen.insert(c).second)
      throw ValidationError("model '" + spec.name + "': covariate index " + std::to_string(c) + " repeated");
  }
}

Eigen::MatrixXd design_matrix(const Dataset& ds, const GpsModelSpec& spec) {
  Eigen::MatrixXd z(ds.n(), spec.size() + 1);
  z.col(0).setOnes();
  for (int k = 0; k < spec.size(); ++k) z.col(k + 1) = ds.x.col(spec.covariates[k]);
  return z;
}

Eigen::VectorXd mnl_probabilities(const Eigen::MatrixXd& beta, const Eigen::VectorXd& design_row) {
  const Eigen::Index t = beta.rows() + 1;
  Eigen::VectorXd eta(t);
  eta[0] = 0.0;
  eta.tail(t - 1) = beta * design_row;
  const double m = eta.maxCoeff();
  Eigen::VectorXd p = (eta.array() - m).exp();
  return p / p.sum();
}

Eigen::VectorXd predict(const FittedGps& fit, const Eigen::VectorXd& x_row) {
  if (x_row.size() != fit.spec.size())
    throw ValidationError("predict: expected " + std::to_string(fit.spec.size()) + " covariates, got " +
                          std::to_string(x_row.size()));
  Eigen::VectorXd z(x_row.size() + 1);
  z[0] = 1.0;
  z.tail(x_row.size()) = x_row;
  return mnl_probabilities(fit.beta, z);
}

namespace {

// Linear predictors n x t with a leading zero column for the reference level.
Eigen::MatrixXd linear_predictors(const Eigen::MatrixXd& design, const Eigen::MatrixXd& beta) {
  Eigen::MatrixXd eta(design.rows(), beta.rows() + 1);
  eta.col(0).setZero();
  eta.rightCols(beta.rows()) = design * beta.transpose();
  return eta;
}

// Row-wise softmax; returns log-likelihood contribution per row through `ll`.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& eta, const std::vector<int>& w, double* ll) {
  Eigen::MatrixXd p(eta.rows(), eta.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    const double m = eta.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (eta.row(i).array() - m).exp();
    const double s = e.sum();
    p.row(i) = e / s;
    if (ll) total += eta(i, w[i] - 1) - m - std::log(s);
  }
  if (ll) *ll = total;
  return p;
}

Eigen::VectorXd gradient_of(const Eigen::MatrixXd& design, const std::vector<int>& w, const Eigen::MatrixXd& p) {
  const Eigen::Index t = p.cols(), q = design.cols();
  Eigen::MatrixXd resid = -p.rightCols(t - 1);
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    if (w[i] > 1) resid(i, w[i] - 2) += 1.0;
  Eigen::VectorXd g(q * (t - 1));
  for (Eigen::Index v = 0; v < t - 1; ++v) g.segment(v * q, q) = design.transpose() * resid.col(v);
  return g;
}

Eigen::MatrixXd information_of(const Eigen::MatrixXd& design, const Eigen::MatrixXd& p) {
  const Eigen::Index t = p.cols(), q = design.cols(), m = t - 1;
  Eigen::MatrixXd info(q * m, q * m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = a; b < m; ++b) {
      Eigen::VectorXd weight = -(p.col(a + 1).array() * p.col(b + 1).array()).matrix();
      if (a == b) weight += p.col(a + 1);
      const Eigen::MatrixXd block = design.transpose() * (weight.asDiagonal() * design);
      info.block(a * q, b * q, q, q) = block;
      if (a != b) info.block(b * q, a * q, q, q) = block.transpose();
    }
  }
  return info;
}

}  // namespace

double mnl_loglik(const Eigen::MatrixXd& design, const std::vector<int>& w, int t, const Eigen::MatrixXd& beta,
                  Eigen::VectorXd* gradient) {
  if (beta.rows() != t - 1 || beta.cols() != design.cols())
    throw ValidationError("mnl_loglik: coefficient matrix has the wrong shape");
  double ll = 0.0;
  const Eigen::MatrixXd p = softmax_rows(linear_predictors(design, beta), w, &ll);
  if (gradient) *gradient = gradient_of(design, w, p);
  return ll;
}

FittedGps fit(const Dataset& ds, const GpsModelSpec& spec, const FitOptions& opts) {
  validate_spec(spec, ds.d());
  const int t = ds.t;
  const Eigen::MatrixXd design = design_matrix(ds, spec);
  const Eigen::Index q = design.cols(), m = t - 1;

  auto to_matrix = [&](const Eigen::VectorXd& v) {
    Eigen::MatrixXd b(m, q);
    for (Eigen::Index a = 0; a < m; ++a) b.row(a) = v.segment(a * q, q).transpose();
    return b;
  };

  FittedGps out;
  out.spec = spec;
  out.t = t;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(m * q);
  double ll = 0.0;
  Eigen::MatrixXd p = softmax_rows(linear_predictors(design, to_matrix(theta)), ds.w, &ll);
  Eigen::VectorXd g = gradient_of(design, ds.w, p);

  // Solves info * step = g, adding a small ridge once if the factorization fails.
  auto solve = [&](const Eigen::MatrixXd& info, const Eigen::VectorXd& rhs, Eigen::MatrixXd* inverse) {
    for (int attempt = 0; attempt < 2; ++attempt) {
      Eigen::MatrixXd a = info;
      if (attempt == 1) {
        a.diagonal().array() += 1e-8;
        out.ridge_used = true;
      }
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() == Eigen::Success && llt.rcond() > 1e-14) {
        if (inverse) *inverse = llt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
        return Eigen::VectorXd(llt.solve(rhs));
      }
    }
    throw NumericalError("model '" + spec.name + "': information matrix is singular (ridge fallback failed)");
  };

  bool converged = g.cwiseAbs().maxCoeff() < opts.grad_tol;
  int iter = 0;
  while (!converged && iter < opts.max_iter) {
    ++iter;
    const Eigen::VectorXd step = solve(information_of(design, p), g, nullptr);
    double scale = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    double trial_ll = 0.0;
    Eigen::MatrixXd trial_p;
    for (int halving = 0; halving < 40; ++halving) {
      trial = theta + scale * step;
      trial_p = softmax_rows(linear_predictors(design, to_matrix(trial)), ds.w, &trial_ll);
      if (std::isfinite(trial_ll) && trial_ll >= ll) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) {
      // No ascent along the Newton direction: accept only if the Newton
      // decrement says we are already at the optimum up to rounding.
      converged = g.dot(step) < 1e-10 * std::max(1.0, std::abs(ll));
      break;
    }
    const double change = std::abs(trial_ll - ll) / std::max(1.0, std::abs(ll));
    theta = trial;
    ll = trial_ll;
    p = std::move(trial_p);
    g = gradient_of(design, ds.w, p);
    converged = g.cwiseAbs().maxCoeff() < opts.grad_tol || change < opts.rel_ll_tol;
  }

  const double grad_norm = g.cwiseAbs().maxCoeff();
  if (!converged) {
    throw ConvergenceError("model '" + spec.name + "': Newton iterations did not converge after " +
                               std::to_string(iter) + " iterations (gradient max-abs " +
                               std::to_string(grad_norm) + "; possible separation)",
                           to_matrix(theta), grad_norm);
  }
  // Fitted probabilities collapsing to 0 mean the likelihood has no interior maximum.
  if (p.minCoeff() < 1e-10) {
    throw ConvergenceError("model '" + spec.name + "': fitted probabilities degenerate (quasi-separation)",
                           to_matrix(theta), grad_norm);
  }

  Eigen::MatrixXd vcov;
  solve(information_of(design, p), g, &vcov);
  out.vcov = 0.5 * (vcov + vcov.transpose());
  out.beta = to_matrix(theta);
  out.gps = std::move(p);
  out.loglik = ll;
  out.converged = true;
  out.iterations = iter;
  out.grad_norm = grad_norm;
  return out;
}

}  // namespace gpsm
