#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "gpsm/dataset.hpp"
#include "gpsm/matching.hpp"
#include "gpsm/mnlogit.hpp"

namespace gpsm {

struct VarianceOptions {
  int l_sigma = 1;  // neighbours for the conditional outcome variance
  int l_cov = 2;    // neighbours for the covariate/outcome covariance
};

// Average of the imputed outcomes.
double mean_po(const MatchSet& ms);

// mean_po(ms_w2) - mean_po(ms_w).
double pairwise_ate(const MatchSet& ms_w, const MatchSet& ms_w2);

// Per-unit (L/(L+1)) (Y_i - mean of Y over the L nearest same-arm units)^2
// for arm-w units; zero elsewhere. Neighbours exclude the unit itself.
Eigen::VectorXd sigma_bar2(const Dataset& ds, std::span<const double> gps_w, int w, int L);

// N^-1 sum_i D_i(w) (1 + K(i,w)) K(i,w) sigma_bar2_i.
double matching_correction(const MatchSet& ms, const Dataset& ds, int L_sigma);

// N^-1 sum (Yhat_i(w) - mu(w))^2 plus the matching correction.
double sigma2_hat(const MatchSet& ms, const Dataset& ds, int L_sigma = 1);

// Estimated c(w) laid out like fit.vcov: entry (v-2)(|S|+1) + k. Intercept
// entries are zero since the intercept has no covariance with Y.
Eigen::VectorXd c_hat(const MatchSet& ms, const Dataset& ds, const FittedGps& fit, int L_cov = 2);

struct ArmEstimate {
  int arm = 0;
  int model_index = -1;
  std::string model;
  double mu = 0.0;
  double sigma2 = 0.0;
  double correction = 0.0;  // the matching-correction part of sigma2
  Eigen::VectorXd c;
  Eigen::MatrixXd vcov;
};

ArmEstimate estimate_arm(const MatchSet& ms, const Dataset& ds, const FittedGps& fit, int model_index,
                         const VarianceOptions& opts = {});

struct PairEstimate {
  int w = 0;
  int w2 = 0;
  double tau = 0.0;  // E{Y(w2)} - E{Y(w)}
  double sigma2_pair = 0.0;
  double adjustment = 0.0;
  double variance = 0.0;  // of tau itself, already divided by N
  bool floored = false;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

// Variance of the estimated pairwise effect: sigma2_pair / N minus the
// quadratic-form adjustment, floored at 1% of sigma2_pair / N.
PairEstimate pair_estimate(const MatchSet& ms_w, const MatchSet& ms_w2, const ArmEstimate& a_w,
                           const ArmEstimate& a_w2);

struct AteReport {
  std::vector<ArmEstimate> arms;   // arm w at position w-1
  std::vector<PairEstimate> pairs; // (1,2), (1,3), ..., (t-1,t)
  int l_sigma = 1;
  int l_cov = 2;

  const PairEstimate& pair(int w, int w2) const;
};

// matches[w-1] and fits[w-1] are the match set and fitted model used for arm w;
// model_index identifies which arms share a model.
AteReport estimate_ate(const Dataset& ds, const std::vector<MatchSet>& matches,
                       const std::vector<const FittedGps*>& fits, const std::vector<int>& model_index,
                       const VarianceOptions& opts = {});

inline constexpr double kCiCritical = 1.96;

}  // namespace gpsm
