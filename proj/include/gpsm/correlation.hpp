#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gpsm/dataset.hpp"

namespace gpsm {

enum class RhoMetric { Ols, BCor };

const char* to_string(RhoMetric metric);

// Per-arm covariate/outcome association used to weight OABM.
struct RhoProfile {
  int arm = 0;
  RhoMetric metric = RhoMetric::Ols;
  std::vector<double> rho;  // clamped below at kRhoFloor
  std::vector<double> raw;  // before clamping
  double delta = 0.0;       // penalty scale for excluded covariates

  // Ball-correlation only.
  std::vector<double> p_values;
  std::vector<int> h0;  // covariates whose independence test did not reject
  std::vector<int> h1;  // covariates whose independence test rejected
  double bcor_star = 0.0;
};

// OLS of y on [1, x]. Returns [intercept, slopes...]. Throws NumericalError
// naming the collinear columns if the design is rank deficient.
Eigen::VectorXd ols_coefficients(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const std::vector<std::string>& names);

// rho_j = |theta_j| from OLS on arm-w units; delta = N^(1/3) with N the full sample size.
RhoProfile rho_ols(const Dataset& ds, int w);

// Sample ball covariance (square root of the squared statistic).
double ball_cov(std::span<const double> x, std::span<const double> y);

// BCov(x,y) / sqrt(BCov(x,x) BCov(y,y)), in [0, 1].
double ball_cor(std::span<const double> x, std::span<const double> y);

// Permutation p-value (1 + #{BCov(x, y_perm) >= BCov(x, y)}) / (B + 1).
double ball_test(std::span<const double> x, std::span<const double> y, int B, std::uint64_t seed);

struct BallOptions {
  int permutations = 199;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

// rho_j = BCor(X_j, Y) on arm-w units; covariates split by the permutation
// test; delta = 1 / BCor*^2.
RhoProfile rho_ball(const Dataset& ds, int w, const BallOptions& opts);

// Threshold between the two test groups; an empty group contributes 0.
double bcor_threshold(const std::vector<double>& rho_raw, const std::vector<int>& h0, const std::vector<int>& h1);

namespace detail {

// Exact integer form of the ball covariance: n^6 * BCov^2 is an integer,
// computed in O(n^2) per evaluation with a 2-D prefix-count table.
class BallCovariance {
 public:
  BallCovariance(std::span<const double> x, std::span<const double> y);

  int n() const { return n_; }
  // n^6 * BCov^2(x, y o perm), where (y o perm)_k = y[perm[k]]. Empty perm
  // means the identity.
  __int128 scaled_statistic(std::span<const int> perm = {}) const;
  // BCov^2 from a scaled statistic.
  double squared(__int128 scaled) const;

 private:
  struct Axis {
    std::vector<double> value;   // by unit
    std::vector<double> sorted;  // ascending
    std::vector<int> order;      // unit at sorted position q
    std::vector<int> pos;        // sorted position of unit
  };
  static Axis make_axis(std::span<const double> v);
  // For center c: [lo[m], hi[m]) = sorted positions within |v_m - v_c| of v_c.
  static void ball_ranges(const Axis& axis, int c, int* lo, int* hi);
  void build_tables();

  int n_;
  Axis x_, y_;
  // Ball bounds per center: x rows indexed by x-sorted position, y rows by unit.
  std::vector<std::uint16_t> xlo_, xhi_, ylo_, yhi_;
};

}  // namespace detail
}  // namespace gpsm
