#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "gpsm/dataset.hpp"

namespace gpsm {

// One-to-one nearest-neighbour matching with replacement on a scalar score,
// for a single target arm.
struct MatchSet {
  int arm = 0;
  std::vector<int> match_index;  // m(w, p_i): an arm-w unit for every unit i
  std::vector<int> k_count;      // K(i, w): uses of arm-w unit i by units outside arm w
  Eigen::VectorXd y_imputed;     // Y_{m(i)}
  Eigen::MatrixXd x_imputed;     // X_{m(i)}
  Eigen::VectorXd gps_used;      // scores matched on

  int n() const { return static_cast<int>(match_index.size()); }
};

// Arm-w units match themselves; every other unit takes the arm-w unit with
// the nearest score (ties: smallest index). O(n log n).
MatchSet match_arm(const Dataset& ds, std::span<const double> gps_w, int w);

// Column means of the imputed covariates.
Eigen::VectorXd imputed_covariate_mean(const MatchSet& ms);

// The L arm-w units nearest to gps_w[i], optionally excluding i itself,
// ordered by (distance, index).
std::vector<int> nn_in_arm(const Dataset& ds, std::span<const double> gps_w, int w, int i, int L,
                           bool exclude_self);

// Sorted view of one arm's scores, reusable across many neighbour queries.
class ArmIndex {
 public:
  ArmIndex(const Dataset& ds, std::span<const double> gps_w, int w);

  int size() const { return static_cast<int>(units_.size()); }
  // Nearest arm unit to `score` (ties: smallest index).
  int nearest(double score) const;
  // L nearest arm units to `score`, skipping `skip` (pass -1 for none).
  std::vector<int> nearest_k(double score, int L, int skip) const;

 private:
  std::vector<int> units_;      // arm units sorted by (score, index)
  std::vector<double> scores_;  // their scores
};

}  // namespace gpsm
