#pragma once

// Random instance generators and slow reference implementations used as
// oracles by the unit and acceptance tests.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gpsm/common.hpp"
#include "gpsm/dataset.hpp"
#include "gpsm/matching.hpp"

namespace gpsm::testing {

using Rng = std::mt19937_64;

inline double normal(Rng& g) { return std::normal_distribution<double>(0.0, 1.0)(g); }
inline double uniform(Rng& g) { return std::uniform_real_distribution<double>(0.0, 1.0)(g); }
inline int uniform_int(Rng& g, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g); }

// Every arm gets at least one unit; the remainder are assigned at random.
inline std::vector<int> random_arms(Rng& g, int n, int t) {
  std::vector<int> w(n);
  for (int i = 0; i < n; ++i) w[i] = i < t ? i + 1 : uniform_int(g, 1, t);
  std::shuffle(w.begin(), w.end(), g);
  return w;
}

// Covariates are small integers when `integer_valued`, so sums are exact.
inline Dataset random_dataset(Rng& g, int n, int t, int d, bool integer_valued = false) {
  for (;;) {
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) x(i, j) = integer_valued ? uniform_int(g, -20, 20) : normal(g);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = integer_valued ? uniform_int(g, -50, 50) : normal(g) + x.row(i).sum();
    std::vector<std::string> names;
    for (int j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
    bool ok = true;
    for (int j = 0; j < d; ++j) ok = ok && (x.col(j).maxCoeff() > x.col(j).minCoeff());
    if (ok) return make_dataset(y, random_arms(g, n, t), x, names, t);
  }
}

// Scores drawn from a small grid so that ties happen often.
inline std::vector<double> random_scores(Rng& g, int n, bool with_ties) {
  std::vector<double> s(n);
  for (auto& v : s) v = with_ties ? uniform_int(g, 1, 9) / 10.0 : 0.01 + 0.98 * uniform(g);
  return s;
}

// O(n) scan: nearest arm-w unit to `score`, smallest index on ties.
inline int brute_nearest(const Dataset& ds, std::span<const double> scores, int w, double score) {
  int best = -1;
  double best_d = INFINITY;
  for (int j = 0; j < ds.n(); ++j) {
    if (ds.w[j] != w) continue;
    const double d = std::abs(scores[j] - score);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

// Full sort of the arm by (distance, index).
inline std::vector<int> brute_nearest_k(const Dataset& ds, std::span<const double> scores, int w, int i, int L,
                                        bool exclude_self) {
  std::vector<int> cand;
  for (int j = 0; j < ds.n(); ++j)
    if (ds.w[j] == w && !(exclude_self && j == i)) cand.push_back(j);
  std::sort(cand.begin(), cand.end(), [&](int a, int b) {
    const double da = std::abs(scores[a] - scores[i]), db = std::abs(scores[b] - scores[i]);
    return da < db || (da == db && a < b);
  });
  cand.resize(L);
  return cand;
}

// Definitional O(n^3) sample ball covariance (squared).
inline double brute_ball_cov2(std::span<const double> x, std::span<const double> y) {
  const int n = static_cast<int>(x.size());
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double rx = std::abs(x[j] - x[i]), ry = std::abs(y[j] - y[i]);
      double dx = 0, dy = 0, dxy = 0;
      for (int k = 0; k < n; ++k) {
        const bool in_x = std::abs(x[k] - x[i]) <= rx;
        const bool in_y = std::abs(y[k] - y[i]) <= ry;
        dx += in_x;
        dy += in_y;
        dxy += in_x && in_y;
      }
      const double diff = dxy / n - (dx / n) * (dy / n);
      total += diff * diff;
    }
  return total / (static_cast<double>(n) * n);
}

inline double brute_ball_cov(std::span<const double> x, std::span<const double> y) {
  return std::sqrt(brute_ball_cov2(x, y));
}

inline double brute_ball_cor(std::span<const double> x, std::span<const double> y) {
  return brute_ball_cov(x, y) / std::sqrt(brute_ball_cov(x, x) * brute_ball_cov(y, y));
}

// sup |F_a - F_b| checked at every sample point of either column.
inline double brute_ks_column(const std::vector<double>& a, const std::vector<double>& b) {
  auto ecdf = [](const std::vector<double>& v, double at) {
    double c = 0;
    for (double e : v) c += e <= at;
    return c / static_cast<double>(v.size());
  };
  double worst = 0.0;
  for (const auto* col : {&a, &b})
    for (double p : *col) worst = std::max(worst, std::abs(ecdf(a, p) - ecdf(b, p)));
  return worst;
}

// Sum_i over the K-weighted closed form: sum_i 1{W_i = w} (1 + K(i,w)) v_i.
inline double k_weighted_sum(const MatchSet& ms, const Dataset& ds, const Eigen::VectorXd& v) {
  double total = 0.0;
  for (int i = 0; i < ds.n(); ++i)
    if (ds.w[i] == ms.arm) total += (1.0 + ms.k_count[i]) * v[i];
  return total;
}

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace gpsm::testing
