#include "gpsm/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gpsm/common.hpp"

namespace gpsm {

const char* to_string(RhoMetric metric) { return metric == RhoMetric::Ols ? "OLS" : "BCor"; }

Eigen::VectorXd ols_coefficients(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const std::vector<std::string>& names) {
  const Eigen::Index n = x.rows(), p = x.cols() + 1;
  if (n < p) throw NumericalError("OLS needs at least " + std::to_string(p) + " rows, got " + std::to_string(n));
  Eigen::MatrixXd design(n, p);
  design.col(0).setOnes();
  design.rightCols(p - 1) = x;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p; ++k) {
      const int c = perm[k];
      const std::string name = c == 0 ? "(intercept)" : (c - 1 < static_cast<int>(names.size()) ? names[c - 1]
                                                                                            : std::to_string(c));
      cols += (cols.empty() ? "" : ", ") + name;
    }
    throw NumericalError("rank-deficient regression design; collinear column(s): " + cols);
  }
  return qr.solve(y);
}

RhoProfile rho_ols(const Dataset& ds, int w) {
  const auto units = ds.arm_units(w);
  const int d = ds.d();
  if (static_cast<int>(units.size()) <= d + 1)
    throw ValidationError("rho_ols: arm " + std::to_string(w) + " has " + std::to_string(units.size()) +
                          " units; needs more than " + std::to_string(d + 1));
  Eigen::MatrixXd x(units.size(), d);
  Eigen::VectorXd y(units.size());
  for (std::size_t r = 0; r < units.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) = ds.x.row(units[r]);
    y[static_cast<Eigen::Index>(r)] = ds.y[units[r]];
  }
  const Eigen::VectorXd theta = ols_coefficients(x, y, ds.names);
  RhoProfile out;
  out.arm = w;
  out.metric = RhoMetric::Ols;
  out.raw.resize(d);
  out.rho.resize(d);
  for (int j = 0; j < d; ++j) {
    out.raw[j] = std::abs(theta[j + 1]);
    out.rho[j] = std::max(out.raw[j], kRhoFloor);
  }
  out.delta = std::cbrt(static_cast<double>(ds.n()));
  return out;
}

// ---------------------------------------------------------------------------
// Ball covariance
// ---------------------------------------------------------------------------

namespace detail {

BallCovariance::Axis BallCovariance::make_axis(std::span<const double> v) {
  Axis a;
  const int n = static_cast<int>(v.size());
  a.value.assign(v.begin(), v.end());
  a.order.resize(n);
  std::iota(a.order.begin(), a.order.end(), 0);
  std::stable_sort(a.order.begin(), a.order.end(), [&](int i, int j) { return v[i] < v[j]; });
  a.sorted.resize(n);
  a.pos.resize(n);
  for (int q = 0; q < n; ++q) {
    a.sorted[q] = v[a.order[q]];
    a.pos[a.order[q]] = q;
  }
  return a;
}

void BallCovariance::ball_ranges(const Axis& axis, int c, int* lo_out, int* hi_out) {
  const int n = static_cast<int>(axis.sorted.size());
  const double* s = axis.sorted.data();
  const double center = axis.value[c];
  const int p = axis.pos[c];
  int lo = p, hi = p;
  // |s[q] - center| is non-decreasing moving away from p on each side, so the
  // ball of every radius is a contiguous run of sorted positions.
  while (lo > 0 || hi < n) {
    const double dl = lo > 0 ? std::abs(s[lo - 1] - center) : INFINITY;
    const double dh = hi < n ? std::abs(s[hi] - center) : INFINITY;
    const double r = std::min(dl, dh);
    int new_lo = lo, new_hi = hi;
    while (new_lo > 0 && std::abs(s[new_lo - 1] - center) <= r) --new_lo;
    while (new_hi < n && std::abs(s[new_hi] - center) <= r) ++new_hi;
    for (int q = new_lo; q < lo; ++q) {
      lo_out[axis.order[q]] = new_lo;
      hi_out[axis.order[q]] = new_hi;
    }
    for (int q = hi; q < new_hi; ++q) {
      lo_out[axis.order[q]] = new_lo;
      hi_out[axis.order[q]] = new_hi;
    }
    lo = new_lo;
    hi = new_hi;
  }
}

BallCovariance::BallCovariance(std::span<const double> x, std::span<const double> y)
    : n_(static_cast<int>(x.size())) {
  if (x.size() != y.size()) throw ValidationError("ball covariance: x and y lengths differ");
  if (n_ < 3) throw ValidationError("ball covariance needs n >= 3, got " + std::to_string(n_));
  // Counts fit in 16 bits and the four n x n range tables stay under 64 MB.
  if (n_ > 2048) throw ValidationError("ball covariance supports n <= 2048, got " + std::to_string(n_));
  for (std::size_t k = 0; k < x.size(); ++k)
    if (!std::isfinite(x[k]) || !std::isfinite(y[k])) throw ValidationError("ball covariance: non-finite input");
  x_ = make_axis(x);
  y_ = make_axis(y);
  build_tables();
}

void BallCovariance::build_tables() {
  const int n = n_;
  const std::size_t nn = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  xlo_.resize(nn);
  xhi_.resize(nn);
  ylo_.resize(nn);
  yhi_.resize(nn);
  std::vector<int> lo(n), hi(n);
  for (int c = 0; c < n; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * n;
    ball_ranges(x_, c, lo.data(), hi.data());
    // x rows are stored in x-sorted order of the second index.
    for (int q = 0; q < n; ++q) {
      xlo_[base + q] = static_cast<std::uint16_t>(lo[x_.order[q]]);
      xhi_[base + q] = static_cast<std::uint16_t>(hi[x_.order[q]]);
    }
    ball_ranges(y_, c, lo.data(), hi.data());
    for (int m = 0; m < n; ++m) {
      ylo_[base + m] = static_cast<std::uint16_t>(lo[m]);
      yhi_[base + m] = static_cast<std::uint16_t>(hi[m]);
    }
  }
}

__int128 BallCovariance::scaled_statistic(std::span<const int> perm) const {
  const int n = n_;
  std::vector<int> identity;
  if (perm.empty()) {
    identity.resize(n);
    std::iota(identity.begin(), identity.end(), 0);
    perm = identity;
  }
  // prefix[u * (n+1) + v] = #{k : xpos(k) < u, ypos(perm[k]) < v}
  const std::size_t stride = static_cast<std::size_t>(n) + 1;
  std::vector<std::uint16_t> prefix(stride * stride, 0);
  for (int u = 0; u < n; ++u) {
    const int col = y_.pos[perm[x_.order[u]]];
    const std::uint16_t* prev = prefix.data() + static_cast<std::size_t>(u) * stride;
    std::uint16_t* cur = prefix.data() + static_cast<std::size_t>(u + 1) * stride;
    for (int v = 0; v <= col; ++v) cur[v] = prev[v];
    for (int v = col + 1; v <= n; ++v) cur[v] = static_cast<std::uint16_t>(prev[v] + 1);
  }
  auto at = [&](int u, int v) -> std::int64_t {
    return prefix[static_cast<std::size_t>(u) * stride + static_cast<std::size_t>(v)];
  };

  std::vector<int> pj_sorted(n);
  for (int q = 0; q < n; ++q) pj_sorted[q] = perm[x_.order[q]];
  const std::int64_t nn = n;
  __int128 total = 0;
  for (int i = 0; i < n; ++i) {
    // Visiting j in x-sorted order moves the x-ball bounds monotonically, so
    // the prefix rows being read change slowly.
    const std::uint16_t* xl = xlo_.data() + static_cast<std::size_t>(i) * n;
    const std::uint16_t* xh = xhi_.data() + static_cast<std::size_t>(i) * n;
    const std::uint16_t* yl = ylo_.data() + static_cast<std::size_t>(perm[i]) * n;
    const std::uint16_t* yh = yhi_.data() + static_cast<std::size_t>(perm[i]) * n;
    std::int64_t row = 0;
    for (int q = 0; q < n; ++q) {
      const int pj = pj_sorted[q];
      const int a0 = xl[q], a1 = xh[q], b0 = yl[pj], b1 = yh[pj];
      const std::int64_t both = at(a1, b1) - at(a0, b1) - at(a1, b0) + at(a0, b0);
      const std::int64_t diff = nn * both - static_cast<std::int64_t>(a1 - a0) * (b1 - b0);
      row += diff * diff;
    }
    total += row;
  }
  return total;
}

double BallCovariance::squared(__int128 scaled) const {
  const long double n = n_;
  const long double n6 = n * n * n * n * n * n;
  return static_cast<double>(static_cast<long double>(scaled) / n6);
}

}  // namespace detail

double ball_cov(std::span<const double> x, std::span<const double> y) {
  const detail::BallCovariance stat(x, y);
  return std::sqrt(stat.squared(stat.scaled_statistic()));
}

double ball_cor(std::span<const double> x, std::span<const double> y) {
  const double xy = ball_cov(x, y);
  const double xx = ball_cov(x, x);
  const double yy = ball_cov(y, y);
  if (!(xx > 0.0) || !(yy > 0.0)) throw NumericalError("ball correlation undefined: constant input");
  return xy / std::sqrt(xx * yy);
}

namespace {

double permutation_p_value(const detail::BallCovariance& stat, __int128 observed, int B, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> perm(stat.n());
  std::iota(perm.begin(), perm.end(), 0);
  int exceed = 0;
  for (int b = 0; b < B; ++b) {
    std::shuffle(perm.begin(), perm.end(), rng);
    if (stat.scaled_statistic(perm) >= observed) ++exceed;
  }
  return (1.0 + exceed) / (B + 1.0);
}

}  // namespace

double ball_test(std::span<const double> x, std::span<const double> y, int B, std::uint64_t seed) {
  if (x.size() < 10) throw ValidationError("ball_test needs n >= 10, got " + std::to_string(x.size()));
  if (B < 1) throw ValidationError("ball_test needs at least one permutation");
  const detail::BallCovariance stat(x, y);
  return permutation_p_value(stat, stat.scaled_statistic(), B, seed);
}

double bcor_threshold(const std::vector<double>& rho_raw, const std::vector<int>& h0, const std::vector<int>& h1) {
  double max_h0 = 0.0, min_h1 = 0.0;
  if (!h0.empty()) {
    max_h0 = rho_raw[h0.front()];
    for (int j : h0) max_h0 = std::max(max_h0, rho_raw[j]);
  }
  if (!h1.empty()) {
    min_h1 = rho_raw[h1.front()];
    for (int j : h1) min_h1 = std::min(min_h1, rho_raw[j]);
  }
  return (max_h0 + min_h1) / 2.0;
}

RhoProfile rho_ball(const Dataset& ds, int w, const BallOptions& opts) {
  const auto units = ds.arm_units(w);
  if (units.size() < 10)
    throw ValidationError("rho_ball: arm " + std::to_string(w) + " has " + std::to_string(units.size()) +
                          " units; needs at least 10");
  if (opts.permutations < 1) throw ValidationError("rho_ball needs at least one permutation");
  const int d = ds.d();
  std::vector<double> y(units.size());
  for (std::size_t r = 0; r < units.size(); ++r) y[r] = ds.y[units[r]];

  RhoProfile out;
  out.arm = w;
  out.metric = RhoMetric::BCor;
  out.raw.assign(d, 0.0);
  out.rho.assign(d, kRhoFloor);
  out.p_values.assign(d, 1.0);

  const detail::BallCovariance yy_stat(y, y);
  const double yy = std::sqrt(yy_stat.squared(yy_stat.scaled_statistic()));
  parallel_for(static_cast<std::size_t>(d), opts.threads, [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    std::vector<double> x(units.size());
    for (std::size_t r = 0; r < units.size(); ++r) x[r] = ds.x(units[r], j);
    const detail::BallCovariance xx_stat(x, x);
    const double xx = std::sqrt(xx_stat.squared(xx_stat.scaled_statistic()));
    // A covariate constant within the arm carries no information about Y.
    if (!(xx > 0.0) || !(yy > 0.0)) return;
    const detail::BallCovariance xy_stat(x, y);
    const __int128 observed = xy_stat.scaled_statistic();
    out.raw[j] = std::sqrt(xy_stat.squared(observed)) / std::sqrt(xx * yy);
    out.rho[j] = std::max(out.raw[j], kRhoFloor);
    out.p_values[j] =
        permutation_p_value(xy_stat, observed, opts.permutations, derive_seed(opts.seed, static_cast<std::uint64_t>(j)));
  });
  for (int j = 0; j < d; ++j) (out.p_values[j] < opts.alpha ? out.h1 : out.h0).push_back(j);
  out.bcor_star = std::max(bcor_threshold(out.raw, out.h0, out.h1), kRhoFloor);
  out.delta = 1.0 / (out.bcor_star * out.bcor_star);
  return out;
}

}  // namespace gpsm
