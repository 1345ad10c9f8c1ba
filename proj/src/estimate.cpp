#include "gpsm/estimate.hpp"

#include <cmath>
#include <string>

#include "gpsm/common.hpp"

namespace gpsm {

double mean_po(const MatchSet& ms) { return ms.y_imputed.mean(); }

double pairwise_ate(const MatchSet& ms_w, const MatchSet& ms_w2) { return mean_po(ms_w2) - mean_po(ms_w); }

namespace {

std::span<const double> scores_of(const MatchSet& ms) {
  return {ms.gps_used.data(), static_cast<std::size_t>(ms.gps_used.size())};
}

void require_arm_size(const Dataset& ds, int w, int needed, const char* what) {
  if (ds.arm_size(w) < needed)
    throw ValidationError(std::string(what) + ": arm " + std::to_string(w) + " has " +
                          std::to_string(ds.arm_size(w)) + " units, needs at least " + std::to_string(needed));
}

}  // namespace

Eigen::VectorXd sigma_bar2(const Dataset& ds, std::span<const double> gps_w, int w, int L) {
  if (L < 1) throw ValidationError("L_sigma must be at least 1");
  require_arm_size(ds, w, L + 1, "sigma2_hat");
  const ArmIndex index(ds, gps_w, w);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(ds.n());
  for (int i = 0; i < ds.n(); ++i) {
    if (ds.w[i] != w) continue;
    double s = 0.0;
    for (int j : index.nearest_k(gps_w[i], L, i)) s += ds.y[j];
    const double r = ds.y[i] - s / L;
    out[i] = L / (L + 1.0) * r * r;
  }
  return out;
}

double matching_correction(const MatchSet& ms, const Dataset& ds, int L_sigma) {
  const Eigen::VectorXd sb = sigma_bar2(ds, scores_of(ms), ms.arm, L_sigma);
  double total = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    const double k = ms.k_count[i];
    if (k > 0) total += (1.0 + k) * k * sb[i];
  }
  return total / ds.n();
}

double sigma2_hat(const MatchSet& ms, const Dataset& ds, int L_sigma) {
  const double mu = mean_po(ms);
  const double spread = (ms.y_imputed.array() - mu).square().sum() / ds.n();
  return spread + matching_correction(ms, ds, L_sigma);
}

Eigen::VectorXd c_hat(const MatchSet& ms, const Dataset& ds, const FittedGps& fit, int L_cov) {
  if (L_cov < 2) throw ValidationError("L_cov must be at least 2 (a covariance needs two neighbours)");
  const int w = ms.arm;
  require_arm_size(ds, w, L_cov + 1, "c_hat");
  const int t = fit.t;
  const int s = fit.spec.size();
  const int block = s + 1;
  const auto gps = scores_of(ms);
  const ArmIndex index(ds, gps, w);

  Eigen::VectorXd c = Eigen::VectorXd::Zero((t - 1) * block);
  Eigen::VectorXd cov(s);
  for (int i = 0; i < ds.n(); ++i) {
    const auto nb = index.nearest_k(gps[i], L_cov, ds.w[i] == w ? i : -1);
    double ybar = 0.0;
    for (int j : nb) ybar += ds.y[j];
    ybar /= L_cov;
    for (int k = 0; k < s; ++k) {
      const int col = fit.spec.covariates[k];
      double xbar = 0.0;
      for (int j : nb) xbar += ds.x(j, col);
      xbar /= L_cov;
      double acc = 0.0;
      for (int j : nb) acc += (ds.x(j, col) - xbar) * (ds.y[j] - ybar);
      cov[k] = acc / (L_cov - 1);
    }
    for (int v = 2; v <= t; ++v) {
      const double sv = (v == w ? 1.0 : 0.0) - fit.gps(i, v - 1);
      c.segment((v - 2) * block + 1, s) += sv * cov;
    }
  }
  return c / ds.n();
}

ArmEstimate estimate_arm(const MatchSet& ms, const Dataset& ds, const FittedGps& fit, int model_index,
                         const VarianceOptions& opts) {
  ArmEstimate a;
  a.arm = ms.arm;
  a.model_index = model_index;
  a.model = fit.spec.name;
  a.mu = mean_po(ms);
  a.correction = matching_correction(ms, ds, opts.l_sigma);
  a.sigma2 = (ms.y_imputed.array() - a.mu).square().sum() / ds.n() + a.correction;
  a.c = c_hat(ms, ds, fit, opts.l_cov);
  a.vcov = fit.vcov;
  return a;
}

PairEstimate pair_estimate(const MatchSet& ms_w, const MatchSet& ms_w2, const ArmEstimate& a_w,
                           const ArmEstimate& a_w2) {
  const double n = static_cast<double>(ms_w.n());
  PairEstimate p;
  p.w = a_w.arm;
  p.w2 = a_w2.arm;
  p.tau = pairwise_ate(ms_w, ms_w2);
  const Eigen::ArrayXd diff = ms_w2.y_imputed.array() - ms_w.y_imputed.array() - p.tau;
  p.sigma2_pair = diff.square().sum() / n + a_w.correction + a_w2.correction;
  if (a_w.model_index == a_w2.model_index) {
    const Eigen::VectorXd dc = a_w2.c - a_w.c;
    p.adjustment = dc.dot(a_w.vcov * dc);
  } else {
    p.adjustment = a_w.c.dot(a_w.vcov * a_w.c) + a_w2.c.dot(a_w2.vcov * a_w2.c);
  }
  const double raw = p.sigma2_pair / n - p.adjustment;
  const double floor = 0.01 * p.sigma2_pair / n;
  p.floored = !(raw >= floor);
  p.variance = p.floored ? floor : raw;
  p.se = std::sqrt(p.variance);
  p.ci_lo = p.tau - kCiCritical * p.se;
  p.ci_hi = p.tau + kCiCritical * p.se;
  return p;
}

const PairEstimate& AteReport::pair(int w, int w2) const {
  for (const auto& p : pairs)
    if (p.w == w && p.w2 == w2) return p;
  throw ValidationError("no estimate for pair (" + std::to_string(w) + "," + std::to_string(w2) + ")");
}

AteReport estimate_ate(const Dataset& ds, const std::vector<MatchSet>& matches,
                       const std::vector<const FittedGps*>& fits, const std::vector<int>& model_index,
                       const VarianceOptions& opts) {
  const int t = ds.t;
  if (static_cast<int>(matches.size()) != t || static_cast<int>(fits.size()) != t ||
      static_cast<int>(model_index.size()) != t)
    throw ValidationError("estimate_ate: need one match set, fit and model index per arm");
  AteReport r;
  r.l_sigma = opts.l_sigma;
  r.l_cov = opts.l_cov;
  for (int w = 1; w <= t; ++w) {
    if (matches[w - 1].arm != w) throw ValidationError("estimate_ate: match sets must be ordered by arm");
    r.arms.push_back(estimate_arm(matches[w - 1], ds, *fits[w - 1], model_index[w - 1], opts));
  }
  for (int w = 1; w <= t; ++w)
    for (int w2 = w + 1; w2 <= t; ++w2)
      r.pairs.push_back(pair_estimate(matches[w - 1], matches[w2 - 1], r.arms[w - 1], r.arms[w2 - 1]));
  return r;
}

}  // namespace gpsm
