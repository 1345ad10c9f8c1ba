#include "gpsm/balance.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "gpsm/common.hpp"

namespace gpsm {

const char* to_string(Measure m) {
  switch (m) {
    case Measure::Amd: return "AMD";
    case Measure::KsDist: return "KSdist";
    case Measure::MDist: return "Mdist";
    case Measure::Wbm: return "WBM";
    case Measure::OabmOls: return "OABM_OLS";
    case Measure::OabmBcor: return "OABM_BCor";
  }
  return "?";
}

Measure parse_measure(const std::string& name) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  const std::string key = lower(name);
  for (Measure m : kAllMeasures)
    if (lower(to_string(m)) == key) return m;
  throw ValidationError("unknown balance measure '" + name +
                        "' (expected one of AMD, KSdist, Mdist, WBM, OABM_OLS, OABM_BCor)");
}

Eigen::VectorXd covariate_gaps(const MatchSet& ms, const Dataset& ds) {
  return imputed_covariate_mean(ms) - ds.x.colwise().mean().transpose();
}

double amd(const MatchSet& ms, const Dataset& ds) { return covariate_gaps(ms, ds).cwiseAbs().sum(); }

double ks_dist(const MatchSet& ms, const Dataset& ds) {
  const int n = ds.n();
  double total = 0.0;
  std::vector<double> a(n), b(n);
  for (int j = 0; j < ds.d(); ++j) {
    for (int i = 0; i < n; ++i) {
      a[i] = ms.x_imputed(i, j);
      b[i] = ds.x(i, j);
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    // Walk the union of jump points; both ECDFs are right-continuous steps.
    int ia = 0, ib = 0;
    long worst = 0;
    while (ia < n || ib < n) {
      const double v = std::min(ia < n ? a[ia] : INFINITY, ib < n ? b[ib] : INFINITY);
      while (ia < n && a[ia] <= v) ++ia;
      while (ib < n && b[ib] <= v) ++ib;
      worst = std::max(worst, std::labs(static_cast<long>(ia) - ib));
    }
    total += static_cast<double>(worst) / n;
  }
  return total;
}

double m_dist(const MatchSet& ms, const Dataset& ds) {
  const Eigen::VectorXd gap = covariate_gaps(ms, ds);
  const Eigen::MatrixXd centered = ds.x.rowwise() - ds.x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(ds.n() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo >= 1e12)
    throw NumericalError("Mahalanobis distance: covariate covariance matrix is singular or ill-conditioned");
  return gap.dot(cov.ldlt().solve(gap));
}

Eigen::VectorXd pooled_slopes(const Dataset& ds) { return ols_coefficients(ds.x, ds.y, ds.names).tail(ds.d()); }

double wbm(const MatchSet& ms, const Dataset& ds, const Eigen::VectorXd& slopes) {
  return (slopes.array() * covariate_gaps(ms, ds).array()).abs().sum();
}

double wbm(const MatchSet& ms, const Dataset& ds) { return wbm(ms, ds, pooled_slopes(ds)); }

Eigen::VectorXd oabm_weights(const GpsModelSpec& spec, const RhoProfile& rho) {
  const int d = static_cast<int>(rho.rho.size());
  Eigen::VectorXd zeta(d);
  for (int j = 0; j < d; ++j) {
    const double r = std::max(rho.rho[j], kRhoFloor);
    zeta[j] = spec.includes(j) ? 1.0 / r : rho.delta * r;
  }
  return zeta;
}

OabmResult oabm(const MatchSet& ms, const Dataset& ds, const GpsModelSpec& spec, const RhoProfile& rho) {
  if (static_cast<int>(rho.rho.size()) != ds.d())
    throw ValidationError("OABM: rho profile has " + std::to_string(rho.rho.size()) + " entries for " +
                          std::to_string(ds.d()) + " covariates");
  if (rho.arm != ms.arm)
    throw ValidationError("OABM: rho profile for arm " + std::to_string(rho.arm) + " used on arm " +
                          std::to_string(ms.arm));
  OabmResult out;
  out.zeta = oabm_weights(spec, rho);
  out.value = out.zeta.dot(covariate_gaps(ms, ds).cwiseAbs());
  return out;
}

BalanceReport balance_report(const MatchSet& ms, const Dataset& ds, const GpsModelSpec& spec,
                             const RhoProfile* rho_ols_profile, const RhoProfile* rho_ball_profile) {
  BalanceReport r;
  r.arm = ms.arm;
  r.model = spec.name;
  r.imputed_mean = imputed_covariate_mean(ms);
  r.sample_mean = ds.x.colwise().mean().transpose();
  r.values[Measure::Amd] = amd(ms, ds);
  r.values[Measure::KsDist] = ks_dist(ms, ds);
  r.values[Measure::MDist] = m_dist(ms, ds);
  r.values[Measure::Wbm] = wbm(ms, ds);
  if (rho_ols_profile) {
    auto res = oabm(ms, ds, spec, *rho_ols_profile);
    r.values[Measure::OabmOls] = res.value;
    r.zeta_ols = std::move(res.zeta);
  }
  if (rho_ball_profile) {
    auto res = oabm(ms, ds, spec, *rho_ball_profile);
    r.values[Measure::OabmBcor] = res.value;
    r.zeta_bcor = std::move(res.zeta);
  }
  return r;
}

}  // namespace gpsm
