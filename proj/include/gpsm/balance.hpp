#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gpsm/correlation.hpp"
#include "gpsm/dataset.hpp"
#include "gpsm/matching.hpp"
#include "gpsm/mnlogit.hpp"

namespace gpsm {

enum class Measure { Amd, KsDist, MDist, Wbm, OabmOls, OabmBcor };

inline constexpr Measure kAllMeasures[] = {Measure::KsDist, Measure::MDist, Measure::Amd,
                                           Measure::Wbm,    Measure::OabmOls, Measure::OabmBcor};

const char* to_string(Measure m);
// Accepts the names printed by to_string, case-insensitively.
Measure parse_measure(const std::string& name);

// X_gpsm(w) - Xbar.
Eigen::VectorXd covariate_gaps(const MatchSet& ms, const Dataset& ds);

double amd(const MatchSet& ms, const Dataset& ds);
double ks_dist(const MatchSet& ms, const Dataset& ds);
double m_dist(const MatchSet& ms, const Dataset& ds);
double wbm(const MatchSet& ms, const Dataset& ds);
// Same as wbm() with pooled coefficients computed once by the caller.
double wbm(const MatchSet& ms, const Dataset& ds, const Eigen::VectorXd& pooled_slopes);
// Slopes (no intercept) of the pooled OLS of Y on X.
Eigen::VectorXd pooled_slopes(const Dataset& ds);

struct OabmResult {
  double value = 0.0;
  Eigen::VectorXd zeta;
};

// zeta_j = 1/rho_j for covariates in the model, delta * rho_j otherwise.
OabmResult oabm(const MatchSet& ms, const Dataset& ds, const GpsModelSpec& spec, const RhoProfile& rho);
Eigen::VectorXd oabm_weights(const GpsModelSpec& spec, const RhoProfile& rho);

struct BalanceReport {
  int arm = 0;
  std::string model;
  std::map<Measure, double> values;
  std::optional<Eigen::VectorXd> zeta_ols;
  std::optional<Eigen::VectorXd> zeta_bcor;
  Eigen::VectorXd imputed_mean;
  Eigen::VectorXd sample_mean;
};

// Every measure that can be computed from the inputs; OABM entries appear only
// for the rho profiles supplied.
BalanceReport balance_report(const MatchSet& ms, const Dataset& ds, const GpsModelSpec& spec,
                             const RhoProfile* rho_ols_profile, const RhoProfile* rho_ball_profile);

}  // namespace gpsm
