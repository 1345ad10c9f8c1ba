#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gpsm/balance.hpp"
#include "gpsm/correlation.hpp"
#include "gpsm/dataset.hpp"
#include "gpsm/estimate.hpp"
#include "gpsm/matching.hpp"
#include "gpsm/mnlogit.hpp"

namespace gpsm {

struct PipelineOptions {
  Measure measure = Measure::OabmOls;
  int permutations = 199;             // ball-correlation permutation test
  double alpha = 0.05;                // its level
  std::optional<double> delta;        // overrides delta_w for OABM when set
  VarianceOptions variance;
  FitOptions fit;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool standardize = true;
};

struct CandidateFit {
  GpsModelSpec spec;
  std::optional<FittedGps> fit;  // empty if fitting failed
  std::string error;
};

struct CandidateScore {
  int index = 0;  // position in the candidate list
  std::string name;
  int size = 0;
  double value = 0.0;
};

struct ArmSelection {
  int arm = 0;
  std::vector<CandidateScore> ranking;  // ascending by (value, size, index)
  int selected = -1;
  std::optional<RhoProfile> rho_ols;
  std::optional<RhoProfile> rho_ball;
  std::vector<std::optional<BalanceReport>> reports;  // per candidate; empty if the fit failed
};

struct SelectionResult {
  Measure measure = Measure::OabmOls;
  PipelineOptions options;
  std::vector<CandidateFit> candidates;
  std::vector<ArmSelection> arms;  // arm w at position w-1
  AteReport ate;
  std::vector<std::string> warnings;
  Dataset data;  // as analysed (standardized when requested)
};

// The per-arm scoring state shared by rank_models and run.
struct Prepared {
  Dataset data;
  std::vector<CandidateFit> candidates;
  std::vector<std::string> warnings;
};

// Step 0 and Step 1: optional standardization and candidate fits. Fit failures
// are recorded, not thrown, unless every candidate fails.
Prepared prepare(const Dataset& ds, const std::vector<GpsModelSpec>& candidates, const PipelineOptions& opts);

// Scores every fitted candidate at arm w under opts.measure.
ArmSelection score_arm(const Prepared& prep, int w, const PipelineOptions& opts);

// Orders the candidates with a report by `measure` (ties: fewer covariates,
// then lower index).
std::vector<CandidateScore> rank_reports(const Prepared& prep, const std::vector<std::optional<BalanceReport>>& reports,
                                         Measure measure);

// Candidates at arm w ordered by balance value (ties: fewer covariates, then
// lower index). Failed fits are left out.
std::vector<CandidateScore> rank_models(const Dataset& ds, const std::vector<GpsModelSpec>& candidates, int w,
                                        const PipelineOptions& opts);

// Steps 0-3: fit, select per arm, estimate all pairwise effects.
SelectionResult run(const Dataset& ds, const std::vector<GpsModelSpec>& candidates, const PipelineOptions& opts);
SelectionResult run(Prepared prep, const PipelineOptions& opts);

// Every covariate subset (including the intercept-only model), smallest
// first. Requires d <= 12.
std::vector<GpsModelSpec> enumerate_subsets(const Dataset& ds);

}  // namespace gpsm
