#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gpsm/balance.hpp"
#include "gpsm/dataset.hpp"
#include "gpsm/mnlogit.hpp"
#include "gpsm/pipeline.hpp"

namespace gpsm {

enum class OutcomeForm { Linear, Nonlinear };

const char* to_string(OutcomeForm f);
OutcomeForm parse_outcome_form(const std::string& s);

// Three treatment levels, nine N(0,1) covariates: confounders 1-2,
// instruments 3-5, precision variables 6-8, noise 9.
struct Scenario {
  double u = 2.0;  // instrument strength in the assignment model
  double v = 2.0;  // precision-variable strength in the outcome model
  OutcomeForm outcome = OutcomeForm::Linear;
  int n_per_arm = 500;
  int replicates = 200;
  std::uint64_t base_seed = 0;
  std::vector<Measure> measures{std::begin(kAllMeasures), std::end(kAllMeasures)};
  std::vector<GpsModelSpec> models;  // empty means benchmarks()
  bool evaluate_models = true;       // also estimate with every fixed model
  // Scales every assignment coefficient; 0 gives uniform assignment.
  double assignment_strength = 1.0;
  PipelineOptions pipeline;          // measure, seed and threads are set per run
  unsigned threads = 1;              // replicate-level workers
};

inline constexpr int kSimArms = 3;
inline constexpr int kSimCovariates = 9;

// Generating coefficients: row w-1 is beta_w (intercept first).
Eigen::MatrixXd assignment_coefficients(const Scenario& sc);
// Row w-1 is theta_w (intercept first).
Eigen::MatrixXd outcome_coefficients(const Scenario& sc);
// True E{Y(w2)} - E{Y(w)}.
double true_effect(const Scenario& sc, int w, int w2);

struct SimData {
  Dataset ds;
  Eigen::MatrixXd potential;  // n x 3 potential outcomes
};

// i.i.d. draws until every arm holds n_per_arm units, then each arm is
// subsampled to exactly n_per_arm. Seeded by (base_seed, rep).
SimData generate_full(const Scenario& sc, int rep);
Dataset generate(const Scenario& sc, int rep);
// n i.i.d. units with no subsampling.
SimData generate_population(const Scenario& sc, int n, std::uint64_t seed);

// The six fixed models: C, IC, CP, all, 1357, 2468.
std::vector<GpsModelSpec> benchmarks();

struct PairSummary {
  int w = 0;
  int w2 = 0;
  double truth = 0.0;
  int count = 0;
  double mean = 0.0;
  double bias = 0.0;
  double variance = 0.0;  // n-1 denominator over replicates
  double mse = 0.0;
  double mean_se = 0.0;   // standard error of the replicate mean
  double coverage = 0.0;
};

struct MethodSummary {
  std::string method;  // measure name, or "model:<name>" for a fixed model
  bool is_measure = false;
  std::vector<PairSummary> pairs;
  std::vector<double> selection;  // per model, share of arm-level selections
};

struct ReplicateRecord {
  int rep = 0;
  bool ok = false;
  std::string error;
  // method -> per pair (tau, ci_lo, ci_hi)
  std::map<std::string, std::vector<std::array<double, 3>>> estimates;
  // measure -> selected model index per arm
  std::map<std::string, std::vector<int>> selected;
};

struct SimResult {
  Scenario scenario;
  std::vector<std::string> model_names;
  std::vector<MethodSummary> methods;
  std::vector<ReplicateRecord> replicates;
  int failures = 0;

  const MethodSummary& method(const std::string& name) const;
};

// Runs every replicate, then aggregates. Throws NumericalError if more than
// 5% of replicates fail.
SimResult run_scenario(const Scenario& sc);

}  // namespace gpsm
