#include "gpsm/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gpsm/common.hpp"
#include "gpsm/estimate.hpp"
#include "gpsm/matching.hpp"

namespace gpsm {

const char* to_string(OutcomeForm f) { return f == OutcomeForm::Linear ? "linear" : "nonlinear"; }

OutcomeForm parse_outcome_form(const std::string& s) {
  if (s == "linear") return OutcomeForm::Linear;
  if (s == "nonlinear") return OutcomeForm::Nonlinear;
  throw ValidationError("outcome form must be 'linear' or 'nonlinear', got '" + s + "'");
}

Eigen::MatrixXd assignment_coefficients(const Scenario& sc) {
  Eigen::RowVectorXd base(kSimCovariates + 1);
  base << 0, 1.5, 1.5, sc.u, sc.u, sc.u, 0, 0, 0, 0;
  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(kSimArms, kSimCovariates + 1);
  beta.row(1) = 0.7 * sc.assignment_strength * base;
  beta.row(2) = 0.4 * sc.assignment_strength * base;
  return beta;
}

Eigen::MatrixXd outcome_coefficients(const Scenario& sc) {
  const double v = sc.v;
  Eigen::MatrixXd theta(kSimArms, kSimCovariates + 1);
  theta.row(0) << -1.5, 1.5, 1.5, 0, 0, 0, v, v, v, 0;
  theta.row(1) << -3.0, 1.5, 1.5, 0, 0, 0, v, v, v, 0;
  theta.row(2) << 1.5, 1.5, 1.5, 0, 0, 0, -v, -v, -v, 0;
  return theta;
}

double true_effect(const Scenario& sc, int w, int w2) {
  // Every non-intercept regressor has mean zero in both outcome forms.
  const Eigen::MatrixXd theta = outcome_coefficients(sc);
  return theta(w2 - 1, 0) - theta(w - 1, 0);
}

namespace {

void validate_scenario(const Scenario& sc) {
  if (sc.n_per_arm < 50) throw ValidationError("n_per_arm must be at least 50");
  if (sc.replicates < 1) throw ValidationError("replicates must be at least 1");
  if (!std::isfinite(sc.u) || !std::isfinite(sc.v) || !std::isfinite(sc.assignment_strength))
    throw ValidationError("scenario parameters must be finite");
}

struct Draw {
  Eigen::RowVectorXd x;
  int w;
  Eigen::RowVector3d po;
};

class UnitSampler {
 public:
  UnitSampler(const Scenario& sc, std::uint64_t seed)
      : beta_(assignment_coefficients(sc)), theta_(outcome_coefficients(sc)), nonlinear_(sc.outcome == OutcomeForm::Nonlinear),
        rng_(seed) {}

  Draw next() {
    Draw d;
    d.x.resize(kSimCovariates);
    for (int j = 0; j < kSimCovariates; ++j) d.x[j] = normal_(rng_);
    Eigen::VectorXd design(kSimCovariates + 1);
    design[0] = 1.0;
    design.tail(kSimCovariates) = d.x.transpose();
    const Eigen::VectorXd eta = beta_ * design;
    const double m = eta.maxCoeff();
    const Eigen::ArrayXd e = (eta.array() - m).exp();
    const double u = unif_(rng_) * e.sum();
    double acc = 0.0;
    d.w = kSimArms;
    for (int k = 0; k < kSimArms; ++k) {
      acc += e[k];
      if (u < acc) {
        d.w = k + 1;
        break;
      }
    }
    Eigen::VectorXd f = design;
    if (nonlinear_) f.tail(kSimCovariates) = (d.x.array().square() - 1.0).transpose() / 2.0;
    const double noise = normal_(rng_);
    d.po = (theta_ * f).transpose().array() + noise;
    return d;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  Eigen::MatrixXd beta_, theta_;
  bool nonlinear_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

SimData assemble(const std::vector<Draw>& draws) {
  const int n = static_cast<int>(draws.size());
  Eigen::VectorXd y(n);
  std::vector<int> w(n);
  Eigen::MatrixXd x(n, kSimCovariates);
  Eigen::MatrixXd po(n, kSimArms);
  for (int i = 0; i < n; ++i) {
    x.row(i) = draws[i].x;
    w[i] = draws[i].w;
    po.row(i) = draws[i].po;
    y[i] = draws[i].po[w[i] - 1];
  }
  std::vector<std::string> names;
  for (int j = 1; j <= kSimCovariates; ++j) names.push_back("x" + std::to_string(j));
  SimData out;
  out.ds = make_dataset(std::move(y), std::move(w), std::move(x), std::move(names), kSimArms);
  out.ds.roles = {CovariateRole::Confounder, CovariateRole::Confounder, CovariateRole::Instrument,
                  CovariateRole::Instrument, CovariateRole::Instrument, CovariateRole::Precision,
                  CovariateRole::Precision,  CovariateRole::Precision,  CovariateRole::Noise};
  out.ds.level_labels = {"1", "2", "3"};
  out.potential = std::move(po);
  return out;
}

}  // namespace

SimData generate_full(const Scenario& sc, int rep) {
  validate_scenario(sc);
  UnitSampler sampler(sc, derive_seed(sc.base_seed, static_cast<std::uint64_t>(rep)));
  const long budget = 100L * kSimArms * sc.n_per_arm;
  std::vector<Draw> draws;
  std::array<int, kSimArms> counts{};
  for (long k = 0;; ++k) {
    if (*std::min_element(counts.begin(), counts.end()) >= sc.n_per_arm) break;
    if (k >= budget)
      throw NumericalError("an arm did not reach " + std::to_string(sc.n_per_arm) + " units within " +
                           std::to_string(budget) + " draws");
    draws.push_back(sampler.next());
    ++counts[draws.back().w - 1];
  }
  std::vector<int> keep;
  for (int w = 1; w <= kSimArms; ++w) {
    std::vector<int> arm;
    for (int i = 0; i < static_cast<int>(draws.size()); ++i)
      if (draws[i].w == w) arm.push_back(i);
    std::shuffle(arm.begin(), arm.end(), sampler.rng());
    keep.insert(keep.end(), arm.begin(), arm.begin() + sc.n_per_arm);
  }
  std::sort(keep.begin(), keep.end());
  std::vector<Draw> kept;
  kept.reserve(keep.size());
  for (int i : keep) kept.push_back(std::move(draws[i]));
  return assemble(kept);
}

Dataset generate(const Scenario& sc, int rep) { return generate_full(sc, rep).ds; }

SimData generate_population(const Scenario& sc, int n, std::uint64_t seed) {
  if (n < 2) throw ValidationError("population size must be at least 2");
  UnitSampler sampler(sc, seed);
  std::vector<Draw> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) draws.push_back(sampler.next());
  return assemble(draws);
}

std::vector<GpsModelSpec> benchmarks() {
  return {
      {"C", {0, 1}},
      {"IC", {0, 1, 2, 3, 4}},
      {"CP", {0, 1, 5, 6, 7}},
      {"all", {0, 1, 2, 3, 4, 5, 6, 7, 8}},
      {"1357", {0, 2, 4, 6}},
      {"2468", {1, 3, 5, 7}},
  };
}

const MethodSummary& SimResult::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.method == name) return m;
  throw ValidationError("no results for method '" + name + "'");
}

namespace {

using PairRow = std::array<double, 3>;

std::vector<PairRow> pair_rows(const std::vector<std::vector<MatchSet>>& matches,
                               const std::vector<std::vector<ArmEstimate>>& est, const std::vector<int>& chosen) {
  std::vector<PairRow> rows;
  for (int w = 1; w <= kSimArms; ++w)
    for (int w2 = w + 1; w2 <= kSimArms; ++w2) {
      const int a = chosen[w - 1], b = chosen[w2 - 1];
      const PairEstimate p = pair_estimate(matches[a][w - 1], matches[b][w2 - 1], est[a][w - 1], est[b][w2 - 1]);
      rows.push_back({p.tau, p.ci_lo, p.ci_hi});
    }
  return rows;
}

ReplicateRecord run_replicate(const Scenario& sc, const std::vector<GpsModelSpec>& models, int rep) {
  ReplicateRecord rec;
  rec.rep = rep;
  PipelineOptions opts = sc.pipeline;
  opts.threads = 1;
  opts.standardize = false;
  opts.seed = derive_seed(derive_seed(sc.base_seed, static_cast<std::uint64_t>(rep)), 1);

  const Dataset data = standardize(generate(sc, rep));
  const Prepared prep = prepare(data, models, opts);
  for (const auto& c : prep.candidates)
    if (!c.fit) throw NumericalError("model '" + c.spec.name + "' failed to fit: " + c.error);

  const int m = static_cast<int>(models.size());
  std::vector<std::vector<MatchSet>> matches(m);
  std::vector<std::vector<ArmEstimate>> est(m);
  for (int k = 0; k < m; ++k)
    for (int w = 1; w <= kSimArms; ++w) {
      const FittedGps& f = *prep.candidates[k].fit;
      const Eigen::VectorXd scores = f.scores(w);
      matches[k].push_back(match_arm(data, {scores.data(), static_cast<std::size_t>(scores.size())}, w));
      est[k].push_back(estimate_arm(matches[k].back(), data, f, k, opts.variance));
    }

  if (sc.evaluate_models)
    for (int k = 0; k < m; ++k)
      rec.estimates["model:" + models[k].name] = pair_rows(matches, est, std::vector<int>(kSimArms, k));

  if (!sc.measures.empty()) {
    const bool need_ball = std::find(sc.measures.begin(), sc.measures.end(), Measure::OabmBcor) != sc.measures.end();
    opts.measure = need_ball ? Measure::OabmBcor : Measure::OabmOls;
    std::vector<ArmSelection> arms;
    for (int w = 1; w <= kSimArms; ++w) arms.push_back(score_arm(prep, w, opts));
    for (Measure measure : sc.measures) {
      std::vector<int> chosen;
      for (const auto& arm : arms) chosen.push_back(rank_reports(prep, arm.reports, measure).front().index);
      rec.estimates[to_string(measure)] = pair_rows(matches, est, chosen);
      rec.selected[to_string(measure)] = chosen;
    }
  }
  rec.ok = true;
  return rec;
}

PairSummary summarize(const std::vector<const ReplicateRecord*>& ok, const std::string& method, int pair, int w,
                      int w2, double truth) {
  PairSummary s;
  s.w = w;
  s.w2 = w2;
  s.truth = truth;
  std::vector<PairRow> rows;
  for (const auto* r : ok) rows.push_back(r->estimates.at(method)[pair]);
  s.count = static_cast<int>(rows.size());
  if (rows.empty()) return s;
  double sum = 0.0, sq = 0.0;
  int covered = 0;
  for (const auto& row : rows) {
    sum += row[0];
    sq += (row[0] - truth) * (row[0] - truth);
    if (row[1] <= truth && truth <= row[2]) ++covered;
  }
  s.mean = sum / s.count;
  s.bias = s.mean - truth;
  s.mse = sq / s.count;
  double var = 0.0;
  for (const auto& row : rows) var += (row[0] - s.mean) * (row[0] - s.mean);
  s.variance = s.count > 1 ? var / (s.count - 1) : 0.0;
  s.mean_se = std::sqrt(s.variance / s.count);
  s.coverage = static_cast<double>(covered) / s.count;
  return s;
}

}  // namespace

SimResult run_scenario(const Scenario& sc) {
  validate_scenario(sc);
  const std::vector<GpsModelSpec> models = sc.models.empty() ? benchmarks() : sc.models;
  for (const auto& spec : models) validate_spec(spec, kSimCovariates);

  SimResult res;
  res.scenario = sc;
  for (const auto& spec : models) res.model_names.push_back(spec.name);
  res.replicates.resize(sc.replicates);
  parallel_for(static_cast<std::size_t>(sc.replicates), sc.threads, [&](std::size_t r) {
    try {
      res.replicates[r] = run_replicate(sc, models, static_cast<int>(r));
    } catch (const std::runtime_error& e) {
      res.replicates[r].rep = static_cast<int>(r);
      res.replicates[r].ok = false;
      res.replicates[r].error = e.what();
    }
  });

  std::vector<const ReplicateRecord*> ok;
  for (const auto& r : res.replicates) {
    if (r.ok)
      ok.push_back(&r);
    else
      ++res.failures;
  }
  if (res.failures > 0.05 * sc.replicates) {
    std::string first;
    for (const auto& r : res.replicates)
      if (!r.ok) {
        first = r.error;
        break;
      }
    throw NumericalError(std::to_string(res.failures) + " of " + std::to_string(sc.replicates) +
                         " replicates failed (limit 5%); first failure: " + first);
  }

  std::vector<std::pair<std::string, bool>> methods;
  for (Measure m : sc.measures) methods.emplace_back(to_string(m), true);
  if (sc.evaluate_models)
    for (const auto& spec : models) methods.emplace_back("model:" + spec.name, false);

  for (const auto& [name, is_measure] : methods) {
    MethodSummary ms;
    ms.method = name;
    ms.is_measure = is_measure;
    int pair = 0;
    for (int w = 1; w <= kSimArms; ++w)
      for (int w2 = w + 1; w2 <= kSimArms; ++w2)
        ms.pairs.push_back(summarize(ok, name, pair++, w, w2, true_effect(sc, w, w2)));
    if (is_measure) {
      ms.selection.assign(models.size(), 0.0);
      long total = 0;
      for (const auto* r : ok)
        for (int k : r->selected.at(name)) {
          ms.selection[k] += 1.0;
          ++total;
        }
      if (total > 0)
        for (double& p : ms.selection) p /= static_cast<double>(total);
    }
    res.methods.push_back(std::move(ms));
  }
  return res;
}

}  // namespace gpsm
