#include "gpsm/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "gpsm/common.hpp"

namespace gpsm {

Prepared prepare(const Dataset& ds, const std::vector<GpsModelSpec>& candidates, const PipelineOptions& opts) {
  if (candidates.empty()) throw ValidationError("at least one candidate model is required");
  validate(ds);
  for (const auto& spec : candidates) validate_spec(spec, ds.d());

  Prepared prep;
  prep.data = opts.standardize && !ds.standardized ? standardize(ds) : ds;
  prep.candidates.resize(candidates.size());
  parallel_for(candidates.size(), opts.threads, [&](std::size_t k) {
    CandidateFit& c = prep.candidates[k];
    c.spec = candidates[k];
    try {
      c.fit = fit(prep.data, c.spec, opts.fit);
    } catch (const NumericalError& e) {
      c.error = e.what();
    }
  });
  for (const auto& c : prep.candidates)
    if (!c.fit) prep.warnings.push_back("candidate '" + c.spec.name + "' excluded: " + c.error);
  if (std::none_of(prep.candidates.begin(), prep.candidates.end(), [](const CandidateFit& c) { return c.fit; }))
    throw NumericalError("every candidate GPS model failed to fit");
  return prep;
}

ArmSelection score_arm(const Prepared& prep, int w, const PipelineOptions& opts) {
  const Dataset& ds = prep.data;
  ArmSelection arm;
  arm.arm = w;
  if (opts.measure == Measure::OabmOls) {
    arm.rho_ols = rho_ols(ds, w);
  } else {
    try {
      arm.rho_ols = rho_ols(ds, w);
    } catch (const std::runtime_error&) {
      // Only needed for the audit trail when another measure drives selection.
    }
  }
  if (opts.measure == Measure::OabmBcor) {
    BallOptions bo;
    bo.permutations = opts.permutations;
    bo.alpha = opts.alpha;
    bo.seed = derive_seed(opts.seed, static_cast<std::uint64_t>(w));
    bo.threads = opts.threads;
    arm.rho_ball = rho_ball(ds, w, bo);
  }
  if (opts.delta) {
    if (!(*opts.delta > 0.0)) throw ValidationError("delta override must be positive");
    if (arm.rho_ols) arm.rho_ols->delta = *opts.delta;
    if (arm.rho_ball) arm.rho_ball->delta = *opts.delta;
  }

  const auto& cands = prep.candidates;
  arm.reports.resize(cands.size());
  parallel_for(cands.size(), opts.threads, [&](std::size_t k) {
    if (!cands[k].fit) return;
    const Eigen::VectorXd scores = cands[k].fit->scores(w);
    const MatchSet ms = match_arm(ds, {scores.data(), static_cast<std::size_t>(scores.size())}, w);
    arm.reports[k] = balance_report(ms, ds, cands[k].spec, arm.rho_ols ? &*arm.rho_ols : nullptr,
                                    arm.rho_ball ? &*arm.rho_ball : nullptr);
  });

  arm.ranking = rank_reports(prep, arm.reports, opts.measure);
  arm.selected = arm.ranking.front().index;
  return arm;
}

std::vector<CandidateScore> rank_reports(const Prepared& prep, const std::vector<std::optional<BalanceReport>>& reports,
                                         Measure measure) {
  std::vector<CandidateScore> ranking;
  for (std::size_t k = 0; k < reports.size(); ++k) {
    if (!reports[k]) continue;
    const auto it = reports[k]->values.find(measure);
    if (it == reports[k]->values.end())
      throw ValidationError(std::string("balance measure ") + to_string(measure) + " was not computed");
    CandidateScore s;
    s.index = static_cast<int>(k);
    s.name = prep.candidates[k].spec.name;
    s.size = prep.candidates[k].spec.size();
    s.value = it->second;
    ranking.push_back(s);
  }
  std::sort(ranking.begin(), ranking.end(), [](const CandidateScore& a, const CandidateScore& b) {
    if (a.value != b.value) return a.value < b.value;
    if (a.size != b.size) return a.size < b.size;
    return a.index < b.index;
  });
  return ranking;
}

std::vector<CandidateScore> rank_models(const Dataset& ds, const std::vector<GpsModelSpec>& candidates, int w,
                                        const PipelineOptions& opts) {
  if (w < 1 || w > ds.t) throw ValidationError("arm " + std::to_string(w) + " out of range");
  return score_arm(prepare(ds, candidates, opts), w, opts).ranking;
}

SelectionResult run(Prepared prep, const PipelineOptions& opts) {
  SelectionResult r;
  r.measure = opts.measure;
  r.options = opts;
  const int t = prep.data.t;
  for (int w = 1; w <= t; ++w) r.arms.push_back(score_arm(prep, w, opts));

  std::vector<MatchSet> matches;
  std::vector<const FittedGps*> fits;
  std::vector<int> model_index;
  for (int w = 1; w <= t; ++w) {
    const int k = r.arms[w - 1].selected;
    const FittedGps& f = *prep.candidates[k].fit;
    const Eigen::VectorXd scores = f.scores(w);
    matches.push_back(match_arm(prep.data, {scores.data(), static_cast<std::size_t>(scores.size())}, w));
    fits.push_back(&f);
    model_index.push_back(k);
  }
  r.ate = estimate_ate(prep.data, matches, fits, model_index, opts.variance);
  r.candidates = std::move(prep.candidates);
  r.warnings = std::move(prep.warnings);
  r.data = std::move(prep.data);
  return r;
}

SelectionResult run(const Dataset& ds, const std::vector<GpsModelSpec>& candidates, const PipelineOptions& opts) {
  return run(prepare(ds, candidates, opts), opts);
}

std::vector<GpsModelSpec> enumerate_subsets(const Dataset& ds) {
  const int d = ds.d();
  if (d > 12) throw ValidationError("subset enumeration supports d <= 12, got " + std::to_string(d));
  std::vector<unsigned> masks((1u << d));
  for (unsigned m = 0; m < masks.size(); ++m) masks[m] = m;
  std::stable_sort(masks.begin(), masks.end(),
                   [](unsigned a, unsigned b) { return std::popcount(a) < std::popcount(b); });
  std::vector<GpsModelSpec> out;
  for (unsigned m : masks) {
    GpsModelSpec s;
    for (int j = 0; j < d; ++j)
      if (m >> j & 1u) {
        s.covariates.push_back(j);
        s.name += (s.name.empty() ? "" : "+") + ds.names[j];
      }
    if (s.name.empty()) s.name = "(intercept)";
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace gpsm
