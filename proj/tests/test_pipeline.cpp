#include <algorithm>
#include <set>

#include "doctest.h"
#include "gpsm/pipeline.hpp"
#include "support.hpp"

using namespace gpsm;

namespace {

// Three arms driven by x1 and x2, outcome driven by x1 and x3.
Dataset confounded(testing::Rng& g, int n) {
  Eigen::MatrixXd x(n, 4);
  Eigen::VectorXd y(n);
  std::vector<int> w(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = testing::normal(g);
    const double e2 = std::exp(0.6 * x(i, 0) + 0.8 * x(i, 1)), e3 = std::exp(-0.5 * x(i, 0) + 0.4 * x(i, 1));
    const double u = testing::uniform(g) * (1 + e2 + e3);
    w[i] = i < 3 ? i + 1 : (u < 1 ? 1 : (u < 1 + e2 ? 2 : 3));
    y[i] = w[i] + x(i, 0) + 2 * x(i, 2) + testing::normal(g);
  }
  return make_dataset(y, w, x, {"x1", "x2", "x3", "x4"}, 3);
}

const std::vector<GpsModelSpec> kCandidates{
    {"c", {0}}, {"ci", {0, 1}}, {"cp", {0, 2}}, {"all", {0, 1, 2, 3}}, {"n", {3}}};

}  // namespace

TEST_CASE("a single candidate is selected for every arm") {
  testing::Rng g(71);
  const Dataset ds = confounded(g, 150);
  for (Measure m : {Measure::Amd, Measure::OabmOls, Measure::KsDist}) {
    PipelineOptions opts;
    opts.measure = m;
    const SelectionResult r = run(ds, {{"only", {0, 1}}}, opts);
    REQUIRE(r.arms.size() == 3);
    for (const auto& a : r.arms) CHECK(a.selected == 0);
    CHECK(r.ate.pairs.size() == 3);
  }
}

TEST_CASE("identical candidates: the lower index wins") {
  testing::Rng g(72);
  const Dataset ds = confounded(g, 150);
  const SelectionResult r = run(ds, {{"first", {0, 2}}, {"second", {0, 2}}}, {});
  for (const auto& a : r.arms) {
    CHECK(a.selected == 0);
    CHECK(a.ranking[0].value == a.ranking[1].value);
  }
}

TEST_CASE("equal values: fewer covariates win") {
  testing::Rng g(73);
  const Dataset ds = confounded(g, 150);
  const Prepared prep = prepare(ds, {{"big", {0, 1}}, {"small", {0}}}, {});
  std::vector<std::optional<BalanceReport>> reports(2);
  for (auto& r : reports) {
    r.emplace();
    r->values[Measure::Amd] = 1.0;
  }
  const auto ranking = rank_reports(prep, reports, Measure::Amd);
  CHECK(ranking[0].index == 1);
  CHECK_THROWS_AS(rank_reports(prep, reports, Measure::Wbm), ValidationError);
}

TEST_CASE("ranking is a permutation and values equal standalone balance calls") {
  testing::Rng g(74);
  const Dataset ds = confounded(g, 240);
  for (Measure m : {Measure::OabmOls, Measure::Amd, Measure::MDist, Measure::Wbm, Measure::KsDist}) {
    PipelineOptions opts;
    opts.measure = m;
    for (int w = 1; w <= 3; ++w) {
      const auto ranking = rank_models(ds, kCandidates, w, opts);
      std::set<int> seen;
      for (const auto& s : ranking) seen.insert(s.index);
      CHECK(seen.size() == kCandidates.size());
      for (std::size_t k = 1; k < ranking.size(); ++k) CHECK(ranking[k - 1].value <= ranking[k].value);

      const Dataset st = standardize(ds);
      const RhoProfile rho = rho_ols(st, w);
      for (const auto& s : ranking) {
        const FittedGps f = fit(st, kCandidates[s.index]);
        const Eigen::VectorXd sc = f.scores(w);
        const MatchSet ms = match_arm(st, testing::as_span(sc), w);
        double expected = 0;
        switch (m) {
          case Measure::OabmOls: expected = oabm(ms, st, kCandidates[s.index], rho).value; break;
          case Measure::Amd: expected = amd(ms, st); break;
          case Measure::MDist: expected = m_dist(ms, st); break;
          case Measure::Wbm: expected = wbm(ms, st); break;
          case Measure::KsDist: expected = ks_dist(ms, st); break;
          default: break;
        }
        CHECK(s.value == expected);
      }
    }
  }
}

TEST_CASE("reordering candidates selects the same models") {
  testing::Rng g(75);
  const Dataset ds = confounded(g, 300);
  std::vector<GpsModelSpec> reversed(kCandidates.rbegin(), kCandidates.rend());
  const SelectionResult a = run(ds, kCandidates, {});
  const SelectionResult b = run(ds, reversed, {});
  for (int w = 0; w < 3; ++w) {
    CHECK(kCandidates[a.arms[w].selected].name == reversed[b.arms[w].selected].name);
    CHECK(a.ate.pairs[w].tau == b.ate.pairs[w].tau);
  }
}

TEST_CASE("runs are deterministic and thread-count independent") {
  testing::Rng g(76);
  const Dataset ds = confounded(g, 200);
  PipelineOptions opts;
  opts.measure = Measure::OabmBcor;
  opts.permutations = 19;
  opts.seed = 5;
  const SelectionResult a = run(ds, kCandidates, opts);
  opts.threads = 3;
  const SelectionResult b = run(ds, kCandidates, opts);
  for (int w = 0; w < 3; ++w) {
    CHECK(a.arms[w].selected == b.arms[w].selected);
    CHECK(a.arms[w].rho_ball->p_values == b.arms[w].rho_ball->p_values);
    CHECK(a.ate.pairs[w].variance == b.ate.pairs[w].variance);
  }
}

TEST_CASE("a candidate that fails to fit is excluded with a warning") {
  testing::Rng g(77);
  Dataset ds = confounded(g, 120);
  // x4 becomes a perfect separator of arm 1.
  for (int i = 0; i < ds.n(); ++i) ds.x(i, 3) = (ds.w[i] == 1 ? -1.0 : 1.0) * (1.0 + testing::uniform(g));
  const SelectionResult r = run(ds, {{"sep", {3}}, {"ok", {0, 1}}}, {});
  CHECK_FALSE(r.candidates[0].fit.has_value());
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("'sep'") != std::string::npos);
  for (const auto& a : r.arms) CHECK(a.selected == 1);
  CHECK_THROWS_AS(run(ds, {{"sep", {3}}}, {}), NumericalError);
}

TEST_CASE("option and candidate validation") {
  testing::Rng g(78);
  const Dataset ds = confounded(g, 100);
  CHECK_THROWS_AS(run(ds, {}, {}), ValidationError);
  CHECK_THROWS_AS(run(ds, {{"bad", {7}}}, {}), ValidationError);
  PipelineOptions opts;
  opts.delta = -1.0;
  CHECK_THROWS_AS(run(ds, kCandidates, opts), ValidationError);
}

TEST_CASE("subset enumeration") {
  testing::Rng g(79);
  const Dataset ds = testing::random_dataset(g, 30, 2, 3);
  const auto subsets = enumerate_subsets(ds);
  REQUIRE(subsets.size() == 8);
  CHECK(subsets[0].covariates.empty());
  CHECK(subsets[0].name == "(intercept)");
  CHECK(subsets.back().name == "x1+x2+x3");
  std::set<std::vector<int>> distinct;
  for (const auto& s : subsets) distinct.insert(s.covariates);
  CHECK(distinct.size() == 8);
  for (std::size_t k = 1; k < subsets.size(); ++k) CHECK(subsets[k - 1].size() <= subsets[k].size());
  CHECK_THROWS_AS(enumerate_subsets(testing::random_dataset(g, 30, 2, 13)), ValidationError);
}
