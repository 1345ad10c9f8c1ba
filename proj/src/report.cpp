#include "gpsm/report.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "gpsm/common.hpp"
#include "json.hpp"

namespace gpsm {

using Json = nlohmann::ordered_json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

Json vec(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json vec(const std::vector<double>& v) { return Json(v); }

Json mat(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec(Eigen::VectorXd(m.row(r).transpose())));
  return a;
}

Json names_of(const std::vector<int>& cols, const Dataset& ds) {
  Json a = Json::array();
  for (int c : cols) a.push_back(ds.names[c]);
  return a;
}

Json fit_object(const FittedGps& f, const Dataset& ds) {
  Json j;
  j["model"] = f.spec.name;
  j["covariates"] = names_of(f.spec.covariates, ds);
  j["loglik"] = f.loglik;
  j["converged"] = f.converged;
  j["iterations"] = f.iterations;
  j["grad_norm"] = f.grad_norm;
  j["ridge_used"] = f.ridge_used;
  j["beta"] = mat(f.beta);
  Json se = Json::array();
  for (Eigen::Index k = 0; k < f.vcov.rows(); ++k) se.push_back(std::sqrt(std::max(f.vcov(k, k), 0.0)));
  j["beta_se"] = se;
  return j;
}

Json rho_object(const RhoProfile& p, const Dataset& ds) {
  Json j;
  j["metric"] = to_string(p.metric);
  j["rho"] = vec(p.rho);
  j["raw"] = vec(p.raw);
  j["delta"] = p.delta;
  if (p.metric == RhoMetric::BCor) {
    j["p_values"] = vec(p.p_values);
    j["h0"] = names_of(p.h0, ds);
    j["h1"] = names_of(p.h1, ds);
    j["bcor_star"] = p.bcor_star;
  }
  return j;
}

Json data_object(const Dataset& ds) {
  Json j;
  j["n"] = ds.n();
  j["t"] = ds.t;
  j["d"] = ds.d();
  j["outcome"] = ds.outcome_name;
  j["treatment"] = ds.treatment_name;
  j["levels"] = ds.level_labels;
  Json sizes = Json::array();
  for (int w = 1; w <= ds.t; ++w) sizes.push_back(ds.arm_size(w));
  j["arm_sizes"] = sizes;
  j["covariates"] = ds.names;
  j["standardized"] = ds.standardized;
  if (ds.standardized) {
    j["center"] = vec(ds.center);
    j["scale"] = vec(ds.scale);
  }
  return j;
}

std::string pair_label(int w, int w2) { return std::to_string(w) + "-" + std::to_string(w2); }

}  // namespace

std::string fit_json(const FittedGps& fit, const Dataset& ds) {
  Json j;
  j["schema"] = kReportSchema;
  j["data"] = data_object(ds);
  j["fit"] = fit_object(fit, ds);
  return j.dump(2) + "\n";
}

std::string selection_json(const SelectionResult& r) {
  const Dataset& ds = r.data;
  Json j;
  j["schema"] = kReportSchema;
  j["measure"] = to_string(r.measure);
  Json opt;
  opt["permutations"] = r.options.permutations;
  opt["alpha"] = r.options.alpha;
  opt["delta"] = r.options.delta ? Json(*r.options.delta) : Json(nullptr);
  opt["l_sigma"] = r.options.variance.l_sigma;
  opt["l_cov"] = r.options.variance.l_cov;
  opt["seed"] = r.options.seed;
  opt["standardize"] = r.options.standardize;
  j["options"] = opt;
  j["data"] = data_object(ds);

  Json cands = Json::array();
  for (std::size_t k = 0; k < r.candidates.size(); ++k) {
    const auto& c = r.candidates[k];
    Json e;
    e["index"] = k;
    e["name"] = c.spec.name;
    e["covariates"] = names_of(c.spec.covariates, ds);
    e["fitted"] = c.fit.has_value();
    if (c.fit)
      e["fit"] = fit_object(*c.fit, ds);
    else
      e["error"] = c.error;
    cands.push_back(e);
  }
  j["candidates"] = cands;

  Json arms = Json::array();
  for (const auto& a : r.arms) {
    Json e;
    e["arm"] = a.arm;
    e["selected"] = a.selected;
    e["selected_model"] = r.candidates[a.selected].spec.name;
    if (a.rho_ols) e["rho_ols"] = rho_object(*a.rho_ols, ds);
    if (a.rho_ball) e["rho_bcor"] = rho_object(*a.rho_ball, ds);
    Json ranking = Json::array();
    for (const auto& s : a.ranking) ranking.push_back({{"index", s.index}, {"name", s.name}, {"value", s.value}});
    e["ranking"] = ranking;
    Json bal = Json::array();
    for (std::size_t k = 0; k < a.reports.size(); ++k) {
      if (!a.reports[k]) continue;
      const auto& rep = *a.reports[k];
      Json b;
      b["index"] = k;
      b["model"] = rep.model;
      Json values;
      for (Measure m : kAllMeasures) {
        const auto it = rep.values.find(m);
        if (it != rep.values.end()) values[to_string(m)] = it->second;
      }
      b["values"] = values;
      if (rep.zeta_ols) b["zeta_ols"] = vec(*rep.zeta_ols);
      if (rep.zeta_bcor) b["zeta_bcor"] = vec(*rep.zeta_bcor);
      b["imputed_mean"] = vec(rep.imputed_mean);
      bal.push_back(b);
    }
    e["balance"] = bal;
    arms.push_back(e);
  }
  j["arms"] = arms;

  Json ate;
  ate["l_sigma"] = r.ate.l_sigma;
  ate["l_cov"] = r.ate.l_cov;
  Json ate_arms = Json::array();
  for (const auto& a : r.ate.arms)
    ate_arms.push_back({{"arm", a.arm},
                        {"model", a.model},
                        {"mu", a.mu},
                        {"sigma2", a.sigma2},
                        {"correction", a.correction},
                        {"c", vec(a.c)}});
  ate["arms"] = ate_arms;
  Json pairs = Json::array();
  for (const auto& p : r.ate.pairs)
    pairs.push_back({{"pair", pair_label(p.w, p.w2)},
                     {"estimate", p.tau},
                     {"se", p.se},
                     {"variance", p.variance},
                     {"sigma2_pair", p.sigma2_pair},
                     {"adjustment", p.adjustment},
                     {"floored", p.floored},
                     {"ci_lo", p.ci_lo},
                     {"ci_hi", p.ci_hi}});
  ate["pairs"] = pairs;
  j["ate"] = ate;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

void write_balance_csv(const SelectionResult& r, std::ostream& out) {
  out << "model,arm,measure,value\n";
  for (const auto& a : r.arms)
    for (const auto& rep : a.reports) {
      if (!rep) continue;
      for (Measure m : kAllMeasures) {
        const auto it = rep->values.find(m);
        if (it == rep->values.end()) continue;
        out << rep->model << ',' << a.arm << ',' << to_string(m) << ',' << format_double(it->second) << '\n';
      }
    }
}

void write_ate_csv(const SelectionResult& r, std::ostream& out) {
  out << "pair,estimate,se,ci_lo,ci_hi\n";
  for (const auto& p : r.ate.pairs)
    out << pair_label(p.w, p.w2) << ',' << format_double(p.tau) << ',' << format_double(p.se) << ','
        << format_double(p.ci_lo) << ',' << format_double(p.ci_hi) << '\n';
}

std::string simulation_json(const SimResult& r) {
  const Scenario& sc = r.scenario;
  Json j;
  j["schema"] = kReportSchema;
  Json s;
  s["u"] = sc.u;
  s["v"] = sc.v;
  s["outcome"] = to_string(sc.outcome);
  s["n_per_arm"] = sc.n_per_arm;
  s["replicates"] = sc.replicates;
  s["seed"] = sc.base_seed;
  Json measures = Json::array();
  for (Measure m : sc.measures) measures.push_back(to_string(m));
  s["measures"] = measures;
  s["models"] = r.model_names;
  j["scenario"] = s;
  j["failures"] = r.failures;
  Json failed = Json::array();
  for (const auto& rep : r.replicates)
    if (!rep.ok) failed.push_back({{"replicate", rep.rep}, {"error", rep.error}});
  j["failed_replicates"] = failed;
  Json methods = Json::array();
  for (const auto& m : r.methods) {
    Json e;
    e["method"] = m.method;
    Json pairs = Json::array();
    for (const auto& p : m.pairs)
      pairs.push_back({{"pair", pair_label(p.w, p.w2)},
                       {"truth", p.truth},
                       {"count", p.count},
                       {"mean", p.mean},
                       {"bias", p.bias},
                       {"variance", p.variance},
                       {"mse", p.mse},
                       {"mean_se", p.mean_se},
                       {"coverage", p.coverage}});
    e["pairs"] = pairs;
    if (m.is_measure) {
      Json sel;
      for (std::size_t k = 0; k < m.selection.size(); ++k) sel[r.model_names[k]] = m.selection[k];
      e["selection"] = sel;
    }
    methods.push_back(e);
  }
  j["methods"] = methods;
  return j.dump(2) + "\n";
}

void write_sim_estimates_csv(const SimResult& r, std::ostream& out) {
  out << "replicate,method,pair,estimate,ci_lo,ci_hi\n";
  for (const auto& rep : r.replicates) {
    if (!rep.ok) continue;
    for (const auto& m : r.methods) {
      const auto& rows = rep.estimates.at(m.method);
      for (std::size_t p = 0; p < rows.size(); ++p)
        out << rep.rep << ',' << m.method << ',' << pair_label(m.pairs[p].w, m.pairs[p].w2) << ','
            << format_double(rows[p][0]) << ',' << format_double(rows[p][1]) << ',' << format_double(rows[p][2])
            << '\n';
    }
  }
}

void write_sim_selection_csv(const SimResult& r, std::ostream& out) {
  out << "measure,model,proportion\n";
  for (const auto& m : r.methods) {
    if (!m.is_measure) continue;
    for (std::size_t k = 0; k < m.selection.size(); ++k)
      out << m.method << ',' << r.model_names[k] << ',' << format_double(m.selection[k]) << '\n';
  }
}

void write_sim_coverage_csv(const SimResult& r, std::ostream& out) {
  out << "method,pair,truth,mean,bias,variance,mse,coverage\n";
  for (const auto& m : r.methods)
    for (const auto& p : m.pairs)
      out << m.method << ',' << pair_label(p.w, p.w2) << ',' << format_double(p.truth) << ','
          << format_double(p.mean) << ',' << format_double(p.bias) << ',' << format_double(p.variance) << ','
          << format_double(p.mse) << ',' << format_double(p.coverage) << '\n';
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

}  // namespace gpsm
