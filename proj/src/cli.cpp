#include "gpsm/cli.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "gpsm/common.hpp"
#include "gpsm/correlation.hpp"
#include "gpsm/report.hpp"

namespace gpsm::cli {

namespace {

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw ValidationError(where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ValidationError("unknown configuration key '" + key + "' in " + where);
  }
}

template <class T>
T get(const YAML::Node& node, const std::string& key) {
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ValidationError("configuration key '" + key + "' has the wrong type");
  }
}

std::vector<std::string> get_list(const YAML::Node& node, const std::string& key) {
  const YAML::Node v = node[key];
  if (v.IsScalar()) return {v.as<std::string>()};
  if (!v.IsSequence()) throw ValidationError("configuration key '" + key + "' must be a list");
  return get<std::vector<std::string>>(node, key);
}

YAML::Node parse_yaml(const std::string& text) {
  try {
    YAML::Node root = YAML::Load(text);
    if (root.IsNull()) return YAML::Node(YAML::NodeType::Map);
    return root;
  } catch (const YAML::Exception& e) {
    throw ValidationError(std::string("malformed configuration: ") + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void apply_rho(const YAML::Node& rho, PipelineOptions& p) {
  check_keys(rho, "rho", {"permutations", "alpha", "delta"});
  if (rho["permutations"]) p.permutations = get<int>(rho, "permutations");
  if (rho["alpha"]) p.alpha = get<double>(rho, "alpha");
  if (rho["delta"] && !rho["delta"].IsNull()) p.delta = get<double>(rho, "delta");
}

void apply_variance(const YAML::Node& var, PipelineOptions& p) {
  check_keys(var, "variance", {"l_sigma", "l_cov"});
  if (var["l_sigma"]) p.variance.l_sigma = get<int>(var, "l_sigma");
  if (var["l_cov"]) p.variance.l_cov = get<int>(var, "l_cov");
}

std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed, std::ostream& err) {
  if (seed) return *seed;
  const std::uint64_t s = entropy_seed();
  err << "gpsm: no --seed given; using seed " << s << "\n";
  return s;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const YAML::Exception& e) {
    err << "error: configuration: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

}  // namespace

RunConfig parse_run_config(const std::string& yaml_text) {
  const YAML::Node root = parse_yaml(yaml_text);
  check_keys(root, "configuration",
             {"input", "outcome", "treatment", "exclude", "categorical", "levels", "candidates", "enumerate",
              "measure", "rho", "variance", "seed", "threads", "output", "standardize"});
  RunConfig cfg;
  if (root["input"]) cfg.input = get<std::string>(root, "input");
  if (root["outcome"]) cfg.schema.outcome = get<std::string>(root, "outcome");
  if (root["treatment"]) cfg.schema.treatment = get<std::string>(root, "treatment");
  if (root["exclude"]) cfg.schema.exclude = get_list(root, "exclude");
  if (root["categorical"]) cfg.schema.categorical = get_list(root, "categorical");
  if (root["levels"]) cfg.schema.levels = get<int>(root, "levels");
  if (root["candidates"]) {
    const YAML::Node list = root["candidates"];
    if (!list.IsSequence()) throw ValidationError("'candidates' must be a list");
    for (const auto& item : list) {
      check_keys(item, "candidates entry", {"name", "covariates"});
      CandidateDef def;
      if (!item["name"]) throw ValidationError("every candidate needs a 'name'");
      def.name = get<std::string>(item, "name");
      if (item["covariates"] && !item["covariates"].IsNull()) def.covariates = get_list(item, "covariates");
      cfg.candidates.push_back(std::move(def));
    }
  }
  if (root["enumerate"]) cfg.enumerate = get<bool>(root, "enumerate");
  if (root["measure"]) cfg.pipeline.measure = parse_measure(get<std::string>(root, "measure"));
  if (root["rho"]) apply_rho(root["rho"], cfg.pipeline);
  if (root["variance"]) apply_variance(root["variance"], cfg.pipeline);
  if (root["seed"]) cfg.seed = get<std::uint64_t>(root, "seed");
  if (root["threads"]) cfg.threads = get<unsigned>(root, "threads");
  if (root["output"]) cfg.output = get<std::string>(root, "output");
  if (root["standardize"]) cfg.pipeline.standardize = get<bool>(root, "standardize");
  return cfg;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

void validate_run_config(const RunConfig& cfg) {
  if (cfg.input.empty()) throw ValidationError("no input file (set 'input' or pass --input)");
  if (cfg.candidates.empty() && !cfg.enumerate)
    throw ValidationError("no candidate models (set 'candidates', pass --model, or use --enumerate)");
  std::set<std::string> names;
  for (const auto& c : cfg.candidates)
    if (!names.insert(c.name).second) throw ValidationError("duplicate candidate name '" + c.name + "'");
  if (cfg.pipeline.permutations < 1) throw ValidationError("rho.permutations must be at least 1");
  if (!(cfg.pipeline.alpha > 0.0 && cfg.pipeline.alpha < 1.0)) throw ValidationError("rho.alpha must be in (0, 1)");
  if (cfg.pipeline.delta && !(*cfg.pipeline.delta > 0.0)) throw ValidationError("rho.delta must be positive");
  if (cfg.pipeline.variance.l_sigma < 1) throw ValidationError("variance.l_sigma must be at least 1");
  if (cfg.pipeline.variance.l_cov < 2) throw ValidationError("variance.l_cov must be at least 2");
  if (cfg.threads < 1) throw ValidationError("threads must be at least 1");
}

SimConfig parse_sim_config(const std::string& yaml_text) {
  const YAML::Node root = parse_yaml(yaml_text);
  check_keys(root, "configuration",
             {"u", "v", "outcome", "n_per_arm", "replicates", "seed", "measures", "models", "threads", "output",
              "rho", "variance", "assignment_strength"});
  SimConfig cfg;
  Scenario& sc = cfg.scenario;
  if (root["u"]) sc.u = get<double>(root, "u");
  if (root["v"]) sc.v = get<double>(root, "v");
  if (root["outcome"]) sc.outcome = parse_outcome_form(get<std::string>(root, "outcome"));
  if (root["n_per_arm"]) sc.n_per_arm = get<int>(root, "n_per_arm");
  if (root["replicates"]) sc.replicates = get<int>(root, "replicates");
  if (root["seed"]) cfg.seed = get<std::uint64_t>(root, "seed");
  if (root["measures"]) {
    sc.measures.clear();
    for (const auto& m : get_list(root, "measures")) sc.measures.push_back(parse_measure(m));
  }
  if (root["models"]) sc.evaluate_models = get<bool>(root, "models");
  if (root["threads"]) sc.threads = get<unsigned>(root, "threads");
  if (root["output"]) cfg.output = get<std::string>(root, "output");
  if (root["rho"]) apply_rho(root["rho"], sc.pipeline);
  if (root["variance"]) apply_variance(root["variance"], sc.pipeline);
  if (root["assignment_strength"]) sc.assignment_strength = get<double>(root, "assignment_strength");
  return cfg;
}

CandidateDef parse_model_flag(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("--model expects NAME=col1,col2, got '" + text + "'");
  CandidateDef def;
  def.name = text.substr(0, eq);
  std::stringstream rest(text.substr(eq + 1));
  std::string col;
  while (std::getline(rest, col, ','))
    if (!col.empty()) def.covariates.push_back(col);
  return def;
}

std::vector<GpsModelSpec> resolve_candidates(const RunConfig& cfg, const Dataset& ds) {
  std::vector<GpsModelSpec> out;
  for (const auto& c : cfg.candidates) {
    GpsModelSpec spec;
    spec.name = c.name;
    for (const auto& col : c.covariates) {
      const auto j = ds.column(col);
      if (!j) throw ValidationError("candidate '" + c.name + "' names unknown covariate '" + col + "'");
      spec.covariates.push_back(*j);
    }
    validate_spec(spec, ds.d());
    out.push_back(std::move(spec));
  }
  if (cfg.enumerate)
    for (auto& spec : enumerate_subsets(ds)) out.push_back(std::move(spec));
  return out;
}

int cmd_select(const RunConfig& cfg_in, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = cfg_in;
    validate_run_config(cfg);
    const Dataset ds = load_csv(cfg.input, cfg.schema);
    const auto candidates = resolve_candidates(cfg, ds);
    PipelineOptions opts = cfg.pipeline;
    opts.seed = resolve_seed(cfg.seed, err);
    opts.threads = cfg.threads;
    const SelectionResult r = run(ds, candidates, opts);
    for (const auto& w : r.warnings) err << "warning: " << w << "\n";

    write_text_file(join_path(cfg.output, "report.json"), selection_json(r));
    std::ostringstream balance, ate;
    write_balance_csv(r, balance);
    write_ate_csv(r, ate);
    write_text_file(join_path(cfg.output, "balance.csv"), balance.str());
    write_text_file(join_path(cfg.output, "ate.csv"), ate.str());

    out << "measure: " << to_string(r.measure) << "   n = " << ds.n() << "   t = " << ds.t << "\n";
    for (const auto& a : r.arms) {
      const auto& best = a.ranking.front();
      out << "arm " << a.arm << " (" << ds.level_labels[a.arm - 1] << "): selected " << best.name << "  value "
          << fixed(best.value) << "\n";
    }
    out << "\npair      estimate        se          95% CI\n";
    for (const auto& p : r.ate.pairs)
      out << std::left << std::setw(8) << (std::to_string(p.w) + "-" + std::to_string(p.w2)) << std::right
          << std::setw(10) << fixed(p.tau) << std::setw(10) << fixed(p.se) << "   [" << fixed(p.ci_lo) << ", "
          << fixed(p.ci_hi) << "]\n";
    out << "\nwrote " << cfg.output << "/{report.json,balance.csv,ate.csv}\n";
    return kExitOk;
  });
}

int cmd_fit(const RunConfig& cfg_in, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = cfg_in;
    if (cfg.input.empty()) throw ValidationError("no input file (set 'input' or pass --input)");
    if (cfg.candidates.size() != 1) throw ValidationError("fit needs exactly one model (--model NAME=cols)");
    Dataset ds = load_csv(cfg.input, cfg.schema);
    if (cfg.pipeline.standardize) ds = standardize(ds);
    const auto specs = resolve_candidates(cfg, ds);
    const FittedGps f = fit(ds, specs.front(), cfg.pipeline.fit);
    write_text_file(join_path(cfg.output, "fit.json"), fit_json(f, ds));
    out << "model " << f.spec.name << ": loglik " << fixed(f.loglik, 6) << ", " << f.iterations
        << " iterations, max |gradient| " << f.grad_norm << "\n";
    const int block = f.spec.size() + 1;
    for (int v = 2; v <= f.t; ++v) {
      out << "level " << ds.level_labels[v - 1] << " vs " << ds.level_labels[0] << ":\n";
      for (int k = 0; k < block; ++k) {
        const std::string name = k == 0 ? "(intercept)" : ds.names[f.spec.covariates[k - 1]];
        const int idx = (v - 2) * block + k;
        out << "  " << std::left << std::setw(16) << name << std::right << std::setw(12) << fixed(f.beta(v - 2, k))
            << "  se " << fixed(std::sqrt(std::max(f.vcov(idx, idx), 0.0))) << "\n";
      }
    }
    return kExitOk;
  });
}

int cmd_simulate(const SimConfig& cfg_in, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SimConfig cfg = cfg_in;
    cfg.scenario.base_seed = resolve_seed(cfg.seed, err);
    const SimResult r = run_scenario(cfg.scenario);
    write_text_file(join_path(cfg.output, "simulation.json"), simulation_json(r));
    std::ostringstream est, sel, cov;
    write_sim_estimates_csv(r, est);
    write_sim_selection_csv(r, sel);
    write_sim_coverage_csv(r, cov);
    write_text_file(join_path(cfg.output, "estimates.csv"), est.str());
    write_text_file(join_path(cfg.output, "selection.csv"), sel.str());
    write_text_file(join_path(cfg.output, "coverage.csv"), cov.str());

    const Scenario& sc = r.scenario;
    out << "scenario: u=" << sc.u << " v=" << sc.v << " outcome=" << to_string(sc.outcome)
        << " n_per_arm=" << sc.n_per_arm << " replicates=" << sc.replicates << " failures=" << r.failures << "\n\n";
    out << std::left << std::setw(14) << "method" << std::setw(6) << "pair" << std::right << std::setw(10) << "bias"
        << std::setw(10) << "mse" << std::setw(10) << "coverage" << "\n";
    for (const auto& m : r.methods)
      for (const auto& p : m.pairs)
        out << std::left << std::setw(14) << m.method << std::setw(6)
            << (std::to_string(p.w) + "-" + std::to_string(p.w2)) << std::right << std::setw(10) << fixed(p.bias)
            << std::setw(10) << fixed(p.mse) << std::setw(10) << fixed(p.coverage, 3) << "\n";
    bool header = false;
    for (const auto& m : r.methods) {
      if (!m.is_measure) continue;
      if (!header) {
        out << "\nselection share" << std::string(4, ' ');
        for (const auto& name : r.model_names) out << std::setw(8) << name;
        out << "\n";
        header = true;
      }
      out << std::left << std::setw(19) << m.method << std::right;
      for (double p : m.selection) out << std::setw(8) << fixed(p, 3);
      out << "\n";
    }
    out << "\nwrote " << cfg.output << "/{simulation.json,estimates.csv,selection.csv,coverage.csv}\n";
    return kExitOk;
  });
}

int cmd_ballcor(const std::string& input, const std::string& x, const std::string& y, int permutations,
                std::uint64_t seed, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::ifstream in(input);
    if (!in) throw ValidationError("cannot open '" + input + "'");
    const CsvTable table = read_csv_table(in);
    const auto xs = numeric_column(table, x);
    const auto ys = numeric_column(table, y);
    const double r = ball_cor(xs, ys);
    const double p = ball_test(xs, ys, permutations, seed);
    out << "ball correlation(" << x << ", " << y << ") = " << fixed(r, 6) << "\n";
    out << "permutation p-value (B = " << permutations << ") = " << fixed(p, 6) << "\n";
    return kExitOk;
  });
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generalized propensity score model selection and matching estimation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gpsm 0.1.0");

  // select / fit share the data and model flags.
  std::string config_path, input, outcome, treatment, measure, out_dir;
  std::vector<std::string> models;
  bool enumerate = false;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<int> permutations, l_sigma, l_cov;
  std::optional<double> alpha, delta;

  auto add_data_flags = [&](CLI::App* c) {
    c->add_option("--config", config_path, "YAML configuration file");
    c->add_option("--input", input, "CSV data file");
    c->add_option("--outcome", outcome, "outcome column");
    c->add_option("--treatment", treatment, "treatment column");
    c->add_option("--model", models, "candidate model NAME=col1,col2 (repeatable)");
    c->add_option("--out", out_dir, "output directory");
  };

  CLI::App* sel = app.add_subcommand("select", "select a GPS model per arm and estimate pairwise effects");
  add_data_flags(sel);
  sel->add_flag("--enumerate", enumerate, "add every covariate subset as a candidate");
  sel->add_option("--measure", measure, "balance measure: AMD, KSdist, Mdist, WBM, OABM_OLS, OABM_BCor");
  sel->add_option("--permutations", permutations, "ball covariance permutations");
  sel->add_option("--alpha", alpha, "ball covariance test level");
  sel->add_option("--delta", delta, "override the excluded-covariate penalty scale");
  sel->add_option("--l-sigma", l_sigma, "neighbours for the outcome variance");
  sel->add_option("--l-cov", l_cov, "neighbours for the covariance adjustment");
  sel->add_option("--seed", seed, "random seed");
  sel->add_option("--threads", threads, "worker threads");

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit one multinomial-logit GPS model and report it");
  add_data_flags(fit_cmd);

  std::string sim_config;
  std::optional<double> u, v, strength;
  std::optional<std::string> outcome_form, sim_out;
  std::optional<int> n_per_arm, reps, sim_perm;
  std::optional<std::uint64_t> sim_seed;
  std::optional<unsigned> sim_threads;
  std::vector<std::string> sim_measures;
  bool no_models = false;
  CLI::App* simc = app.add_subcommand("simulate", "run a simulation scenario");
  simc->add_option("--config", sim_config, "YAML scenario file");
  simc->add_option("--u", u, "instrument strength");
  simc->add_option("--v", v, "precision-variable strength");
  simc->add_option("--outcome", outcome_form, "linear or nonlinear");
  simc->add_option("--n", n_per_arm, "units per arm");
  simc->add_option("--reps", reps, "replicates");
  simc->add_option("--measures", sim_measures, "measures to run (comma separated)")->delimiter(',');
  simc->add_flag("--no-models", no_models, "skip the fixed-model estimates");
  simc->add_option("--permutations", sim_perm, "ball covariance permutations");
  simc->add_option("--assignment-strength", strength, "scale of the assignment coefficients");
  simc->add_option("--seed", sim_seed, "random seed");
  simc->add_option("--threads", sim_threads, "worker threads");
  simc->add_option("--out", sim_out, "output directory");

  std::string bc_input, bc_x, bc_y;
  int bc_perm = 199;
  std::optional<std::uint64_t> bc_seed;
  CLI::App* bc = app.add_subcommand("ballcor", "ball correlation and permutation test for two columns");
  bc->add_option("--input", bc_input, "CSV file")->required();
  bc->add_option("--x", bc_x, "first column")->required();
  bc->add_option("--y", bc_y, "second column")->required();
  bc->add_option("--permutations", bc_perm, "permutations");
  bc->add_option("--seed", bc_seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  auto build_run_config = [&]() {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (!input.empty()) cfg.input = input;
    if (!outcome.empty()) cfg.schema.outcome = outcome;
    if (!treatment.empty()) cfg.schema.treatment = treatment;
    if (!models.empty()) {
      cfg.candidates.clear();
      for (const auto& m : models) cfg.candidates.push_back(parse_model_flag(m));
    }
    if (enumerate) cfg.enumerate = true;
    if (!measure.empty()) cfg.pipeline.measure = parse_measure(measure);
    if (permutations) cfg.pipeline.permutations = *permutations;
    if (alpha) cfg.pipeline.alpha = *alpha;
    if (delta) cfg.pipeline.delta = *delta;
    if (l_sigma) cfg.pipeline.variance.l_sigma = *l_sigma;
    if (l_cov) cfg.pipeline.variance.l_cov = *l_cov;
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (!out_dir.empty()) cfg.output = out_dir;
    return cfg;
  };

  if (sel->parsed()) {
    RunConfig cfg;
    if (const int rc = guarded(err, [&] { cfg = build_run_config(); return kExitOk; }); rc != kExitOk) return rc;
    return cmd_select(cfg, out, err);
  }
  if (fit_cmd->parsed()) {
    RunConfig cfg;
    if (const int rc = guarded(err, [&] { cfg = build_run_config(); return kExitOk; }); rc != kExitOk) return rc;
    return cmd_fit(cfg, out, err);
  }
  if (simc->parsed()) {
    SimConfig cfg;
    const int rc = guarded(err, [&] {
      cfg = sim_config.empty() ? SimConfig{} : parse_sim_config(read_file(sim_config));
      Scenario& sc = cfg.scenario;
      if (u) sc.u = *u;
      if (v) sc.v = *v;
      if (outcome_form) sc.outcome = parse_outcome_form(*outcome_form);
      if (n_per_arm) sc.n_per_arm = *n_per_arm;
      if (reps) sc.replicates = *reps;
      if (!sim_measures.empty()) {
        sc.measures.clear();
        for (const auto& m : sim_measures) sc.measures.push_back(parse_measure(m));
      }
      if (no_models) sc.evaluate_models = false;
      if (sim_perm) sc.pipeline.permutations = *sim_perm;
      if (strength) sc.assignment_strength = *strength;
      if (sim_seed) cfg.seed = *sim_seed;
      if (sim_threads) sc.threads = *sim_threads;
      if (sim_out) cfg.output = *sim_out;
      return kExitOk;
    });
    if (rc != kExitOk) return rc;
    return cmd_simulate(cfg, out, err);
  }
  return cmd_ballcor(bc_input, bc_x, bc_y, bc_perm, resolve_seed(bc_seed, err), out, err);
}

}  // namespace gpsm::cli
