#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gpsm/dataset.hpp"
#include "gpsm/pipeline.hpp"
#include "gpsm/simlab.hpp"

namespace gpsm::cli {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

struct CandidateDef {
  std::string name;
  std::vector<std::string> covariates;
};

struct RunConfig {
  std::string input;
  CsvSchema schema;
  std::vector<CandidateDef> candidates;
  bool enumerate = false;  // use every covariate subset as a candidate
  PipelineOptions pipeline;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string output = "gpsm-out";
};

// YAML configuration; unknown keys are rejected.
RunConfig parse_run_config(const std::string& yaml_text);
RunConfig load_run_config(const std::string& path);
void validate_run_config(const RunConfig& cfg);

// Same file format for simulate: the scenario keys plus output and threads.
struct SimConfig {
  Scenario scenario;
  std::optional<std::uint64_t> seed;
  std::string output = "gpsm-sim";
};
SimConfig parse_sim_config(const std::string& yaml_text);

// Candidate definitions resolved against the dataset's covariate names.
std::vector<GpsModelSpec> resolve_candidates(const RunConfig& cfg, const Dataset& ds);

// "NAME=col1,col2" as accepted by --model.
CandidateDef parse_model_flag(const std::string& text);

int cmd_select(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_ballcor(const std::string& input, const std::string& x, const std::string& y, int permutations,
                std::uint64_t seed, std::ostream& out, std::ostream& err);
int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Entry point used by the executable.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace gpsm::cli
