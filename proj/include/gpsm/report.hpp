#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gpsm/mnlogit.hpp"
#include "gpsm/pipeline.hpp"
#include "gpsm/simlab.hpp"

namespace gpsm {

inline constexpr int kReportSchema = 1;

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// JSON documents (pretty-printed, keys in a fixed order).
std::string fit_json(const FittedGps& fit, const Dataset& ds);
std::string selection_json(const SelectionResult& r);
std::string simulation_json(const SimResult& r);

// model,arm,measure,value
void write_balance_csv(const SelectionResult& r, std::ostream& out);
// pair,estimate,se,ci_lo,ci_hi
void write_ate_csv(const SelectionResult& r, std::ostream& out);

// replicate,method,pair,estimate,ci_lo,ci_hi
void write_sim_estimates_csv(const SimResult& r, std::ostream& out);
// measure,model,proportion
void write_sim_selection_csv(const SimResult& r, std::ostream& out);
// method,pair,truth,mean,bias,variance,mse,coverage
void write_sim_coverage_csv(const SimResult& r, std::ostream& out);

// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace gpsm
