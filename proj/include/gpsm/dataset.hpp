#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gpsm {

// Causal role of a covariate. Metadata only: estimators never read it.
enum class CovariateRole { Confounder, Instrument, Precision, Noise, Unknown };

const char* to_string(CovariateRole role);

// Observational data with a multi-level treatment. Treatment levels are
// stored as 1..t; covariates are columns of `x`.
struct Dataset {
  Eigen::VectorXd y;
  std::vector<int> w;
  Eigen::MatrixXd x;
  std::vector<std::string> names;
  int t = 0;

  bool standardized = false;
  Eigen::VectorXd center;  // column means removed by standardize()
  Eigen::VectorXd scale;   // column standard deviations (n-1 denominator)

  std::vector<CovariateRole> roles;       // defaults to Unknown
  std::vector<std::string> level_labels;  // original label of level k+1
  std::string outcome_name = "y";
  std::string treatment_name = "w";

  int n() const { return static_cast<int>(y.size()); }
  int d() const { return static_cast<int>(x.cols()); }

  // Number of units in arm `level` (1-based).
  int arm_size(int level) const;
  // Row indices of the units in arm `level`, ascending.
  std::vector<int> arm_units(int level) const;
  // Column index of covariate `name`, or nullopt.
  std::optional<int> column(const std::string& name) const;
};

// Builds and validates a dataset. Throws ValidationError on size mismatches,
// labels outside 1..t, empty arms, non-finite values or zero-variance columns.
Dataset make_dataset(Eigen::VectorXd y, std::vector<int> w, Eigen::MatrixXd x,
                     std::vector<std::string> names, int t);

// Re-checks every Dataset invariant.
void validate(const Dataset& ds);

struct CsvSchema {
  std::string outcome = "y";
  std::string treatment = "w";
  std::vector<std::string> exclude;
  // String columns to expand into 0/1 indicators (reference level dropped).
  std::vector<std::string> categorical;
  // Expected number of treatment levels for integer labels; 0 means max label.
  int levels = 0;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);
Dataset read_csv(std::istream& in, const CsvSchema& schema);

// Header plus trimmed fields of every non-blank row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line;  // 1-based file line of each row

  int column(const std::string& name) const;  // throws if absent
};

CsvTable read_csv_table(std::istream& in);
// A numeric column; missing or non-numeric entries are rejected.
std::vector<double> numeric_column(const CsvTable& table, const std::string& name);

// Writes outcome, treatment and covariates with shortest round-trip formatting.
void write_csv(const Dataset& ds, std::ostream& out);
void write_csv(const Dataset& ds, const std::string& path);

// Centers and scales every covariate to mean 0, sd 1 (n-1 denominator).
Dataset standardize(const Dataset& ds);

}  // namespace gpsm
