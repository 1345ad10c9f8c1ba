#include "gpsm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gpsm/common.hpp"

namespace gpsm {

const char* to_string(CovariateRole role) {
  switch (role) {
    case CovariateRole::Confounder: return "confounder";
    case CovariateRole::Instrument: return "instrument";
    case CovariateRole::Precision: return "precision";
    case CovariateRole::Noise: return "noise";
    case CovariateRole::Unknown: break;
  }
  return "unknown";
}

int Dataset::arm_size(int level) const {
  return static_cast<int>(std::count(w.begin(), w.end(), level));
}

std::vector<int> Dataset::arm_units(int level) const {
  std::vector<int> units;
  for (int i = 0; i < n(); ++i)
    if (w[i] == level) units.push_back(i);
  return units;
}

std::optional<int> Dataset::column(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<int>(it - names.begin());
}

namespace {

double sample_sd(const Eigen::Ref<const Eigen::VectorXd>& col) {
  const double mean = col.mean();
  const double ss = (col.array() - mean).square().sum();
  return std::sqrt(ss / static_cast<double>(col.size() - 1));
}

}  // namespace

void validate(const Dataset& ds) {
  const int n = ds.n();
  if (ds.t < 2) throw ValidationError("dataset needs at least 2 treatment levels, got " + std::to_string(ds.t));
  if (n < 2) throw ValidationError("dataset needs at least 2 units");
  if (static_cast<int>(ds.w.size()) != n || ds.x.rows() != n)
    throw ValidationError("outcome, treatment and covariate row counts differ");
  if (static_cast<int>(ds.names.size()) != ds.d())
    throw ValidationError("covariate name count does not match covariate columns");
  std::vector<int> counts(ds.t + 1, 0);
  for (int i = 0; i < n; ++i) {
    if (ds.w[i] < 1 || ds.w[i] > ds.t)
      throw ValidationError("treatment label " + std::to_string(ds.w[i]) + " at row " + std::to_string(i + 1) +
                            " outside 1.." + std::to_string(ds.t));
    ++counts[ds.w[i]];
    if (!std::isfinite(ds.y[i])) throw ValidationError("non-finite outcome at row " + std::to_string(i + 1));
  }
  std::string missing;
  for (int k = 1; k <= ds.t; ++k)
    if (counts[k] == 0) missing += (missing.empty() ? "" : ", ") + std::to_string(k);
  if (!missing.empty()) throw ValidationError("treatment level(s) with no units: " + missing);
  if (!ds.x.allFinite()) throw ValidationError("non-finite covariate value");
  for (int j = 0; j < ds.d(); ++j)
    if (!(sample_sd(ds.x.col(j)) > 0.0))
      throw ValidationError("covariate '" + ds.names[j] + "' has zero variance");
}

Dataset make_dataset(Eigen::VectorXd y, std::vector<int> w, Eigen::MatrixXd x, std::vector<std::string> names,
                     int t) {
  Dataset ds;
  ds.y = std::move(y);
  ds.w = std::move(w);
  ds.x = std::move(x);
  ds.names = std::move(names);
  ds.t = t;
  ds.roles.assign(ds.names.size(), CovariateRole::Unknown);
  for (int k = 1; k <= t; ++k) ds.level_labels.push_back(std::to_string(k));
  validate(ds);
  return ds;
}

Dataset standardize(const Dataset& ds) {
  if (ds.standardized) throw ValidationError("dataset is already standardized");
  Dataset out = ds;
  const int d = ds.d();
  out.center.resize(d);
  out.scale.resize(d);
  for (int j = 0; j < d; ++j) {
    const double mean = ds.x.col(j).mean();
    const double sd = sample_sd(ds.x.col(j));
    if (!(sd > 0.0) || !std::isfinite(sd))
      throw ValidationError("cannot standardize covariate '" + ds.names[j] + "': zero variance");
    out.center[j] = mean;
    out.scale[j] = sd;
    out.x.col(j) = (ds.x.col(j).array() - mean) / sd;
  }
  out.standardized = true;
  return out;
}

// ---------------------------------------------------------------------------
// CSV input
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line, int row) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          field += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw ValidationError("unterminated quote on line " + std::to_string(row));
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "."; }

std::optional<double> parse_double(const std::string& s) {
  double value = 0.0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<long> parse_int(const std::string& s) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

CsvTable read_csv_table(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("CSV input is empty: header row required");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_csv_line(line, 1);
  for (auto& h : t.header) h = trim(h);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line, line_no);
    if (fields.size() != t.header.size())
      throw ValidationError("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                            " fields, header has " + std::to_string(t.header.size()));
    for (auto& f : fields) f = trim(f);
    t.rows.push_back(std::move(fields));
    t.line.push_back(line_no);
  }
  return t;
}

int CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError("CSV has no column named '" + name + "'");
  return static_cast<int>(it - header.begin());
}

std::vector<double> numeric_column(const CsvTable& table, const std::string& name) {
  const int c = table.column(name);
  std::vector<double> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& f = table.rows[i][c];
    if (is_missing(f))
      throw ValidationError("missing value at line " + std::to_string(table.line[i]) + ", column '" + name + "'");
    auto v = parse_double(f);
    if (!v)
      throw ValidationError("non-numeric value '" + f + "' in column '" + name + "' at line " +
                            std::to_string(table.line[i]));
    out.push_back(*v);
  }
  return out;
}

Dataset read_csv(std::istream& in, const CsvSchema& schema) {
  CsvTable table = read_csv_table(in);
  const auto& header = table.header;
  const int y_col = table.column(schema.outcome);
  const int w_col = table.column(schema.treatment);
  for (const auto& name : schema.exclude) table.column(name);
  for (const auto& name : schema.categorical) table.column(name);
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    for (std::size_t c = 0; c < header.size(); ++c)
      if (is_missing(table.rows[i][c]) && !contains(schema.exclude, header[c]))
        throw ValidationError("missing value at line " + std::to_string(table.line[i]) + ", column '" + header[c] +
                              "'");
  const auto& rows = table.rows;
  const int n = static_cast<int>(rows.size());
  if (n == 0) throw ValidationError("CSV has a header but no data rows");

  Dataset ds;
  ds.outcome_name = schema.outcome;
  ds.treatment_name = schema.treatment;
  ds.y.resize(n);
  for (int i = 0; i < n; ++i) {
    auto v = parse_double(rows[i][y_col]);
    if (!v)
      throw ValidationError("non-numeric outcome '" + rows[i][y_col] + "' at line " + std::to_string(i + 2));
    ds.y[i] = *v;
  }

  // Treatment: integer labels are used as levels directly; anything else is
  // mapped to 1..t in sorted label order.
  bool integer_labels = true;
  for (int i = 0; i < n && integer_labels; ++i) integer_labels = parse_int(rows[i][w_col]).has_value();
  ds.w.resize(n);
  if (integer_labels) {
    long max_label = 0;
    for (int i = 0; i < n; ++i) {
      const long v = *parse_int(rows[i][w_col]);
      if (v < 1)
        throw ValidationError("treatment label " + std::to_string(v) + " at line " + std::to_string(i + 2) +
                              " must be a positive integer");
      max_label = std::max(max_label, v);
      ds.w[i] = static_cast<int>(v);
    }
    ds.t = schema.levels > 0 ? schema.levels : static_cast<int>(max_label);
    if (max_label > ds.t)
      throw ValidationError("treatment label " + std::to_string(max_label) + " exceeds configured levels " +
                            std::to_string(ds.t));
    for (int k = 1; k <= ds.t; ++k) ds.level_labels.push_back(std::to_string(k));
  } else {
    std::set<std::string> labels;
    for (int i = 0; i < n; ++i) labels.insert(rows[i][w_col]);
    std::map<std::string, int> code;
    for (const auto& l : labels) {
      code[l] = static_cast<int>(code.size()) + 1;
      ds.level_labels.push_back(l);
    }
    for (int i = 0; i < n; ++i) ds.w[i] = code[rows[i][w_col]];
    ds.t = static_cast<int>(labels.size());
    if (schema.levels > 0 && schema.levels != ds.t)
      throw ValidationError("expected " + std::to_string(schema.levels) + " treatment levels, found " +
                            std::to_string(ds.t));
  }

  std::vector<Eigen::VectorXd> columns;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& name = header[c];
    if (static_cast<int>(c) == y_col || static_cast<int>(c) == w_col || contains(schema.exclude, name)) continue;
    if (contains(schema.categorical, name)) {
      std::set<std::string> levels;
      for (int i = 0; i < n; ++i) levels.insert(rows[i][c]);
      // The lexicographically smallest level is the reference and gets no column.
      for (auto it = std::next(levels.begin()); it != levels.end(); ++it) {
        Eigen::VectorXd col(n);
        for (int i = 0; i < n; ++i) col[i] = rows[i][c] == *it ? 1.0 : 0.0;
        columns.push_back(std::move(col));
        ds.names.push_back(name + "=" + *it);
      }
      continue;
    }
    Eigen::VectorXd col(n);
    for (int i = 0; i < n; ++i) {
      auto v = parse_double(rows[i][c]);
      if (!v)
        throw ValidationError("non-numeric value '" + rows[i][c] + "' in column '" + name + "' at line " +
                              std::to_string(i + 2) + " (flag it as categorical or exclude it)");
      col[i] = *v;
    }
    columns.push_back(std::move(col));
    ds.names.push_back(name);
  }
  ds.x.resize(n, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) ds.x.col(static_cast<Eigen::Index>(j)) = columns[j];
  ds.roles.assign(ds.names.size(), CovariateRole::Unknown);
  validate(ds);
  return ds;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return read_csv(in, schema);
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

namespace {

void put_double(std::ostream& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, ptr - buf);
}

void put_field(std::ostream& out, const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

}  // namespace

void write_csv(const Dataset& ds, std::ostream& out) {
  put_field(out, ds.outcome_name);
  out << ',';
  put_field(out, ds.treatment_name);
  for (const auto& name : ds.names) {
    out << ',';
    put_field(out, name);
  }
  out << '\n';
  for (int i = 0; i < ds.n(); ++i) {
    put_double(out, ds.y[i]);
    out << ',';
    put_field(out, ds.level_labels.empty() ? std::to_string(ds.w[i]) : ds.level_labels[ds.w[i] - 1]);
    for (int j = 0; j < ds.d(); ++j) {
      out << ',';
      put_double(out, ds.x(i, j));
    }
    out << '\n';
  }
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  write_csv(ds, out);
}

}  // namespace gpsm
