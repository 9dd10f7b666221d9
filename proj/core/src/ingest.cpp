#include "msmic/ingest.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace msmic {

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, delimiter)) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    out.push_back(field);
  }
  if (!line.empty() && line.back() == delimiter) out.emplace_back();
  return out;
}

double parse_double(const std::string& field, const std::string& column,
                    int row) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc() || result.ptr != end)
    throw DataError("ingest: non-numeric value '" + field + "' in column " +
                    column + " at row " + std::to_string(row));
  return value;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::unordered_map<std::string, int> index;

  int column(const std::string& name) const {
    const auto it = index.find(name);
    if (it == index.end())
      throw DataError("ingest: missing column '" + name + "'");
    return it->second;
  }
};

Table read_table(const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw DataError("ingest: cannot open '" + path + "'");
  Table table;
  std::string line;
  if (!std::getline(in, line)) throw DataError("ingest: empty file " + path);
  table.header = split_line(line, delimiter);
  for (std::size_t j = 0; j < table.header.size(); ++j)
    table.index[table.header[j]] = static_cast<int>(j);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_line(line, delimiter);
    if (fields.size() != table.header.size())
      throw DataError("ingest: row " + std::to_string(table.rows.size() + 1) +
                      " has " + std::to_string(fields.size()) +
                      " fields, expected " +
                      std::to_string(table.header.size()));
    table.rows.push_back(std::move(fields));
  }
  if (table.rows.empty()) throw DataError("ingest: no data rows in " + path);
  return table;
}

}  // namespace

TreatmentFrame ingest_csv(const std::string& path, const ColumnSchema& schema,
                          char delimiter) {
  const Table table = read_table(path, delimiter);
  const int n = static_cast<int>(table.rows.size());

  if (schema.outcome.empty()) throw ConfigError("schema: outcome column unset");
  const bool use_arm_column = !schema.arm_column.empty();
  if (use_arm_column == !schema.one_hot.empty())
    throw ConfigError("schema: set exactly one of arm column or one-hot columns");

  int arms = schema.arms;
  if (!schema.one_hot.empty()) arms = static_cast<int>(schema.one_hot.size());
  if (!schema.per_arm_regressors.empty()) {
    const int by_x = static_cast<int>(schema.per_arm_regressors.size());
    if (arms != 0 && arms != by_x)
      throw ConfigError("schema: arm count disagrees with per-arm regressors");
    arms = by_x;
  }
  if (arms == 0 && use_arm_column) {
    // infer from the largest arm label
    const int col = table.column(schema.arm_column);
    for (int i = 0; i < n; ++i) {
      const double v = parse_double(table.rows[i][col], schema.arm_column, i + 1);
      arms = std::max(arms, static_cast<int>(v));
    }
  }
  if (arms < 1) throw ConfigError("schema: could not determine arm count");

  if (schema.shared_regressors.empty() == schema.per_arm_regressors.empty())
    throw ConfigError(
        "schema: set exactly one of shared or per-arm regressor lists");
  if (!schema.per_arm_regressors.empty()) {
    const std::size_t dim = schema.per_arm_regressors[0].size();
    for (const auto& list : schema.per_arm_regressors)
      if (list.size() != dim)
        throw ConfigError("schema: per-arm regressor lists differ in length");
  }

  const int y_col = table.column(schema.outcome);
  const int dim_x = static_cast<int>(!schema.shared_regressors.empty()
                                         ? schema.shared_regressors.size()
                                         : schema.per_arm_regressors[0].size());
  const int dim_z = static_cast<int>(schema.confounders.size());

  Eigen::VectorXd y(n);
  std::vector<int> arm(n);
  Eigen::MatrixXd z(n, dim_z);
  std::vector<Eigen::MatrixXd> x(arms, Eigen::MatrixXd(n, dim_x));

  std::vector<int> one_hot_cols;
  for (const auto& name : schema.one_hot) one_hot_cols.push_back(table.column(name));
  std::vector<int> z_cols;
  for (const auto& name : schema.confounders) z_cols.push_back(table.column(name));
  std::vector<std::vector<int>> x_cols(arms);
  for (int h = 0; h < arms; ++h) {
    const auto& names = !schema.shared_regressors.empty()
                            ? schema.shared_regressors
                            : schema.per_arm_regressors[h];
    for (const auto& name : names) x_cols[h].push_back(table.column(name));
  }
  const int arm_col = use_arm_column ? table.column(schema.arm_column) : -1;

  for (int i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    const int row_no = i + 1;
    y[i] = parse_double(row[y_col], schema.outcome, row_no);
    if (use_arm_column) {
      const double v = parse_double(row[arm_col], schema.arm_column, row_no);
      const int a = static_cast<int>(v);
      if (v != a || a < 1 || a > arms)
        throw DataError("ingest: arm value '" + row[arm_col] + "' out of 1.." +
                        std::to_string(arms) + " at row " +
                        std::to_string(row_no));
      arm[i] = a - 1;
    } else {
      int assigned = -1;
      for (int h = 0; h < arms; ++h) {
        const double v =
            parse_double(row[one_hot_cols[h]], schema.one_hot[h], row_no);
        if (v != 0.0 && v != 1.0)
          throw DataError("ingest: non-binary one-hot value in column " +
                          schema.one_hot[h] + " at row " +
                          std::to_string(row_no));
        if (v == 1.0) {
          if (assigned >= 0)
            throw DataError("ingest: multiple one-hot columns set at row " +
                            std::to_string(row_no));
          assigned = h;
        }
      }
      if (assigned < 0)
        throw DataError("ingest: no one-hot column set at row " +
                        std::to_string(row_no));
      arm[i] = assigned;
    }
    for (int j = 0; j < dim_z; ++j)
      z(i, j) = parse_double(row[z_cols[j]], schema.confounders[j], row_no);
    for (int h = 0; h < arms; ++h) {
      for (int j = 0; j < dim_x; ++j)
        x[h](i, j) = parse_double(row[x_cols[h][j]],
                                  table.header[x_cols[h][j]], row_no);
    }
  }

  TreatmentFrame frame(std::move(y), std::move(arm), std::move(x), std::move(z));
  const auto counts = frame.arm_counts();
  for (int h = 0; h < arms; ++h) {
    if (counts[h] == 0)
      throw DataError("ingest: arm " + std::to_string(h + 1) + " has no records");
  }
  return frame;
}

void write_frame_csv(const std::string& path, const TreatmentFrame& frame,
                     char delimiter) {
  std::ofstream out(path);
  if (!out) throw DataError("write: cannot open '" + path + "'");
  out.precision(std::numeric_limits<double>::max_digits10);

  out << "arm" << delimiter << "y";
  for (int j = 0; j < frame.dim_z(); ++j) out << delimiter << "z" << (j + 1);
  for (int h = 0; h < frame.arms(); ++h)
    for (int j = 0; j < frame.dim_x(); ++j)
      out << delimiter << "x" << (j + 1) << "_a" << (h + 1);
  out << "\n";

  for (int i = 0; i < frame.size(); ++i) {
    out << (frame.arm(i) + 1) << delimiter << frame.y(i);
    for (int j = 0; j < frame.dim_z(); ++j)
      out << delimiter << frame.z_matrix()(i, j);
    for (int h = 0; h < frame.arms(); ++h)
      for (int j = 0; j < frame.dim_x(); ++j)
        out << delimiter << frame.x_matrix(h)(i, j);
    out << "\n";
  }
  if (!out) throw DataError("write: failed writing '" + path + "'");
}

TreatmentFrame read_frame_csv(const std::string& path, char delimiter) {
  // recover the canonical layout from the header
  std::ifstream in(path);
  if (!in) throw DataError("ingest: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("ingest: empty file " + path);
  const auto header = split_line(line, delimiter);
  in.close();

  ColumnSchema schema;
  schema.arm_column = "arm";
  schema.outcome = "y";
  int arms = 0;
  int dim_x = 0;
  for (const auto& name : header) {
    if (name.rfind("z", 0) == 0 && name.find("_") == std::string::npos &&
        name != "y")
      schema.confounders.push_back(name);
    const auto sep = name.find("_a");
    if (name.rfind("x", 0) == 0 && sep != std::string::npos) {
      const int h = std::stoi(name.substr(sep + 2));
      const int j = std::stoi(name.substr(1, sep - 1));
      arms = std::max(arms, h);
      dim_x = std::max(dim_x, j);
    }
  }
  if (arms == 0) throw DataError("ingest: no regressor columns found in " + path);
  schema.arms = arms;
  schema.per_arm_regressors.resize(arms);
  for (int h = 0; h < arms; ++h)
    for (int j = 0; j < dim_x; ++j)
      schema.per_arm_regressors[h].push_back(
          "x" + std::to_string(j + 1) + "_a" + std::to_string(h + 1));
  return ingest_csv(path, schema, delimiter);
}

}  // namespace msmic
