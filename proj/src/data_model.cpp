#include "curefit/data_model.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace curefit {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"");
  return s.substr(first, last - first + 1);
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == ".";
}

bool parse_double(const std::string& cell, double& out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void CovariateSpec::validate() const {
  if (time_column.empty()) throw ConfigError("time column not specified");
  if (event_column.empty()) throw ConfigError("event column not specified");
  if (time_column == event_column) throw ConfigError("time and event columns must differ");
  if (incidence_columns.empty()) throw ConfigError("incidence column list is empty");
  if (latency_columns.empty()) throw ConfigError("latency column list is empty");
  for (const auto* list : {&incidence_columns, &latency_columns}) {
    for (const auto& c : *list)
      if (c == time_column || c == event_column)
        throw ConfigError("column '" + c + "' cannot be both a covariate and the time/event column");
  }
  for (const auto& c : center_columns) {
    const bool used = std::find(incidence_columns.begin(), incidence_columns.end(), c) != incidence_columns.end() ||
                      std::find(latency_columns.begin(), latency_columns.end(), c) != latency_columns.end();
    if (!used) throw ConfigError("centered column '" + c + "' is not a covariate");
  }
}

CureDataset load_csv(const std::filesystem::path& path, const CovariateSpec& spec) {
  spec.validate();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  std::vector<std::string> header = split_fields(line);
  for (auto& h : header) h = trim(h);
  std::map<std::string, std::size_t> position;
  for (std::size_t j = 0; j < header.size(); ++j) position.emplace(header[j], j);

  auto column_of = [&](const std::string& name) {
    const auto it = position.find(name);
    if (it == position.end()) throw ConfigError("column '" + name + "' not found in " + path.string());
    return it->second;
  };

  // Every column we need, each parsed once.
  std::vector<std::string> needed{spec.time_column, spec.event_column};
  for (const auto* list : {&spec.incidence_columns, &spec.latency_columns})
    for (const auto& c : *list)
      if (std::find(needed.begin(), needed.end(), c) == needed.end()) needed.push_back(c);
  std::vector<std::size_t> source;
  for (const auto& c : needed) source.push_back(column_of(c));

  std::vector<std::vector<double>> columns(needed.size());
  Index dropped = 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line);
    std::vector<double> values(needed.size());
    bool missing = false;
    for (std::size_t k = 0; k < needed.size(); ++k) {
      const std::string cell = source[k] < fields.size() ? trim(fields[source[k]]) : std::string{};
      if (is_missing(cell)) {
        missing = true;
        break;
      }
      if (!parse_double(cell, values[k]))
        throw DataError("row " + std::to_string(row) + ", column '" + needed[k] + "': non-numeric value '" +
                        cell + "'");
    }
    if (missing) {
      ++dropped;
      continue;
    }
    if (!std::isfinite(values[0]) || values[0] < 0)
      throw DataError("row " + std::to_string(row) + ", column '" + needed[0] + "': time must be finite and >= 0");
    if (values[1] != 0.0 && values[1] != 1.0)
      throw DataError("row " + std::to_string(row) + ", column '" + needed[1] + "': event must be 0 or 1");
    for (std::size_t k = 0; k < needed.size(); ++k) columns[k].push_back(values[k]);
  }
  const Index n = static_cast<Index>(columns[0].size());
  if (n == 0) throw DataError(path.string() + ": no complete data rows");

  for (const auto& c : spec.center_columns) {
    auto& col = columns[static_cast<std::size_t>(std::find(needed.begin(), needed.end(), c) - needed.begin())];
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
    for (auto& v : col) v -= mean;
  }

  auto column_data = [&](const std::string& name) -> const std::vector<double>& {
    return columns[static_cast<std::size_t>(std::find(needed.begin(), needed.end(), name) - needed.begin())];
  };

  if (n >= 2) {
    for (const auto& c : spec.incidence_columns) {
      const auto& col = column_data(c);
      const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
      if (*lo == *hi)
        throw DataError("incidence column '" + c + "' is constant; the intercept is added automatically");
    }
  }

  Vec<double> time(n);
  Eigen::VectorXi event(n);
  const Index q = static_cast<Index>(spec.incidence_columns.size()) + 1;
  const Index p = static_cast<Index>(spec.latency_columns.size());
  Mat<double> w(n, q), z(n, p);
  for (Index i = 0; i < n; ++i) {
    time(i) = columns[0][static_cast<std::size_t>(i)];
    event(i) = static_cast<int>(columns[1][static_cast<std::size_t>(i)]);
    w(i, 0) = 1.0;
  }
  for (Index j = 0; j < q - 1; ++j) {
    const auto& col = column_data(spec.incidence_columns[static_cast<std::size_t>(j)]);
    for (Index i = 0; i < n; ++i) w(i, j + 1) = col[static_cast<std::size_t>(i)];
  }
  for (Index j = 0; j < p; ++j) {
    const auto& col = column_data(spec.latency_columns[static_cast<std::size_t>(j)]);
    for (Index i = 0; i < n; ++i) z(i, j) = col[static_cast<std::size_t>(i)];
  }

  std::vector<std::string> w_names{"Intercept"};
  w_names.insert(w_names.end(), spec.incidence_columns.begin(), spec.incidence_columns.end());
  CureDataset data(std::move(time), std::move(event), std::move(w), std::move(z), std::move(w_names),
                   spec.latency_columns);
  data.time_name = spec.time_column;
  data.event_name = spec.event_column;
  data.dropped_rows = dropped;
  return data;
}

CovariateSpec covariate_spec_of(const CureDataset& data) {
  CovariateSpec spec;
  spec.time_column = data.time_name;
  spec.event_column = data.event_name;
  for (Index j = 1; j < data.w_dim(); ++j) {
    spec.incidence_columns.push_back(data.w_names().empty() ? "w" + std::to_string(j)
                                                            : data.w_names()[static_cast<std::size_t>(j)]);
  }
  for (Index j = 0; j < data.z_dim(); ++j) {
    spec.latency_columns.push_back(data.z_names().empty() ? "z" + std::to_string(j + 1)
                                                          : data.z_names()[static_cast<std::size_t>(j)]);
  }
  return spec;
}

void write_csv(const CureDataset& data, const std::filesystem::path& path) {
  const CovariateSpec spec = covariate_spec_of(data);
  // Union of covariate names; a name shared by both designs is written once
  // and must carry identical values.
  std::vector<std::string> names;
  std::vector<std::pair<bool, Index>> origin;  // (is_incidence, column)
  for (Index j = 1; j < data.w_dim(); ++j) {
    names.push_back(spec.incidence_columns[static_cast<std::size_t>(j - 1)]);
    origin.emplace_back(true, j);
  }
  for (Index j = 0; j < data.z_dim(); ++j) {
    const auto& name = spec.latency_columns[static_cast<std::size_t>(j)];
    const auto it = std::find(names.begin(), names.end(), name);
    if (it != names.end()) {
      const Index wj = origin[static_cast<std::size_t>(it - names.begin())].second;
      if (data.w().col(wj) != data.z().col(j))
        throw DataError("column '" + name + "' differs between incidence and latency designs");
      continue;
    }
    names.push_back(name);
    origin.emplace_back(false, j);
  }

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << spec.time_column << ',' << spec.event_column;
  for (const auto& nm : names) out << ',' << nm;
  out << '\n';
  for (Index i = 0; i < data.size(); ++i) {
    out << format_double(data.time()(i)) << ',' << data.event()(i);
    for (const auto& [inc, j] : origin) out << ',' << format_double(inc ? data.w()(i, j) : data.z()(i, j));
    out << '\n';
  }
}

}  // namespace curefit
