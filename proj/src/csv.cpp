#include "emr/error.hpp"
#include "emr/timeseries.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace emr {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    fields.push_back(first == std::string::npos ? "" : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_real(const std::string& text, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("CSV parse failure at data row " + std::to_string(row + 1) + ", column " +
                      std::to_string(col + 1) + ": '" + text + "'");
  return value;
}

}  // namespace

TimeSeries load_csv(const std::string& path, double dt, std::size_t skip_transient) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": missing header row");
  const std::vector<std::string> names = split_fields(line);

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    if (fields.size() != names.size())
      throw ConfigError(path + ": row " + std::to_string(rows + 1) + " has " +
                        std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(names.size()));
    if (rows++ < skip_transient) continue;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const double v = parse_real(fields[c], rows - 1, c);
      if (!std::isfinite(v))
        throw ConfigError(path + ": non-finite value at row " + std::to_string(rows));
      values.push_back(v);
    }
  }
  const std::size_t kept = rows > skip_transient ? rows - skip_transient : 0;
  if (kept < 2)
    throw ConfigError(path + ": " + std::to_string(kept) + " rows remain after skipping " +
                      std::to_string(skip_transient) + "; need at least 2");
  Eigen::MatrixXd data(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(names.size()));
  for (std::size_t r = 0; r < kept; ++r)
    for (std::size_t c = 0; c < names.size(); ++c)
      data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * names.size() + c];
  return TimeSeries(std::move(data), dt, names, static_cast<double>(skip_transient) * dt);
}

void save_csv(const TimeSeries& ts, const std::string& path, bool with_time) {
  std::FILE* out = std::fopen(path.c_str(), "w");
  if (!out) throw ConfigError("cannot write " + path);
  if (with_time) std::fputs("t,", out);
  for (std::size_t i = 0; i < ts.channels(); ++i)
    std::fprintf(out, "%s%s", ts.names()[i].c_str(), i + 1 < ts.channels() ? "," : "\n");
  for (std::size_t k = 0; k < ts.length(); ++k) {
    if (with_time) std::fprintf(out, "%.17g,", ts.t0() + static_cast<double>(k) * ts.dt());
    for (std::size_t i = 0; i < ts.channels(); ++i)
      std::fprintf(out, "%.17g%s", ts.data()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)),
                   i + 1 < ts.channels() ? "," : "\n");
  }
  std::fclose(out);
}

}  // namespace emr
