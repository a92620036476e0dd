#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace emr::tools {

enum class Scale { Full, Desk };

struct Check {
  std::string id;         // acceptance criterion tag, e.g. "C3"
  std::string name;
  bool pass = false;
  std::string detail;
};

struct StudyReport {
  std::string study;
  std::vector<Check> checks;
  nlohmann::json metrics = nlohmann::json::object();

  bool pass() const;
  nlohmann::json to_json() const;
};

/// Each study runs its pipeline, applies the acceptance thresholds for the chosen scale
/// and, when out_dir is non-empty, writes statistic CSVs, gnuplot scripts and report.json.
StudyReport study_linear_toy(Scale scale, std::uint64_t seed, const std::string& out_dir);
StudyReport study_climate(const std::vector<double>& epsilons, Scale scale, std::uint64_t seed,
                          const std::string& out_dir);
StudyReport study_lv(Scale scale, std::uint64_t seed, const std::string& out_dir);
StudyReport study_gamma_chain(Scale scale, const std::string& out_dir);

inline const std::vector<double> kBenchmarkEpsilons{0.1, 0.5, 1.0, 1.5};
inline const std::vector<double> kReferenceEta{0.11, 0.33, 0.42, 0.47};

/// Writes a header line and rows at 17 significant digits.
void write_table(const std::string& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& columns);
void write_text(const std::string& path, const std::string& text);
void ensure_directory(const std::string& path);

}  // namespace emr::tools
