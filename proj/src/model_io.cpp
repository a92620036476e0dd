#include "emr/model_io.hpp"

#include "emr/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace emr {

using nlohmann::json;

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json values = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) values.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", values}};
}

Eigen::MatrixXd matrix_from(const json& j, const char* what) {
  try {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& values = j.at("values");
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(values.size()) != rows * cols)
      throw ConfigError(std::string("matrix '") + what + "' has inconsistent size");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = values[static_cast<std::size_t>(i * cols + c)].get<double>();
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("matrix '") + what + "': " + e.what());
  }
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

json diagnostics_json(const LevelDiagnostics& l) {
  return {{"level", l.level},
          {"lag1", vector_json(l.lag1)},
          {"trial_r2", vector_json(l.trial_r2)},
          {"cov_eigenvalues", vector_json(l.cov_eigenvalues)},
          {"trial_cov_eigenvalues", vector_json(l.trial_cov_eigenvalues)},
          {"cov_change", l.cov_change},
          {"lag1_ok", l.lag1_ok},
          {"r2_ok", l.r2_ok},
          {"cov_ok", l.cov_ok},
          {"stop", l.stop}};
}

LevelDiagnostics diagnostics_from(const json& j) {
  LevelDiagnostics l;
  l.level = j.at("level").get<std::size_t>();
  l.lag1 = vector_from(j.at("lag1"));
  l.trial_r2 = vector_from(j.at("trial_r2"));
  l.cov_eigenvalues = vector_from(j.at("cov_eigenvalues"));
  l.trial_cov_eigenvalues = vector_from(j.at("trial_cov_eigenvalues"));
  l.cov_change = j.at("cov_change").get<double>();
  l.lag1_ok = j.at("lag1_ok").get<bool>();
  l.r2_ok = j.at("r2_ok").get<bool>();
  l.cov_ok = j.at("cov_ok").get<bool>();
  l.stop = j.at("stop").get<bool>();
  return l;
}

}  // namespace

std::string model_to_json(const EMRModel& model) {
  model.validate();
  json levels = json::array();
  for (const auto& l : model.levels) levels.push_back({{"level", l.level}, {"L", matrix_json(l.L)}});
  json monomials = json::array();
  for (std::size_t i = 0; i < model.d; ++i)
    for (std::size_t j = i; j < model.d; ++j) monomials.push_back(model.names[i] + "*" + model.names[j]);
  json diag = json::array();
  for (const auto& l : model.report.levels) diag.push_back(diagnostics_json(l));

  json out = {{"schema", kModelSchema},
              {"version", kModelSchemaVersion},
              {"sign_convention", kSignConvention},
              {"d", model.d},
              {"p", model.p()},
              {"dt", model.dt},
              {"names", model.names},
              {"constrained", model.constrained},
              {"ridge", model.ridge},
              {"main",
               {{"quadratic", model.main.quadratic},
                {"F", vector_json(model.main.F)},
                {"A", matrix_json(model.main.A)},
                {"B", matrix_json(model.main.B)},
                {"B_monomials", monomials}}},
              {"levels", levels},
              {"noise",
               {{"Q", matrix_json(model.noise.Q)},
                {"factor", matrix_json(model.noise.factor)},
                {"mean", vector_json(model.noise.mean.size() ? model.noise.mean : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.d)))}}},
              {"report", {{"stop_reason", model.report.stop_reason}, {"levels", diag}}}};
  return out.dump(2);
}

EMRModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != kModelSchema) throw ConfigError("not an emrkit model file");
    if (j.at("version").get<int>() != kModelSchemaVersion)
      throw ConfigError("unsupported model schema version " + std::to_string(j.at("version").get<int>()));
    EMRModel model;
    model.d = j.at("d").get<std::size_t>();
    model.dt = j.at("dt").get<double>();
    model.names = j.at("names").get<std::vector<std::string>>();
    model.constrained = j.at("constrained").get<bool>();
    model.ridge = j.at("ridge").get<std::string>();
    const json& main = j.at("main");
    model.main.quadratic = main.at("quadratic").get<bool>();
    model.main.F = vector_from(main.at("F"));
    model.main.A = matrix_from(main.at("A"), "A");
    model.main.B = matrix_from(main.at("B"), "B");
    for (const auto& l : j.at("levels"))
      model.levels.push_back({l.at("level").get<std::size_t>(), matrix_from(l.at("L"), "L")});
    model.noise.Q = matrix_from(j.at("noise").at("Q"), "Q");
    model.noise.factor = matrix_from(j.at("noise").at("factor"), "factor");
    model.noise.mean = vector_from(j.at("noise").at("mean"));
    model.report.stop_reason = j.at("report").at("stop_reason").get<std::string>();
    for (const auto& l : j.at("report").at("levels")) model.report.levels.push_back(diagnostics_from(l));
    if (j.at("p").get<std::size_t>() != model.levels.size()) throw ConfigError("model p disagrees with its level list");
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const EMRModel& model, const std::string& path) {
  const std::string text = model_to_json(model);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file '" + path + "'");
  out << text << '\n';
  if (!out) throw ConfigError("failed writing model file '" + path + "'");
}

EMRModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace emr
