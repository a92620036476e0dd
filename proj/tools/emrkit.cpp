#include "config.hpp"
#include "studies.hpp"

#include "emr/emr.hpp"
#include "emr/error.hpp"
#include "emr/eta_test.hpp"
#include "emr/model_io.hpp"
#include "emr/reference_models.hpp"
#include "emr/simulate.hpp"
#include "emr/timeseries.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef EMRKIT_VERSION
#define EMRKIT_VERSION "dev"
#endif

namespace {

using nlohmann::json;
using namespace emr;
using namespace emr::tools;
namespace fs = std::filesystem;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitAcceptance = 4;

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

/// One manifest per run, written next to the outputs.
class Manifest {
 public:
  Manifest(std::string command, std::string location)
      : location_(std::move(location)), start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["version"] = EMRKIT_VERSION;
    doc_["started"] = utc_now();
    doc_["config"] = json::object();
    doc_["seeds"] = json::array();
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
  }
  json& config() { return doc_["config"]; }
  void seed(std::uint64_t s) { doc_["seeds"].push_back(s); }
  void input(const std::string& p) { doc_["inputs"].push_back(p); }
  void output(const std::string& p) { doc_["outputs"].push_back(p); }
  json& extra(const std::string& key) { return doc_[key]; }
  void write() {
    doc_["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_text(location_, doc_.dump(2) + "\n");
  }

 private:
  json doc_;
  std::string location_;
  std::chrono::steady_clock::time_point start_;
};

std::string join_args(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) out += (i ? " " : "") + std::string(argv[i]);
  return out;
}

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// ---- simulate-reference

struct ReferenceArgs {
  std::string preset;
  std::string params;
  std::optional<double> eps;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string out;
};

int run_simulate_reference(const ReferenceArgs& a, const std::string& command) {
  if (a.preset.empty() == a.params.empty()) throw ConfigError("give exactly one of --preset or --params");
  KeyValues values = a.preset.empty() ? load_key_values(a.params) : parse_key_values(preset_text(a.preset));
  for (const auto& o : a.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    values[trim(o.substr(0, eq))] = trim(o.substr(eq + 1));
  }
  if (a.eps) values["epsilon"] = std::to_string(*a.eps);
  if (a.seed) values["seed"] = std::to_string(*a.seed);
  const std::string kind = model_kind(values);
  if (a.eps && kind != "climate") throw ConfigError("--eps applies to the climate model only");

  ensure_directory(a.out);
  Manifest manifest(command, path_in(a.out, "manifest.json"));
  if (!a.params.empty()) manifest.input(a.params);
  manifest.config() = values;
  const std::string full_path = path_in(a.out, "full.csv");
  const std::string observed_path = path_in(a.out, "observed.csv");

  if (kind == "climate") {
    const ClimateSetup s = climate_setup(values);
    manifest.seed(s.integration.seed);
    const ClimateRun run = simulate_climate(s.params, s.integration);
    save_csv(run.full, full_path, true);
    save_csv(run.observed, observed_path, true);
    std::printf("climate eps=%g: %zu samples at dt=%g\n", s.params.epsilon, run.observed.length(), run.observed.dt());
  } else if (kind == "lv") {
    const LvSetup s = lv_setup(values);
    const TimeSeries full = simulate_lv(s.params, s.n0, s.dt, s.length - 1);
    if (s.transient >= full.length()) throw ConfigError("transient exceeds the run length");
    save_csv(full, full_path, true);
    save_csv(full.slice(s.transient, full.length() - s.transient).select({0, 1, 2}), observed_path, true);
    std::printf("lv: %zu samples at dt=%g, observed N1..N3 after %zu transient rows\n", full.length(), s.dt, s.transient);
  } else {
    const LinearSetup s = linear_setup(values);
    manifest.seed(s.seed);
    const TimeSeries full = simulate_linear_toy(s.params, s.dt, s.length - 1, s.seed);
    save_csv(full, full_path, true);
    save_csv(full.select({0}), observed_path, true);
    std::printf("linear: %zu samples at dt=%g\n", full.length(), s.dt);
  }
  manifest.output(full_path);
  manifest.output(observed_path);
  manifest.write();
  return 0;
}

// ---- fit

struct FitArgs {
  std::string data;
  double dt = 0.0;
  std::size_t skip = 0;
  std::string constraints = "none";
  std::string ridge = "auto";
  std::size_t max_levels = 20;
  bool no_quadratic = false;
  std::string out;
};

RidgeSpec parse_ridge(const std::string& text) {
  if (text == "auto") return RidgeSpec::automatic();
  if (text == "none") return RidgeSpec::none();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(v >= 0.0) || !std::isfinite(v)) throw ConfigError("--ridge expects auto, none or a value >= 0");
  return RidgeSpec::fixed(v);
}

TimeSeries load_series(const std::string& path, double dt, std::size_t skip = 0) {
  const TimeSeries raw = load_csv(path, dt, skip);
  // A leading "t" column written by save_csv is not a state variable.
  if (!raw.names().empty() && raw.names()[0] == "t" && raw.channels() > 1) {
    std::vector<std::size_t> keep;
    for (std::size_t c = 1; c < raw.channels(); ++c) keep.push_back(c);
    return raw.select(keep);
  }
  return raw;
}

void print_report(const EMRModel& model) {
  std::printf("%-6s %-8s %10s %10s %10s  %s\n", "level", "channel", "lag1", "trial R2", "cov chg", "lag1/R2/cov");
  for (const auto& lv : model.report.levels) {
    for (Eigen::Index c = 0; c < lv.lag1.size(); ++c) {
      const std::string flags = c == 0 ? std::string(lv.lag1_ok ? "y" : "n") + "/" + (lv.r2_ok ? "y" : "n") + "/" +
                                             (lv.cov_ok ? "y" : "n") + (lv.stop ? "  stop" : "")
                                       : "";
      char cov[16] = "";
      if (c == 0) std::snprintf(cov, sizeof cov, "%10.4f", lv.cov_change);
      std::printf("%-6zu %-8s %10.4f %10.4f %10s  %s\n", lv.level, model.names[static_cast<std::size_t>(c)].c_str(),
                  lv.lag1[c], lv.trial_r2.size() > c ? lv.trial_r2[c] : NAN, cov, flags.c_str());
    }
  }
  std::printf("p = %zu\nstop_reason = %s\n", model.p(), model.report.stop_reason.c_str());
}

int run_fit(const FitArgs& a, const std::string& command) {
  if (!(a.dt > 0.0)) throw ConfigError("--dt must be positive");
  const TimeSeries ts = load_series(a.data, a.dt, a.skip);
  FitOptions options;
  options.quadratic = !a.no_quadratic;
  if (a.constraints == "energy") {
    if (!options.quadratic) throw ConfigError("energy constraints need the quadratic block");
    options.constraints = energy_constraints(ts.channels());
  } else if (a.constraints != "none") {
    throw ConfigError("--constraints must be none or energy");
  }
  options.ridge = parse_ridge(a.ridge);
  options.stopping.max_levels = a.max_levels;

  Manifest manifest(command, a.out + ".manifest.json");
  manifest.input(a.data);
  manifest.config() = {{"dt", a.dt}, {"skip", a.skip}, {"constraints", a.constraints}, {"ridge", a.ridge},
                       {"max_levels", a.max_levels}, {"quadratic", options.quadratic}};
  const EMRModel model = fit_emr(ts, options);
  save_model(model, a.out);
  print_report(model);
  manifest.extra("result") = {{"p", model.p()}, {"stop_reason", model.report.stop_reason}};
  manifest.output(a.out);
  manifest.write();
  return 0;
}

// ---- simulate-model

struct SimulateArgs {
  std::string model;
  std::size_t steps = 0;
  std::uint64_t seed = 1;
  std::optional<double> reflect;
  std::string init;
  std::size_t stride = 1;
  std::size_t burn_in = 0;
  std::string out;
};

ReflectionSpec reflection_from(const std::optional<double>& eps) {
  if (!eps) return {};
  if (!(*eps > 0.0)) throw ConfigError("--reflect expects a positive epsilon");
  return {true, *eps};
}

int run_simulate_model(const SimulateArgs& a, const std::string& command) {
  const EMRModel model = load_model(a.model);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.d));
  if (!a.init.empty()) {
    const TimeSeries init = load_series(a.init, model.dt);
    if (init.channels() != model.d) throw ConfigError("--init has " + std::to_string(init.channels()) + " channels, model has " + std::to_string(model.d));
    x0 = init.row(0).transpose();
  }
  SimConfig sim;
  sim.steps = a.steps;
  sim.seed = a.seed;
  sim.sample_stride = a.stride;
  sim.burn_in = a.burn_in;
  const ReflectionSpec reflection = reflection_from(a.reflect);

  Manifest manifest(command, a.out + ".manifest.json");
  manifest.input(a.model);
  if (!a.init.empty()) manifest.input(a.init);
  manifest.seed(a.seed);
  manifest.config() = {{"steps", a.steps}, {"stride", a.stride}, {"burn_in", a.burn_in}, {"x0", vec(x0)},
                       {"reflect", a.reflect ? json(*a.reflect) : json(nullptr)}};
  const TimeSeries out = simulate_emr(model, x0, HiddenState::zeros(model), sim, reflection);
  save_csv(out, a.out, true);
  std::printf("wrote %zu samples of %zu channels to %s\n", out.length(), out.channels(), a.out.c_str());
  manifest.output(a.out);
  manifest.write();
  return 0;
}

// ---- forecast

struct ForecastArgs {
  std::string model;
  std::string data;
  std::size_t window = 0;
  std::size_t horizon = 0;
  std::size_t ensemble = 1;
  std::uint64_t seed = 1;
  std::optional<double> reflect;
  std::string out;
};

int run_forecast(const ForecastArgs& a, const std::string& command) {
  const EMRModel model = load_model(a.model);
  TimeSeries data = load_series(a.data, model.dt);
  if (a.window > 0) {
    if (a.window > data.length()) throw ConfigError("--window exceeds the data length");
    data = data.slice(data.length() - a.window, a.window);
  }
  ensure_directory(a.out);
  Manifest manifest(command, path_in(a.out, "manifest.json"));
  manifest.input(a.model);
  manifest.input(a.data);
  manifest.seed(a.seed);
  manifest.config() = {{"window", data.length()}, {"horizon", a.horizon}, {"ensemble", a.ensemble},
                       {"reflect", a.reflect ? json(*a.reflect) : json(nullptr)}};
  const ForecastResult result = forecast(model, data, a.horizon, a.ensemble, a.seed, reflection_from(a.reflect));
  for (std::size_t i = 0; i < result.members.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "member_%03zu.csv", i);
    save_csv(result.members[i], path_in(a.out, name), true);
    manifest.output(path_in(a.out, name));
  }
  std::vector<std::string> header{"t"};
  std::vector<std::vector<double>> columns(1);
  const double t0 = data.t0() + static_cast<double>(data.length() - 1) * model.dt;
  for (Eigen::Index k = 0; k < result.mean.rows(); ++k) columns[0].push_back(t0 + static_cast<double>(k) * model.dt);
  for (std::size_t c = 0; c < model.d; ++c) {
    header.push_back("mean_" + model.names[c]);
    columns.push_back(vec(result.mean.col(static_cast<Eigen::Index>(c))));
    header.push_back("spread_" + model.names[c]);
    columns.push_back(vec(result.spread.col(static_cast<Eigen::Index>(c))));
  }
  write_table(path_in(a.out, "summary.csv"), header, columns);
  manifest.output(path_in(a.out, "summary.csv"));
  std::printf("forecast: %zu members, horizon %zu, written to %s\n", result.members.size(), a.horizon, a.out.c_str());
  manifest.write();
  return 0;
}

// ---- diagnose

struct DiagnoseArgs {
  std::string data;
  std::string vs;
  double dt = 1.0;
  std::size_t skip = 0;
  std::optional<std::size_t> acf_lags;
  bool pdf1d = false;
  std::vector<std::size_t> pdf2d;
  std::size_t bins = kDefaultBins;
  std::string out;
};

int run_diagnose(const DiagnoseArgs& a, const std::string& command) {
  if (!(a.dt > 0.0)) throw ConfigError("--dt must be positive");
  if (a.bins < 1) throw ConfigError("--bins must be at least 1");
  std::vector<TimeSeries> series{load_series(a.data, a.dt, a.skip)};
  if (!a.vs.empty()) {
    series.push_back(load_series(a.vs, a.dt, a.skip));
    if (series[1].channels() != series[0].channels()) throw ConfigError("--vs series has a different channel count");
  }
  const TimeSeries& first = series[0];
  const std::size_t d = first.channels();
  const std::vector<std::string> tags = series.size() == 2 ? std::vector<std::string>{"a", "b"} : std::vector<std::string>{"a"};

  ensure_directory(a.out);
  Manifest manifest(command, path_in(a.out, "manifest.json"));
  manifest.input(a.data);
  if (!a.vs.empty()) manifest.input(a.vs);
  manifest.config() = {{"dt", a.dt}, {"skip", a.skip}, {"bins", a.bins}, {"pdf1d", a.pdf1d}, {"pdf2d", a.pdf2d},
                       {"acf", a.acf_lags ? json(*a.acf_lags) : json(nullptr)}};
  json summary = json::object();

  if (a.acf_lags) {
    std::vector<AcfCurve> curves;
    for (const auto& s : series) curves.push_back(acf(s, *a.acf_lags));
    std::vector<std::string> header{"lag"};
    std::vector<std::vector<double>> columns(1);
    for (std::size_t l = 0; l <= *a.acf_lags; ++l) columns[0].push_back(static_cast<double>(l) * a.dt);
    json acf_summary = json::object();
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t s = 0; s < series.size(); ++s) {
        header.push_back(tags[s] + "_" + first.names()[c]);
        columns.push_back(vec(curves[s].values.col(static_cast<Eigen::Index>(c))));
      }
      if (series.size() == 2) {
        const Eigen::VectorXd diff = curves[0].values.col(static_cast<Eigen::Index>(c)) - curves[1].values.col(static_cast<Eigen::Index>(c));
        acf_summary[first.names()[c]] = {{"max_abs", diff.cwiseAbs().maxCoeff()},
                                         {"l1", diff.cwiseAbs().sum() * a.dt},
                                         {"rms", std::sqrt(diff.squaredNorm() / static_cast<double>(diff.size()))}};
      }
    }
    write_table(path_in(a.out, "acf.csv"), header, columns);
    manifest.output(path_in(a.out, "acf.csv"));
    if (series.size() == 2) summary["acf"] = acf_summary;
  }

  if (a.pdf1d) {
    json pdf_summary = json::object();
    for (std::size_t c = 0; c < d; ++c) {
      double lo = first.channel(c).minCoeff(), hi = first.channel(c).maxCoeff();
      for (const auto& s : series) {
        lo = std::min(lo, s.channel(c).minCoeff());
        hi = std::max(hi, s.channel(c).maxCoeff());
      }
      const Eigen::VectorXd edges = padded_edges(lo, hi, a.bins);
      std::vector<Histogram1D> h;
      for (const auto& s : series) h.push_back(pdf1d_on_edges(s.channel(c), edges));
      std::vector<std::string> header{"lo", "hi"};
      std::vector<std::vector<double>> columns(2);
      for (Eigen::Index b = 0; b + 1 < edges.size(); ++b) {
        columns[0].push_back(edges[b]);
        columns[1].push_back(edges[b + 1]);
      }
      for (std::size_t s = 0; s < series.size(); ++s) {
        header.push_back(tags[s]);
        columns.push_back(vec(h[s].density));
      }
      const std::string file = path_in(a.out, "pdf1d_" + first.names()[c] + ".csv");
      write_table(file, header, columns);
      manifest.output(file);
      if (series.size() == 2) pdf_summary[first.names()[c]] = {{"l1", l1_distance(h[0], h[1])}};
    }
    if (series.size() == 2) summary["pdf1d"] = pdf_summary;
  }

  if (!a.pdf2d.empty()) {
    if (a.pdf2d.size() != 2) throw ConfigError("--pdf2d expects two channel indices");
    const std::size_t i = a.pdf2d[0], j = a.pdf2d[1];
    if (i >= d || j >= d || i == j) throw ConfigError("--pdf2d channels must be distinct and below " + std::to_string(d));
    auto range = [&](std::size_t c) {
      double lo = first.channel(c).minCoeff(), hi = first.channel(c).maxCoeff();
      for (const auto& s : series) {
        lo = std::min(lo, s.channel(c).minCoeff());
        hi = std::max(hi, s.channel(c).maxCoeff());
      }
      return padded_edges(lo, hi, a.bins);
    };
    const Eigen::VectorXd xe = range(i), ye = range(j);
    std::vector<Histogram2D> h;
    for (const auto& s : series) h.push_back(pdf2d_on_edges(s.channel(i), s.channel(j), xe, ye));
    std::vector<std::string> header{"x", "y"};
    std::vector<std::vector<double>> columns(2 + series.size());
    for (Eigen::Index bx = 0; bx + 1 < xe.size(); ++bx)
      for (Eigen::Index by = 0; by + 1 < ye.size(); ++by) {
        columns[0].push_back(0.5 * (xe[bx] + xe[bx + 1]));
        columns[1].push_back(0.5 * (ye[by] + ye[by + 1]));
        for (std::size_t s = 0; s < series.size(); ++s) columns[2 + s].push_back(h[s].density(bx, by));
      }
    for (const auto& t : tags) header.push_back(t);
    const std::string file = path_in(a.out, "pdf2d_" + first.names()[i] + "_" + first.names()[j] + ".csv");
    write_table(file, header, columns);
    manifest.output(file);
    if (series.size() == 2) {
      const double cell = (xe[1] - xe[0]) * (ye[1] - ye[0]);
      summary["pdf2d"] = {{"l1", (h[0].density - h[1].density).cwiseAbs().sum() * cell}};
    }
  }

  if (series.size() == 2) {
    write_text(path_in(a.out, "summary.json"), summary.dump(2) + "\n");
    manifest.output(path_in(a.out, "summary.json"));
    std::cout << summary.dump(2) << "\n";
  }
  manifest.write();
  return 0;
}

// ---- eta-test

struct EtaArgs {
  std::string model;
  std::string data;
  std::size_t seeds = 10;
  std::uint64_t seed = 1;
  std::size_t steps = 0;
  std::string out;
};

int run_eta(const EtaArgs& a, const std::string& command) {
  const EMRModel model = load_model(a.model);
  const TimeSeries data = load_series(a.data, model.dt);
  EtaConfig config;
  config.seeds = a.seeds;
  config.seed = a.seed;
  config.steps = a.steps;
  const std::string manifest_path = a.out.empty() ? "eta-test.manifest.json" : a.out + ".manifest.json";
  Manifest manifest(command, manifest_path);
  manifest.input(a.model);
  manifest.input(a.data);
  manifest.seed(a.seed);
  manifest.config() = {{"seeds", a.seeds}, {"steps", a.steps}, {"burn_fraction", config.burn_fraction}};
  const EtaReport r = eta_test(model, data, config);
  for (Eigen::Index c = 0; c < r.rho.size(); ++c)
    std::printf("rho(xi_%s, %s) = %.4f +- %.4f\n", model.names[static_cast<std::size_t>(c)].c_str(),
                model.names[static_cast<std::size_t>(c)].c_str(), r.rho[c], r.rho_spread[c]);
  std::printf("max_abs = %.4f over %zu seeds%s\n", r.max_abs, r.seeds, r.degenerate ? " (degenerate)" : "");
  const json result = {{"rho", vec(r.rho)}, {"rho_spread", vec(r.rho_spread)}, {"max_abs", r.max_abs},
                       {"degenerate", r.degenerate}, {"seeds", r.seeds}};
  if (!a.out.empty()) {
    write_text(a.out, result.dump(2) + "\n");
    manifest.output(a.out);
  }
  manifest.extra("result") = result;
  manifest.write();
  return 0;
}

// ---- reproduce

struct ReproduceArgs {
  std::string study;
  std::string eps = "all";
  bool desk = false;
  std::uint64_t seed = 1;
  std::string out;
};

std::vector<double> parse_eps_list(const std::string& text) {
  if (text == "all") return kBenchmarkEpsilons;
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !(v > 0.0)) throw ConfigError("--eps expects 'all' or positive values separated by commas");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--eps is empty");
  return out;
}

int run_reproduce(const ReproduceArgs& a, const std::string& command) {
  const std::string out = a.out.empty() ? "reproduce-" + a.study : a.out;
  const Scale scale = a.desk ? Scale::Desk : Scale::Full;
  ensure_directory(out);
  Manifest manifest(command, path_in(out, "manifest.json"));
  manifest.seed(a.seed);
  manifest.config() = {{"study", a.study}, {"scale", a.desk ? "desk" : "full"}, {"eps", a.eps}};
  StudyReport report;
  if (a.study == "climate") report = study_climate(parse_eps_list(a.eps), scale, a.seed, out);
  else if (a.study == "lv") report = study_lv(scale, a.seed, out);
  else if (a.study == "linear-toy") report = study_linear_toy(scale, a.seed, out);
  else report = study_gamma_chain(scale, out);
  for (const auto& c : report.checks)
    std::printf("%s %-4s %s: %s\n", c.pass ? "PASS" : "FAIL", c.id.c_str(), c.name.c_str(), c.detail.c_str());
  for (const auto& entry : fs::directory_iterator(out))
    if (entry.path().filename() != "manifest.json") manifest.output(entry.path().string());
  manifest.extra("pass") = report.pass();
  manifest.write();
  return report.pass() ? 0 : kExitAcceptance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical model reduction: fit, simulate and diagnose multilevel stochastic models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", EMRKIT_VERSION);
  const std::string command = join_args(argc, argv);

  ReferenceArgs ref;
  auto* sub_ref = app.add_subcommand("simulate-reference", "generate a reference trajectory from a preset or parameter file");
  sub_ref->add_option("--preset", ref.preset, "paper-climate, paper-lv or paper-linear");
  sub_ref->add_option("--params", ref.params, "key=value parameter file")->check(CLI::ExistingFile);
  sub_ref->add_option("--eps", ref.eps, "climate scale separation");
  sub_ref->add_option("--seed", ref.seed, "noise seed");
  sub_ref->add_option("--set", ref.overrides, "override a parameter, key=value");
  sub_ref->add_option("-o,--out", ref.out, "output directory")->required();

  FitArgs fit;
  auto* sub_fit = app.add_subcommand("fit", "fit a multilevel EMR model to a CSV series");
  sub_fit->add_option("data", fit.data, "CSV with a header of channel names")->required()->check(CLI::ExistingFile);
  sub_fit->add_option("--dt", fit.dt, "sampling interval")->required();
  sub_fit->add_option("--skip", fit.skip, "leading rows to drop");
  sub_fit->add_option("--constraints", fit.constraints, "none or energy")->check(CLI::IsMember({"none", "energy"}));
  sub_fit->add_option("--ridge", fit.ridge, "auto, none or a penalty value");
  sub_fit->add_option("--max-levels", fit.max_levels, "cap on hidden levels")->check(CLI::PositiveNumber);
  sub_fit->add_flag("--no-quadratic", fit.no_quadratic, "linear main level");
  sub_fit->add_option("-o,--out", fit.out, "model file")->required();

  SimulateArgs sim;
  auto* sub_sim = app.add_subcommand("simulate-model", "integrate a fitted model");
  sub_sim->add_option("model", sim.model, "model file")->required()->check(CLI::ExistingFile);
  sub_sim->add_option("--steps", sim.steps, "Euler steps")->required();
  sub_sim->add_option("--seed", sim.seed, "noise seed");
  sub_sim->add_option("--reflect", sim.reflect, "project x onto x >= eps after each step");
  sub_sim->add_option("--init", sim.init, "CSV whose first row is the initial state")->check(CLI::ExistingFile);
  sub_sim->add_option("--stride", sim.stride, "keep every n-th state")->check(CLI::PositiveNumber);
  sub_sim->add_option("--burn-in", sim.burn_in, "states dropped before recording");
  sub_sim->add_option("-o,--out", sim.out, "output CSV")->required();

  ForecastArgs fc;
  auto* sub_fc = app.add_subcommand("forecast", "ensemble forecast from the end of an observed window");
  sub_fc->add_option("model", fc.model, "model file")->required()->check(CLI::ExistingFile);
  sub_fc->add_option("data", fc.data, "observed CSV")->required()->check(CLI::ExistingFile);
  sub_fc->add_option("--window", fc.window, "use only the last n rows");
  sub_fc->add_option("--horizon", fc.horizon, "steps ahead")->required();
  sub_fc->add_option("--ensemble", fc.ensemble, "members")->check(CLI::PositiveNumber);
  sub_fc->add_option("--seed", fc.seed, "base seed");
  sub_fc->add_option("--reflect", fc.reflect, "project x onto x >= eps after each step");
  sub_fc->add_option("-o,--out", fc.out, "output directory")->required();

  DiagnoseArgs dg;
  auto* sub_dg = app.add_subcommand("diagnose", "ACF and PDF statistics, optionally paired with a second series");
  sub_dg->add_option("data", dg.data, "CSV series")->required()->check(CLI::ExistingFile);
  sub_dg->add_option("--vs", dg.vs, "second CSV series")->check(CLI::ExistingFile);
  sub_dg->add_option("--dt", dg.dt, "sampling interval for lag times");
  sub_dg->add_option("--skip", dg.skip, "leading rows to drop");
  sub_dg->add_option("--acf", dg.acf_lags, "maximum lag in samples");
  sub_dg->add_flag("--pdf1d", dg.pdf1d, "one-dimensional densities per channel");
  sub_dg->add_option("--pdf2d", dg.pdf2d, "joint density of channels i j")->expected(2);
  sub_dg->add_option("--bins", dg.bins, "histogram bins per axis");
  sub_dg->add_option("-o,--out", dg.out, "output directory")->required();

  EtaArgs eta;
  auto* sub_eta = app.add_subcommand("eta-test", "correlate the effective forcing with the observed variables");
  sub_eta->add_option("model", eta.model, "model file")->required()->check(CLI::ExistingFile);
  sub_eta->add_option("data", eta.data, "observed CSV")->required()->check(CLI::ExistingFile);
  sub_eta->add_option("--seeds", eta.seeds, "ensemble size")->check(CLI::PositiveNumber);
  sub_eta->add_option("--seed", eta.seed, "base seed");
  sub_eta->add_option("--steps", eta.steps, "steps per run (0: data length)");
  sub_eta->add_option("-o,--out", eta.out, "JSON report");

  ReproduceArgs rep;
  auto* sub_rep = app.add_subcommand("reproduce", "run a benchmark pipeline and check it against the acceptance bands");
  sub_rep->add_option("study", rep.study, "climate, lv, linear-toy or gamma-chain")
      ->required()
      ->check(CLI::IsMember({"climate", "lv", "linear-toy", "gamma-chain"}));
  sub_rep->add_option("--eps", rep.eps, "'all' or comma-separated values (climate)");
  sub_rep->add_flag("--desk", rep.desk, "10x shorter runs with wider bands");
  sub_rep->add_option("--seed", rep.seed, "base seed");
  sub_rep->add_option("-o,--out", rep.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*sub_ref) return run_simulate_reference(ref, command);
    if (*sub_fit) return run_fit(fit, command);
    if (*sub_sim) return run_simulate_model(sim, command);
    if (*sub_fc) return run_forecast(fc, command);
    if (*sub_dg) return run_diagnose(dg, command);
    if (*sub_eta) return run_eta(eta, command);
    if (*sub_rep) return run_reproduce(rep, command);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  }
  return 0;
}
