#include "config.hpp"

#include "emr/error.hpp"
#include "presets.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace emr::tools {

KeyValues parse_key_values(const std::string& text) {
  std::istringstream in(text);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(std::string("cannot parse configuration: ") + e.what());
  }
  KeyValues out;
  for (const auto& item : items) {
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == "default"))
      throw ConfigError("configuration sections are not supported (key '" + item.name + "')");
    if (item.inputs.size() != 1) throw ConfigError("configuration key '" + item.name + "' needs exactly one value");
    if (!out.emplace(item.name, item.inputs[0]).second) throw ConfigError("configuration key '" + item.name + "' repeated");
  }
  return out;
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_key_values(buf.str());
}

std::vector<std::string> preset_names() { return {"paper-climate", "paper-lv", "paper-linear"}; }

std::string preset_text(const std::string& name) {
  if (name == "paper-climate") return embedded::kPresetClimate;
  if (name == "paper-lv") return embedded::kPresetLv;
  if (name == "paper-linear") return embedded::kPresetLinear;
  throw ConfigError("unknown preset '" + name + "' (known: paper-climate, paper-lv, paper-linear)");
}

std::string KeyReader::text(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("configuration is missing key '" + key + "'");
  used_.insert(key);
  return it->second;
}

std::string KeyReader::text(const std::string& key, const std::string& fallback) {
  return has(key) ? text(key) : fallback;
}

double KeyReader::number(const std::string& key) {
  const std::string s = text(key);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError("configuration key '" + key + "' is not a finite number: '" + s + "'");
  return v;
}

double KeyReader::number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

std::size_t KeyReader::count(const std::string& key) {
  const std::string s = text(key);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0.0 || v != std::floor(v) || v > 1e15)
    throw ConfigError("configuration key '" + key + "' is not a nonnegative integer: '" + s + "'");
  return static_cast<std::size_t>(v);
}

std::size_t KeyReader::count(const std::string& key, std::size_t fallback) {
  return has(key) ? count(key) : fallback;
}

void KeyReader::finish() const {
  for (const auto& [key, value] : values_)
    if (!used_.count(key)) throw ConfigError("unknown configuration key '" + key + "'");
}

std::string model_kind(const KeyValues& values) {
  const auto it = values.find("model");
  if (it == values.end()) throw ConfigError("configuration lacks the 'model' key");
  return it->second;
}

namespace {

void check_header(KeyReader& r, const std::string& kind) {
  if (r.count("version", 1) != 1) throw ConfigError("unsupported configuration version");
  if (r.text("model") != kind) throw ConfigError("configuration describes a different model than '" + kind + "'");
}

}  // namespace

ClimateSetup climate_setup(const KeyValues& values) {
  KeyReader r(values);
  check_header(r, "climate");
  ClimateSetup s;
  ClimateParams& p = s.params;
  p.b123 = r.number("b123", p.b123);
  p.b213 = r.number("b213", p.b213);
  p.b312 = r.number("b312", p.b312);
  p.c134 = r.number("c134", p.c134);
  p.c341 = r.number("c341", p.c341);
  p.c413 = r.number("c413", p.c413);
  p.L12 = r.number("L12", p.L12);
  p.L21 = r.number("L21", p.L21);
  p.L24 = r.number("L24", p.L24);
  p.L13 = r.number("L13", p.L13);
  p.a1 = r.number("a1", p.a1);
  p.a2 = r.number("a2", p.a2);
  p.d1 = r.number("d1", p.d1);
  p.d2 = r.number("d2", p.d2);
  p.F1 = r.number("F1", p.F1);
  p.F2 = r.number("F2", p.F2);
  p.F3 = r.number("F3", p.F3);
  p.F4 = r.number("F4", p.F4);
  p.gamma1 = r.number("gamma1", p.gamma1);
  p.gamma2 = r.number("gamma2", p.gamma2);
  p.sigma1 = r.number("sigma1", p.sigma1);
  p.sigma2 = r.number("sigma2", p.sigma2);
  p.epsilon = r.number("epsilon", p.epsilon);
  ClimateIntegration& in = s.integration;
  in.duration = r.number("duration", in.duration);
  in.dt = r.number("dt", in.dt);
  in.sample_dt = r.number("sample_dt", in.sample_dt);
  in.burn_in = r.number("burn_in", in.burn_in);
  in.seed = r.count("seed", in.seed);
  const std::string scheme = r.text("scheme", "rk4");
  if (scheme == "rk4") in.scheme = ClimateScheme::Rk4Splitting;
  else if (scheme == "euler") in.scheme = ClimateScheme::EulerMaruyama;
  else throw ConfigError("climate scheme must be 'rk4' or 'euler'");
  r.finish();
  p.validate();
  in.validate();
  return s;
}

LvSetup lv_setup(const KeyValues& values) {
  KeyReader r(values);
  check_header(r, "lv");
  LvSetup s;
  s.params = LVParams::reference();
  s.n0 = lv_reference_initial();
  for (int i = 0; i < 4; ++i) {
    const std::string row = std::to_string(i + 1);
    for (int j = 0; j < 4; ++j) s.params.a(i, j) = r.number("a" + row + std::to_string(j + 1), s.params.a(i, j));
    s.params.b[i] = r.number("b" + row, s.params.b[i]);
    s.n0[i] = r.number("N0_" + row, s.n0[i]);
  }
  s.dt = r.number("dt", s.dt);
  s.length = r.count("length", s.length);
  s.transient = r.count("transient", s.transient);
  r.finish();
  s.params.validate();
  if (s.length < 2) throw ConfigError("Lotka-Volterra length must be at least 2");
  if (s.transient + 2 > s.length) throw ConfigError("Lotka-Volterra transient leaves fewer than two samples");
  return s;
}

LinearSetup linear_setup(const KeyValues& values) {
  KeyReader r(values);
  check_header(r, "linear");
  LinearSetup s;
  s.params.a = r.number("a", s.params.a);
  s.params.q = r.number("q", s.params.q);
  s.params.A = r.number("A", s.params.A);
  s.params.sigma = r.number("sigma", s.params.sigma);
  s.dt = r.number("dt", s.dt);
  s.length = r.count("length", s.length);
  s.seed = r.count("seed", s.seed);
  r.finish();
  s.params.validate();
  if (s.length < 2) throw ConfigError("linear toy length must be at least 2");
  return s;
}

}  // namespace emr::tools
