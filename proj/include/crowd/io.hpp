#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowd/continuation.hpp"
#include "crowd/evolution.hpp"
#include "crowd/model.hpp"
#include "crowd/shooting.hpp"
#include "crowd/spectrum.hpp"

namespace crowd {

// Bad or unknown configuration entry (CLI exit code 2); key is "section.name".
struct ConfigError : std::runtime_error {
  std::string key;
  ConfigError(std::string k, const std::string& what) : std::runtime_error(k + ": " + what), key(std::move(k)) {}
};

struct RunConfig {
  // [model]
  ModelKind model = ModelKind::I;
  int dim = 1;
  double kappa = NAN;  // NAN: model default
  double delta = NAN;
  // [grid]
  int cells = 1024;
  int basis_modes = 128;
  int quad_cells = 1024;
  // [shoot]
  ShootOptions shoot;
  double phi0 = NAN;  // NAN: midpoint of the bifurcation thresholds
  // [constants]
  double phi0_min = NAN, phi0_max = NAN;  // NAN: 0 and 1.25 phi0_plus
  int phi0_samples = 2000;
  // [branch]
  StepPolicy branch;
  int constant_samples = 400;
  // [spectrum]
  int pairs = 50;
  int low_modes = 16;
  unsigned seed = 7;
  // [evolve]
  std::string scenario = "stable_plateau";  // stable_plateau | unstable_constant | stationary
  double T = 2000;
  double amplitude = 1e-2;
  EvolveOptions evolve;
  double linear_T = 100;
  double linear_dt = 1e-2;
  // [output]
  std::string out_dir = "out";

  ModelSpec spec() const { return ModelSpec{model}; }
  Params params() const;
  Domain domain() const { return Domain{dim}; }
  // fill model-dependent defaults and check ranges; throws ConfigError
  void resolve();
};

RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});
// key is "section.name" or a bare name in [model]/[output]
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
// resolved config as "section.key=value" lines
std::vector<std::string> config_lines(const RunConfig& cfg);

// 17 significant digits, "nan"/"inf" spelled out
std::string fmt_num(double x);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const RunConfig& cfg, const std::vector<std::string>& columns);
  void row(const std::vector<std::string>& cells);
  ~CsvWriter();

 private:
  struct Impl;
  Impl* impl_;
};

void write_json(const std::string& path, const RunConfig& cfg, nlohmann::json body);

nlohmann::json to_json(const StabilityReport& r);
nlohmann::json to_json(const RunSummary& r);
nlohmann::json to_json(const LinearSummary& r);
nlohmann::json to_json(const RadialProfile& p);

void write_diagram(const std::string& path, const RunConfig& cfg, const std::vector<DiagramRow>& rows);
void write_profile(const std::string& path, const RunConfig& cfg, const RadialProfile& prof);

}  // namespace crowd
