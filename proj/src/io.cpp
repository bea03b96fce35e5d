#include "crowd/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "crowd/constants.hpp"

namespace crowd {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
}

long to_long(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true/false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Entry {
  const char* key;
  Setter set;
  Getter get;
};

#define NUM(k, field) \
  Entry { k, [](RunConfig& c, const std::string& key, const std::string& v) { c.field = to_double(key, v); }, \
          [](const RunConfig& c) { return fmt_num(c.field); } }
#define INT(k, field) \
  Entry { k, [](RunConfig& c, const std::string& key, const std::string& v) { c.field = to_long(key, v); }, \
          [](const RunConfig& c) { return std::to_string(c.field); } }
#define BOOL(k, field) \
  Entry { k, [](RunConfig& c, const std::string& key, const std::string& v) { c.field = to_bool(key, v); }, \
          [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); } }
#define STR(k, field) \
  Entry { k, [](RunConfig& c, const std::string&, const std::string& v) { c.field = v; }, \
          [](const RunConfig& c) { return c.field; } }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      Entry{"model.model",
            [](RunConfig& c, const std::string& key, const std::string& v) {
              try {
                c.model = parse_model(v);
              } catch (const std::exception&) {
                throw ConfigError(key, "expected I or II, got '" + v + "'");
              }
            },
            [](const RunConfig& c) { return to_string(c.model); }},
      INT("model.dim", dim),
      NUM("model.kappa", kappa),
      NUM("model.delta", delta),
      INT("grid.cells", cells),
      INT("grid.basis_modes", basis_modes),
      INT("grid.quad_cells", quad_cells),
      NUM("shoot.phi0", phi0),
      NUM("shoot.ode_rtol", shoot.ode_rtol),
      NUM("shoot.ode_atol", shoot.ode_atol),
      NUM("shoot.refine_rtol", shoot.refine_rtol),
      NUM("shoot.slope_tol", shoot.slope_tol),
      NUM("shoot.residual_tol", shoot.residual_tol),
      INT("shoot.scan_cells", shoot.scan_cells),
      INT("shoot.max_newton", shoot.max_newton),
      NUM("constants.phi0_min", phi0_min),
      NUM("constants.phi0_max", phi0_max),
      INT("constants.phi0_samples", phi0_samples),
      NUM("branch.ds_max", branch.ds_max),
      NUM("branch.ds_min", branch.ds_min),
      NUM("branch.max_angle", branch.max_angle),
      INT("branch.max_points", branch.max_points),
      NUM("branch.merge_tol", branch.merge_tol),
      NUM("branch.seed_factor", branch.seed_factor),
      NUM("branch.seed_max", branch.seed_max),
      BOOL("branch.enrich", branch.enrich),
      INT("branch.constant_samples", constant_samples),
      INT("spectrum.pairs", pairs),
      INT("spectrum.low_modes", low_modes),
      INT("spectrum.seed", seed),
      STR("evolve.scenario", scenario),
      NUM("evolve.T", T),
      NUM("evolve.amplitude", amplitude),
      NUM("evolve.dt0", evolve.dt0),
      NUM("evolve.dt_max", evolve.dt_max),
      NUM("evolve.tol", evolve.tol),
      INT("evolve.sample_stride", evolve.sample_stride),
      NUM("evolve.fit_hi", evolve.fit_hi),
      NUM("evolve.linear_T", linear_T),
      NUM("evolve.linear_dt", linear_dt),
      STR("output.dir", out_dir),
  };
  return table;
}

#undef NUM
#undef INT
#undef BOOL
#undef STR

const Entry& find_entry(const std::string& key) {
  for (const auto& e : entries())
    if (key == e.key) return e;
  // bare names resolve when unambiguous
  const Entry* hit = nullptr;
  for (const auto& e : entries()) {
    std::string k = e.key;
    if (k.substr(k.find('.') + 1) == key) {
      if (hit) throw ConfigError(key, "ambiguous key, use section.name");
      hit = &e;
    }
  }
  if (!hit) throw ConfigError(key, "unknown key");
  return *hit;
}

nlohmann::json num(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

nlohmann::json nums(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

nlohmann::json nums(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

void ensure_parent(const std::string& path) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

}  // namespace

Params RunConfig::params() const {
  Params p = default_params(ModelSpec{model});
  if (std::isfinite(kappa)) p.kappa = kappa;
  if (std::isfinite(delta)) p.delta = delta;
  return p;
}

void RunConfig::resolve() {
  Params d = default_params(ModelSpec{model});
  if (!std::isfinite(kappa)) kappa = d.kappa;
  if (!std::isfinite(delta)) delta = d.delta;
  if (dim != 1 && dim != 2) throw ConfigError("model.dim", "must be 1 or 2");
  if (!(kappa > 0)) throw ConfigError("model.kappa", "must be positive");
  if (!(delta > 0)) throw ConfigError("model.delta", "must be positive");
  if (cells < 16 || cells % 2) throw ConfigError("grid.cells", "must be even and >= 16");
  if (basis_modes < 4) throw ConfigError("grid.basis_modes", "must be >= 4");
  if (quad_cells < 16) throw ConfigError("grid.quad_cells", "must be >= 16");
  shoot.cells = cells;
  auto positive = [](const char* key, double v) {
    if (!(v > 0)) throw ConfigError(key, "must be positive");
  };
  positive("shoot.ode_rtol", shoot.ode_rtol);
  positive("shoot.ode_atol", shoot.ode_atol);
  positive("shoot.refine_rtol", shoot.refine_rtol);
  positive("shoot.slope_tol", shoot.slope_tol);
  positive("shoot.residual_tol", shoot.residual_tol);
  positive("branch.ds_max", branch.ds_max);
  positive("branch.ds_min", branch.ds_min);
  positive("branch.max_angle", branch.max_angle);
  positive("branch.merge_tol", branch.merge_tol);
  positive("branch.seed_factor", branch.seed_factor);
  positive("branch.seed_max", branch.seed_max);
  positive("evolve.T", T);
  positive("evolve.amplitude", amplitude);
  positive("evolve.dt0", evolve.dt0);
  positive("evolve.dt_max", evolve.dt_max);
  positive("evolve.tol", evolve.tol);
  positive("evolve.fit_hi", evolve.fit_hi);
  positive("evolve.linear_T", linear_T);
  positive("evolve.linear_dt", linear_dt);
  if (phi0_samples < 2) throw ConfigError("constants.phi0_samples", "must be >= 2");
  if (branch.max_points < 3) throw ConfigError("branch.max_points", "must be >= 3");
  if (constant_samples < 0) throw ConfigError("branch.constant_samples", "must be >= 0");
  if (pairs < 1) throw ConfigError("spectrum.pairs", "must be >= 1");
  if (low_modes < 1 || low_modes > basis_modes) throw ConfigError("spectrum.low_modes", "must lie in [1, basis_modes]");
  if (evolve.sample_stride < 1) throw ConfigError("evolve.sample_stride", "must be >= 1");
  if (scenario != "stable_plateau" && scenario != "unstable_constant" && scenario != "stationary")
    throw ConfigError("evolve.scenario", "expected stable_plateau, unstable_constant or stationary");
  branch.shoot = shoot;
  branch.basis_modes = basis_modes;
  if (!std::isfinite(phi0)) {
    auto th = bifurcation_thresholds(spec(), params(), domain());
    if (th.size() == 2) {
      phi0 = 0.5 * (th[0] + th[1]);
    } else {
      FoldData fd = fold_points(spec(), params(), domain());
      phi0 = fd.has_folds ? 0.5 * (fd.phi0_minus + fd.phi0_plus) : 0.0;
    }
  }
  if (!std::isfinite(phi0_min)) phi0_min = 0;
  if (!std::isfinite(phi0_max)) {
    FoldData fd = fold_points(spec(), params(), domain());
    phi0_max = fd.has_folds ? 1.25 * fd.phi0_plus : 1.0 / delta;
  }
  if (!(phi0_max > phi0_min)) throw ConfigError("constants.phi0_max", "must exceed constants.phi0_min");
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const Entry& e = find_entry(key);
  e.set(cfg, e.key, value);
}

RunConfig parse_config(const std::string& text, RunConfig cfg) {
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno), "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(section.empty() ? line : section + "." + line, "expected key=value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
    std::string full = section.empty() ? key : section + "." + key;
    if (value.empty()) throw ConfigError(full, "empty value");
    set_config_value(cfg, full, value);
  }
  return cfg;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::vector<std::string> config_lines(const RunConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.push_back(std::string(e.key) + "=" + e.get(cfg));
  return out;
}

std::string fmt_num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct CsvWriter::Impl {
  std::ofstream f;
  size_t columns = 0;
};

CsvWriter::CsvWriter(const std::string& path, const RunConfig& cfg, const std::vector<std::string>& columns)
    : impl_(new Impl) {
  ensure_parent(path);
  impl_->f.open(path);
  if (!impl_->f) {
    delete impl_;
    throw std::runtime_error("cannot write '" + path + "'");
  }
  for (const auto& l : config_lines(cfg)) impl_->f << "# " << l << '\n';
  impl_->columns = columns.size();
  for (size_t i = 0; i < columns.size(); ++i) impl_->f << (i ? "," : "") << columns[i];
  impl_->f << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != impl_->columns) throw std::logic_error("CsvWriter: wrong number of cells");
  for (size_t i = 0; i < cells.size(); ++i) impl_->f << (i ? "," : "") << cells[i];
  impl_->f << '\n';
}

CsvWriter::~CsvWriter() { delete impl_; }

void write_json(const std::string& path, const RunConfig& cfg, nlohmann::json body) {
  ensure_parent(path);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  // the config block comes first; the body keeps its (sorted) key order
  nlohmann::ordered_json out;
  out["config"] = config_lines(cfg);
  for (auto& [k, v] : body.items()) out[k] = nlohmann::ordered_json::parse(v.dump());
  f << out.dump(2) << '\n';
}

nlohmann::json to_json(const StabilityReport& r) {
  nlohmann::json j;
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& z : r.eigenvalues) ev.push_back({num(z.real()), num(z.imag())});
  j["eigenvalues"] = ev;
  j["mu1"] = num(r.mu1);
  j["dynamically_stable"] = r.dynamically_stable;
  j["self_adjoint_residual"] = r.self_adjoint_residual ? num(*r.self_adjoint_residual) : nlohmann::json(nullptr);
  j["kernel_residual"] = r.kernel_residual ? num(*r.kernel_residual) : nlohmann::json(nullptr);
  j["indefinite_form"] = r.indefinite_form;
  j["method"] = r.method;
  j["diagnostic"] = r.diagnostic;
  return j;
}

nlohmann::json to_json(const RunSummary& r) {
  nlohmann::json j;
  j["times"] = nums(r.times);
  j["mass"] = nums(r.mass);
  j["functional_name"] = r.functional_name;
  j["functional"] = nums(r.functional);
  j["deviation"] = nums(r.deviation);
  j["terminal_distance"] = num(r.terminal_distance);
  j["nearest"] = r.nearest;
  j["growth_rate"] = num(r.growth_rate);
  j["steps"] = r.steps;
  j["rejected"] = r.rejected;
  j["terminal_rho"] = nums(r.terminal.rho);
  j["terminal_D"] = nums(r.terminal.D);
  return j;
}

nlohmann::json to_json(const LinearSummary& r) {
  nlohmann::json j;
  j["times"] = nums(r.times);
  j["integral_u"] = nums(r.integral_u);
  j["abs_u"] = nums(r.abs_u);
  j["LD"] = nums(r.LD);
  j["ID"] = nums(r.ID);
  j["dissipation_defect"] = num(r.dissipation_defect);
  j["growth_rate"] = num(r.growth_rate);
  return j;
}

nlohmann::json to_json(const RadialProfile& p) {
  nlohmann::json j;
  j["dim"] = p.dim;
  j["phi0"] = num(p.phi0);
  j["a"] = num(p.a);
  j["r"] = nums(p.r);
  j["phi"] = nums(p.phi);
  j["dphi"] = nums(p.dphi);
  return j;
}

void write_diagram(const std::string& path, const RunConfig& cfg, const std::vector<DiagramRow>& rows) {
  CsvWriter w(path, cfg,
              {"model", "dim", "kappa", "delta", "phi0", "a", "mass", "mass_fraction", "energy", "lambda_var", "mu1",
               "branch_id", "monotone_dir", "stable_dyn", "stable_var"});
  for (const auto& r : rows)
    w.row({to_string(r.model), std::to_string(r.dim), fmt_num(r.kappa), fmt_num(r.delta), fmt_num(r.phi0),
           fmt_num(r.a), fmt_num(r.mass), fmt_num(r.mass_fraction), fmt_num(r.energy), fmt_num(r.lambda_var),
           fmt_num(r.mu1), std::to_string(r.branch_id), r.monotone_dir, r.stable_dyn ? "1" : "0",
           r.stable_var ? "1" : "0"});
}

void write_profile(const std::string& path, const RunConfig& cfg, const RadialProfile& prof) {
  CsvWriter w(path, cfg, {"r", "phi", "dphi", "rho"});
  for (int i = 0; i < prof.phi.size(); ++i)
    w.row({fmt_num(prof.r[i]), fmt_num(prof.phi[i]), fmt_num(prof.dphi[i]), fmt_num(rho_of_phi(prof.phi[i]))});
}

}  // namespace crowd
