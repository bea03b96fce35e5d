#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "acceptance/acceptance.hpp"
#include "crowd/bessel.hpp"
#include "crowd/constants.hpp"
#include "crowd/continuation.hpp"
#include "crowd/evolution.hpp"
#include "crowd/functionals.hpp"
#include "crowd/io.hpp"
#include "crowd/spectrum.hpp"

using namespace crowd;
using nlohmann::json;

namespace {

struct Flags {
  std::string config, out, model, dim, kappa, delta;
};

RunConfig resolve_config(const Flags& fl) {
  RunConfig cfg;
  if (!fl.config.empty()) cfg = load_config(fl.config);
  if (!fl.model.empty()) set_config_value(cfg, "model.model", fl.model);
  if (!fl.dim.empty()) set_config_value(cfg, "model.dim", fl.dim);
  if (!fl.kappa.empty()) set_config_value(cfg, "model.kappa", fl.kappa);
  if (!fl.delta.empty()) set_config_value(cfg, "model.delta", fl.delta);
  if (!fl.out.empty()) set_config_value(cfg, "output.dir", fl.out);
  cfg.resolve();
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) { return cfg.out_dir + "/" + name; }

std::string b01(bool b) { return b ? "1" : "0"; }

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  return v;
}

json fold_json(const RunConfig& cfg) {
  ModelSpec m = cfg.spec();
  Params p = cfg.params();
  Domain dom = cfg.domain();
  FoldData fd = fold_points(m, p, dom);
  InstabilityInterval ii = instability_interval(m, p, dom);
  json j;
  j["max_fprime"] = max_fprime(m);
  j["has_folds"] = fd.has_folds;
  if (fd.has_folds) {
    j["phi0_minus"] = fd.phi0_minus;
    j["phi0_plus"] = fd.phi0_plus;
    j["phi_at_folds"] = {fd.phi_at_folds.first, fd.phi_at_folds.second};
    j["M_minus"] = fd.M_minus;
    j["M_plus"] = fd.M_plus;
  }
  j["instability_interval"] = ii.empty ? json(nullptr)
                                       : json{{"phi_lo", ii.phi_lo},
                                              {"phi_hi", ii.phi_hi},
                                              {"mass_lo", ii.mass_lo},
                                              {"mass_hi", ii.mass_hi}};
  j["bifurcation_thresholds"] = bifurcation_thresholds(m, p, dom);
  j["lambda_1"] = neumann_eigenvalue(dom, 1);
  return j;
}

int cmd_constants(const RunConfig& cfg) {
  ModelSpec m = cfg.spec();
  Params p = cfg.params();
  Domain dom = cfg.domain();
  CsvWriter w(out_path(cfg, "constants.csv"), cfg,
              {"phi0", "root", "phi", "rho", "mass", "branch", "degenerate", "variationally_unstable", "mu1"});
  for (double phi0 : linspace(cfg.phi0_min, cfg.phi0_max, cfg.phi0_samples)) {
    ConstantSet cs = constant_solutions(m, p, phi0, dom);
    for (size_t k = 0; k < cs.roots.size(); ++k) {
      const auto& r = cs.roots[k];
      w.row({fmt_num(phi0), std::to_string(k), fmt_num(r.phi), fmt_num(r.rho), fmt_num(r.mass),
             to_string(r.branch_label), b01(cs.degenerate), b01(r.variationally_unstable),
             fmt_num(constant_mu1(m, p, dom, r.phi, cfg.basis_modes))});
    }
  }
  write_json(out_path(cfg, "constants.json"), cfg, fold_json(cfg));
  return 0;
}

json root_json(const ShootResult& r, const RunConfig& cfg) {
  ModelSpec m = cfg.spec();
  Params p = cfg.params();
  const RadialProfile& prof = r.profile;
  MassValue mv = mass_of_profile(prof);
  json j;
  j["a"] = prof.a;
  j["b"] = prof.phi[prof.phi.size() - 1];
  j["monotone_dir"] = to_string(is_monotone(prof));
  j["converged"] = r.converged;
  j["terminal_slope"] = r.terminal_slope;
  j["match_residual"] = r.match_residual;
  j["bvp_residual"] = bvp_residual(m, p, prof);
  j["within_enclosure"] = within_enclosure(m, p, prof);
  j["mass"] = mv.mass;
  j["mass_fraction"] = mv.fraction;
  j["energy"] = energy_E(m, p, prof.phi0, prof).value;
  return j;
}

std::vector<ShootResult> roots_at_phi0(const RunConfig& cfg, json* warnings_out = nullptr) {
  std::vector<std::string> warnings;
  auto roots = find_shooting_roots(cfg.spec(), cfg.params(), cfg.phi0, cfg.dim, cfg.shoot, &warnings);
  if (warnings_out) *warnings_out = warnings;
  return roots;
}

int cmd_shoot(const RunConfig& cfg) {
  json warnings;
  auto roots = roots_at_phi0(cfg, &warnings);
  json list = json::array();
  for (size_t k = 0; k < roots.size(); ++k) {
    list.push_back(root_json(roots[k], cfg));
    write_profile(out_path(cfg, "root" + std::to_string(k) + ".csv"), cfg, roots[k].profile);
  }
  write_json(out_path(cfg, "shoot.json"), cfg, {{"phi0", cfg.phi0}, {"roots", list}, {"warnings", warnings}});
  return 0;
}

std::vector<Branch> trace_both(const RunConfig& cfg, bool keep_profiles) {
  ModelSpec m = cfg.spec();
  Params p = cfg.params();
  Domain dom = cfg.domain();
  auto th = bifurcation_thresholds(m, p, dom);
  std::vector<Branch> out;
  if (th.empty()) return out;
  StepPolicy pol = cfg.branch;
  pol.keep_profiles = keep_profiles;
  for (Monotonicity dir : {Monotonicity::increasing, Monotonicity::decreasing})
    out.push_back(trace_branch(m, p, dom, th.front(), dir, pol));
  return out;
}

void write_diagram_file(const RunConfig& cfg, const std::vector<Branch>& branches) {
  auto grid = linspace(cfg.phi0_min, cfg.phi0_max, cfg.constant_samples);
  write_diagram(out_path(cfg, "diagram.csv"), cfg,
                export_diagram(branches, cfg.constant_samples > 0 ? grid : std::vector<double>{}, cfg.spec(),
                               cfg.params(), cfg.dim));
}

int cmd_branch(const RunConfig& cfg, bool profiles) {
  auto branches = trace_both(cfg, profiles);
  write_diagram_file(cfg, branches);
  if (!profiles) return 0;
  json list = json::array();
  for (size_t k = 0; k < branches.size(); ++k) {
    const Branch& br = branches[k];
    json tps = json::array();
    for (const auto& t : turning_points(br)) tps.push_back({{"index", t.index}, {"phi0", t.phi0}, {"mass", t.mass}});
    list.push_back({{"branch_id", k + 1},
                    {"direction", k == 0 ? "increasing" : "decreasing"},
                    {"origin_phi0", br.origin_phi0},
                    {"end_phi0", br.end_phi0},
                    {"termination", to_string(br.termination)},
                    {"points", br.points.size()},
                    {"turning_points", tps},
                    {"log", br.log}});
    // every point, every 8th node
    CsvWriter w(out_path(cfg, "branch" + std::to_string(k + 1) + "_profiles.csv"), cfg,
                {"point", "phi0", "r", "phi", "rho"});
    for (size_t i = 0; i < br.points.size(); ++i) {
      const auto& pt = br.points[i];
      if (!pt.profile) continue;
      const auto& pr = *pt.profile;
      for (int n = 0; n < pr.phi.size(); n += 8)
        w.row({std::to_string(i), fmt_num(pt.phi0), fmt_num(pr.r[n]), fmt_num(pr.phi[n]),
               fmt_num(rho_of_phi(pr.phi[n]))});
    }
  }
  write_json(out_path(cfg, "branch.json"), cfg, {{"branches", list}});
  return 0;
}

int cmd_spectrum(const RunConfig& cfg) {
  ModelSpec m = cfg.spec();
  Params p = cfg.params();
  Domain dom = cfg.domain();
  auto roots = roots_at_phi0(cfg);
  SpectralBasis basis = SpectralBasis::make(cfg.dim, cfg.basis_modes, cfg.quad_cells);
  json list = json::array();
  for (const auto& r : roots) {
    const RadialProfile& prof = r.profile;
    StabilityReport rep = dynamical_spectrum(prof, p, m, basis);
    if (m.kind == ModelKind::II && !rep.self_adjoint_residual) {
      auto sa = selfadjoint_residual(prof, p, m, basis, cfg.pairs, cfg.low_modes, cfg.seed);
      rep.self_adjoint_residual = sa.residual;
      rep.indefinite_form = rep.indefinite_form || sa.indefinite;
    }
    json j = root_json(r, cfg);
    j["report"] = to_json(rep);
    if (is_monotone(prof) == Monotonicity::constant)
      j["constant_mu1"] = constant_mu1(m, p, dom, prof.phi[0], cfg.basis_modes);
    list.push_back(j);
  }
  write_json(out_path(cfg, "spectrum.json"), cfg, {{"phi0", cfg.phi0}, {"roots", list}});
  return 0;
}

int cmd_lambda(const RunConfig& cfg) {
  ModelSpec m = cfg.spec();
  Params p = cfg.params();
  auto roots = roots_at_phi0(cfg);
  json list = json::array();
  for (const auto& r : roots) {
    LambdaResult lr = lambda_var(r.profile, p, m);
    json j = root_json(r, cfg);
    j["lambda_var"] = lr.value;
    j["multiplier"] = lr.multiplier;
    j["lambda1"] = m.kind == ModelKind::II ? json(lambda1(r.profile, p, m)) : json(nullptr);
    list.push_back(j);
  }
  write_json(out_path(cfg, "lambda.json"), cfg, {{"phi0", cfg.phi0}, {"roots", list}});
  return 0;
}

// Middle constant at phi0 perturbed by amplitude * (first radial mode) in D, with the matching
// rho component of the most unstable n=1 eigenvector.
State perturbed_constant(const RunConfig& cfg, const RadialProfile& base) {
  ModelSpec m = cfg.spec();
  Params p = cfg.params();
  Domain dom = cfg.domain();
  double phic = base.phi[0], rho = rho_of_phi(phic);
  double lam = neumann_eigenvalue(dom, 1);
  auto r = constant_dispersion(m, p, dom, rho, 1);
  double sigma = -std::min(r[0].real(), r[1].real());
  State s = State::from_profile(base);
  for (int i = 0; i < s.grid.nodes(); ++i) {
    double x = s.grid.r(i);
    double md = cfg.dim == 1 ? std::cos(M_PI * x) : bessel_j0(std::sqrt(lam) * x);
    s.rho[i] += cfg.amplitude * rho * (1 - rho) * lam / (sigma + lam) * md;
    s.D[i] += cfg.amplitude * md;
  }
  return s;
}

int cmd_evolve(const RunConfig& cfg) {
  ModelSpec m = cfg.spec();
  Params p = cfg.params();
  auto roots = roots_at_phi0(cfg);
  std::vector<RadialProfile> lib;
  for (const auto& r : roots) lib.push_back(r.profile);
  SpectralBasis basis = SpectralBasis::make(cfg.dim, cfg.basis_modes, cfg.quad_cells);

  const RadialProfile* ref = nullptr;
  if (cfg.scenario == "unstable_constant") {
    for (const auto& pr : lib)
      if (is_monotone(pr) == Monotonicity::constant &&
          constant_mu1(m, p, cfg.domain(), pr.phi[0], cfg.basis_modes) < 0)
        ref = &pr;
  } else if (cfg.scenario == "stable_plateau") {
    for (const auto& pr : lib)
      if (is_monotone(pr) != Monotonicity::constant && !ref && dynamical_spectrum(pr, p, m, basis).mu1 > 0) ref = &pr;
  } else {
    ref = &lib.front();
  }
  if (!ref) throw NumericalError("evolve: no " + cfg.scenario + " solution at phi0=" + fmt_num(cfg.phi0));

  State s0 = State::from_profile(*ref), s = s0;
  if (cfg.scenario == "unstable_constant") {
    s = perturbed_constant(cfg, *ref);
  } else if (cfg.scenario == "stable_plateau") {
    for (int i = 0; i < s.grid.nodes(); ++i) s.D[i] += cfg.amplitude * std::cos(M_PI * s.grid.r(i));
  }
  RunSummary rs = run(s, cfg.T, cfg.evolve, m, p, lib, &s0);

  json body;
  body["scenario"] = cfg.scenario;
  body["reference"] = root_json(roots[ref - lib.data()], cfg);
  body["summary"] = to_json(rs);
  // linearized flow at the reference, started from the Lambda minimizer
  LambdaResult lr = lambda_var(*ref, p, m, true);
  PairField q;
  q.v = lr.minimizer;
  q.u = mobility(*ref).cwiseProduct(q.v);
  EvolveOptions lo = cfg.evolve;
  lo.dt0 = cfg.linear_dt;
  LinearSummary ls = linearized_evolve(*ref, q, cfg.linear_T, p, m, lo);
  body["linearized"] = to_json(ls);
  body["linearized"]["lambda_var"] = lr.value;
  write_json(out_path(cfg, "evolve.json"), cfg, body);

  CsvWriter w(out_path(cfg, "evolve_trace.csv"), cfg, {"t", "mass", rs.functional_name, "deviation"});
  for (size_t k = 0; k < rs.times.size(); ++k)
    w.row({fmt_num(rs.times[k]), fmt_num(rs.mass[k]), fmt_num(rs.functional[k]),
           fmt_num(k < rs.deviation.size() ? rs.deviation[k] : NAN)});
  return 0;
}

int cmd_verify(const RunConfig& cfg, const std::vector<std::string>& only) {
  acceptance::Options opt;
  opt.only = only;
  opt.data_dir = cfg.out_dir + "/datasets";
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream report(out_path(cfg, "verify.txt"));
  for (const auto& l : config_lines(cfg)) report << "# " << l << '\n';
  int failed = 0;
  opt.on_line = [&](const acceptance::CheckLine& l) {
    std::string s = acceptance::format_line(l);
    std::cout << s << std::endl;
    report << s << '\n';
    if (!l.pass) ++failed;
  };
  acceptance::run_acceptance(opt);
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stationary states, stability and evolution of two crowd-motion models"};
  app.require_subcommand(1);
  Flags fl;
  auto add_common = [&](CLI::App* sc) {
    sc->add_option("--config", fl.config, "key=value config file with [sections]");
    sc->add_option("--out", fl.out, "output directory (output.dir)");
    sc->add_option("--model", fl.model, "I or II (model.model)");
    sc->add_option("--dim", fl.dim, "1 or 2 (model.dim)");
    sc->add_option("--kappa", fl.kappa, "model.kappa");
    sc->add_option("--delta", fl.delta, "model.delta");
  };
  std::vector<std::string> only;
  struct Cmd {
    const char* name;
    const char* help;
  };
  const Cmd cmds[] = {
      {"constants", "constant solutions over a phi0 grid, folds and instability interval"},
      {"shoot", "all radial solutions at config phi0"},
      {"branch", "plateau branches with diagram, profiles and branch summary"},
      {"spectrum", "dynamical spectrum of every solution at phi0"},
      {"lambda", "variational indices Lambda (and Lambda1 for model II) at phi0"},
      {"evolve", "time integration of a scenario and of the linearized flow"},
      {"diagram", "diagram dataset only (constants and branches)"},
      {"verify", "acceptance suite, one line per check"},
  };
  for (const auto& c : cmds) {
    auto* sc = app.add_subcommand(c.name, c.help);
    add_common(sc);
    if (std::string(c.name) == "verify") sc->add_option("--only", only, "check ids");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    RunConfig cfg = resolve_config(fl);
    std::string name = app.get_subcommands().front()->get_name();
    if (name == "constants") return cmd_constants(cfg);
    if (name == "shoot") return cmd_shoot(cfg);
    if (name == "branch") return cmd_branch(cfg, true);
    if (name == "diagram") return cmd_branch(cfg, false);
    if (name == "spectrum") return cmd_spectrum(cfg);
    if (name == "lambda") return cmd_lambda(cfg);
    if (name == "evolve") return cmd_evolve(cfg);
    if (name == "verify") return cmd_verify(cfg, only);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  }
  return 0;
}
