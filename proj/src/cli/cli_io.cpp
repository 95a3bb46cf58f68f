#include "h2pt/cli_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "h2pt/dimer_hamiltonian.hpp"
#include "h2pt/errors.hpp"
#include "h2pt/meanfield_dynamics.hpp"
#include "h2pt/parallel.hpp"
#include "h2pt/slater_integrals.hpp"
#include "h2pt/variational_solver.hpp"
#include "h2pt/vibro_rotational.hpp"

#ifndef H2PT_VERSION
#define H2PT_VERSION "0.0.0"
#endif

using nlohmann::json;

namespace h2pt::cli {

std::string_view code_version() { return H2PT_VERSION; }

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Options {
  std::string format;
  std::string out_path;
  std::string config_path;
  bool no_cache = false;
  std::string cache_dir;
  bool verbose = false;

  double R = kNaN;
  double alpha = kNaN;
  double gamma = kNaN;
  bool no_oracle = false;
  std::string method = "closed";

  double sweep_from = 0.0, sweep_to = 1.0;
  int sweep_steps = 11;

  double curve_r_min = 0.5, curve_r_max = 5.0;
  int curve_steps = 91;

  std::string plane = "xz";
  int grid_n = 201;
  double half_width = 4.0;

  int levels = 5;
  bool reference_table = false;
  bool along_path = false;
  double fd_step = 1e-3;

  double dyn_t_max = 100.0;
  double interval = 0.0;
  bool hermitian = false;
  bool frozen_geometry = false;
  double rtol = 1e-10;
  double atol = 1e-12;

  double td_from = 0.1, td_to = 1.0;
  int td_steps = 10;
  double td_t_max = 1.0;

  SolverOptions solver;
};

// Input error that also deserves the usage text.
struct UsageError : InputError {
  using InputError::InputError;
};

void need(double value, const char* flag) {
  if (std::isnan(value)) throw UsageError(std::string(flag) + " is required");
}

struct Context {
  Options opt;
  std::string command;
  std::string format;
  ResultCache cache;
  std::ostream* out = nullptr;
};

// ---------------------------------------------------------------------------
// formatting

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

json complex_json(cplx z) { return {{"re", number(z.real())}, {"im", number(z.imag())}}; }

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(std::ostream& os, const Table& t) {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
}

void write_json(std::ostream& os, json doc) {
  doc["schema_version"] = kSchemaVersion;
  os << doc.dump(2) << '\n';
}

// Key/value layout for structured results in CSV.
Table key_value_table(const std::vector<std::tuple<std::string, std::string, std::string>>& rows) {
  Table t{{"quantity", "value", "unit"}, {}};
  for (const auto& [k, v, u] : rows) t.rows.push_back({k, v, u});
  return t;
}

void emit(Context& ctx, const json& doc, const Table& table) {
  if (ctx.format == "json") {
    write_json(*ctx.out, doc);
  } else {
    write_csv(*ctx.out, table);
  }
}

// ---------------------------------------------------------------------------
// serialisation of library types

json params_json(const HubbardParams& p) {
  return {{"eps", p.eps}, {"t", p.t}, {"U", p.U}, {"K", p.K}, {"J", p.J}, {"V", p.V}, {"S", p.S}};
}

json solver_json(const SolverOptions& s) {
  return {{"r_min", s.r_min},
          {"r_max", s.r_max},
          {"alpha_min", s.alpha_min},
          {"alpha_max", s.alpha_max},
          {"scan_step", s.scan_step},
          {"molecular_edge", s.molecular_edge},
          {"derivative_step", s.derivative_step}};
}

json equilibrium_json(const EquilibriumPoint& e) {
  return {{"gamma", e.gamma},
          {"R0", number(e.R0)},
          {"alpha0", number(e.alpha0)},
          {"E_total", number(e.E_total)},
          {"E_diss", number(e.E_diss)},
          {"stability", std::string(to_string(e.stability))}};
}

Stability stability_from(const std::string& s) {
  for (Stability v : {Stability::Stable, Stability::Metastable, Stability::Unbound}) {
    if (to_string(v) == s) return v;
  }
  throw std::runtime_error("unknown stability '" + s + "'");
}

EquilibriumPoint equilibrium_from(const json& j) {
  EquilibriumPoint e;
  e.gamma = j.at("gamma").get<double>();
  e.R0 = to_double(j.at("R0"));
  e.alpha0 = to_double(j.at("alpha0"));
  e.E_total = to_double(j.at("E_total"));
  e.E_diss = to_double(j.at("E_diss"));
  e.stability = stability_from(j.at("stability").get<std::string>());
  return e;
}

// ---------------------------------------------------------------------------
// cached computations

std::vector<EquilibriumPoint> cached_equilibria(Context& ctx, const std::vector<double>& gammas) {
  std::vector<EquilibriumPoint> out(gammas.size());
  std::vector<double> missing;
  std::vector<std::size_t> where;
  const json solver = solver_json(ctx.opt.solver);
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    const json inputs = {{"gamma", gammas[i]}, {"solver", solver}};
    bool ok = false;
    if (auto rec = ctx.cache.lookup("equilibrium", inputs)) {
      try {
        out[i] = equilibrium_from(rec->payload);
        ok = true;
      } catch (const std::exception& e) {
        spdlog::warn("ignoring cached equilibrium for gamma={}: {}", gammas[i], e.what());
      }
    }
    if (!ok) {
      missing.push_back(gammas[i]);
      where.push_back(i);
    }
  }
  if (!missing.empty()) {
    const auto computed = sweep(missing, ctx.opt.solver);
    for (std::size_t k = 0; k < computed.size(); ++k) {
      out[where[k]] = computed[k];
      ctx.cache.store("equilibrium", {{"gamma", missing[k]}, {"solver", solver}}, equilibrium_json(computed[k]));
    }
  }
  return out;
}

EquilibriumPoint cached_equilibrium(Context& ctx, double gamma) { return cached_equilibria(ctx, {gamma}).front(); }

EquilibriumPoint bound_equilibrium(Context& ctx, double gamma) {
  EquilibriumPoint eq = cached_equilibrium(ctx, gamma);
  if (!eq.bound()) throw InputError("no bound equilibrium at gamma = " + num(gamma));
  return eq;
}

std::vector<double> point_grid(double lo, double hi, int points, const char* what) {
  if (!(std::isfinite(lo) && std::isfinite(hi))) throw InputError(std::string(what) + ": range must be finite");
  if (points < 1) throw InputError(std::string(what) + ": need at least one point");
  if (points == 1) {
    if (lo != hi) throw InputError(std::string(what) + ": a single point needs from == to");
    return {lo};
  }
  if (!(hi > lo)) throw InputError(std::string(what) + ": range is empty (need from < to)");
  return linear_grid(lo, hi, points - 1);
}

// ---------------------------------------------------------------------------
// subcommands

void cmd_integrals(Context& ctx) {
  const OrbitalGeometry geom{ctx.opt.R, ctx.opt.alpha};
  geom.validate();
  const HubbardParams p = hubbard_params(geom);
  const double values[] = {p.S, p.eps, p.t, p.U, p.K, p.J, p.V};

  std::vector<std::optional<OracleValue>> oracle(kAllIntegrands.size());
  if (!ctx.opt.no_oracle) {
    auto res = parallel_map(kAllIntegrands.size(),
                            [&](std::size_t i) { return quadrature_oracle(kAllIntegrands[i], geom); });
    for (std::size_t i = 0; i < res.size(); ++i) oracle[i] = res[i];
  }

  json doc = {{"R", geom.R}, {"alpha", geom.alpha}, {"rho", geom.rho()}};
  json entries = json::object();
  Table table{{"name", "closed_form_Ry", "oracle_Ry", "oracle_error_Ry", "rel_difference"}, {}};
  for (std::size_t i = 0; i < kAllIntegrands.size(); ++i) {
    const std::string name(to_string(kAllIntegrands[i]));
    json e = {{"value", values[i]}};
    std::vector<std::string> row = {name, num(values[i]), "", "", ""};
    if (oracle[i]) {
      const double rel = std::abs(oracle[i]->value - values[i]) / std::abs(values[i]);
      e["oracle"] = oracle[i]->value;
      e["oracle_error"] = oracle[i]->error;
      e["rel_difference"] = number(rel);
      row[2] = num(oracle[i]->value);
      row[3] = num(oracle[i]->error);
      row[4] = num(rel);
    }
    entries[name] = e;
    table.rows.push_back(row);
  }
  doc["integrals"] = entries;
  doc["units"] = "Ry (S dimensionless)";
  emit(ctx, doc, table);
}

void cmd_spectrum(Context& ctx) {
  const OrbitalGeometry geom{ctx.opt.R, ctx.opt.alpha};
  geom.validate();
  const double gamma = GainLossCoupling::from(ctx.opt.gamma).gamma;
  const HubbardParams p = hubbard_params(geom);

  DimerSpectrum spec;
  json closed = nullptr;
  if (ctx.opt.method == "closed") {
    const ClosedFormResult r = spectrum_closed_form(p, gamma);
    spec = r.spectrum;
    closed = {{"branch", r.branch}, {"fell_back", r.fell_back}, {"mismatch", number(r.mismatch)}};
  } else {
    spec = spectrum_numeric(p, gamma);
  }

  json energies = json::array();
  Table table{{"label", "E_re_Ry", "E_im_Ry", "E_total_re_Ry", "E_total_im_Ry"}, {}};
  for (int k = 1; k <= 6; ++k) {
    const cplx e = spec.E(k);
    json item = complex_json(e);
    item["label"] = "E" + std::to_string(k);
    energies.push_back(item);
    table.rows.push_back({"E" + std::to_string(k), num(e.real()), num(e.imag()), num(2.0 / geom.R + e.real()),
                          num(e.imag())});
  }
  json doc = {{"R", geom.R},           {"alpha", geom.alpha},         {"gamma", gamma},
              {"method", ctx.opt.method}, {"energies", energies},      {"pt_broken", spec.pt_broken},
              {"a_minus_b", spec.a_minus_b}, {"params", params_json(p)}, {"units", "Ry"}};
  if (!closed.is_null()) doc["closed_form"] = closed;
  emit(ctx, doc, table);
}

json equilibrium_row(const EquilibriumPoint& e) {
  json j = equilibrium_json(e);
  if (e.bound()) {
    const HubbardParams p = hubbard_params({e.R0, e.alpha0});
    j["pt_broken"] = pt_phase(p, e.gamma);
  } else {
    j["pt_broken"] = nullptr;
  }
  return j;
}

const std::vector<std::string> kEquilibriumHeader = {"gamma_Ry", "R0_a0",  "alpha0_per_a0", "E_total_Ry",
                                                     "E_diss_Ry", "stability", "pt_broken"};

std::vector<std::string> equilibrium_cells(const json& j) {
  const json& pt = j.at("pt_broken");
  return {num(j.at("gamma").get<double>()),  num(to_double(j.at("R0"))),     num(to_double(j.at("alpha0"))),
          num(to_double(j.at("E_total"))),   num(to_double(j.at("E_diss"))), j.at("stability").get<std::string>(),
          pt.is_null() ? "" : (pt.get<bool>() ? "1" : "0")};
}

void cmd_equilibrium(Context& ctx) {
  const EquilibriumPoint e = cached_equilibrium(ctx, ctx.opt.gamma);
  json doc = equilibrium_row(e);
  doc["units"] = {{"R0", "a0"}, {"alpha0", "1/a0"}, {"E_total", "Ry"}, {"E_diss", "Ry"}};
  Table table{kEquilibriumHeader, {equilibrium_cells(doc)}};
  emit(ctx, doc, table);
}

void cmd_sweep(Context& ctx) {
  const auto gammas = point_grid(ctx.opt.sweep_from, ctx.opt.sweep_to, ctx.opt.sweep_steps, "sweep");
  const auto points = cached_equilibria(ctx, gammas);
  auto rows = parallel_map(points.size(), [&](std::size_t i) { return equilibrium_row(points[i]); });
  Table table{kEquilibriumHeader, {}};
  json arr = json::array();
  for (const auto& r : rows) {
    table.rows.push_back(equilibrium_cells(r));
    arr.push_back(r);
  }
  emit(ctx, {{"points", arr}, {"solver", solver_json(ctx.opt.solver)}}, table);
}

void cmd_curve(Context& ctx) {
  const auto grid = point_grid(ctx.opt.curve_r_min, ctx.opt.curve_r_max, ctx.opt.curve_steps, "curve");
  const EnergyCurve curve = energy_curve(ctx.opt.gamma, grid, ctx.opt.solver);
  Table table{{"R_a0", "alpha_per_a0"}, {}};
  for (int k = 1; k <= 6; ++k) {
    table.header.push_back("E" + std::to_string(k) + "_re_Ry");
    table.header.push_back("E" + std::to_string(k) + "_im_Ry");
  }
  for (const char* n : {"eps_Ry", "t_Ry", "U_Ry", "K_Ry", "J_Ry", "V_Ry", "S"}) table.header.push_back(n);
  json arr = json::array();
  for (const auto& s : curve.samples) {
    std::vector<std::string> row = {num(s.R), num(s.alpha)};
    json energies = json::array();
    for (const auto& e : s.E_total) {
      row.push_back(num(e.real()));
      row.push_back(num(e.imag()));
      energies.push_back(complex_json(e));
    }
    for (double v : {s.params.eps, s.params.t, s.params.U, s.params.K, s.params.J, s.params.V, s.params.S})
      row.push_back(num(v));
    table.rows.push_back(std::move(row));
    arr.push_back({{"R", s.R}, {"alpha", s.alpha}, {"E_total", energies}, {"params", params_json(s.params)}});
  }
  emit(ctx, {{"gamma", curve.gamma}, {"samples", arr}, {"units", "E_total = 2/R + E_j in Ry"}}, table);
}

DensityPlane plane_from(const std::string& s) {
  if (s == "xy") return DensityPlane::xy;
  if (s == "xz") return DensityPlane::xz;
  if (s == "yz") return DensityPlane::yz;
  if (s == "volume") return DensityPlane::volume;
  throw InputError("unknown plane '" + s + "'");
}

void cmd_density(Context& ctx) {
  const EquilibriumPoint eq = bound_equilibrium(ctx, ctx.opt.gamma);
  GridSpec spec{plane_from(ctx.opt.plane), ctx.opt.grid_n, ctx.opt.half_width};
  const DensityGrid grid = density_grid({eq.R0, eq.alpha0}, spec);
  const std::size_t n = grid.axis.size();

  if (ctx.format == "json") {
    json doc = {{"gamma", eq.gamma}, {"R0", eq.R0},       {"alpha0", eq.alpha0},   {"plane", ctx.opt.plane},
                {"n", spec.n},       {"half_width", spec.half_width}, {"axis", grid.axis},
                {"values", grid.values}, {"peak", grid.peak()}, {"units", "density in 1/a0^3, lengths in a0"}};
    if (spec.plane == DensityPlane::volume) doc["integral"] = grid.integral();
    write_json(*ctx.out, doc);
    return;
  }
  // gnuplot splot layout: blocks separated by blank lines.
  std::ostream& os = *ctx.out;
  const std::string axes = spec.plane == DensityPlane::volume ? "x_a0,y_a0,z_a0"
                                                              : std::string(1, ctx.opt.plane[0]) + "_a0," +
                                                                    std::string(1, ctx.opt.plane[1]) + "_a0";
  os << axes << ",rho_per_a0cubed\n";
  if (spec.plane == DensityPlane::volume) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k)
          os << num(grid.axis[i]) << ',' << num(grid.axis[j]) << ',' << num(grid.axis[k]) << ','
             << num(grid.values[(i * n + j) * n + k]) << '\n';
        os << '\n';
      }
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      os << num(grid.axis[i]) << ',' << num(grid.axis[j]) << ',' << num(grid.values[i * n + j]) << '\n';
    if (i + 1 < n) os << '\n';
  }
}

// Reference row at the same coupling, if the published table has one.
const ReferenceHarmonicRow* reference_row(double gamma) {
  for (const auto& r : reference_harmonic_rows())
    if (std::abs(r.gamma - gamma) < 1e-9) return &r;
  return nullptr;
}

json reference_table_json() {
  json arr = json::array();
  for (const auto& r : reference_harmonic_rows()) {
    const double mismatch = omega_consistency(r.k_H, r.omega_H);
    arr.push_back({{"gamma", r.gamma},
                   {"k_H", r.k_H},
                   {"omega_H", r.omega_H},
                   {"bold", r.bold},
                   {"omega_mismatch", mismatch},
                   {"consistent", mismatch < 1e-3}});
  }
  return arr;
}

json phonon_json(const EquilibriumPoint& eq, const PhononFit& fit, int levels) {
  json doc = {{"gamma", eq.gamma},
              {"R0", eq.R0},
              {"alpha0", eq.alpha0},
              {"reduced_mass", fit.reduced_mass},
              {"k_H", fit.harmonic.k_H},
              {"omega_H", fit.harmonic.omega_H},
              {"omega_H_check", omega_consistency(fit.harmonic.k_H, fit.harmonic.omega_H)}};
  if (fit.has_morse) {
    doc["morse"] = {{"E_D", fit.morse.E_D},           {"alpha_Mo", fit.morse.alpha_Mo},
                    {"k_Mo", fit.morse.k_Mo},         {"omega_Mo", fit.morse.omega_Mo},
                    {"rms_residual", fit.morse.rms_residual}, {"points", fit.morse.points}};
  } else {
    doc["morse"] = nullptr;
  }
  json lv = json::array();
  for (const auto& l : vibrational_levels(fit, levels))
    lv.push_back({{"n", l.n}, {"E_H", l.E_H}, {"E_Mo", number(l.E_Mo)}});
  doc["vibrational_levels"] = lv;
  const double B0 = rotational_constant(eq);
  doc["B0"] = B0;
  doc["rotational_levels"] = rotational_levels(B0, levels);
  if (const auto* ref = reference_row(eq.gamma)) {
    doc["reference"] = {{"k_H", ref->k_H},
                        {"omega_H", ref->omega_H},
                        {"bold", ref->bold},
                        {"k_H_rel_difference", std::abs(fit.harmonic.k_H - ref->k_H) / ref->k_H},
                        {"omega_mismatch", omega_consistency(ref->k_H, ref->omega_H)}};
  }
  return doc;
}

void cmd_phonons(Context& ctx) {
  const EquilibriumPoint eq = bound_equilibrium(ctx, ctx.opt.gamma);
  const PhononFit fit = phonon_fit(eq, ctx.opt.solver);
  json doc = phonon_json(eq, fit, ctx.opt.levels);
  doc["reference_table"] = reference_table_json();
  doc["units"] = {{"k", "Ry/a0^2"}, {"omega", "Ry"}, {"alpha_Mo", "1/a0"}, {"energies", "Ry"}};

  Table table;
  if (ctx.opt.reference_table) {
    table.header = {"gamma_Ry", "k_H_Ry_per_a0sq", "omega_H_Ry", "bold", "omega_mismatch_rel", "consistent"};
    for (const auto& r : doc["reference_table"])
      table.rows.push_back({num(r["gamma"].get<double>()), num(r["k_H"].get<double>()),
                            num(r["omega_H"].get<double>()), r["bold"].get<bool>() ? "1" : "0",
                            num(r["omega_mismatch"].get<double>()), r["consistent"].get<bool>() ? "1" : "0"});
  } else {
    table.header = {"gamma_Ry",     "k_H_Ry_per_a0sq", "omega_H_Ry",  "omega_H_check_rel", "E_D_Ry",
                    "alpha_Mo_per_a0", "k_Mo_Ry_per_a0sq", "omega_Mo_Ry", "B0_Ry",            "reference_k_H_rel_diff"};
    const json& m = doc["morse"];
    auto morse = [&](const char* k) { return m.is_null() ? std::string("nan") : num(m[k].get<double>()); };
    table.rows.push_back({num(eq.gamma), num(fit.harmonic.k_H), num(fit.harmonic.omega_H),
                          num(doc["omega_H_check"].get<double>()), morse("E_D"), morse("alpha_Mo"), morse("k_Mo"),
                          morse("omega_Mo"), num(doc["B0"].get<double>()),
                          doc.contains("reference") ? num(doc["reference"]["k_H_rel_difference"].get<double>()) : ""});
  }
  emit(ctx, doc, table);
}

json couplings_json(const CouplingSet& c) {
  return {{"g_eps", c.g_eps}, {"g_t", c.g_t}, {"g_U", c.g_U}, {"g_K", c.g_K}, {"g_J", c.g_J}, {"g_V", c.g_V}};
}

void cmd_couplings(Context& ctx) {
  if (!(ctx.opt.fd_step > 0.0)) throw InputError("--step must be positive");
  const EquilibriumPoint eq = bound_equilibrium(ctx, ctx.opt.gamma);
  const CouplingMode mode = ctx.opt.along_path ? CouplingMode::AlongPath : CouplingMode::FrozenAlpha;
  const CouplingSet c = eph_couplings(eq, mode, ctx.opt.fd_step, ctx.opt.solver);
  const CouplingSet half = eph_couplings(eq, mode, 0.5 * ctx.opt.fd_step, ctx.opt.solver);
  const double a[] = {c.g_eps, c.g_t, c.g_U, c.g_K, c.g_J, c.g_V};
  const double b[] = {half.g_eps, half.g_t, half.g_U, half.g_K, half.g_J, half.g_V};
  double diff = 0.0;
  for (int i = 0; i < 6; ++i) diff = std::max(diff, std::abs(a[i] - b[i]));

  json doc = {{"gamma", eq.gamma},
              {"R0", eq.R0},
              {"alpha0", eq.alpha0},
              {"mode", ctx.opt.along_path ? "along_path" : "frozen_alpha"},
              {"h", ctx.opt.fd_step},
              {"couplings", couplings_json(c)},
              {"step_halving_max_difference", diff},
              {"units", "Ry/a0"}};
  Table table{{"gamma_Ry", "g_eps_Ry_per_a0", "g_t_Ry_per_a0", "g_U_Ry_per_a0", "g_K_Ry_per_a0", "g_J_Ry_per_a0",
               "g_V_Ry_per_a0", "step_halving_max_difference"},
              {{num(eq.gamma), num(c.g_eps), num(c.g_t), num(c.g_U), num(c.g_K), num(c.g_J), num(c.g_V), num(diff)}}};
  emit(ctx, doc, table);
}

IntegrateOptions integrate_options(const Context& ctx, double t_max) {
  const Options& o = ctx.opt;
  if (!(t_max > 0.0)) throw InputError("--t-max must be positive");
  if (!(o.rtol > 0.0 && o.atol > 0.0)) throw InputError("tolerances must be positive");
  if (!(o.interval >= 0.0)) throw InputError("--interval must be >= 0");
  IntegrateOptions io;
  io.t_max = t_max;
  io.output_interval = o.interval;
  io.rtol = o.rtol;
  io.atol = o.atol;
  io.hermitian = o.hermitian;
  return io;
}

void cmd_dynamics(Context& ctx) {
  const IntegrateOptions io = integrate_options(ctx, ctx.opt.dyn_t_max);
  const DynamicsSetup setup = initial_state(ctx.opt.gamma, ctx.opt.frozen_geometry, ctx.opt.solver);
  const Trajectory traj = integrate(setup, io);

  json footer = {{"schema_version", kSchemaVersion},
                 {"gamma", setup.gamma},
                 {"hermitian", io.hermitian},
                 {"R", setup.geom.R},
                 {"alpha", setup.geom.alpha},
                 {"T_D", traj.T_D ? json(*traj.T_D) : json(nullptr)},
                 {"steps", traj.steps},
                 {"t_max", io.t_max}};
  std::ostream& os = *ctx.out;
  if (ctx.format == "json") {
    json states = json::array();
    for (const auto& s : traj.states) {
      json row = json::object();
      for (int k = 0; k < mf::kSize; ++k) row[mf::slot_name(k)] = complex_json(s[k]);
      row["energy"] = complex_json(energy_functional(s, setup.params, io.hermitian ? 0.0 : setup.gamma));
      states.push_back(row);
    }
    footer["params"] = params_json(setup.params);
    footer["times"] = traj.times;
    footer["states"] = states;
    write_json(os, footer);
    return;
  }
  os << "T";
  for (int k = 0; k < mf::kSize; ++k) os << ",re_" << mf::slot_name(k) << ",im_" << mf::slot_name(k);
  os << ",re_energy,im_energy\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    os << num(traj.times[i]);
    for (const auto& z : traj.states[i]) os << ',' << num(z.real()) << ',' << num(z.imag());
    const cplx e = energy_functional(traj.states[i], setup.params, io.hermitian ? 0.0 : setup.gamma);
    os << ',' << num(e.real()) << ',' << num(e.imag()) << '\n';
  }
  os << "# " << footer.dump() << '\n';
}

struct TdResult {
  std::vector<TdPoint> points;
  std::optional<TdFit> fit;
  std::string fit_error;
};

TdResult cached_td_sweep(Context& ctx, const std::vector<double>& gammas, const IntegrateOptions& io) {
  auto inputs_for = [&](double g) {
    return json{{"gamma", g},
                {"t_max", io.t_max},
                {"rtol", io.rtol},
                {"atol", io.atol},
                {"event_resolution", io.event_resolution},
                {"imag_threshold", io.imag_threshold},
                {"occupation_low", io.occupation_low},
                {"occupation_high", io.occupation_high},
                {"hermitian", io.hermitian},
                {"frozen_geometry", ctx.opt.frozen_geometry},
                {"solver", solver_json(ctx.opt.solver)}};
  };
  TdResult res;
  res.points.resize(gammas.size());
  std::vector<double> missing;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    bool ok = false;
    if (auto rec = ctx.cache.lookup("td_point", inputs_for(gammas[i]))) {
      try {
        const json& T = rec->payload.at("T_D");
        res.points[i] = {gammas[i], T.is_null() ? std::nullopt : std::optional<double>(T.get<double>()), ""};
        ok = true;
      } catch (const std::exception& e) {
        spdlog::warn("ignoring cached T_D for gamma={}: {}", gammas[i], e.what());
      }
    }
    if (!ok) {
      missing.push_back(gammas[i]);
      where.push_back(i);
    }
  }
  if (!missing.empty()) {
    const auto computed = td_sweep(missing, io, ctx.opt.frozen_geometry, ctx.opt.solver);
    for (std::size_t k = 0; k < computed.size(); ++k) {
      res.points[where[k]] = computed[k];
      if (!computed[k].error.empty()) continue;  // failures are not cached
      ctx.cache.store("td_point", inputs_for(missing[k]),
                      {{"T_D", computed[k].T_D ? json(*computed[k].T_D) : json(nullptr)}});
    }
  }
  try {
    res.fit = fit_td(res.points);
  } catch (const Error& e) {
    res.fit_error = e.what();
  }
  return res;
}

void cmd_td_sweep(Context& ctx) {
  const auto gammas = point_grid(ctx.opt.td_from, ctx.opt.td_to, ctx.opt.td_steps, "td-sweep");
  const IntegrateOptions io = integrate_options(ctx, ctx.opt.td_t_max);
  const TdResult res = cached_td_sweep(ctx, gammas, io);

  json fit = nullptr;
  if (res.fit) {
    fit = {{"a", res.fit->a},
           {"b", res.fit->b},
           {"c", res.fit->c},
           {"rms_log_residual", res.fit->rms_log_residual},
           {"points", res.fit->points},
           {"model", "log T_D = log a - b log gamma + c gamma"}};
  }
  json pts = json::array();
  for (const auto& p : res.points) {
    json j = {{"gamma", p.gamma}, {"T_D", p.T_D ? json(*p.T_D) : json(nullptr)}};
    if (!p.error.empty()) j["error"] = p.error;
    pts.push_back(j);
  }
  json doc = {{"points", pts}, {"fit", fit}, {"t_max", io.t_max}, {"frozen_geometry", ctx.opt.frozen_geometry}};
  if (!res.fit_error.empty()) doc["fit_error"] = res.fit_error;

  if (ctx.format == "json") {
    write_json(*ctx.out, doc);
  } else {
    Table table{{"gamma_Ry", "T_D_hbar_per_Ry", "error"}, {}};
    for (const auto& p : res.points) table.rows.push_back({num(p.gamma), p.T_D ? num(*p.T_D) : "nan", p.error});
    write_csv(*ctx.out, table);
    json footer = {{"schema_version", kSchemaVersion}, {"fit", fit}};
    if (!res.fit_error.empty()) footer["fit_error"] = res.fit_error;
    *ctx.out << "# " << footer.dump() << '\n';
  }
  if (!res.fit) throw NumericalError("T_D fit failed: " + res.fit_error);
}

void cmd_thresholds(Context& ctx) {
  const json inputs = {{"solver", solver_json(ctx.opt.solver)}};
  json values;
  if (auto rec = ctx.cache.lookup("thresholds", inputs)) {
    values = rec->payload;
  } else {
    auto r = parallel_map(3, [&](std::size_t i) {
      switch (i) {
        case 0: return find_gamma_pt(ctx.opt.solver);
        case 1: return find_gamma_ms(ctx.opt.solver);
        default: return find_gamma_d(ctx.opt.solver);
      }
    });
    values = {{"gamma_pt", r[0]}, {"gamma_ms", r[1]}, {"gamma_d", r[2]}};
    ctx.cache.store("thresholds", inputs, values);
  }
  const double g[] = {values.at("gamma_pt").get<double>(), values.at("gamma_ms").get<double>(),
                      values.at("gamma_d").get<double>()};
  const auto eqs = cached_equilibria(ctx, {g[0], g[1], g[2]});
  json rows = json::array();
  Table table{{"threshold", "gamma_Ry", "R0_a0", "alpha0_per_a0", "E_total_Ry", "E_diss_Ry"}, {}};
  const char* names[] = {"gamma_pt", "gamma_ms", "gamma_d"};
  for (int i = 0; i < 3; ++i) {
    json r = equilibrium_json(eqs[i]);
    r["threshold"] = names[i];
    rows.push_back(r);
    table.rows.push_back({names[i], num(g[i]), num(eqs[i].R0), num(eqs[i].alpha0), num(eqs[i].E_total),
                          num(eqs[i].E_diss)});
  }
  json doc = {{"gamma_pt", g[0]}, {"gamma_ms", g[1]}, {"gamma_d", g[2]}, {"equilibria", rows}, {"units", "Ry"}};
  emit(ctx, doc, table);
}

void cmd_report(Context& ctx) {
  const EquilibriumPoint eq = bound_equilibrium(ctx, ctx.opt.gamma);
  const HubbardParams p = hubbard_params({eq.R0, eq.alpha0});
  const DimerSpectrum spec = spectrum_closed_form(p, eq.gamma).spectrum;
  const PhononFit fit = phonon_fit(eq, ctx.opt.solver);
  const CouplingSet c = eph_couplings(eq, CouplingMode::FrozenAlpha, 1e-3, ctx.opt.solver);

  json energies = json::array();
  for (int k = 1; k <= 6; ++k) energies.push_back(complex_json(spec.E(k)));
  json doc = {{"gamma", eq.gamma},
              {"equilibrium", equilibrium_row(eq)},
              {"hubbard", params_json(p)},
              {"spectrum", {{"energies", energies}, {"pt_broken", spec.pt_broken}, {"a_minus_b", spec.a_minus_b}}},
              {"phonons", phonon_json(eq, fit, 0)},
              {"couplings", couplings_json(c)}};

  std::vector<std::tuple<std::string, std::string, std::string>> kv = {
      {"gamma", num(eq.gamma), "Ry"},        {"R0", num(eq.R0), "a0"},
      {"alpha0", num(eq.alpha0), "1/a0"},    {"E_total", num(eq.E_total), "Ry"},
      {"E_diss", num(eq.E_diss), "Ry"},      {"stability", std::string(to_string(eq.stability)), ""},
      {"eps", num(p.eps), "Ry"},             {"t", num(p.t), "Ry"},
      {"U", num(p.U), "Ry"},                 {"K", num(p.K), "Ry"},
      {"J", num(p.J), "Ry"},                 {"V", num(p.V), "Ry"},
      {"S", num(p.S), ""},                   {"k_H", num(fit.harmonic.k_H), "Ry/a0^2"},
      {"omega_H", num(fit.harmonic.omega_H), "Ry"}};
  if (fit.has_morse) {
    kv.insert(kv.end(), {{"E_D", num(fit.morse.E_D), "Ry"},
                         {"alpha_Mo", num(fit.morse.alpha_Mo), "1/a0"},
                         {"k_Mo", num(fit.morse.k_Mo), "Ry/a0^2"},
                         {"omega_Mo", num(fit.morse.omega_Mo), "Ry"}});
  }
  kv.insert(kv.end(), {{"g_eps", num(c.g_eps), "Ry/a0"},
                       {"g_t", num(c.g_t), "Ry/a0"},
                       {"g_U", num(c.g_U), "Ry/a0"},
                       {"g_K", num(c.g_K), "Ry/a0"},
                       {"g_J", num(c.g_J), "Ry/a0"},
                       {"g_V", num(c.g_V), "Ry/a0"}});
  emit(ctx, doc, key_value_table(kv));
}

// ---------------------------------------------------------------------------
// configuration file: keys mirror long flag names; flags given on the
// command line win.

void apply_config(CLI::App& app, CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config file " + path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw InputError("config file must hold a JSON object");
  if (cfg.contains("schema_version") && cfg["schema_version"] != kSchemaVersion) {
    throw InputError("config schema_version must be " + std::to_string(kSchemaVersion));
  }
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    if (it.key() == "schema_version") continue;
    std::string name = it.key();
    std::replace(name.begin(), name.end(), '_', '-');
    if (name == "config") throw InputError("config files cannot nest");
    CLI::Option* opt = sub.get_option_no_throw("--" + name);
    if (!opt) opt = app.get_option_no_throw("--" + name);
    if (!opt) throw InputError("unknown config key '" + it.key() + "' for " + sub.get_name());
    if (opt->count() > 0) continue;

    std::vector<std::string> values;
    auto text = [](const json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
      if (v.is_number()) return v.dump();
      throw InputError("config values must be strings, numbers or booleans");
    };
    if (it->is_array()) {
      for (const auto& v : *it) values.push_back(text(v));
    } else {
      values.push_back(text(*it));
    }
    opt->add_result(values);
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw InputError("config key '" + it.key() + "': " + e.what());
    }
  }
}

// Routes library logging to `err` for the duration of one run.
class LogScope {
 public:
  explicit LogScope(std::ostream& err) {
    spdlog::sink_ptr sink;
    if (&err == &std::cerr) {
      sink = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
    } else {
      sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    }
    sink->set_pattern("[%l] %v");
    logger_ = std::make_shared<spdlog::logger>("h2pt", sink);
    logger_->set_level(spdlog::level::warn);
    previous_ = spdlog::default_logger();
    spdlog::set_default_logger(logger_);
  }
  ~LogScope() { spdlog::set_default_logger(previous_); }
  LogScope(const LogScope&) = delete;
  LogScope& operator=(const LogScope&) = delete;
  void verbose(bool on) { logger_->set_level(on ? spdlog::level::info : spdlog::level::warn); }

 private:
  std::shared_ptr<spdlog::logger> logger_;
  std::shared_ptr<spdlog::logger> previous_;
};

const std::map<std::string, std::string> kDefaultFormat = {
    {"integrals", "json"}, {"spectrum", "json"}, {"equilibrium", "json"}, {"sweep", "csv"},
    {"curve", "csv"},      {"density", "csv"},   {"phonons", "json"},     {"couplings", "json"},
    {"dynamics", "csv"},   {"td-sweep", "csv"},  {"thresholds", "json"},  {"report", "json"}};

void add_solver_options(CLI::App* sub, SolverOptions& s) {
  sub->add_option("--scan-step", s.scan_step, "coarse R scan step for bond minima [a0]")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--molecular-edge", s.molecular_edge, "largest R searched for a bond minimum [a0]")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--derivative-step", s.derivative_step, "finite-difference step for slope tests [a0]")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, RunStats* stats) {
  Context ctx;
  Options& o = ctx.opt;
  LogScope log(err);

  CLI::App app{"Hydrogen molecule with balanced gain and loss: integrals, spectra, equilibria, phonons, dynamics",
               args.empty() ? "h2pt" : args.front()};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.add_option("--format", o.format, "output format (default depends on the command)")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--out,-o", o.out_path, "write results to this file instead of stdout");
  app.add_option("--config", o.config_path, "JSON file whose keys mirror the long flags");
  app.add_flag("--no-cache", o.no_cache, "neither read nor write the result cache");
  app.add_option("--cache-dir", o.cache_dir, std::string("cache directory (default $") + kCacheEnv + ")");
  app.add_flag("--verbose,-v", o.verbose, "log progress to stderr");

  // Required values are checked after the config file is merged, so they
  // are not marked required for the parser.
  auto geometry = [&](CLI::App* sub) {
    sub->add_option("--R", o.R, "inter-proton distance [a0] (required)")->check(CLI::PositiveNumber);
    sub->add_option("--alpha", o.alpha, "inverse orbital size [1/a0] (required)")->check(CLI::PositiveNumber);
  };
  auto gamma_opt = [&](CLI::App* sub, bool required) {
    sub->add_option("--gamma", o.gamma, required ? "gain/loss coupling [Ry] (required)" : "gain/loss coupling [Ry]")
        ->check(CLI::NonNegativeNumber);
  };

  auto* integrals = app.add_subcommand("integrals", "Hubbard parameters with quadrature cross-check");
  geometry(integrals);
  integrals->add_flag("--no-oracle", o.no_oracle, "skip the quadrature cross-check");

  auto* spectrum = app.add_subcommand("spectrum", "six eigenvalues of the two-electron Hamiltonian");
  geometry(spectrum);
  gamma_opt(spectrum, true);
  spectrum->add_option("--method", o.method, "closed (Cardano forms) or numeric")
      ->check(CLI::IsMember({"closed", "numeric"}))
      ->capture_default_str();

  auto* equilibrium = app.add_subcommand("equilibrium", "variational equilibrium R0, alpha0, energy");
  gamma_opt(equilibrium, true);
  add_solver_options(equilibrium, o.solver);

  auto* sweep_cmd = app.add_subcommand("sweep", "equilibria on a uniform gamma grid (cached)");
  sweep_cmd->add_option("--gamma-from", o.sweep_from, "first gamma [Ry]")->capture_default_str();
  sweep_cmd->add_option("--gamma-to", o.sweep_to, "last gamma [Ry]")->capture_default_str();
  sweep_cmd->add_option("--steps", o.sweep_steps, "number of grid points")->capture_default_str();
  add_solver_options(sweep_cmd, o.solver);

  auto* curve = app.add_subcommand("curve", "alpha-optimised energy branches and integrals against R");
  gamma_opt(curve, true);
  curve->add_option("--r-min", o.curve_r_min, "first R [a0]")->check(CLI::PositiveNumber)->capture_default_str();
  curve->add_option("--r-max", o.curve_r_max, "last R [a0]")->check(CLI::PositiveNumber)->capture_default_str();
  curve->add_option("--steps", o.curve_steps, "number of grid points")->capture_default_str();

  auto* density = app.add_subcommand("density", "electron density at the equilibrium geometry");
  gamma_opt(density, true);
  density->add_option("--plane", o.plane, "xy, xz, yz or volume")
      ->check(CLI::IsMember({"xy", "xz", "yz", "volume"}))
      ->capture_default_str();
  density->add_option("--n", o.grid_n, "points per axis")->check(CLI::Range(2, 100000))->capture_default_str();
  density->add_option("--half-width", o.half_width, "grid half width [a0]")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_solver_options(density, o.solver);

  auto* phonons = app.add_subcommand("phonons", "harmonic and Morse fits, vibrational and rotational levels");
  gamma_opt(phonons, true);
  phonons->add_option("--levels", o.levels, "highest vibrational/rotational quantum number")
      ->check(CLI::Range(0, 1000))
      ->capture_default_str();
  phonons->add_flag("--reference-table", o.reference_table,
                    "CSV output lists the published k_H/omega_H rows with a consistency column");
  add_solver_options(phonons, o.solver);

  auto* couplings = app.add_subcommand("couplings", "electron-phonon couplings dx/dR at equilibrium");
  gamma_opt(couplings, true);
  couplings->add_flag("--along-path", o.along_path, "total derivative along alpha_opt(R) instead of frozen alpha");
  couplings->add_option("--step", o.fd_step, "finite-difference step [a0]")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_solver_options(couplings, o.solver);

  auto add_integration = [&](CLI::App* sub) {
    sub->add_flag("--frozen-geometry", o.frozen_geometry, "use the gamma = 0 equilibrium integrals");
    sub->add_option("--rtol", o.rtol, "relative tolerance")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--atol", o.atol, "absolute tolerance")->check(CLI::PositiveNumber)->capture_default_str();
    add_solver_options(sub, o.solver);
  };

  auto* dynamics = app.add_subcommand("dynamics", "mean-field trajectory of the sixteen expectations");
  gamma_opt(dynamics, true);
  dynamics->add_option("--t-max", o.dyn_t_max, "final time [hbar/Ry]")->check(CLI::PositiveNumber)->capture_default_str();
  dynamics->add_option("--interval", o.interval, "output spacing, 0 = every step")->capture_default_str();
  dynamics->add_flag("--hermitian", o.hermitian, "drop the gain/loss terms");
  add_integration(dynamics);

  auto* td = app.add_subcommand("td-sweep", "dissociation time T_D on a gamma grid and its fit");
  td->add_option("--gamma-from", o.td_from, "first gamma [Ry]")->check(CLI::PositiveNumber)->capture_default_str();
  td->add_option("--gamma-to", o.td_to, "last gamma [Ry]")->check(CLI::PositiveNumber)->capture_default_str();
  td->add_option("--steps", o.td_steps, "number of grid points")->capture_default_str();
  td->add_option("--t-max", o.td_t_max, "integration horizon [hbar/Ry]")->check(CLI::PositiveNumber)->capture_default_str();
  add_integration(td);

  auto* thresholds = app.add_subcommand("thresholds", "gamma_PT, gamma_MS and gamma_D");
  add_solver_options(thresholds, o.solver);

  auto* report = app.add_subcommand("report", "equilibrium, integrals, spectrum, phonons and couplings at one gamma");
  gamma_opt(report, true);
  add_solver_options(report, o.solver);

  std::vector<const char*> argv;
  std::vector<std::string> storage = args.empty() ? std::vector<std::string>{"h2pt"} : args;
  for (const auto& a : storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    auto subs = app.get_subcommands();
    err << "error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.front()->help());
    return kExitInput;
  }

  CLI::App* sub = app.get_subcommands().front();
  ctx.command = sub->get_name();
  try {
    if (!o.config_path.empty()) apply_config(app, *sub, o.config_path);
    log.verbose(o.verbose);
    static const std::set<std::string> needs_geometry = {"integrals", "spectrum"};
    static const std::set<std::string> needs_gamma = {"spectrum", "equilibrium", "curve",     "density",
                                                      "phonons",  "couplings",   "dynamics", "report"};
    if (needs_geometry.count(ctx.command)) {
      need(o.R, "--R");
      need(o.alpha, "--alpha");
    }
    if (needs_gamma.count(ctx.command)) need(o.gamma, "--gamma");
    ctx.format = o.format.empty() ? kDefaultFormat.at(ctx.command) : o.format;
    if (!o.no_cache) ctx.cache = ResultCache(o.cache_dir.empty() ? default_cache_dir() : std::filesystem::path(o.cache_dir));

    std::ofstream file;
    std::ostringstream buffer;
    ctx.out = &buffer;
    auto flush = [&] {
      if (o.out_path.empty()) {
        out << buffer.str();
        out.flush();
        return;
      }
      file.open(o.out_path, std::ios::binary);
      if (!file) throw InputError("cannot open output file " + o.out_path);
      file << buffer.str();
      if (!file) throw InputError("failed writing " + o.out_path);
    };
    auto finish = [&] {
      if (stats) *stats = {ctx.cache.hits(), ctx.cache.misses()};
      spdlog::info("cache: {} hits, {} misses", ctx.cache.hits(), ctx.cache.misses());
    };

    static const std::map<std::string, void (*)(Context&)> commands = {
        {"integrals", cmd_integrals},   {"spectrum", cmd_spectrum},   {"equilibrium", cmd_equilibrium},
        {"sweep", cmd_sweep},           {"curve", cmd_curve},         {"density", cmd_density},
        {"phonons", cmd_phonons},       {"couplings", cmd_couplings}, {"dynamics", cmd_dynamics},
        {"td-sweep", cmd_td_sweep},     {"thresholds", cmd_thresholds}, {"report", cmd_report}};
    try {
      commands.at(ctx.command)(ctx);
    } catch (const NumericalError&) {
      // Whatever was produced before the failure is still worth keeping.
      flush();
      finish();
      throw;
    }
    flush();
    finish();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << sub->help();
    return kExitInput;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what();
    if (e.best_value() != 0.0 || e.error_estimate() != 0.0)
      err << " (best value " << num(e.best_value()) << ", error estimate " << num(e.error_estimate()) << ")";
    err << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace h2pt::cli
