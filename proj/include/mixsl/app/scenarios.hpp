#pragma once

// Scenario pipelines: steady (Newton), gc-persist / gc-perturb (guiding
// center on the D-shape) and dk-itg (drift-kinetic ITG on a disk).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <functional>
#include <limits>
#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixsl/app/config.hpp"
#include "mixsl/diagnostics.hpp"
#include "mixsl/elliptic.hpp"
#include "mixsl/geometry.hpp"
#include "mixsl/grid.hpp"
#include "mixsl/models.hpp"
#include "mixsl/parallel.hpp"
#include "mixsl/snapshot.hpp"
#include "mixsl/transport.hpp"

namespace mixsl::app {

inline constexpr const char* kOutputRootEnv = "MIXSL_OUTPUT_ROOT";

/// Sub-steps needed so that each FD sub-step satisfies `limit`.
inline int substeps(double dt, double limit) {
  if (!(limit < std::numeric_limits<double>::infinity())) return 1;
  return std::max(1, static_cast<int>(std::ceil(dt / limit * (1.0 - 1e-12))));
}

// ------------------------------------------------------------ guiding center

class GcSimulation {
 public:
  GcSimulation(const Grid& grid, FluxForm form, const NewtonOptions& newton = {},
               const Field* phi0 = nullptr) {
    if (phi0) {
      if (!(phi0->grid() == grid)) throw ConfigError("steady potential grid does not match the mesh");
      steady_.domain =
          std::make_shared<const EmbeddedDomain>(make_domain(DShape{}, grid, kTransportBand));
      steady_.phi0 = *phi0;
      steady_.domain->extend(steady_.phi0.data());
      steady_.rho_bar0 = density_from_potential(*steady_.domain, steady_.phi0);
    } else {
      steady_ = dshape_steady_state(grid, newton);
    }
    const Field a(grid, 1.0);
    poisson_ = assemble(steady_.domain, a);
    solver_ = std::make_shared<LinearSolver>(poisson_.matrix);
    plane_ = Advection2D::embedded(*steady_.domain, form);
    support_ = steady_.domain->extended_mask();
  }

  const SteadyState& steady() const { return steady_; }
  const EmbeddedDomain& domain() const { return *steady_.domain; }
  const Advection2D& plane() const { return plane_; }
  std::span<const std::uint8_t> interior() const { return steady_.domain->interior_mask(); }

  /// phi from -lap phi = rho_bar - 1, extended to ghosts and band.
  Field potential(const Field& rho) const {
    Eigen::VectorXd r = interior_vector(poisson_, rho.data());
    r.array() -= 1.0;
    return to_field(poisson_, solver_->solve(r));
  }

  PlaneVelocity velocity(const Field& phi) const { return gradient(phi, support_); }

  /// Advances rho by dt with velocities frozen at U(phi); FD sub-cycles
  /// to respect the CFL bound.
  void step(Field& rho, const Field& phi, double dt, Method method, double cfl) const {
    const PlaneVelocity u = velocity(phi);
    if (method == Method::kSemiLagrangian) {
      plane_.sl_step(rho.values(), u.ux, u.uy, dt, [](Vec2) { return 0.0; });
      return;
    }
    const int n = substeps(dt, plane_.max_dt(u.ux, u.uy, cfl));
    for (int k = 0; k < n; ++k) plane_.fd_step(rho.values(), u.ux, u.uy, dt / n, cfl);
  }

  DiagnosticsRecord diagnostics(double t, const Field& rho, const Field& phi, Phase phase) const {
    const Conserved c = conserved_gc(rho, phi, interior());
    DiagnosticsRecord r;
    r.time = t;
    r.mass = c.mass;
    r.l1 = c.l1;
    r.l2 = c.l2;
    r.entropy = c.entropy;
    r.energy = c.energy;
    r.relerr_phi = relative_error(phi, steady_.phi0, interior());
    r.relerr_rho = relative_error(rho, steady_.rho_bar0, interior());
    r.phase = phase;
    return r;
  }

 private:
  SteadyState steady_;
  EllipticProblem poisson_;
  std::shared_ptr<LinearSolver> solver_;
  Advection2D plane_;
  std::vector<std::uint8_t> support_;
};

// ------------------------------------------------------------ drift kinetic

struct DkSetup {
  std::size_t nx = 32, ny = 32, nz = 8, nv = 17;
  ItgParams itg;
  ProfileParams profiles;
  FluxForm flux_form = FluxForm::kInterfaceSpeed;
  double cfl = 0.5;
};

class DkSimulation {
 public:
  explicit DkSimulation(const DkSetup& s) : setup_(s) {
    grid_ = itg_grid(s.itg, s.nx, s.ny, s.nz, s.nv);
    profiles_ = build_profiles(s.profiles);
    const Grid plane({grid_.axis(0), grid_.axis(1)});
    domain_ = std::make_shared<const EmbeddedDomain>(
        make_domain(Disk{{0.0, 0.0}, s.profiles.r_max}, plane, kTransportBand));
    background_ = dk_background(grid_, profiles_);
    qn_ = std::make_shared<QuasiNeutralitySolver>(domain_, background_.rho0, background_.te);
    plane_ = Advection2D::embedded(*domain_, s.flux_form);
    support_ = domain_->extended_mask();
    feq_ = equilibrium_itg(grid_, profiles_);
  }

  const Grid& grid() const { return grid_; }
  const ProfileSet& profiles() const { return profiles_; }
  const EmbeddedDomain& domain() const { return *domain_; }
  const QuasiNeutralitySolver& quasi_neutrality() const { return *qn_; }
  const DkBackground& background() const { return background_; }
  const Field& equilibrium() const { return feq_; }
  std::span<const std::uint8_t> interior() const { return domain_->interior_mask(); }
  double h() const { return grid_.min_spacing(); }

  /// Perturbed Maxwellian inside, f_eq on every non-interior plane node.
  Field initial() const {
    Field f = init_itg(grid_, profiles_, setup_.itg);
    const std::size_t line = grid_.n(2) * grid_.n(3);
    const auto mask = interior();
    for (std::size_t p = 0; p < mask.size(); ++p)
      if (!mask[p]) std::copy_n(feq_.data().begin() + p * line, line, f.data().begin() + p * line);
    return f;
  }

  /// rho(x, y, z) = ∫ f dv (trapezoid), interior nodes only.
  Field density(const Field& f) const {
    const Grid g3({grid_.axis(0), grid_.axis(1), grid_.axis(2)});
    Field rho(g3, 0.0);
    const auto w = default_weights(grid_.axis(3));
    const std::size_t nz = grid_.n(2), nv = grid_.n(3);
    const auto mask = interior();
    for (std::size_t p = 0; p < mask.size(); ++p) {
      if (!mask[p]) continue;
      for (std::size_t iz = 0; iz < nz; ++iz) {
        CompensatedSum s;
        const std::size_t base = (p * nz + iz) * nv;
        for (std::size_t iv = 0; iv < nv; ++iv) s.add(w[iv] * f[base + iv]);
        rho[p * nz + iz] = s.value();
      }
    }
    return rho;
  }

  Field potential(const Field& f) const { return qn_->solve(density(f)); }

  VelocityField velocity(const Field& phi) const {
    VelocityField u;
    gradient_3d(phi, support_, u.ux, u.uy, u.epar);
    return u;
  }

  double mass(const Field& f) const { return Quadrature(grid_, interior()).integrate(f.data()); }

  /// Stable FD step for the given velocities (Strang: the v and z flows
  /// take half steps).
  double fd_limit(const VelocityField& u) const {
    const std::size_t np = grid_.n(0) * grid_.n(1), nz = grid_.n(2);
    const auto mask = interior();
    double lim = std::numeric_limits<double>::infinity();
    std::vector<double> ux(np), uy(np);
    double emax = 0.0;
    for (std::size_t iz = 0; iz < nz; ++iz) {
      for (std::size_t p = 0; p < np; ++p) {
        ux[p] = u.ux[p * nz + iz];
        uy[p] = u.uy[p * nz + iz];
        if (mask[p]) emax = std::max(emax, std::abs(u.epar[p * nz + iz]));
      }
      lim = std::min(lim, plane_.max_dt(ux, uy, setup_.cfl));
    }
    const double vmax = std::max(std::abs(grid_.axis(3).min()), std::abs(grid_.axis(3).max()));
    if (emax > 0.0) lim = std::min(lim, 2.0 * setup_.cfl * grid_.spacing(3) / emax);
    if (vmax > 0.0) lim = std::min(lim, 2.0 * setup_.cfl * grid_.spacing(2) / vmax);
    return lim;
  }

  void step(Field& f, const Field& phi, double dt, Method method) const {
    const VelocityField u = velocity(phi);
    DkStepOptions opt{method, setup_.flux_form, setup_.cfl};
    auto fill = [&](Vec2 x, std::size_t iv) {
      return f_eq(profiles_, std::hypot(x.x, x.y), grid_.axis(3).coord(static_cast<std::ptrdiff_t>(iv)));
    };
    if (method == Method::kSemiLagrangian) {
      strang_step_dk(f, u, dt, plane_, opt, fill);
      return;
    }
    const int n = substeps(dt, fd_limit(u));
    for (int k = 0; k < n; ++k) strang_step_dk(f, u, dt / n, plane_, opt, fill);
  }

  DiagnosticsRecord diagnostics(double t, const Field& f, const Field& phi, Phase phase) const {
    const Conserved c = conserved_dk(f, phi, feq_, background_.rho0, interior());
    DiagnosticsRecord r;
    r.time = t;
    r.mass = c.mass;
    r.l1 = c.l1;
    r.l2 = c.l2;
    r.entropy = c.entropy;
    r.energy = c.energy;
    r.phi_amplitude = phi_amplitude(phi, profiles_.r_p);
    r.phase = phase;
    return r;
  }

 private:
  DkSetup setup_;
  Grid grid_;
  ProfileSet profiles_;
  std::shared_ptr<const EmbeddedDomain> domain_;
  DkBackground background_;
  std::shared_ptr<QuasiNeutralitySolver> qn_;
  Advection2D plane_;
  std::vector<std::uint8_t> support_;
  Field feq_;
};

inline DkSetup dk_setup(const ScenarioConfig& c) {
  DkSetup s;
  s.nx = c.nx;
  s.ny = c.ny;
  s.nz = c.nz;
  s.nv = c.nv;
  s.itg = c.itg;
  s.profiles = c.profiles;
  s.flux_form = c.flux_form;
  s.cfl = c.cfl;
  return s;
}

// ------------------------------------------------------------ output

struct RunOptions {
  bool emit_plot_data = false;
  bool quiet = false;
};

/// Summary of a finished run, for callers that drive `run` in-process.
struct RunSummary {
  std::vector<DiagnosticsRecord> records;
  int switches = 0;
  std::optional<double> switch_time;
  std::filesystem::path output_dir;
};

inline std::filesystem::path output_directory(const ScenarioConfig& c) {
  const char* root = std::getenv(kOutputRootEnv);
  std::filesystem::path dir = (root && *root) ? std::filesystem::path(root) / to_string(c.scenario)
                                              : std::filesystem::path(c.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

inline std::string time_tag(double t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", t);
  return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
  if (!out) throw IoError("cannot write " + p.string());
}

/// Plain matrix for gnuplot `matrix` plots: one line per y index.
inline void write_plot_matrix(const std::filesystem::path& p, std::size_t nx, std::size_t ny,
                              const std::function<double(std::size_t, std::size_t)>& value) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) out << (i ? " " : "") << format_real(value(i, j));
    out << '\n';
  }
}

struct LoopState {
  std::size_t step = 0;
  double time = 0.0;
  Phase phase = Phase::kLinearSL;
  int switches = 0;
  std::array<std::optional<double>, 2> mass_history{};
};

inline nlohmann::json state_meta(const ScenarioConfig& c, const LoopState& s) {
  auto hist = nlohmann::json::array();
  for (const auto& m : s.mass_history) hist.push_back(m ? nlohmann::json(*m) : nlohmann::json(nullptr));
  return {{"scenario", to_string(c.scenario)}, {"step", s.step},         {"time", s.time},
          {"phase", to_string(s.phase)},       {"switches", s.switches}, {"mass_history", hist}};
}

inline LoopState state_from_meta(const nlohmann::json& m, Scenario expected) {
  if (m.value("scenario", "") != to_string(expected))
    throw ConfigError("resume snapshot belongs to scenario '" + m.value("scenario", "") + "'");
  LoopState s;
  s.step = m.at("step").get<std::size_t>();
  s.time = m.at("time").get<double>();
  s.phase = m.at("phase").get<std::string>() == "FD" ? Phase::kNonlinearFD : Phase::kLinearSL;
  s.switches = m.value("switches", 0);
  const auto& h = m.at("mass_history");
  for (std::size_t k = 0; k < 2 && k < h.size(); ++k)
    if (!h[k].is_null()) s.mass_history[k] = h[k].get<double>();
  return s;
}

/// Starts the events log afresh unless the run resumes from a snapshot.
inline std::filesystem::path events_log(const ScenarioConfig& c, const std::filesystem::path& dir) {
  auto p = dir / (to_string(c.scenario) + "_events.log");
  if (c.resume.empty()) {
    std::error_code ec;
    std::filesystem::remove(p, ec);
  }
  return p;
}

inline void log_line(const RunOptions& o, const std::string& s) {
  if (!o.quiet) std::cout << s << std::endl;
}

// ------------------------------------------------------------ pipelines

inline RunSummary run_steady(const ScenarioConfig& c, const RunOptions& o) {
  RunSummary out;
  out.output_dir = output_directory(c);
  write_text(out.output_dir / "steady_config.ini", echo_config(c));
  NewtonOptions opt;
  opt.tol = c.newton_tol;
  opt.max_iter = c.newton_max_iter;
  const SteadyState st = dshape_steady_state(dshape_grid(c.nx, c.ny), opt);
  std::string hist;
  for (double r : st.newton.residuals) hist += " " + format_real(r);
  log_line(o, "newton iterations: " + std::to_string(st.newton.iterations) + ", residuals:" + hist);
  nlohmann::json meta = {{"scenario", "steady"}, {"newton_iterations", st.newton.iterations},
                         {"residuals", st.newton.residuals}};
  write_snapshot((out.output_dir / "steady_phi_t0.fld").string(), {"phi0", 0.0, st.phi0, meta});
  write_snapshot((out.output_dir / "steady_rho_t0.fld").string(), {"rho_bar0", 0.0, st.rho_bar0, meta});
  if (o.emit_plot_data) {
    write_plot_matrix(out.output_dir / "steady_phi_t0.dat", c.nx, c.ny,
                      [&](std::size_t i, std::size_t j) { return st.phi0[i * c.ny + j]; });
    write_plot_matrix(out.output_dir / "steady_rho_t0.dat", c.nx, c.ny,
                      [&](std::size_t i, std::size_t j) { return st.rho_bar0[i * c.ny + j]; });
  }
  return out;
}

/// Shared time loop: diagnostics use phi at the start of each step, the
/// mixed method observes the mass before choosing the step.
template <class Potential, class Diagnose, class Advance, class Snapshot, class Mass>
void time_loop(const ScenarioConfig& c, const RunOptions& o, LoopState& s, RunSummary& out,
               DiagnosticsWriter& csv, Potential&& potential, Diagnose&& diagnose,
               Advance&& advance, Snapshot&& snapshot, Mass&& mass, double h_switch) {
  const bool mixed = c.method == MethodChoice::kMixed;
  const auto events = events_log(c, out.output_dir);
  PhaseSwitch sw(h_switch, c.dt_sl(), c.dt, s.phase);
  sw.restore(s.phase, s.mass_history, s.switches);
  auto dt_now = [&] {
    if (c.method == MethodChoice::kMixed) return sw.dt();
    return c.method == MethodChoice::kSl ? c.dt_sl() : c.dt;
  };
  auto method_now = [&] {
    if (c.method == MethodChoice::kMixed)
      return sw.phase() == Phase::kLinearSL ? Method::kSemiLagrangian : Method::kFiniteDifference;
    return c.method == MethodChoice::kSl ? Method::kSemiLagrangian : Method::kFiniteDifference;
  };
  auto phase_now = [&] {
    if (c.method == MethodChoice::kMixed) return sw.phase();
    return c.method == MethodChoice::kSl ? Phase::kLinearSL : Phase::kNonlinearFD;
  };
  for (;;) {
    const auto phi = potential();
    if (mixed && sw.observe(mass())) {
      out.switches = sw.switches();
      out.switch_time = s.time;
      log_line(o, "phase switch SL -> FD at t=" + format_real(s.time) + " step=" + std::to_string(s.step));
      std::ofstream ev(events, std::ios::app);
      ev << "phase switch SL -> FD at t=" << format_real(s.time) << " step=" << s.step << '\n';
    }
    s.phase = phase_now();
    const bool done = !(s.time + 1e-9 * dt_now() < c.t_end);
    if (s.step % c.diag_interval == 0 || done) {
      const auto rec = diagnose(s.time, phi, s.phase);
      csv.write(rec);
      out.records.push_back(rec);
    }
    // Resuming re-observes this step's mass, so the stored history stops
    // one sample short.
    auto stored = [&] {
      LoopState snap = s;
      snap.mass_history = {std::nullopt, sw.mass_history()[0]};
      snap.switches = sw.switches();
      return snap;
    };
    if (done) {
      snapshot(stored(), phi);
      break;
    }
    if (c.snapshot_interval > 0 && s.step > 0 && s.step % c.snapshot_interval == 0) snapshot(stored(), phi);
    const double h = std::min(dt_now(), c.t_end - s.time);
    advance(phi, h, method_now());
    s.time += h;
    ++s.step;
  }
  out.switches = sw.switches();
}

inline RunSummary run_gc(const ScenarioConfig& c, const RunOptions& o) {
  RunSummary out;
  out.output_dir = output_directory(c);
  const std::string name = to_string(c.scenario);
  write_text(out.output_dir / (name + "_config.ini"), echo_config(c));
  NewtonOptions nopt;
  nopt.tol = c.newton_tol;
  nopt.max_iter = c.newton_max_iter;
  std::optional<Field> phi0;
  if (!c.phi0_file.empty()) phi0 = read_snapshot(c.phi0_file).field;
  const GcSimulation sim(dshape_grid(c.nx, c.ny), c.flux_form, nopt, phi0 ? &*phi0 : nullptr);
  Field rho = sim.steady().rho_bar0;
  if (c.scenario == Scenario::kGcPerturb)
    rho = perturb_gc(sim.steady().rho_bar0, sim.steady().phi0, sim.domain(), c.perturb);
  LoopState s;
  s.phase = c.method == MethodChoice::kFd ? Phase::kNonlinearFD : Phase::kLinearSL;
  if (!c.resume.empty()) {
    Snapshot snap = read_snapshot(c.resume);
    if (!(snap.field.grid() == rho.grid())) throw ConfigError("resume snapshot grid does not match the mesh");
    rho = std::move(snap.field);
    s = state_from_meta(snap.meta, c.scenario);
  }
  DiagnosticsWriter csv((out.output_dir / (name + ".csv")).string(), false);
  auto potential = [&] { return sim.potential(rho); };
  auto diagnose = [&](double t, const Field& phi, Phase ph) { return sim.diagnostics(t, rho, phi, ph); };
  auto advance = [&](const Field& phi, double h, Method m) { sim.step(rho, phi, h, m, c.cfl); };
  auto snapshot = [&](const LoopState& st, const Field& phi) {
    const std::string tag = time_tag(st.time);
    write_snapshot((out.output_dir / (name + "_t" + tag + ".fld")).string(),
                   {"rho_bar", st.time, rho, state_meta(c, st)});
    if (o.emit_plot_data) {
      write_plot_matrix(out.output_dir / (name + "_drho_t" + tag + ".dat"), c.nx, c.ny,
                        [&](std::size_t i, std::size_t j) {
                          const std::size_t f = i * c.ny + j;
                          return rho[f] - sim.steady().rho_bar0[f];
                        });
      write_plot_matrix(out.output_dir / (name + "_phi_t" + tag + ".dat"), c.nx, c.ny,
                        [&](std::size_t i, std::size_t j) { return phi[i * c.ny + j]; });
    }
  };
  auto mass = [&] { return conserved_gc(rho, rho, sim.interior()).mass; };
  time_loop(c, o, s, out, csv, potential, diagnose, advance, snapshot, mass, rho.grid().min_spacing());
  if (!out.records.empty()) {
    double ephi = 0.0, erho = 0.0;
    for (const auto& r : out.records) {
      ephi = std::max(ephi, r.relerr_phi.value_or(0.0));
      erho = std::max(erho, r.relerr_rho.value_or(0.0));
    }
    log_line(o, name + ": t=" + format_real(out.records.back().time) + " max E(phi)=" +
                    format_real(ephi) + " max E(rho)=" + format_real(erho));
  }
  return out;
}

inline RunSummary run_dk(const ScenarioConfig& c, const RunOptions& o) {
  RunSummary out;
  out.output_dir = output_directory(c);
  const std::string name = to_string(c.scenario);
  write_text(out.output_dir / (name + "_config.ini"), echo_config(c));
  const DkSimulation sim(dk_setup(c));
  Field f = sim.initial();
  LoopState s;
  s.phase = c.method == MethodChoice::kFd ? Phase::kNonlinearFD : Phase::kLinearSL;
  if (!c.resume.empty()) {
    Snapshot snap = read_snapshot(c.resume);
    if (!(snap.field.grid() == f.grid())) throw ConfigError("resume snapshot grid does not match the mesh");
    f = std::move(snap.field);
    s = state_from_meta(snap.meta, c.scenario);
  }
  DiagnosticsWriter csv((out.output_dir / (name + ".csv")).string(), false);
  auto potential = [&] { return sim.potential(f); };
  auto diagnose = [&](double t, const Field& phi, Phase ph) { return sim.diagnostics(t, f, phi, ph); };
  auto advance = [&](const Field& phi, double h, Method m) { sim.step(f, phi, h, m); };
  auto snapshot = [&](const LoopState& st, const Field&) {
    const std::string tag = time_tag(st.time);
    write_snapshot((out.output_dir / (name + "_t" + tag + ".fld")).string(), {"f", st.time, f, state_meta(c, st)});
    if (o.emit_plot_data) {
      const std::size_t nz = c.nz, nv = c.nv, iv0 = nv / 2;
      write_plot_matrix(out.output_dir / (name + "_f_v0_t" + tag + ".dat"), c.nx, c.ny,
                        [&](std::size_t i, std::size_t j) { return f[((i * c.ny + j) * nz) * nv + iv0]; });
    }
  };
  auto mass = [&] { return sim.mass(f); };
  time_loop(c, o, s, out, csv, potential, diagnose, advance, snapshot, mass, sim.h());
  log_line(o, name + ": t=" + format_real(s.time) + " switches=" + std::to_string(out.switches));
  return out;
}

inline RunSummary run(const ScenarioConfig& c, const RunOptions& o = {}) {
  set_num_threads(c.threads);
  switch (c.scenario) {
    case Scenario::kSteady: return run_steady(c, o);
    case Scenario::kGcPersist:
    case Scenario::kGcPerturb: return run_gc(c, o);
    case Scenario::kDkItg: return run_dk(c, o);
  }
  return {};
}

}  // namespace mixsl::app
