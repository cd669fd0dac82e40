// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wavemin/config.hpp"

namespace wavemin {

enum class ExitCode : int { success = 0, failure = 1, validation = 2, not_converged = 3 };

enum class Subcommand { solve, validate, tomography, hs_bound, greens_table };

inline const char* to_string(Subcommand s) {
  switch (s) {
    case Subcommand::solve: return "solve";
    case Subcommand::validate: return "validate";
    case Subcommand::tomography: return "tomography";
    case Subcommand::hs_bound: return "hs-bound";
    case Subcommand::greens_table: return "greens-table";
  }
  return "?";
}

inline std::optional<Subcommand> subcommand_from_string(const std::string& s) {
  for (auto c : {Subcommand::solve, Subcommand::validate, Subcommand::tomography, Subcommand::hs_bound,
                 Subcommand::greens_table})
    if (s == to_string(c)) return c;
  return std::nullopt;
}

/// Command-line overrides of configuration values.
struct RunOverrides {
  std::optional<double> tolerance;
  std::optional<int> max_iterations;
  std::optional<int> quadrature_order;
  std::optional<std::uint64_t> seed;
};

struct RunResult {
  ExitCode code = ExitCode::success;
  Json summary;
  std::vector<std::string> files;  // written artifacts
  std::string message;             // diagnostics for stderr
};

namespace run_detail {

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline Json history_json(const SolveReport& r) {
  return {{"iterations", r.iterations}, {"final_residual", r.final_residual}, {"converged", r.converged}};
}

class Emitter {
 public:
  Emitter(const RunConfig& c, Subcommand sub, std::filesystem::path dir)
      : prefix_(c.run_id + "_" + to_string(sub) + "_"), dir_(std::move(dir)) {}

  void write(const std::string& suffix, const std::string& text, RunResult& r) const {
    const auto path = dir_ / (prefix_ + suffix);
    io::write_text(path.string(), text);
    r.files.push_back(path.string());
  }

 private:
  std::string prefix_;
  std::filesystem::path dir_;
};

inline Json base_summary(const RunConfig& c, Subcommand sub) {
  Json s;
  s["run_id"] = c.run_id;
  s["subcommand"] = to_string(sub);
  s["units"] = c.units;
  if (c.has_problem) {
    s["physics"] = std::string(to_string(c.physics));
    s["omega"] = c.omega;
  }
  return s;
}

inline bool zero_force(const CVector& f) { return f.size() == 0 || f.cwiseAbs().maxCoeff() == 0.0; }

inline double rotation_angle(const RunConfig& c, const ProblemSpec& spec) {
  return resolve_rotation(spec, c.solver.rotation);
}

inline Json passivity_json(const RunConfig& c) {
  Json regs = Json::array();
  for (std::size_t i = 0; i < c.regions.size(); ++i) {
    const PassivityReport rep = check_passivity(region_moduli(c, i));
    regs.push_back({{"name", c.regions[i].name},
                    {"primal_min_eigenvalue", rep.primal.min_eigenvalue},
                    {"primal", to_string(rep.primal.classification)},
                    {"dual_min_eigenvalue", rep.dual.min_eigenvalue},
                    {"dual", to_string(rep.dual.classification)}});
  }
  return regs;
}

// Subcommands ------------------------------------------------------------------------

inline void run_validate(const RunConfig& c, RunResult& r) {
  if (c.has_problem) {
    const ProblemSpec spec = build_problem_spec(c);
    const double theta = rotation_angle(c, spec);
    const DiscreteProblem p(rotate_problem(spec, theta));
    r.summary["regions"] = passivity_json(c);
    r.summary["rotation"] = theta;
    r.summary["reduced_form"] = p.reduced();
    r.summary["unknowns"] = p.num_unknowns();
    r.summary["nodes"] = p.mesh().num_nodes();
    r.summary["cells"] = p.mesh().num_cells();
  }
  if (c.greens) {
    const GreensMedium m(c.greens->medium);
    r.summary["greens"] = {{"medium", c.greens->medium_kind},
                           {"decay_length", decay_length(m, c.greens->omega)},
                           {"points", c.greens->points.size()}};
  }
  r.summary["valid"] = true;
}

inline void run_solve(const RunConfig& c, const Emitter& out, RunResult& r) {
  const ProblemSpec spec = build_problem_spec(c);
  const Solution sol = solve(spec, solve_options(c), c.solver.rotation);
  const DiscreteProblem& p = *sol.problem;
  const bool no_source = zero_force(spec.force);

  const FunctionalValue J = evaluate_functional(sol.F, p);
  const FunctionalValue Jb = evaluate_boundary_form(sol.F, p);
  Json s;
  s["rotation"] = sol.theta;
  s["reduced_form"] = p.reduced();
  s["unknowns"] = p.num_unknowns();
  s["solver"] = history_json(sol.report);
  s["functional"] = J.total;
  s["functional_boundary_form"] = {{"volume", Jb.volume_term}, {"boundary", Jb.boundary_term}, {"total", Jb.total}};
  const ComplexSolution rotated = complex_from_fields(sol.F, sol.G, p.disc(), p.source().force, p.omega());
  if (no_source) {
    const double surf = minimum_value_surface(surface_data(rotated, p), p.omega());
    const double scale = std::max({std::abs(J.total), std::abs(surf), 1e-300});
    s["minimum_value_surface"] = surf;
    s["boundary_identity_discrepancy"] = std::abs(J.total - surf) / scale;
  }
  const DissipationReport dis = dissipation_rate(sol.fields, sol.material, p.mesh());
  const double work = boundary_working_rate(sol.fields, p.disc(), spec.force, spec.omega);
  s["dissipation"] = {{"mean_power", dis.mean_power},
                      {"stiffness_part", dis.stiffness_part},
                      {"inertial_part", dis.inertial_part},
                      {"boundary_working_rate", work},
                      {"balance_discrepancy",
                       std::abs(dis.mean_power - work) / std::max({std::abs(dis.mean_power), std::abs(work), 1e-300})}};
  if (c.solver.oracle_check) {
    const ComplexSolution oracle = solve_direct_complex(p);
    const CrossValidation cv = cross_validate(sol.F, oracle, p);
    s["oracle"] = {{"potential_error", cv.potential_error},
                   {"flux_error", cv.flux_error},
                   {"trace_error", cv.trace_error},
                   {"functional_discrepancy", cv.functional_discrepancy}};
  }
  r.summary.update(s);

  out.write("nodes.csv", io::node_table(p.mesh()), r);
  out.write("cells.csv", io::cell_table(p.mesh()), r);
  out.write("fields.csv", io::field_table(p.layout(), sol.F.values), r);
  out.write("dual.csv", io::field_table(p.layout(), sol.G, true), r);
  out.write("complex.csv", io::complex_table(sol.fields, p.disc()), r);
  out.write("history.csv", io::history_table(sol.report.history), r);
  if (!sol.report.converged) {
    r.code = ExitCode::not_converged;
    r.message = "conjugate gradients did not converge in " + std::to_string(sol.report.iterations) +
                " iterations (relative residual " + io::format_double(sol.report.final_residual) + ")";
  }
}

inline void run_tomography(const RunConfig& c, const Emitter& out, RunResult& r) {
  const TomographyConfig t = c.tomography.value_or(TomographyConfig{});
  const ProblemSpec spec = build_problem_spec(c);
  if (!zero_force(spec.force)) throw ConfigError("source", "tomography requires a zero source");
  const double theta = rotation_angle(c, spec);
  const DiscreteProblem p(rotate_problem(spec, theta));
  const ComplexSolution exact = solve_direct_complex(p);
  const SurfaceData measured = surface_data(exact, p);
  const double scale = std::max(1.0, measured.potential.norm() * measured.flux.norm());
  const FieldState Fexact = field_from_complex(exact, p.disc(), p.source().force, p.omega());
  const double exact_slack = tomography_slack(Fexact, measured, p);

  std::string table = "trial,source,slack\n";
  double min_slack = HUGE_VAL;
  int trial = 0;
  auto record = [&](const FieldState& F, const std::string& src) {
    const double v = tomography_slack(F, measured, p);
    min_slack = std::min(min_slack, v);
    table += std::to_string(trial++) + "," + src + "," + io::format_double(v) + "\n";
  };
  if (!t.trial_field.empty()) {
    std::filesystem::path path(t.trial_field);
    if (path.is_relative()) path = c.base_dir / path;
    const Vector v = io::parse_field_table(io::read_text(path.string()), p.layout());
    record({p.layout(), v}, "file");
  }
  std::mt19937_64 rng(c.solver.seed);
  std::normal_distribution<double> nd(0.0, t.trial_scale);
  for (int k = 0; k < t.random_trials; ++k) {
    Vector z(p.num_unknowns());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = nd(rng);
    record(p.field_state(z), "random");
  }
  Json s;
  s["rotation"] = theta;
  s["scale"] = scale;
  s["exact_slack"] = exact_slack;
  s["trials"] = trial;
  if (trial > 0) s["min_trial_slack"] = min_slack;
  s["bound_holds"] = (trial == 0 || min_slack >= -1e-10 * scale) && std::abs(exact_slack) <= 1e-10 * scale;
  r.summary.update(s);
  out.write("slack.csv", table, r);
}

inline void run_hs(const RunConfig& c, const Emitter& out, RunResult& r) {
  const HsConfig h = c.hs.value_or(HsConfig{});
  const ProblemSpec spec = build_problem_spec(c);
  const double theta = rotation_angle(c, spec);
  const DiscreteProblem p(rotate_problem(spec, theta));
  if (p.reduced()) throw ConfigError("hs", "Hashin-Shtrikman bounds need lossy dual moduli (full form)");
  const int dim = p.mesh().dim;
  ComparisonMedium cm;
  if (h.moduli) {
    const ComplexModuli m{c.physics, h.moduli->primal, h.moduli->dual, c.omega};
    cm = ComparisonMedium::from_moduli(expand_moduli(rotate_moduli(m, theta).moduli, dim));
  } else {
    if (h.reference_region < 0 || h.reference_region >= static_cast<int>(c.regions.size()))
      throw ConfigError("hs.comparison.reference_region", "undefined region");
    const ComplexModuli m = expand_moduli(rotate_moduli(region_moduli(c, h.reference_region), theta).moduli, dim);
    const OperatorL L = assemble_L(m);
    auto scaled = [&](const CGBlock& b) { return CGBlock{h.scale * b.a, h.scale * b.b, h.scale * b.d}; };
    cm = ComparisonMedium::from_blocks(scaled(L.first), scaled(L.second));
  }
  const SparseMatrix L0 = cm.assemble(p.layout());
  const BoundKind kind = classify_bound(p.layout(), p.L(), L0);
  const SolveOptions opts = solve_options(c);

  auto [Fp, rep] = minimize_cg(p, opts);
  if (!rep.converged) {
    r.code = ExitCode::not_converged;
    r.message = "primal minimization did not converge";
  }
  const double primal = evaluate_functional(Fp, p).total;

  std::mt19937_64 rng(c.solver.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const FieldLayout& lay = p.layout();
  const Vector W = p.weights();
  Vector zf(p.num_unknowns());
  for (Eigen::Index i = 0; i < zf.size(); ++i) zf(i) = nd(rng);
  const FieldState Fr = p.field_state(zf);
  const Polarization Tex = exact_polarization(Fr, p.L(), L0);
  const double eq_gap = std::abs(evaluate_hs(Fr, Tex, p, L0) - evaluate_functional(Fr, p).total);
  const double eq_scale = std::max(1.0, std::abs(evaluate_functional(Fr, p).total));

  std::string table = "sample,hs_value,primal_minimum,gap\n";
  bool side_ok = true;
  double worst = HUGE_VAL;
  for (int k = 0; k < h.random_polarizations; ++k) {
    Vector t = Vector::Zero(lay.size());
    for (Eigen::Index i = 0; i < lay.size(); ++i)
      if (W(i) != 0.0) t(i) = h.polarization_scale * nd(rng);
    const HSMinimum m = field_minimized_hs(p, L0, {lay, t}, opts);
    const double gap = m.value - primal;
    const double tol = 1e-9 * std::max(1.0, std::abs(primal));
    if (kind == BoundKind::minimum_principle) side_ok = side_ok && gap >= -tol;
    if (kind == BoundKind::saddle_principle) side_ok = side_ok && gap <= tol;
    worst = std::min(worst, kind == BoundKind::saddle_principle ? -gap : gap);
    table += std::to_string(k) + "," + io::format_double(m.value) + "," + io::format_double(primal) + "," +
             io::format_double(gap) + "\n";
  }

  Json s;
  s["rotation"] = theta;
  s["bound_kind"] = to_string(kind);
  s["primal_minimum"] = primal;
  s["equality_gap"] = eq_gap / eq_scale;
  s["random_polarizations"] = h.random_polarizations;
  if (h.random_polarizations > 0) s["worst_bound_margin"] = worst;
  s["bound_holds"] = side_ok;

  if (kind != BoundKind::indefinite) {
    const DiscreteProblem comparison = p.with_operator(L0);
    auto [F0, rep0] = minimize_cg(comparison, opts);
    const DiscreteH0 H0(p, L0);
    const CondensedSystem sys = make_condensed_system(p, L0, F0, H0.applier());
    const CondensedResult res = h.dense ? condense_and_solve_dense(sys) : condense_and_solve_cg(sys, kind, opts);
    s["condensed"] = {{"solver", h.dense ? "dense" : "cg"},
                      {"value", res.value},
                      {"residual", res.residual},
                      {"value_vs_primal", std::abs(res.value - primal) / std::max(1.0, std::abs(primal))}};
    out.write("polarization.csv", io::field_table(lay, res.T), r);
  }
  r.summary.update(s);
  out.write("hs.csv", table, r);
}

/// Closed form e^{-w sqrt(q/d) r} / (4 pi d r) of the scalar surrogate.
inline double scalar_closed_form(double d, double q, double omega, double r) {
  return std::exp(-omega * std::sqrt(q / d) * r) / (4.0 * kPi * d * r);
}

inline void run_greens(const RunConfig& c, const RunOverrides& ov, const Emitter& out, RunResult& r) {
  if (!c.greens) throw ConfigError("greens", "missing required section for greens-table");
  const GreensConfig& g = *c.greens;
  const int order = ov.quadrature_order.value_or(g.quadrature_order);
  if (order < 2) throw ConfigError("--quadrature-order", "must be at least 2");
  const GreensMedium m(g.medium);
  std::vector<GreensTableRow> rows;
  Json pts = Json::array();
  double worst_imag = 0.0, worst_asym = 0.0;
  for (const auto& x : g.points) {
    const GreensEvaluation e = greens_evaluate(x, g.omega, m, order);
    for (Eigen::Index i = 0; i < e.G.rows(); ++i)
      for (Eigen::Index j = 0; j < e.G.cols(); ++j)
        rows.push_back({x, static_cast<int>(i), static_cast<int>(j), e.G(i, j)});
    const double asym = (e.G - e.G.transpose()).cwiseAbs().maxCoeff() / std::max(e.G.cwiseAbs().maxCoeff(), 1e-300);
    worst_imag = std::max(worst_imag, e.imag_residue);
    worst_asym = std::max(worst_asym, asym);
    Json pj = {{"x", {x(0), x(1), x(2)}}, {"imag_residue", e.imag_residue}, {"asymmetry", asym}};
    if (g.medium_kind == "scalar") {
      const double ref = scalar_closed_form(g.d, g.q, g.omega, x.norm());
      pj["closed_form"] = ref;
      pj["entry_00"] = e.G(0, 0);
      pj["closed_form_error"] = std::abs(e.G(0, 0) - ref);
    }
    pts.push_back(pj);
  }
  r.summary["medium"] = g.medium_kind;
  r.summary["greens_omega"] = g.omega;
  r.summary["quadrature_order"] = order;
  r.summary["decay_length"] = decay_length(m, g.omega);
  r.summary["points"] = pts;
  r.summary["max_imag_residue"] = worst_imag;
  r.summary["max_asymmetry"] = worst_asym;
  out.write("greens.csv", io::greens_csv(rows), r);
}

inline RunConfig apply_overrides(RunConfig c, const RunOverrides& ov) {
  if (ov.tolerance) c.solver.tolerance = *ov.tolerance;
  if (ov.max_iterations) c.solver.max_iterations = *ov.max_iterations;
  if (ov.seed) c.solver.seed = *ov.seed;
  if (ov.quadrature_order && c.greens) c.greens->quadrature_order = *ov.quadrature_order;
  std::vector<ConfigIssue> bad;
  if (!(c.solver.tolerance > 0.0 && c.solver.tolerance < 1.0)) bad.push_back({"--tolerance", "must lie in (0, 1)"});
  if (c.solver.max_iterations < 1) bad.push_back({"--max-iters", "must be positive"});
  if (!bad.empty()) throw ConfigError(bad);
  return c;
}

}  // namespace run_detail

/// Runs one subcommand on a parsed configuration and writes its artifacts into
/// out_dir. Validation problems give exit code 2, non-convergence 3.
inline RunResult run(const RunConfig& config, Subcommand sub, const std::filesystem::path& out_dir,
                     const RunOverrides& ov = {}) {
  RunResult r;
  try {
    const RunConfig c = run_detail::apply_overrides(config, ov);
    r.summary = run_detail::base_summary(c, sub);
    std::filesystem::create_directories(out_dir);
    const run_detail::Emitter out(c, sub, out_dir);
    switch (sub) {
      case Subcommand::validate: run_detail::run_validate(c, r); break;
      case Subcommand::solve: run_detail::run_solve(c, out, r); break;
      case Subcommand::tomography: run_detail::run_tomography(c, out, r); break;
      case Subcommand::hs_bound: run_detail::run_hs(c, out, r); break;
      case Subcommand::greens_table: run_detail::run_greens(c, ov, out, r); break;
    }
    r.summary["exit_code"] = static_cast<int>(r.code);
    if (sub != Subcommand::validate) out.write("summary.json", r.summary.dump(2) + "\n", r);
  } catch (const ValidationError& e) {
    r.code = ExitCode::validation;
    r.message = std::string("validation error:\n") + e.what();
  } catch (const SolverError& e) {
    r.code = ExitCode::not_converged;
    r.message = std::string("solver error: ") + e.what();
  } catch (const std::exception& e) {
    r.code = ExitCode::failure;
    r.message = std::string("error: ") + e.what();
  }
  return r;
}

/// Loads the configuration file, then runs.
inline RunResult run(const std::filesystem::path& config_path, Subcommand sub, const std::filesystem::path& out_dir,
                     const RunOverrides& ov = {}) {
  try {
    return run(load_config(config_path), sub, out_dir, ov);
  } catch (const ValidationError& e) {
    RunResult r;
    r.code = ExitCode::validation;
    r.message = std::string("validation error:\n") + e.what();
    return r;
  }
}

}  // namespace wavemin
