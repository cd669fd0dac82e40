// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "wavemin/greens.hpp"
#include "wavemin/hs.hpp"
#include "wavemin/io.hpp"
#include "wavemin/solver.hpp"

namespace wavemin {

using Json = nlohmann::json;

/// One problem found in a configuration, located by its key path.
struct ConfigIssue {
  std::string path;
  std::string message;
};

/// Every schema problem found in a configuration.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : ValidationError(join(issues)), issues_(std::move(issues)) {}
  ConfigError(const std::string& path, const std::string& message)
      : ConfigError(std::vector<ConfigIssue>{{path, message}}) {}
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<ConfigIssue>& v) {
    std::string s;
    for (const auto& i : v) s += (s.empty() ? "" : "\n") + i.path + ": " + i.message;
    return s;
  }
  std::vector<ConfigIssue> issues_;
};

struct GeometryConfig {
  enum class Kind { interval, rectangle };
  Kind kind = Kind::interval;
  std::vector<double> nodes;         // explicit interval nodes
  std::vector<int> cell_regions;     // explicit per-cell regions
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  int cells = 0, nx = 0, ny = 0;
  struct Box {
    int region = 0;
    double x0 = -HUGE_VAL, x1 = HUGE_VAL, y0 = -HUGE_VAL, y1 = HUGE_VAL;
    bool contains(const Vector& p) const {
      return p(0) >= x0 && p(0) <= x1 && (p.size() < 2 || (p(1) >= y0 && p(1) <= y1));
    }
  };
  std::vector<Box> region_boxes;  // later boxes win
};

struct RegionConfig {
  std::string name;
  CMatrix primal;
  CMatrix dual;  // as stored in ComplexModuli (EM: inverse permeability)
};

struct SourceConfig {
  CVector value;  // per entity, one complex entry per component; empty means no source
  GeometryConfig::Box support;
};

struct SolverConfig {
  double tolerance = 1e-12;
  int max_iterations = 20000;
  Preconditioner preconditioner = Preconditioner::block_jacobi;
  RotationOptions rotation;
  std::uint64_t seed = 1;
  bool oracle_check = true;
};

struct TomographyConfig {
  std::string trial_field;  // field table, resolved against the config directory
  int random_trials = 20;
  double trial_scale = 1.0;
};

struct HsConfig {
  double scale = 2.0;
  int reference_region = 0;
  std::optional<RegionConfig> moduli;  // explicit homogeneous comparison moduli
  int random_polarizations = 20;
  double polarization_scale = 1.0;
  bool dense = false;
};

struct GreensConfig {
  std::string medium_kind;  // scalar, isotropic or dq
  ComparisonMedium medium;
  double omega = 1.0;
  std::vector<Vector3> points;
  int quadrature_order = kDefaultSphereOrder;
  double d = 1.0, q = 1.0;  // scalar surrogate parameters
};

struct RunConfig {
  std::string run_id;
  std::string units;
  std::filesystem::path base_dir;
  bool has_problem = false;
  Physics physics = Physics::elastic;
  double omega = 1.0;
  GeometryConfig geometry;
  std::vector<RegionConfig> regions;
  std::vector<SideCondition> boundary;
  SourceConfig source;
  SolverConfig solver;
  std::optional<TomographyConfig> tomography;
  std::optional<HsConfig> hs;
  std::optional<GreensConfig> greens;
};

namespace config_detail {

struct Reader {
  std::vector<ConfigIssue> issues;

  void fail(const std::string& path, const std::string& msg) { issues.push_back({path, msg}); }

  static std::string key(const std::string& path, const std::string& k) { return path.empty() ? k : path + "." + k; }
  static std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

  const Json* find(const Json& j, const std::string& path, const std::string& k, bool required) {
    if (!j.is_object()) return nullptr;
    auto it = j.find(k);
    if (it == j.end()) {
      if (required) fail(key(path, k), "missing required key");
      return nullptr;
    }
    return &*it;
  }

  std::optional<double> number(const Json& j, const std::string& path) {
    if (!j.is_number()) {
      fail(path, "expected a number");
      return std::nullopt;
    }
    return j.get<double>();
  }

  std::optional<int> integer(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) {
      fail(path, "expected an integer");
      return std::nullopt;
    }
    return j.get<int>();
  }

  std::optional<std::string> string(const Json& j, const std::string& path) {
    if (!j.is_string()) {
      fail(path, "expected a string");
      return std::nullopt;
    }
    return j.get<std::string>();
  }

  static bool is_complex_pair(const Json& j) {
    return j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number();
  }

  /// Number or [re, im].
  std::optional<Complex> complex(const Json& j, const std::string& path) {
    if (j.is_number()) return Complex(j.get<double>(), 0.0);
    if (is_complex_pair(j)) return Complex(j[0].get<double>(), j[1].get<double>());
    fail(path, "expected a complex number as [re, im] or a real number");
    return std::nullopt;
  }

  /// Complex scalar (1x1) or array of rows of complex entries.
  std::optional<CMatrix> complex_matrix(const Json& j, const std::string& path) {
    if (j.is_number() || is_complex_pair(j)) {
      auto c = complex(j, path);
      return CMatrix::Constant(1, 1, *c);
    }
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
      fail(path, "expected a complex scalar or a matrix given as an array of rows");
      return std::nullopt;
    }
    const auto n = j.size(), m = j[0].size();
    CMatrix out(n, m);
    for (std::size_t r = 0; r < n; ++r) {
      if (!j[r].is_array() || j[r].size() != m) {
        fail(at(path, r), "rows must have equal length");
        return std::nullopt;
      }
      for (std::size_t c = 0; c < m; ++c) {
        auto v = complex(j[r][c], at(at(path, r), c));
        if (!v) return std::nullopt;
        out(r, c) = *v;
      }
    }
    return out;
  }

  std::optional<Matrix> real_matrix(const Json& j, const std::string& path) {
    auto m = complex_matrix(j, path);
    if (!m) return std::nullopt;
    if (m->imag().cwiseAbs().maxCoeff() != 0.0) {
      fail(path, "expected real entries");
      return std::nullopt;
    }
    return Matrix(m->real());
  }

  /// Complex scalar or array of complex scalars.
  std::optional<CVector> complex_vector(const Json& j, const std::string& path) {
    if (j.is_number() || is_complex_pair(j)) {
      auto c = complex(j, path);
      CVector v(1);
      v(0) = *c;
      return v;
    }
    if (!j.is_array() || j.empty()) {
      fail(path, "expected a complex scalar or an array of complex numbers");
      return std::nullopt;
    }
    CVector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
      auto c = complex(j[i], at(path, i));
      if (!c) return std::nullopt;
      v(static_cast<Eigen::Index>(i)) = *c;
    }
    return v;
  }

  template <class T>
  void opt_number(const Json& j, const std::string& path, const std::string& k, T& out) {
    if (const Json* v = find(j, path, k, false)) {
      if constexpr (std::is_integral_v<T>) {
        if (auto x = integer(*v, key(path, k))) out = static_cast<T>(*x);
      } else {
        if (auto x = number(*v, key(path, k))) out = *x;
      }
    }
  }

  void expect_object(const Json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
  }

  void unknown_keys(const Json& j, const std::string& path, std::initializer_list<const char*> known) {
    if (!j.is_object()) return;
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* k : known) ok = ok || it.key() == k;
      if (!ok) fail(key(path, it.key()), "unknown key");
    }
  }
};

inline const char* primal_key(Physics p) {
  switch (p) {
    case Physics::elastic: return "stiffness";
    case Physics::acoustic: return "compressibility";
    case Physics::electromagnetic: return "permittivity";
  }
  return "";
}

inline const char* dual_key(Physics p) {
  switch (p) {
    case Physics::elastic: return "density";
    case Physics::acoustic: return "inverse_density";
    case Physics::electromagnetic: return "permeability";
  }
  return "";
}

inline std::optional<RegionConfig> parse_moduli(Reader& r, const Json& j, const std::string& path, Physics p) {
  r.expect_object(j, path);
  RegionConfig out;
  const Json* a = r.find(j, path, primal_key(p), true);
  const Json* b = r.find(j, path, dual_key(p), true);
  std::optional<CMatrix> pa, pb;
  if (a) pa = r.complex_matrix(*a, Reader::key(path, primal_key(p)));
  if (b) pb = r.complex_matrix(*b, Reader::key(path, dual_key(p)));
  if (!pa || !pb) return std::nullopt;
  out.primal = *pa;
  out.dual = *pb;
  if (p == Physics::electromagnetic) {
    Eigen::FullPivLU<CMatrix> lu(out.dual);
    if (out.dual.rows() != out.dual.cols() || !lu.isInvertible()) {
      r.fail(Reader::key(path, "permeability"), "must be an invertible square matrix");
      return std::nullopt;
    }
    out.dual = lu.inverse();
  }
  return out;
}

inline int region_ref(Reader& r, const Json& j, const std::string& path, const std::vector<std::string>& names) {
  if (j.is_number_integer()) {
    const int k = j.get<int>();
    if (k < 0 || k >= static_cast<int>(names.size())) {
      r.fail(path, "region index " + std::to_string(k) + " is not defined");
      return -1;
    }
    return k;
  }
  if (j.is_string()) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == j.get<std::string>()) return static_cast<int>(i);
    r.fail(path, "region '" + j.get<std::string>() + "' is not defined");
    return -1;
  }
  r.fail(path, "expected a region name or index");
  return -1;
}

inline void parse_box(Reader& r, const Json& j, const std::string& path, GeometryConfig::Box& b) {
  auto range = [&](const char* k, double& lo, double& hi) {
    if (const Json* v = r.find(j, path, k, false)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
        r.fail(Reader::key(path, k), "expected [min, max]");
        return;
      }
      lo = (*v)[0].get<double>();
      hi = (*v)[1].get<double>();
    }
  };
  range("x", b.x0, b.x1);
  range("y", b.y0, b.y1);
}

inline void parse_geometry(Reader& r, const Json& j, const std::string& path, const std::vector<std::string>& names,
                           GeometryConfig& g) {
  r.expect_object(j, path);
  const Json* type = r.find(j, path, "type", true);
  if (!type) return;
  auto t = r.string(*type, Reader::key(path, "type"));
  if (!t) return;
  if (*t == "interval") {
    g.kind = GeometryConfig::Kind::interval;
    r.unknown_keys(j, path, {"type", "nodes", "cell_regions", "x", "cells", "region_boxes"});
    if (const Json* n = r.find(j, path, "nodes", false)) {
      if (!n->is_array() || n->size() < 2) {
        r.fail(Reader::key(path, "nodes"), "expected an array of at least two coordinates");
      } else {
        for (std::size_t i = 0; i < n->size(); ++i)
          if (auto x = r.number((*n)[i], Reader::at(Reader::key(path, "nodes"), i))) g.nodes.push_back(*x);
        for (std::size_t i = 1; i < g.nodes.size(); ++i)
          if (!(g.nodes[i] > g.nodes[i - 1])) {
            r.fail(Reader::at(Reader::key(path, "nodes"), i), "node coordinates must increase");
            break;
          }
      }
      if (const Json* cr = r.find(j, path, "cell_regions", false)) {
        const std::string cp = Reader::key(path, "cell_regions");
        if (!cr->is_array() || cr->size() + 1 != g.nodes.size()) {
          r.fail(cp, "expected one region per cell");
        } else {
          for (std::size_t i = 0; i < cr->size(); ++i) g.cell_regions.push_back(region_ref(r, (*cr)[i], Reader::at(cp, i), names));
        }
      }
    } else {
      const Json* x = r.find(j, path, "x", true);
      const Json* c = r.find(j, path, "cells", true);
      if (x) {
        if (!x->is_array() || x->size() != 2 || !(*x)[0].is_number() || !(*x)[1].is_number())
          r.fail(Reader::key(path, "x"), "expected [x0, x1]");
        else {
          g.x0 = (*x)[0].get<double>();
          g.x1 = (*x)[1].get<double>();
          if (!(g.x1 > g.x0)) r.fail(Reader::key(path, "x"), "x1 must exceed x0");
        }
      }
      if (c) {
        if (auto n = r.integer(*c, Reader::key(path, "cells"))) {
          g.cells = *n;
          if (g.cells < 1) r.fail(Reader::key(path, "cells"), "must be positive");
        }
      }
    }
  } else if (*t == "rectangle") {
    g.kind = GeometryConfig::Kind::rectangle;
    r.unknown_keys(j, path, {"type", "x", "y", "nx", "ny", "region_boxes"});
    for (const char* k : {"x", "y"}) {
      const Json* v = r.find(j, path, k, true);
      if (!v) continue;
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
        r.fail(Reader::key(path, k), "expected [min, max]");
        continue;
      }
      double& lo = k[0] == 'x' ? g.x0 : g.y0;
      double& hi = k[0] == 'x' ? g.x1 : g.y1;
      lo = (*v)[0].get<double>();
      hi = (*v)[1].get<double>();
      if (!(hi > lo)) r.fail(Reader::key(path, k), "max must exceed min");
    }
    for (const char* k : {"nx", "ny"}) {
      const Json* v = r.find(j, path, k, true);
      if (!v) continue;
      if (auto n = r.integer(*v, Reader::key(path, k))) {
        (k[1] == 'x' ? g.nx : g.ny) = *n;
        if (*n < 1) r.fail(Reader::key(path, k), "must be positive");
      }
    }
  } else {
    r.fail(Reader::key(path, "type"), "expected 'interval' or 'rectangle'");
    return;
  }
  if (const Json* boxes = r.find(j, path, "region_boxes", false)) {
    const std::string bp = Reader::key(path, "region_boxes");
    if (!boxes->is_array()) {
      r.fail(bp, "expected an array");
    } else {
      for (std::size_t i = 0; i < boxes->size(); ++i) {
        const Json& b = (*boxes)[i];
        const std::string p = Reader::at(bp, i);
        r.expect_object(b, p);
        r.unknown_keys(b, p, {"region", "x", "y"});
        GeometryConfig::Box box;
        if (const Json* rg = r.find(b, p, "region", true)) box.region = region_ref(r, *rg, Reader::key(p, "region"), names);
        parse_box(r, b, p, box);
        g.region_boxes.push_back(box);
      }
    }
  }
}

inline std::optional<PotentialChoice> potential_choice(const std::string& s) {
  if (s == "prescribe_potential") return PotentialChoice::prescribe_potential;
  if (s == "target_flux") return PotentialChoice::target_flux;
  return std::nullopt;
}

inline std::optional<FluxChoice> flux_choice(const std::string& s) {
  if (s == "prescribe_flux") return FluxChoice::prescribe_flux;
  if (s == "target_potential") return FluxChoice::target_potential;
  return std::nullopt;
}

inline void parse_boundary(Reader& r, const Json& j, const std::string& path, std::vector<SideCondition>& out) {
  if (!j.is_object() || j.empty()) {
    r.fail(path, "expected an object with one entry per side");
    return;
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string p = Reader::key(path, it.key());
    const Json& s = it.value();
    r.expect_object(s, p);
    SideCondition c;
    c.side = it.key();
    const Json* type = r.find(s, p, "type", true);
    if (!type) continue;
    auto t = r.string(*type, Reader::key(p, "type"));
    if (!t) continue;
    if (*t == "dirichlet" || *t == "neumann") {
      r.unknown_keys(s, p, {"type", "value"});
      c.kind = *t == "dirichlet" ? SideCondition::Kind::dirichlet : SideCondition::Kind::neumann;
      if (const Json* v = r.find(s, p, "value", true))
        if (auto cv = r.complex_vector(*v, Reader::key(p, "value"))) c.value = *cv;
    } else if (*t == "selection") {
      r.unknown_keys(s, p, {"type", "components"});
      c.kind = SideCondition::Kind::selection;
      const Json* comps = r.find(s, p, "components", true);
      if (!comps) continue;
      const std::string cp = Reader::key(p, "components");
      if (!comps->is_array() || comps->empty()) {
        r.fail(cp, "expected an array with one selection per component");
        continue;
      }
      for (std::size_t i = 0; i < comps->size(); ++i) {
        const Json& e = (*comps)[i];
        const std::string ep = Reader::at(cp, i);
        r.expect_object(e, ep);
        r.unknown_keys(e, ep, {"first", "first_value", "second", "second_value"});
        BoundaryDof dof;
        if (const Json* f = r.find(e, ep, "first", true)) {
          auto ch = f->is_string() ? potential_choice(f->get<std::string>()) : std::nullopt;
          if (!ch) r.fail(Reader::key(ep, "first"), "expected 'prescribe_potential' or 'target_flux'");
          else dof.first = *ch;
        }
        if (const Json* f = r.find(e, ep, "second", true)) {
          auto ch = f->is_string() ? flux_choice(f->get<std::string>()) : std::nullopt;
          if (!ch) r.fail(Reader::key(ep, "second"), "expected 'prescribe_flux' or 'target_potential'");
          else dof.second = *ch;
        }
        r.opt_number(e, ep, "first_value", dof.first_value);
        r.opt_number(e, ep, "second_value", dof.second_value);
        c.selections.push_back(dof);
      }
    } else {
      r.fail(Reader::key(p, "type"), "expected 'dirichlet', 'neumann' or 'selection'");
      continue;
    }
    out.push_back(std::move(c));
  }
}

inline void parse_solver(Reader& r, const Json& j, const std::string& path, SolverConfig& s) {
  r.expect_object(j, path);
  r.unknown_keys(j, path, {"tolerance", "max_iterations", "preconditioner", "rotation", "seed", "oracle_check"});
  r.opt_number(j, path, "tolerance", s.tolerance);
  r.opt_number(j, path, "max_iterations", s.max_iterations);
  if (!(s.tolerance > 0.0)) r.fail(Reader::key(path, "tolerance"), "must be positive");
  if (s.max_iterations < 1) r.fail(Reader::key(path, "max_iterations"), "must be positive");
  if (const Json* v = r.find(j, path, "seed", false)) {
    if (!v->is_number_unsigned()) r.fail(Reader::key(path, "seed"), "expected a nonnegative integer");
    else s.seed = v->get<std::uint64_t>();
  }
  if (const Json* v = r.find(j, path, "preconditioner", false)) {
    const std::string s2 = v->is_string() ? v->get<std::string>() : "";
    if (s2 == "none") s.preconditioner = Preconditioner::none;
    else if (s2 == "block_jacobi") s.preconditioner = Preconditioner::block_jacobi;
    else r.fail(Reader::key(path, "preconditioner"), "expected 'none' or 'block_jacobi'");
  }
  if (const Json* v = r.find(j, path, "rotation", false)) {
    if (v->is_number()) {
      s.rotation.mode = RotationOptions::Mode::fixed;
      s.rotation.theta = v->get<double>();
    } else if (v->is_string() && v->get<std::string>() == "auto") {
      s.rotation.mode = RotationOptions::Mode::automatic;
    } else if (v->is_string() && v->get<std::string>() == "none") {
      s.rotation.mode = RotationOptions::Mode::none;
    } else {
      r.fail(Reader::key(path, "rotation"), "expected 'none', 'auto' or an angle in radians");
    }
  }
  if (const Json* v = r.find(j, path, "oracle_check", false)) {
    if (!v->is_boolean()) r.fail(Reader::key(path, "oracle_check"), "expected true or false");
    else s.oracle_check = v->get<bool>();
  }
}

/// Isotropic Mandel stiffness with Lame constants lambda, mu.
inline Matrix isotropic_mandel(double lambda, double mu) {
  Matrix c = Matrix::Zero(6, 6);
  c.topLeftCorner(3, 3).setConstant(lambda);
  for (int i = 0; i < 3; ++i) c(i, i) += 2.0 * mu;
  for (int i = 3; i < 6; ++i) c(i, i) = 2.0 * mu;
  return c;
}

inline void parse_greens(Reader& r, const Json& j, const std::string& path, GreensConfig& g) {
  r.expect_object(j, path);
  r.unknown_keys(j, path, {"medium", "omega", "points", "radii", "quadrature_order"});
  if (const Json* v = r.find(j, path, "omega", true))
    if (auto w = r.number(*v, Reader::key(path, "omega"))) {
      g.omega = *w;
      if (!(g.omega > 0.0)) r.fail(Reader::key(path, "omega"), "must be positive");
    }
  r.opt_number(j, path, "quadrature_order", g.quadrature_order);
  if (g.quadrature_order < 2) r.fail(Reader::key(path, "quadrature_order"), "must be at least 2");
  const Json* pts = r.find(j, path, "points", false);
  const Json* radii = r.find(j, path, "radii", false);
  if (!pts && !radii) r.fail(Reader::key(path, "points"), "one of 'points' or 'radii' is required");
  if (pts) {
    const std::string pp = Reader::key(path, "points");
    if (!pts->is_array()) {
      r.fail(pp, "expected an array of [x, y, z]");
    } else {
      for (std::size_t i = 0; i < pts->size(); ++i) {
        const Json& e = (*pts)[i];
        if (!e.is_array() || e.size() != 3 || !e[0].is_number() || !e[1].is_number() || !e[2].is_number()) {
          r.fail(Reader::at(pp, i), "expected [x, y, z]");
          continue;
        }
        g.points.emplace_back(e[0].get<double>(), e[1].get<double>(), e[2].get<double>());
      }
    }
  }
  if (radii) {
    const std::string rp = Reader::key(path, "radii");
    if (!radii->is_array()) {
      r.fail(rp, "expected an array of radii");
    } else {
      for (std::size_t i = 0; i < radii->size(); ++i)
        if (auto x = r.number((*radii)[i], Reader::at(rp, i))) g.points.emplace_back(*x, 0.0, 0.0);
    }
  }
  for (std::size_t i = 0; i < g.points.size(); ++i)
    if (g.points[i].norm() < 1e-8) r.fail(Reader::at(Reader::key(path, "points"), i), "evaluation point at the singularity");
  const Json* m = r.find(j, path, "medium", true);
  if (!m) return;
  const std::string mp = Reader::key(path, "medium");
  r.expect_object(*m, mp);
  const Json* type = r.find(*m, mp, "type", true);
  if (!type || !type->is_string()) {
    if (type) r.fail(Reader::key(mp, "type"), "expected a string");
    return;
  }
  g.medium_kind = type->get<std::string>();
  const std::size_t before = r.issues.size();
  try {
    if (g.medium_kind == "scalar") {
      r.unknown_keys(*m, mp, {"type", "d", "q"});
      r.opt_number(*m, mp, "d", g.d);
      r.opt_number(*m, mp, "q", g.q);
      if (!(g.d > 0.0)) r.fail(Reader::key(mp, "d"), "must be positive");
      if (!(g.q > 0.0)) r.fail(Reader::key(mp, "q"), "must be positive");
      if (r.issues.size() != before) return;
      const Matrix D = g.d * Matrix::Identity(3, 3);
      const Matrix Q = -g.q * Matrix::Identity(1, 1);
      g.medium = ComparisonMedium::from_dq(Matrix::Zero(3, 3), D, D, Matrix::Zero(1, 1), Q, Q);
    } else if (g.medium_kind == "isotropic") {
      r.unknown_keys(*m, mp, {"type", "lambda", "mu", "density"});
      double lambda = 0.0, mu = 0.0, rho = 0.0;
      for (auto [k, dst] : {std::pair<const char*, double*>{"lambda", &lambda}, {"mu", &mu}, {"density", &rho}})
        if (const Json* v = r.find(*m, mp, k, true))
          if (auto x = r.number(*v, Reader::key(mp, k))) *dst = *x;
      if (r.issues.size() != before) return;
      const Matrix D = isotropic_mandel(lambda, mu);
      const Matrix Q = -rho * Matrix::Identity(3, 3);
      g.medium = ComparisonMedium::from_dq(Matrix::Zero(6, 6), D, D, Matrix::Zero(3, 3), Q, Q);
    } else if (g.medium_kind == "dq") {
      r.unknown_keys(*m, mp, {"type", "D1", "D2", "D3", "Q1", "Q2", "Q3"});
      Matrix blocks[6];
      const char* names[6] = {"D1", "D2", "D3", "Q1", "Q2", "Q3"};
      for (int k = 0; k < 6; ++k)
        if (const Json* v = r.find(*m, mp, names[k], true))
          if (auto x = r.real_matrix(*v, Reader::key(mp, names[k]))) blocks[k] = *x;
      if (r.issues.size() != before) return;
      g.medium = ComparisonMedium::from_dq(blocks[0], blocks[1], blocks[2], blocks[3], blocks[4], blocks[5]);
      GreensMedium check(g.medium);
    } else {
      r.fail(Reader::key(mp, "type"), "expected 'scalar', 'isotropic' or 'dq'");
    }
  } catch (const std::exception& e) {
    r.fail(mp, e.what());
  }
}

}  // namespace config_detail

/// Parses a JSON run configuration; throws ConfigError listing every issue.
inline RunConfig parse_config(const Json& j, const std::filesystem::path& base_dir = {}) {
  using config_detail::Reader;
  Reader r;
  RunConfig c;
  c.base_dir = base_dir;
  if (!j.is_object()) throw ConfigError("$", "configuration must be a JSON object");
  r.unknown_keys(j, "", {"run_id", "units", "physics", "omega", "geometry", "regions", "boundary", "source",
                         "solver", "tomography", "hs", "greens"});
  if (const Json* v = r.find(j, "", "run_id", true))
    if (auto s = r.string(*v, "run_id")) {
      c.run_id = *s;
      const bool ok = !c.run_id.empty() && std::all_of(c.run_id.begin(), c.run_id.end(), [](char ch) {
        return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
      });
      if (!ok) r.fail("run_id", "use letters, digits, '_', '-' or '.'");
    }
  if (const Json* v = r.find(j, "", "units", true))
    if (auto s = r.string(*v, "units")) c.units = *s;

  c.has_problem = j.contains("physics") || j.contains("geometry") || j.contains("regions") || j.contains("boundary");
  if (!c.has_problem && !j.contains("greens"))
    r.fail("physics", "missing required key (a problem or a 'greens' section is required)");
  if (c.has_problem) {
    if (const Json* v = r.find(j, "", "physics", true)) {
      if (auto s = r.string(*v, "physics")) {
        try {
          c.physics = physics_from_string(*s);
        } catch (const std::invalid_argument&) {
          r.fail("physics", "expected 'elastic', 'acoustic' or 'electromagnetic'");
        }
      }
    }
    if (const Json* v = r.find(j, "", "omega", true))
      if (auto w = r.number(*v, "omega")) {
        c.omega = *w;
        if (!(c.omega > 0.0)) r.fail("omega", "must be positive");
      }
    std::vector<std::string> names;
    if (const Json* regs = r.find(j, "", "regions", true)) {
      if (!regs->is_array() || regs->empty()) {
        r.fail("regions", "expected a nonempty array of regions");
      } else {
        for (std::size_t i = 0; i < regs->size(); ++i) {
          const std::string p = Reader::at("regions", i);
          const Json& e = (*regs)[i];
          r.unknown_keys(e, p, {"name", config_detail::primal_key(c.physics), config_detail::dual_key(c.physics)});
          std::string name = "region" + std::to_string(i);
          if (const Json* n = r.find(e, p, "name", false))
            if (auto s = r.string(*n, Reader::key(p, "name"))) name = *s;
          auto m = config_detail::parse_moduli(r, e, p, c.physics);
          RegionConfig rc = m ? *m : RegionConfig{};
          rc.name = name;
          names.push_back(name);
          c.regions.push_back(rc);
        }
      }
    }
    if (const Json* g = r.find(j, "", "geometry", true)) config_detail::parse_geometry(r, *g, "geometry", names, c.geometry);
    if (const Json* b = r.find(j, "", "boundary", true)) config_detail::parse_boundary(r, *b, "boundary", c.boundary);
    if (const Json* s = r.find(j, "", "source", false)) {
      r.expect_object(*s, "source");
      r.unknown_keys(*s, "source", {"value", "x", "y"});
      if (const Json* v = r.find(*s, "source", "value", true))
        if (auto cv = r.complex_vector(*v, "source.value")) c.source.value = *cv;
      config_detail::parse_box(r, *s, "source", c.source.support);
    }
  }
  if (const Json* s = r.find(j, "", "solver", false)) config_detail::parse_solver(r, *s, "solver", c.solver);
  if (const Json* t = r.find(j, "", "tomography", false)) {
    TomographyConfig tc;
    r.expect_object(*t, "tomography");
    r.unknown_keys(*t, "tomography", {"trial_field", "random_trials", "trial_scale"});
    if (const Json* v = r.find(*t, "tomography", "trial_field", false))
      if (auto s = r.string(*v, "tomography.trial_field")) tc.trial_field = *s;
    r.opt_number(*t, "tomography", "random_trials", tc.random_trials);
    r.opt_number(*t, "tomography", "trial_scale", tc.trial_scale);
    if (tc.random_trials < 0) r.fail("tomography.random_trials", "must be nonnegative");
    c.tomography = tc;
  }
  if (const Json* h = r.find(j, "", "hs", false)) {
    HsConfig hc;
    r.expect_object(*h, "hs");
    r.unknown_keys(*h, "hs", {"comparison", "random_polarizations", "polarization_scale", "condensed_solver"});
    if (const Json* cmp = r.find(*h, "hs", "comparison", false)) {
      r.expect_object(*cmp, "hs.comparison");
      if (cmp->contains("scale") || cmp->contains("reference_region")) {
        r.unknown_keys(*cmp, "hs.comparison", {"scale", "reference_region"});
        r.opt_number(*cmp, "hs.comparison", "scale", hc.scale);
        if (!(hc.scale > 0.0)) r.fail("hs.comparison.scale", "must be positive");
        if (const Json* rr = r.find(*cmp, "hs.comparison", "reference_region", false)) {
          std::vector<std::string> names;
          for (const auto& rg : c.regions) names.push_back(rg.name);
          hc.reference_region = config_detail::region_ref(r, *rr, "hs.comparison.reference_region", names);
        }
      } else {
        r.unknown_keys(*cmp, "hs.comparison",
                       {config_detail::primal_key(c.physics), config_detail::dual_key(c.physics)});
        hc.moduli = config_detail::parse_moduli(r, *cmp, "hs.comparison", c.physics);
      }
    }
    r.opt_number(*h, "hs", "random_polarizations", hc.random_polarizations);
    r.opt_number(*h, "hs", "polarization_scale", hc.polarization_scale);
    if (hc.random_polarizations < 0) r.fail("hs.random_polarizations", "must be nonnegative");
    if (const Json* v = r.find(*h, "hs", "condensed_solver", false)) {
      const std::string s = v->is_string() ? v->get<std::string>() : "";
      if (s == "dense") hc.dense = true;
      else if (s != "cg") r.fail("hs.condensed_solver", "expected 'cg' or 'dense'");
    }
    c.hs = hc;
  }
  if (const Json* g = r.find(j, "", "greens", false)) {
    GreensConfig gc;
    config_detail::parse_greens(r, *g, "greens", gc);
    c.greens = gc;
  }
  if (!r.issues.empty()) throw ConfigError(r.issues);
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  const std::string text = io::read_text(path.string());
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j, path.parent_path());
}

// Problem construction ---------------------------------------------------------------

inline int geometry_dim(const RunConfig& c) { return c.geometry.kind == GeometryConfig::Kind::rectangle ? 2 : 1; }

/// Region moduli with scalar tensors expanded to the mesh dimension.
inline ComplexModuli region_moduli(const RunConfig& c, std::size_t i) {
  return expand_moduli({c.physics, c.regions[i].primal, c.regions[i].dual, c.omega}, geometry_dim(c));
}

inline std::shared_ptr<Mesh> build_mesh(const RunConfig& c) {
  const GeometryConfig& g = c.geometry;
  auto mesh = std::make_shared<Mesh>();
  if (g.kind == GeometryConfig::Kind::interval) {
    if (!g.nodes.empty()) {
      *mesh = Mesh::interval(g.nodes, g.cell_regions);
    } else {
      *mesh = Mesh::uniform_interval(g.x0, g.x1, g.cells);
    }
  } else {
    *mesh = Mesh::rectangle(g.x0, g.x1, g.y0, g.y1, g.nx, g.ny);
  }
  if (!g.region_boxes.empty()) {
    const std::vector<int> base = mesh->cell_region;
    mesh->assign_regions([&](const Vector& x) {
      int reg = -1;
      for (const auto& b : g.region_boxes)
        if (b.contains(x)) reg = b.region;
      return reg;
    });
    for (std::size_t k = 0; k < mesh->cell_region.size(); ++k)
      if (mesh->cell_region[k] < 0) mesh->cell_region[k] = k < base.size() ? base[k] : 0;
  }
  for (std::size_t k = 0; k < mesh->cell_region.size(); ++k)
    if (mesh->cell_region[k] < 0 || mesh->cell_region[k] >= static_cast<int>(c.regions.size()))
      throw ConfigError("geometry", "cell " + std::to_string(k) + " refers to an undefined region");
  return mesh;
}

/// Per-region passivity: every problem a region violates, named by region and tensor.
inline std::vector<ConfigIssue> passivity_issues(const RunConfig& c) {
  std::vector<ConfigIssue> out;
  for (std::size_t i = 0; i < c.regions.size(); ++i) {
    const std::string path = "regions[" + std::to_string(i) + "]";
    const std::string who = "region '" + c.regions[i].name + "'";
    const ComplexModuli m = region_moduli(c, i);
    try {
      validate_moduli(m);
    } catch (const ValidationError& e) {
      out.push_back({path, who + ": " + e.what()});
      continue;
    }
    const PassivityReport rep = check_passivity(m);
    const bool rotated = c.solver.rotation.mode != RotationOptions::Mode::none;
    if (rep.primal.classification != Definiteness::strict && !rotated)
      out.push_back({path + "." + config_detail::primal_key(c.physics),
                     who + ": imaginary part of " + rep.primal.tensor + " is " + to_string(rep.primal.classification) +
                         " (min eigenvalue " + io::format_double(rep.primal.min_eigenvalue) +
                         "); must be strictly positive definite"});
    const bool lossless = detail::max_abs(m.dual.imag()) == 0.0;
    if (rep.dual.classification != Definiteness::strict && !lossless && !rotated)
      out.push_back({path + "." + config_detail::dual_key(c.physics),
                     who + ": imaginary part of " + rep.dual.tensor + " is " + to_string(rep.dual.classification) +
                         " (min eigenvalue " + io::format_double(rep.dual.min_eigenvalue) +
                         "); must be strictly definite or exactly zero"});
  }
  return out;
}

/// Complex source vector in the layout expected by the discretization.
inline CVector build_force(const RunConfig& c, const Mesh& mesh) {
  const bool on_cells = c.physics == Physics::acoustic;
  const Eigen::Index stride = c.physics == Physics::electromagnetic ? 1 : mesh.dim;
  const Eigen::Index n = stride * (on_cells ? mesh.num_cells() : mesh.num_nodes());
  if (c.source.value.size() == 0) return CVector::Zero(n);
  CVector v = c.source.value;
  if (v.size() == 1 && stride > 1) v = CVector::Constant(stride, v(0));
  if (v.size() != stride)
    throw ConfigError("source.value", "expected " + std::to_string(stride) + " complex components");
  CVector f = CVector::Zero(n);
  const Eigen::Index ne = on_cells ? mesh.num_cells() : mesh.num_nodes();
  for (Eigen::Index e = 0; e < ne; ++e) {
    const Vector x = on_cells ? mesh.centroid(e) : Vector(mesh.nodes.row(e).transpose());
    if (c.source.support.contains(x)) f.segment(e * stride, stride) = v;
  }
  return f;
}

inline ProblemSpec build_problem_spec(const RunConfig& c) {
  if (!c.has_problem) throw ConfigError("physics", "this subcommand needs a problem definition");
  auto issues = passivity_issues(c);
  if (!issues.empty()) throw ConfigError(issues);
  ProblemSpec s;
  auto mesh = build_mesh(c);
  s.mesh = mesh;
  s.physics = c.physics;
  s.omega = c.omega;
  for (std::size_t i = 0; i < c.regions.size(); ++i) s.regions.push_back(region_moduli(c, i));
  s.boundary = c.boundary;
  s.force = build_force(c, *mesh);
  return s;
}

inline SolveOptions solve_options(const RunConfig& c) {
  SolveOptions o;
  o.relative_residual_tolerance = c.solver.tolerance;
  o.max_iterations = c.solver.max_iterations;
  o.preconditioner = c.solver.preconditioner;
  o.seed = c.solver.seed;
  return o;
}

}  // namespace wavemin
