// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "wavemin/core.hpp"

namespace wavemin {

/// Conforming simplicial mesh: intervals in 1D, triangles in 2D.
struct Mesh {
  int dim = 1;
  Matrix nodes;                          // num_nodes x dim
  std::vector<std::array<int, 3>> cells;  // 1D cells use the first two entries
  std::vector<int> cell_region;

  // Filled by finalize().
  Vector cell_volume;
  Vector node_volume;       // lumped: each cell gives |c| / (dim + 1) to its vertices
  std::vector<int> boundary_nodes;
  std::vector<int> boundary_index;  // node -> position in boundary_nodes, or -1
  std::vector<std::vector<std::string>> boundary_sides;  // per boundary node
  Vector boundary_weight;  // measure of the boundary patch around each boundary node
  std::vector<std::vector<double>> boundary_side_weight;  // same, split per side tag
  std::vector<std::vector<int>> node_cells;

  Eigen::Index num_nodes() const { return nodes.rows(); }
  Eigen::Index num_cells() const { return static_cast<Eigen::Index>(cells.size()); }
  Eigen::Index num_boundary() const { return static_cast<Eigen::Index>(boundary_nodes.size()); }
  int vertices_per_cell() const { return dim + 1; }

  int num_regions() const {
    int r = 0;
    for (int c : cell_region) r = std::max(r, c + 1);
    return r;
  }

  Vector centroid(Eigen::Index c) const {
    Vector x = Vector::Zero(dim);
    for (int k = 0; k < vertices_per_cell(); ++k) x += nodes.row(cells[c][k]).transpose();
    return x / vertices_per_cell();
  }

  /// Boundary measure of node position b attributed to side `name`.
  double side_weight(std::size_t b, const std::string& name) const {
    for (std::size_t k = 0; k < boundary_sides[b].size(); ++k)
      if (boundary_sides[b][k] == name) return boundary_side_weight[b][k];
    return 0.0;
  }

  /// Nodes on side `name`.
  std::vector<int> side_nodes(const std::string& name) const {
    std::vector<int> out;
    for (std::size_t b = 0; b < boundary_nodes.size(); ++b)
      for (const auto& s : boundary_sides[b])
        if (s == name) out.push_back(boundary_nodes[b]);
    return out;
  }

  /// Signed triangle area or interval length.
  double raw_volume(Eigen::Index c) const {
    const auto& v = cells[c];
    if (dim == 1) return nodes(v[1], 0) - nodes(v[0], 0);
    const double ax = nodes(v[1], 0) - nodes(v[0], 0), ay = nodes(v[1], 1) - nodes(v[0], 1);
    const double bx = nodes(v[2], 0) - nodes(v[0], 0), by = nodes(v[2], 1) - nodes(v[0], 1);
    return 0.5 * (ax * by - ay * bx);
  }

  /// Computes volumes and boundary data; `sides` tags every boundary node.
  void finalize(const std::function<std::vector<std::string>(const Vector&)>& sides) {
    if (dim != 1 && dim != 2) throw ValidationError("mesh dimension must be 1 or 2");
    if (cell_region.size() != cells.size())
      throw ValidationError("mesh: one region tag per cell required");
    const auto nc = num_cells();
    const auto nn = num_nodes();
    cell_volume.resize(nc);
    node_volume = Vector::Zero(nn);
    node_cells.assign(nn, {});
    double vmax = 0.0;
    for (Eigen::Index c = 0; c < nc; ++c) {
      for (int k = 0; k < vertices_per_cell(); ++k) {
        const int v = cells[c][k];
        if (v < 0 || v >= nn) throw ValidationError("mesh: cell references unknown node");
      }
      double v = raw_volume(c);
      if (v < 0) {
        if (dim == 1) std::swap(cells[c][0], cells[c][1]);
        else std::swap(cells[c][1], cells[c][2]);
        v = -v;
      }
      cell_volume(c) = v;
      vmax = std::max(vmax, v);
    }
    for (Eigen::Index c = 0; c < nc; ++c) {
      if (!(cell_volume(c) > 1e-12 * vmax))
        throw ValidationError("mesh: degenerate cell " + std::to_string(c));
      for (int k = 0; k < vertices_per_cell(); ++k) {
        node_volume(cells[c][k]) += cell_volume(c) / vertices_per_cell();
        node_cells[cells[c][k]].push_back(static_cast<int>(c));
      }
    }
    for (Eigen::Index n = 0; n < nn; ++n)
      if (node_cells[n].empty()) throw ValidationError("mesh: node " + std::to_string(n) + " is in no cell");

    // Boundary facets are those owned by exactly one cell.
    std::map<std::vector<int>, int> facet_count;
    auto facets_of = [&](Eigen::Index c) {
      std::vector<std::vector<int>> f;
      const auto& v = cells[c];
      if (dim == 1) {
        f.push_back({v[0]});
        f.push_back({v[1]});
      } else {
        for (int k = 0; k < 3; ++k) {
          std::vector<int> e{v[k], v[(k + 1) % 3]};
          std::sort(e.begin(), e.end());
          f.push_back(e);
        }
      }
      return f;
    };
    for (Eigen::Index c = 0; c < nc; ++c)
      for (auto& f : facets_of(c)) ++facet_count[f];
    std::vector<std::vector<int>> bdy_facets;
    std::vector<char> on_bdy(nn, 0);
    for (const auto& [f, count] : facet_count) {
      if (count > 2) throw ValidationError("mesh: non-conforming facet");
      if (count != 1) continue;
      bdy_facets.push_back(f);
      for (int v : f) on_bdy[v] = 1;
    }
    boundary_nodes.clear();
    boundary_index.assign(nn, -1);
    boundary_sides.clear();
    for (Eigen::Index n = 0; n < nn; ++n) {
      if (!on_bdy[n]) continue;
      boundary_index[n] = static_cast<int>(boundary_nodes.size());
      boundary_nodes.push_back(static_cast<int>(n));
      auto tags = sides(nodes.row(n).transpose());
      if (tags.empty())
        throw ValidationError("mesh: boundary node " + std::to_string(n) + " has no side tag");
      boundary_sides.push_back(std::move(tags));
    }
    boundary_side_weight.assign(boundary_nodes.size(), {});
    for (std::size_t b = 0; b < boundary_nodes.size(); ++b)
      boundary_side_weight[b].assign(boundary_sides[b].size(), 0.0);
    std::vector<double> bw(boundary_nodes.size(), 0.0);
    for (const auto& f : bdy_facets) {
      const double len = dim == 1 ? 1.0 : (nodes.row(f[0]) - nodes.row(f[1])).norm();
      const double share = len / static_cast<double>(f.size());
      for (int v : f) {
        const int b = boundary_index[v];
        bw[b] += share;
        // The facet lies on every side shared by all of its vertices.
        for (std::size_t k = 0; k < boundary_sides[b].size(); ++k) {
          bool common = true;
          for (int w : f) {
            const auto& t = boundary_sides[boundary_index[w]];
            common = common && std::find(t.begin(), t.end(), boundary_sides[b][k]) != t.end();
          }
          if (common) boundary_side_weight[b][k] += share;
        }
      }
    }
    boundary_weight = Eigen::Map<Vector>(bw.data(), static_cast<Eigen::Index>(bw.size()));
  }

  /// 1D mesh from sorted node coordinates; sides "left" and "right".
  static Mesh interval(const std::vector<double>& x, std::vector<int> regions = {}) {
    if (x.size() < 2) throw ValidationError("interval mesh needs at least two nodes");
    Mesh m;
    m.dim = 1;
    m.nodes.resize(static_cast<Eigen::Index>(x.size()), 1);
    for (std::size_t i = 0; i < x.size(); ++i) m.nodes(static_cast<Eigen::Index>(i), 0) = x[i];
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
      m.cells.push_back({static_cast<int>(i), static_cast<int>(i + 1), -1});
    if (regions.empty()) regions.assign(m.cells.size(), 0);
    m.cell_region = std::move(regions);
    const double lo = x.front(), hi = x.back();
    m.finalize([lo, hi](const Vector& p) {
      std::vector<std::string> s;
      if (p(0) == lo) s.push_back("left");
      if (p(0) == hi) s.push_back("right");
      return s;
    });
    return m;
  }

  static Mesh uniform_interval(double a, double b, int num_cells) {
    if (num_cells < 1) throw ValidationError("interval mesh needs at least one cell");
    std::vector<double> x(num_cells + 1);
    for (int i = 0; i <= num_cells; ++i) x[i] = a + (b - a) * i / num_cells;
    x.back() = b;
    return interval(x);
  }

  /// Rectangle split into nx*ny squares, each cut into two triangles.
  /// Sides "left", "right", "bottom", "top"; corners carry two tags.
  static Mesh rectangle(double x0, double x1, double y0, double y1, int nx, int ny) {
    if (nx < 1 || ny < 1) throw ValidationError("rectangle mesh needs nx, ny >= 1");
    Mesh m;
    m.dim = 2;
    m.nodes.resize(static_cast<Eigen::Index>(nx + 1) * (ny + 1), 2);
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        m.nodes(id(i, j), 0) = i == nx ? x1 : x0 + (x1 - x0) * i / nx;
        m.nodes(id(i, j), 1) = j == ny ? y1 : y0 + (y1 - y0) * j / ny;
      }
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        m.cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
        m.cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
      }
    m.cell_region.assign(m.cells.size(), 0);
    m.finalize([=](const Vector& p) {
      std::vector<std::string> s;
      if (p(0) == x0) s.push_back("left");
      if (p(0) == x1) s.push_back("right");
      if (p(1) == y0) s.push_back("bottom");
      if (p(1) == y1) s.push_back("top");
      return s;
    });
    return m;
  }

  /// Reassigns regions from cell centroids.
  void assign_regions(const std::function<int(const Vector&)>& region_of) {
    for (Eigen::Index c = 0; c < num_cells(); ++c) cell_region[c] = region_of(centroid(c));
  }
};

}  // namespace wavemin
