// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wavemin/fields.hpp"
#include "wavemin/greens.hpp"
#include "wavemin/solver.hpp"

namespace wavemin::io {

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ValidationError(where + ": '" + s + "' is not a number");
  }
  if (used != s.size()) throw ValidationError(where + ": '" + s + "' is not a number");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Mesh tables -----------------------------------------------------------------------

inline std::string node_table(const Mesh& m) {
  std::string s = m.dim == 1 ? "id,x\n" : "id,x,y\n";
  for (Eigen::Index i = 0; i < m.num_nodes(); ++i) {
    s += std::to_string(i);
    for (int k = 0; k < m.dim; ++k) s += "," + format_double(m.nodes(i, k));
    s += "\n";
  }
  return s;
}

inline std::string cell_table(const Mesh& m) {
  std::string s = m.dim == 1 ? "id,n0,n1,region\n" : "id,n0,n1,n2,region\n";
  for (Eigen::Index c = 0; c < m.num_cells(); ++c) {
    s += std::to_string(c);
    for (int k = 0; k < m.vertices_per_cell(); ++k) s += "," + std::to_string(m.cells[c][k]);
    s += "," + std::to_string(m.cell_region[c]) + "\n";
  }
  return s;
}

// Field tables ----------------------------------------------------------------------

/// Rows "entity,component,value". Entities are cells, nodes or boundary nodes
/// depending on the component; the component column is "<name>[<index>]".
inline std::string field_table(const FieldLayout& lay, const Vector& values, bool dual = false) {
  if (values.size() != lay.size()) throw ValidationError("field_table: size does not match layout");
  std::string s = "entity,component,value\n";
  for (int k = 0; k < 5; ++k) {
    const Eigen::Index stride = k < 2 ? lay.s1 : (k < 4 ? lay.s2 : 1);
    const Eigen::Index n = lay.comp_size(k) / std::max<Eigen::Index>(stride, 1);
    const std::string name = FieldLayout::component_name(lay.physics, k, dual);
    for (Eigen::Index e = 0; e < n; ++e)
      for (Eigen::Index i = 0; i < stride; ++i)
        s += std::to_string(e) + "," + name + "[" + std::to_string(i) + "]," +
             format_double(values(lay.offset(k) + e * stride + i)) + "\n";
  }
  return s;
}

/// Parses a field table written by field_table for the same layout. Every
/// entry must appear exactly once.
inline Vector parse_field_table(const std::string& text, const FieldLayout& lay, bool dual = false) {
  Vector v = Vector::Zero(lay.size());
  std::vector<char> seen(static_cast<std::size_t>(lay.size()), 0);
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (header) {
      header = false;
      if (line.rfind("entity,", 0) == 0) continue;
    }
    const std::string where = "field table line " + std::to_string(lineno);
    const auto cols = split_csv_line(line);
    if (cols.size() != 3) throw ValidationError(where + ": expected 3 columns");
    const auto lb = cols[1].rfind('[');
    if (lb == std::string::npos || cols[1].back() != ']')
      throw ValidationError(where + ": component must read name[index]");
    const std::string name = cols[1].substr(0, lb);
    int k = -1;
    for (int j = 0; j < 5; ++j)
      if (name == FieldLayout::component_name(lay.physics, j, dual)) k = j;
    if (k < 0) throw ValidationError(where + ": unknown component '" + name + "'");
    const long e = std::stol(cols[0]);
    const long i = std::stol(cols[1].substr(lb + 1, cols[1].size() - lb - 2));
    const Eigen::Index stride = k < 2 ? lay.s1 : (k < 4 ? lay.s2 : 1);
    const Eigen::Index n = lay.comp_size(k) / std::max<Eigen::Index>(stride, 1);
    if (e < 0 || e >= n || i < 0 || i >= stride) throw ValidationError(where + ": index out of range");
    const Eigen::Index idx = lay.offset(k) + e * stride + i;
    if (seen[idx]) throw ValidationError(where + ": duplicate entry");
    seen[idx] = 1;
    v(idx) = parse_double(cols[2], where);
  }
  for (std::size_t j = 0; j < seen.size(); ++j)
    if (!seen[j]) throw ValidationError("field table is missing entry " + std::to_string(j));
  return v;
}

/// Complex fields: rows "field,entity,index,re,im".
inline std::string complex_table(const ComplexSolution& s, const Discretization& d) {
  std::string out = "field,entity,index,re,im\n";
  auto emit = [&](const char* name, const CVector& v, Eigen::Index stride) {
    for (Eigen::Index j = 0; j < v.size(); ++j)
      out += std::string(name) + "," + std::to_string(j / stride) + "," + std::to_string(j % stride) + "," +
             format_double(v(j).real()) + "," + format_double(v(j).imag()) + "\n";
  };
  const Eigen::Index np = d.nphi();
  const Eigen::Index nq = d.nq();
  emit("potential", s.potential, np);
  emit("flux", s.flux, nq);
  emit("aux", s.aux, nq);
  emit("trace", s.trace, np);
  return out;
}

// Histories and Green's tables --------------------------------------------------------

inline std::string history_table(const std::vector<IterationRecord>& h) {
  std::string s = "iteration,residual,functional\n";
  for (const auto& r : h)
    s += std::to_string(r.iteration) + "," + format_double(r.residual) + "," + format_double(r.functional) + "\n";
  return s;
}

inline std::string greens_csv(const std::vector<GreensTableRow>& rows) {
  std::string s = "x,y,z,row,col,value\n";
  for (const auto& r : rows)
    s += format_double(r.x(0)) + "," + format_double(r.x(1)) + "," + format_double(r.x(2)) + "," +
         std::to_string(r.row) + "," + std::to_string(r.col) + "," + format_double(r.value) + "\n";
  return s;
}

inline std::vector<GreensTableRow> parse_greens_csv(const std::string& text) {
  std::vector<GreensTableRow> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.rfind("x,", 0) == 0) continue;
    const auto c = split_csv_line(line);
    const std::string where = "greens table line " + std::to_string(lineno);
    if (c.size() != 6) throw ValidationError(where + ": expected 6 columns");
    GreensTableRow r;
    for (int k = 0; k < 3; ++k) r.x(k) = parse_double(c[k], where);
    r.row = std::stoi(c[3]);
    r.col = std::stoi(c[4]);
    r.value = parse_double(c[5], where);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace wavemin::io
