#pragma once

// CSV traces, plot data, field snapshots and content digests. Every number
// is written with 17 significant digits, so reading a file back restores
// the exact doubles.

#include "plateplast/config.hpp"
#include "plateplast/evolution.hpp"

#include <openssl/evp.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace plateplast {

inline std::string format_number(double x) { return detail::fmt(x); }

inline const char* kTraceHeader =
    "step,t,elastic,hardening,dissipation_cum,work_cum,balance_residual,stability_margin,"
    "el_residual,inner_iters";
inline const char* kPlotHeader = "t,elastic,hardening,dissipation_cum,work_cum,balance_residual";
inline const char* kPointHeader = "cell_i,cell_j,layer,x1,x2,x3,p11,p22,p12,p13,p23,E11,E22,E12";
inline const char* kNodalHeader = "node_i,node_j,x1,x2,u1,u2,v,dv1,dv2,dv12";

inline void write_trace_csv(std::ostream& out, const EvolutionTrace& trace) {
  out << kTraceHeader << "\n";
  for (const auto& r : trace)
    out << r.step << "," << format_number(r.t) << "," << format_number(r.elastic) << ","
        << format_number(r.hardening) << "," << format_number(r.dissipation_cum) << ","
        << format_number(r.work_cum) << "," << format_number(r.balance_residual) << ","
        << format_number(r.stability_margin) << "," << format_number(r.el_residual) << ","
        << r.inner_iters << "\n";
}

/// Energy series for external plotting, one row per trace row.
inline void emit_plotdata(std::ostream& out, const EvolutionTrace& trace) {
  out << kPlotHeader << "\n";
  for (const auto& r : trace)
    out << format_number(r.t) << "," << format_number(r.elastic) << ","
        << format_number(r.hardening) << "," << format_number(r.dissipation_cum) << ","
        << format_number(r.work_cum) << "," << format_number(r.balance_residual) << "\n";
}

namespace detail {

inline std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string f;
  std::istringstream in(line);
  while (std::getline(in, f, ',')) out.push_back(trim(f));
  return out;
}

// Rows of a numeric CSV whose header must equal `header`.
inline std::vector<std::vector<double>> read_numeric_csv(std::istream& in, const std::string& header) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != header)
    throw ParseError(1, "", "expected header '" + header + "'");
  const std::size_t cols = csv_fields(header).size();
  std::vector<std::vector<double>> rows;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    const auto f = csv_fields(line);
    if (f.size() != cols)
      throw ParseError(n, "", "expected " + std::to_string(cols) + " columns");
    std::vector<double> row;
    for (const auto& s : f) {
      try {
        row.push_back(to_double(s));
      } catch (const BadValue& e) {
        throw ParseError(n, "", e.reason);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline std::vector<std::array<double, 6>> read_plotdata(std::istream& in) {
  std::vector<std::array<double, 6>> out;
  for (const auto& r : detail::read_numeric_csv(in, kPlotHeader)) {
    std::array<double, 6> a;
    std::copy(r.begin(), r.end(), a.begin());
    out.push_back(a);
  }
  return out;
}

/// One row per quadrature point: position, p and the driving strain E.
inline void write_point_snapshot(std::ostream& out, const Discretization& disc,
                                 const PlateState& s, Alpha alpha) {
  const Grid& g = disc.grid();
  const auto e = assemble_strain(disc, s, alpha);
  out << kPointHeader << "\n";
  for_each_inplane_point(g, [&](int ci, int cj, int gp) {
    const auto [x1, x2] = g.gp_position(ci, cj, gp);
    for (int layer = 0; layer < g.nz(); ++layer) {
      const int idx = g.point_index(g.cell(ci, cj), gp, layer);
      const DeviatoricTensor& p = s.p[idx];
      out << ci << "," << cj << "," << layer << "," << format_number(x1) << ","
          << format_number(x2) << "," << format_number(g.layer_x3(layer)) << ","
          << format_number(p.p11()) << "," << format_number(p.p22()) << ","
          << format_number(p.p12()) << "," << format_number(p.p13()) << ","
          << format_number(p.p23()) << "," << format_number(e[idx](0, 0)) << ","
          << format_number(e[idx](1, 1)) << "," << format_number(e[idx](0, 1)) << "\n";
    }
  });
}

/// One row per node: u and the four Hermite DOFs of v.
inline void write_nodal_snapshot(std::ostream& out, const Grid& g, const PlateState& s) {
  out << kNodalHeader << "\n";
  for (int j = 0; j <= g.ny(); ++j)
    for (int i = 0; i <= g.nx(); ++i) {
      const int n = g.node(i, j);
      out << i << "," << j << "," << format_number(i * g.hx()) << ","
          << format_number(j * g.hy()) << "," << format_number(s.u(2 * n)) << ","
          << format_number(s.u(2 * n + 1));
      for (int m = 0; m < 4; ++m) out << "," << format_number(s.v(4 * n + m));
      out << "\n";
    }
}

/// Rebuilds a state from the two snapshot files written for grid g.
inline PlateState read_snapshot(std::istream& nodal, std::istream& points, const Grid& g) {
  PlateState s = PlateState::zero(g);
  const auto nrows = detail::read_numeric_csv(nodal, kNodalHeader);
  if (nrows.size() != static_cast<std::size_t>(g.num_nodes()))
    throw GridMismatch("nodal snapshot has " + std::to_string(nrows.size()) + " rows, grid has " +
                       std::to_string(g.num_nodes()) + " nodes");
  for (const auto& r : nrows) {
    const int i = static_cast<int>(r[0]), j = static_cast<int>(r[1]);
    if (i < 0 || i > g.nx() || j < 0 || j > g.ny() || r[0] != i || r[1] != j)
      throw GridMismatch("nodal snapshot index outside the grid");
    const int n = g.node(i, j);
    s.u(2 * n) = r[4];
    s.u(2 * n + 1) = r[5];
    for (int m = 0; m < 4; ++m) s.v(4 * n + m) = r[6 + m];
  }
  const auto prows = detail::read_numeric_csv(points, kPointHeader);
  if (prows.size() != static_cast<std::size_t>(g.num_points()))
    throw GridMismatch("point snapshot has " + std::to_string(prows.size()) +
                       " rows, grid has " + std::to_string(g.num_points()) + " points");
  // Rows follow storage order, so the in-plane point is recovered by counting.
  for (std::size_t k = 0; k < prows.size(); ++k) {
    const auto& r = prows[k];
    const int layer = static_cast<int>(k % g.nz());
    const int cell = static_cast<int>(k / (g.nz() * g.points_per_cell()));
    if (r[2] != layer || g.cell(static_cast<int>(r[0]), static_cast<int>(r[1])) != cell)
      throw GridMismatch("point snapshot rows are not in storage order");
    s.p[k] = DeviatoricTensor(r[6], r[7], r[8], r[9], r[10]);
  }
  return s;
}

/// Lowercase hex SHA-256 of a file's bytes.
inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

}  // namespace plateplast
