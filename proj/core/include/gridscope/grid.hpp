#pragma once

#include <complex>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace gridscope {

enum class BusClass { substation, metered, conventional, nonmetered };

char to_char(BusClass c);
BusClass bus_class_from_string(std::string_view s);

struct Bus {
  int index = 0;
  BusClass cls = BusClass::conventional;
  // Demand in per-unit. The net injection of a bare load is -base_load.
  std::complex<double> base_load{0.0, 0.0};
  double pv_capacity = 0.0;
};

struct Line {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;

  std::complex<double> admittance() const { return 1.0 / std::complex<double>(r, x); }
};

struct GridHeader {
  std::string name;
  double base_mva = 1.0;
  double base_kv = 1.0;
};

enum class GridErrorKind {
  parse,
  empty_grid,
  bus_index,
  missing_substation,
  multiple_substations,
  negative_pv_capacity,
  unknown_bus,
  self_loop,
  bad_impedance,
  duplicate_line,
  cycle,
  disconnected,
  substation_degree,
};

const char* to_string(GridErrorKind kind);

class GridError : public std::runtime_error {
 public:
  GridError(GridErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  GridErrorKind kind() const noexcept { return kind_; }

 private:
  GridErrorKind kind_;
};

// Radial feeder. Immutable once constructed; the constructor validates
// every structural invariant and throws GridError on the first violation.
class Grid {
 public:
  Grid(GridHeader header, std::vector<Bus> buses, std::vector<Line> lines);

  const GridHeader& header() const { return header_; }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  const Bus& bus(int n) const { return buses_.at(static_cast<std::size_t>(n)); }

  int n() const { return static_cast<int>(buses_.size()) - 1; }
  int bus_count() const { return static_cast<int>(buses_.size()); }

  // Tree structure rooted at the substation.
  int parent(int bus) const { return parent_.at(static_cast<std::size_t>(bus)); }
  const std::vector<int>& neighbors(int bus) const { return adj_.at(static_cast<std::size_t>(bus)); }
  // Index of the line joining bus to its parent (-1 for the substation).
  int parent_line(int bus) const { return parent_line_.at(static_cast<std::size_t>(bus)); }
  // Child endpoint of line l, i.e. the endpoint farther from the substation.
  int line_child(int l) const { return line_child_.at(static_cast<std::size_t>(l)); }
  int line_parent(int l) const { return parent(line_child(l)); }

  // Buses of one class, ascending.
  std::vector<int> buses_of(BusClass c) const;
  std::vector<int> metered() const { return buses_of(BusClass::metered); }
  std::vector<int> nonmetered() const { return buses_of(BusClass::nonmetered); }
  std::vector<int> conventional() const { return buses_of(BusClass::conventional); }

  // Copy with buses re-labelled: listed metered/nonmetered buses get M/O,
  // every other non-substation bus becomes C.
  Grid reclassified(const std::vector<int>& metered, const std::vector<int>& nonmetered) const;
  Grid with_pv_capacity(const std::vector<double>& capacity) const;

 private:
  GridHeader header_;
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> parent_;
  std::vector<int> parent_line_;
  std::vector<int> line_child_;
};

Grid parse_grid(std::string_view json_text);
Grid load_grid(const std::filesystem::path& path);
std::string grid_summary(const Grid& grid);

struct AdmittanceMatrix {
  Eigen::MatrixXd G;
  Eigen::MatrixXd B;

  Eigen::MatrixXcd complex() const;
  int size() const { return static_cast<int>(G.rows()); }
};

AdmittanceMatrix build_admittance(const Grid& grid);

// Reduced bus-branch incidence: rows follow the grid's line order, columns
// are buses 1..N. Each line is oriented from its parent endpoint (-1) to its
// child endpoint (+1); the substation column is dropped.
Eigen::MatrixXd incidence_matrix(const Grid& grid);

// Per-line conductance g and susceptance b (g + jb = 1 / (r + jx)).
Eigen::VectorXd line_conductances(const Grid& grid);
Eigen::VectorXd line_susceptances(const Grid& grid);

}  // namespace gridscope
