#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridscope/grid.hpp"

namespace gridscope {

// Rectangular bus voltages v = vr + j vi, buses 0..N.
struct State {
  Eigen::VectorXd vr;
  Eigen::VectorXd vi;

  static State flat(int bus_count);
  static State from_complex(const Eigen::VectorXcd& v);
  // Stacked [vr; vi] of length 2(N+1).
  static State from_stacked(const Eigen::VectorXd& v);

  int size() const { return static_cast<int>(vr.size()); }
  Eigen::VectorXcd complex() const;
  Eigen::VectorXd stacked() const;
};

double vmag2(const State& state, int bus);
Eigen::VectorXd vmag2(const State& state);

struct Injections {
  Eigen::VectorXd p;
  Eigen::VectorXd q;
};

// p + jq = diag(v) conj(Y v).
Injections injections(const State& state, const AdmittanceMatrix& Y);

// Derivatives of |V|^2, q and p with respect to the stacked state [vr; vi].
struct Jacobians {
  Eigen::MatrixXd m;
  Eigen::MatrixXd q;
  Eigen::MatrixXd p;
};

Jacobians jacobians(const State& state, const AdmittanceMatrix& Y);

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Specified values at one time instant: |V|^2 on S and M buses, p and q on
// C and M buses.
struct SpecificationSet {
  std::map<int, double> vmag2;
  std::map<int, double> p;
  std::map<int, double> q;
};

struct CoupledSpec {
  SpecificationSet t0;
  SpecificationSet t1;
};

// Reads the specified quantities a state induces under the grid's classification.
SpecificationSet specify(const Grid& grid, const AdmittanceMatrix& Y, const State& state);
CoupledSpec specify(const Grid& grid, const AdmittanceMatrix& Y, const State& v, const State& v1);
void validate_spec(const Grid& grid, const SpecificationSet& spec);
void validate_spec(const Grid& grid, const CoupledSpec& spec);

enum class JacobianForm {
  // v_{i,0} and v'_{i,0} eliminated: 4N+2 columns, no angle rows.
  reduced,
  // Full 2(N+1) columns per instant with one reference-angle row per instant.
  analysis,
};

// Row and column bookkeeping for the coupled system. Per instant the rows are
// [angle row (analysis only); m on S∪M; q on C∪M; p on C∪M], the coupling
// rows p_O then q_O sit between the two instants.
struct CoupledLayout {
  JacobianForm form;
  int bus_count = 0;
  std::vector<int> magnitude_buses;
  std::vector<int> injection_buses;
  std::vector<int> coupled_buses;

  CoupledLayout(const Grid& grid, JacobianForm form);

  int angle_rows() const { return form == JacobianForm::analysis ? 1 : 0; }
  int instant_rows() const;
  int coupling_rows() const { return 2 * static_cast<int>(coupled_buses.size()); }
  int rows() const { return 2 * instant_rows() + coupling_rows(); }
  int instant_cols() const;
  int cols() const { return 2 * instant_cols(); }
  // Row offset of the coupling block and of the second instant.
  int coupling_offset() const { return instant_rows(); }
  int second_offset() const { return instant_rows() + coupling_rows(); }
};

// Residual of the coupled power-flow equations without angle rows:
// [m-m̂; q-q̂; p-p̂](v), [p_O(v)-p_O(v'); q_O(v)-q_O(v')], [m-m̂; q-q̂; p-p̂](v').
Eigen::VectorXd coupled_residual(const Grid& grid, const AdmittanceMatrix& Y, const State& v, const State& v1,
                                 const CoupledSpec& spec);

struct CoupledJacobian {
  Eigen::MatrixXd matrix;
  // J_A spans the first instant's rows plus the p_O coupling rows, and the
  // first instant's columns.
  Eigen::Index split_row = 0;
  Eigen::Index split_col = 0;

  Eigen::MatrixXd block_a() const { return matrix.topLeftCorner(split_row, split_col); }
  Eigen::MatrixXd block_b() const { return matrix.topRightCorner(split_row, matrix.cols() - split_col); }
  Eigen::MatrixXd block_c() const {
    return matrix.bottomLeftCorner(matrix.rows() - split_row, split_col);
  }
  Eigen::MatrixXd block_d() const {
    return matrix.bottomRightCorner(matrix.rows() - split_row, matrix.cols() - split_col);
  }
};

CoupledJacobian coupled_jacobian(const Grid& grid, const AdmittanceMatrix& Y, const State& v, const State& v1,
                                 JacobianForm form);

// Column selection of a stacked state [vr; vi] for one instant in the given form.
std::vector<int> instant_columns(int bus_count, JacobianForm form);

}  // namespace gridscope
