#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridscope/grid.hpp"
#include "gridscope/pfmodel.hpp"

namespace gridscope {

struct CountingConditions {
  bool single = false;   // M >= 2 O
  bool coupled = false;  // M >= O
};

CountingConditions counting_conditions(const Grid& grid);

struct DisjointPaths {
  int count = 0;
  // Each path runs from an O bus through C buses to an M bus.
  std::vector<std::vector<int>> paths;
};

// Maximum number of vertex-disjoint O -> M paths in the feeder with the
// substation removed. Interior vertices must be conventional buses.
DisjointPaths max_vertex_disjoint_paths(const Grid& grid);

struct ObservabilityReport {
  bool counting_single_ok = false;
  bool counting_coupled_ok = false;
  int nonmetered_count = 0;
  int max_disjoint_paths = 0;
  bool criterion_satisfied = false;
  std::vector<std::vector<int>> witness_paths;
};

ObservabilityReport check_criterion(const Grid& grid);
std::string to_json(const ObservabilityReport& report, int indent = 2);

// Sparsity pattern with optional values that vanish off the pattern.
class PatternMatrix {
 public:
  PatternMatrix(int rows, int cols) : rows_(rows), cols_(cols), row_nz_(static_cast<std::size_t>(rows)) {}
  static PatternMatrix from_matrix(const Eigen::MatrixXd& m, double zero_tol = 0.0);

  void set(int r, int c);
  bool has(int r, int c) const;
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t nonzeros() const;
  const std::vector<int>& row(int r) const { return row_nz_.at(static_cast<std::size_t>(r)); }

  void set_values(Eigen::MatrixXd values);
  const std::optional<Eigen::MatrixXd>& values() const { return values_; }

  // Independent fill: uniform magnitudes in [1, 2] with random signs.
  Eigen::MatrixXd random_fill(std::mt19937_64& rng) const;

 private:
  int rows_;
  int cols_;
  std::vector<std::vector<int>> row_nz_;
  std::optional<Eigen::MatrixXd> values_;
};

class GenericRankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Maximum bipartite matching between rows and columns (Hopcroft-Karp).
int max_bipartite_matching(const PatternMatrix& pattern);

// Randomized generic rank: maximum numeric rank over `trials` independent
// fills. The result is cross-checked against the maximum matching, which
// bounds the generic rank from above and attains it.
int generic_rank(const PatternMatrix& pattern, int trials = 3, std::uint64_t seed = 0);

// Nonzero pattern of the analysis-form coupled Jacobian at a generic state pair.
PatternMatrix coupled_jacobian_pattern(const Grid& grid, std::uint64_t seed = 0);

// Flat-profile reduced block: Aᵀ_{·,C∪M} diag(b + g²/b) A_{·,C∪O}.
// Rows are ordered C then M, columns C then O.
struct FlatReducedJacobian {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd modified_susceptance;
  std::vector<int> row_buses;
  std::vector<int> col_buses;
  Eigen::Index split_row = 0;  // number of C rows
  Eigen::Index split_col = 0;  // number of C columns

  Eigen::MatrixXd block_a() const { return matrix.topLeftCorner(split_row, split_col); }
  Eigen::MatrixXd block_b() const { return matrix.topRightCorner(split_row, matrix.cols() - split_col); }
  Eigen::MatrixXd block_c() const { return matrix.bottomLeftCorner(matrix.rows() - split_row, split_col); }
  Eigen::MatrixXd block_d() const {
    return matrix.bottomRightCorner(matrix.rows() - split_row, matrix.cols() - split_col);
  }
};

FlatReducedJacobian flat_reduced_jacobian(const Grid& grid);

// The same block obtained by eliminating the M-bus magnitude rows and the
// non-coupled columns of J_A at the flat profile through a Schur complement
// of G and B. Used to cross-check the incidence form.
Eigen::MatrixXd flat_reduced_jacobian_schur(const Grid& grid, const AdmittanceMatrix& Y);

// J_A at the flat profile (analysis form, first instant rows plus p_O rows).
Eigen::MatrixXd flat_jacobian_a(const Grid& grid, const AdmittanceMatrix& Y);

// Draws a state pair; returns nullopt when the underlying power flow fails.
using StatePairSampler = std::function<std::optional<std::pair<State, State>>(std::uint64_t trial_seed)>;

struct ConditionStudy {
  std::vector<double> condition_numbers;  // successful trials in trial order
  std::vector<int> trial_index;
  int skipped = 0;
};

ConditionStudy condition_number_study(const Grid& grid, const AdmittanceMatrix& Y, const StatePairSampler& sampler,
                                      int trials, std::uint64_t seed);

struct Classification {
  std::vector<int> metered;
  std::vector<int> nonmetered;
};

// Random disjoint M/O sets on buses 1..N with 1 <= |O| <= max_nonmetered and
// |O| <= |M| <= |O| + extra_metered.
Classification random_classification(int n, std::mt19937_64& rng, int max_nonmetered = 5, int extra_metered = 2);

}  // namespace gridscope
