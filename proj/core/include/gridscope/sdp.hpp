#pragma once

#include <complex>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

// Dense primal-dual interior-point solver for
//
//   min  sum_b tr(C_b X_b) + c_fᵀ x_f + c_lᵀ x_l
//   s.t. sum_b tr(A_ib X_b) + f_iᵀ x_f + a_iᵀ x_l  (= | <=)  rhs_i
//        X_b Hermitian PSD, x_l >= 0, x_f free.
//
// Hermitian blocks are solved through the real embedding
//   X -> [[Re X, -Im X], [Im X, Re X]],
// with every coefficient matrix embedded the same way and halved, so that
// tr(C X) = tr(C' X') holds exactly for the embedded pair.
namespace gridscope::sdp {

using cplx = std::complex<double>;

// Sparse Hermitian matrix stored by its upper triangle.
class SparseHermitian {
 public:
  SparseHermitian() = default;
  explicit SparseHermitian(int dim) : dim_(dim) {}
  static SparseHermitian from_dense(const Eigen::MatrixXcd& m, double drop_tol = 0.0);

  // Adds v at (r, c) and conj(v) at (c, r). Diagonal entries must be real.
  void add(int r, int c, cplx v);

  int dim() const { return dim_; }
  bool empty() const { return entries_.empty(); }
  const std::map<std::pair<int, int>, cplx>& entries() const { return entries_; }

  Eigen::MatrixXcd dense() const;
  // Re tr(this * X) for Hermitian X.
  double trace_product(const Eigen::MatrixXcd& X) const;
  double frobenius_norm() const;
  bool is_real() const;

 private:
  int dim_ = 0;
  std::map<std::pair<int, int>, cplx> entries_;
};

enum class Relation { equal, less_equal };

struct Constraint {
  std::vector<std::pair<int, SparseHermitian>> blocks;
  std::vector<std::pair<int, double>> free_terms;
  std::vector<std::pair<int, double>> nonneg_terms;
  Relation relation = Relation::equal;
  double rhs = 0.0;
};

struct BlockSpec {
  int dim = 0;
  // Real symmetric blocks skip the complex embedding.
  bool hermitian = true;
};

struct Problem {
  std::vector<BlockSpec> blocks;
  std::vector<SparseHermitian> objective;
  std::vector<double> free_cost;
  std::vector<double> nonneg_cost;
  std::vector<Constraint> constraints;

  int add_block(int dim, bool hermitian = true);
  int add_free(double cost = 0.0);
  int add_nonneg(double cost = 0.0);
  int free_count() const { return static_cast<int>(free_cost.size()); }
  int nonneg_count() const { return static_cast<int>(nonneg_cost.size()); }
  // Throws std::invalid_argument on inconsistent dimensions or non-Hermitian data.
  void validate() const;
};

enum class Status { optimal, max_iters, infeasible, numerical_failure };
const char* to_string(Status s);

struct Residuals {
  double primal = 0.0;  // ||b - A(x)|| / (1 + ||b||)
  double dual = 0.0;    // ||c - Aᵀy - z|| / (1 + ||c||)
  double gap = 0.0;     // |pobj - dobj| / (1 + |pobj| + |dobj|)
};

struct IterateRecord {
  double primal_objective;
  double dual_objective;
  Residuals residuals;
  double mu;
  double step_primal;
  double step_dual;
};

struct Solution {
  Status status = Status::numerical_failure;
  int iterations = 0;
  std::vector<Eigen::MatrixXcd> blocks;
  std::vector<Eigen::MatrixXcd> dual_blocks;
  Eigen::VectorXd free_values;
  Eigen::VectorXd nonneg_values;
  Eigen::VectorXd nonneg_duals;
  // Slack of each <= row (zero for equality rows).
  Eigen::VectorXd slacks;
  Eigen::VectorXd dual;
  double objective_value = 0.0;
  double dual_objective = 0.0;
  Residuals residuals;
  std::vector<IterateRecord> history;
};

struct Options {
  double tol_feas = 1e-7;
  double tol_gap = 1e-7;
  int max_iters = 200;
  // Stop with numerical_failure after this many iterations without a 10%
  // improvement of the best scaled KKT merit; the best iterate is returned.
  int stall_iters = 40;
  bool record_history = false;
};

Solution solve(const Problem& problem, const Options& options = {});

// KKT measures evaluated directly on the Hermitian problem, independent of
// the solver's internal embedding and scaling.
struct KktReport {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double complementarity = 0.0;
  double min_primal_eigenvalue = 0.0;
  double min_dual_eigenvalue = 0.0;
};

KktReport kkt_residuals(const Problem& problem, const Solution& solution);

struct RankOne {
  Eigen::VectorXcd vector;
  bool is_rank_one = false;
  double eigen_ratio = 0.0;
  double leading_eigenvalue = 0.0;
};

// Leading eigenpair sqrt(λ1) u1, rotated so entry 0 is real and nonnegative.
RankOne extract_rank_one(const Eigen::MatrixXcd& block, double tol_ratio = 1e-5);

Eigen::MatrixXd embed(const Eigen::MatrixXcd& m);
Eigen::MatrixXcd unembed(const Eigen::MatrixXd& m);

// Writes the embedded real problem in SDPA sparse format
// (max tr(F0 Y) s.t. tr(Fi Y) = c_i, Y PSD); see docs/sdpa-dump.md.
void write_sdpa(const Problem& problem, std::ostream& out);

}  // namespace gridscope::sdp
