#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gridscope/sdp.hpp"

namespace gridscope::sdp::detail {

// Upper-triangle entry of a real symmetric coefficient (r <= c).
struct SymEntry {
  int r;
  int c;
  double v;
};

// Coefficient of one constraint on one real block, with a dense copy
// restricted to its support for Schur assembly.
struct BlockCoef {
  int con = 0;
  std::vector<SymEntry> entries;
  std::vector<int> support;
  Eigen::MatrixXd local;
};

struct RealProblem {
  int m = 0;
  std::vector<int> dims;
  // Hermitian blocks carry twice the squared norm of their embedding.
  std::vector<double> norm_weight;
  std::vector<std::vector<BlockCoef>> coefs;
  std::vector<Eigen::MatrixXd> C;
  int nl = 0;  // nonnegative scalars followed by one slack per <= row
  int nf = 0;
  Eigen::MatrixXd Al;
  Eigen::MatrixXd F;
  Eigen::VectorXd cl;
  Eigen::VectorXd cf;
  Eigen::VectorXd b;
  std::vector<int> slack_of;
};

BlockCoef make_coef(int con, std::vector<SymEntry> entries);
RealProblem to_real(const Problem& p);
Eigen::VectorXd row_norms(const RealProblem& rp);
void scale(RealProblem& rp, const Eigen::VectorXd& row_scale, double obj_scale);

}  // namespace gridscope::sdp::detail
