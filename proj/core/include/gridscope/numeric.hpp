#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace gridscope {

// Singular values counted as nonzero when sigma_i > rel_tol * sigma_max.
inline constexpr double kRankTolerance = 1e-8;

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m);
int numeric_rank(const Eigen::MatrixXd& m, double rel_tol = kRankTolerance);
// 2-norm condition number; +inf when the smallest singular value is zero.
double condition_number(const Eigen::MatrixXd& m);

// Deterministic per-trial seed derived from a base seed and trial index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t trial);

double median(std::vector<double> values);
double quantile(std::vector<double> values, double q);

}  // namespace gridscope
