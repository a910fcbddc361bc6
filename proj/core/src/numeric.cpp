#include "gridscope/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace gridscope {

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return Eigen::VectorXd();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues();
}

int numeric_rank(const Eigen::MatrixXd& m, double rel_tol) {
  const Eigen::VectorXd s = singular_values(m);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s(i) > rel_tol * s(0);
  return r;
}

double condition_number(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd s = singular_values(m);
  if (s.size() == 0) return std::numeric_limits<double>::infinity();
  const double smin = s(s.size() - 1);
  if (m.rows() != m.cols() || smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t trial) {
  // splitmix64 over a mix of both inputs
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (trial + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - static_cast<double>(lo);
  if (std::isinf(values[lo]) || std::isinf(values[hi])) return w > 0.0 ? values[hi] : values[lo];
  return (1.0 - w) * values[lo] + w * values[hi];
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

}  // namespace gridscope
