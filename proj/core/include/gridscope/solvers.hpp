#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridscope/grid.hpp"
#include "gridscope/pfmodel.hpp"
#include "gridscope/sdp.hpp"

namespace gridscope {

// Hermitian matrices whose quadratic forms give |V_n|², p_n and q_n:
//   Mv[n] = e_n e_nᴴ
//   Mp[n] = ½ (Yᴴ e_n e_nᴴ + e_n e_nᴴ Y)
//   Mq[n] = (1/2j) (Yᴴ e_n e_nᴴ - e_n e_nᴴ Y)
struct SpecMatrices {
  std::vector<sdp::SparseHermitian> Mv;
  std::vector<sdp::SparseHermitian> Mp;
  std::vector<sdp::SparseHermitian> Mq;
  // Default objective -B.
  sdp::SparseHermitian Mobj;

  static SpecMatrices build(const AdmittanceMatrix& Y);
};

enum class NewtonStatus { converged, singular_jacobian, max_iters };
const char* to_string(NewtonStatus s);

struct NewtonOptions {
  double tol = 1e-10;
  int max_iters = 50;
  bool damping = true;
  int max_halvings = 20;
  // When no descent step exists, a Jacobian with a larger 2-norm condition
  // number is reported as singular.
  double singular_condition = 1e15;
};

struct NewtonResult {
  State v;
  State v1;
  NewtonStatus status = NewtonStatus::max_iters;
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;  // infinity norm
  double condition_estimate = 0.0;
};

// Newton-Raphson on the coupled equations with v_{i,0} = v'_{i,0} = 0.
// Non-square systems take Gauss-Newton (least-squares) steps.
NewtonResult solve_cpf_newton(const Grid& grid, const AdmittanceMatrix& Y, const CoupledSpec& spec,
                              const NewtonOptions& options = {},
                              const std::optional<std::pair<State, State>>& init = std::nullopt);

// Coupled SDP relaxation: two Hermitian blocks V, V' with magnitude and
// injection equalities per instant and p/q coupling on nonmetered buses.
sdp::Problem build_cpf_sdp(const Grid& grid, const SpecMatrices& mats, const CoupledSpec& spec,
                           const sdp::SparseHermitian& objective);

struct SdpCpfResult {
  State v;
  State v1;
  sdp::RankOne rank0;
  sdp::RankOne rank1;
  bool is_rank_one = false;
  double residual_norm = 0.0;  // infinity norm of the coupled residual at the extracted states
  bool success = false;
  sdp::Solution solution;
};

inline constexpr double kSdpSuccessResidual = 1e-5;

SdpCpfResult solve_cpf_sdp(const Grid& grid, const AdmittanceMatrix& Y, const CoupledSpec& spec,
                           const std::optional<sdp::SparseHermitian>& objective = std::nullopt,
                           const sdp::Options& options = {});

enum class MeasurementKind { vmag2, p, q };
const char* to_string(MeasurementKind k);
MeasurementKind measurement_kind_from_string(const std::string& s);

struct Measurement {
  MeasurementKind kind = MeasurementKind::vmag2;
  int bus = 0;
  int time = 0;  // 0 or 1
  double value = 0.0;
  double sigma = 1.0;
};

std::vector<Measurement> read_measurements_csv(std::istream& in);
void write_measurements_csv(std::ostream& out, const std::vector<Measurement>& ms);

enum class CostKind { wls, wlav };
const char* to_string(CostKind c);
CostKind cost_kind_from_string(const std::string& s);

struct CpsseConfig {
  CostKind cost = CostKind::wls;
  double alpha = 2.0;
  double coupling_sigma = 0.035;
  bool load_sign_constraints = true;
  double sign_margin = 1e-6;
};

struct CpsseResult {
  State v;
  State v1;
  sdp::RankOne rank0;
  sdp::RankOne rank1;
  bool is_rank_one = false;
  // Data-fitting part of the objective (sum of f(ε)), excluding the regularizer.
  double data_cost = 0.0;
  sdp::Solution solution;
};

sdp::Problem build_cpsse_sdp(const Grid& grid, const SpecMatrices& mats, const std::vector<Measurement>& ms,
                             const CpsseConfig& config);

CpsseResult solve_cpsse(const Grid& grid, const AdmittanceMatrix& Y, const std::vector<Measurement>& ms,
                        const CpsseConfig& config = {}, const sdp::Options& options = {});

// State from a PSD block that is not rank one: angles from the leading
// eigenvector, magnitudes sqrt(V_nn).
State magnitude_anchored_state(const Eigen::MatrixXcd& block);

// Root-mean-square error over all 4(N+1) real entries of the stacked pair.
double state_rmse(const State& v, const State& v1, const State& t, const State& t1);

}  // namespace gridscope
