#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridscope/grid.hpp"
#include "gridscope/observability.hpp"
#include "gridscope/pfmodel.hpp"
#include "gridscope/sdp.hpp"
#include "gridscope/solvers.hpp"

namespace gridscope {

enum class PfSign { leading, lagging, mixed };
const char* to_string(PfSign s);
PfSign pf_sign_from_string(std::string_view s);

struct Scenario {
  std::string name;
  std::vector<int> metered;
  std::vector<int> nonmetered;
  std::vector<int> pv_buses;
  double pv_capacity_multiple = 4.0;
  double power_factor = 0.9;
  PfSign pf_sign = PfSign::mixed;
};

Scenario parse_scenario(std::string_view json_text);
Scenario load_scenario(const std::filesystem::path& path);
void validate_scenario(const Scenario& s, const Grid& grid);

// Reclassifies the grid and places PV of pv_capacity_multiple times the
// active base load on every metered and listed PV bus.
Grid apply_scenario(const Grid& base, const Scenario& s);

class PowerFlowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PowerFlowOptions {
  int max_iters = 30;
  double tol = 1e-11;
};

// Standard power flow: V_0 = 1∠0, complex injections given at buses 1..N
// (entry 0 is ignored).
State forward_simulate(const Grid& grid, const AdmittanceMatrix& Y, const Eigen::VectorXcd& injections,
                       const PowerFlowOptions& options = {});

// Net injections of the bare loads, -base_load.
Eigen::VectorXcd load_injections(const Grid& grid);

// PV injection p (1 ± j tan(acos(pf))); lagging supplies reactive power.
std::complex<double> pv_injection(double p, double power_factor, bool lagging);

enum class SamplerMode { max_pv_lagging, uniform_pv, beta_perturbed };
const char* to_string(SamplerMode m);
SamplerMode sampler_mode_from_string(std::string_view s);

// Draws injection pairs for (v, v'). State v always has every PV unit at
// capacity with lagging power factor. State v' depends on the mode:
//   max_pv_lagging  v' = v
//   uniform_pv      PV output uniform in [0, capacity], power-factor sign
//                   per v1_sign (mixed: random per draw)
//   beta_perturbed  PV output capacity * (1 - beta z_n), z_n ~ U[0, z_max], lagging
// Loads are identical at both instants.
struct StateSampler {
  SamplerMode mode = SamplerMode::uniform_pv;
  double beta = 1.0;
  double z_max = 0.1;
  double power_factor = 0.9;
  PfSign v1_sign = PfSign::mixed;

  void validate() const;
  std::pair<Eigen::VectorXcd, Eigen::VectorXcd> draw_injections(const Grid& grid, std::uint64_t seed) const;
  std::optional<std::pair<State, State>> sample(const Grid& grid, const AdmittanceMatrix& Y, std::uint64_t seed) const;
};

StatePairSampler make_sampler(const Grid& grid, const AdmittanceMatrix& Y, const StateSampler& sampler);

// JSON forms used by the CLI. A coupled spec is
//   {"t0": {"vmag2": {"0": 1.0, ...}, "p": {...}, "q": {...}}, "t1": {...}}
// and a state pair is {"v": {"re": [...], "im": [...]}, "v1": {...}}.
std::string coupled_spec_to_json(const CoupledSpec& spec);
CoupledSpec parse_coupled_spec(std::string_view json_text);
std::string state_pair_to_json(const State& v, const State& v1);
std::pair<State, State> parse_state_pair(std::string_view json_text);

// ---- Condition-number study ----

struct ConditionStudyResult {
  std::string name_a;
  std::string name_b;
  ConditionStudy a;
  ConditionStudy b;
};

ConditionStudyResult run_condition_study(const Grid& base, const Scenario& a, const Scenario& b, int trials,
                                         std::uint64_t seed, const StateSampler& sampler = {});
void write_condition_csv(std::ostream& out, const ConditionStudyResult& r, int trials, std::uint64_t seed,
                         const StateSampler& sampler);

// ---- Success probability of the SDP CPF solver ----

struct SuccessPoint {
  double beta = 0.0;
  int successes = 0;
  int realizations = 0;
  int sampling_failures = 0;
  double rate = 0.0;
};

// Realization r uses the same random draws for every beta.
std::vector<SuccessPoint> run_success_probability(const Grid& base, const Scenario& s, const std::vector<double>& betas,
                                                  int realizations, std::uint64_t seed,
                                                  const sdp::Options& options = {});
void write_success_csv(std::ostream& out, const std::vector<SuccessPoint>& pts, const Scenario& s, int realizations,
                       std::uint64_t seed);

// ---- Synthetic time series ----

struct SeriesOptions {
  double interval_minutes = 15.0;
  double start_hour = 0.0;
  double end_hour = 24.0;
  double power_factor = 0.95;
};

// Per-bus demand and solar output, buses as rows and timestamps as columns.
// Demand is consumption (positive); the net injection is solar - demand.
struct TimeSeriesSet {
  double interval_minutes = 15.0;
  std::vector<double> hours;
  Eigen::MatrixXd p_demand;
  Eigen::MatrixXd q_demand;
  Eigen::MatrixXd solar;

  int steps() const { return static_cast<int>(hours.size()); }
  Eigen::VectorXcd injections(int step) const;
};

enum class ProfileKind { residential, slow_demand, cloudy_solar };

// Unit-peak profile of one kind over the given hours.
Eigen::VectorXd synthetic_profile(ProfileKind kind, const std::vector<double>& hours, std::uint64_t seed);

// Residential demand on every non-substation bus scaled by its base load,
// slowly varying demand on nonmetered buses, and cloudy-day solar on
// solar_buses scaled by their PV capacity.
TimeSeriesSet generate_synthetic_timeseries(const Grid& grid, const std::vector<int>& solar_buses, std::uint64_t seed,
                                            const SeriesOptions& options = {});
void write_timeseries_csv(std::ostream& out, const TimeSeriesSet& ts, std::uint64_t seed);

// ---- CPSSE study ----

struct NoiseModel {
  double sigma_v = 0.01;
  double sigma_inj = 0.015;
};

// Measurements of a state pair: |V|² on S and M, p and q on C and M, at
// both instants, with sigma = scale * nominal. Gaussian noise of the same
// sigma is added when noisy is true.
std::vector<Measurement> synthesize_measurements(const Grid& grid, const AdmittanceMatrix& Y, const State& v,
                                                 const State& v1, const NoiseModel& noise, double scale, bool noisy,
                                                 std::uint64_t seed);

// Median per-measurement SNR 20 log10(|value| / sigma) in dB.
double median_snr_db(const std::vector<Measurement>& ms);

struct CpsseStudyOptions {
  CpsseConfig config;
  NoiseModel noise;
  int draws = 20;
  // Sigma multipliers, one sweep point each (larger multiplier, lower SNR).
  // The default spans 20 dB upward from the nominal noise in 5 dB steps.
  std::vector<double> noise_scales{1.0, 0.5623413251903491, 0.31622776601683794, 0.17782794100389229, 0.1};
  // Timestamp index t; truth uses instants t and t+1.
  int step = -1;
  std::uint64_t seed = 1;
  sdp::Options solver;
};

struct CpssePoint {
  double noise_scale = 0.0;
  double snr_db = 0.0;
  double mean_rmse = 0.0;
  int draws = 0;
  int rank_one = 0;
  int failures = 0;
};

std::pair<State, State> truth_pair(const Grid& grid, const AdmittanceMatrix& Y, const TimeSeriesSet& ts, int step);

std::vector<CpssePoint> run_cpsse_snr_sweep(const Grid& base, const Scenario& s, const TimeSeriesSet& ts,
                                            const CpsseStudyOptions& opts);

struct CpsseDayPoint {
  int step = 0;
  double hour = 0.0;
  double rmse_wls = 0.0;
  double rmse_wlav = 0.0;
};

// One estimate per consecutive timestamp pair inside [from_hour, to_hour).
std::vector<CpsseDayPoint> run_cpsse_day(const Grid& base, const Scenario& s, const TimeSeriesSet& ts,
                                         const CpsseStudyOptions& opts, double from_hour = 10.0, double to_hour = 16.0);

void write_cpsse_sweep_csv(std::ostream& out, const std::vector<CpssePoint>& pts, const Scenario& s,
                           const CpsseStudyOptions& opts);
void write_cpsse_day_csv(std::ostream& out, const std::vector<CpsseDayPoint>& pts, const Scenario& s,
                         const CpsseStudyOptions& opts);

}  // namespace gridscope
