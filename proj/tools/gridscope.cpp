#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gridscope/grid.hpp"
#include "gridscope/harness.hpp"
#include "gridscope/numeric.hpp"
#include "gridscope/observability.hpp"
#include "gridscope/pfmodel.hpp"
#include "gridscope/sdp.hpp"
#include "gridscope/solvers.hpp"

#ifndef GRIDSCOPE_DEFAULT_DATA_DIR
#define GRIDSCOPE_DEFAULT_DATA_DIR "data"
#endif

namespace gs = gridscope;
using json = nlohmann::json;

namespace {

// Configuration problems exit with 2, everything else that goes wrong with 1.
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 1;

std::string default_feeder() { return std::string(GRIDSCOPE_DEFAULT_DATA_DIR) + "/ieee34.json"; }

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::invalid_argument("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

json state_json(const gs::State& v) { return {{"re", v.vr}, {"im", v.vi}}; }

json rank_json(const gs::sdp::RankOne& r) {
  return {{"is_rank_one", r.is_rank_one}, {"eigen_ratio", r.eigen_ratio}, {"leading_eigenvalue", r.leading_eigenvalue}};
}

json solution_json(const gs::sdp::Solution& s) {
  return {{"status", gs::sdp::to_string(s.status)},
          {"iterations", s.iterations},
          {"objective", s.objective_value},
          {"dual_objective", s.dual_objective},
          {"primal_infeasibility", s.residuals.primal},
          {"dual_infeasibility", s.residuals.dual},
          {"gap", s.residuals.gap}};
}

void dump_sdp(const std::string& path, const gs::sdp::Problem& p) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  gs::sdp::write_sdpa(p, out);
}

struct Common {
  std::string feeder = default_feeder();
  std::string scenario;
  std::string out;
};

void add_feeder(CLI::App* app, Common& c) {
  app->add_option("feeder", c.feeder, "Feeder JSON")->capture_default_str();
}

gs::Grid scenario_grid(const Common& c, gs::Scenario* scenario_out = nullptr) {
  const gs::Grid base = gs::load_grid(c.feeder);
  if (c.scenario.empty()) return base;
  const gs::Scenario s = gs::load_scenario(c.scenario);
  if (scenario_out) *scenario_out = s;
  return gs::apply_scenario(base, s);
}

gs::Scenario require_scenario(const Common& c) {
  if (c.scenario.empty()) throw std::invalid_argument("--scenario is required");
  return gs::load_scenario(c.scenario);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    out.push_back(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument("bad number '" + item + "'");
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Observability analysis, coupled power flow and coupled state estimation for radial feeders"};
  app.require_subcommand(1);

  Common common;

  // validate
  auto* validate = app.add_subcommand("validate", "Print a grid summary or the first validation error");
  add_feeder(validate, common);
  validate->add_option("--scenario", common.scenario, "Scenario JSON applied before printing");

  // check-obs
  auto* check = app.add_subcommand("check-obs", "Evaluate the observability criterion for a scenario");
  add_feeder(check, common);
  check->add_option("--scenario", common.scenario, "Scenario JSON")->required();

  // condnum
  std::string scen_b;
  int trials = 1000;
  std::uint64_t seed = 1;
  std::string sampler_mode = "uniform_pv";
  double beta = 1.0;
  std::string pf_sign = "mixed";
  double power_factor = 0.9;
  auto* condnum = app.add_subcommand("condnum", "Condition numbers of the coupled Jacobian for two scenarios");
  add_feeder(condnum, common);
  condnum->add_option("--scenario", common.scenario, "First scenario")->required();
  condnum->add_option("--scenario-b", scen_b, "Second scenario (defaults to the first)");
  condnum->add_option("--trials", trials)->capture_default_str();
  condnum->add_option("--seed", seed)->capture_default_str();
  condnum->add_option("--sampler", sampler_mode, "max_pv_lagging | uniform_pv | beta_perturbed")->capture_default_str();
  condnum->add_option("--pf-sign", pf_sign, "leading | lagging | mixed")->capture_default_str();
  condnum->add_option("--power-factor", power_factor)->capture_default_str();
  condnum->add_option("--beta", beta, "Perturbation scale for beta_perturbed")->capture_default_str();
  condnum->add_option("--out", common.out, "Output file");

  // make-case
  double noise_scale = 1.0;
  bool noiseless = false;
  std::string spec_out, truth_out, meas_out;
  auto* make_case = app.add_subcommand("make-case", "Sample a consistent state pair, its spec and measurements");
  add_feeder(make_case, common);
  make_case->add_option("--scenario", common.scenario, "Scenario JSON")->required();
  make_case->add_option("--seed", seed)->capture_default_str();
  make_case->add_option("--sampler", sampler_mode)->capture_default_str();
  make_case->add_option("--beta", beta)->capture_default_str();
  make_case->add_option("--pf-sign", pf_sign)->capture_default_str();
  make_case->add_option("--noise-scale", noise_scale, "Multiplier on the nominal sigmas")->capture_default_str();
  make_case->add_flag("--noiseless", noiseless, "Do not add noise to the measurements");
  make_case->add_option("--spec-out", spec_out);
  make_case->add_option("--truth-out", truth_out);
  make_case->add_option("--measurements-out", meas_out);

  // cpf
  std::string spec_path, method = "newton", dump_path, init_path;
  auto* cpf = app.add_subcommand("cpf", "Solve the coupled power flow");
  add_feeder(cpf, common);
  cpf->add_option("--scenario", common.scenario, "Scenario JSON")->required();
  cpf->add_option("--spec", spec_path, "Coupled spec JSON")->required();
  cpf->add_option("--method", method, "newton | sdp")->capture_default_str()->check(CLI::IsMember({"newton", "sdp"}));
  cpf->add_option("--init", init_path, "Initial state pair JSON (newton)");
  cpf->add_option("--dump-sdp", dump_path, "Write the assembled SDP in sparse text form");
  cpf->add_option("--out", common.out);

  // cpsse
  std::string meas_path, truth_path, cost = "wls";
  double alpha = 2.0, coupling_sigma = 0.035;
  bool no_sign = false;
  auto* cpsse = app.add_subcommand("cpsse", "Coupled state estimation from measurements");
  add_feeder(cpsse, common);
  cpsse->add_option("--scenario", common.scenario, "Scenario JSON")->required();
  cpsse->add_option("--measurements", meas_path, "Measurement CSV")->required();
  cpsse->add_option("--cost", cost)->capture_default_str()->check(CLI::IsMember({"wls", "wlav"}));
  cpsse->add_option("--alpha", alpha)->capture_default_str();
  cpsse->add_option("--coupling-sigma", coupling_sigma)->capture_default_str();
  cpsse->add_flag("--no-load-sign", no_sign, "Drop the load-sign constraints on nonmetered buses");
  cpsse->add_option("--truth", truth_path, "True state pair JSON; adds RMSE to the output");
  cpsse->add_option("--dump-sdp", dump_path);
  cpsse->add_option("--out", common.out);

  // simulate-series
  double interval = 15.0;
  auto* series = app.add_subcommand("simulate-series", "Synthetic demand and solar time series");
  add_feeder(series, common);
  series->add_option("--scenario", common.scenario, "Scenario JSON")->required();
  series->add_option("--seed", seed)->capture_default_str();
  series->add_option("--interval", interval, "Minutes between timestamps")->capture_default_str();
  series->add_option("--out", common.out);

  // success-prob
  std::string betas = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
  int realizations = 50;
  auto* success = app.add_subcommand("success-prob", "Success rate of the SDP coupled power flow versus beta");
  add_feeder(success, common);
  success->add_option("--scenario", common.scenario, "Scenario JSON")->required();
  success->add_option("--betas", betas, "Comma-separated beta values")->capture_default_str();
  success->add_option("--realizations", realizations)->capture_default_str();
  success->add_option("--seed", seed)->capture_default_str();
  success->add_option("--out", common.out);

  // cpsse-study
  std::string study_mode = "snr", scales = "1,0.5623413251903491,0.31622776601683794,0.17782794100389229,0.1";
  int draws = 20, step = -1;
  double from_hour = 10.0, to_hour = 16.0;
  auto* study = app.add_subcommand("cpsse-study", "RMSE of coupled state estimation over an SNR sweep or a day");
  add_feeder(study, common);
  study->add_option("--scenario", common.scenario, "Scenario JSON")->required();
  study->add_option("--mode", study_mode, "snr | day")->capture_default_str()->check(CLI::IsMember({"snr", "day"}));
  study->add_option("--cost", cost)->capture_default_str()->check(CLI::IsMember({"wls", "wlav"}));
  study->add_option("--alpha", alpha)->capture_default_str();
  study->add_option("--coupling-sigma", coupling_sigma)->capture_default_str();
  study->add_option("--noise-scales", scales, "Sigma multipliers (snr); the first is used for day")->capture_default_str();
  study->add_option("--draws", draws)->capture_default_str();
  study->add_option("--step", step, "Timestamp index for snr mode (default: nearest noon)");
  study->add_option("--from-hour", from_hour)->capture_default_str();
  study->add_option("--to-hour", to_hour)->capture_default_str();
  study->add_option("--seed", seed)->capture_default_str();
  study->add_option("--interval", interval)->capture_default_str();
  study->add_option("--out", common.out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      const gs::Grid g = scenario_grid(common);
      std::cout << gs::grid_summary(g) << "\n";
      return 0;
    }
    if (check->parsed()) {
      const gs::Grid g = scenario_grid(common);
      std::cout << gs::to_json(gs::check_criterion(g)) << "\n";
      return 0;
    }
    if (condnum->parsed()) {
      const gs::Grid base = gs::load_grid(common.feeder);
      const gs::Scenario a = require_scenario(common);
      const gs::Scenario b = scen_b.empty() ? a : gs::load_scenario(scen_b);
      gs::StateSampler sampler;
      sampler.mode = gs::sampler_mode_from_string(sampler_mode);
      sampler.beta = beta;
      sampler.v1_sign = gs::pf_sign_from_string(pf_sign);
      sampler.power_factor = power_factor;
      const auto r = gs::run_condition_study(base, a, b, trials, seed, sampler);
      Output out(common.out);
      gs::write_condition_csv(out.stream(), r, trials, seed, sampler);
      return 0;
    }
    if (make_case->parsed()) {
      gs::Scenario s;
      const gs::Grid g = scenario_grid(common, &s);
      const gs::AdmittanceMatrix Y = gs::build_admittance(g);
      gs::StateSampler sampler;
      sampler.mode = gs::sampler_mode_from_string(sampler_mode);
      sampler.beta = beta;
      sampler.power_factor = s.power_factor;
      sampler.v1_sign = gs::pf_sign_from_string(pf_sign);
      const auto pair = sampler.sample(g, Y, seed);
      if (!pair) throw std::runtime_error("forward simulation failed for this seed");
      const auto& [v, v1] = *pair;
      auto write = [](const std::string& path, const std::string& text) {
        if (path.empty()) return;
        std::ofstream out(path);
        if (!out) throw std::invalid_argument("cannot write " + path);
        out << text;
      };
      write(spec_out, gs::coupled_spec_to_json(gs::specify(g, Y, v, v1)) + "\n");
      write(truth_out, gs::state_pair_to_json(v, v1) + "\n");
      if (!meas_out.empty()) {
        std::ostringstream os;
        gs::write_measurements_csv(
            os, gs::synthesize_measurements(g, Y, v, v1, {}, noise_scale, !noiseless, gs::derive_seed(seed, 1)));
        write(meas_out, os.str());
      }
      if (spec_out.empty() && truth_out.empty() && meas_out.empty())
        std::cout << gs::coupled_spec_to_json(gs::specify(g, Y, v, v1)) << "\n";
      return 0;
    }
    if (cpf->parsed()) {
      const gs::Grid g = scenario_grid(common);
      const gs::AdmittanceMatrix Y = gs::build_admittance(g);
      const gs::CoupledSpec spec = gs::parse_coupled_spec(read_file(spec_path));
      gs::validate_spec(g, spec);
      json j;
      j["method"] = method;
      if (method == "newton") {
        std::optional<std::pair<gs::State, gs::State>> init;
        if (!init_path.empty()) init = gs::parse_state_pair(read_file(init_path));
        const auto r = gs::solve_cpf_newton(g, Y, spec, {}, init);
        j["status"] = gs::to_string(r.status);
        j["iterations"] = r.iterations;
        j["residual_norm"] = r.residual_norm;
        j["condition_estimate"] = r.condition_estimate;
        j["v"] = state_json(r.v);
        j["v1"] = state_json(r.v1);
      } else {
        const auto mats = gs::SpecMatrices::build(Y);
        dump_sdp(dump_path, gs::build_cpf_sdp(g, mats, spec, mats.Mobj));
        const auto r = gs::solve_cpf_sdp(g, Y, spec);
        j["success"] = r.success;
        j["residual_norm"] = r.residual_norm;
        j["rank"] = {rank_json(r.rank0), rank_json(r.rank1)};
        j["solver"] = solution_json(r.solution);
        j["v"] = state_json(r.v);
        j["v1"] = state_json(r.v1);
      }
      Output out(common.out);
      out.stream() << j.dump(2) << "\n";
      return 0;
    }
    if (cpsse->parsed()) {
      const gs::Grid g = scenario_grid(common);
      const gs::AdmittanceMatrix Y = gs::build_admittance(g);
      std::ifstream min(meas_path);
      if (!min) throw std::invalid_argument("cannot open " + meas_path);
      const auto ms = gs::read_measurements_csv(min);
      gs::CpsseConfig cfg;
      cfg.cost = gs::cost_kind_from_string(cost);
      cfg.alpha = alpha;
      cfg.coupling_sigma = coupling_sigma;
      cfg.load_sign_constraints = !no_sign;
      dump_sdp(dump_path, gs::build_cpsse_sdp(g, gs::SpecMatrices::build(Y), ms, cfg));
      const auto r = gs::solve_cpsse(g, Y, ms, cfg);
      json j;
      j["cost"] = cost;
      j["is_rank_one"] = r.is_rank_one;
      j["rank"] = {rank_json(r.rank0), rank_json(r.rank1)};
      j["data_cost"] = r.data_cost;
      j["solver"] = solution_json(r.solution);
      j["v"] = state_json(r.v);
      j["v1"] = state_json(r.v1);
      if (!truth_path.empty()) {
        const auto [tv, tv1] = gs::parse_state_pair(read_file(truth_path));
        if (tv.size() != g.bus_count() || tv1.size() != g.bus_count())
          throw std::invalid_argument("truth state has the wrong length");
        j["rmse"] = gs::state_rmse(r.v, r.v1, tv, tv1);
      }
      Output out(common.out);
      out.stream() << j.dump(2) << "\n";
      return 0;
    }
    if (series->parsed()) {
      const gs::Scenario s = require_scenario(common);
      const gs::Grid g = scenario_grid(common);
      gs::SeriesOptions opt;
      opt.interval_minutes = interval;
      const auto ts = gs::generate_synthetic_timeseries(g, s.pv_buses, seed, opt);
      Output out(common.out);
      gs::write_timeseries_csv(out.stream(), ts, seed);
      return 0;
    }
    if (success->parsed()) {
      const gs::Scenario s = require_scenario(common);
      const auto pts =
          gs::run_success_probability(gs::load_grid(common.feeder), s, parse_list(betas), realizations, seed);
      Output out(common.out);
      gs::write_success_csv(out.stream(), pts, s, realizations, seed);
      return 0;
    }
    if (study->parsed()) {
      const gs::Scenario s = require_scenario(common);
      const gs::Grid base = gs::load_grid(common.feeder);
      gs::SeriesOptions sopt;
      sopt.interval_minutes = interval;
      const auto ts = gs::generate_synthetic_timeseries(gs::apply_scenario(base, s), s.pv_buses, seed, sopt);
      gs::CpsseStudyOptions opt;
      opt.config.cost = gs::cost_kind_from_string(cost);
      opt.config.alpha = alpha;
      opt.config.coupling_sigma = coupling_sigma;
      opt.draws = draws;
      opt.noise_scales = parse_list(scales);
      opt.step = step;
      opt.seed = seed;
      Output out(common.out);
      if (study_mode == "snr") {
        gs::write_cpsse_sweep_csv(out.stream(), gs::run_cpsse_snr_sweep(base, s, ts, opt), s, opt);
      } else {
        gs::write_cpsse_day_csv(out.stream(), gs::run_cpsse_day(base, s, ts, opt, from_hour, to_hour), s, opt);
      }
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const gs::GridError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
