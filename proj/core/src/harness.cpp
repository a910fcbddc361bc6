#include "gridscope/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/LU>
#include <nlohmann/json.hpp>

#include "gridscope/numeric.hpp"
#include "gridscope/parallel.hpp"

namespace gridscope {

using json = nlohmann::json;

const char* to_string(PfSign s) {
  switch (s) {
    case PfSign::leading: return "leading";
    case PfSign::lagging: return "lagging";
    case PfSign::mixed: return "mixed";
  }
  return "?";
}

PfSign pf_sign_from_string(std::string_view s) {
  if (s == "leading") return PfSign::leading;
  if (s == "lagging") return PfSign::lagging;
  if (s == "mixed") return PfSign::mixed;
  throw std::invalid_argument("unknown power-factor sign '" + std::string(s) + "'");
}

Scenario parse_scenario(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("scenario: ") + e.what());
  }
  try {
    Scenario s;
    s.name = j.value("name", std::string("scenario"));
    s.metered = j.at("metered").get<std::vector<int>>();
    s.nonmetered = j.at("nonmetered").get<std::vector<int>>();
    s.pv_buses = j.value("pv_buses", std::vector<int>{});
    s.pv_capacity_multiple = j.value("pv_capacity_multiple", 4.0);
    s.power_factor = j.value("power_factor", 0.9);
    s.pf_sign = pf_sign_from_string(j.value("pf_sign", std::string("mixed")));
    const std::set<int> m(s.metered.begin(), s.metered.end());
    for (int b : s.nonmetered)
      if (m.count(b)) throw std::invalid_argument("bus " + std::to_string(b) + " is both metered and nonmetered");
    return s;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

void validate_scenario(const Scenario& s, const Grid& grid) {
  const int n = grid.bus_count() - 1;
  auto check_list = [&](const std::vector<int>& xs, const char* what) {
    std::set<int> seen;
    for (int b : xs) {
      if (b < 1 || b > n)
        throw std::invalid_argument(std::string("scenario ") + what + " bus " + std::to_string(b) + " out of range");
      if (!seen.insert(b).second)
        throw std::invalid_argument(std::string("scenario ") + what + " bus " + std::to_string(b) + " repeated");
    }
    return seen;
  };
  const auto m = check_list(s.metered, "metered");
  const auto o = check_list(s.nonmetered, "nonmetered");
  check_list(s.pv_buses, "pv");
  for (int b : o)
    if (m.count(b)) throw std::invalid_argument("bus " + std::to_string(b) + " is both metered and nonmetered");
  if (!(s.pv_capacity_multiple >= 0.0)) throw std::invalid_argument("pv_capacity_multiple must be nonnegative");
  if (!(s.power_factor > 0.0 && s.power_factor <= 1.0)) throw std::invalid_argument("power_factor must be in (0, 1]");
}

Grid apply_scenario(const Grid& base, const Scenario& s) {
  validate_scenario(s, base);
  Grid g = base.reclassified(s.metered, s.nonmetered);
  std::vector<double> cap(static_cast<std::size_t>(g.bus_count()), 0.0);
  for (const auto* list : {&s.metered, &s.pv_buses})
    for (int b : *list) cap[static_cast<std::size_t>(b)] = s.pv_capacity_multiple * g.bus(b).base_load.real();
  return g.with_pv_capacity(cap);
}

State forward_simulate(const Grid& grid, const AdmittanceMatrix& Y, const Eigen::VectorXcd& s,
                       const PowerFlowOptions& opt) {
  const int n1 = grid.bus_count();
  const int n = n1 - 1;
  if (s.size() != n1) throw std::invalid_argument("injection vector length does not match bus count");
  State v = State::flat(n1);
  // Unknowns [vr_1..N, vi_1..N]; equations [p_1..N, q_1..N].
  std::vector<int> cols;
  for (int k = 1; k <= n; ++k) cols.push_back(k);
  for (int k = 1; k <= n; ++k) cols.push_back(n1 + k);
  Eigen::VectorXd f(2 * n);
  Eigen::MatrixXd J(2 * n, 2 * n);
  for (int it = 0; it <= opt.max_iters; ++it) {
    const Injections inj = injections(v, Y);
    for (int k = 1; k <= n; ++k) {
      f(k - 1) = inj.p(k) - s(k).real();
      f(n + k - 1) = inj.q(k) - s(k).imag();
    }
    if (!f.allFinite()) break;
    if (f.lpNorm<Eigen::Infinity>() < opt.tol) return v;
    const Jacobians jac = jacobians(v, Y);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < 2 * n; ++c) {
        J(r, c) = jac.p(r + 1, cols[static_cast<std::size_t>(c)]);
        J(n + r, c) = jac.q(r + 1, cols[static_cast<std::size_t>(c)]);
      }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
    const Eigen::VectorXd dx = lu.solve(-f);
    if (!dx.allFinite()) break;
    v.vr.tail(n) += dx.head(n);
    v.vi.tail(n) += dx.tail(n);
  }
  throw PowerFlowError("power flow did not converge");
}

Eigen::VectorXcd load_injections(const Grid& grid) {
  Eigen::VectorXcd s(grid.bus_count());
  for (int k = 0; k < grid.bus_count(); ++k) s(k) = -grid.bus(k).base_load;
  s(0) = 0.0;
  return s;
}

std::complex<double> pv_injection(double p, double pf, bool lagging) {
  const double q = p * std::tan(std::acos(pf));
  return {p, lagging ? q : -q};
}

const char* to_string(SamplerMode m) {
  switch (m) {
    case SamplerMode::max_pv_lagging: return "max_pv_lagging";
    case SamplerMode::uniform_pv: return "uniform_pv";
    case SamplerMode::beta_perturbed: return "beta_perturbed";
  }
  return "?";
}

SamplerMode sampler_mode_from_string(std::string_view s) {
  if (s == "max_pv_lagging") return SamplerMode::max_pv_lagging;
  if (s == "uniform_pv") return SamplerMode::uniform_pv;
  if (s == "beta_perturbed") return SamplerMode::beta_perturbed;
  throw std::invalid_argument("unknown sampler mode '" + std::string(s) + "'");
}

void StateSampler::validate() const {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be nonnegative");
  if (mode == SamplerMode::beta_perturbed && !(beta > 0.0 && beta <= 1.0))
    throw std::invalid_argument("beta must be in (0, 1] in beta_perturbed mode");
  if (!(z_max >= 0.0)) throw std::invalid_argument("z_max must be nonnegative");
  if (!(power_factor > 0.0 && power_factor <= 1.0)) throw std::invalid_argument("power factor must be in (0, 1]");
}

std::pair<Eigen::VectorXcd, Eigen::VectorXcd> StateSampler::draw_injections(const Grid& grid,
                                                                             std::uint64_t seed) const {
  validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Eigen::VectorXcd s0 = load_injections(grid);
  Eigen::VectorXcd s1 = s0;
  const bool lag1 = v1_sign == PfSign::mixed ? u01(rng) < 0.5 : v1_sign == PfSign::lagging;
  for (int k = 1; k < grid.bus_count(); ++k) {
    const double cap = grid.bus(k).pv_capacity;
    if (cap <= 0.0) continue;
    s0(k) += pv_injection(cap, power_factor, true);
    // Always consume the same number of draws per PV bus so that seeds stay
    // aligned across modes and parameters.
    const double u = u01(rng);
    switch (mode) {
      case SamplerMode::max_pv_lagging:
        s1(k) = s0(k);
        break;
      case SamplerMode::uniform_pv:
        s1(k) += pv_injection(cap * u, power_factor, lag1);
        break;
      case SamplerMode::beta_perturbed:
        s1(k) += pv_injection(cap * (1.0 - beta * z_max * u), power_factor, true);
        break;
    }
  }
  return {s0, s1};
}

std::optional<std::pair<State, State>> StateSampler::sample(const Grid& grid, const AdmittanceMatrix& Y,
                                                            std::uint64_t seed) const {
  const auto [s0, s1] = draw_injections(grid, seed);
  try {
    State v = forward_simulate(grid, Y, s0);
    State v1 = forward_simulate(grid, Y, s1);
    return std::make_pair(std::move(v), std::move(v1));
  } catch (const PowerFlowError&) {
    return std::nullopt;
  }
}

StatePairSampler make_sampler(const Grid& grid, const AdmittanceMatrix& Y, const StateSampler& sampler) {
  sampler.validate();
  return [grid, Y, sampler](std::uint64_t seed) { return sampler.sample(grid, Y, seed); };
}

namespace {

json set_to_json(const SpecificationSet& s) {
  json j;
  for (auto [name, m] : {std::pair{"vmag2", &s.vmag2}, std::pair{"p", &s.p}, std::pair{"q", &s.q}}) {
    json o = json::object();
    for (auto [bus, val] : *m) o[std::to_string(bus)] = val;
    j[name] = o;
  }
  return j;
}

SpecificationSet set_from_json(const json& j) {
  SpecificationSet s;
  for (auto [name, m] : {std::pair{"vmag2", &s.vmag2}, std::pair{"p", &s.p}, std::pair{"q", &s.q}}) {
    if (!j.contains(name)) continue;
    for (const auto& [key, val] : j.at(name).items()) {
      std::size_t used = 0;
      const int bus = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument("bad bus key '" + key + "'");
      (*m)[bus] = val.get<double>();
    }
  }
  return s;
}

json state_to_json(const State& v) { return {{"re", v.vr}, {"im", v.vi}}; }

State state_from_json(const json& j) {
  const auto re = j.at("re").get<std::vector<double>>();
  const auto im = j.at("im").get<std::vector<double>>();
  if (re.size() != im.size()) throw std::invalid_argument("state re/im length mismatch");
  State s;
  s.vr = Eigen::Map<const Eigen::VectorXd>(re.data(), static_cast<Eigen::Index>(re.size()));
  s.vi = Eigen::Map<const Eigen::VectorXd>(im.data(), static_cast<Eigen::Index>(im.size()));
  return s;
}

template <class F>
auto parse_json_or_throw(std::string_view text, const char* what, F&& f) {
  try {
    return f(json::parse(text));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string(what) + ": " + e.what());
  } catch (const std::logic_error& e) {
    throw std::invalid_argument(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string coupled_spec_to_json(const CoupledSpec& spec) {
  return json{{"t0", set_to_json(spec.t0)}, {"t1", set_to_json(spec.t1)}}.dump(2);
}

CoupledSpec parse_coupled_spec(std::string_view text) {
  return parse_json_or_throw(text, "spec", [](const json& j) {
    return CoupledSpec{set_from_json(j.at("t0")), set_from_json(j.at("t1"))};
  });
}

std::string state_pair_to_json(const State& v, const State& v1) {
  return json{{"v", state_to_json(v)}, {"v1", state_to_json(v1)}}.dump(2);
}

std::pair<State, State> parse_state_pair(std::string_view text) {
  return parse_json_or_throw(text, "state pair", [](const json& j) {
    return std::make_pair(state_from_json(j.at("v")), state_from_json(j.at("v1")));
  });
}

namespace {

std::string join(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? " " : "") + std::to_string(xs[i]);
  return s;
}

std::string scenario_params(const Scenario& s) {
  std::ostringstream os;
  os << "scenario=" << s.name << " metered=[" << join(s.metered) << "] nonmetered=[" << join(s.nonmetered)
     << "] pv_buses=[" << join(s.pv_buses) << "] pv_capacity_multiple=" << s.pv_capacity_multiple;
  return os.str();
}

std::string join_doubles(const std::vector<double>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? " " : "") << xs[i];
  return os.str();
}

}  // namespace

ConditionStudyResult run_condition_study(const Grid& base, const Scenario& a, const Scenario& b, int trials,
                                         std::uint64_t seed, const StateSampler& sampler) {
  ConditionStudyResult r;
  r.name_a = a.name;
  r.name_b = b.name;
  for (auto [s, out] : {std::pair{&a, &r.a}, std::pair{&b, &r.b}}) {
    const Grid g = apply_scenario(base, *s);
    const AdmittanceMatrix Y = build_admittance(g);
    *out = condition_number_study(g, Y, make_sampler(g, Y, sampler), trials, seed);
  }
  return r;
}

void write_condition_csv(std::ostream& out, const ConditionStudyResult& r, int trials, std::uint64_t seed,
                         const StateSampler& sampler) {
  out << "# condnum trials=" << trials << " seed=" << seed << " sampler=" << to_string(sampler.mode)
      << " power_factor=" << sampler.power_factor << " v1_sign=" << to_string(sampler.v1_sign)
      << " scenario_a=" << r.name_a << " scenario_b=" << r.name_b << " skipped_a=" << r.a.skipped
      << " skipped_b=" << r.b.skipped << "\n";
  out << "scenario,trial,condition_number\n";
  out.precision(10);
  for (auto [name, st] : {std::pair{&r.name_a, &r.a}, std::pair{&r.name_b, &r.b}})
    for (std::size_t i = 0; i < st->condition_numbers.size(); ++i)
      out << *name << "," << st->trial_index[i] << "," << st->condition_numbers[i] << "\n";
}

std::vector<SuccessPoint> run_success_probability(const Grid& base, const Scenario& s, const std::vector<double>& betas,
                                                  int realizations, std::uint64_t seed, const sdp::Options& options) {
  if (realizations < 1) throw std::invalid_argument("need at least one realization");
  const Grid g = apply_scenario(base, s);
  const AdmittanceMatrix Y = build_admittance(g);
  std::vector<SuccessPoint> pts;
  for (double beta : betas) {
    StateSampler sampler;
    sampler.mode = SamplerMode::beta_perturbed;
    sampler.beta = beta;
    sampler.power_factor = s.power_factor;
    sampler.validate();
    std::vector<int> outcome(static_cast<std::size_t>(realizations), -1);
    parallel_for(realizations, [&](int r) {
      const auto pair = sampler.sample(g, Y, derive_seed(seed, static_cast<std::uint64_t>(r)));
      if (!pair) return;
      const CoupledSpec spec = specify(g, Y, pair->first, pair->second);
      outcome[static_cast<std::size_t>(r)] = solve_cpf_sdp(g, Y, spec, std::nullopt, options).success ? 1 : 0;
    });
    SuccessPoint p;
    p.beta = beta;
    for (int o : outcome) {
      if (o < 0) {
        ++p.sampling_failures;
      } else {
        ++p.realizations;
        p.successes += o;
      }
    }
    p.rate = p.realizations ? static_cast<double>(p.successes) / p.realizations : 0.0;
    pts.push_back(p);
  }
  return pts;
}

void write_success_csv(std::ostream& out, const std::vector<SuccessPoint>& pts, const Scenario& s, int realizations,
                       std::uint64_t seed) {
  out << "# success-prob realizations=" << realizations << " seed=" << seed << " power_factor=" << s.power_factor
      << " z_max=0.1 rank_tol=1e-5 residual_tol=" << kSdpSuccessResidual << " " << scenario_params(s) << "\n";
  out << "beta,successes,realizations,sampling_failures,rate\n";
  for (const auto& p : pts)
    out << p.beta << "," << p.successes << "," << p.realizations << "," << p.sampling_failures << "," << p.rate << "\n";
}

std::vector<Measurement> synthesize_measurements(const Grid& grid, const AdmittanceMatrix& Y, const State& v,
                                                 const State& v1, const NoiseModel& noise, double scale, bool noisy,
                                                 std::uint64_t seed) {
  if (!(scale > 0.0)) throw std::invalid_argument("noise scale must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<Measurement> ms;
  const State* states[2] = {&v, &v1};
  for (int t = 0; t < 2; ++t) {
    const Injections inj = injections(*states[t], Y);
    for (int k = 0; k < grid.bus_count(); ++k) {
      const BusClass c = grid.bus(k).cls;
      auto add = [&](MeasurementKind kind, double value, double sigma) {
        Measurement m{kind, k, t, value, sigma};
        if (noisy) m.value += sigma * nd(rng);
        ms.push_back(m);
      };
      if (c == BusClass::substation || c == BusClass::metered)
        add(MeasurementKind::vmag2, vmag2(*states[t], k), scale * noise.sigma_v);
      if (c == BusClass::conventional || c == BusClass::metered) {
        add(MeasurementKind::p, inj.p(k), scale * noise.sigma_inj);
        add(MeasurementKind::q, inj.q(k), scale * noise.sigma_inj);
      }
    }
  }
  return ms;
}

double median_snr_db(const std::vector<Measurement>& ms) {
  std::vector<double> snr;
  for (const auto& m : ms)
    if (m.value != 0.0) snr.push_back(20.0 * std::log10(std::abs(m.value) / m.sigma));
  if (snr.empty()) return -std::numeric_limits<double>::infinity();
  return median(snr);
}

std::pair<State, State> truth_pair(const Grid& grid, const AdmittanceMatrix& Y, const TimeSeriesSet& ts, int step) {
  if (step < 0 || step + 1 >= ts.steps()) throw std::invalid_argument("time step out of range");
  return {forward_simulate(grid, Y, ts.injections(step)), forward_simulate(grid, Y, ts.injections(step + 1))};
}

namespace {

int default_step(const TimeSeriesSet& ts, int step) {
  if (step >= 0) return step;
  int best = 0;
  for (int k = 0; k + 1 < ts.steps(); ++k)
    if (std::abs(ts.hours[static_cast<std::size_t>(k)] - 12.0) < std::abs(ts.hours[static_cast<std::size_t>(best)] - 12.0))
      best = k;
  return best;
}

}  // namespace

std::vector<CpssePoint> run_cpsse_snr_sweep(const Grid& base, const Scenario& s, const TimeSeriesSet& ts,
                                            const CpsseStudyOptions& opts) {
  if (opts.draws < 1) throw std::invalid_argument("need at least one draw");
  const Grid g = apply_scenario(base, s);
  const AdmittanceMatrix Y = build_admittance(g);
  const auto [tv, tv1] = truth_pair(g, Y, ts, default_step(ts, opts.step));
  std::vector<CpssePoint> pts;
  for (std::size_t si = 0; si < opts.noise_scales.size(); ++si) {
    const double scale = opts.noise_scales[si];
    std::vector<double> rmse(static_cast<std::size_t>(opts.draws), 0.0);
    std::vector<double> snr(static_cast<std::size_t>(opts.draws), 0.0);
    std::vector<int> r1(static_cast<std::size_t>(opts.draws), 0);
    std::vector<int> failed(static_cast<std::size_t>(opts.draws), 0);
    parallel_for(opts.draws, [&](int d) {
      const auto ms = synthesize_measurements(g, Y, tv, tv1, opts.noise, scale, true,
                                              derive_seed(opts.seed, si * 100003u + static_cast<std::uint64_t>(d)));
      snr[static_cast<std::size_t>(d)] = median_snr_db(ms);
      const CpsseResult est = solve_cpsse(g, Y, ms, opts.config, opts.solver);
      rmse[static_cast<std::size_t>(d)] = state_rmse(est.v, est.v1, tv, tv1);
      r1[static_cast<std::size_t>(d)] = est.is_rank_one ? 1 : 0;
      failed[static_cast<std::size_t>(d)] = est.solution.status == sdp::Status::optimal ? 0 : 1;
    });
    CpssePoint p;
    p.noise_scale = scale;
    p.draws = opts.draws;
    double sr = 0.0, ss = 0.0;
    for (int d = 0; d < opts.draws; ++d) {
      sr += rmse[static_cast<std::size_t>(d)];
      ss += snr[static_cast<std::size_t>(d)];
      p.rank_one += r1[static_cast<std::size_t>(d)];
      p.failures += failed[static_cast<std::size_t>(d)];
    }
    p.mean_rmse = sr / opts.draws;
    p.snr_db = ss / opts.draws;
    pts.push_back(p);
  }
  return pts;
}

std::vector<CpsseDayPoint> run_cpsse_day(const Grid& base, const Scenario& s, const TimeSeriesSet& ts,
                                         const CpsseStudyOptions& opts, double from_hour, double to_hour) {
  const Grid g = apply_scenario(base, s);
  const AdmittanceMatrix Y = build_admittance(g);
  std::vector<int> steps;
  for (int k = 0; k + 1 < ts.steps(); ++k) {
    const double h = ts.hours[static_cast<std::size_t>(k)];
    if (h >= from_hour && h < to_hour) steps.push_back(k);
  }
  const double scale = opts.noise_scales.empty() ? 1.0 : opts.noise_scales.front();
  std::vector<CpsseDayPoint> pts(steps.size());
  parallel_for(static_cast<int>(steps.size()), [&](int i) {
    const int k = steps[static_cast<std::size_t>(i)];
    const auto [tv, tv1] = truth_pair(g, Y, ts, k);
    const auto ms = synthesize_measurements(g, Y, tv, tv1, opts.noise, scale, true,
                                            derive_seed(opts.seed, static_cast<std::uint64_t>(k)));
    CpsseDayPoint p;
    p.step = k;
    p.hour = ts.hours[static_cast<std::size_t>(k)];
    CpsseConfig cfg = opts.config;
    cfg.cost = CostKind::wls;
    auto e = solve_cpsse(g, Y, ms, cfg, opts.solver);
    p.rmse_wls = state_rmse(e.v, e.v1, tv, tv1);
    cfg.cost = CostKind::wlav;
    e = solve_cpsse(g, Y, ms, cfg, opts.solver);
    p.rmse_wlav = state_rmse(e.v, e.v1, tv, tv1);
    pts[static_cast<std::size_t>(i)] = p;
  });
  return pts;
}

namespace {

void cpsse_params(std::ostream& out, const char* what, const Scenario& s, const CpsseStudyOptions& o) {
  out << "# " << what << " cost=" << to_string(o.config.cost) << " alpha=" << o.config.alpha
      << " coupling_sigma=" << o.config.coupling_sigma << " load_sign=" << (o.config.load_sign_constraints ? 1 : 0)
      << " sigma_v=" << o.noise.sigma_v << " sigma_inj=" << o.noise.sigma_inj << " draws=" << o.draws
      << " noise_scales=[" << join_doubles(o.noise_scales) << "] step=" << o.step << " seed=" << o.seed << " "
      << scenario_params(s) << "\n";
}

}  // namespace

void write_cpsse_sweep_csv(std::ostream& out, const std::vector<CpssePoint>& pts, const Scenario& s,
                           const CpsseStudyOptions& opts) {
  cpsse_params(out, "cpsse-snr", s, opts);
  out << "noise_scale,snr_db,mean_rmse,draws,rank_one,failures\n";
  for (const auto& p : pts)
    out << p.noise_scale << "," << p.snr_db << "," << p.mean_rmse << "," << p.draws << "," << p.rank_one << ","
        << p.failures << "\n";
}

void write_cpsse_day_csv(std::ostream& out, const std::vector<CpsseDayPoint>& pts, const Scenario& s,
                         const CpsseStudyOptions& opts) {
  cpsse_params(out, "cpsse-day", s, opts);
  out << "step,hour,rmse_wls,rmse_wlav\n";
  for (const auto& p : pts) out << p.step << "," << p.hour << "," << p.rmse_wls << "," << p.rmse_wlav << "\n";
}

}  // namespace gridscope
