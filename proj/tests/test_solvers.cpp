#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "gridscope/harness.hpp"
#include "gridscope/solvers.hpp"
#include "support.hpp"

using namespace gridscope;

namespace {

// Consistent pair on the small feeder: the metered PV bus changes output,
// everything else keeps its load.
std::pair<State, State> small_pair(const Grid& g, const AdmittanceMatrix& Y) {
  Eigen::VectorXcd s0 = load_injections(g), s1 = s0;
  s0(3) += pv_injection(0.2, 0.9, true);
  s1(3) += pv_injection(0.05, 0.9, false);
  return {forward_simulate(g, Y, s0), forward_simulate(g, Y, s1)};
}

double max_entry_error(const State& a, const State& b) { return (a.complex() - b.complex()).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Solvers, SpecMatricesDefaultObjectiveIsMinusB) {
  const Grid g = gstest::ieee34();
  const AdmittanceMatrix Y = build_admittance(g);
  const SpecMatrices mats = SpecMatrices::build(Y);
  EXPECT_EQ(static_cast<int>(mats.Mp.size()), g.bus_count());
  EXPECT_LT((mats.Mobj.dense() + Y.B.cast<std::complex<double>>()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Solvers, NewtonRecoversSmallFeederFromFlatStart) {
  const Grid g = gstest::small_feeder();
  const AdmittanceMatrix Y = build_admittance(g);
  const auto [v, v1] = small_pair(g, Y);
  const CoupledSpec spec = specify(g, Y, v, v1);
  const NewtonResult r = solve_cpf_newton(g, Y, spec);
  ASSERT_TRUE(r.converged) << to_string(r.status);
  EXPECT_LT(r.residual_norm, 1e-10);
  EXPECT_LT(max_entry_error(r.v, v), 1e-8);
  EXPECT_LT(max_entry_error(r.v1, v1), 1e-8);
}

TEST(Solvers, NewtonConvergesOnScenarioA) {
  const Grid g = gstest::scenario("scenario_a.json");
  const AdmittanceMatrix Y = build_admittance(g);
  StateSampler smp;
  smp.mode = SamplerMode::uniform_pv;
  const auto pair = smp.sample(g, Y, 11);
  ASSERT_TRUE(pair);
  const CoupledSpec spec = specify(g, Y, pair->first, pair->second);
  const NewtonResult r = solve_cpf_newton(g, Y, spec);
  EXPECT_TRUE(r.converged) << to_string(r.status);
  EXPECT_LT(r.residual_norm, 1e-10);
  EXPECT_LT(coupled_residual(g, Y, r.v, r.v1, spec).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(r.v.vi(0), 0.0);
  EXPECT_EQ(r.v1.vi(0), 0.0);
}

TEST(Solvers, NewtonFromTruthStaysPut) {
  const Grid g = gstest::scenario("scenario_a.json");
  const AdmittanceMatrix Y = build_admittance(g);
  const auto pair = StateSampler{}.sample(g, Y, 5);
  ASSERT_TRUE(pair);
  const CoupledSpec spec = specify(g, Y, pair->first, pair->second);
  const NewtonResult r = solve_cpf_newton(g, Y, spec, {}, pair);
  ASSERT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 1);
  EXPECT_LT(max_entry_error(r.v, pair->first), 1e-12);
}

TEST(Solvers, TruthIsFeasibleForCpfRelaxation) {
  const Grid g = gstest::scenario("scenario_a.json");
  const AdmittanceMatrix Y = build_admittance(g);
  const auto pair = StateSampler{}.sample(g, Y, 2);
  ASSERT_TRUE(pair);
  const CoupledSpec spec = specify(g, Y, pair->first, pair->second);
  const SpecMatrices mats = SpecMatrices::build(Y);
  const sdp::Problem p = build_cpf_sdp(g, mats, spec, mats.Mobj);
  ASSERT_EQ(p.blocks.size(), 2u);
  const Eigen::VectorXcd v = pair->first.complex(), v1 = pair->second.complex();
  const std::vector<Eigen::MatrixXcd> X{v * v.adjoint(), v1 * v1.adjoint()};
  for (const auto& c : p.constraints) {
    double lhs = 0.0;
    for (const auto& [b, m] : c.blocks) lhs += m.trace_product(X[static_cast<std::size_t>(b)]);
    EXPECT_NEAR(lhs, c.rhs, 1e-10);
  }
}

TEST(Solvers, SdpRecoversSmallFeederNearFlatProfile) {
  const Grid g = gstest::small_feeder();
  const AdmittanceMatrix Y = build_admittance(g);
  const auto [v, v1] = small_pair(g, Y);
  const CoupledSpec spec = specify(g, Y, v, v1);
  const SdpCpfResult r = solve_cpf_sdp(g, Y, spec);
  EXPECT_TRUE(r.is_rank_one);
  EXPECT_TRUE(r.success);
  const NewtonResult nr = solve_cpf_newton(g, Y, spec);
  ASSERT_TRUE(nr.converged);
  EXPECT_LT(max_entry_error(r.v, nr.v), 1e-5);
  EXPECT_LT(max_entry_error(r.v1, nr.v1), 1e-5);
}

TEST(Solvers, SdpFailsOnIdenticalInstants) {
  const Grid g = gstest::small_feeder();
  const AdmittanceMatrix Y = build_admittance(g);
  const auto [v, v1] = small_pair(g, Y);
  (void)v1;
  const CoupledSpec spec = specify(g, Y, v, v);
  const SdpCpfResult r = solve_cpf_sdp(g, Y, spec);
  // The O injections are not identifiable, so the minimiser drifts from v.
  EXPECT_GT(std::max(max_entry_error(r.v, v), max_entry_error(r.v1, v)), 1e-4);
}

TEST(Solvers, CpsseNoiselessSmallFeeder) {
  const Grid g = gstest::small_feeder();
  const AdmittanceMatrix Y = build_admittance(g);
  const auto [v, v1] = small_pair(g, Y);
  const auto ms = synthesize_measurements(g, Y, v, v1, NoiseModel{}, 1.0, false, 1);
  CpsseConfig cfg;
  cfg.alpha = 1e-4;
  const CpsseResult r = solve_cpsse(g, Y, ms, cfg);
  EXPECT_TRUE(r.is_rank_one);
  EXPECT_LT(state_rmse(r.v, r.v1, v, v1), 1e-4);
}

TEST(Solvers, CpsseCostsAgreeOnNoiselessData) {
  const Grid g = gstest::small_feeder();
  const AdmittanceMatrix Y = build_admittance(g);
  const auto [v, v1] = small_pair(g, Y);
  const auto ms = synthesize_measurements(g, Y, v, v1, NoiseModel{}, 1.0, false, 1);
  CpsseConfig wls, wlav;
  wls.alpha = wlav.alpha = 1e-4;
  wlav.cost = CostKind::wlav;
  const CpsseResult a = solve_cpsse(g, Y, ms, wls);
  const CpsseResult b = solve_cpsse(g, Y, ms, wlav);
  EXPECT_LT(state_rmse(a.v, a.v1, b.v, b.v1), 1e-4);
  EXPECT_GE(a.data_cost, -1e-9);
  EXPECT_GE(b.data_cost, -1e-9);
}

TEST(Solvers, MeasurementsCsvRoundTrip) {
  std::vector<Measurement> ms{{MeasurementKind::vmag2, 0, 0, 1.0, 0.01},
                              {MeasurementKind::p, 3, 1, -0.125, 0.015},
                              {MeasurementKind::q, 2, 0, 0.0625, 0.015}};
  std::stringstream ss;
  write_measurements_csv(ss, ms);
  const auto back = read_measurements_csv(ss);
  ASSERT_EQ(back.size(), ms.size());
  for (std::size_t i = 0; i < ms.size(); ++i) {
    EXPECT_EQ(back[i].kind, ms[i].kind);
    EXPECT_EQ(back[i].bus, ms[i].bus);
    EXPECT_EQ(back[i].time, ms[i].time);
    EXPECT_DOUBLE_EQ(back[i].value, ms[i].value);
    EXPECT_DOUBLE_EQ(back[i].sigma, ms[i].sigma);
  }
  std::stringstream bad_time("time,bus,kind,value,sigma\n2,0,v2,1.0,0.01\n");
  EXPECT_THROW(read_measurements_csv(bad_time), std::invalid_argument);
  std::stringstream bad_sigma("1,0,v2,1.0,0\n");
  EXPECT_THROW(read_measurements_csv(bad_sigma), std::invalid_argument);
  std::stringstream bad_kind("1,0,angle,1.0,0.1\n");
  EXPECT_THROW(read_measurements_csv(bad_kind), std::invalid_argument);
}

TEST(Solvers, MagnitudeAnchoredStateOnRankOne) {
  Eigen::VectorXcd v(3);
  v << 1.0, std::polar(1.01, -0.02), std::polar(0.99, 0.03);
  const State s = magnitude_anchored_state(v * v.adjoint());
  EXPECT_LT((s.complex() - v).cwiseAbs().maxCoeff(), 1e-10);
  Eigen::MatrixXcd blurred = v * v.adjoint();
  blurred.diagonal().array() += 0.01;
  const State t = magnitude_anchored_state(blurred);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(std::norm(t.complex()(k)), blurred(k, k).real(), 1e-10);
}

TEST(Solvers, StateRmse) {
  const State a = State::flat(3);
  State b = a;
  b.vr(1) += 0.12;
  EXPECT_DOUBLE_EQ(state_rmse(a, a, a, a), 0.0);
  EXPECT_NEAR(state_rmse(b, a, a, a), std::sqrt(0.12 * 0.12 / 12.0), 1e-15);
}
