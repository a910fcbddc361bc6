#include <gtest/gtest.h>

#include <random>

#include "gridscope/pfmodel.hpp"
#include "gridscope/solvers.hpp"
#include "support.hpp"

using namespace gridscope;

namespace {

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

// Central differences of f over the stacked state [vr; vi].
template <class F>
Eigen::MatrixXd fd_jacobian(const Eigen::VectorXd& x, F f, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    J.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

}  // namespace

TEST(PfModel, InjectionsMatchComplexPowerDefinition) {
  const Grid g = gstest::ieee34();
  const AdmittanceMatrix Y = build_admittance(g);
  std::mt19937_64 rng(7);
  const State s = gstest::random_state(g.bus_count(), rng);
  const Eigen::VectorXcd v = s.complex();
  const Eigen::VectorXcd S = v.cwiseProduct((Y.complex() * v).conjugate());
  const Injections inj = injections(s, Y);
  EXPECT_LT((inj.p - S.real()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((inj.q - S.imag()).cwiseAbs().maxCoeff(), 1e-10);
  // Lossy lines: total active injection is the (positive) loss.
  EXPECT_GT(inj.p.sum(), 0.0);
}

TEST(PfModel, QuadraticFormsReproduceMeasurements) {
  const Grid g = gstest::ieee34();
  const AdmittanceMatrix Y = build_admittance(g);
  const SpecMatrices mats = SpecMatrices::build(Y);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const State s = gstest::random_state(g.bus_count(), rng);
    const Eigen::VectorXcd v = s.complex();
    const Eigen::MatrixXcd V = v * v.adjoint();
    const Injections inj = injections(s, Y);
    for (int n = 0; n < g.bus_count(); ++n) {
      EXPECT_NEAR(mats.Mv[n].trace_product(V), vmag2(s, n), 1e-12);
      EXPECT_NEAR(mats.Mp[n].trace_product(V), inj.p(n), 1e-9);
      EXPECT_NEAR(mats.Mq[n].trace_product(V), inj.q(n), 1e-9);
    }
  }
}

TEST(PfModel, JacobiansMatchFiniteDifferences) {
  const Grid g = gstest::ieee34();
  const AdmittanceMatrix Y = build_admittance(g);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const State s = gstest::random_state(g.bus_count(), rng, 0.9, 1.1);
    const Jacobians J = jacobians(s, Y);
    const Eigen::VectorXd x = s.stacked();
    const auto m = fd_jacobian(x, [&](const Eigen::VectorXd& z) { return vmag2(State::from_stacked(z)); });
    const auto p = fd_jacobian(x, [&](const Eigen::VectorXd& z) { return injections(State::from_stacked(z), Y).p; });
    const auto q = fd_jacobian(x, [&](const Eigen::VectorXd& z) { return injections(State::from_stacked(z), Y).q; });
    EXPECT_LT(rel_err(J.m, m), 1e-6);
    EXPECT_LT(rel_err(J.p, p), 1e-6);
    EXPECT_LT(rel_err(J.q, q), 1e-6);
  }
}

TEST(PfModel, CoupledLayoutCounts) {
  const Grid g = gstest::scenario("scenario_a.json");
  const CoupledLayout red(g, JacobianForm::reduced);
  const int N = g.n();
  EXPECT_EQ(red.cols(), 4 * N + 2);
  EXPECT_EQ(red.coupling_rows(), 8);
  // |M| = |O| makes the reduced system square.
  EXPECT_EQ(red.rows(), red.cols());
  const CoupledLayout ana(g, JacobianForm::analysis);
  EXPECT_EQ(ana.cols(), 4 * (N + 1));
  EXPECT_EQ(ana.rows(), red.rows() + 2);
}

TEST(PfModel, CoupledResidualVanishesAtSpecifyingPair) {
  const Grid g = gstest::scenario("scenario_a.json");
  const AdmittanceMatrix Y = build_admittance(g);
  std::mt19937_64 rng(5);
  const State v = gstest::random_state(g.bus_count(), rng);
  State v1 = gstest::random_state(g.bus_count(), rng);
  // Coupling rows only vanish when O injections agree; use the same state.
  const CoupledSpec spec = specify(g, Y, v, v);
  EXPECT_LT(coupled_residual(g, Y, v, v, spec).cwiseAbs().maxCoeff(), 1e-12);
  const CoupledSpec spec2 = specify(g, Y, v, v1);
  const Eigen::VectorXd r = coupled_residual(g, Y, v, v1, spec2);
  const CoupledLayout lay(g, JacobianForm::reduced);
  EXPECT_LT(r.head(lay.instant_rows()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(r.tail(lay.instant_rows()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PfModel, CoupledJacobianMatchesFiniteDifferences) {
  const Grid g = gstest::scenario("scenario_a.json");
  const AdmittanceMatrix Y = build_admittance(g);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const State v = gstest::random_state(g.bus_count(), rng);
    const State v1 = gstest::random_state(g.bus_count(), rng);
    const CoupledSpec spec = specify(g, Y, v, v1);
    const int nb = g.bus_count();
    Eigen::VectorXd x(4 * nb);
    x << v.stacked(), v1.stacked();
    const auto res = [&](const Eigen::VectorXd& z) {
      return coupled_residual(g, Y, State::from_stacked(z.head(2 * nb)), State::from_stacked(z.tail(2 * nb)), spec);
    };
    const Eigen::MatrixXd fd = fd_jacobian(x, res);

    const CoupledJacobian red = coupled_jacobian(g, Y, v, v1, JacobianForm::reduced);
    const auto cols = instant_columns(nb, JacobianForm::reduced);
    Eigen::MatrixXd fd_red(fd.rows(), 2 * static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      fd_red.col(static_cast<Eigen::Index>(j)) = fd.col(cols[j]);
      fd_red.col(static_cast<Eigen::Index>(j + cols.size())) = fd.col(2 * nb + cols[j]);
    }
    EXPECT_LT(rel_err(red.matrix, fd_red), 1e-6);

    const CoupledLayout lay(g, JacobianForm::analysis);
    const CoupledJacobian ana = coupled_jacobian(g, Y, v, v1, JacobianForm::analysis);
    ASSERT_EQ(ana.matrix.rows(), lay.rows());
    Eigen::MatrixXd no_angle(ana.matrix.rows() - 2, ana.matrix.cols());
    const int ir = lay.instant_rows();
    no_angle << ana.matrix.middleRows(1, ir - 1 + lay.coupling_rows()),
        ana.matrix.bottomRows(ir - 1);
    EXPECT_LT(rel_err(no_angle, fd), 1e-6);
  }
}

TEST(PfModel, CoupledJacobianSingularWhenInstantsCoincide) {
  const Grid g = gstest::scenario("scenario_a.json");
  const AdmittanceMatrix Y = build_admittance(g);
  std::mt19937_64 rng(1);
  const State v = gstest::random_state(g.bus_count(), rng);
  const CoupledJacobian J = coupled_jacobian(g, Y, v, v, JacobianForm::reduced);
  // (x, x) with x in the null space of the first instant's rows is annihilated.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J.matrix);
  const Eigen::VectorXd s = svd.singularValues();
  EXPECT_LT(s(s.size() - 1), 1e-10 * s(0));
}

TEST(PfModel, SpecValidation) {
  const Grid g = gstest::small_feeder();
  const AdmittanceMatrix Y = build_admittance(g);
  const State s = State::flat(g.bus_count());
  SpecificationSet spec = specify(g, Y, s);
  EXPECT_NO_THROW(validate_spec(g, spec));
  EXPECT_EQ(spec.vmag2.size(), 2u);  // S and M
  EXPECT_EQ(spec.p.size(), 3u);      // C and M
  spec.p[2] = 0.0;                   // nonmetered bus cannot carry a p spec
  EXPECT_THROW(validate_spec(g, spec), SpecError);
  spec = specify(g, Y, s);
  spec.vmag2.erase(0);
  EXPECT_THROW(validate_spec(g, spec), SpecError);
}
