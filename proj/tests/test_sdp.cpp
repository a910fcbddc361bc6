#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "gridscope/sdp.hpp"

using namespace gridscope::sdp;

namespace {

SparseHermitian entry(int dim, int r, int c, cplx v) {
  SparseHermitian m(dim);
  m.add(r, c, v);
  return m;
}

SparseHermitian identity(int dim) {
  SparseHermitian m(dim);
  for (int i = 0; i < dim; ++i) m.add(i, i, 1.0);
  return m;
}

Constraint eq(int block, SparseHermitian a, double rhs) {
  Constraint c;
  c.blocks.emplace_back(block, std::move(a));
  c.rhs = rhs;
  return c;
}

void expect_kkt(const Problem& p, const Solution& s, double tol = 1e-7) {
  const KktReport k = kkt_residuals(p, s);
  EXPECT_LT(k.primal, tol);
  EXPECT_LT(k.dual, tol);
  EXPECT_LT(k.gap, tol);
  EXPECT_GT(k.min_primal_eigenvalue, -tol);
  EXPECT_GT(k.min_dual_eigenvalue, -tol);
}

Eigen::MatrixXcd random_hermitian(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cplx(nd(rng), nd(rng));
  return 0.5 * (a + a.adjoint());
}

}  // namespace

TEST(Sdp, TraceMinimisationWithCorner) {
  // min tr(X) s.t. X11 = 1 -> X = diag(1, 0)
  Problem p;
  const int b = p.add_block(2, false);
  p.objective[b] = identity(2);
  p.constraints.push_back(eq(b, entry(2, 0, 0, 1.0), 1.0));
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.objective_value, 1.0, 1e-7);
  Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(2, 2);
  expected(0, 0) = 1.0;
  EXPECT_LT((s.blocks[0] - expected).cwiseAbs().maxCoeff(), 1e-7);
  expect_kkt(p, s);
}

TEST(Sdp, UnitTraceMaximisation) {
  // min -tr(X) s.t. tr(X) = 1 -> -1
  Problem p;
  const int b = p.add_block(2, false);
  SparseHermitian c(2);
  c.add(0, 0, -1.0);
  c.add(1, 1, -1.0);
  p.objective[b] = c;
  p.constraints.push_back(eq(b, identity(2), 1.0));
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.objective_value, -1.0, 1e-7);
  EXPECT_NEAR(s.blocks[0].trace().real(), 1.0, 1e-7);
  expect_kkt(p, s);
}

TEST(Sdp, OffDiagonalCorrelation) {
  // min 2 X12 s.t. X11 = X22 = 1 -> X = [[1, -1], [-1, 1]], objective -2
  Problem p;
  const int b = p.add_block(2, false);
  p.objective[b] = entry(2, 0, 1, 1.0);
  p.constraints.push_back(eq(b, entry(2, 0, 0, 1.0), 1.0));
  p.constraints.push_back(eq(b, entry(2, 1, 1, 1.0), 1.0));
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.objective_value, -2.0, 1e-7);
  EXPECT_NEAR(s.blocks[0](0, 1).real(), -1.0, 1e-7);
  expect_kkt(p, s);
}

TEST(Sdp, HermitianPhaseAlignment) {
  // C12 = e^{-jθ}: tr(C X) = 2 Re(e^{jθ} X12), minimised by X12 = -e^{-jθ}
  const double theta = 0.7;
  Problem p;
  const int b = p.add_block(2, true);
  p.objective[b] = entry(2, 0, 1, std::polar(1.0, -theta));
  p.constraints.push_back(eq(b, entry(2, 0, 0, 1.0), 1.0));
  p.constraints.push_back(eq(b, entry(2, 1, 1, 1.0), 1.0));
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.objective_value, -2.0, 1e-7);
  EXPECT_LT(std::abs(s.blocks[0](0, 1) + std::polar(1.0, -theta)), 1e-6);
  expect_kkt(p, s);
}

TEST(Sdp, SmallestEigenvalueOfHermitianMatrix) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXcd C = random_hermitian(4, rng);
    Problem p;
    const int b = p.add_block(4);
    p.objective[b] = SparseHermitian::from_dense(C);
    p.constraints.push_back(eq(b, identity(4), 1.0));
    // The gap tolerance is relative, so tighten it for an absolute 1e-7 check.
    Options opt;
    opt.tol_gap = 1e-9;
    const Solution s = solve(p, opt);
    ASSERT_EQ(s.status, Status::optimal);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(C);
    EXPECT_NEAR(s.objective_value, es.eigenvalues()(0), 1e-7);
    const RankOne r = extract_rank_one(s.blocks[0]);
    EXPECT_TRUE(r.is_rank_one);
    EXPECT_NEAR(std::abs(r.vector.dot(es.eigenvectors().col(0))), 1.0, 1e-5);
    expect_kkt(p, s);
  }
}

TEST(Sdp, LargestEigenvalueThroughFreeVariable) {
  // min t s.t. t I - C = X, X PSD -> t = λmax(C)
  std::mt19937_64 rng(12);
  const Eigen::MatrixXcd Cc = random_hermitian(3, rng);
  const Eigen::MatrixXd C = Cc.real();
  Problem p;
  const int b = p.add_block(3, false);
  const int t = p.add_free(1.0);
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      Constraint c;
      c.blocks.emplace_back(b, entry(3, i, j, i == j ? 1.0 : 0.5));
      if (i == j) c.free_terms.emplace_back(t, -1.0);
      c.rhs = -C(i, j);
      p.constraints.push_back(c);
    }
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  EXPECT_NEAR(s.free_values(t), es.eigenvalues()(2), 1e-7);
  expect_kkt(p, s);
}

TEST(Sdp, InequalityAndNonnegatives) {
  // min tr(C X) + 3 u  s.t. tr(X) + u <= 2, X11 - u = 0.5, X PSD, u >= 0
  // with C = diag(-1, 1): optimum X = diag(x, 0), u = x - 0.5.
  // Cost -x + 3(x - 0.5) is increasing in x, so x = 0.5, u = 0, objective -0.5.
  Problem p;
  const int b = p.add_block(2, false);
  const int u = p.add_nonneg(3.0);
  SparseHermitian c(2);
  c.add(0, 0, -1.0);
  c.add(1, 1, 1.0);
  p.objective[b] = c;
  Constraint le;
  le.blocks.emplace_back(b, identity(2));
  le.nonneg_terms.emplace_back(u, 1.0);
  le.relation = Relation::less_equal;
  le.rhs = 2.0;
  p.constraints.push_back(le);
  Constraint e = eq(b, entry(2, 0, 0, 1.0), 0.5);
  e.nonneg_terms.emplace_back(u, -1.0);
  p.constraints.push_back(e);
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.objective_value, -0.5, 1e-7);
  EXPECT_NEAR(s.nonneg_values(u), 0.0, 1e-7);
  EXPECT_NEAR(s.slacks(0), 1.5, 1e-6);
  expect_kkt(p, s);
}

TEST(Sdp, RandomFeasibleFixtures) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 3 + trial % 3;
    Problem p;
    const int b0 = p.add_block(n);
    const int b1 = p.add_block(2, false);
    // Strictly feasible point X0 = I makes the problem feasible; a PSD
    // objective plus identity keeps it bounded.
    const Eigen::MatrixXcd G = random_hermitian(n, rng);
    p.objective[b0] = SparseHermitian::from_dense(G * G + Eigen::MatrixXcd::Identity(n, n));
    p.objective[b1] = identity(2);
    for (int k = 0; k < n + 2; ++k) {
      const Eigen::MatrixXcd A = random_hermitian(n, rng);
      Constraint c;
      c.blocks.emplace_back(b0, SparseHermitian::from_dense(A));
      const double w = nd(rng);
      c.blocks.emplace_back(b1, entry(2, 0, 1, w));
      c.rhs = A.trace().real();
      if (k % 3 == 2) {
        c.relation = Relation::less_equal;
        c.rhs += 0.5;
      }
      p.constraints.push_back(c);
    }
    const Solution s = solve(p);
    ASSERT_EQ(s.status, Status::optimal) << "trial " << trial;
    expect_kkt(p, s);
    EXPECT_GE(s.objective_value, s.dual_objective - 1e-7);
  }
}

TEST(Sdp, WeakDualityAtFinalIterateAndMonotoneMu) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXcd C = random_hermitian(5, rng);
  Problem p;
  const int b = p.add_block(5);
  p.objective[b] = SparseHermitian::from_dense(C);
  p.constraints.push_back(eq(b, identity(5), 1.0));
  p.constraints.push_back(eq(b, entry(5, 0, 0, 1.0), 0.3));
  Options opt;
  opt.record_history = true;
  const Solution s = solve(p, opt);
  ASSERT_EQ(s.status, Status::optimal);
  ASSERT_FALSE(s.history.empty());
  EXPECT_GE(s.objective_value, s.dual_objective - 1e-7);
  EXPECT_LT(s.history.back().mu, s.history.front().mu);
}

TEST(Sdp, DetectsInfeasibility) {
  // X11 = -1 has no PSD solution.
  Problem p;
  const int b = p.add_block(2, false);
  p.objective[b] = identity(2);
  p.constraints.push_back(eq(b, entry(2, 0, 0, 1.0), -1.0));
  const Solution s = solve(p);
  EXPECT_NE(s.status, Status::optimal);
}

TEST(Sdp, ValidatesProblemShape) {
  Problem p;
  const int b = p.add_block(2);
  p.constraints.push_back(eq(b, identity(3), 1.0));
  EXPECT_THROW(p.validate(), std::invalid_argument);
  Problem empty;
  empty.add_block(2);
  EXPECT_THROW(solve(empty), std::invalid_argument);
  SparseHermitian h(2);
  EXPECT_THROW(h.add(0, 0, cplx(1.0, 1.0)), std::invalid_argument);
  EXPECT_THROW(h.add(2, 0, 1.0), std::out_of_range);
}

TEST(Sdp, EmbeddingPreservesTraceInnerProducts) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXcd C = random_hermitian(4, rng), X = random_hermitian(4, rng);
    const double direct = (C * X).trace().real();
    EXPECT_NEAR(0.5 * (embed(C) * embed(X)).trace(), direct, 1e-12);
    EXPECT_LT((unembed(embed(X)) - X).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(SparseHermitian::from_dense(C).trace_product(X), direct, 1e-12);
  }
}

TEST(Sdp, RankOneExtractionRecoversVectorUpToPhase) {
  Eigen::VectorXcd v(3);
  v << cplx(0.0, 1.02), cplx(0.3, -0.4), cplx(-0.9, 0.1);
  const RankOne r = extract_rank_one(v * v.adjoint());
  EXPECT_TRUE(r.is_rank_one);
  EXPECT_LT(r.eigen_ratio, 1e-12);
  EXPECT_NEAR(r.vector(0).imag(), 0.0, 1e-12);
  EXPECT_GE(r.vector(0).real(), 0.0);
  const cplx phase = v(0) / std::abs(v(0));
  EXPECT_LT((r.vector * phase - v).norm(), 1e-10);

  Eigen::MatrixXcd two = v * v.adjoint();
  two(2, 2) += 0.5;
  EXPECT_FALSE(extract_rank_one(two).is_rank_one);
}

TEST(Sdp, SdpaDumpHeader) {
  Problem p;
  const int b = p.add_block(2);
  p.add_nonneg(1.0);
  p.objective[b] = identity(2);
  Constraint c = eq(b, entry(2, 0, 1, cplx(0.0, 1.0)), 1.0);
  c.nonneg_terms.emplace_back(0, 1.0);
  p.constraints.push_back(c);
  std::ostringstream out;
  write_sdpa(p, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.front(), '"');
  std::getline(in, line);
  std::getline(in, line);
  EXPECT_EQ(line, "1");
  std::getline(in, line);
  EXPECT_EQ(line, "2");
  std::getline(in, line);
  EXPECT_EQ(line, "4 -1");
}
