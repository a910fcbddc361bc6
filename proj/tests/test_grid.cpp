#include <gtest/gtest.h>

#include <string>

#include "gridscope/grid.hpp"
#include "support.hpp"

using namespace gridscope;

namespace {

std::string feeder_json(const std::string& buses, const std::string& lines) {
  return R"({"header": {"name": "t"}, "buses": [)" + buses + R"(], "lines": [)" + lines + "]}";
}

const std::string kThreeBuses =
    R"({"index": 0, "class": "S"}, {"index": 1, "class": "C", "p_load": 0.1, "q_load": 0.05},
       {"index": 2, "class": "M", "p_load": 0.2, "q_load": 0.0, "pv_capacity": 0.3})";

GridErrorKind error_kind(const std::string& text) {
  try {
    parse_grid(text);
  } catch (const GridError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no GridError for " << text;
  return GridErrorKind::parse;
}

}  // namespace

TEST(Grid, ParsesBundledFeeder) {
  const Grid g = gstest::ieee34();
  EXPECT_EQ(g.n(), 33);
  EXPECT_EQ(static_cast<int>(g.lines().size()), 33);
  EXPECT_EQ(g.bus(0).cls, BusClass::substation);
  for (int k = 1; k <= g.n(); ++k) EXPECT_GE(g.parent(k), 0);
}

TEST(Grid, ParsesLoadsAndClasses) {
  const Grid g = parse_grid(feeder_json(kThreeBuses, R"({"from": 0, "to": 1, "r": 0.01, "x": 0.02},
                                                         {"from": 1, "to": 2, "r": 0.01, "x": 0.02})"));
  EXPECT_EQ(g.bus(2).cls, BusClass::metered);
  EXPECT_DOUBLE_EQ(g.bus(1).base_load.real(), 0.1);
  EXPECT_DOUBLE_EQ(g.bus(1).base_load.imag(), 0.05);
  EXPECT_DOUBLE_EQ(g.bus(2).pv_capacity, 0.3);
  EXPECT_EQ(g.metered(), std::vector<int>{2});
}

TEST(Grid, RejectsStructuralErrors) {
  const std::string ok_lines = R"({"from": 0, "to": 1, "r": 0.01, "x": 0.02}, {"from": 1, "to": 2, "r": 0.01, "x": 0.02})";
  EXPECT_EQ(error_kind("{not json"), GridErrorKind::parse);
  EXPECT_EQ(error_kind(feeder_json(R"({"index": 0, "class": "S"})", "")), GridErrorKind::empty_grid);
  EXPECT_EQ(error_kind(feeder_json(R"({"index": 0, "class": "S"}, {"index": 2, "class": "C"})", ok_lines)),
            GridErrorKind::bus_index);
  EXPECT_EQ(error_kind(feeder_json(R"({"index": 0, "class": "C"}, {"index": 1, "class": "C"},
                                      {"index": 2, "class": "C"})",
                                   ok_lines)),
            GridErrorKind::missing_substation);
  EXPECT_EQ(error_kind(feeder_json(kThreeBuses, R"({"from": 0, "to": 1, "r": 0.01, "x": 0.02},
                                                   {"from": 1, "to": 7, "r": 0.01, "x": 0.02})")),
            GridErrorKind::unknown_bus);
  EXPECT_EQ(error_kind(feeder_json(kThreeBuses, R"({"from": 0, "to": 1, "r": 0.01, "x": 0.02},
                                                   {"from": 2, "to": 2, "r": 0.01, "x": 0.02})")),
            GridErrorKind::self_loop);
  EXPECT_EQ(error_kind(feeder_json(kThreeBuses, R"({"from": 0, "to": 1, "r": 0.01, "x": 0.0},
                                                   {"from": 1, "to": 2, "r": 0.01, "x": 0.02})")),
            GridErrorKind::bad_impedance);
  EXPECT_EQ(error_kind(feeder_json(kThreeBuses, R"({"from": 0, "to": 1, "r": 0.01, "x": 0.02},
                                                   {"from": 1, "to": 0, "r": 0.01, "x": 0.02})")),
            GridErrorKind::duplicate_line);
  EXPECT_EQ(error_kind(feeder_json(kThreeBuses, R"({"from": 0, "to": 1, "r": 0.01, "x": 0.02},
                                                   {"from": 1, "to": 2, "r": 0.01, "x": 0.02},
                                                   {"from": 0, "to": 2, "r": 0.01, "x": 0.02})")),
            GridErrorKind::cycle);
  EXPECT_EQ(error_kind(feeder_json(kThreeBuses, R"({"from": 0, "to": 1, "r": 0.01, "x": 0.02})")),
            GridErrorKind::disconnected);
  EXPECT_EQ(error_kind(feeder_json(kThreeBuses, R"({"from": 0, "to": 1, "r": 0.01, "x": 0.02},
                                                   {"from": 0, "to": 2, "r": 0.01, "x": 0.02})")),
            GridErrorKind::substation_degree);
}

TEST(Grid, AdmittanceIsLaplacianOfLines) {
  const Grid g = gstest::ieee34();
  const AdmittanceMatrix Y = build_admittance(g);
  ASSERT_EQ(Y.size(), 34);
  EXPECT_LT((Y.G - Y.G.transpose()).norm(), 1e-12);
  EXPECT_LT((Y.B - Y.B.transpose()).norm(), 1e-12);
  // No shunts: rows sum to zero.
  EXPECT_LT(Y.G.rowwise().sum().cwiseAbs().maxCoeff(), 1e-9 * Y.G.cwiseAbs().maxCoeff());
  EXPECT_LT(Y.B.rowwise().sum().cwiseAbs().maxCoeff(), 1e-9 * Y.B.cwiseAbs().maxCoeff());
  for (const auto& ln : g.lines()) {
    const auto y = ln.admittance();
    EXPECT_NEAR(Y.G(ln.from, ln.to), -y.real(), 1e-9 * std::abs(y));
    EXPECT_NEAR(Y.B(ln.from, ln.to), -y.imag(), 1e-9 * std::abs(y));
  }
}

TEST(Grid, ReducedAdmittanceFactorsThroughIncidence) {
  const Grid g = gstest::ieee34();
  const AdmittanceMatrix Y = build_admittance(g);
  const Eigen::MatrixXd A = incidence_matrix(g);
  ASSERT_EQ(A.rows(), A.cols());
  EXPECT_GT(std::abs(A.determinant()), 0.5);
  const Eigen::MatrixXd Gr = A.transpose() * line_conductances(g).asDiagonal() * A;
  const Eigen::MatrixXd Br = A.transpose() * line_susceptances(g).asDiagonal() * A;
  const Eigen::Index n = g.n();
  EXPECT_LT((Gr - Y.G.bottomRightCorner(n, n)).norm(), 1e-9 * Gr.norm());
  EXPECT_LT((Br - Y.B.bottomRightCorner(n, n)).norm(), 1e-9 * Br.norm());
}

TEST(Grid, ReclassifiedRelabelsEveryOtherBusConventional) {
  const Grid g = gstest::ieee34().reclassified({6, 19}, {4});
  EXPECT_EQ(g.metered(), (std::vector<int>{6, 19}));
  EXPECT_EQ(g.nonmetered(), std::vector<int>{4});
  EXPECT_EQ(static_cast<int>(g.conventional().size()), 33 - 3);
  EXPECT_THROW(gstest::ieee34().reclassified({6}, {6}), std::invalid_argument);
}
