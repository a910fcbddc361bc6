#include "gridscope/pfmodel.hpp"

#include <cmath>

namespace gridscope {

State State::flat(int bus_count) {
  return State{Eigen::VectorXd::Ones(bus_count), Eigen::VectorXd::Zero(bus_count)};
}

State State::from_complex(const Eigen::VectorXcd& v) { return State{v.real(), v.imag()}; }

State State::from_stacked(const Eigen::VectorXd& v) {
  if (v.size() % 2 != 0) throw std::invalid_argument("stacked state must have even length");
  const Eigen::Index n = v.size() / 2;
  return State{v.head(n), v.tail(n)};
}

Eigen::VectorXcd State::complex() const {
  Eigen::VectorXcd v(vr.size());
  v.real() = vr;
  v.imag() = vi;
  return v;
}

Eigen::VectorXd State::stacked() const {
  Eigen::VectorXd v(2 * vr.size());
  v << vr, vi;
  return v;
}

double vmag2(const State& state, int bus) {
  if (bus < 0 || bus >= state.size()) throw std::out_of_range("bus index out of range");
  return state.vr(bus) * state.vr(bus) + state.vi(bus) * state.vi(bus);
}

Eigen::VectorXd vmag2(const State& state) {
  return state.vr.array().square() + state.vi.array().square();
}

namespace {

void check_dims(const State& s, const AdmittanceMatrix& Y) {
  if (s.vr.size() != s.vi.size() || s.vr.size() != Y.G.rows())
    throw std::invalid_argument("state and admittance dimensions differ");
}

}  // namespace

Injections injections(const State& s, const AdmittanceMatrix& Y) {
  check_dims(s, Y);
  const Eigen::VectorXd a = Y.G * s.vr - Y.B * s.vi;  // Re(Yv)
  const Eigen::VectorXd b = Y.G * s.vi + Y.B * s.vr;  // Im(Yv)
  return Injections{s.vr.cwiseProduct(a) + s.vi.cwiseProduct(b), s.vi.cwiseProduct(a) - s.vr.cwiseProduct(b)};
}

Jacobians jacobians(const State& s, const AdmittanceMatrix& Y) {
  check_dims(s, Y);
  const Eigen::Index n = s.vr.size();
  const Eigen::VectorXd a = Y.G * s.vr - Y.B * s.vi;
  const Eigen::VectorXd b = Y.G * s.vi + Y.B * s.vr;
  const auto Dr = s.vr.asDiagonal();
  const auto Di = s.vi.asDiagonal();

  Jacobians J;
  J.m = Eigen::MatrixXd::Zero(n, 2 * n);
  J.m.leftCols(n).diagonal() = 2.0 * s.vr;
  J.m.rightCols(n).diagonal() = 2.0 * s.vi;

  J.p.resize(n, 2 * n);
  J.p.leftCols(n) = Dr * Y.G + Di * Y.B;
  J.p.leftCols(n).diagonal() += a;
  J.p.rightCols(n) = Di * Y.G - Dr * Y.B;
  J.p.rightCols(n).diagonal() += b;

  J.q.resize(n, 2 * n);
  J.q.leftCols(n) = Di * Y.G - Dr * Y.B;
  J.q.leftCols(n).diagonal() -= b;
  J.q.rightCols(n) = -(Di * Y.B + Dr * Y.G);
  J.q.rightCols(n).diagonal() += a;
  return J;
}

SpecificationSet specify(const Grid& grid, const AdmittanceMatrix& Y, const State& state) {
  const Injections s = injections(state, Y);
  SpecificationSet spec;
  for (const auto& bus : grid.buses()) {
    const int n = bus.index;
    if (bus.cls == BusClass::substation || bus.cls == BusClass::metered) spec.vmag2[n] = vmag2(state, n);
    if (bus.cls == BusClass::conventional || bus.cls == BusClass::metered) {
      spec.p[n] = s.p(n);
      spec.q[n] = s.q(n);
    }
  }
  return spec;
}

CoupledSpec specify(const Grid& grid, const AdmittanceMatrix& Y, const State& v, const State& v1) {
  return CoupledSpec{specify(grid, Y, v), specify(grid, Y, v1)};
}

void validate_spec(const Grid& grid, const SpecificationSet& spec) {
  auto expect_keys = [](const std::map<int, double>& m, const std::vector<int>& keys, const char* what) {
    if (m.size() != keys.size()) throw SpecError(std::string(what) + " entries do not match the classification");
    for (int k : keys)
      if (!m.count(k))
        throw SpecError(std::string(what) + " specification missing for bus " + std::to_string(k));
  };
  const CoupledLayout layout(grid, JacobianForm::reduced);
  expect_keys(spec.vmag2, layout.magnitude_buses, "magnitude");
  expect_keys(spec.p, layout.injection_buses, "active power");
  expect_keys(spec.q, layout.injection_buses, "reactive power");
  for (auto [bus, value] : spec.vmag2)
    if (!(value > 0.0)) throw SpecError("magnitude specification at bus " + std::to_string(bus) + " must be > 0");
  for (const auto* m : {&spec.p, &spec.q})
    for (auto [bus, value] : *m)
      if (!std::isfinite(value)) throw SpecError("non-finite injection at bus " + std::to_string(bus));
}

void validate_spec(const Grid& grid, const CoupledSpec& spec) {
  validate_spec(grid, spec.t0);
  validate_spec(grid, spec.t1);
}

CoupledLayout::CoupledLayout(const Grid& grid, JacobianForm f) : form(f), bus_count(grid.bus_count()) {
  for (const auto& bus : grid.buses()) {
    if (bus.cls == BusClass::substation || bus.cls == BusClass::metered) magnitude_buses.push_back(bus.index);
    if (bus.cls == BusClass::conventional || bus.cls == BusClass::metered) injection_buses.push_back(bus.index);
    if (bus.cls == BusClass::nonmetered) coupled_buses.push_back(bus.index);
  }
}

int CoupledLayout::instant_rows() const {
  return angle_rows() + static_cast<int>(magnitude_buses.size()) + 2 * static_cast<int>(injection_buses.size());
}

int CoupledLayout::instant_cols() const {
  return form == JacobianForm::analysis ? 2 * bus_count : 2 * bus_count - 1;
}

std::vector<int> instant_columns(int bus_count, JacobianForm form) {
  std::vector<int> cols;
  for (int k = 0; k < 2 * bus_count; ++k)
    if (form == JacobianForm::analysis || k != bus_count) cols.push_back(k);
  return cols;
}

Eigen::VectorXd coupled_residual(const Grid& grid, const AdmittanceMatrix& Y, const State& v, const State& v1,
                                 const CoupledSpec& spec) {
  validate_spec(grid, spec);
  const CoupledLayout L(grid, JacobianForm::reduced);
  Eigen::VectorXd r(L.rows());
  const Injections s0 = injections(v, Y);
  const Injections s1 = injections(v1, Y);

  auto fill_instant = [&](int offset, const State& st, const Injections& s, const SpecificationSet& sp) {
    int k = offset;
    for (int n : L.magnitude_buses) r(k++) = vmag2(st, n) - sp.vmag2.at(n);
    for (int n : L.injection_buses) r(k++) = s.q(n) - sp.q.at(n);
    for (int n : L.injection_buses) r(k++) = s.p(n) - sp.p.at(n);
  };
  fill_instant(0, v, s0, spec.t0);
  int k = L.coupling_offset();
  for (int n : L.coupled_buses) r(k++) = s0.p(n) - s1.p(n);
  for (int n : L.coupled_buses) r(k++) = s0.q(n) - s1.q(n);
  fill_instant(L.second_offset(), v1, s1, spec.t1);
  return r;
}

CoupledJacobian coupled_jacobian(const Grid& grid, const AdmittanceMatrix& Y, const State& v, const State& v1,
                                 JacobianForm form) {
  const CoupledLayout L(grid, form);
  const std::vector<int> cols = instant_columns(grid.bus_count(), form);
  const int nc = L.instant_cols();
  const Jacobians J0 = jacobians(v, Y);
  const Jacobians J1 = jacobians(v1, Y);

  CoupledJacobian out;
  out.matrix = Eigen::MatrixXd::Zero(L.rows(), L.cols());
  auto copy_row = [&](const Eigen::MatrixXd& src, int src_row, int dst_row, int col_offset, double sign) {
    for (int c = 0; c < nc; ++c) out.matrix(dst_row, col_offset + c) = sign * src(src_row, cols[c]);
  };
  auto fill_instant = [&](int row, int col_offset, const Jacobians& J) {
    if (form == JacobianForm::analysis) out.matrix(row++, col_offset + grid.bus_count()) = 1.0;
    for (int n : L.magnitude_buses) copy_row(J.m, n, row++, col_offset, 1.0);
    for (int n : L.injection_buses) copy_row(J.q, n, row++, col_offset, 1.0);
    for (int n : L.injection_buses) copy_row(J.p, n, row++, col_offset, 1.0);
  };
  fill_instant(0, 0, J0);
  int row = L.coupling_offset();
  for (int n : L.coupled_buses) {
    copy_row(J0.p, n, row, 0, 1.0);
    copy_row(J1.p, n, row++, nc, -1.0);
  }
  for (int n : L.coupled_buses) {
    copy_row(J0.q, n, row, 0, 1.0);
    copy_row(J1.q, n, row++, nc, -1.0);
  }
  fill_instant(L.second_offset(), nc, J1);
  out.split_row = L.instant_rows() + static_cast<Eigen::Index>(L.coupled_buses.size());
  out.split_col = nc;
  return out;
}

}  // namespace gridscope
