#include "gridscope/solvers.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "gridscope/numeric.hpp"

namespace gridscope {

using sdp::cplx;
using sdp::SparseHermitian;

SpecMatrices SpecMatrices::build(const AdmittanceMatrix& Y) {
  const int n1 = Y.size();
  const Eigen::MatrixXcd Yc = Y.complex();
  SpecMatrices s;
  for (int n = 0; n < n1; ++n) {
    SparseHermitian mv(n1), mp(n1), mq(n1);
    mv.add(n, n, 1.0);
    mp.add(n, n, Yc(n, n).real());
    mq.add(n, n, -Yc(n, n).imag());
    for (int k = 0; k < n1; ++k) {
      if (k == n || Yc(n, k) == cplx(0.0, 0.0)) continue;
      mp.add(n, k, 0.5 * Yc(n, k));
      mq.add(n, k, cplx(0.0, 0.5) * Yc(n, k));
    }
    s.Mv.push_back(std::move(mv));
    s.Mp.push_back(std::move(mp));
    s.Mq.push_back(std::move(mq));
  }
  s.Mobj = SparseHermitian::from_dense((-Y.B).cast<cplx>());
  return s;
}

const char* to_string(NewtonStatus s) {
  switch (s) {
    case NewtonStatus::converged: return "converged";
    case NewtonStatus::singular_jacobian: return "singular_jacobian";
    case NewtonStatus::max_iters: return "max_iters";
  }
  return "unknown";
}

namespace {

// Reduced per-instant vector [vr_0..vr_N, vi_1..vi_N].
State state_from_reduced(const Eigen::VectorXd& x, Eigen::Index offset, int n1) {
  State s{x.segment(offset, n1), Eigen::VectorXd::Zero(n1)};
  s.vi.tail(n1 - 1) = x.segment(offset + n1, n1 - 1);
  return s;
}

void write_reduced(Eigen::VectorXd& x, Eigen::Index offset, const State& s) {
  const int n1 = s.size();
  x.segment(offset, n1) = s.vr;
  x.segment(offset + n1, n1 - 1) = s.vi.tail(n1 - 1);
}

}  // namespace

NewtonResult solve_cpf_newton(const Grid& grid, const AdmittanceMatrix& Y, const CoupledSpec& spec,
                              const NewtonOptions& opt, const std::optional<std::pair<State, State>>& init) {
  validate_spec(grid, spec);
  const int n1 = grid.bus_count();
  const Eigen::Index half = 2 * n1 - 1;
  Eigen::VectorXd x(2 * half);
  const State flat = State::flat(n1);
  write_reduced(x, 0, init ? init->first : flat);
  write_reduced(x, half, init ? init->second : flat);

  auto residual = [&](const Eigen::VectorXd& z) {
    return coupled_residual(grid, Y, state_from_reduced(z, 0, n1), state_from_reduced(z, half, n1), spec);
  };

  NewtonResult res;
  Eigen::VectorXd r = residual(x);
  for (res.iterations = 0;; ++res.iterations) {
    res.residual_norm = r.lpNorm<Eigen::Infinity>();
    const auto J = coupled_jacobian(grid, Y, state_from_reduced(x, 0, n1), state_from_reduced(x, half, n1),
                                    JacobianForm::reduced)
                       .matrix;
    // Least-squares (minimum-norm) steps: at v = v' the coupled Jacobian is
    // always singular, which includes the flat start.
    Eigen::BDCSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    res.condition_estimate = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
    if (res.residual_norm < opt.tol) {
      res.status = NewtonStatus::converged;
      break;
    }
    if (res.iterations >= opt.max_iters) {
      res.status = NewtonStatus::max_iters;
      break;
    }
    const Eigen::VectorXd dx = -svd.solve(r);
    double t = 1.0;
    Eigen::VectorXd xn = x + dx;
    Eigen::VectorXd rn = residual(xn);
    if (opt.damping) {
      const double r0 = r.norm();
      int halvings = 0;
      while (!(rn.norm() < r0) && halvings < opt.max_halvings) {
        t *= 0.5;
        xn = x + t * dx;
        rn = residual(xn);
        ++halvings;
      }
      if (!(rn.norm() < r0)) {
        // No descent along the Newton direction: singular at this point
        // unless the Jacobian is still well conditioned.
        res.status = res.condition_estimate < opt.singular_condition ? NewtonStatus::max_iters
                                                                     : NewtonStatus::singular_jacobian;
        break;
      }
    }
    x = std::move(xn);
    r = std::move(rn);
  }
  res.converged = res.status == NewtonStatus::converged;
  res.v = state_from_reduced(x, 0, n1);
  res.v1 = state_from_reduced(x, half, n1);
  return res;
}

namespace {

sdp::Constraint single(int block, const SparseHermitian& m, double scale, double rhs) {
  sdp::Constraint c;
  SparseHermitian s(m.dim());
  for (const auto& [rc, v] : m.entries()) s.add(rc.first, rc.second, v * scale);
  c.blocks.emplace_back(block, std::move(s));
  c.rhs = rhs;
  return c;
}

sdp::Constraint coupling(const SparseHermitian& m, double scale) {
  sdp::Constraint c = single(0, m, scale, 0.0);
  SparseHermitian neg(m.dim());
  for (const auto& [rc, v] : m.entries()) neg.add(rc.first, rc.second, -v * scale);
  c.blocks.emplace_back(1, std::move(neg));
  return c;
}

SparseHermitian scaled(const SparseHermitian& m, double a) {
  SparseHermitian s(m.dim());
  for (const auto& [rc, v] : m.entries()) s.add(rc.first, rc.second, v * a);
  return s;
}

}  // namespace

sdp::Problem build_cpf_sdp(const Grid& grid, const SpecMatrices& mats, const CoupledSpec& spec,
                           const SparseHermitian& objective) {
  validate_spec(grid, spec);
  const int n1 = grid.bus_count();
  sdp::Problem p;
  p.add_block(n1);
  p.add_block(n1);
  p.objective[0] = objective;
  p.objective[1] = objective;
  const SpecificationSet* sets[2] = {&spec.t0, &spec.t1};
  for (int t = 0; t < 2; ++t) {
    for (auto [n, val] : sets[t]->vmag2) p.constraints.push_back(single(t, mats.Mv[n], 1.0, val));
    for (auto [n, val] : sets[t]->p) p.constraints.push_back(single(t, mats.Mp[n], 1.0, val));
    for (auto [n, val] : sets[t]->q) p.constraints.push_back(single(t, mats.Mq[n], 1.0, val));
  }
  for (int n : grid.nonmetered()) {
    p.constraints.push_back(coupling(mats.Mp[n], 1.0));
    p.constraints.push_back(coupling(mats.Mq[n], 1.0));
  }
  return p;
}

SdpCpfResult solve_cpf_sdp(const Grid& grid, const AdmittanceMatrix& Y, const CoupledSpec& spec,
                           const std::optional<SparseHermitian>& objective, const sdp::Options& options) {
  const SpecMatrices mats = SpecMatrices::build(Y);
  const sdp::Problem p = build_cpf_sdp(grid, mats, spec, objective ? *objective : mats.Mobj);
  SdpCpfResult out;
  out.solution = sdp::solve(p, options);
  out.rank0 = sdp::extract_rank_one(out.solution.blocks[0]);
  out.rank1 = sdp::extract_rank_one(out.solution.blocks[1]);
  out.v = State::from_complex(out.rank0.vector);
  out.v1 = State::from_complex(out.rank1.vector);
  out.is_rank_one = out.rank0.is_rank_one && out.rank1.is_rank_one;
  out.residual_norm = coupled_residual(grid, Y, out.v, out.v1, spec).lpNorm<Eigen::Infinity>();
  out.success = out.is_rank_one && out.residual_norm < kSdpSuccessResidual;
  return out;
}

const char* to_string(MeasurementKind k) {
  switch (k) {
    case MeasurementKind::vmag2: return "v2";
    case MeasurementKind::p: return "p";
    case MeasurementKind::q: return "q";
  }
  return "?";
}

MeasurementKind measurement_kind_from_string(const std::string& s) {
  if (s == "v2") return MeasurementKind::vmag2;
  if (s == "p") return MeasurementKind::p;
  if (s == "q") return MeasurementKind::q;
  throw std::invalid_argument("unknown measurement kind '" + s + "'");
}

std::vector<Measurement> read_measurements_csv(std::istream& in) {
  std::vector<Measurement> out;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (!header_seen) {
      header_seen = true;
      if (!f.empty() && f[0] == "time") continue;
    }
    if (f.size() != 5) throw std::invalid_argument("measurement line " + std::to_string(lineno) + ": expected 5 fields");
    try {
      Measurement m;
      m.time = std::stoi(f[0]);
      m.bus = std::stoi(f[1]);
      m.kind = measurement_kind_from_string(f[2]);
      m.value = std::stod(f[3]);
      m.sigma = std::stod(f[4]);
      if (m.time != 0 && m.time != 1) throw std::invalid_argument("time must be 0 or 1");
      if (m.bus < 0) throw std::invalid_argument("negative bus index");
      if (!(m.sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
      out.push_back(m);
    } catch (const std::logic_error& e) {
      throw std::invalid_argument("measurement line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_measurements_csv(std::ostream& out, const std::vector<Measurement>& ms) {
  out << "time,bus,kind,value,sigma\n";
  out.precision(17);
  for (const auto& m : ms)
    out << m.time << "," << m.bus << "," << to_string(m.kind) << "," << m.value << "," << m.sigma << "\n";
}

const char* to_string(CostKind c) { return c == CostKind::wls ? "wls" : "wlav"; }

CostKind cost_kind_from_string(const std::string& s) {
  if (s == "wls") return CostKind::wls;
  if (s == "wlav") return CostKind::wlav;
  throw std::invalid_argument("unknown cost '" + s + "'");
}

namespace {

void validate_measurements(const Grid& grid, const std::vector<Measurement>& ms) {
  if (ms.empty()) throw std::invalid_argument("empty measurement set");
  bool times[2] = {false, false};
  for (const auto& m : ms) {
    if (m.time != 0 && m.time != 1) throw std::invalid_argument("measurement time must be 0 or 1");
    if (m.bus < 0 || m.bus > grid.n()) throw std::invalid_argument("measurement bus out of range");
    if (!(m.sigma > 0.0)) throw std::invalid_argument("measurement sigma must be positive");
    if (!std::isfinite(m.value)) throw std::invalid_argument("measurement value must be finite");
    const BusClass c = grid.bus(m.bus).cls;
    const bool ok = m.kind == MeasurementKind::vmag2 ? (c == BusClass::substation || c == BusClass::metered)
                                                     : (c == BusClass::conventional || c == BusClass::metered);
    if (!ok)
      throw std::invalid_argument(std::string("measurement kind ") + to_string(m.kind) + " not available at bus " +
                                  std::to_string(m.bus));
    times[m.time] = true;
  }
  if (!times[0] || !times[1]) throw std::invalid_argument("measurements must cover both time instants");
}

}  // namespace

sdp::Problem build_cpsse_sdp(const Grid& grid, const SpecMatrices& mats, const std::vector<Measurement>& ms,
                             const CpsseConfig& cfg) {
  validate_measurements(grid, ms);
  if (!(cfg.alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  if (!(cfg.coupling_sigma > 0.0)) throw std::invalid_argument("coupling sigma must be > 0");
  const int n1 = grid.bus_count();
  sdp::Problem p;
  p.add_block(n1);
  p.add_block(n1);
  if (cfg.alpha > 0.0) {
    p.objective[0] = scaled(mats.Mobj, cfg.alpha);
    p.objective[1] = scaled(mats.Mobj, cfg.alpha);
  }

  // Attaches a residual to constraint c (already divided by sigma).
  auto attach = [&](sdp::Constraint c) {
    if (cfg.cost == CostKind::wls) {
      const int w = p.add_block(2, false);
      p.objective[w].add(0, 0, 1.0);
      SparseHermitian off(2);
      off.add(0, 1, 0.5);
      c.blocks.emplace_back(w, std::move(off));
      p.constraints.push_back(std::move(c));
      sdp::Constraint unit;
      SparseHermitian e11(2);
      e11.add(1, 1, 1.0);
      unit.blocks.emplace_back(w, std::move(e11));
      unit.rhs = 1.0;
      p.constraints.push_back(std::move(unit));
    } else {
      const int up = p.add_nonneg(1.0);
      const int um = p.add_nonneg(1.0);
      c.nonneg_terms = {{up, 1.0}, {um, -1.0}};
      p.constraints.push_back(std::move(c));
    }
  };

  for (const auto& m : ms) {
    const auto& mat = m.kind == MeasurementKind::vmag2 ? mats.Mv[m.bus]
                      : m.kind == MeasurementKind::p   ? mats.Mp[m.bus]
                                                       : mats.Mq[m.bus];
    attach(single(m.time, mat, 1.0 / m.sigma, m.value / m.sigma));
  }
  for (int n : grid.nonmetered()) {
    attach(coupling(mats.Mp[n], 1.0 / cfg.coupling_sigma));
    attach(coupling(mats.Mq[n], 1.0 / cfg.coupling_sigma));
  }
  if (cfg.load_sign_constraints) {
    for (int n : grid.nonmetered())
      for (int t = 0; t < 2; ++t) {
        sdp::Constraint c = single(t, mats.Mp[n], 1.0, -cfg.sign_margin);
        c.relation = sdp::Relation::less_equal;
        p.constraints.push_back(std::move(c));
      }
  }
  return p;
}

State magnitude_anchored_state(const Eigen::MatrixXcd& block) {
  const sdp::RankOne r = sdp::extract_rank_one(block, 0.0);
  Eigen::VectorXcd v(block.rows());
  for (Eigen::Index n = 0; n < v.size(); ++n)
    v(n) = std::polar(std::sqrt(std::max(0.0, block(n, n).real())), std::arg(r.vector(n)));
  return State::from_complex(v);
}

CpsseResult solve_cpsse(const Grid& grid, const AdmittanceMatrix& Y, const std::vector<Measurement>& ms,
                        const CpsseConfig& cfg, const sdp::Options& options) {
  const SpecMatrices mats = SpecMatrices::build(Y);
  const sdp::Problem p = build_cpsse_sdp(grid, mats, ms, cfg);
  CpsseResult out;
  out.solution = sdp::solve(p, options);
  out.rank0 = sdp::extract_rank_one(out.solution.blocks[0]);
  out.rank1 = sdp::extract_rank_one(out.solution.blocks[1]);
  out.is_rank_one = out.rank0.is_rank_one && out.rank1.is_rank_one;
  out.v = out.rank0.is_rank_one ? State::from_complex(out.rank0.vector) : magnitude_anchored_state(out.solution.blocks[0]);
  out.v1 = out.rank1.is_rank_one ? State::from_complex(out.rank1.vector) : magnitude_anchored_state(out.solution.blocks[1]);
  double cost = 0.0;
  if (cfg.cost == CostKind::wls) {
    for (std::size_t b = 2; b < out.solution.blocks.size(); ++b) cost += out.solution.blocks[b](0, 0).real();
  } else {
    cost = out.solution.nonneg_values.sum();
  }
  out.data_cost = cost;
  return out;
}

double state_rmse(const State& v, const State& v1, const State& t, const State& t1) {
  const double s = (v.vr - t.vr).squaredNorm() + (v.vi - t.vi).squaredNorm() + (v1.vr - t1.vr).squaredNorm() +
                   (v1.vi - t1.vi).squaredNorm();
  return std::sqrt(s / (2.0 * (v.size() + v1.size())));
}

}  // namespace gridscope
