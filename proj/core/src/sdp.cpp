#include "gridscope/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "sdp_internal.hpp"

namespace gridscope::sdp {

const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::max_iters: return "max_iters";
    case Status::infeasible: return "infeasible";
    case Status::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

namespace detail {

namespace {

void add_entry(std::vector<SymEntry>& out, int r, int c, double v) {
  if (v == 0.0) return;
  if (r > c) std::swap(r, c);
  out.push_back({r, c, v});
}

// Real coefficient entries of a Hermitian matrix embedded and halved, or of a
// real symmetric matrix copied as is.
std::vector<SymEntry> real_entries(const SparseHermitian& m, bool hermitian) {
  std::vector<SymEntry> out;
  const int n = m.dim();
  for (const auto& [rc, v] : m.entries()) {
    const auto [a, c] = rc;
    if (!hermitian) {
      add_entry(out, a, c, v.real());
      continue;
    }
    if (a == c) {
      add_entry(out, a, a, 0.5 * v.real());
      add_entry(out, a + n, a + n, 0.5 * v.real());
    } else {
      add_entry(out, a, c, 0.5 * v.real());
      add_entry(out, a + n, c + n, 0.5 * v.real());
      add_entry(out, a, c + n, -0.5 * v.imag());
      add_entry(out, c, a + n, 0.5 * v.imag());
    }
  }
  // merge duplicates
  std::sort(out.begin(), out.end(), [](const SymEntry& x, const SymEntry& y) {
    return std::pair{x.r, x.c} < std::pair{y.r, y.c};
  });
  std::vector<SymEntry> merged;
  for (const auto& e : out) {
    if (!merged.empty() && merged.back().r == e.r && merged.back().c == e.c)
      merged.back().v += e.v;
    else
      merged.push_back(e);
  }
  return merged;
}

double entries_norm2(const std::vector<SymEntry>& e) {
  double s = 0.0;
  for (const auto& x : e) s += (x.r == x.c ? 1.0 : 2.0) * x.v * x.v;
  return s;
}

}  // namespace

BlockCoef make_coef(int con, std::vector<SymEntry> entries) {
  BlockCoef bc;
  bc.con = con;
  bc.entries = std::move(entries);
  for (const auto& e : bc.entries) {
    bc.support.push_back(e.r);
    bc.support.push_back(e.c);
  }
  std::sort(bc.support.begin(), bc.support.end());
  bc.support.erase(std::unique(bc.support.begin(), bc.support.end()), bc.support.end());
  const auto k = static_cast<Eigen::Index>(bc.support.size());
  bc.local = Eigen::MatrixXd::Zero(k, k);
  auto pos = [&](int idx) {
    return static_cast<Eigen::Index>(std::lower_bound(bc.support.begin(), bc.support.end(), idx) - bc.support.begin());
  };
  for (const auto& e : bc.entries) {
    const auto i = pos(e.r), j = pos(e.c);
    bc.local(i, j) += e.v;
    if (i != j) bc.local(j, i) += e.v;
  }
  return bc;
}

RealProblem to_real(const Problem& p) {
  p.validate();
  RealProblem rp;
  rp.m = static_cast<int>(p.constraints.size());
  const int nb = static_cast<int>(p.blocks.size());
  rp.dims.resize(static_cast<std::size_t>(nb));
  rp.coefs.resize(static_cast<std::size_t>(nb));
  rp.C.resize(static_cast<std::size_t>(nb));
  for (int b = 0; b < nb; ++b) {
    const auto& spec = p.blocks[b];
    rp.dims[b] = spec.hermitian ? 2 * spec.dim : spec.dim;
    rp.norm_weight.push_back(spec.hermitian ? 2.0 : 1.0);
    rp.C[b] = Eigen::MatrixXd::Zero(rp.dims[b], rp.dims[b]);
    if (b < static_cast<int>(p.objective.size()))
      for (const auto& e : real_entries(p.objective[b], spec.hermitian)) {
        rp.C[b](e.r, e.c) += e.v;
        if (e.r != e.c) rp.C[b](e.c, e.r) += e.v;
      }
  }

  int slacks = 0;
  for (const auto& c : p.constraints) slacks += c.relation == Relation::less_equal;
  rp.nl = p.nonneg_count() + slacks;
  rp.nf = p.free_count();
  rp.Al = Eigen::MatrixXd::Zero(rp.m, rp.nl);
  rp.F = Eigen::MatrixXd::Zero(rp.m, rp.nf);
  rp.cl = Eigen::VectorXd::Zero(rp.nl);
  rp.cf = Eigen::VectorXd::Zero(rp.nf);
  for (int k = 0; k < p.nonneg_count(); ++k) rp.cl(k) = p.nonneg_cost[k];
  for (int k = 0; k < rp.nf; ++k) rp.cf(k) = p.free_cost[k];
  rp.b.resize(rp.m);
  rp.slack_of.assign(static_cast<std::size_t>(rp.m), -1);

  int next_slack = p.nonneg_count();
  for (int i = 0; i < rp.m; ++i) {
    const auto& con = p.constraints[i];
    rp.b(i) = con.rhs;
    for (const auto& [blk, mat] : con.blocks) {
      auto entries = real_entries(mat, p.blocks[blk].hermitian);
      if (!entries.empty()) rp.coefs[blk].push_back(make_coef(i, std::move(entries)));
    }
    for (auto [k, v] : con.free_terms) rp.F(i, k) += v;
    for (auto [k, v] : con.nonneg_terms) rp.Al(i, k) += v;
    if (con.relation == Relation::less_equal) {
      rp.Al(i, next_slack) = 1.0;
      rp.slack_of[i] = next_slack++;
    }
  }
  return rp;
}

Eigen::VectorXd row_norms(const RealProblem& rp) {
  Eigen::VectorXd s = rp.Al.rowwise().squaredNorm() + rp.F.rowwise().squaredNorm();
  for (std::size_t b = 0; b < rp.coefs.size(); ++b)
    for (const auto& bc : rp.coefs[b]) s(bc.con) += rp.norm_weight[b] * entries_norm2(bc.entries);
  return s.cwiseSqrt();
}

void scale(RealProblem& rp, const Eigen::VectorXd& row_scale, double obj_scale) {
  for (auto& list : rp.coefs)
    for (auto& bc : list) {
      for (auto& e : bc.entries) e.v /= row_scale(bc.con);
      bc.local /= row_scale(bc.con);
    }
  for (int i = 0; i < rp.m; ++i) {
    rp.Al.row(i) /= row_scale(i);
    rp.F.row(i) /= row_scale(i);
    rp.b(i) /= row_scale(i);
  }
  for (auto& C : rp.C) C /= obj_scale;
  rp.cl /= obj_scale;
  rp.cf /= obj_scale;
}

}  // namespace detail

namespace {

using detail::BlockCoef;
using detail::RealProblem;

double inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a.array() * b.array()).sum(); }

// tr(A M) for symmetric coefficient A; M need not be symmetric.
double apply_coef(const BlockCoef& bc, const Eigen::MatrixXd& M) {
  double s = 0.0;
  for (const auto& e : bc.entries) s += e.r == e.c ? e.v * M(e.r, e.r) : e.v * (M(e.r, e.c) + M(e.c, e.r));
  return s;
}

struct Iterate {
  std::vector<Eigen::MatrixXd> X, Z;
  Eigen::VectorXd xl, zl, xf, y;
};

struct Direction {
  std::vector<Eigen::MatrixXd> dX, dZ;
  Eigen::VectorXd dxl, dzl, dxf, dy;
};

class Engine {
 public:
  Engine(const RealProblem& rp, const Options& opt, const Eigen::VectorXd& row_scale, double obj_scale)
      : rp_(rp), opt_(opt), row_scale_(row_scale), obj_scale_(obj_scale) {
    nb_ = static_cast<int>(rp.dims.size());
    n_total_ = rp.nl;
    for (int d : rp.dims) n_total_ += d;
    b_orig_norm_ = row_scale.cwiseProduct(rp.b).norm();
    double c2 = rp.cl.squaredNorm() + rp.cf.squaredNorm();
    for (int b = 0; b < nb_; ++b) c2 += rp.norm_weight[b] * rp.C[b].squaredNorm();
    c_orig_norm_ = obj_scale * std::sqrt(c2);
  }

  Solution run(Iterate& it, std::vector<IterateRecord>* history, Status& status, int& iters);

 private:
  struct Metrics {
    Residuals res;
    double pobj = 0.0, dobj = 0.0, mu = 0.0;
  };

  void initial_point(Iterate& it) const;
  Eigen::VectorXd primal_map(const std::vector<Eigen::MatrixXd>& X, const Eigen::VectorXd& xl,
                             const Eigen::VectorXd& xf) const;
  Eigen::MatrixXd dual_map(int b, const Eigen::VectorXd& y) const;
  Metrics metrics(const Iterate& it, const Eigen::VectorXd& Rp, const std::vector<Eigen::MatrixXd>& Rd,
                  const Eigen::VectorXd& rdl, const Eigen::VectorXd& rdf) const;
  bool assemble_schur(const Iterate& it, const std::vector<Eigen::MatrixXd>& Zinv);
  bool factor();
  Eigen::MatrixXd approx_solve(const Eigen::MatrixXd& rhs) const;
  Eigen::MatrixXd schur_solve(const Eigen::MatrixXd& rhs) const;
  void solve_direction(const Iterate& it, const std::vector<Eigen::MatrixXd>& Zinv, const Eigen::VectorXd& Rp,
                       const std::vector<Eigen::MatrixXd>& Rd, const Eigen::VectorXd& rdl,
                       const Eigen::VectorXd& rdf, const std::vector<Eigen::MatrixXd>& Rc,
                       const Eigen::VectorXd& rcl, Direction& d) const;
  static double max_step_psd(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dX);
  static double max_step_lp(const Eigen::VectorXd& x, const Eigen::VectorXd& dx);

  const RealProblem& rp_;
  const Options& opt_;
  Eigen::VectorXd row_scale_;
  double obj_scale_;
  int nb_ = 0;
  int n_total_ = 0;
  double b_orig_norm_ = 0.0;
  double c_orig_norm_ = 0.0;

  Eigen::MatrixXd H_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd dscale_;
  Eigen::MatrixXd HinvF_;
  Eigen::PartialPivLU<Eigen::MatrixXd> free_lu_;
};

void Engine::initial_point(Iterate& it) const {
  it.X.resize(static_cast<std::size_t>(nb_));
  it.Z.resize(static_cast<std::size_t>(nb_));
  for (int b = 0; b < nb_; ++b) {
    const int n = rp_.dims[b];
    double xi = std::max(10.0, std::sqrt(static_cast<double>(n)));
    double eta = std::max({10.0, std::sqrt(static_cast<double>(n)), rp_.C[b].norm()});
    for (const auto& bc : rp_.coefs[b]) {
      const double an = std::sqrt(bc.local.squaredNorm());
      xi = std::max(xi, n * (1.0 + std::abs(rp_.b(bc.con))) / (1.0 + an));
      eta = std::max(eta, an);
    }
    it.X[b] = xi * Eigen::MatrixXd::Identity(n, n);
    it.Z[b] = eta * Eigen::MatrixXd::Identity(n, n);
  }
  double xi = 10.0, eta = std::max(10.0, rp_.cl.size() ? rp_.cl.cwiseAbs().maxCoeff() : 0.0);
  for (int i = 0; i < rp_.m; ++i) {
    const double an = rp_.Al.row(i).norm();
    if (an > 0.0) xi = std::max(xi, (1.0 + std::abs(rp_.b(i))) / (1.0 + an));
  }
  it.xl = Eigen::VectorXd::Constant(rp_.nl, xi);
  it.zl = Eigen::VectorXd::Constant(rp_.nl, eta);
  it.xf = Eigen::VectorXd::Zero(rp_.nf);
  it.y = Eigen::VectorXd::Zero(rp_.m);
}

Eigen::VectorXd Engine::primal_map(const std::vector<Eigen::MatrixXd>& X, const Eigen::VectorXd& xl,
                                   const Eigen::VectorXd& xf) const {
  Eigen::VectorXd out = rp_.Al * xl + rp_.F * xf;
  for (int b = 0; b < nb_; ++b)
    for (const auto& bc : rp_.coefs[b]) out(bc.con) += apply_coef(bc, X[b]);
  return out;
}

Eigen::MatrixXd Engine::dual_map(int b, const Eigen::VectorXd& y) const {
  const int n = rp_.dims[b];
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (const auto& bc : rp_.coefs[b]) {
    const double yi = y(bc.con);
    if (yi == 0.0) continue;
    for (const auto& e : bc.entries) {
      out(e.r, e.c) += yi * e.v;
      if (e.r != e.c) out(e.c, e.r) += yi * e.v;
    }
  }
  return out;
}

Engine::Metrics Engine::metrics(const Iterate& it, const Eigen::VectorXd& Rp, const std::vector<Eigen::MatrixXd>& Rd,
                                const Eigen::VectorXd& rdl, const Eigen::VectorXd& rdf) const {
  Metrics m;
  double pobj = rp_.cl.dot(it.xl) + rp_.cf.dot(it.xf);
  double xz = it.xl.dot(it.zl);
  double rd2 = rdl.squaredNorm() + rdf.squaredNorm();
  for (int b = 0; b < nb_; ++b) {
    pobj += inner(rp_.C[b], it.X[b]);
    xz += inner(it.X[b], it.Z[b]);
    rd2 += rp_.norm_weight[b] * Rd[b].squaredNorm();
  }
  const double dobj = rp_.b.dot(it.y);
  m.pobj = obj_scale_ * pobj;
  m.dobj = obj_scale_ * dobj;
  m.mu = xz / std::max(1, n_total_);
  m.res.primal = row_scale_.cwiseProduct(Rp).norm() / (1.0 + b_orig_norm_);
  m.res.dual = obj_scale_ * std::sqrt(rd2) / (1.0 + c_orig_norm_);
  m.res.gap = std::abs(m.pobj - m.dobj) / (1.0 + std::abs(m.pobj) + std::abs(m.dobj));
  return m;
}

bool Engine::assemble_schur(const Iterate& it, const std::vector<Eigen::MatrixXd>& Zinv) {
  const int m = rp_.m;
  H_ = Eigen::MatrixXd::Zero(m, m);
  for (int b = 0; b < nb_; ++b) {
    const auto& list = rp_.coefs[b];
    const Eigen::MatrixXd& X = it.X[b];
    const Eigen::MatrixXd& Zi = Zinv[b];
    const auto n = static_cast<Eigen::Index>(rp_.dims[b]);
    Eigen::MatrixXd G(n, n);
    for (std::size_t j = 0; j < list.size(); ++j) {
      const auto& bj = list[j];
      const auto k = static_cast<Eigen::Index>(bj.support.size());
      Eigen::MatrixXd Xs(n, k), Zs(k, n);
      for (Eigen::Index t = 0; t < k; ++t) {
        Xs.col(t) = X.col(bj.support[t]);
        Zs.row(t) = Zi.row(bj.support[t]);
      }
      G.noalias() = (Xs * bj.local) * Zs;  // X A_j Z^{-1}
      for (std::size_t i = 0; i <= j; ++i) {
        const double v = apply_coef(list[i], G);
        H_(list[i].con, bj.con) += v;
        if (list[i].con != bj.con) H_(bj.con, list[i].con) += v;
      }
    }
  }
  if (rp_.nl > 0) {
    const Eigen::VectorXd w = it.xl.cwiseQuotient(it.zl);
    H_.noalias() += rp_.Al * w.asDiagonal() * rp_.Al.transpose();
  }
  return factor();
}

bool Engine::factor() {
  // Jacobi scaling first: near the optimum the diagonal spans many orders of
  // magnitude and plain Cholesky breaks down long before H is singular.
  const Eigen::Index m = H_.rows();
  dscale_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) dscale_(i) = H_(i, i) > 0.0 ? 1.0 / std::sqrt(H_(i, i)) : 1.0;
  const Eigen::MatrixXd Hs = dscale_.asDiagonal() * H_ * dscale_.asDiagonal();
  for (double reg : {0.0, 1e-14, 1e-12, 1e-10, 1e-8}) {
    Eigen::MatrixXd Hr = Hs;
    if (reg > 0.0) Hr.diagonal().array() += reg;
    llt_.compute(Hr);
    if (llt_.info() == Eigen::Success) break;
  }
  if (llt_.info() != Eigen::Success) return false;
  if (rp_.nf > 0) {
    HinvF_ = schur_solve(rp_.F);
    free_lu_.compute(rp_.F.transpose() * HinvF_);
    if (!free_lu_.matrixLU().diagonal().array().isFinite().all()) return false;
  }
  return true;
}

Eigen::MatrixXd Engine::approx_solve(const Eigen::MatrixXd& rhs) const {
  return dscale_.asDiagonal() * llt_.solve(dscale_.asDiagonal() * rhs);
}

// Preconditioned CG on the exact Schur matrix, started from the factored
// solution. Recovers the accuracy lost to regularization.
Eigen::MatrixXd Engine::schur_solve(const Eigen::MatrixXd& rhs) const {
  Eigen::MatrixXd out = approx_solve(rhs);
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
    const double bn = rhs.col(c).norm();
    if (bn == 0.0) continue;
    Eigen::VectorXd x = out.col(c);
    Eigen::VectorXd r = rhs.col(c) - H_ * x;
    double best = r.norm();
    Eigen::VectorXd best_x = x;
    if (best <= 1e-15 * bn) continue;
    Eigen::VectorXd z = approx_solve(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    for (int k = 0; k < 50 && rz > 0.0; ++k) {
      const Eigen::VectorXd Hp = H_ * p;
      const double pHp = p.dot(Hp);
      if (!(pHp > 0.0)) break;
      const double a = rz / pHp;
      x += a * p;
      r -= a * Hp;
      const double rn = r.norm();
      if (rn < best) {
        best = rn;
        best_x = x;
      }
      if (rn <= 1e-15 * bn) break;
      z = approx_solve(r);
      const double rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
    out.col(c) = best_x;
  }
  return out;
}

void Engine::solve_direction(const Iterate& it, const std::vector<Eigen::MatrixXd>& Zinv, const Eigen::VectorXd& Rp,
                             const std::vector<Eigen::MatrixXd>& Rd, const Eigen::VectorXd& rdl,
                             const Eigen::VectorXd& rdf, const std::vector<Eigen::MatrixXd>& Rc,
                             const Eigen::VectorXd& rcl, Direction& d) const {
  // h = Rp - A(Rc) + A(X Rd Z^-1) - Al rcl + Al (x/z) rdl
  Eigen::VectorXd h = Rp;
  std::vector<Eigen::MatrixXd> XRdZ(static_cast<std::size_t>(nb_));
  for (int b = 0; b < nb_; ++b) {
    XRdZ[b] = it.X[b] * Rd[b] * Zinv[b];
    for (const auto& bc : rp_.coefs[b]) h(bc.con) += apply_coef(bc, XRdZ[b]) - apply_coef(bc, Rc[b]);
  }
  Eigen::VectorXd w;
  if (rp_.nl > 0) {
    w = it.xl.cwiseQuotient(it.zl);
    h += rp_.Al * (w.cwiseProduct(rdl) - rcl);
  }
  if (rp_.nf > 0) {
    const Eigen::VectorXd Hh = schur_solve(h);
    d.dxf = free_lu_.solve(rp_.F.transpose() * Hh - rdf);
    d.dy = schur_solve(h - rp_.F * d.dxf);
  } else {
    d.dxf = Eigen::VectorXd::Zero(0);
    d.dy = schur_solve(h);
  }
  d.dX.resize(static_cast<std::size_t>(nb_));
  d.dZ.resize(static_cast<std::size_t>(nb_));
  for (int b = 0; b < nb_; ++b) {
    d.dZ[b] = Rd[b] - dual_map(b, d.dy);
    Eigen::MatrixXd dX = Rc[b] - it.X[b] * d.dZ[b] * Zinv[b];
    d.dX[b] = 0.5 * (dX + dX.transpose());
  }
  if (rp_.nl > 0) {
    d.dzl = rdl - rp_.Al.transpose() * d.dy;
    d.dxl = rcl - w.cwiseProduct(d.dzl);
  } else {
    d.dzl = d.dxl = Eigen::VectorXd::Zero(0);
  }
}

double Engine::max_step_psd(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dX) {
  Eigen::LLT<Eigen::MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  const Eigen::MatrixXd Li = llt.matrixL().solve(Eigen::MatrixXd::Identity(X.rows(), X.cols()));
  Eigen::MatrixXd M = Li * dX * Li.transpose();
  M = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

double Engine::max_step_lp(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (dx(i) < 0.0) a = std::min(a, -x(i) / dx(i));
  return a;
}

Solution Engine::run(Iterate& it, std::vector<IterateRecord>* history, Status& status, int& iters) {
  initial_point(it);
  Iterate best = it;
  double best_merit = std::numeric_limits<double>::infinity();
  Metrics best_metrics;
  status = Status::max_iters;
  int stalls = 0;
  int last_improvement = 0;

  std::vector<Eigen::MatrixXd> Rd(static_cast<std::size_t>(nb_)), Zinv(static_cast<std::size_t>(nb_)),
      Rc(static_cast<std::size_t>(nb_));
  for (iters = 0; iters <= opt_.max_iters; ++iters) {
    const Eigen::VectorXd Rp = rp_.b - primal_map(it.X, it.xl, it.xf);
    for (int b = 0; b < nb_; ++b) Rd[b] = rp_.C[b] - dual_map(b, it.y) - it.Z[b];
    const Eigen::VectorXd rdl = rp_.cl - rp_.Al.transpose() * it.y - it.zl;
    const Eigen::VectorXd rdf = rp_.cf - rp_.F.transpose() * it.y;
    const Metrics m = metrics(it, Rp, Rd, rdl, rdf);

    const double merit = std::max({m.res.primal / opt_.tol_feas, m.res.dual / opt_.tol_feas, m.res.gap / opt_.tol_gap});
    if (merit < 0.9 * best_merit) last_improvement = iters;
    if (merit < best_merit) {
      best_merit = merit;
      best = it;
      best_metrics = m;
    }
    if (history) history->push_back({m.pobj, m.dobj, m.res, m.mu, 0.0, 0.0});
    if (merit <= 1.0) {
      status = Status::optimal;
      break;
    }
    if (iters == opt_.max_iters) break;
    // Past the accuracy the Schur solve can deliver the iterates only drift.
    if (iters - last_improvement >= opt_.stall_iters) {
      status = Status::numerical_failure;
      break;
    }

    // divergence checks on the scaled problem
    double xnorm = it.xl.sum(), ynorm = it.y.lpNorm<Eigen::Infinity>();
    for (int b = 0; b < nb_; ++b) xnorm += it.X[b].trace();
    if (xnorm > 1e12 * (1.0 + b_orig_norm_) || ynorm > 1e12 * (1.0 + c_orig_norm_)) {
      status = Status::infeasible;
      break;
    }

    bool ok = true;
    for (int b = 0; b < nb_; ++b) {
      Eigen::LLT<Eigen::MatrixXd> lz(it.Z[b]);
      if (lz.info() != Eigen::Success) {
        ok = false;
        break;
      }
      Zinv[b] = lz.solve(Eigen::MatrixXd::Identity(rp_.dims[b], rp_.dims[b]));
      Zinv[b] = 0.5 * (Zinv[b] + Zinv[b].transpose());
    }
    if (!ok || !assemble_schur(it, Zinv)) {
      status = Status::numerical_failure;
      break;
    }

    // predictor
    for (int b = 0; b < nb_; ++b) Rc[b] = -it.X[b];
    Eigen::VectorXd rcl = -it.xl;
    Direction pred;
    solve_direction(it, Zinv, Rp, Rd, rdl, rdf, Rc, rcl, pred);
    double ap = 1.0, ad = 1.0;
    for (int b = 0; b < nb_; ++b) {
      ap = std::min(ap, max_step_psd(it.X[b], pred.dX[b]));
      ad = std::min(ad, max_step_psd(it.Z[b], pred.dZ[b]));
    }
    ap = std::min(ap, max_step_lp(it.xl, pred.dxl));
    ad = std::min(ad, max_step_lp(it.zl, pred.dzl));
    double xz_aff = (it.xl + ap * pred.dxl).dot(it.zl + ad * pred.dzl);
    for (int b = 0; b < nb_; ++b) xz_aff += inner(it.X[b] + ap * pred.dX[b], it.Z[b] + ad * pred.dZ[b]);
    const double mu_aff = xz_aff / std::max(1, n_total_);
    const double mu = m.mu;
    double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // corrector
    for (int b = 0; b < nb_; ++b) Rc[b] = sigma * mu * Zinv[b] - it.X[b] - pred.dX[b] * pred.dZ[b] * Zinv[b];
    if (rp_.nl > 0)
      rcl = (sigma * mu) * it.zl.cwiseInverse() - it.xl - pred.dxl.cwiseProduct(pred.dzl).cwiseQuotient(it.zl);
    Direction d;
    solve_direction(it, Zinv, Rp, Rd, rdl, rdf, Rc, rcl, d);
    ap = std::numeric_limits<double>::infinity();
    ad = ap;
    for (int b = 0; b < nb_; ++b) {
      ap = std::min(ap, max_step_psd(it.X[b], d.dX[b]));
      ad = std::min(ad, max_step_psd(it.Z[b], d.dZ[b]));
    }
    ap = std::min(ap, max_step_lp(it.xl, d.dxl));
    ad = std::min(ad, max_step_lp(it.zl, d.dzl));
    const double gamma = 0.9 + 0.09 * std::min({1.0, ap, ad});
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    if (!std::isfinite(ap) || !std::isfinite(ad) || !d.dy.allFinite()) {
      status = Status::numerical_failure;
      break;
    }
    if (history) {
      history->back().step_primal = ap;
      history->back().step_dual = ad;
    }

    for (int b = 0; b < nb_; ++b) {
      it.X[b] += ap * d.dX[b];
      it.Z[b] += ad * d.dZ[b];
      it.X[b] = 0.5 * (it.X[b] + it.X[b].transpose());
      it.Z[b] = 0.5 * (it.Z[b] + it.Z[b].transpose());
    }
    if (rp_.nl > 0) {
      it.xl += ap * d.dxl;
      it.zl += ad * d.dzl;
    }
    if (rp_.nf > 0) it.xf += ap * d.dxf;
    it.y += ad * d.dy;

    stalls = (ap < 1e-8 && ad < 1e-8) ? stalls + 1 : 0;
    if (stalls >= 3) {
      status = Status::numerical_failure;
      break;
    }
  }
  it = best;

  Solution sol;
  sol.status = status;
  sol.iterations = iters;
  sol.objective_value = best_metrics.pobj;
  sol.dual_objective = best_metrics.dobj;
  sol.residuals = best_metrics.res;
  return sol;
}

}  // namespace

Solution solve(const Problem& problem, const Options& options) {
  if (problem.constraints.empty()) throw std::invalid_argument("SDP needs at least one constraint");
  RealProblem rp = detail::to_real(problem);
  Eigen::VectorXd rs = detail::row_norms(rp);
  for (Eigen::Index i = 0; i < rs.size(); ++i)
    if (rs(i) == 0.0) {
      if (rp.b(i) != 0.0 && !(problem.constraints[i].relation == Relation::less_equal && rp.b(i) > 0.0))
        throw std::invalid_argument("constraint " + std::to_string(i) + " has no coefficients");
      rs(i) = 1.0;
    }
  double c2 = rp.cl.squaredNorm() + rp.cf.squaredNorm();
  for (std::size_t b = 0; b < rp.C.size(); ++b) c2 += rp.norm_weight[b] * rp.C[b].squaredNorm();
  const double obj_scale = std::max(1.0, std::sqrt(c2));
  detail::scale(rp, rs, obj_scale);

  Engine engine(rp, options, rs, obj_scale);
  Iterate it;
  Status status;
  int iters = 0;
  std::vector<IterateRecord> history;
  Solution sol = engine.run(it, options.record_history ? &history : nullptr, status, iters);
  sol.history = std::move(history);

  // Undo scaling and the embedding.
  const int nb = static_cast<int>(problem.blocks.size());
  for (int b = 0; b < nb; ++b) {
    if (problem.blocks[b].hermitian) {
      sol.blocks.push_back(unembed(it.X[b]));
      sol.dual_blocks.push_back(unembed(it.Z[b]) * (2.0 * obj_scale));
    } else {
      sol.blocks.push_back(it.X[b].cast<cplx>());
      sol.dual_blocks.push_back(it.Z[b].cast<cplx>() * obj_scale);
    }
  }
  sol.free_values = it.xf;
  sol.nonneg_values = it.xl.head(problem.nonneg_count());
  sol.nonneg_duals = it.zl.head(problem.nonneg_count()) * obj_scale;
  sol.slacks = Eigen::VectorXd::Zero(rp.m);
  for (int i = 0; i < rp.m; ++i)
    if (rp.slack_of[i] >= 0) sol.slacks(i) = it.xl(rp.slack_of[i]);
  sol.dual = obj_scale * it.y.cwiseQuotient(rs);
  return sol;
}

}  // namespace gridscope::sdp
