#include <cmath>
#include <iomanip>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "gridscope/sdp.hpp"
#include "sdp_internal.hpp"

namespace gridscope::sdp {

SparseHermitian SparseHermitian::from_dense(const Eigen::MatrixXcd& m, double drop_tol) {
  if (m.rows() != m.cols()) throw std::invalid_argument("matrix must be square");
  SparseHermitian out(static_cast<int>(m.rows()));
  for (int r = 0; r < m.rows(); ++r)
    for (int c = r; c < m.cols(); ++c) {
      const cplx v = r == c ? cplx(m(r, r).real(), 0.0) : 0.5 * (m(r, c) + std::conj(m(c, r)));
      if (std::abs(v) > drop_tol) out.add(r, c, v);
    }
  return out;
}

void SparseHermitian::add(int r, int c, cplx v) {
  if (r < 0 || c < 0 || r >= dim_ || c >= dim_) throw std::out_of_range("Hermitian entry out of range");
  if (r == c && v.imag() != 0.0) throw std::invalid_argument("Hermitian diagonal must be real");
  if (r > c) {
    std::swap(r, c);
    v = std::conj(v);
  }
  entries_[{r, c}] += v;
}

Eigen::MatrixXcd SparseHermitian::dense() const {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim_, dim_);
  for (const auto& [rc, v] : entries_) {
    m(rc.first, rc.second) += v;
    if (rc.first != rc.second) m(rc.second, rc.first) += std::conj(v);
  }
  return m;
}

double SparseHermitian::trace_product(const Eigen::MatrixXcd& X) const {
  double s = 0.0;
  for (const auto& [rc, v] : entries_) {
    const auto [a, b] = rc;
    s += a == b ? v.real() * X(a, a).real() : 2.0 * (std::conj(v) * X(a, b)).real();
  }
  return s;
}

double SparseHermitian::frobenius_norm() const {
  double s = 0.0;
  for (const auto& [rc, v] : entries_) s += (rc.first == rc.second ? 1.0 : 2.0) * std::norm(v);
  return std::sqrt(s);
}

bool SparseHermitian::is_real() const {
  for (const auto& [rc, v] : entries_)
    if (v.imag() != 0.0) return false;
  return true;
}

int Problem::add_block(int dim, bool hermitian) {
  if (dim < 1) throw std::invalid_argument("block dimension must be positive");
  blocks.push_back({dim, hermitian});
  objective.emplace_back(dim);
  return static_cast<int>(blocks.size()) - 1;
}

int Problem::add_free(double cost) {
  free_cost.push_back(cost);
  return free_count() - 1;
}

int Problem::add_nonneg(double cost) {
  nonneg_cost.push_back(cost);
  return nonneg_count() - 1;
}

void Problem::validate() const {
  if (objective.size() > blocks.size()) throw std::invalid_argument("more objective blocks than blocks");
  for (std::size_t b = 0; b < objective.size(); ++b) {
    if (objective[b].dim() != blocks[b].dim) throw std::invalid_argument("objective block dimension mismatch");
    if (!blocks[b].hermitian && !objective[b].is_real())
      throw std::invalid_argument("complex objective on a real block");
  }
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    const auto& c = constraints[i];
    const std::string tag = "constraint " + std::to_string(i);
    if (!std::isfinite(c.rhs)) throw std::invalid_argument(tag + " has non-finite right-hand side");
    for (const auto& [b, m] : c.blocks) {
      if (b < 0 || b >= static_cast<int>(blocks.size())) throw std::invalid_argument(tag + " references unknown block");
      if (m.dim() != blocks[b].dim) throw std::invalid_argument(tag + " has block dimension mismatch");
      if (!blocks[b].hermitian && !m.is_real()) throw std::invalid_argument(tag + " is complex on a real block");
    }
    for (auto [k, v] : c.free_terms)
      if (k < 0 || k >= free_count() || !std::isfinite(v)) throw std::invalid_argument(tag + " has a bad free term");
    for (auto [k, v] : c.nonneg_terms)
      if (k < 0 || k >= nonneg_count() || !std::isfinite(v))
        throw std::invalid_argument(tag + " has a bad nonnegative term");
  }
}

Eigen::MatrixXd embed(const Eigen::MatrixXcd& m) {
  const auto n = m.rows();
  Eigen::MatrixXd out(2 * n, 2 * n);
  out << m.real(), -m.imag(), m.imag(), m.real();
  return out;
}

Eigen::MatrixXcd unembed(const Eigen::MatrixXd& m) {
  const auto n = m.rows() / 2;
  Eigen::MatrixXcd out(n, n);
  out.real() = 0.5 * (m.topLeftCorner(n, n) + m.bottomRightCorner(n, n));
  out.imag() = 0.5 * (m.bottomLeftCorner(n, n) - m.topRightCorner(n, n));
  return out;
}

RankOne extract_rank_one(const Eigen::MatrixXcd& block, double tol_ratio) {
  if (block.rows() != block.cols() || block.rows() == 0) throw std::invalid_argument("block must be square");
  const Eigen::MatrixXcd h = 0.5 * (block + block.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  const auto& ev = es.eigenvalues();
  const auto n = ev.size();
  const double l1 = ev(n - 1);
  if (!(l1 > 0.0)) throw std::invalid_argument("cannot extract a vector from a zero or negative matrix");
  const double l2 = n > 1 ? std::max(0.0, ev(n - 2)) : 0.0;
  RankOne out;
  out.leading_eigenvalue = l1;
  out.eigen_ratio = l2 / l1;
  out.is_rank_one = out.eigen_ratio < tol_ratio;
  out.vector = std::sqrt(l1) * es.eigenvectors().col(n - 1);
  const double a0 = std::abs(out.vector(0));
  if (a0 > 0.0) out.vector *= std::conj(out.vector(0)) / a0;
  out.vector(0) = cplx(out.vector(0).real(), 0.0);
  return out;
}

KktReport kkt_residuals(const Problem& p, const Solution& s) {
  p.validate();
  const auto m = p.constraints.size();
  KktReport r;
  Eigen::VectorXd b(static_cast<Eigen::Index>(m)), rp(static_cast<Eigen::Index>(m));
  std::vector<Eigen::MatrixXcd> D;
  double cnorm2 = 0.0;
  for (std::size_t k = 0; k < p.blocks.size(); ++k) {
    const auto C = k < p.objective.size() ? p.objective[k].dense() : Eigen::MatrixXcd::Zero(p.blocks[k].dim, p.blocks[k].dim);
    cnorm2 += C.squaredNorm();
    D.push_back(C - s.dual_blocks[k]);
  }
  Eigen::VectorXd dl = Eigen::Map<const Eigen::VectorXd>(p.nonneg_cost.data(), p.nonneg_count()) - s.nonneg_duals;
  Eigen::VectorXd df = Eigen::Map<const Eigen::VectorXd>(p.free_cost.data(), p.free_count());
  cnorm2 += dl.size() ? Eigen::Map<const Eigen::VectorXd>(p.nonneg_cost.data(), p.nonneg_count()).squaredNorm() : 0.0;
  cnorm2 += df.squaredNorm();

  double slack_dual2 = 0.0, slack_comp = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& c = p.constraints[i];
    const double y = s.dual(static_cast<Eigen::Index>(i));
    double ax = s.slacks(static_cast<Eigen::Index>(i));
    for (const auto& [k, mat] : c.blocks) {
      ax += mat.trace_product(s.blocks[k]);
      D[k] -= y * mat.dense();
    }
    for (auto [k, v] : c.free_terms) {
      ax += v * s.free_values(k);
      df(k) -= y * v;
    }
    for (auto [k, v] : c.nonneg_terms) {
      ax += v * s.nonneg_values(k);
      dl(k) -= y * v;
    }
    b(static_cast<Eigen::Index>(i)) = c.rhs;
    rp(static_cast<Eigen::Index>(i)) = c.rhs - ax;
    if (c.relation == Relation::less_equal) {
      slack_dual2 += std::pow(std::max(0.0, y), 2);
      slack_comp += s.slacks(static_cast<Eigen::Index>(i)) * std::max(0.0, -y);
    }
  }
  double d2 = dl.squaredNorm() + df.squaredNorm() + slack_dual2;
  for (const auto& Dk : D) d2 += Dk.squaredNorm();

  double pobj = 0.0, comp = slack_comp;
  for (std::size_t k = 0; k < p.blocks.size(); ++k) {
    if (k < p.objective.size()) pobj += p.objective[k].trace_product(s.blocks[k]);
    comp += (s.blocks[k] * s.dual_blocks[k]).trace().real();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ex(0.5 * (s.blocks[k] + s.blocks[k].adjoint()), Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ez(0.5 * (s.dual_blocks[k] + s.dual_blocks[k].adjoint()),
                                                       Eigen::EigenvaluesOnly);
    r.min_primal_eigenvalue = k == 0 ? ex.eigenvalues()(0) : std::min(r.min_primal_eigenvalue, ex.eigenvalues()(0));
    r.min_dual_eigenvalue = k == 0 ? ez.eigenvalues()(0) : std::min(r.min_dual_eigenvalue, ez.eigenvalues()(0));
  }
  for (int k = 0; k < p.nonneg_count(); ++k) {
    pobj += p.nonneg_cost[k] * s.nonneg_values(k);
    comp += s.nonneg_values(k) * s.nonneg_duals(k);
  }
  for (int k = 0; k < p.free_count(); ++k) pobj += p.free_cost[k] * s.free_values(k);
  const double dobj = b.dot(s.dual);

  r.primal = rp.norm() / (1.0 + b.norm());
  r.dual = std::sqrt(d2) / (1.0 + std::sqrt(cnorm2));
  r.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
  r.complementarity = std::abs(comp) / (1.0 + std::abs(pobj) + std::abs(dobj));
  return r;
}

void write_sdpa(const Problem& p, std::ostream& out) {
  const detail::RealProblem rp = detail::to_real(p);
  const int nb = static_cast<int>(rp.dims.size());
  const int lp = rp.nl + 2 * rp.nf;
  out << "\"gridscope sdp dump: max tr(F0 Y) s.t. tr(Fi Y) = c_i; F0 = -C; Hermitian blocks embedded and halved\n";
  out << "\"diagonal block holds nonnegatives, slacks, then free variables split as x+ - x-\n";
  out << rp.m << "\n" << (nb + (lp > 0 ? 1 : 0)) << "\n";
  for (int b = 0; b < nb; ++b) out << rp.dims[b] << (b + 1 < nb || lp > 0 ? " " : "");
  if (lp > 0) out << -lp;
  out << "\n";
  out << std::setprecision(17);
  for (int i = 0; i < rp.m; ++i) out << rp.b(i) << (i + 1 < rp.m ? " " : "");
  out << "\n";
  for (int b = 0; b < nb; ++b)
    for (int r = 0; r < rp.dims[b]; ++r)
      for (int c = r; c < rp.dims[b]; ++c)
        if (rp.C[b](r, c) != 0.0) out << 0 << " " << b + 1 << " " << r + 1 << " " << c + 1 << " " << -rp.C[b](r, c) << "\n";
  for (int k = 0; k < rp.nl; ++k)
    if (rp.cl(k) != 0.0) out << 0 << " " << nb + 1 << " " << k + 1 << " " << k + 1 << " " << -rp.cl(k) << "\n";
  for (int k = 0; k < rp.nf; ++k)
    if (rp.cf(k) != 0.0) {
      out << 0 << " " << nb + 1 << " " << rp.nl + 2 * k + 1 << " " << rp.nl + 2 * k + 1 << " " << -rp.cf(k) << "\n";
      out << 0 << " " << nb + 1 << " " << rp.nl + 2 * k + 2 << " " << rp.nl + 2 * k + 2 << " " << rp.cf(k) << "\n";
    }
  for (int b = 0; b < nb; ++b)
    for (const auto& bc : rp.coefs[b])
      for (const auto& e : bc.entries)
        out << bc.con + 1 << " " << b + 1 << " " << e.r + 1 << " " << e.c + 1 << " " << e.v << "\n";
  for (int i = 0; i < rp.m; ++i) {
    for (int k = 0; k < rp.nl; ++k)
      if (rp.Al(i, k) != 0.0) out << i + 1 << " " << nb + 1 << " " << k + 1 << " " << k + 1 << " " << rp.Al(i, k) << "\n";
    for (int k = 0; k < rp.nf; ++k)
      if (rp.F(i, k) != 0.0) {
        out << i + 1 << " " << nb + 1 << " " << rp.nl + 2 * k + 1 << " " << rp.nl + 2 * k + 1 << " " << rp.F(i, k) << "\n";
        out << i + 1 << " " << nb + 1 << " " << rp.nl + 2 * k + 2 << " " << rp.nl + 2 * k + 2 << " " << -rp.F(i, k) << "\n";
      }
  }
}

}  // namespace gridscope::sdp
