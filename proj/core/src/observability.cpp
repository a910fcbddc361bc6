#include "gridscope/observability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include <nlohmann/json.hpp>

#include "gridscope/numeric.hpp"
#include "gridscope/parallel.hpp"
#include "maxflow.hpp"

namespace gridscope {

CountingConditions counting_conditions(const Grid& grid) {
  const auto m = grid.metered().size();
  const auto o = grid.nonmetered().size();
  return CountingConditions{m >= 2 * o, m >= o};
}

DisjointPaths max_vertex_disjoint_paths(const Grid& grid) {
  const int count = grid.bus_count();
  const int source = 2 * count;
  const int sink = source + 1;
  auto in = [](int n) { return 2 * n; };
  auto out = [](int n) { return 2 * n + 1; };
  auto cls = [&](int n) { return grid.bus(n).cls; };

  detail::MaxFlow flow(2 * count + 2);
  for (int n = 1; n < count; ++n) {
    flow.add_edge(in(n), out(n), 1);
    if (cls(n) == BusClass::nonmetered) flow.add_edge(source, in(n), 1);
    if (cls(n) == BusClass::metered) flow.add_edge(out(n), sink, 1);
  }
  for (const auto& ln : grid.lines()) {
    for (auto [u, w] : {std::pair{ln.from, ln.to}, std::pair{ln.to, ln.from}}) {
      if (u == 0 || w == 0) continue;
      const bool sends = cls(u) == BusClass::nonmetered || cls(u) == BusClass::conventional;
      const bool receives = cls(w) == BusClass::conventional || cls(w) == BusClass::metered;
      if (sends && receives) flow.add_edge(out(u), in(w), 1);
    }
  }

  DisjointPaths result;
  result.count = flow.run(source, sink);

  // Flow decomposition; each unit leaves the source into a distinct O bus.
  std::vector<char> used(static_cast<std::size_t>(flow.edge_count()), 0);
  for (int e : flow.out_edges(source)) {
    if (flow.flow(e) <= 0) continue;
    std::vector<int> path;
    int node = flow.to(e);
    while (node != sink) {
      if (node % 2 == 0) path.push_back(node / 2);
      int next = -1;
      for (int f : flow.out_edges(node)) {
        if (flow.flow(f) > 0 && !used[static_cast<std::size_t>(f)]) {
          used[static_cast<std::size_t>(f)] = 1;
          next = flow.to(f);
          break;
        }
      }
      if (next < 0) break;
      node = next;
    }
    result.paths.push_back(std::move(path));
  }
  return result;
}

ObservabilityReport check_criterion(const Grid& grid) {
  ObservabilityReport rep;
  const auto counts = counting_conditions(grid);
  rep.counting_single_ok = counts.single;
  rep.counting_coupled_ok = counts.coupled;
  rep.nonmetered_count = static_cast<int>(grid.nonmetered().size());
  DisjointPaths paths = max_vertex_disjoint_paths(grid);
  rep.max_disjoint_paths = paths.count;
  rep.criterion_satisfied = paths.count == rep.nonmetered_count;
  rep.witness_paths = std::move(paths.paths);
  return rep;
}

std::string to_json(const ObservabilityReport& r, int indent) {
  nlohmann::json j;
  j["counting_single_ok"] = r.counting_single_ok;
  j["counting_coupled_ok"] = r.counting_coupled_ok;
  j["nonmetered_count"] = r.nonmetered_count;
  j["max_disjoint_paths"] = r.max_disjoint_paths;
  j["criterion_satisfied"] = r.criterion_satisfied;
  j["witness_paths"] = r.witness_paths;
  return j.dump(indent);
}

PatternMatrix PatternMatrix::from_matrix(const Eigen::MatrixXd& m, double zero_tol) {
  PatternMatrix p(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      if (std::abs(m(r, c)) > zero_tol) p.set(r, c);
  Eigen::MatrixXd values = m;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      if (!p.has(r, c)) values(r, c) = 0.0;
  p.values_ = std::move(values);
  return p;
}

void PatternMatrix::set(int r, int c) {
  if (r < 0 || r >= rows_ || c < 0 || c >= cols_) throw std::out_of_range("pattern position out of range");
  auto& row = row_nz_[static_cast<std::size_t>(r)];
  const auto it = std::lower_bound(row.begin(), row.end(), c);
  if (it == row.end() || *it != c) row.insert(it, c);
  if (values_ && (*values_)(r, c) == 0.0) values_.reset();
}

bool PatternMatrix::has(int r, int c) const {
  const auto& row = row_nz_.at(static_cast<std::size_t>(r));
  return std::binary_search(row.begin(), row.end(), c);
}

std::size_t PatternMatrix::nonzeros() const {
  std::size_t n = 0;
  for (const auto& row : row_nz_) n += row.size();
  return n;
}

void PatternMatrix::set_values(Eigen::MatrixXd values) {
  if (values.rows() != rows_ || values.cols() != cols_) throw std::invalid_argument("value matrix has wrong shape");
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c)
      if (values(r, c) != 0.0 && !has(r, c))
        throw std::invalid_argument("value matrix is nonzero off the pattern");
  values_ = std::move(values);
}

Eigen::MatrixXd PatternMatrix::random_fill(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> mag(1.0, 2.0);
  std::bernoulli_distribution sign(0.5);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows_, cols_);
  for (int r = 0; r < rows_; ++r)
    for (int c : row_nz_[static_cast<std::size_t>(r)]) {
      const double v = mag(rng);
      m(r, c) = sign(rng) ? v : -v;
    }
  return m;
}

int max_bipartite_matching(const PatternMatrix& p) {
  const int nr = p.rows();
  const int nc = p.cols();
  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<int> match_r(static_cast<std::size_t>(nr), -1), match_c(static_cast<std::size_t>(nc), -1);
  std::vector<int> dist(static_cast<std::size_t>(nr));

  auto bfs = [&]() {
    std::queue<int> q;
    bool found = false;
    for (int r = 0; r < nr; ++r) {
      if (match_r[r] < 0) {
        dist[r] = 0;
        q.push(r);
      } else {
        dist[r] = kInf;
      }
    }
    while (!q.empty()) {
      const int r = q.front();
      q.pop();
      for (int c : p.row(r)) {
        const int r2 = match_c[c];
        if (r2 < 0) {
          found = true;
        } else if (dist[r2] == kInf) {
          dist[r2] = dist[r] + 1;
          q.push(r2);
        }
      }
    }
    return found;
  };

  std::function<bool(int)> dfs = [&](int r) {
    for (int c : p.row(r)) {
      const int r2 = match_c[c];
      if (r2 < 0 || (dist[r2] == dist[r] + 1 && dfs(r2))) {
        match_r[r] = c;
        match_c[c] = r;
        return true;
      }
    }
    dist[r] = kInf;
    return false;
  };

  int size = 0;
  while (bfs())
    for (int r = 0; r < nr; ++r)
      if (match_r[r] < 0 && dfs(r)) ++size;
  return size;
}

int generic_rank(const PatternMatrix& pattern, int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("generic_rank needs at least one trial");
  const int matching = max_bipartite_matching(pattern);
  // Random fills along deep paths are poorly conditioned; only rounding-level
  // singular values are treated as zero.
  const double tol = std::max(pattern.rows(), pattern.cols()) * std::numeric_limits<double>::epsilon();
  int best = 0;
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    best = std::max(best, numeric_rank(pattern.random_fill(rng), tol));
    if (best == matching) break;
  }
  if (best > matching)
    throw GenericRankError("numeric rank exceeds the maximum matching; rank threshold is too loose");
  if (pattern.rows() == pattern.cols() && (best == pattern.rows()) != (matching == pattern.rows()))
    throw GenericRankError("random fills did not reach the matching bound: " + std::to_string(best) + " vs " +
                           std::to_string(matching));
  return best;
}

PatternMatrix coupled_jacobian_pattern(const Grid& grid, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x5eed));
  std::uniform_real_distribution<double> mag(0.9, 1.1), ang(-0.2, 0.2);
  auto draw = [&]() {
    Eigen::VectorXcd v(grid.bus_count());
    for (int n = 0; n < grid.bus_count(); ++n) v(n) = std::polar(mag(rng), n == 0 ? 0.0 : ang(rng));
    return State::from_complex(v);
  };
  const State v = draw();
  const State v1 = draw();
  // Line values only scale entries; randomize them as well so no accidental
  // cancellation survives.
  std::vector<Line> lines = grid.lines();
  std::uniform_real_distribution<double> rx(0.5, 2.0);
  for (auto& ln : lines) {
    ln.r = rx(rng);
    ln.x = rx(rng);
  }
  const Grid g(grid.header(), grid.buses(), lines);
  const auto J = coupled_jacobian(g, build_admittance(g), v, v1, JacobianForm::analysis);
  return PatternMatrix::from_matrix(J.matrix);
}

FlatReducedJacobian flat_reduced_jacobian(const Grid& grid) {
  const Eigen::VectorXd g = line_conductances(grid);
  const Eigen::VectorXd b = line_susceptances(grid);
  for (Eigen::Index l = 0; l < b.size(); ++l)
    if (b(l) == 0.0) throw std::domain_error("line " + std::to_string(l) + " has zero susceptance");
  const Eigen::MatrixXd A = incidence_matrix(grid);

  FlatReducedJacobian out;
  out.modified_susceptance = b.array() + g.array().square() / b.array();
  const auto C = grid.conventional();
  const auto M = grid.metered();
  const auto O = grid.nonmetered();
  out.row_buses = C;
  out.row_buses.insert(out.row_buses.end(), M.begin(), M.end());
  out.col_buses = C;
  out.col_buses.insert(out.col_buses.end(), O.begin(), O.end());
  out.split_row = static_cast<Eigen::Index>(C.size());
  out.split_col = static_cast<Eigen::Index>(C.size());

  Eigen::MatrixXd Ar(A.rows(), static_cast<Eigen::Index>(out.row_buses.size()));
  for (std::size_t k = 0; k < out.row_buses.size(); ++k) Ar.col(static_cast<Eigen::Index>(k)) = A.col(out.row_buses[k] - 1);
  Eigen::MatrixXd Ac(A.rows(), static_cast<Eigen::Index>(out.col_buses.size()));
  for (std::size_t k = 0; k < out.col_buses.size(); ++k) Ac.col(static_cast<Eigen::Index>(k)) = A.col(out.col_buses[k] - 1);
  out.matrix = Ar.transpose() * out.modified_susceptance.asDiagonal() * Ac;
  return out;
}

Eigen::MatrixXd flat_reduced_jacobian_schur(const Grid& grid, const AdmittanceMatrix& Y) {
  const int n = grid.n();
  auto C = grid.conventional();
  std::vector<int> rows = C, cols = C;
  for (int m : grid.metered()) rows.push_back(m);
  for (int o : grid.nonmetered()) cols.push_back(o);

  const Eigen::MatrixXd Bnn = Y.B.bottomRightCorner(n, n);
  const Eigen::MatrixXd Gnn = Y.G.bottomRightCorner(n, n);
  Eigen::MatrixXd Gr(rows.size(), n), Gc(n, cols.size()), Brc(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) Gr.row(static_cast<Eigen::Index>(i)) = Gnn.row(rows[i] - 1);
  for (std::size_t j = 0; j < cols.size(); ++j) Gc.col(static_cast<Eigen::Index>(j)) = Gnn.col(cols[j] - 1);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      Brc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = Bnn(rows[i] - 1, cols[j] - 1);
  return Brc + Gr * Bnn.ldlt().solve(Gc);
}

Eigen::MatrixXd flat_jacobian_a(const Grid& grid, const AdmittanceMatrix& Y) {
  const State flat = State::flat(grid.bus_count());
  return coupled_jacobian(grid, Y, flat, flat, JacobianForm::analysis).block_a();
}

ConditionStudy condition_number_study(const Grid& grid, const AdmittanceMatrix& Y, const StatePairSampler& sampler,
                                      int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("condition study needs at least one trial");
  std::vector<double> values(static_cast<std::size_t>(trials), std::numeric_limits<double>::quiet_NaN());
  parallel_for(trials, [&](int t) {
    const auto pair = sampler(derive_seed(seed, static_cast<std::uint64_t>(t)));
    if (!pair) return;
    const auto J = coupled_jacobian(grid, Y, pair->first, pair->second, JacobianForm::analysis);
    values[static_cast<std::size_t>(t)] = condition_number(J.matrix);
  });
  ConditionStudy out;
  for (int t = 0; t < trials; ++t) {
    if (std::isnan(values[static_cast<std::size_t>(t)])) {
      ++out.skipped;
    } else {
      out.condition_numbers.push_back(values[static_cast<std::size_t>(t)]);
      out.trial_index.push_back(t);
    }
  }
  return out;
}

Classification random_classification(int n, std::mt19937_64& rng, int max_nonmetered, int extra_metered) {
  std::uniform_int_distribution<int> ko(1, max_nonmetered);
  std::uniform_int_distribution<int> km(0, extra_metered);
  const int o = ko(rng);
  const int m = std::min(o + km(rng), n - o);
  std::vector<int> buses(static_cast<std::size_t>(n));
  std::iota(buses.begin(), buses.end(), 1);
  std::shuffle(buses.begin(), buses.end(), rng);
  Classification c;
  c.nonmetered.assign(buses.begin(), buses.begin() + o);
  c.metered.assign(buses.begin() + o, buses.begin() + o + m);
  std::sort(c.nonmetered.begin(), c.nonmetered.end());
  std::sort(c.metered.begin(), c.metered.end());
  return c;
}

}  // namespace gridscope
