#include "gridscope/grid.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

namespace gridscope {

char to_char(BusClass c) {
  switch (c) {
    case BusClass::substation: return 'S';
    case BusClass::metered: return 'M';
    case BusClass::conventional: return 'C';
    case BusClass::nonmetered: return 'O';
  }
  return '?';
}

BusClass bus_class_from_string(std::string_view s) {
  if (s == "S") return BusClass::substation;
  if (s == "M") return BusClass::metered;
  if (s == "C") return BusClass::conventional;
  if (s == "O") return BusClass::nonmetered;
  throw GridError(GridErrorKind::parse, "unknown bus class '" + std::string(s) + "'");
}

const char* to_string(GridErrorKind kind) {
  switch (kind) {
    case GridErrorKind::parse: return "parse";
    case GridErrorKind::empty_grid: return "empty_grid";
    case GridErrorKind::bus_index: return "bus_index";
    case GridErrorKind::missing_substation: return "missing_substation";
    case GridErrorKind::multiple_substations: return "multiple_substations";
    case GridErrorKind::negative_pv_capacity: return "negative_pv_capacity";
    case GridErrorKind::unknown_bus: return "unknown_bus";
    case GridErrorKind::self_loop: return "self_loop";
    case GridErrorKind::bad_impedance: return "bad_impedance";
    case GridErrorKind::duplicate_line: return "duplicate_line";
    case GridErrorKind::cycle: return "cycle";
    case GridErrorKind::disconnected: return "disconnected";
    case GridErrorKind::substation_degree: return "substation_degree";
  }
  return "unknown";
}

namespace {

[[noreturn]] void fail(GridErrorKind kind, const std::string& msg) { throw GridError(kind, msg); }

struct DisjointSet {
  std::vector<int> up;
  explicit DisjointSet(int n) : up(static_cast<std::size_t>(n)) { std::iota(up.begin(), up.end(), 0); }
  int find(int a) {
    while (up[a] != a) a = up[a] = up[up[a]];
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    up[a] = b;
    return true;
  }
};

}  // namespace

Grid::Grid(GridHeader header, std::vector<Bus> buses, std::vector<Line> lines)
    : header_(std::move(header)), buses_(std::move(buses)), lines_(std::move(lines)) {
  const int count = static_cast<int>(buses_.size());
  if (count < 2) fail(GridErrorKind::empty_grid, "grid needs at least two buses");

  std::sort(buses_.begin(), buses_.end(), [](const Bus& a, const Bus& b) { return a.index < b.index; });
  for (int i = 0; i < count; ++i) {
    if (buses_[i].index != i)
      fail(GridErrorKind::bus_index, "bus indices must be contiguous from 0; expected " +
                                         std::to_string(i) + ", found " + std::to_string(buses_[i].index));
  }

  int substations = 0;
  for (const auto& b : buses_) substations += b.cls == BusClass::substation;
  if (substations == 0) fail(GridErrorKind::missing_substation, "no substation bus");
  if (substations > 1 || buses_[0].cls != BusClass::substation)
    fail(GridErrorKind::multiple_substations, "exactly one substation bus is allowed and it must be bus 0");

  for (const auto& b : buses_) {
    if (!(b.pv_capacity >= 0.0))
      fail(GridErrorKind::negative_pv_capacity, "bus " + std::to_string(b.index) + " has negative pv_capacity");
  }

  std::set<std::pair<int, int>> seen;
  DisjointSet dsu(count);
  adj_.assign(static_cast<std::size_t>(count), {});
  for (std::size_t l = 0; l < lines_.size(); ++l) {
    const Line& ln = lines_[l];
    const std::string tag = "line " + std::to_string(l) + " (" + std::to_string(ln.from) + "-" + std::to_string(ln.to) + ")";
    if (ln.from < 0 || ln.from >= count || ln.to < 0 || ln.to >= count)
      fail(GridErrorKind::unknown_bus, tag + " references an unknown bus");
    if (ln.from == ln.to) fail(GridErrorKind::self_loop, tag + " is a self loop");
    if (!(ln.r >= 0.0) || !(ln.x > 0.0))
      fail(GridErrorKind::bad_impedance, tag + " needs r >= 0 and x > 0");
    if (!seen.emplace(std::min(ln.from, ln.to), std::max(ln.from, ln.to)).second)
      fail(GridErrorKind::duplicate_line, tag + " duplicates an earlier line");
    if (!dsu.unite(ln.from, ln.to)) fail(GridErrorKind::cycle, tag + " closes a cycle");
    adj_[ln.from].push_back(ln.to);
    adj_[ln.to].push_back(ln.from);
  }
  if (static_cast<int>(lines_.size()) != count - 1)
    fail(GridErrorKind::disconnected, "grid is not connected");
  if (adj_[0].size() != 1)
    fail(GridErrorKind::substation_degree,
         "substation must have exactly one line so that removing it leaves a tree");
  for (auto& a : adj_) std::sort(a.begin(), a.end());

  parent_.assign(static_cast<std::size_t>(count), -1);
  parent_line_.assign(static_cast<std::size_t>(count), -1);
  line_child_.assign(lines_.size(), -1);
  std::vector<std::vector<std::pair<int, int>>> inc(static_cast<std::size_t>(count));
  for (std::size_t l = 0; l < lines_.size(); ++l) {
    inc[lines_[l].from].emplace_back(lines_[l].to, static_cast<int>(l));
    inc[lines_[l].to].emplace_back(lines_[l].from, static_cast<int>(l));
  }
  std::vector<int> stack{0};
  std::vector<char> visited(static_cast<std::size_t>(count), 0);
  visited[0] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (auto [w, l] : inc[u]) {
      if (visited[w]) continue;
      visited[w] = 1;
      parent_[w] = u;
      parent_line_[w] = l;
      line_child_[l] = w;
      stack.push_back(w);
    }
  }
}

std::vector<int> Grid::buses_of(BusClass c) const {
  std::vector<int> out;
  for (const auto& b : buses_)
    if (b.cls == c) out.push_back(b.index);
  return out;
}

Grid Grid::reclassified(const std::vector<int>& metered, const std::vector<int>& nonmetered) const {
  std::vector<Bus> buses = buses_;
  for (std::size_t i = 1; i < buses.size(); ++i) buses[i].cls = BusClass::conventional;
  auto assign = [&](const std::vector<int>& list, BusClass cls) {
    for (int n : list) {
      if (n <= 0 || n > this->n())
        throw std::invalid_argument("cannot reclassify bus " + std::to_string(n));
      if (buses[n].cls != BusClass::conventional)
        throw std::invalid_argument("bus " + std::to_string(n) + " listed twice in classification");
      buses[n].cls = cls;
    }
  };
  assign(metered, BusClass::metered);
  assign(nonmetered, BusClass::nonmetered);
  return Grid(header_, std::move(buses), lines_);
}

Grid Grid::with_pv_capacity(const std::vector<double>& capacity) const {
  if (static_cast<int>(capacity.size()) != bus_count())
    throw std::invalid_argument("pv capacity vector has wrong length");
  std::vector<Bus> buses = buses_;
  for (std::size_t i = 0; i < buses.size(); ++i) buses[i].pv_capacity = capacity[i];
  return Grid(header_, std::move(buses), lines_);
}

Grid parse_grid(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw GridError(GridErrorKind::parse, std::string("invalid JSON: ") + e.what());
  }
  try {
    GridHeader header;
    if (doc.contains("header")) {
      const auto& h = doc.at("header");
      header.name = h.value("name", "");
      header.base_mva = h.value("base_mva", 1.0);
      header.base_kv = h.value("base_kv", 1.0);
    }
    std::vector<Bus> buses;
    for (const auto& jb : doc.at("buses")) {
      Bus b;
      b.index = jb.at("index").get<int>();
      b.cls = bus_class_from_string(jb.at("class").get<std::string>());
      b.base_load = {jb.value("p_load", 0.0), jb.value("q_load", 0.0)};
      b.pv_capacity = jb.value("pv_capacity", 0.0);
      buses.push_back(b);
    }
    std::vector<Line> lines;
    for (const auto& jl : doc.at("lines")) {
      lines.push_back(Line{jl.at("from").get<int>(), jl.at("to").get<int>(), jl.at("r").get<double>(),
                           jl.at("x").get<double>()});
    }
    return Grid(std::move(header), std::move(buses), std::move(lines));
  } catch (const json::exception& e) {
    throw GridError(GridErrorKind::parse, std::string("malformed feeder document: ") + e.what());
  }
}

Grid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GridError(GridErrorKind::parse, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_grid(ss.str());
}

std::string grid_summary(const Grid& grid) {
  std::ostringstream os;
  os << "name: " << (grid.header().name.empty() ? "(unnamed)" : grid.header().name) << "\n"
     << "buses: " << grid.bus_count() << " (N = " << grid.n() << ")\n"
     << "lines: " << grid.lines().size() << "\n"
     << "metered: " << grid.metered().size() << ", conventional: " << grid.conventional().size()
     << ", nonmetered: " << grid.nonmetered().size() << "\n";
  double p = 0.0, q = 0.0, pv = 0.0;
  for (const auto& b : grid.buses()) {
    p += b.base_load.real();
    q += b.base_load.imag();
    pv += b.pv_capacity;
  }
  os << "total load: " << p << " + j" << q << " pu, pv capacity: " << pv << " pu\n";
  return os.str();
}

Eigen::MatrixXcd AdmittanceMatrix::complex() const {
  Eigen::MatrixXcd Y(G.rows(), G.cols());
  Y.real() = G;
  Y.imag() = B;
  return Y;
}

AdmittanceMatrix build_admittance(const Grid& grid) {
  const int n1 = grid.bus_count();
  AdmittanceMatrix Y{Eigen::MatrixXd::Zero(n1, n1), Eigen::MatrixXd::Zero(n1, n1)};
  for (const auto& ln : grid.lines()) {
    const auto y = ln.admittance();
    for (auto [M, v] : {std::pair{&Y.G, y.real()}, std::pair{&Y.B, y.imag()}}) {
      (*M)(ln.from, ln.from) += v;
      (*M)(ln.to, ln.to) += v;
      (*M)(ln.from, ln.to) -= v;
      (*M)(ln.to, ln.from) -= v;
    }
  }
  return Y;
}

Eigen::MatrixXd incidence_matrix(const Grid& grid) {
  const int n = grid.n();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int l = 0; l < n; ++l) {
    const int child = grid.line_child(l);
    const int parent = grid.parent(child);
    A(l, child - 1) = 1.0;
    if (parent != 0) A(l, parent - 1) = -1.0;
  }
  return A;
}

Eigen::VectorXd line_conductances(const Grid& grid) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(grid.lines().size()));
  for (std::size_t l = 0; l < grid.lines().size(); ++l) g(l) = grid.lines()[l].admittance().real();
  return g;
}

Eigen::VectorXd line_susceptances(const Grid& grid) {
  Eigen::VectorXd b(static_cast<Eigen::Index>(grid.lines().size()));
  for (std::size_t l = 0; l < grid.lines().size(); ++l) b(l) = grid.lines()[l].admittance().imag();
  return b;
}

}  // namespace gridscope
