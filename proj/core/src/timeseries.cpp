#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "gridscope/harness.hpp"
#include "gridscope/numeric.hpp"

namespace gridscope {

namespace {

double bump(double h, double center, double width) {
  const double d = (h - center) / width;
  return std::exp(-0.5 * d * d);
}

// Zero-mean AR(1) sequence with stationary standard deviation sd.
std::vector<double> ar1(std::size_t n, double rho, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> x(n);
  double cur = sd * nd(rng);
  const double innov = sd * std::sqrt(1.0 - rho * rho);
  for (auto& xi : x) {
    xi = cur;
    cur = rho * cur + innov * nd(rng);
  }
  return x;
}

}  // namespace

Eigen::VectorXd synthetic_profile(ProfileKind kind, const std::vector<double>& hours, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = hours.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  switch (kind) {
    case ProfileKind::residential: {
      const auto noise = ar1(n, 0.8, 0.05, rng);
      for (std::size_t i = 0; i < n; ++i) {
        const double h = hours[i];
        const double base = 0.35 + 0.3 * bump(h, 7.5, 1.5) + 0.1 * bump(h, 13.0, 3.0) + 0.6 * bump(h, 19.0, 2.5);
        out(static_cast<Eigen::Index>(i)) = std::max(0.05, base * (1.0 + noise[i]));
      }
      break;
    }
    case ProfileKind::slow_demand: {
      std::uniform_real_distribution<double> phase(-2.0, 2.0);
      const double shift = phase(rng);
      for (std::size_t i = 0; i < n; ++i)
        out(static_cast<Eigen::Index>(i)) =
            0.85 + 0.1 * std::cos(2.0 * std::numbers::pi * (hours[i] - 19.0 - shift) / 24.0);
      break;
    }
    case ProfileKind::cloudy_solar: {
      const auto cloud = ar1(n, 0.85, 0.35, rng);
      for (std::size_t i = 0; i < n; ++i) {
        const double h = hours[i];
        const double clear = h > 6.0 && h < 18.0 ? std::pow(std::sin(std::numbers::pi * (h - 6.0) / 12.0), 1.2) : 0.0;
        const double cover = std::clamp(0.4 + cloud[i], 0.0, 1.0);
        out(static_cast<Eigen::Index>(i)) = clear * (1.0 - 0.7 * cover);
      }
      break;
    }
  }
  const double peak = out.size() ? out.maxCoeff() : 0.0;
  if (peak > 0.0) out /= peak;
  return out;
}

Eigen::VectorXcd TimeSeriesSet::injections(int step) const {
  if (step < 0 || step >= steps()) throw std::out_of_range("time step out of range");
  Eigen::VectorXcd s(p_demand.rows());
  for (Eigen::Index k = 0; k < s.size(); ++k)
    s(k) = std::complex<double>(solar(k, step) - p_demand(k, step), -q_demand(k, step));
  return s;
}

TimeSeriesSet generate_synthetic_timeseries(const Grid& grid, const std::vector<int>& solar_buses, std::uint64_t seed,
                                            const SeriesOptions& opt) {
  if (!(opt.interval_minutes > 0.0)) throw std::invalid_argument("interval must be positive");
  if (!(opt.end_hour > opt.start_hour)) throw std::invalid_argument("empty time window");
  if (!(opt.power_factor > 0.0 && opt.power_factor <= 1.0)) throw std::invalid_argument("power factor must be in (0, 1]");
  TimeSeriesSet ts;
  ts.interval_minutes = opt.interval_minutes;
  for (double h = opt.start_hour; h < opt.end_hour - 1e-9; h += opt.interval_minutes / 60.0) ts.hours.push_back(h);
  const int n1 = grid.bus_count();
  const auto T = static_cast<Eigen::Index>(ts.hours.size());
  ts.p_demand = Eigen::MatrixXd::Zero(n1, T);
  ts.q_demand = Eigen::MatrixXd::Zero(n1, T);
  ts.solar = Eigen::MatrixXd::Zero(n1, T);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sign(-1.0, 1.0);
  const double tan_phi = std::tan(std::acos(opt.power_factor));
  for (int k = 1; k < n1; ++k) {
    const Bus& b = grid.bus(k);
    const ProfileKind kind = b.cls == BusClass::nonmetered ? ProfileKind::slow_demand : ProfileKind::residential;
    const Eigen::VectorXd prof = synthetic_profile(kind, ts.hours, derive_seed(seed, static_cast<std::uint64_t>(k)));
    const double peak = b.base_load.real();
    const double ratio = tan_phi * sign(rng);
    ts.p_demand.row(k) = peak * prof.transpose();
    ts.q_demand.row(k) = ratio * peak * prof.transpose();
  }
  // One cloud field for the whole feeder.
  const Eigen::VectorXd sun = synthetic_profile(ProfileKind::cloudy_solar, ts.hours, derive_seed(seed, 0x5017A7ull));
  for (int k : solar_buses) {
    if (k < 1 || k >= n1) throw std::invalid_argument("solar bus out of range");
    ts.solar.row(k) = grid.bus(k).pv_capacity * sun.transpose();
  }
  return ts;
}

void write_timeseries_csv(std::ostream& out, const TimeSeriesSet& ts, std::uint64_t seed) {
  out << "# timeseries interval_minutes=" << ts.interval_minutes << " steps=" << ts.steps() << " seed=" << seed
      << "\n";
  out << "step,hour,bus,p_demand,q_demand,solar\n";
  for (int t = 0; t < ts.steps(); ++t)
    for (Eigen::Index k = 1; k < ts.p_demand.rows(); ++k)
      out << t << "," << ts.hours[static_cast<std::size_t>(t)] << "," << k << "," << ts.p_demand(k, t) << ","
          << ts.q_demand(k, t) << "," << ts.solar(k, t) << "\n";
}

}  // namespace gridscope
