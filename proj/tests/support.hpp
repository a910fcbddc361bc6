#pragma once

#include <complex>
#include <random>
#include <string>
#include <vector>

#include "gridscope/grid.hpp"
#include "gridscope/harness.hpp"
#include "gridscope/pfmodel.hpp"

namespace gstest {

inline std::string data_path(const std::string& file) { return std::string(GRIDSCOPE_TEST_DATA_DIR) + "/" + file; }

inline gridscope::Grid ieee34() { return gridscope::load_grid(data_path("ieee34.json")); }

inline gridscope::Grid scenario(const std::string& file) {
  return gridscope::apply_scenario(ieee34(), gridscope::load_scenario(data_path(file)));
}

// 0 - 1 - 2 - 3 with a branch 1 - 4. Bus 2 is nonmetered, bus 3 metered.
inline gridscope::Grid small_feeder() {
  using namespace gridscope;
  std::vector<Bus> buses(5);
  for (int k = 0; k < 5; ++k) {
    buses[static_cast<std::size_t>(k)].index = k;
    buses[static_cast<std::size_t>(k)].base_load = k == 0 ? std::complex<double>{} : std::complex<double>(0.05, 0.02);
  }
  buses[0].cls = BusClass::substation;
  buses[2].cls = BusClass::nonmetered;
  buses[3].cls = BusClass::metered;
  buses[3].pv_capacity = 0.2;
  std::vector<Line> lines{{0, 1, 0.01, 0.02}, {1, 2, 0.02, 0.03}, {2, 3, 0.015, 0.02}, {1, 4, 0.03, 0.02}};
  return Grid({"small", 1.0, 1.0}, std::move(buses), std::move(lines));
}

// Random state with |V| in [lo, hi] and angles within ±0.1 rad, V_0 = 1.
inline gridscope::State random_state(int bus_count, std::mt19937_64& rng, double lo = 0.95, double hi = 1.05) {
  std::uniform_real_distribution<double> mag(lo, hi), ang(-0.1, 0.1);
  Eigen::VectorXcd v(bus_count);
  v(0) = 1.0;
  for (int k = 1; k < bus_count; ++k) v(k) = std::polar(mag(rng), ang(rng));
  return gridscope::State::from_complex(v);
}

}  // namespace gstest
