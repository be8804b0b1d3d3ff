#pragma once

#include <random>
#include <vector>

#include "vse/grf.hpp"
#include "vse/pointprocess.hpp"
#include "vse/rng.hpp"

namespace vse::testing {

// Small LGCP instance on a side x side km square with 1 km cells, an iid
// standard-normal covariate per cell and one diagonal road.
struct Toy {
  Rect domain;
  GridSpec grid;
  std::vector<RasterGrid> covariates;
  RoadNetwork roads;
  PointPattern pattern;
};

inline Toy make_toy(int side, double beta0, double beta1, double sigma, double rho, std::uint64_t seed) {
  Toy t;
  t.domain = {0.0, 0.0, static_cast<double>(side), static_cast<double>(side)};
  t.grid = GridSpec{0.0, 0.0, 1.0, side, side};
  RasterGrid x(t.grid);
  Rng rng(derive_seed(seed, {1}));
  std::normal_distribution<double> nd;
  for (std::size_t k = 0; k < t.grid.size(); ++k) x[k] = nd(rng);
  t.covariates.push_back(std::move(x));
  t.roads = RoadNetwork({{{0.0, 0.3 * side}, {static_cast<double>(side), 0.8 * side}}});
  const double beta[2] = {beta0, beta1};
  std::optional<RasterGrid> field;
  if (sigma > 0.0) field = simulate_matern_field(t.grid, MaternParams(sigma, rho), derive_seed(seed, {2}));
  const auto surface = make_log_intensity(t.covariates, beta, field ? &*field : nullptr, {"x"});
  t.pattern = simulate_lgcp(surface, t.domain, derive_seed(seed, {3}));
  return t;
}

}  // namespace vse::testing
