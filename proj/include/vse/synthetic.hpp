#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vse/geo.hpp"
#include "vse/grid.hpp"

namespace vse {

/// Generator settings for a square test landscape in km.
struct SyntheticConfig {
  double side = 120.0;
  int raster_cells = 100;    // covariate raster cells per side
  int distance_cells = 300;  // fine distance raster cells per side
  int main_roads = 4;
  int branches = 80;
  double branch_min = 4.0;
  double branch_max = 30.0;
  double step = 1.5;         // polyline vertex spacing
  double turn_sd = 0.2;      // heading noise per step (radians)
  double hub_scale = 35.0;   // branch density decays with distance to a hub
  double covariate_range = 40.0;
  double target_correlation = -0.4;
  std::uint64_t seed = 20240601;

  void validate() const;
};

struct SyntheticDomain {
  Rect domain;
  RoadNetwork roads;
  RasterGrid covariate;       // standardized, mean 0 sd 1 over cells
  RasterGrid distance;        // road distance at covariate cell centers
  RasterGrid fine_distance;   // road distance on the finer grid
  double correlation = 0.0;   // achieved corr(covariate, distance)
  double mix_weight = 0.0;    // weight of the distance term
};

/// Random connected road network (main roads crossing the domain plus
/// branches grown from existing vertices, denser near a hub) and a
/// covariate mixing a smooth Matern field with the negated road distance,
/// tuned by bisection to the target correlation with distance.
SyntheticDomain make_synthetic_domain(const SyntheticConfig& config);

/// Intensity-weighted fraction of points removed by half-normal thinning
/// with the given zeta: sum w (1 - q(d, zeta)) / sum w.
double removal_fraction(std::span<const double> distances, std::span<const double> weights, double zeta);

/// Scale s such that zeta_max * s removes `target` of the weighted mass.
double calibrate_zeta_scale(std::span<const double> distances, std::span<const double> weights,
                            double zeta_max, double target);

}  // namespace vse
