#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vse/geo.hpp"
#include "vse/grid.hpp"

namespace vse {

/// Half-normal retention probability exp(-zeta d^2 / 2).
double q_probability(double distance, double zeta);

/// Log-intensity at cell centers plus what it was built from.
struct LogIntensitySurface {
  RasterGrid log_intensity;
  std::vector<double> beta;                 // intercept first
  std::vector<std::string> covariate_names;
  std::optional<RasterGrid> field;

  void validate() const;
};

/// log lambda = beta0 + sum_k beta_k x_k + field, cellwise. All rasters
/// must be congruent; `field` may be empty.
LogIntensitySurface make_log_intensity(std::span<const RasterGrid> covariates,
                                       std::span<const double> beta,
                                       const RasterGrid* field,
                                       std::vector<std::string> names = {});

struct ThinningConfig {
  double zeta = 0.0;
  std::optional<RasterGrid> distance_raster;

  void validate() const;
};

/// Midpoint-rule integration: cell centers with cell areas clipped to the
/// domain. Cells that do not overlap the domain are dropped.
struct IntegrationScheme {
  std::vector<Point> nodes;
  std::vector<double> weights;
  std::vector<std::size_t> cells;  // linear index of each node's grid cell

  double total_weight() const;
};

IntegrationScheme make_integration_scheme(const GridSpec& grid, const Rect& domain);

struct SimulationOptions {
  double log_intensity_cap = 20.0;
  double log_intensity_floor = -700.0;
};

/// Per cell: Poisson(exp(log lambda) * clipped area) points, placed
/// uniformly in the part of the cell inside `domain`.
PointPattern simulate_lgcp(const LogIntensitySurface& surface, const Rect& domain,
                           std::uint64_t seed, const SimulationOptions& options = {});

/// Retains each point independently with probability q(d(s), zeta), where
/// d is the exact road distance. Retained points are copied unchanged. The
/// i-th point always consumes the i-th uniform of the seeded stream, so
/// the same seed gives nested patterns across zeta.
PointPattern thin(const PointPattern& pattern, const ThinningConfig& config,
                  const RoadNetwork& roads, std::uint64_t seed);

/// Same as thin() with road distances already computed.
PointPattern thin_by_distance(const PointPattern& pattern, std::span<const double> distances,
                              double zeta, std::uint64_t seed);

/// Approximate LGCP log-likelihood without its additive constant:
/// -sum_i a_i exp(eta(node_i)) + sum_j eta(s_j).
double loglik_lgcp(const PointPattern& pattern, std::span<const double> log_intensity_at_nodes,
                   std::span<const double> log_intensity_at_points,
                   const IntegrationScheme& scheme);

}  // namespace vse
