#include "vse/pointprocess.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "vse/rng.hpp"

namespace vse {

double q_probability(double distance, double zeta) {
  if (!std::isfinite(distance) || !std::isfinite(zeta))
    throw std::invalid_argument("q_probability: non-finite input");
  if (distance < 0.0 || zeta < 0.0)
    throw std::invalid_argument("q_probability: negative input");
  return std::exp(-0.5 * zeta * distance * distance);
}

void LogIntensitySurface::validate() const {
  for (std::size_t k = 0; k < log_intensity.values().size(); ++k) {
    const double v = log_intensity[k];
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw std::invalid_argument("LogIntensitySurface: non-finite log-intensity");
  }
  if (field && !field->spec().congruent(log_intensity.spec()))
    throw std::invalid_argument("LogIntensitySurface: field grid not congruent");
}

LogIntensitySurface make_log_intensity(std::span<const RasterGrid> covariates,
                                       std::span<const double> beta, const RasterGrid* field,
                                       std::vector<std::string> names) {
  if (beta.size() != covariates.size() + 1)
    throw std::invalid_argument("make_log_intensity: need one coefficient per covariate plus intercept");
  const GridSpec* spec = nullptr;
  if (!covariates.empty()) spec = &covariates.front().spec();
  else if (field) spec = &field->spec();
  else throw std::invalid_argument("make_log_intensity: no grid to define the surface on");
  for (const auto& c : covariates)
    if (!c.spec().congruent(*spec)) throw std::invalid_argument("make_log_intensity: covariate grids differ");
  if (field && !field->spec().congruent(*spec))
    throw std::invalid_argument("make_log_intensity: field grid differs");

  LogIntensitySurface out;
  out.log_intensity = RasterGrid(*spec, beta[0]);
  for (std::size_t k = 0; k < covariates.size(); ++k)
    for (std::size_t c = 0; c < spec->size(); ++c) out.log_intensity[c] += beta[k + 1] * covariates[k][c];
  if (field) {
    for (std::size_t c = 0; c < spec->size(); ++c) out.log_intensity[c] += (*field)[c];
    out.field = *field;
  }
  out.beta.assign(beta.begin(), beta.end());
  out.covariate_names = std::move(names);
  return out;
}

void ThinningConfig::validate() const {
  if (!std::isfinite(zeta) || zeta < 0.0)
    throw std::invalid_argument("ThinningConfig: zeta must be finite and nonnegative");
}

double IntegrationScheme::total_weight() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

IntegrationScheme make_integration_scheme(const GridSpec& grid, const Rect& domain) {
  grid.validate();
  domain.validate();
  IntegrationScheme s;
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const double a = overlap_area(grid.cell_rect(i, j), domain);
      if (a <= 0.0) continue;
      s.nodes.push_back(grid.center(i, j));
      s.weights.push_back(a);
      s.cells.push_back(grid.index(i, j));
    }
  }
  return s;
}

PointPattern simulate_lgcp(const LogIntensitySurface& surface, const Rect& domain,
                           std::uint64_t seed, const SimulationOptions& options) {
  surface.validate();
  domain.validate();
  const GridSpec& g = surface.log_intensity.spec();
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  PointPattern out;
  out.domain = domain;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      double eta = surface.log_intensity(i, j);
      if (eta > options.log_intensity_cap) {
        std::ostringstream msg;
        msg << "simulate_lgcp: log-intensity " << eta << " at cell (" << i << ", " << j
            << ") exceeds cap " << options.log_intensity_cap;
        throw std::overflow_error(msg.str());
      }
      eta = std::max(eta, options.log_intensity_floor);
      const Rect cr = g.cell_rect(i, j);
      const Rect clip{std::max(cr.xmin, domain.xmin), std::max(cr.ymin, domain.ymin),
                      std::min(cr.xmax, domain.xmax), std::min(cr.ymax, domain.ymax)};
      const double area = overlap_area(cr, domain);
      if (area <= 0.0) continue;
      const double mean = std::exp(eta) * area;
      if (mean <= 0.0) continue;
      std::poisson_distribution<long> pois(mean);
      const long count = pois(rng);
      for (long c = 0; c < count; ++c) {
        const double x = clip.xmin + unif(rng) * clip.width();
        const double y = clip.ymin + unif(rng) * clip.height();
        out.points.push_back({x, y});
      }
    }
  }
  return out;
}

PointPattern thin_by_distance(const PointPattern& pattern, std::span<const double> distances,
                              double zeta, std::uint64_t seed) {
  if (distances.size() != pattern.points.size())
    throw std::invalid_argument("thin: one distance per point required");
  if (!std::isfinite(zeta) || zeta < 0.0) throw std::invalid_argument("thin: invalid zeta");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  PointPattern out;
  out.domain = pattern.domain;
  for (std::size_t k = 0; k < pattern.points.size(); ++k) {
    const double u = unif(rng);
    if (u < q_probability(distances[k], zeta)) out.points.push_back(pattern.points[k]);
  }
  return out;
}

PointPattern thin(const PointPattern& pattern, const ThinningConfig& config,
                  const RoadNetwork& roads, std::uint64_t seed) {
  pattern.validate();
  config.validate();
  if (config.zeta == 0.0) return pattern;
  const auto d = distances_to_roads(pattern.points, roads);
  return thin_by_distance(pattern, d, config.zeta, seed);
}

double loglik_lgcp(const PointPattern& pattern, std::span<const double> log_intensity_at_nodes,
                   std::span<const double> log_intensity_at_points,
                   const IntegrationScheme& scheme) {
  if (log_intensity_at_nodes.size() != scheme.weights.size())
    throw std::invalid_argument("loglik_lgcp: node values do not match the integration scheme");
  if (log_intensity_at_points.size() != pattern.points.size())
    throw std::invalid_argument("loglik_lgcp: point values do not match the pattern");
  double ll = 0.0;
  for (std::size_t i = 0; i < scheme.weights.size(); ++i)
    ll -= scheme.weights[i] * std::exp(log_intensity_at_nodes[i]);
  for (double eta : log_intensity_at_points) ll += eta;
  return ll;
}

}  // namespace vse
