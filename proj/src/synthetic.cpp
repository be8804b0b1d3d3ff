#include "vse/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "vse/grf.hpp"
#include "vse/pointprocess.hpp"
#include "vse/rng.hpp"

namespace vse {

void SyntheticConfig::validate() const {
  if (!(side > 0.0) || raster_cells < 4 || distance_cells < raster_cells)
    throw std::invalid_argument("SyntheticConfig: invalid domain or raster size");
  if (main_roads < 1 || branches < 0 || !(branch_min > 0.0) || branch_max < branch_min || !(step > 0.0))
    throw std::invalid_argument("SyntheticConfig: invalid road settings");
  if (!(covariate_range > 0.0) || !(target_correlation > -1.0 && target_correlation < 1.0))
    throw std::invalid_argument("SyntheticConfig: invalid covariate settings");
}

namespace {

// Walks from `start` along `heading` until `length` is covered or the
// domain edge is reached; the last vertex is clipped to the edge.
std::vector<Point> walk(Point start, double heading, double length, const SyntheticConfig& c, const Rect& dom,
                        Rng& rng) {
  std::normal_distribution<double> turn(0.0, c.turn_sd);
  std::vector<Point> line{start};
  double done = 0.0;
  Point p = start;
  while (done < length) {
    heading += turn(rng);
    const double len = std::min(c.step, length - done);
    Point q{p.x + len * std::cos(heading), p.y + len * std::sin(heading)};
    if (!dom.contains(q)) {
      // shrink the step onto the boundary
      double t = 1.0;
      if (q.x < dom.xmin) t = std::min(t, (dom.xmin - p.x) / (q.x - p.x));
      if (q.x > dom.xmax) t = std::min(t, (dom.xmax - p.x) / (q.x - p.x));
      if (q.y < dom.ymin) t = std::min(t, (dom.ymin - p.y) / (q.y - p.y));
      if (q.y > dom.ymax) t = std::min(t, (dom.ymax - p.y) / (q.y - p.y));
      q = {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
      if (t > 1e-9) line.push_back(q);
      break;
    }
    line.push_back(q);
    p = q;
    done += len;
  }
  return line;
}

void standardize(std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  for (double& x : v) x = (x - m) / sd;
}

}  // namespace

SyntheticDomain make_synthetic_domain(const SyntheticConfig& c) {
  c.validate();
  SyntheticDomain out;
  out.domain = {0.0, 0.0, c.side, c.side};
  const Rect& dom = out.domain;
  Rng rng(derive_seed(c.seed, {1}));
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<std::vector<Point>> lines;
  for (int r = 0; r < c.main_roads; ++r) {
    // enter on a random edge, head across the domain
    const int edge = static_cast<int>(unif(rng) * 4) % 4;
    const double t = 0.15 + 0.7 * unif(rng);
    Point start;
    double heading;
    switch (edge) {
      case 0: start = {dom.xmin, dom.ymin + t * c.side}; heading = 0.0; break;
      case 1: start = {dom.xmax, dom.ymin + t * c.side}; heading = std::numbers::pi; break;
      case 2: start = {dom.xmin + t * c.side, dom.ymin}; heading = 0.5 * std::numbers::pi; break;
      default: start = {dom.xmin + t * c.side, dom.ymax}; heading = -0.5 * std::numbers::pi; break;
    }
    heading += (unif(rng) - 0.5) * 0.8;
    auto line = walk(start, heading, 4.0 * c.side, c, dom, rng);
    if (line.size() >= 2) lines.push_back(std::move(line));
  }

  const Point hub{dom.xmin + (0.2 + 0.6 * unif(rng)) * c.side, dom.ymin + (0.2 + 0.6 * unif(rng)) * c.side};
  for (int b = 0; b < c.branches; ++b) {
    // pick a parent vertex with weight decaying away from the hub
    std::vector<double> w;
    std::vector<std::pair<std::size_t, std::size_t>> ref;
    for (std::size_t l = 0; l < lines.size(); ++l)
      for (std::size_t v = 0; v + 1 < lines[l].size(); ++v) {
        const double d = std::hypot(lines[l][v].x - hub.x, lines[l][v].y - hub.y);
        w.push_back(0.15 + std::exp(-d / c.hub_scale));
        ref.emplace_back(l, v);
      }
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    const auto [l, v] = ref[pick(rng)];
    const Point a = lines[l][v], nb = lines[l][v + 1];
    const double along = std::atan2(nb.y - a.y, nb.x - a.x);
    const double heading = along + (unif(rng) < 0.5 ? 0.5 : -0.5) * std::numbers::pi + (unif(rng) - 0.5) * 0.6;
    const double length = c.branch_min + unif(rng) * (c.branch_max - c.branch_min);
    auto line = walk(a, heading, length, c, dom, rng);
    if (line.size() >= 2) lines.push_back(std::move(line));
  }
  out.roads = RoadNetwork(std::move(lines));

  const GridSpec g = GridSpec::covering(dom, c.raster_cells);
  const GridSpec fine = GridSpec::covering(dom, c.distance_cells);
  out.distance = distance_raster(g, out.roads);
  out.fine_distance = distance_raster(fine, out.roads);

  std::vector<double> smooth = simulate_matern_field(g, MaternParams(1.0, c.covariate_range), derive_seed(c.seed, {2}))
                                   .values();
  standardize(smooth);
  std::vector<double> dist = out.distance.values();
  standardize(dist);

  auto mix = [&](double w) {
    std::vector<double> x(smooth.size());
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = (1.0 - w) * smooth[k] - w * dist[k];
    standardize(x);
    return x;
  };
  auto corr_at = [&](double w) { return pearson_corr(mix(w), out.distance.values()); };
  double lo = 0.0, hi = 1.0;
  double w = 0.0;
  if (corr_at(0.0) > c.target_correlation) {
    // correlation falls as the distance term gains weight
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (corr_at(mid) > c.target_correlation ? lo : hi) = mid;
    }
    w = 0.5 * (lo + hi);
  }
  out.mix_weight = w;
  out.covariate = RasterGrid(g, mix(w));
  out.correlation = pearson_corr(out.covariate.values(), out.distance.values());
  return out;
}

double removal_fraction(std::span<const double> distances, std::span<const double> weights, double zeta) {
  if (distances.size() != weights.size() || distances.empty())
    throw std::invalid_argument("removal_fraction: mismatched inputs");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < distances.size(); ++k) {
    num += weights[k] * (1.0 - q_probability(distances[k], zeta));
    den += weights[k];
  }
  return num / den;
}

double calibrate_zeta_scale(std::span<const double> distances, std::span<const double> weights, double zeta_max,
                            double target) {
  if (!(zeta_max > 0.0) || !(target > 0.0 && target < 1.0))
    throw std::invalid_argument("calibrate_zeta_scale: invalid target");
  double lo = -30.0, hi = 30.0;  // log s
  if (removal_fraction(distances, weights, zeta_max * std::exp(hi)) < target)
    throw std::runtime_error("calibrate_zeta_scale: target removal unreachable");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (removal_fraction(distances, weights, zeta_max * std::exp(mid)) < target ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

}  // namespace vse
