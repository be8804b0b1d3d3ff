#include "vse/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vse {

RoadNetwork::RoadNetwork(std::vector<std::vector<Point>> polylines)
    : lines_(std::move(polylines)) {
  for (const auto& line : lines_) {
    if (line.size() < 2)
      throw std::invalid_argument("RoadNetwork: polyline with fewer than 2 vertices");
    for (const auto& p : line)
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw std::invalid_argument("RoadNetwork: non-finite coordinate");
  }
}

std::size_t RoadNetwork::segment_count() const {
  std::size_t n = 0;
  for (const auto& l : lines_) n += l.size() - 1;
  return n;
}

void PointPattern::validate() const {
  domain.validate();
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw std::invalid_argument("PointPattern: non-finite point");
    if (!domain.contains(p))
      throw std::invalid_argument("PointPattern: point outside domain");
  }
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

double distance_to_roads(const Point& p, const RoadNetwork& roads) {
  if (roads.empty()) throw std::invalid_argument("distance_to_roads: empty road network");
  if (!std::isfinite(p.x) || !std::isfinite(p.y))
    throw std::invalid_argument("distance_to_roads: non-finite point");
  double best2 = std::numeric_limits<double>::infinity();
  for (const auto& line : roads.polylines()) {
    for (std::size_t k = 0; k + 1 < line.size(); ++k) {
      const Point& a = line[k];
      const Point& b = line[k + 1];
      // cheap reject on the segment's bounding box
      const double lox = std::min(a.x, b.x), hix = std::max(a.x, b.x);
      const double loy = std::min(a.y, b.y), hiy = std::max(a.y, b.y);
      const double gx = p.x < lox ? lox - p.x : (p.x > hix ? p.x - hix : 0.0);
      const double gy = p.y < loy ? loy - p.y : (p.y > hiy ? p.y - hiy : 0.0);
      if (gx * gx + gy * gy >= best2) continue;
      const double d = point_segment_distance(p, a, b);
      best2 = std::min(best2, d * d);
    }
  }
  return std::sqrt(best2);
}

std::vector<double> distances_to_roads(std::span<const Point> pts,
                                       const RoadNetwork& roads) {
  std::vector<double> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(distance_to_roads(p, roads));
  return out;
}

RasterGrid distance_raster(const GridSpec& grid, const RoadNetwork& roads) {
  grid.validate();
  if (roads.empty()) throw std::invalid_argument("distance_raster: empty road network");
  RasterGrid out(grid);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) out(i, j) = distance_to_roads(grid.center(i, j), roads);
  return out;
}

Ecdf::Ecdf(std::vector<double> values) : sorted_(std::move(values)) {
  if (sorted_.empty()) throw std::invalid_argument("Ecdf: empty input");
  for (double v : sorted_)
    if (std::isnan(v)) throw std::invalid_argument("Ecdf: NaN input");
  std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double Ecdf::quantile(double prob) const {
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("Ecdf::quantile: prob outside [0,1]");
  const double h = (sorted_.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted_.size() - 1);
  return sorted_[lo] + (h - lo) * (sorted_[hi] - sorted_[lo]);
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) {
    // the alternating series converges slowly here; use the Jacobi form
    // P(K <= l) = sqrt(2 pi)/l * sum exp(-(2k-1)^2 pi^2 / (8 l^2))
    const double c = M_PI * M_PI / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k <= 50; ++k) s += std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * c);
    return 1.0 - std::sqrt(2.0 * M_PI) / lambda * s;
  }
  double s = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  // merge walk; ties advance both samples together
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  KsResult r;
  r.statistic = d;
  const double ne = na * nb / (na + nb);
  r.p_value = kolmogorov_survival(std::sqrt(ne) * d);
  return r;
}

double pearson_corr(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson_corr: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("pearson_corr: need at least 2 values");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= n;
  mb /= n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double da = a[k] - ma, db = b[k] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw std::invalid_argument("pearson_corr: zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace vse
