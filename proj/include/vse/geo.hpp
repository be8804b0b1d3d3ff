#pragma once

#include <span>
#include <utility>
#include <vector>

#include "vse/grid.hpp"

namespace vse {

/// Road system as a set of polylines. Each polyline has at least two
/// vertices and every coordinate is finite.
class RoadNetwork {
 public:
  RoadNetwork() = default;
  explicit RoadNetwork(std::vector<std::vector<Point>> polylines);

  const std::vector<std::vector<Point>>& polylines() const { return lines_; }
  bool empty() const { return lines_.empty(); }
  std::size_t segment_count() const;

 private:
  std::vector<std::vector<Point>> lines_;
};

/// Planar point pattern observed on a rectangular window.
struct PointPattern {
  std::vector<Point> points;
  Rect domain;

  std::size_t size() const { return points.size(); }
  /// Throws if the domain is degenerate or a point lies outside it.
  void validate() const;
};

/// Euclidean distance from p to the segment [a, b].
double point_segment_distance(const Point& p, const Point& a, const Point& b);

/// Minimum distance from p to any segment of the network.
double distance_to_roads(const Point& p, const RoadNetwork& roads);

std::vector<double> distances_to_roads(std::span<const Point> pts,
                                       const RoadNetwork& roads);

/// Raster whose cell values are the road distances of the cell centers.
RasterGrid distance_raster(const GridSpec& grid, const RoadNetwork& roads);

/// Empirical CDF, right-continuous.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> values);
  double operator()(double x) const;
  const std::vector<double>& sorted() const { return sorted_; }
  std::size_t size() const { return sorted_.size(); }
  /// Empirical quantile (type 7, linear interpolation).
  double quantile(double prob) const;

 private:
  std::vector<double> sorted_;
};

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Asymptotic Kolmogorov survival function P(K > lambda).
double kolmogorov_survival(double lambda);

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at
/// effective size n_a*n_b/(n_a+n_b).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

double pearson_corr(std::span<const double> a, std::span<const double> b);

}  // namespace vse
