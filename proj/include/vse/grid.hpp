#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace vse {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned rectangle (xmin, ymin, xmax, ymax).
struct Rect {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 1.0;
  double ymax = 1.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  bool contains(const Point& p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
  void validate() const {
    if (!(std::isfinite(xmin) && std::isfinite(ymin) && std::isfinite(xmax) &&
          std::isfinite(ymax)) ||
        !(xmax > xmin) || !(ymax > ymin))
      throw std::invalid_argument("Rect: degenerate or non-finite rectangle");
  }
};

/// Geometry of a regular grid. Cell (i, j) has center
/// origin + (i + 0.5, j + 0.5) * cell; linear index j * nx + i, with j
/// counting rows upward from the origin.
struct GridSpec {
  double x0 = 0.0;
  double y0 = 0.0;
  double cell = 1.0;
  int nx = 1;
  int ny = 1;

  std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * nx + i;
  }
  Point center(int i, int j) const {
    return {x0 + (i + 0.5) * cell, y0 + (j + 0.5) * cell};
  }
  Point center(std::size_t k) const {
    return center(static_cast<int>(k % nx), static_cast<int>(k / nx));
  }
  Rect bounds() const { return {x0, y0, x0 + nx * cell, y0 + ny * cell}; }
  Rect cell_rect(int i, int j) const {
    return {x0 + i * cell, y0 + j * cell, x0 + (i + 1) * cell,
            y0 + (j + 1) * cell};
  }

  /// Cell containing p, clamped to the grid.
  std::pair<int, int> locate(const Point& p) const {
    int i = static_cast<int>(std::floor((p.x - x0) / cell));
    int j = static_cast<int>(std::floor((p.y - y0) / cell));
    i = i < 0 ? 0 : (i >= nx ? nx - 1 : i);
    j = j < 0 ? 0 : (j >= ny ? ny - 1 : j);
    return {i, j};
  }

  bool congruent(const GridSpec& o) const {
    return nx == o.nx && ny == o.ny && std::abs(cell - o.cell) <= 1e-9 * cell &&
           std::abs(x0 - o.x0) <= 1e-9 * (std::abs(x0) + cell) &&
           std::abs(y0 - o.y0) <= 1e-9 * (std::abs(y0) + cell);
  }

  void validate() const {
    if (!(cell > 0.0) || !std::isfinite(cell))
      throw std::invalid_argument("GridSpec: cell size must be positive");
    if (nx < 1 || ny < 1)
      throw std::invalid_argument("GridSpec: nx and ny must be positive");
    if (!std::isfinite(x0) || !std::isfinite(y0))
      throw std::invalid_argument("GridSpec: non-finite origin");
  }

  /// Grid covering `domain` with `n` cells along the longer side.
  static GridSpec covering(const Rect& domain, int n);

  /// Grid padded by `cells` extra cells on every side.
  GridSpec extended(int cells) const {
    return {x0 - cells * cell, y0 - cells * cell, cell, nx + 2 * cells,
            ny + 2 * cells};
  }
};

/// Regular raster of values (covariates, distances, field values).
class RasterGrid {
 public:
  RasterGrid() = default;
  explicit RasterGrid(GridSpec spec, double fill = 0.0);
  RasterGrid(GridSpec spec, std::vector<double> values,
             std::optional<double> nodata = std::nullopt);

  const GridSpec& spec() const { return spec_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  std::optional<double> nodata() const { return nodata_; }
  void set_nodata(std::optional<double> v) { nodata_ = v; }

  double operator()(int i, int j) const { return values_[spec_.index(i, j)]; }
  double& operator()(int i, int j) { return values_[spec_.index(i, j)]; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }

  bool is_nodata(std::size_t k) const {
    return nodata_ && values_[k] == *nodata_;
  }

  /// Value of the cell containing p (nearest cell if p is outside).
  double lookup(const Point& p) const;
  /// Bilinear interpolation between cell centers, clamped at the edges.
  double bilinear(const Point& p) const;

 private:
  GridSpec spec_;
  std::vector<double> values_;
  std::optional<double> nodata_;
};

/// Four-cell bilinear interpolation weights between cell centers. Points
/// outside the hull of centers are clamped to it.
struct BilinearStencil {
  std::array<std::size_t, 4> index{};
  std::array<double, 4> weight{};
};
BilinearStencil bilinear_stencil(const GridSpec& spec, const Point& p);

/// Area of the intersection of two rectangles.
double overlap_area(const Rect& a, const Rect& b);

}  // namespace vse
