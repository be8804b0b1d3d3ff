#include "vse/grid.hpp"

#include <algorithm>

namespace vse {

GridSpec GridSpec::covering(const Rect& domain, int n) {
  domain.validate();
  if (n < 1) throw std::invalid_argument("GridSpec::covering: n must be >= 1");
  const double side = std::max(domain.width(), domain.height());
  const double cell = side / n;
  const int nx = std::max(1, static_cast<int>(std::ceil(domain.width() / cell - 1e-9)));
  const int ny = std::max(1, static_cast<int>(std::ceil(domain.height() / cell - 1e-9)));
  return {domain.xmin, domain.ymin, cell, nx, ny};
}

RasterGrid::RasterGrid(GridSpec spec, double fill) : spec_(spec) {
  spec_.validate();
  values_.assign(spec_.size(), fill);
}

RasterGrid::RasterGrid(GridSpec spec, std::vector<double> values,
                       std::optional<double> nodata)
    : spec_(spec), values_(std::move(values)), nodata_(nodata) {
  spec_.validate();
  if (values_.size() != spec_.size())
    throw std::invalid_argument("RasterGrid: values length != nx*ny");
}

double RasterGrid::lookup(const Point& p) const {
  auto [i, j] = spec_.locate(p);
  return (*this)(i, j);
}

BilinearStencil bilinear_stencil(const GridSpec& spec, const Point& p) {
  // continuous index relative to cell centers
  double fx = (p.x - spec.x0) / spec.cell - 0.5;
  double fy = (p.y - spec.y0) / spec.cell - 0.5;
  fx = std::clamp(fx, 0.0, static_cast<double>(spec.nx - 1));
  fy = std::clamp(fy, 0.0, static_cast<double>(spec.ny - 1));
  int i0 = std::min(static_cast<int>(std::floor(fx)), std::max(spec.nx - 2, 0));
  int j0 = std::min(static_cast<int>(std::floor(fy)), std::max(spec.ny - 2, 0));
  const int i1 = std::min(i0 + 1, spec.nx - 1);
  const int j1 = std::min(j0 + 1, spec.ny - 1);
  const double tx = fx - i0;
  const double ty = fy - j0;
  BilinearStencil s;
  s.index = {spec.index(i0, j0), spec.index(i1, j0), spec.index(i0, j1),
             spec.index(i1, j1)};
  s.weight = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
  return s;
}

double RasterGrid::bilinear(const Point& p) const {
  const auto s = bilinear_stencil(spec_, p);
  double v = 0.0;
  for (int k = 0; k < 4; ++k) v += s.weight[k] * values_[s.index[k]];
  return v;
}

double overlap_area(const Rect& a, const Rect& b) {
  const double w = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double h = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  return (w > 0 && h > 0) ? w * h : 0.0;
}

}  // namespace vse
