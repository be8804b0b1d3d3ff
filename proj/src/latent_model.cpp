#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "vse/inference.hpp"

namespace vse {

void ModelSpec::validate() const {
  pc_prior.validate();
  if (!(beta_precision > 0.0) || !std::isfinite(beta_precision))
    throw std::invalid_argument("ModelSpec: beta prior precision must be positive and finite");
  if (!std::isfinite(theta_prior.mean) || !(theta_prior.precision > 0.0) ||
      !std::isfinite(theta_prior.precision))
    throw std::invalid_argument("ModelSpec: theta prior must be finite with positive precision");
  if (fixed_zeta) {
    if (!use_vse) throw std::invalid_argument("ModelSpec: fixed_zeta requires the VSE model");
    if (!std::isfinite(*fixed_zeta) || *fixed_zeta < 0.0)
      throw std::invalid_argument("ModelSpec: fixed_zeta must be finite and nonnegative");
  }
}

std::size_t ModelSpec::hyper_dim() const { return (use_field ? 2 : 0) + (free_zeta() ? 1 : 0); }

std::vector<std::string> ModelSpec::hyper_names() const {
  std::vector<std::string> out;
  if (use_field) {
    out.push_back("log_rho");
    out.push_back("log_sigma");
  }
  if (free_zeta()) out.push_back("theta");
  return out;
}

namespace {

bool inside(const Rect& r, const Point& p) {
  return p.x >= r.xmin && p.x < r.xmax && p.y >= r.ymin && p.y < r.ymax;
}

}  // namespace

LatentModel::LatentModel(const PointPattern& pattern, std::span<const RasterGrid> covariates,
                         const RoadNetwork* roads, ModelSpec spec, const MeshConfig& mesh,
                         const RasterGrid* distance)
    : spec_(std::move(spec)), pattern_(pattern), covariates_(covariates.begin(), covariates.end()) {
  spec_.validate();
  pattern_.validate();
  if (pattern_.points.empty()) throw std::invalid_argument("fit: point pattern is empty");
  if (spec_.covariate_names.empty())
    for (std::size_t k = 0; k < covariates_.size(); ++k)
      spec_.covariate_names.push_back("x" + std::to_string(k + 1));
  if (spec_.covariate_names.size() != covariates_.size())
    throw std::invalid_argument("fit: one covariate name per raster required");
  for (std::size_t k = 0; k < covariates_.size(); ++k) {
    if (!covariates_[k].spec().congruent(covariates_.front().spec()))
      throw std::invalid_argument("fit: covariate rasters are not congruent");
    for (std::size_t c = 0; c < covariates_[k].values().size(); ++c)
      if (covariates_[k].is_nodata(c) || !std::isfinite(covariates_[k][c]))
        throw std::invalid_argument("fit: covariate '" + spec_.covariate_names[k] +
                                    "' has missing or non-finite cells");
  }
  if (spec_.use_vse && (!roads || roads->empty()))
    throw std::invalid_argument("fit: the VSE model needs a road network");
  if (mesh.cells < 2) throw std::invalid_argument("fit: mesh needs at least 2 cells per side");

  const Rect& dom = pattern_.domain;
  fit_grid_ = GridSpec::covering(dom, mesh.cells);
  p_ = covariates_.size() + 1;

  if (spec_.use_field) {
    const double ext = mesh.extension < 0.0 ? 1.5 * spec_.pc_prior.rho0 : mesh.extension;
    const int ext_cells = static_cast<int>(std::ceil(ext / fit_grid_.cell - 1e-9));
    latent_grid_ = fit_grid_.extended(std::max(ext_cells, 0));
    spde_ = std::make_unique<SpdeOperator>(latent_grid_);
    n_ = latent_grid_.size();
  } else {
    latent_grid_ = fit_grid_;
  }
  shift_ = spec_.use_field ? (latent_grid_.nx - fit_grid_.nx) / 2 : 0;

  const GridSpec base = covariates_.empty() ? fit_grid_ : covariates_.front().spec();
  const int per = std::max(mesh.quadrature_per_cell, 1);
  const int split = std::max(1, static_cast<int>(std::ceil(per * base.cell / fit_grid_.cell - 1e-9)));
  quad_grid_ = GridSpec{base.x0, base.y0, base.cell / split, base.nx * split, base.ny * split};
  const IntegrationScheme scheme = make_integration_scheme(quad_grid_, dom);
  const std::size_t m = scheme.weights.size();
  weights_ = scheme.weights;
  xn_.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p_));
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<std::ptrdiff_t> group_of_cell(fit_grid_.size(), -1);
  node_group_.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Point& c = scheme.nodes[i];
    xn_(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t k = 0; k < covariates_.size(); ++k)
      xn_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k + 1)) = covariates_[k].lookup(c);
    if (spec_.use_field) field_stencil(c, static_cast<int>(i), trip);
    const auto [fi, fj] = fit_grid_.locate(c);
    auto& g = group_of_cell[fit_grid_.index(fi, fj)];
    if (g < 0) g = static_cast<std::ptrdiff_t>(group_count_++);
    node_group_[i] = static_cast<std::size_t>(g);
  }
  an_.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n_));
  an_.setFromTriplets(trip.begin(), trip.end());
  an_.makeCompressed();

  const std::size_t np = pattern_.points.size();
  xp_.resize(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(p_));
  trip.clear();
  for (std::size_t j = 0; j < np; ++j) {
    const Point& s = pattern_.points[j];
    xp_(static_cast<Eigen::Index>(j), 0) = 1.0;
    for (std::size_t k = 0; k < covariates_.size(); ++k)
      xp_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k + 1)) = covariates_[k].lookup(s);
    if (spec_.use_field) field_stencil(s, static_cast<int>(j), trip);
  }
  ap_.resize(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(n_));
  ap_.setFromTriplets(trip.begin(), trip.end());
  ap_.makeCompressed();
  ap_sum_ = n_ ? Vector(ap_.transpose() * Vector::Ones(static_cast<Eigen::Index>(np)))
               : Vector(0);
  xp_sum_ = xp_.colwise().sum().transpose();

  if (spec_.use_vse) {
    point_dist_ = distances_to_roads(pattern_.points, *roads);
    // log q per quadrature cell averages q over the centers of a supplied
    // (finer) distance raster; otherwise the exact distance at the node.
    std::vector<std::vector<double>> groups(m);
    if (distance) {
      std::vector<std::ptrdiff_t> cell_to_node(quad_grid_.size(), -1);
      for (std::size_t i = 0; i < m; ++i) cell_to_node[scheme.cells[i]] = static_cast<std::ptrdiff_t>(i);
      const GridSpec& dg = distance->spec();
      for (std::size_t c = 0; c < dg.size(); ++c) {
        const Point ctr = dg.center(c);
        if (!inside(dom, ctr) || distance->is_nodata(c)) continue;
        const auto [i, j] = quad_grid_.locate(ctr);
        if (!inside(quad_grid_.cell_rect(i, j), ctr)) continue;
        const auto node = cell_to_node[quad_grid_.index(i, j)];
        if (node >= 0) groups[static_cast<std::size_t>(node)].push_back((*distance)[c]);
      }
    }
    const std::vector<double> at_nodes = distances_to_roads(scheme.nodes, *roads);
    node_dist_ptr_.assign(1, 0);
    for (std::size_t i = 0; i < m; ++i) {
      if (groups[i].empty()) groups[i].push_back(at_nodes[i]);
      node_dist_.insert(node_dist_.end(), groups[i].begin(), groups[i].end());
      node_dist_ptr_.push_back(node_dist_.size());
    }
  }
}

// Field values anywhere come from the in-domain fit-grid nodes; extension
// nodes carry no integration weight and only smooth the boundary.
void LatentModel::field_stencil(const Point& s, int row, std::vector<Eigen::Triplet<double>>& trip) const {
  const auto st = bilinear_stencil(fit_grid_, s);
  for (int k = 0; k < 4; ++k) {
    if (st.weight[k] == 0.0) continue;
    const int ci = static_cast<int>(st.index[k] % fit_grid_.nx), cj = static_cast<int>(st.index[k] / fit_grid_.nx);
    trip.emplace_back(row, static_cast<int>(latent_grid_.index(ci + shift_, cj + shift_)), st.weight[k]);
  }
}

HyperValues LatentModel::hyper_values(const Vector& h) const {
  if (static_cast<std::size_t>(h.size()) != spec_.hyper_dim())
    throw std::invalid_argument("hyper vector has the wrong dimension");
  HyperValues v;
  Eigen::Index k = 0;
  if (spec_.use_field) {
    v.rho = std::exp(h[k++]);
    v.sigma = std::exp(h[k++]);
  }
  if (spec_.free_zeta()) v.zeta = std::exp(h[k++]);
  else if (spec_.fixed_zeta) v.zeta = *spec_.fixed_zeta;
  return v;
}

Vector LatentModel::hyper_start() const {
  Vector h(static_cast<Eigen::Index>(spec_.hyper_dim()));
  Eigen::Index k = 0;
  if (spec_.use_field) {
    h[k++] = std::log(spec_.pc_prior.median_rho());
    h[k++] = std::log(spec_.pc_prior.median_sigma());
  }
  if (spec_.free_zeta()) h[k++] = spec_.theta_prior.mean;
  return h;
}

Vector LatentModel::hyper_prior_scale() const {
  Vector s(static_cast<Eigen::Index>(spec_.hyper_dim()));
  Eigen::Index k = 0;
  if (spec_.use_field) {
    s[k++] = 0.5;
    s[k++] = 0.5;
  }
  if (spec_.free_zeta()) s[k++] = std::min(1.0, 1.0 / std::sqrt(spec_.theta_prior.precision));
  return s;
}

double LatentModel::log_hyper_prior(const Vector& h) const {
  double lp = 0.0;
  Eigen::Index k = 0;
  if (spec_.use_field) {
    const double lr = h[k++], ls = h[k++];
    lp += pc_prior_logdensity(std::exp(lr), std::exp(ls), spec_.pc_prior) + lr + ls;
  }
  if (spec_.free_zeta()) {
    const double t = h[k++];
    const double prec = spec_.theta_prior.precision;
    const double d = t - spec_.theta_prior.mean;
    lp += 0.5 * std::log(prec / (2.0 * std::numbers::pi)) - 0.5 * prec * d * d;
  }
  return lp;
}

Vector LatentModel::node_offset(double zeta) const {
  const auto m = static_cast<Eigen::Index>(weights_.size());
  Vector off = Vector::Zero(m);
  if (!spec_.use_vse || zeta == 0.0) return off;
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::size_t b = node_dist_ptr_[static_cast<std::size_t>(i)];
    const std::size_t e = node_dist_ptr_[static_cast<std::size_t>(i) + 1];
    double dmin = node_dist_[b];
    for (std::size_t k = b; k < e; ++k) dmin = std::min(dmin, node_dist_[k]);
    const double top = -0.5 * zeta * dmin * dmin;
    double s = 0.0;
    for (std::size_t k = b; k < e; ++k) s += std::exp(-0.5 * zeta * node_dist_[k] * node_dist_[k] - top);
    off[i] = top + std::log(s / static_cast<double>(e - b));
  }
  return off;
}

Vector LatentModel::point_offset(double zeta) const {
  const auto np = static_cast<Eigen::Index>(pattern_.points.size());
  Vector off = Vector::Zero(np);
  if (!spec_.use_vse || zeta == 0.0) return off;
  for (Eigen::Index j = 0; j < np; ++j) {
    const double d = point_dist_[static_cast<std::size_t>(j)];
    off[j] = -0.5 * zeta * d * d;
  }
  return off;
}

void LatentModel::linear_predictor(const Vector& u, const Vector& node_off, const Vector& point_off,
                                   Vector& eta_nodes, Vector& eta_points) const {
  const auto n = static_cast<Eigen::Index>(n_);
  const auto beta = u.tail(static_cast<Eigen::Index>(p_));
  eta_nodes = xn_ * beta + node_off;
  eta_points = xp_ * beta + point_off;
  if (n_) {
    eta_nodes += an_ * u.head(n);
    eta_points += ap_ * u.head(n);
  }
}

Vector LatentModel::initial_latent(double zeta) const {
  const Vector off_n = node_offset(zeta);
  const Vector off_p = point_offset(zeta);
  const auto p = static_cast<Eigen::Index>(p_);
  const Eigen::Map<const Eigen::VectorXd> a(weights_.data(), static_cast<Eigen::Index>(weights_.size()));
  const double tb = spec_.beta_precision;
  Vector beta = Vector::Zero(p);
  // start the intercept at log(N / sum a_i q_i) so the first step is sane
  beta[0] = std::log(static_cast<double>(pattern_.points.size()) / (a.array() * off_n.array().exp()).sum());
  auto obj = [&](const Vector& b) {
    return xp_sum_.dot(b) + off_p.sum() - (a.array() * (xn_ * b + off_n).array().exp()).sum() -
           0.5 * tb * b.squaredNorm();
  };
  double f = obj(beta);
  for (int it = 0; it < 100; ++it) {
    const Vector w = a.array() * (xn_ * beta + off_n).array().exp();
    const Vector g = xp_sum_ - xn_.transpose() * w - tb * beta;
    if (g.cwiseAbs().maxCoeff() < 1e-10) break;
    Eigen::MatrixXd h = xn_.transpose() * w.asDiagonal() * xn_;
    h.diagonal().array() += tb;
    const Vector step = h.llt().solve(g);
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 30; ++k, t *= 0.5) {
      const Vector cand = beta + t * step;
      const double fc = obj(cand);
      if (std::isfinite(fc) && fc >= f) {
        beta = cand;
        f = fc;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  Vector u = Vector::Zero(static_cast<Eigen::Index>(dim()));
  u.tail(p) = beta;
  return u;
}

Eigen::MatrixXd LatentModel::target_design(const GridSpec& target) const {
  if (!covariates_.empty() && !covariates_.front().spec().congruent(target))
    throw std::invalid_argument("predict: target grid must be congruent with the covariates");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(target.size()), static_cast<Eigen::Index>(p_));
  x.col(0).setOnes();
  for (std::size_t k = 0; k < covariates_.size(); ++k)
    for (std::size_t c = 0; c < target.size(); ++c)
      x(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k + 1)) = covariates_[k][c];
  return x;
}

SparseMatrix LatentModel::target_projector(const GridSpec& target) const {
  SparseMatrix a(static_cast<Eigen::Index>(target.size()), static_cast<Eigen::Index>(n_));
  if (!n_) return a;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * target.size());
  for (std::size_t c = 0; c < target.size(); ++c) field_stencil(target.center(c), static_cast<int>(c), trip);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

}  // namespace vse
