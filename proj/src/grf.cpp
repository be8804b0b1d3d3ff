#include "vse/grf.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace vse {

MaternParams::MaternParams(double sigma, double rho) : sigma_(sigma), rho_(rho) {
  if (!std::isfinite(sigma) || !std::isfinite(rho))
    throw std::invalid_argument("MaternParams: non-finite parameter");
  if (!(sigma > 0.0) || !(rho > 0.0))
    throw std::invalid_argument("MaternParams: sigma and rho must be positive");
}

double MaternParams::kappa() const { return std::sqrt(8.0 * nu()) / rho_; }

// nu = 1, d = 2: sigma^2 = 1 / (4 pi kappa^2 tau^2)
double MaternParams::tau_from_sigma(double sigma, double kappa) {
  return 1.0 / (sigma * kappa * std::sqrt(4.0 * std::numbers::pi));
}

double MaternParams::sigma_from_tau(double tau, double kappa) {
  return 1.0 / (tau * kappa * std::sqrt(4.0 * std::numbers::pi));
}

double bessel_k1(double x) {
  if (!std::isfinite(x) && !(x == std::numeric_limits<double>::infinity()))
    throw std::invalid_argument("bessel_k1: non-finite argument");
  if (!(x > 0.0)) throw std::invalid_argument("bessel_k1: argument must be positive");
  if (x == std::numeric_limits<double>::infinity()) return 0.0;
  constexpr double eps = 1e-16;
  if (x <= 2.0) {
    // power series: K1 = 1/x + ln(x/2) I1 - x/4 sum (psi(k+1)+psi(k+2)) t^k/(k!(k+1)!)
    const double t = 0.25 * x * x;
    double term = 1.0;  // t^k / (k! (k+1)!)
    double psi1 = -std::numbers::egamma;  // psi(k+1)
    double psi2 = 1.0 - std::numbers::egamma;  // psi(k+2)
    double sum_i = 0.0, sum_k = 0.0;
    for (int k = 0; k < 60; ++k) {
      sum_i += term;
      sum_k += (psi1 + psi2) * term;
      psi1 += 1.0 / (k + 1);
      psi2 += 1.0 / (k + 2);
      term *= t / ((k + 1.0) * (k + 2.0));
      if (term < eps * sum_i) break;
    }
    const double i1 = 0.5 * x * sum_i;
    return 1.0 / x + std::log(0.5 * x) * i1 - 0.25 * x * sum_k;
  }
  // Steed's continued fraction (Temme) for K0 and K1 at order mu = 0
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d, delh = d;
  double q1 = 0.0, q2 = 1.0;
  const double a1 = 0.25;
  double q = a1, c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 1; i < 100000; ++i) {
    a -= 2 * i;
    c = -a * c / (i + 1.0);
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < eps) break;
  }
  h *= a1;
  const double k0 = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
  return k0 * (x + 0.5 - h) / x;
}

double matern_cov(double distance, const MaternParams& params) {
  if (!std::isfinite(distance)) throw std::invalid_argument("matern_cov: non-finite distance");
  if (distance < 0.0) throw std::invalid_argument("matern_cov: negative distance");
  const double var = params.sigma() * params.sigma();
  if (distance == 0.0) return var;
  const double x = params.kappa() * distance;
  // sigma^2 / (Gamma(1) 2^0) * x K1(x)
  return var * x * bessel_k1(x);
}

SpdeOperator::SpdeOperator(const GridSpec& grid) : grid_(grid) {
  grid_.validate();
  if (grid_.nx < 4 || grid_.ny < 4)
    throw std::invalid_argument("SpdeOperator: grid needs >= 4 nodes per dimension");
  const auto n = static_cast<Eigen::Index>(grid_.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5 * n);
  for (int j = 0; j < grid_.ny; ++j) {
    for (int i = 0; i < grid_.nx; ++i) {
      const auto k = static_cast<Eigen::Index>(grid_.index(i, j));
      int deg = 0;
      auto link = [&](int ii, int jj) {
        if (ii < 0 || jj < 0 || ii >= grid_.nx || jj >= grid_.ny) return;
        trip.emplace_back(k, static_cast<Eigen::Index>(grid_.index(ii, jj)), -1.0);
        ++deg;
      };
      link(i - 1, j);
      link(i + 1, j);
      link(i, j - 1);
      link(i, j + 1);
      trip.emplace_back(k, k, static_cast<double>(deg));
    }
  }
  SparseMatrix g(n, n);
  g.setFromTriplets(trip.begin(), trip.end());
  SparseMatrix g2 = (g * g).pruned(0.0);
  pattern_ = g2;
  pattern_.makeCompressed();
  const auto nnz = static_cast<std::size_t>(pattern_.nonZeros());
  mass_.assign(nnz, 0.0);
  stiff_.assign(nnz, 0.0);
  stiff2_.assign(nnz, 0.0);
  std::size_t p = 0;
  for (Eigen::Index col = 0; col < pattern_.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(pattern_, col); it; ++it, ++p) {
      const auto row = it.row();
      if (row == col) mass_[p] = grid_.cell * grid_.cell;
      stiff_[p] = g.coeff(row, col);
      stiff2_[p] = it.value() / (grid_.cell * grid_.cell);
    }
  }
}

void SpdeOperator::precision_values(double kappa, double tau, SparseMatrix& q) const {
  const double k2 = kappa * kappa;
  const double t2 = tau * tau;
  double* v = q.valuePtr();
  for (std::size_t p = 0; p < mass_.size(); ++p)
    v[p] = t2 * (k2 * k2 * mass_[p] + 2.0 * k2 * stiff_[p] + stiff2_[p]);
}

SparseMatrix SpdeOperator::precision(double kappa, double tau) const {
  SparseMatrix q = pattern_;
  precision_values(kappa, tau, q);
  return q;
}

GmrfPrecision build_precision(const GridSpec& grid, const MaternParams& params) {
  SpdeOperator op(grid);
  GmrfPrecision out{grid, op.precision(params.kappa(), params.tau()), params};
  Eigen::SimplicialLLT<SparseMatrix> llt(out.q);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("build_precision: precision is not positive definite");
  return out;
}

GmrfSampler::GmrfSampler(const SparseMatrix& q) : n_(static_cast<std::size_t>(q.rows())) {
  llt_.compute(q);
  if (llt_.info() != Eigen::Success)
    throw std::runtime_error("GmrfSampler: Cholesky factorization failed");
}

Vector GmrfSampler::transform(const Vector& z) const {
  Vector y = llt_.matrixU().solve(z);
  return llt_.permutationPinv() * y;
}

Vector GmrfSampler::draw(Rng& rng) const {
  std::normal_distribution<double> nd;
  Vector z(static_cast<Eigen::Index>(n_));
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = nd(rng);
  return transform(z);
}

double GmrfSampler::log_det() const {
  double s = 0.0;
  const Vector diag = llt_.matrixL().nestedExpression().diagonal();
  for (Eigen::Index k = 0; k < diag.size(); ++k) s += std::log(diag[k]);
  return 2.0 * s;
}

std::vector<double> sample_field(const GmrfPrecision& precision, std::uint64_t seed) {
  GmrfSampler sampler(precision.q);
  Rng rng(seed);
  const Vector x = sampler.draw(rng);
  return {x.data(), x.data() + x.size()};
}

int extension_cells(const GridSpec& grid, double rho, double factor) {
  if (factor < 0.0) throw std::invalid_argument("extension_cells: negative factor");
  return static_cast<int>(std::ceil(factor * rho / grid.cell - 1e-9));
}

RasterGrid simulate_matern_field(const GridSpec& grid, const MaternParams& params,
                                 std::uint64_t seed, double extension_factor) {
  grid.validate();
  const int ext = extension_cells(grid, params.rho(), extension_factor);
  const GridSpec big = grid.extended(ext);
  const auto prec = build_precision(big, params);
  const auto full = sample_field(prec, seed);
  RasterGrid out(grid);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) out(i, j) = full[big.index(i + ext, j + ext)];
  return out;
}

void PcPriorSpec::validate() const {
  if (!(rho0 > 0.0) || !(sigma0 > 0.0))
    throw std::invalid_argument("PcPriorSpec: rho0 and sigma0 must be positive");
  if (!(alpha_rho > 0.0 && alpha_rho < 1.0) || !(alpha_sigma > 0.0 && alpha_sigma < 1.0))
    throw std::invalid_argument("PcPriorSpec: tail probabilities must lie in (0,1)");
}

// d = 2 throughout: lambda_rho = -log(alpha) rho0^(d/2)
double PcPriorSpec::lambda_rho() const { return -std::log(alpha_rho) * rho0; }
double PcPriorSpec::lambda_sigma() const { return -std::log(alpha_sigma) / sigma0; }
double PcPriorSpec::median_rho() const { return lambda_rho() / std::numbers::ln2; }
double PcPriorSpec::median_sigma() const { return std::numbers::ln2 / lambda_sigma(); }
double PcPriorSpec::rho_cdf(double r) const {
  if (r <= 0.0) return 0.0;
  return std::exp(-lambda_rho() / r);
}

double pc_prior_logdensity(double rho, double sigma, const PcPriorSpec& spec) {
  spec.validate();
  if (!std::isfinite(rho) || !std::isfinite(sigma))
    throw std::invalid_argument("pc_prior_logdensity: non-finite input");
  if (!(rho > 0.0) || !(sigma > 0.0))
    throw std::invalid_argument("pc_prior_logdensity: rho and sigma must be positive");
  const double lr = spec.lambda_rho();
  const double ls = spec.lambda_sigma();
  // pi(rho) = (d/2) lr rho^(-d/2-1) exp(-lr rho^(-d/2)), d = 2
  const double log_rho = std::log(lr) - 2.0 * std::log(rho) - lr / rho;
  const double log_sigma = std::log(ls) - ls * sigma;
  return log_rho + log_sigma;
}

}  // namespace vse
