#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "vse/grid.hpp"
#include "vse/rng.hpp"

namespace vse {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Matern hyperparameters with smoothness fixed at nu = 1. sigma is the
/// marginal standard deviation, rho the practical range (distance at which
/// correlation is about 0.14).
class MaternParams {
 public:
  MaternParams(double sigma, double rho);

  double sigma() const { return sigma_; }
  double rho() const { return rho_; }
  static constexpr double nu() { return 1.0; }
  double kappa() const;
  /// SPDE scale tau giving marginal variance sigma^2 on R^2.
  double tau() const { return tau_from_sigma(sigma_, kappa()); }

  static double tau_from_sigma(double sigma, double kappa);
  static double sigma_from_tau(double tau, double kappa);

 private:
  double sigma_;
  double rho_;
};

/// Modified Bessel function of the second kind, order one.
double bessel_k1(double x);

/// Matern covariance at lag `distance`.
double matern_cov(double distance, const MaternParams& params);

/// Precompiled SPDE operator pieces on a grid, sharing one sparsity
/// pattern so that Q(kappa, tau) = tau^2 (kappa^4 C + 2 kappa^2 G + G C^-1 G)
/// can be reassembled by value without touching the structure.
class SpdeOperator {
 public:
  explicit SpdeOperator(const GridSpec& grid);

  const GridSpec& grid() const { return grid_; }
  /// Precision with a fixed pattern (identical for every kappa, tau).
  SparseMatrix precision(double kappa, double tau) const;
  void precision_values(double kappa, double tau, SparseMatrix& q) const;

 private:
  GridSpec grid_;
  SparseMatrix pattern_;
  std::vector<double> mass_, stiff_, stiff2_;
};

/// Discretized alpha = 2 Matern GMRF precision on a grid.
struct GmrfPrecision {
  GridSpec grid;
  SparseMatrix q;
  MaternParams params;
};

/// Builds the SPDE precision. Requires >= 4 nodes per dimension; throws if
/// the result is not positive definite.
GmrfPrecision build_precision(const GridSpec& grid, const MaternParams& params);

/// Holds the Cholesky factor of a GMRF precision for repeated draws.
class GmrfSampler {
 public:
  explicit GmrfSampler(const SparseMatrix& q);
  /// x = L^-T z with z standard normal (permutation accounted for).
  Vector draw(Rng& rng) const;
  /// x = L^-T z for a given z.
  Vector transform(const Vector& z) const;
  double log_det() const;
  std::size_t dim() const { return n_; }

 private:
  std::size_t n_;
  Eigen::SimplicialLLT<SparseMatrix> llt_;
};

/// One draw of the zero-mean field on the precision's grid.
std::vector<double> sample_field(const GmrfPrecision& precision,
                                 std::uint64_t seed);

/// Number of padding cells used for a domain grid: ceil(factor * rho / cell).
int extension_cells(const GridSpec& grid, double rho, double factor);

/// Draws a Matern field on `grid` by simulating on a grid padded by
/// `extension_factor * rho` on every side and cropping back.
RasterGrid simulate_matern_field(const GridSpec& grid,
                                 const MaternParams& params,
                                 std::uint64_t seed,
                                 double extension_factor = 1.5);

/// Penalized-complexity prior through P(rho < rho0) = alpha_rho and
/// P(sigma > sigma0) = alpha_sigma, spatial dimension 2.
struct PcPriorSpec {
  double rho0 = 15.0;
  double alpha_rho = 0.05;
  double sigma0 = 1.0;
  double alpha_sigma = 0.05;

  void validate() const;
  double lambda_rho() const;
  double lambda_sigma() const;
  double median_rho() const;
  double median_sigma() const;
  /// P(rho < r) = exp(-lambda_rho / r).
  double rho_cdf(double r) const;
};

double pc_prior_logdensity(double rho, double sigma, const PcPriorSpec& spec);

}  // namespace vse
