#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "vse/assess.hpp"
#include "vse/geo.hpp"
#include "vse/grf.hpp"
#include "vse/grid.hpp"
#include "vse/pointprocess.hpp"
#include "vse/rng.hpp"

namespace vse {

struct NormalPrior {
  double mean = 0.0;
  double precision = 1.0;
};

struct ModelSpec {
  std::vector<std::string> covariate_names;
  bool use_vse = false;
  /// Without the field the model is the covariate-only Poisson GLM.
  bool use_field = true;
  PcPriorSpec pc_prior;
  double beta_precision = 0.01;  // prior mean 0
  NormalPrior theta_prior{1.0, 0.05};
  /// VSE only: hold zeta at this value instead of integrating over theta.
  /// Zero makes q identically 1.
  std::optional<double> fixed_zeta;

  void validate() const;
  /// Internal hyperparameter coordinates: log rho, log sigma (with the
  /// field) and theta = log zeta (VSE with free zeta).
  std::size_t hyper_dim() const;
  std::vector<std::string> hyper_names() const;
  bool free_zeta() const { return use_vse && !fixed_zeta; }
};

struct HyperValues {
  double rho = 1.0;
  double sigma = 1.0;
  double zeta = 0.0;
};

struct MeshConfig {
  int cells = 20;           // fit-grid cells along the longer domain side
  double extension = -1.0;  // padding distance; negative: 1.5 * pc_prior.rho0
  /// Quadrature cells are covariate cells (or fit cells without
  /// covariates), split until at least this many span a fit cell side.
  int quadrature_per_cell = 2;
};

using RowSparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Everything the posterior depends on besides the hyperparameters: the
/// latent grid, integration nodes, design rows and distance offsets.
/// Latent vector layout is u = [omega (field nodes); beta (intercept first)].
class LatentModel {
 public:
  LatentModel(const PointPattern& pattern, std::span<const RasterGrid> covariates,
              const RoadNetwork* roads, ModelSpec spec, const MeshConfig& mesh = {},
              const RasterGrid* distance = nullptr);

  const ModelSpec& spec() const { return spec_; }
  const PointPattern& pattern() const { return pattern_; }
  const std::vector<RasterGrid>& covariates() const { return covariates_; }
  const GridSpec& fit_grid() const { return fit_grid_; }
  const GridSpec& latent_grid() const { return latent_grid_; }
  const SpdeOperator* spde() const { return spde_.get(); }

  std::size_t field_dim() const { return n_; }
  std::size_t beta_dim() const { return p_; }
  std::size_t dim() const { return n_ + p_; }
  std::size_t node_count() const { return weights_.size(); }
  std::size_t point_count() const { return pattern_.points.size(); }

  const GridSpec& quadrature_grid() const { return quad_grid_; }
  const std::vector<double>& node_weights() const { return weights_; }
  /// Field interpolation at integration nodes (nodes x field_dim).
  const RowSparseMatrix& node_projector() const { return an_; }
  /// Fit cell holding each integration node, numbered 0..group_count()-1.
  const std::vector<std::size_t>& node_groups() const { return node_group_; }
  std::size_t group_count() const { return group_count_; }
  const Eigen::MatrixXd& node_design() const { return xn_; }
  const Eigen::MatrixXd& point_design() const { return xp_; }
  const SparseMatrix& point_projector() const { return ap_; }
  const std::vector<double>& point_distances() const { return point_dist_; }

  HyperValues hyper_values(const Vector& h) const;
  /// PC-prior medians and the theta prior mean.
  Vector hyper_start() const;
  /// Rough prior-scale spread per coordinate, used by the fallback grid.
  Vector hyper_prior_scale() const;
  /// Log prior density of the internal coordinates (Jacobian included).
  double log_hyper_prior(const Vector& h) const;

  /// log q averaged over each quadrature cell, and log q at the points.
  Vector node_offset(double zeta) const;
  Vector point_offset(double zeta) const;

  /// Linear predictor at integration nodes and at points.
  void linear_predictor(const Vector& u, const Vector& node_off, const Vector& point_off,
                        Vector& eta_nodes, Vector& eta_points) const;

  /// omega = 0 and beta from the covariate-only Poisson GLM.
  Vector initial_latent(double zeta) const;

  /// Covariate and interpolated-field predictor on a raster congruent
  /// with the covariates (no offset): rows are cells.
  Eigen::MatrixXd target_design(const GridSpec& target) const;
  SparseMatrix target_projector(const GridSpec& target) const;

  // Sufficient statistics of the point term.
  const Vector& point_field_sum() const { return ap_sum_; }
  const Vector& point_beta_sum() const { return xp_sum_; }

 private:
  void field_stencil(const Point& s, int row, std::vector<Eigen::Triplet<double>>& trip) const;

  ModelSpec spec_;
  PointPattern pattern_;
  std::vector<RasterGrid> covariates_;
  GridSpec fit_grid_;
  GridSpec latent_grid_;
  std::unique_ptr<SpdeOperator> spde_;
  std::size_t n_ = 0;
  std::size_t p_ = 0;
  int shift_ = 0;  // fit-grid offset inside the latent grid

  GridSpec quad_grid_;
  std::vector<double> weights_;
  RowSparseMatrix an_;
  std::vector<std::size_t> node_group_;
  std::size_t group_count_ = 0;
  Eigen::MatrixXd xn_, xp_;
  SparseMatrix ap_;
  Vector ap_sum_, xp_sum_;

  std::vector<double> point_dist_;
  std::vector<std::size_t> node_dist_ptr_;
  std::vector<double> node_dist_;
};

struct NewtonOptions {
  int max_iterations = 50;
  double gradient_tol = 1e-6;
  int max_halvings = 30;
};

struct LaplaceResult {
  Vector mode;
  double objective = 0.0;      // penalized log-likelihood at the mode
  double log_marginal = 0.0;   // Laplace log-marginal including hyper priors
  double logdet_q = 0.0;
  double logdet_h = 0.0;
  int iterations = 0;
  SparseMatrix precision;      // negated Hessian at the mode
  Eigen::MatrixXd beta_cov;    // beta block of the inverse
};

/// Newton/Laplace machinery for one model at a settable hyper node. Holds
/// symbolic factorizations so repeated solves reuse them. Not thread safe;
/// use one per worker.
class LaplaceSolver {
 public:
  explicit LaplaceSolver(const LatentModel& model, NewtonOptions options = {});

  void set_hyper(const Vector& h);
  const HyperValues& hyper() const { return hv_; }
  const SparseMatrix& field_precision() const { return q_; }
  const Vector& node_offset() const { return off_n_; }
  const Vector& point_offset() const { return off_p_; }
  double log_det_q() const { return logdet_q_; }
  double log_hyper_prior() const { return log_prior_; }

  /// Penalized objective sum eta(points) - sum a exp(eta(nodes))
  /// - omega'Q omega/2 - tau_b beta'beta/2, and optionally its gradient.
  double objective(const Vector& u, Vector* grad = nullptr) const;
  /// Negated Hessian of the objective (constant pattern).
  const SparseMatrix& hessian(const Vector& u);

  /// Mode and Laplace log-marginal; throws on divergence or a non-SPD
  /// Hessian. `trace` receives one objective value per accepted step.
  LaplaceResult solve(const Vector& init, std::vector<double>* trace = nullptr);
  /// Latent mean corrected for the skewness of the Poisson likelihood
  /// (first order), at the current hyperparameters.
  Vector corrected_mean(const LaplaceResult& r);

 private:
  void build_pattern();

  const LatentModel& model_;
  NewtonOptions opt_;
  HyperValues hv_;
  Vector h_;
  bool hyper_set_ = false;
  SparseMatrix q_;
  double logdet_q_ = 0.0;
  double log_prior_ = 0.0;
  Vector off_n_, off_p_;
  double off_p_sum_ = 0.0;

  SparseMatrix h_mat_;
  std::vector<Eigen::Index> q_pos_, ff_pos_, fb_pos_, bb_pos_;  // value slots in the Hessian
  Eigen::SimplicialLLT<SparseMatrix> llt_h_;
  Eigen::SimplicialLLT<SparseMatrix> llt_q_;
};

struct HyperSearchConfig {
  int max_evaluations = 200;  // Nelder-Mead budget
  int points_per_dim = 5;
  double span_sd = 2.5;
  double fd_step = 0.05;
  double initial_step = 0.5;
  double ftol = 1e-6;
  double xtol = 1e-3;
};

/// Regular grid in standardized coordinates z: h = mode + axes * z.
struct HyperGrid {
  Vector mode;
  double mode_value = 0.0;
  Eigen::MatrixXd axes;
  double z_step = 0.0;
  std::vector<Vector> z;
  std::vector<Vector> points;
  int evaluations = 0;
  bool fallback = false;
  std::vector<std::string> diagnostics;
};

/// Derivative-free minimizer; returns the best point found.
struct NelderMeadResult {
  Vector x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};
NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& start,
                             double step, int max_evaluations, double ftol, double xtol);

/// Locates the mode of `log_marginal` and lays the integration grid along
/// the principal axes of a finite-difference Hessian there. Falls back to
/// a grid centered at `start` with spread `fallback_scale` when the search
/// fails.
HyperGrid hyper_grid(const std::function<double(const Vector&)>& log_marginal, const Vector& start,
                     const Vector& fallback_scale, const HyperSearchConfig& config = {});

/// exp(l - max l) normalized.
std::vector<double> normalize_log_weights(std::span<const double> log_values);

struct HyperNode {
  Vector h;               // internal coordinates
  HyperValues values;
  double laplace_log_marginal = 0.0;
  double weight = 0.0;
};

struct NodeApproximation {
  Vector mode;
  Vector mean;  // skew-corrected latent mean; draws are centered here
  SparseMatrix precision;
  Eigen::MatrixXd beta_cov;
};

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

struct FitOptions {
  MeshConfig mesh;
  HyperSearchConfig search;
  NewtonOptions newton;
  int threads = 1;
  std::uint64_t seed = 1;
  int summary_draws = 20000;
  int assess_samples = 1000;  // 0 skips DIC/WAIC/LPML
  /// Shift each node's Gaussian from the mode to the skew-corrected mean.
  bool mean_correction = true;
  const RasterGrid* distance = nullptr;
};

struct FitResult {
  ModelSpec spec;
  std::shared_ptr<const LatentModel> model;
  HyperGrid grid;
  std::vector<HyperNode> nodes;
  std::vector<NodeApproximation> approx;
  std::vector<ParameterSummary> summaries;
  std::optional<ModelScores> scores;
  std::vector<std::string> diagnostics;
  std::uint64_t seed = 1;

  std::vector<std::string> beta_names() const;
  const ParameterSummary& summary(const std::string& name) const;
};

FitResult fit(const PointPattern& pattern, std::span<const RasterGrid> covariates,
              const RoadNetwork* roads, const ModelSpec& spec, const FitOptions& options = {});
FitResult fit(std::shared_ptr<const LatentModel> model, const FitOptions& options = {});

/// Recomputes the node Gaussians and summaries from stored nodes and modes
/// (used when loading a saved fit).
FitResult rebuild_fit(std::shared_ptr<const LatentModel> model, HyperGrid grid,
                      std::vector<HyperNode> nodes, std::vector<Vector> modes,
                      const FitOptions& options = {});

/// Beta marginal: Gaussian mixture over nodes.
ParameterSummary mixture_summary(const std::string& name, std::span<const double> weights,
                                 std::span<const double> means, std::span<const double> sds);
/// Summary from draws (sample mean, sd, type-7 quantiles).
ParameterSummary sample_summary(const std::string& name, std::vector<double> draws);

/// Draws from the fitted mixture: a node by weight, the latent vector
/// from its Gaussian, and hyperparameters jittered uniformly within the
/// node's grid cell.
class PosteriorSampler {
 public:
  explicit PosteriorSampler(const FitResult& fit);

  struct Draw {
    std::size_t node = 0;
    Vector u;
    Vector h;
    HyperValues hyper;
  };
  Draw draw(Rng& rng) const;
  std::size_t pick_node(Rng& rng) const;
  Vector jitter_hyper(std::size_t node, Rng& rng) const;
  Vector draw_latent(std::size_t node, Rng& rng) const;

 private:
  const FitResult& fit_;
  std::vector<double> cumulative_;
  mutable std::vector<std::unique_ptr<Eigen::SimplicialLLT<SparseMatrix>>> llt_;
};

/// Per-parameter posterior draws (beta names then hyper names, as
/// rho/sigma/zeta) from the fitted mixture.
std::vector<std::vector<double>> posterior_parameter_draws(const FitResult& fit, std::size_t draws,
                                                           std::uint64_t seed,
                                                           std::vector<std::string>* names);

/// Log pointwise likelihood rows (integration nodes, then points) over S
/// posterior draws.
PointwiseLikelihoodTable lgcp_pointwise_table(const FitResult& fit, std::size_t samples,
                                              std::uint64_t seed);

struct IntensityPrediction {
  RasterGrid median;  // median of log lambda per cell
  RasterGrid sd;      // sd of log lambda per cell
};

/// Log-intensity lambda = exp(x'beta + omega), without q.
IntensityPrediction predict_intensity(const FitResult& fit, const GridSpec& target,
                                      std::size_t samples = 1000, std::uint64_t seed = 1);

struct McmcConfig {
  int chains = 4;
  int iterations = 4000;  // per chain, including burn-in
  int burn_in = 2000;
  int thin = 1;
  int hyper_every = 5;
  std::uint64_t seed = 1;
  int threads = 1;
  std::size_t max_latent_nodes = 1000;
};

struct McmcChain {
  Eigen::MatrixXd beta;   // samples x p
  Eigen::MatrixXd hyper;  // samples x hyper_dim (internal coordinates)
  double latent_acceptance = 0.0;
  double hyper_acceptance = 0.0;
  double step_size = 0.0;
};

struct McmcResult {
  std::vector<McmcChain> chains;
  std::vector<std::string> beta_names;
  std::vector<std::string> hyper_names;
  std::vector<std::string> warnings;

  Vector beta_mean() const;
  Vector beta_sd() const;
  Vector beta_rhat() const;
};

McmcResult mcmc_fit(std::shared_ptr<const LatentModel> model, const McmcConfig& config = {});
McmcResult mcmc_fit(const PointPattern& pattern, std::span<const RasterGrid> covariates,
                    const RoadNetwork* roads, const ModelSpec& spec, const McmcConfig& config = {},
                    const MeshConfig& mesh = {});

/// Potential scale reduction over chains of one scalar.
double gelman_rubin(const std::vector<Vector>& chains);

}  // namespace vse
