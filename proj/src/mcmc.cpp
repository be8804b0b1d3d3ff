#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "parallel.hpp"
#include "vse/inference.hpp"

namespace vse {

namespace {

constexpr double kLatentTarget = 0.6;
constexpr double kHyperTarget = 0.3;

double adapt_rate(int t) { return 1.0 / std::pow(static_cast<double>(t) + 10.0, 0.6); }

// Centered latent block updated by MALA whose metric is the curvature of
// the log posterior at a fixed reference latent vector, for the current
// hyperparameters; hyperparameters by random-walk Metropolis given the
// latent vector.
class Chain {
 public:
  Chain(const LatentModel& model, const McmcConfig& cfg, const Vector& u_ref, const Vector& h0, const Vector& u0,
        std::uint64_t seed)
      : model_(model), cfg_(cfg), u_ref_(u_ref), rng_(seed), cur_(std::make_unique<LaplaceSolver>(model)),
        prop_(std::make_unique<LaplaceSolver>(model)) {
    h_ = h0;
    u_ = u0;
    cur_->set_hyper(h_);
    metric_.analyzePattern(cur_->hessian(u_ref_));
    refresh_metric();
    f_ = cur_->objective(u_, &g_);
    if (!std::isfinite(f_)) throw std::runtime_error("mcmc: log posterior not finite at the start");
    const auto d = h_.size();
    hyper_chol_ = Eigen::MatrixXd::Identity(d, d) * 0.1;
  }

  McmcChain run() {
    McmcChain out;
    const int burn = cfg_.burn_in;
    const auto d = h_.size();
    std::vector<Vector> hyper_hist;
    int lat_n = 0, hyp_acc = 0, hyp_n = 0, hyp_t = 0;
    std::vector<Vector> beta_keep, hyper_keep;
    for (int it = 0; it < cfg_.iterations; ++it) {
      const bool burning = it < burn;
      const double a = latent_step();
      if (burning) {
        log_eps_ += adapt_rate(it) * (a - kLatentTarget);
      } else {
        lat_sum_ += a;
        ++lat_n;
      }
      if (d > 0 && it % cfg_.hyper_every == 0) {
        const bool acc = hyper_step();
        if (burning) {
          log_hscale_ += adapt_rate(hyp_t++) * ((acc ? 1.0 : 0.0) - kHyperTarget);
          if (it >= burn / 4) hyper_hist.push_back(h_);
        } else {
          hyp_acc += acc ? 1 : 0;
          ++hyp_n;
        }
      }
      // one covariance adaptation halfway through burn-in
      if (d > 0 && it == burn / 2 && hyper_hist.size() > 20 * static_cast<std::size_t>(d))
        adapt_hyper_covariance(hyper_hist);
      if (!burning && (it - burn) % cfg_.thin == 0) {
        beta_keep.push_back(u_.tail(static_cast<Eigen::Index>(model_.beta_dim())));
        hyper_keep.push_back(h_);
      }
    }
    const auto p = static_cast<Eigen::Index>(model_.beta_dim());
    out.beta.resize(static_cast<Eigen::Index>(beta_keep.size()), p);
    out.hyper.resize(static_cast<Eigen::Index>(hyper_keep.size()), d);
    for (std::size_t s = 0; s < beta_keep.size(); ++s) {
      out.beta.row(static_cast<Eigen::Index>(s)) = beta_keep[s].transpose();
      out.hyper.row(static_cast<Eigen::Index>(s)) = hyper_keep[s].transpose();
    }
    out.latent_acceptance = lat_n ? lat_sum_ / lat_n : 0.0;
    out.hyper_acceptance = hyp_n ? static_cast<double>(hyp_acc) / hyp_n : 0.0;
    out.step_size = std::exp(log_eps_);
    return out;
  }

 private:
  void refresh_metric() {
    g_mat_ = cur_->hessian(u_ref_);
    metric_.factorize(g_mat_);
    if (metric_.info() != Eigen::Success) throw std::runtime_error("mcmc: metric is not positive definite");
  }

  Vector proposal_mean(const Vector& u, const Vector& g, double eps) const {
    return u + 0.5 * eps * eps * Vector(metric_.solve(g));
  }

  double log_kernel(const Vector& to, const Vector& mean, double eps) const {
    const Vector d = to - mean;
    return -d.dot(g_mat_ * d) / (2.0 * eps * eps);
  }

  // Returns the acceptance probability of the proposal.
  double latent_step() {
    const double eps = std::exp(log_eps_);
    std::normal_distribution<double> nd;
    Vector xi(u_.size());
    for (Eigen::Index k = 0; k < xi.size(); ++k) xi[k] = nd(rng_);
    const Vector noise = metric_.permutationPinv() * Vector(metric_.matrixU().solve(xi));
    const Vector mean_fwd = proposal_mean(u_, g_, eps);
    const Vector cand = mean_fwd + eps * noise;
    Vector gc;
    const double fc = cur_->objective(cand, &gc);
    double log_a = -std::numeric_limits<double>::infinity();
    if (std::isfinite(fc)) {
      const Vector mean_bwd = proposal_mean(cand, gc, eps);
      log_a = fc - f_ + log_kernel(u_, mean_bwd, eps) - log_kernel(cand, mean_fwd, eps);
    }
    const double a = std::isfinite(log_a) ? std::min(1.0, std::exp(log_a)) : 0.0;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (unif(rng_) < a) {
      u_ = cand;
      f_ = fc;
      g_.swap(gc);
    }
    return a;
  }

  double hyper_log_target(const LaplaceSolver& s, double f) const {
    return f + 0.5 * s.log_det_q() + s.log_hyper_prior();
  }

  bool hyper_step() {
    std::normal_distribution<double> nd;
    Vector z(h_.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = nd(rng_);
    const Vector cand = h_ + std::exp(log_hscale_) * (hyper_chol_ * z);
    if (cand.cwiseAbs().maxCoeff() > 30.0) return false;
    double lt_new = -std::numeric_limits<double>::infinity();
    Vector g_new;
    double f_new = 0.0;
    try {
      prop_->set_hyper(cand);
      f_new = prop_->objective(u_, &g_new);
      lt_new = hyper_log_target(*prop_, f_new);
    } catch (const std::exception&) {
      return false;
    }
    const double lt_old = hyper_log_target(*cur_, f_);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (std::isfinite(lt_new) && std::log(unif(rng_)) < lt_new - lt_old) {
      std::swap(cur_, prop_);
      h_ = cand;
      f_ = f_new;
      g_.swap(g_new);
      refresh_metric();
      return true;
    }
    return false;
  }

  void adapt_hyper_covariance(const std::vector<Vector>& hist) {
    const auto d = h_.size();
    Vector mean = Vector::Zero(d);
    for (const auto& h : hist) mean += h;
    mean /= static_cast<double>(hist.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& h : hist) cov += (h - mean) * (h - mean).transpose();
    cov /= static_cast<double>(hist.size() - 1);
    cov *= 2.38 * 2.38 / static_cast<double>(d);
    cov.diagonal().array() += 1e-6;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) {
      hyper_chol_ = llt.matrixL();
      log_hscale_ = 0.0;
    }
  }

  const LatentModel& model_;
  const McmcConfig& cfg_;
  Vector u_ref_;
  Rng rng_;
  std::unique_ptr<LaplaceSolver> cur_, prop_;
  Eigen::SimplicialLLT<SparseMatrix> metric_;
  SparseMatrix g_mat_;
  Vector h_, u_, g_;
  double f_ = 0.0;
  double log_eps_ = std::log(0.5);
  double log_hscale_ = 0.0;
  double lat_sum_ = 0.0;
  Eigen::MatrixXd hyper_chol_;
};

}  // namespace

double gelman_rubin(const std::vector<Vector>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("gelman_rubin: need at least two chains");
  const auto n = chains.front().size();
  if (n < 2) throw std::invalid_argument("gelman_rubin: chains too short");
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("gelman_rubin: chains differ in length");
  const double m = static_cast<double>(chains.size());
  const double nn = static_cast<double>(n);
  Vector means(static_cast<Eigen::Index>(chains.size()));
  double w = 0.0;
  for (std::size_t j = 0; j < chains.size(); ++j) {
    means[static_cast<Eigen::Index>(j)] = chains[j].mean();
    w += (chains[j].array() - chains[j].mean()).square().sum() / (nn - 1.0);
  }
  w /= m;
  const double b = nn * (means.array() - means.mean()).square().sum() / (m - 1.0);
  const double var_plus = (nn - 1.0) / nn * w + b / nn;
  return w > 0.0 ? std::sqrt(var_plus / w) : std::numeric_limits<double>::quiet_NaN();
}

Vector McmcResult::beta_mean() const {
  Vector s = Vector::Zero(chains.front().beta.cols());
  Eigen::Index count = 0;
  for (const auto& c : chains) {
    s += c.beta.colwise().sum().transpose();
    count += c.beta.rows();
  }
  return s / static_cast<double>(count);
}

Vector McmcResult::beta_sd() const {
  const Vector m = beta_mean();
  Vector ss = Vector::Zero(m.size());
  Eigen::Index count = 0;
  for (const auto& c : chains) {
    ss += (c.beta.rowwise() - m.transpose()).array().square().colwise().sum().matrix().transpose();
    count += c.beta.rows();
  }
  return (ss / static_cast<double>(count - 1)).cwiseSqrt();
}

Vector McmcResult::beta_rhat() const {
  Vector r(chains.front().beta.cols());
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    std::vector<Vector> cols;
    for (const auto& c : chains) cols.push_back(c.beta.col(k));
    r[k] = gelman_rubin(cols);
  }
  return r;
}

McmcResult mcmc_fit(std::shared_ptr<const LatentModel> model, const McmcConfig& cfg) {
  if (!model) throw std::invalid_argument("mcmc_fit: no model");
  if (cfg.chains < 1 || cfg.iterations <= cfg.burn_in || cfg.burn_in < 0 || cfg.thin < 1 || cfg.hyper_every < 1)
    throw std::invalid_argument("mcmc_fit: invalid chain configuration");
  if (model->field_dim() > cfg.max_latent_nodes) {
    std::ostringstream msg;
    msg << "mcmc_fit: " << model->field_dim() << " latent nodes exceed the limit of " << cfg.max_latent_nodes;
    throw std::invalid_argument(msg.str());
  }
  // Reference latent vector for the metric and chain starts: the
  // conditional mode at the prior-centered hyperparameters.
  const Vector h0 = model->hyper_start();
  LaplaceSolver ref(*model);
  ref.set_hyper(h0);
  const LaplaceResult lr = ref.solve(model->initial_latent(ref.hyper().zeta));
  const Eigen::SimplicialLLT<SparseMatrix> start_llt(lr.precision);

  McmcResult res;
  res.beta_names.clear();
  for (std::size_t k = 0; k < model->beta_dim(); ++k) res.beta_names.push_back("beta" + std::to_string(k));
  res.hyper_names = model->spec().hyper_names();
  res.chains.resize(static_cast<std::size_t>(cfg.chains));
  detail::parallel_for(res.chains.size(), cfg.threads, [&](std::size_t c, std::size_t) {
    Rng init(derive_seed(cfg.seed, {0x696e6974, c}));
    std::normal_distribution<double> nd;
    // dispersed starts: latent drawn from the reference Gaussian, inflated
    Vector z(lr.mode.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = nd(init);
    const Vector u0 = lr.mode + 1.5 * (start_llt.permutationPinv() * Vector(start_llt.matrixU().solve(z)));
    Vector h = h0;
    for (Eigen::Index k = 0; k < h.size(); ++k) h[k] += 0.3 * nd(init);
    Chain chain(*model, cfg, lr.mode, h, u0, derive_seed(cfg.seed, {0x6d636d63, c}));
    res.chains[c] = chain.run();
  });
  for (std::size_t c = 0; c < res.chains.size(); ++c) {
    const auto& ch = res.chains[c];
    if (ch.latent_acceptance < 0.1 || ch.latent_acceptance > 0.9) {
      std::ostringstream msg;
      msg << "chain " << c << ": latent acceptance " << ch.latent_acceptance << " outside [0.1, 0.9]";
      res.warnings.push_back(msg.str());
    }
    if (model->spec().hyper_dim() > 0 && (ch.hyper_acceptance < 0.1 || ch.hyper_acceptance > 0.9)) {
      std::ostringstream msg;
      msg << "chain " << c << ": hyperparameter acceptance " << ch.hyper_acceptance << " outside [0.1, 0.9]";
      res.warnings.push_back(msg.str());
    }
  }
  return res;
}

McmcResult mcmc_fit(const PointPattern& pattern, std::span<const RasterGrid> covariates, const RoadNetwork* roads,
                    const ModelSpec& spec, const McmcConfig& config, const MeshConfig& mesh) {
  auto model = std::make_shared<const LatentModel>(pattern, covariates, roads, spec, mesh);
  return mcmc_fit(std::move(model), config);
}

}  // namespace vse
