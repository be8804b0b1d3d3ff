#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "parallel.hpp"
#include "vse/inference.hpp"

namespace vse {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

constexpr std::uint64_t kSummaryStream = 0x68797065;  // hyper summary draws
constexpr std::uint64_t kAssessStream = 0x61737365;

// Solve at h starting from `warm`; on failure retry from the GLM start.
LaplaceResult solve_node(LaplaceSolver& solver, const LatentModel& model, const Vector& h,
                         const Vector& warm) {
  solver.set_hyper(h);
  try {
    return solver.solve(warm);
  } catch (const std::runtime_error&) {
    return solver.solve(model.initial_latent(solver.hyper().zeta));
  }
}

void fill_summaries(FitResult& r, int draws) {
  const auto& model = *r.model;
  const auto n = static_cast<Eigen::Index>(model.field_dim());
  const auto names = r.beta_names();
  std::vector<double> w(r.nodes.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = r.nodes[k].weight;
  r.summaries.clear();
  for (std::size_t b = 0; b < names.size(); ++b) {
    std::vector<double> mu(w.size()), sd(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
      const auto bi = static_cast<Eigen::Index>(b);
      mu[k] = r.approx[k].mean[n + bi];
      sd[k] = std::sqrt(std::max(0.0, r.approx[k].beta_cov(bi, bi)));
    }
    r.summaries.push_back(mixture_summary(names[b], w, mu, sd));
  }
  if (model.spec().hyper_dim() == 0) return;
  PosteriorSampler sampler(r);
  Rng rng(derive_seed(r.seed, {kSummaryStream}));
  std::vector<double> rho, sigma, zeta;
  for (int s = 0; s < draws; ++s) {
    const std::size_t node = sampler.pick_node(rng);
    const HyperValues hv = model.hyper_values(sampler.jitter_hyper(node, rng));
    rho.push_back(hv.rho);
    sigma.push_back(hv.sigma);
    zeta.push_back(hv.zeta);
  }
  if (model.spec().use_field) {
    r.summaries.push_back(sample_summary("rho", std::move(rho)));
    r.summaries.push_back(sample_summary("sigma", std::move(sigma)));
  }
  if (model.spec().free_zeta()) r.summaries.push_back(sample_summary("zeta", std::move(zeta)));
}

void finish(FitResult& r, const FitOptions& options) {
  fill_summaries(r, options.summary_draws);
  if (options.assess_samples > 0) {
    const auto table = lgcp_pointwise_table(r, static_cast<std::size_t>(options.assess_samples),
                                            derive_seed(r.seed, {kAssessStream}));
    r.scores = score_table(table);
    if (r.scores->dic.degenerate) r.diagnostics.push_back("DIC: effective number of parameters is numerically zero");
    if (r.scores->lpml.unreliable_count > 0) {
      std::ostringstream msg;
      msg << "LPML: " << r.scores->lpml.unreliable_count << " rows with unreliable CPO estimates";
      r.diagnostics.push_back(msg.str());
    }
  }
}

}  // namespace

std::vector<std::string> FitResult::beta_names() const {
  std::vector<std::string> out;
  const std::size_t p = model ? model->beta_dim() : spec.covariate_names.size() + 1;
  for (std::size_t k = 0; k < p; ++k) out.push_back("beta" + std::to_string(k));
  return out;
}

const ParameterSummary& FitResult::summary(const std::string& name) const {
  for (const auto& s : summaries)
    if (s.name == name) return s;
  throw std::out_of_range("FitResult: no summary for '" + name + "'");
}

ParameterSummary mixture_summary(const std::string& name, std::span<const double> weights,
                                 std::span<const double> means, std::span<const double> sds) {
  if (weights.size() != means.size() || weights.size() != sds.size() || weights.empty())
    throw std::invalid_argument("mixture_summary: mismatched or empty components");
  ParameterSummary s;
  s.name = name;
  double m1 = 0.0, m2 = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    m1 += weights[k] * means[k];
    m2 += weights[k] * (sds[k] * sds[k] + means[k] * means[k]);
    lo = std::min(lo, means[k] - 12.0 * sds[k]);
    hi = std::max(hi, means[k] + 12.0 * sds[k]);
  }
  s.mean = m1;
  s.sd = std::sqrt(std::max(0.0, m2 - m1 * m1));
  auto cdf = [&](double x) {
    double c = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k] <= 0.0) continue;
      c += weights[k] * (sds[k] > 0.0 ? normal_cdf((x - means[k]) / sds[k]) : (x >= means[k] ? 1.0 : 0.0));
    }
    return c;
  };
  auto quantile = [&](double prob) {
    double a = lo, b = hi;
    for (int it = 0; it < 200 && b - a > 1e-14 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
      const double mid = 0.5 * (a + b);
      (cdf(mid) < prob ? a : b) = mid;
    }
    return 0.5 * (a + b);
  };
  s.q025 = quantile(0.025);
  s.q50 = quantile(0.5);
  s.q975 = quantile(0.975);
  return s;
}

ParameterSummary sample_summary(const std::string& name, std::vector<double> draws) {
  if (draws.size() < 2) throw std::invalid_argument("sample_summary: need at least two draws");
  ParameterSummary s;
  s.name = name;
  double m = 0.0;
  for (double v : draws) m += v;
  m /= static_cast<double>(draws.size());
  double ss = 0.0;
  for (double v : draws) ss += (v - m) * (v - m);
  s.mean = m;
  s.sd = std::sqrt(ss / static_cast<double>(draws.size() - 1));
  const Ecdf e(std::move(draws));
  s.q025 = e.quantile(0.025);
  s.q50 = e.quantile(0.5);
  s.q975 = e.quantile(0.975);
  return s;
}

FitResult fit(const PointPattern& pattern, std::span<const RasterGrid> covariates, const RoadNetwork* roads,
              const ModelSpec& spec, const FitOptions& options) {
  auto model = std::make_shared<const LatentModel>(pattern, covariates, roads, spec, options.mesh, options.distance);
  return fit(std::move(model), options);
}

FitResult fit(std::shared_ptr<const LatentModel> model, const FitOptions& options) {
  if (!model) throw std::invalid_argument("fit: no model");
  FitResult r;
  r.spec = model->spec();
  r.model = model;
  r.seed = options.seed;

  LaplaceSolver solver(*model, options.newton);
  const Vector h0 = model->hyper_start();
  Vector warm = model->initial_latent(model->hyper_values(h0).zeta);
  int failures = 0;
  std::string last_error;
  auto log_marginal = [&](const Vector& h) -> double {
    if (h.size() && h.cwiseAbs().maxCoeff() > 30.0) return -std::numeric_limits<double>::infinity();
    try {
      LaplaceResult lr = solve_node(solver, *model, h, warm);
      warm = std::move(lr.mode);
      return lr.log_marginal;
    } catch (const std::exception& e) {
      ++failures;
      last_error = e.what();
      return -std::numeric_limits<double>::infinity();
    }
  };
  r.grid = hyper_grid(log_marginal, h0, model->hyper_prior_scale(), options.search);
  r.diagnostics = r.grid.diagnostics;
  if (failures > 0) {
    std::ostringstream msg;
    msg << failures << " Laplace solves failed during the mode search; last: " << last_error;
    r.diagnostics.push_back(msg.str());
  }

  // Every grid node starts Newton from the latent mode at the hyper mode,
  // so node results do not depend on evaluation order or thread count.
  solver.set_hyper(r.grid.mode);
  Vector mode_latent;
  try {
    mode_latent = solver.solve(warm).mode;
  } catch (const std::runtime_error&) {
    mode_latent = model->initial_latent(solver.hyper().zeta);
  }

  const std::size_t count = r.grid.points.size();
  std::vector<LaplaceResult> results(count);
  std::vector<std::string> errors(count);
  std::vector<Vector> means(count);
  const std::size_t workers = detail::worker_count(count, options.threads);
  std::vector<std::unique_ptr<LaplaceSolver>> solvers;
  for (std::size_t w = 0; w < workers; ++w) solvers.push_back(std::make_unique<LaplaceSolver>(*model, options.newton));
  detail::parallel_for(count, options.threads, [&](std::size_t k, std::size_t w) {
    try {
      results[k] = solve_node(*solvers[w], *model, r.grid.points[k], mode_latent);
      means[k] = options.mean_correction ? solvers[w]->corrected_mean(results[k]) : results[k].mode;
    } catch (const std::exception& e) {
      errors[k] = e.what();
      results[k].log_marginal = -std::numeric_limits<double>::infinity();
    }
  });

  std::vector<double> lml(count);
  std::size_t failed = 0;
  for (std::size_t k = 0; k < count; ++k) {
    lml[k] = results[k].log_marginal;
    if (!errors[k].empty()) {
      ++failed;
      r.diagnostics.push_back("grid node " + std::to_string(k) + " failed: " + errors[k]);
    }
  }
  if (failed == count) throw std::runtime_error("fit: every hyperparameter node failed; last error: " + errors.back());
  const auto weights = normalize_log_weights(lml);
  for (std::size_t k = 0; k < count; ++k) {
    HyperNode node;
    node.h = r.grid.points[k];
    node.values = model->hyper_values(node.h);
    node.laplace_log_marginal = lml[k];
    node.weight = weights[k];
    r.nodes.push_back(std::move(node));
    NodeApproximation ap;
    if (errors[k].empty()) {
      ap.mode = std::move(results[k].mode);
      ap.mean = std::move(means[k]);
      ap.precision = std::move(results[k].precision);
      ap.beta_cov = std::move(results[k].beta_cov);
    } else {
      ap.mode = mode_latent;
      ap.mean = mode_latent;
      ap.beta_cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(model->beta_dim()),
                                          static_cast<Eigen::Index>(model->beta_dim()));
    }
    r.approx.push_back(std::move(ap));
  }
  finish(r, options);
  return r;
}

FitResult rebuild_fit(std::shared_ptr<const LatentModel> model, HyperGrid grid, std::vector<HyperNode> nodes,
                      std::vector<Vector> modes, const FitOptions& options) {
  if (!model) throw std::invalid_argument("rebuild_fit: no model");
  if (nodes.size() != modes.size() || nodes.empty())
    throw std::invalid_argument("rebuild_fit: one stored mode per node required");
  FitResult r;
  r.spec = model->spec();
  r.model = model;
  r.seed = options.seed;
  r.grid = std::move(grid);
  LaplaceSolver solver(*model, options.newton);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (static_cast<std::size_t>(modes[k].size()) != model->dim())
      throw std::invalid_argument("rebuild_fit: stored mode has the wrong dimension");
    NodeApproximation ap;
    if (nodes[k].weight > 0.0) {
      // Newton from the stored mode converges immediately and rebuilds H.
      solver.set_hyper(nodes[k].h);
      LaplaceResult lr = solver.solve(modes[k]);
      ap.mean = options.mean_correction ? solver.corrected_mean(lr) : lr.mode;
      ap.mode = std::move(lr.mode);
      ap.precision = std::move(lr.precision);
      ap.beta_cov = std::move(lr.beta_cov);
    } else {
      ap.mode = modes[k];
      ap.mean = modes[k];
      ap.beta_cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(model->beta_dim()),
                                          static_cast<Eigen::Index>(model->beta_dim()));
    }
    r.approx.push_back(std::move(ap));
  }
  r.nodes = std::move(nodes);
  finish(r, options);
  return r;
}

PosteriorSampler::PosteriorSampler(const FitResult& fit) : fit_(fit) {
  if (fit.nodes.empty() || fit.nodes.size() != fit.approx.size())
    throw std::invalid_argument("PosteriorSampler: fit has no nodes");
  double c = 0.0;
  for (const auto& n : fit.nodes) cumulative_.push_back(c += n.weight);
  llt_.resize(fit.nodes.size());
}

std::size_t PosteriorSampler::pick_node(Rng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, cumulative_.back());
  const double u = unif(rng);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  while (fit_.nodes[k].weight <= 0.0 && k > 0) --k;
  return k;
}

Vector PosteriorSampler::jitter_hyper(std::size_t node, Rng& rng) const {
  const Vector& h = fit_.nodes[node].h;
  if (h.size() == 0) return h;
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  Vector z(h.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = unif(rng) * fit_.grid.z_step;
  return h + fit_.grid.axes * z;
}

Vector PosteriorSampler::draw_latent(std::size_t node, Rng& rng) const {
  const auto& ap = fit_.approx[node];
  if (!llt_[node]) {
    if (ap.precision.rows() == 0) throw std::runtime_error("PosteriorSampler: node has no Gaussian approximation");
    llt_[node] = std::make_unique<Eigen::SimplicialLLT<SparseMatrix>>(ap.precision);
    if (llt_[node]->info() != Eigen::Success) throw std::runtime_error("PosteriorSampler: node precision is not SPD");
  }
  std::normal_distribution<double> nd;
  Vector z(ap.mode.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = nd(rng);
  const Vector y = llt_[node]->matrixU().solve(z);
  return ap.mean + llt_[node]->permutationPinv() * y;
}

PosteriorSampler::Draw PosteriorSampler::draw(Rng& rng) const {
  Draw d;
  d.node = pick_node(rng);
  d.u = draw_latent(d.node, rng);
  d.h = jitter_hyper(d.node, rng);
  // The latent draw is conditional on the node, so the node's values
  // define the predictor offsets.
  d.hyper = fit_.nodes[d.node].values;
  return d;
}

std::vector<std::vector<double>> posterior_parameter_draws(const FitResult& fit, std::size_t draws,
                                                           std::uint64_t seed, std::vector<std::string>* names) {
  const auto& model = *fit.model;
  const auto p = static_cast<Eigen::Index>(model.beta_dim());
  const auto n = static_cast<Eigen::Index>(model.field_dim());
  std::vector<std::string> nm = fit.beta_names();
  if (model.spec().use_field) {
    nm.push_back("rho");
    nm.push_back("sigma");
  }
  if (model.spec().free_zeta()) nm.push_back("zeta");
  std::vector<std::vector<double>> out(nm.size());
  PosteriorSampler sampler(fit);
  std::vector<std::optional<Eigen::MatrixXd>> chol(fit.nodes.size());
  Rng rng(seed);
  std::normal_distribution<double> nd;
  for (std::size_t s = 0; s < draws; ++s) {
    const std::size_t k = sampler.pick_node(rng);
    if (!chol[k]) chol[k] = Eigen::MatrixXd(fit.approx[k].beta_cov.llt().matrixL());
    Vector z(p);
    for (Eigen::Index i = 0; i < p; ++i) z[i] = nd(rng);
    const Vector beta = fit.approx[k].mean.segment(n, p) + *chol[k] * z;
    std::size_t c = 0;
    for (Eigen::Index i = 0; i < p; ++i) out[c++].push_back(beta[i]);
    if (model.spec().hyper_dim() > 0) {
      const HyperValues hv = model.hyper_values(sampler.jitter_hyper(k, rng));
      if (model.spec().use_field) {
        out[c++].push_back(hv.rho);
        out[c++].push_back(hv.sigma);
      }
      if (model.spec().free_zeta()) out[c++].push_back(hv.zeta);
    }
  }
  if (names) *names = std::move(nm);
  return out;
}

// Node rows are per fit cell: the log probability of no further points
// there, -integral of the intensity over the cell.
PointwiseLikelihoodTable lgcp_pointwise_table(const FitResult& fit, std::size_t samples, std::uint64_t seed) {
  const auto& model = *fit.model;
  const auto m = static_cast<Eigen::Index>(model.node_count());
  const auto groups = static_cast<Eigen::Index>(model.group_count());
  const auto np = static_cast<Eigen::Index>(model.point_count());
  const auto& a = model.node_weights();
  const auto& grp = model.node_groups();
  PointwiseLikelihoodTable t;
  t.node_rows = static_cast<std::size_t>(groups);
  t.log_lik.setZero(groups + np, static_cast<Eigen::Index>(samples));
  std::vector<std::optional<std::pair<Vector, Vector>>> offsets(fit.nodes.size());
  PosteriorSampler sampler(fit);
  Rng rng(seed);
  Vector sum_n = Vector::Zero(m), sum_p = Vector::Zero(np), eta_n, eta_p;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto d = sampler.draw(rng);
    auto& off = offsets[d.node];
    if (!off) off.emplace(model.node_offset(d.hyper.zeta), model.point_offset(d.hyper.zeta));
    model.linear_predictor(d.u, off->first, off->second, eta_n, eta_p);
    const auto col = static_cast<Eigen::Index>(s);
    for (Eigen::Index i = 0; i < m; ++i)
      t.log_lik(static_cast<Eigen::Index>(grp[static_cast<std::size_t>(i)]), col) -=
          a[static_cast<std::size_t>(i)] * std::exp(eta_n[i]);
    t.log_lik.block(groups, col, np, 1) = eta_p;
    sum_n += eta_n;
    sum_p += eta_p;
  }
  const double inv = 1.0 / static_cast<double>(samples);
  t.log_lik_at_mean.setZero(groups + np);
  for (Eigen::Index i = 0; i < m; ++i)
    t.log_lik_at_mean[static_cast<Eigen::Index>(grp[static_cast<std::size_t>(i)])] -=
        a[static_cast<std::size_t>(i)] * std::exp(sum_n[i] * inv);
  t.log_lik_at_mean.tail(np) = sum_p * inv;
  return t;
}

IntensityPrediction predict_intensity(const FitResult& fit, const GridSpec& target, std::size_t samples,
                                      std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("predict_intensity: need at least two samples");
  target.validate();
  const auto& model = *fit.model;
  const Eigen::MatrixXd x = model.target_design(target);
  const Eigen::SparseMatrix<double, Eigen::RowMajor> proj = model.target_projector(target);
  const auto n = static_cast<Eigen::Index>(model.field_dim());
  const auto p = static_cast<Eigen::Index>(model.beta_dim());
  const auto s_count = static_cast<Eigen::Index>(samples);

  PosteriorSampler sampler(fit);
  Rng rng(seed);
  Eigen::MatrixXd omega(n, s_count), beta(p, s_count);
  for (Eigen::Index s = 0; s < s_count; ++s) {
    const std::size_t k = sampler.pick_node(rng);
    const Vector u = sampler.draw_latent(k, rng);
    omega.col(s) = u.head(n);
    beta.col(s) = u.tail(p);
  }

  IntensityPrediction out{RasterGrid(target, 0.0), RasterGrid(target, 0.0)};
  const auto cells = static_cast<Eigen::Index>(target.size());
  const Eigen::Index chunk = 512;
  std::vector<double> buf(samples);
  for (Eigen::Index start = 0; start < cells; start += chunk) {
    const Eigen::Index len = std::min(chunk, cells - start);
    Eigen::MatrixXd eta = x.middleRows(start, len) * beta;
    if (n) eta += proj.middleRows(start, len) * omega;
    for (Eigen::Index r = 0; r < len; ++r) {
      const auto c = static_cast<std::size_t>(start + r);
      double mean = eta.row(r).mean();
      double ss = (eta.row(r).array() - mean).square().sum();
      out.sd[c] = std::sqrt(ss / static_cast<double>(samples - 1));
      for (Eigen::Index s = 0; s < s_count; ++s) buf[static_cast<std::size_t>(s)] = eta(r, s);
      const std::size_t mid = samples / 2;
      std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid), buf.end());
      double med = buf[mid];
      if (samples % 2 == 0) med = 0.5 * (med + *std::max_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid)));
      out.median[c] = med;
    }
  }
  return out;
}

}  // namespace vse
