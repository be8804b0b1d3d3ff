#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "vse/inference.hpp"
#include "selinv.hpp"

namespace vse {

namespace {

Eigen::Index find_pos(const SparseMatrix& m, Eigen::Index row, Eigen::Index col) {
  const auto* outer = m.outerIndexPtr();
  const auto* inner = m.innerIndexPtr();
  const auto* b = inner + outer[col];
  const auto* e = inner + outer[col + 1];
  const auto* it = std::lower_bound(b, e, static_cast<SparseMatrix::StorageIndex>(row));
  if (it == e || *it != row) throw std::logic_error("Hessian pattern is missing an entry");
  return static_cast<Eigen::Index>(it - inner);
}

double llt_logdet(const Eigen::SimplicialLLT<SparseMatrix>& llt) {
  return 2.0 * llt.matrixL().nestedExpression().diagonal().array().log().sum();
}

}  // namespace

LaplaceSolver::LaplaceSolver(const LatentModel& model, NewtonOptions options)
    : model_(model), opt_(options) {
  build_pattern();
}

void LaplaceSolver::build_pattern() {
  const auto n = static_cast<Eigen::Index>(model_.field_dim());
  const auto p = static_cast<Eigen::Index>(model_.beta_dim());
  const auto& an = model_.node_projector();
  std::vector<Eigen::Triplet<double>> trip;
  if (n) {
    q_ = model_.spde()->precision(1.0, 1.0);
    for (Eigen::Index c = 0; c < q_.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(q_, c); it; ++it) trip.emplace_back(it.row(), c, 1.0);
    for (Eigen::Index i = 0; i < an.outerSize(); ++i)
      for (RowSparseMatrix::InnerIterator a(an, i); a; ++a) {
        for (RowSparseMatrix::InnerIterator b(an, i); b; ++b) trip.emplace_back(a.col(), b.col(), 1.0);
        for (Eigen::Index k = 0; k < p; ++k) {
          trip.emplace_back(a.col(), n + k, 1.0);
          trip.emplace_back(n + k, a.col(), 1.0);
        }
      }
  }
  for (Eigen::Index k = 0; k < p; ++k)
    for (Eigen::Index l = 0; l < p; ++l) trip.emplace_back(n + k, n + l, 1.0);
  h_mat_.resize(n + p, n + p);
  h_mat_.setFromTriplets(trip.begin(), trip.end());
  h_mat_.makeCompressed();

  // Value slots are listed in the same order hessian() visits them.
  q_pos_.clear();
  ff_pos_.clear();
  fb_pos_.clear();
  if (n) {
    for (Eigen::Index c = 0; c < q_.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(q_, c); it; ++it) q_pos_.push_back(find_pos(h_mat_, it.row(), c));
    for (Eigen::Index i = 0; i < an.outerSize(); ++i)
      for (RowSparseMatrix::InnerIterator a(an, i); a; ++a) {
        for (RowSparseMatrix::InnerIterator b(an, i); b; ++b) ff_pos_.push_back(find_pos(h_mat_, a.col(), b.col()));
        for (Eigen::Index k = 0; k < p; ++k) {
          fb_pos_.push_back(find_pos(h_mat_, a.col(), n + k));
          fb_pos_.push_back(find_pos(h_mat_, n + k, a.col()));
        }
      }
  }
  bb_pos_.clear();
  for (Eigen::Index k = 0; k < p; ++k)
    for (Eigen::Index l = 0; l < p; ++l) bb_pos_.push_back(find_pos(h_mat_, n + k, n + l));

  llt_h_.analyzePattern(h_mat_);
  if (n) llt_q_.analyzePattern(q_);
}

void LaplaceSolver::set_hyper(const Vector& h) {
  hv_ = model_.hyper_values(h);
  h_ = h;
  if (model_.field_dim()) {
    const MaternParams mp(hv_.sigma, hv_.rho);
    model_.spde()->precision_values(mp.kappa(), mp.tau(), q_);
    llt_q_.factorize(q_);
    if (llt_q_.info() != Eigen::Success)
      throw std::runtime_error("field precision is not positive definite");
    logdet_q_ = llt_logdet(llt_q_);
  } else {
    logdet_q_ = 0.0;
  }
  off_n_ = model_.node_offset(hv_.zeta);
  off_p_ = model_.point_offset(hv_.zeta);
  off_p_sum_ = off_p_.sum();
  log_prior_ = model_.log_hyper_prior(h);
  hyper_set_ = true;
}

double LaplaceSolver::objective(const Vector& u, Vector* grad) const {
  if (!hyper_set_) throw std::logic_error("LaplaceSolver: hyperparameters not set");
  const auto n = static_cast<Eigen::Index>(model_.field_dim());
  const auto p = static_cast<Eigen::Index>(model_.beta_dim());
  const Eigen::Map<const Eigen::VectorXd> a(model_.node_weights().data(),
                                            static_cast<Eigen::Index>(model_.node_weights().size()));
  const auto beta = u.tail(p);

  Vector eta = model_.node_design() * beta + off_n_;
  if (n) eta += model_.node_projector() * u.head(n);
  const Vector w = a.array() * eta.array().exp();

  const double tb = model_.spec().beta_precision;
  double f = model_.point_beta_sum().dot(beta) + off_p_sum_ - w.sum() - 0.5 * tb * beta.squaredNorm();
  Vector qw;
  if (n) {
    const auto omega = u.head(n);
    qw = q_ * omega;
    f += model_.point_field_sum().dot(omega) - 0.5 * omega.dot(qw);
  }
  if (!std::isfinite(f)) f = -std::numeric_limits<double>::infinity();
  if (grad) {
    grad->resize(n + p);
    if (n) grad->head(n) = model_.point_field_sum() - qw - model_.node_projector().transpose() * w;
    grad->tail(p) = model_.point_beta_sum() - model_.node_design().transpose() * w - tb * beta;
  }
  return f;
}

const SparseMatrix& LaplaceSolver::hessian(const Vector& u) {
  const auto n = static_cast<Eigen::Index>(model_.field_dim());
  const auto p = static_cast<Eigen::Index>(model_.beta_dim());
  const auto& an = model_.node_projector();
  const auto& a = model_.node_weights();
  const auto& xn = model_.node_design();
  double* v = h_mat_.valuePtr();
  std::fill(v, v + h_mat_.nonZeros(), 0.0);

  for (std::size_t k = 0; k < q_pos_.size(); ++k) v[q_pos_[k]] += q_.valuePtr()[k];
  const double tb = model_.spec().beta_precision;
  for (Eigen::Index k = 0; k < p; ++k) v[bb_pos_[static_cast<std::size_t>(k * p + k)]] += tb;

  Vector eta = xn * u.tail(p) + off_n_;
  if (n) eta += an * u.head(n);
  std::size_t ff = 0, fb = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double w = a[static_cast<std::size_t>(i)] * std::exp(eta[i]);
    if (n)
      for (RowSparseMatrix::InnerIterator ra(an, i); ra; ++ra) {
        const double wa = w * ra.value();
        for (RowSparseMatrix::InnerIterator rb(an, i); rb; ++rb) v[ff_pos_[ff++]] += wa * rb.value();
        for (Eigen::Index k = 0; k < p; ++k) {
          const double c = wa * xn(i, k);
          v[fb_pos_[fb++]] += c;
          v[fb_pos_[fb++]] += c;
        }
      }
    for (Eigen::Index k = 0; k < p; ++k)
      for (Eigen::Index l = 0; l < p; ++l) v[bb_pos_[static_cast<std::size_t>(k * p + l)]] += w * xn(i, k) * xn(i, l);
  }
  return h_mat_;
}

LaplaceResult LaplaceSolver::solve(const Vector& init, std::vector<double>* trace) {
  if (!hyper_set_) throw std::logic_error("LaplaceSolver: hyperparameters not set");
  if (static_cast<std::size_t>(init.size()) != model_.dim())
    throw std::invalid_argument("LaplaceSolver: initial vector has the wrong dimension");
  Vector u = init;
  Vector g, gc;
  double f = objective(u, &g);
  if (!std::isfinite(f)) {
    u = model_.initial_latent(hv_.zeta);
    f = objective(u, &g);
    if (!std::isfinite(f)) throw std::runtime_error("Newton: objective not finite at the starting point");
  }
  int it = 0;
  bool converged = false;
  for (; it < opt_.max_iterations; ++it) {
    if (g.cwiseAbs().maxCoeff() < opt_.gradient_tol) {
      converged = true;
      break;
    }
    llt_h_.factorize(hessian(u));
    if (llt_h_.info() != Eigen::Success) throw std::runtime_error("Newton: Hessian is not positive definite");
    const Vector step = llt_h_.solve(g);
    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k <= opt_.max_halvings; ++k, t *= 0.5) {
      Vector cand = u + t * step;
      const double fc = objective(cand, &gc);
      if (std::isfinite(fc) && fc > f) {
        u = std::move(cand);
        f = fc;
        g.swap(gc);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No representable increase left: the remaining gradient is rounding.
      if (g.cwiseAbs().maxCoeff() < 1e3 * opt_.gradient_tol) {
        converged = true;
        break;
      }
      std::ostringstream msg;
      msg << "Newton: line search failed after " << opt_.max_halvings << " halvings at iteration " << it
          << " (objective " << f << ", gradient max-norm " << g.cwiseAbs().maxCoeff() << ", rho "
          << hv_.rho << ", sigma " << hv_.sigma << ", zeta " << hv_.zeta << ")";
      throw std::runtime_error(msg.str());
    }
    if (trace) trace->push_back(f);
  }
  if (!converged) {
    if (g.cwiseAbs().maxCoeff() < opt_.gradient_tol) {
      converged = true;
    } else {
      std::ostringstream msg;
      msg << "Newton: no convergence after " << opt_.max_iterations << " iterations (objective " << f
          << ", gradient max-norm " << g.cwiseAbs().maxCoeff() << ", rho " << hv_.rho << ", sigma "
          << hv_.sigma << ", zeta " << hv_.zeta << ")";
      throw std::runtime_error(msg.str());
    }
  }

  LaplaceResult r;
  r.precision = hessian(u);
  llt_h_.factorize(r.precision);
  if (llt_h_.info() != Eigen::Success) throw std::runtime_error("Laplace: Hessian at the mode is not positive definite");
  r.mode = std::move(u);
  r.objective = f;
  r.iterations = it;
  r.logdet_q = logdet_q_;
  r.logdet_h = llt_logdet(llt_h_);
  const auto pd = static_cast<Eigen::Index>(model_.beta_dim());
  const auto nd = static_cast<Eigen::Index>(model_.field_dim());
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(nd + pd, pd);
  e.bottomRows(pd).setIdentity();
  r.beta_cov = Eigen::MatrixXd(llt_h_.solve(e)).bottomRows(pd);
  const double p = static_cast<double>(model_.beta_dim());
  // The 2 pi terms of the Gaussian prior and of the Laplace integral cancel.
  r.log_marginal = f + 0.5 * logdet_q_ + 0.5 * p * std::log(model_.spec().beta_precision) -
                   0.5 * r.logdet_h + log_prior_;
  return r;
}

// First-order mean correction of the Gaussian approximation: the skew of
// the Poisson term shifts the mean by H^-1 times the gradient of
// -1/2 log det H, i.e. -1/2 H^-1 M^T (w * var(eta)).
Vector LaplaceSolver::corrected_mean(const LaplaceResult& r) {
  if (!hyper_set_) throw std::logic_error("LaplaceSolver: hyperparameters not set");
  const auto n = static_cast<Eigen::Index>(model_.field_dim());
  const auto p = static_cast<Eigen::Index>(model_.beta_dim());
  llt_h_.factorize(r.precision);
  if (llt_h_.info() != Eigen::Success) throw std::runtime_error("Laplace: Hessian at the mode is not positive definite");
  const detail::SelectedInverse sigma(llt_h_);
  const auto& an = model_.node_projector();
  const auto& xn = model_.node_design();
  const auto& a = model_.node_weights();

  Vector eta = xn * r.mode.tail(p) + off_n_;
  if (n) eta += an * r.mode.head(n);
  Vector ws(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    double var = 0.0;
    if (n)
      for (RowSparseMatrix::InnerIterator ra(an, i); ra; ++ra) {
        for (RowSparseMatrix::InnerIterator rb(an, i); rb; ++rb)
          var += ra.value() * rb.value() * sigma(ra.col(), rb.col());
        for (Eigen::Index k = 0; k < p; ++k) var += 2.0 * ra.value() * xn(i, k) * sigma(ra.col(), n + k);
      }
    for (Eigen::Index k = 0; k < p; ++k)
      for (Eigen::Index l = 0; l < p; ++l) var += xn(i, k) * xn(i, l) * sigma(n + k, n + l);
    ws[i] = a[static_cast<std::size_t>(i)] * std::exp(eta[i]) * var;
  }
  Vector g(n + p);
  if (n) g.head(n) = an.transpose() * ws;
  g.tail(p) = xn.transpose() * ws;
  return r.mode - 0.5 * Vector(llt_h_.solve(g));
}

}  // namespace vse
