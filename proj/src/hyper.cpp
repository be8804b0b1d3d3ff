#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "vse/inference.hpp"

namespace vse {

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& start,
                             double step, int max_evaluations, double ftol, double xtol) {
  const auto d = start.size();
  NelderMeadResult out;
  out.x = start;
  if (d == 0) {
    out.value = f(start);
    out.evaluations = 1;
    out.converged = true;
    return out;
  }
  int evals = 0;
  auto eval = [&](const Vector& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  std::vector<Vector> s(static_cast<std::size_t>(d + 1), start);
  std::vector<double> fv(static_cast<std::size_t>(d + 1));
  for (Eigen::Index k = 0; k < d; ++k) s[static_cast<std::size_t>(k + 1)][k] += step;
  for (std::size_t k = 0; k < s.size(); ++k) fv[k] = eval(s[k]);

  std::vector<std::size_t> order(s.size());
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    double spread = 0.0;
    for (const auto& x : s) spread = std::max(spread, (x - s[best]).cwiseAbs().maxCoeff());
    if (std::isfinite(fv[best]) && fv[worst] - fv[best] <= ftol && spread <= xtol) {
      out.converged = true;
      break;
    }
    if (evals >= max_evaluations) break;

    Vector centroid = Vector::Zero(d);
    for (std::size_t k = 0; k < s.size(); ++k)
      if (k != worst) centroid += s[k];
    centroid /= static_cast<double>(d);

    const Vector xr = centroid + (centroid - s[worst]);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      const Vector xe = centroid + 2.0 * (centroid - s[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        s[worst] = xe;
        fv[worst] = fe;
      } else {
        s[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      s[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid))
                              : Vector(centroid + 0.5 * (s[worst] - centroid));
    const double fc = eval(xc);
    if (fc < std::min(fr, fv[worst])) {
      s[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (k == best) continue;
      s[k] = s[best] + 0.5 * (s[k] - s[best]);
      fv[k] = eval(s[k]);
    }
  }
  const auto it = std::min_element(fv.begin(), fv.end());
  out.x = s[static_cast<std::size_t>(it - fv.begin())];
  out.value = *it;
  out.evaluations = evals;
  return out;
}

HyperGrid hyper_grid(const std::function<double(const Vector&)>& log_marginal, const Vector& start,
                     const Vector& fallback_scale, const HyperSearchConfig& cfg) {
  if (cfg.points_per_dim < 1 || cfg.max_evaluations < 1 || !(cfg.fd_step > 0.0) || !(cfg.span_sd >= 0.0))
    throw std::invalid_argument("hyper_grid: invalid search configuration");
  if (fallback_scale.size() != start.size())
    throw std::invalid_argument("hyper_grid: fallback scale has the wrong dimension");
  const auto d = start.size();
  HyperGrid g;
  int evals = 0;
  auto neg = [&](const Vector& h) {
    ++evals;
    const double v = log_marginal(h);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };

  if (d == 0) {
    g.mode = start;
    g.mode_value = -neg(start);
    g.axes.resize(0, 0);
    g.z.push_back(Vector(0));
    g.points.push_back(Vector(0));
    g.evaluations = evals;
    return g;
  }

  bool ok = true;
  const auto nm = nelder_mead(neg, start, cfg.initial_step, cfg.max_evaluations, cfg.ftol, cfg.xtol);
  if (!std::isfinite(nm.value)) {
    ok = false;
    g.diagnostics.push_back("mode search found no finite Laplace marginal");
  } else if (!nm.converged) {
    std::ostringstream msg;
    msg << "mode search stopped at the evaluation budget (" << nm.evaluations << ")";
    g.diagnostics.push_back(msg.str());
  }

  if (ok) {
    const double h = cfg.fd_step;
    const double f0 = nm.value;
    Eigen::MatrixXd hess(d, d);
    for (Eigen::Index i = 0; i < d && ok; ++i) {
      Vector xp = nm.x, xm = nm.x;
      xp[i] += h;
      xm[i] -= h;
      hess(i, i) = (neg(xp) - 2.0 * f0 + neg(xm)) / (h * h);
      for (Eigen::Index j = 0; j < i; ++j) {
        Vector a = nm.x, b = nm.x, c = nm.x, e = nm.x;
        a[i] += h; a[j] += h;
        b[i] += h; b[j] -= h;
        c[i] -= h; c[j] += h;
        e[i] -= h; e[j] -= h;
        hess(i, j) = hess(j, i) = (neg(a) - neg(b) - neg(c) + neg(e)) / (4.0 * h * h);
      }
    }
    if (!hess.allFinite()) {
      ok = false;
      g.diagnostics.push_back("finite-difference Hessian at the mode is not finite");
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
      if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
        ok = false;
        g.diagnostics.push_back("finite-difference Hessian at the mode is not positive definite");
      } else {
        g.mode = nm.x;
        g.mode_value = -f0;
        g.axes = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
      }
    }
  }
  if (!ok) {
    g.fallback = true;
    g.diagnostics.push_back("using the prior-centered fixed grid");
    g.mode = start;
    g.mode_value = -neg(start);
    g.axes = fallback_scale.asDiagonal();
  }

  const int m = cfg.points_per_dim;
  g.z_step = m > 1 ? 2.0 * cfg.span_sd / (m - 1) : 0.0;
  std::size_t total = 1;
  for (Eigen::Index k = 0; k < d; ++k) total *= static_cast<std::size_t>(m);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Vector z(d);
    std::size_t rem = idx;
    for (Eigen::Index k = d - 1; k >= 0; --k) {
      z[k] = -cfg.span_sd + g.z_step * static_cast<double>(rem % static_cast<std::size_t>(m));
      rem /= static_cast<std::size_t>(m);
    }
    if (m == 1) z.setZero();
    g.points.push_back(g.mode + g.axes * z);
    g.z.push_back(std::move(z));
  }
  g.evaluations = evals;
  return g;
}

std::vector<double> normalize_log_weights(std::span<const double> log_values) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : log_values)
    if (std::isfinite(v)) top = std::max(top, v);
  if (!std::isfinite(top)) throw std::runtime_error("normalize_log_weights: no finite values");
  std::vector<double> w(log_values.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = std::isfinite(log_values[k]) ? std::exp(log_values[k] - top) : 0.0;
    sum += w[k];
  }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace vse
