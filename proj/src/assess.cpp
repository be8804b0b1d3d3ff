#include "vse/assess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vse {

namespace {

// log(mean(exp(v))) over a row
double log_mean_exp(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  const double top = v.maxCoeff();
  return top + std::log((v.array() - top).exp().sum() / static_cast<double>(v.size()));
}

}  // namespace

void PointwiseLikelihoodTable::validate(std::size_t min_samples) const {
  if (rows() == 0) throw std::invalid_argument("likelihood table has no rows");
  if (samples() < min_samples)
    throw std::invalid_argument("likelihood table needs at least " + std::to_string(min_samples) + " samples");
  if (!log_lik.allFinite()) throw std::invalid_argument("likelihood table has non-finite entries");
  if (static_cast<std::size_t>(log_lik_at_mean.size()) != rows() || !log_lik_at_mean.allFinite())
    throw std::invalid_argument("likelihood table: plug-in row values missing or non-finite");
  if (node_rows > rows()) throw std::invalid_argument("likelihood table: node_rows exceeds row count");
}

DicResult dic(const PointwiseLikelihoodTable& t) {
  t.validate();
  DicResult r;
  r.d_bar = -2.0 * t.log_lik.colwise().sum().mean();
  r.d_at_mean = -2.0 * t.log_lik_at_mean.sum();
  r.p_d = r.d_bar - r.d_at_mean;
  r.dic = r.d_bar + r.p_d;
  r.degenerate = std::abs(r.p_d) <= 1e-10 * (1.0 + std::abs(r.d_bar));
  return r;
}

WaicResult waic(const PointwiseLikelihoodTable& t, WaicConvention convention) {
  t.validate();
  WaicResult r;
  const double s = static_cast<double>(t.samples());
  for (Eigen::Index i = 0; i < t.log_lik.rows(); ++i) {
    const auto row = t.log_lik.row(i);
    r.lppd += log_mean_exp(row);
    const double m = row.mean();
    r.p_waic += (row.array() - m).square().sum() / (s - 1.0);
  }
  r.waic = convention == WaicConvention::kPlusPenalty ? -2.0 * (r.lppd + r.p_waic) : -2.0 * (r.lppd - r.p_waic);
  return r;
}

LpmlResult lpml(const PointwiseLikelihoodTable& t, double min_relative_ess) {
  t.validate();
  LpmlResult r;
  const double s = static_cast<double>(t.samples());
  r.log_cpo.resize(t.rows());
  r.unreliable.resize(t.rows());
  for (Eigen::Index i = 0; i < t.log_lik.rows(); ++i) {
    const Eigen::RowVectorXd neg = -t.log_lik.row(i);
    const double lme = log_mean_exp(neg);
    const double lc = -lme;
    r.log_cpo[static_cast<std::size_t>(i)] = lc;
    r.lpml += lc;
    // Importance weights 1/p normalized; their ESS is the variance proxy.
    const Eigen::ArrayXd w = (neg.array() - neg.maxCoeff()).exp();
    const double ess = w.sum() * w.sum() / w.square().sum();
    const bool bad = ess / s < min_relative_ess;
    r.unreliable[static_cast<std::size_t>(i)] = bad;
    r.unreliable_count += bad ? 1 : 0;
  }
  return r;
}

ModelScores score_table(const PointwiseLikelihoodTable& t, WaicConvention convention) {
  ModelScores m;
  m.dic = dic(t);
  m.waic = waic(t, convention);
  m.lpml = lpml(t);
  m.samples = t.samples();
  return m;
}

}  // namespace vse
