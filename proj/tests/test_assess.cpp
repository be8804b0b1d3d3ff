#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "vse/assess.hpp"
#include "vse/rng.hpp"

using namespace vse;

namespace {

double log_normal_pdf(double y, double mean, double var) {
  return -0.5 * std::log(2 * std::numbers::pi * var) - 0.5 * (y - mean) * (y - mean) / var;
}

// y_i ~ N(mu, 1), mu ~ N(0, prior_var): exact posterior draws of mu.
struct Conjugate {
  std::vector<double> y;
  double prior_var = 100.0;

  std::pair<double, double> posterior(std::size_t skip = static_cast<std::size_t>(-1)) const {
    double prec = 1.0 / prior_var, sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (i != skip) {
        prec += 1.0;
        sum += y[i];
      }
    return {sum / prec, 1.0 / prec};
  }

  PointwiseLikelihoodTable table(std::size_t samples, std::uint64_t seed) const {
    const auto [m, v] = posterior();
    Rng rng(seed);
    std::normal_distribution<double> nd(m, std::sqrt(v));
    PointwiseLikelihoodTable t;
    t.log_lik.resize(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(samples));
    double mean_mu = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const double mu = nd(rng);
      mean_mu += mu / static_cast<double>(samples);
      for (std::size_t i = 0; i < y.size(); ++i)
        t.log_lik(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = log_normal_pdf(y[i], mu, 1.0);
    }
    t.log_lik_at_mean.resize(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i)
      t.log_lik_at_mean[static_cast<Eigen::Index>(i)] = log_normal_pdf(y[i], mean_mu, 1.0);
    return t;
  }
};

Conjugate make_conjugate(std::size_t n, std::uint64_t seed) {
  Conjugate c;
  Rng rng(seed);
  std::normal_distribution<double> nd(0.7, 1.0);
  for (std::size_t i = 0; i < n; ++i) c.y.push_back(nd(rng));
  return c;
}

PointwiseLikelihoodTable random_table(Eigen::Index rows, Eigen::Index samples, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  PointwiseLikelihoodTable t;
  t.log_lik.resize(rows, samples);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double centre = -5.0 * std::abs(nd(rng)), spread = 0.1 + std::abs(nd(rng));
    for (Eigen::Index s = 0; s < samples; ++s) t.log_lik(i, s) = centre + spread * nd(rng);
  }
  t.log_lik_at_mean = t.log_lik.rowwise().mean();
  return t;
}

}  // namespace

TEST_CASE("point-mass posterior") {
  PointwiseLikelihoodTable t;
  t.log_lik.resize(6, 200);
  Eigen::VectorXd v(6);
  v << -0.3, -2.0, -1.1, -7.5, -0.01, -3.3;
  for (Eigen::Index s = 0; s < 200; ++s) t.log_lik.col(s) = v;
  t.log_lik_at_mean = v;
  const auto d = dic(t);
  CHECK(d.p_d == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.dic == doctest::Approx(d.d_at_mean).epsilon(1e-12));
  CHECK(d.degenerate);
  const auto w = waic(t);
  CHECK(std::abs(w.p_waic) < 1e-20);
  CHECK(w.waic == doctest::Approx(-2.0 * v.sum()).epsilon(1e-12));
  const auto l = lpml(t);
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(l.log_cpo[static_cast<std::size_t>(i)] == doctest::Approx(v[i]).epsilon(1e-12));
  CHECK(l.unreliable_count == 0);
}

TEST_CASE("DIC effective parameters for a conjugate normal mean") {
  // one free parameter, nearly flat prior: p_D close to 1
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto c = make_conjugate(50, seed);
    const auto d = dic(c.table(4000, seed + 10));
    CHECK(d.p_d == doctest::Approx(1.0).epsilon(0.15));
    CHECK_FALSE(d.degenerate);
  }
}

TEST_CASE("WAIC matches a two-pass re-implementation") {
  for (std::uint64_t seed : {4u, 5u, 6u}) {
    const auto t = random_table(37, 250, seed);
    double lppd = 0.0, pw = 0.0;
    for (Eigen::Index i = 0; i < t.log_lik.rows(); ++i) {
      // pass 1: mean of the likelihood scaled by a row constant; pass 2: variance
      const double c = t.log_lik(i, 0);
      double acc = 0.0, mean = 0.0;
      for (Eigen::Index s = 0; s < t.log_lik.cols(); ++s) {
        acc += std::exp(t.log_lik(i, s) - c);
        mean += t.log_lik(i, s);
      }
      const double n = static_cast<double>(t.log_lik.cols());
      lppd += c + std::log(acc / n);
      mean /= n;
      double ss = 0.0;
      for (Eigen::Index s = 0; s < t.log_lik.cols(); ++s) ss += (t.log_lik(i, s) - mean) * (t.log_lik(i, s) - mean);
      pw += ss / (n - 1.0);
    }
    const auto w = waic(t);
    CHECK(std::abs(w.lppd - lppd) < 1e-10 * std::abs(lppd));
    CHECK(std::abs(w.p_waic - pw) < 1e-10 * pw);
    CHECK(std::abs(w.waic - (-2.0 * (lppd - pw))) < 1e-10 * std::abs(w.waic));
    const auto wp = waic(t, WaicConvention::kPlusPenalty);
    CHECK(std::abs(wp.waic - (-2.0 * (lppd + pw))) < 1e-10 * std::abs(wp.waic));
  }
}

TEST_CASE("LPML matches exact leave-one-out on a five-observation toy") {
  const auto c = make_conjugate(5, 7);
  double exact = 0.0;
  for (std::size_t i = 0; i < c.y.size(); ++i) {
    const auto [m, v] = c.posterior(i);
    exact += log_normal_pdf(c.y[i], m, 1.0 + v);
  }
  const auto l = lpml(c.table(20000, 8));
  CHECK(std::abs(l.lpml - exact) < 0.05 * std::abs(exact));
}

TEST_CASE("criteria are invariant to row and sample order") {
  const auto t = random_table(23, 300, 9);
  Rng rng(10);
  std::vector<Eigen::Index> rows(23), cols(300);
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);
  std::shuffle(rows.begin(), rows.end(), rng);
  std::shuffle(cols.begin(), cols.end(), rng);
  PointwiseLikelihoodTable p;
  p.log_lik = t.log_lik(rows, cols);
  p.log_lik_at_mean = t.log_lik_at_mean(rows);
  const auto a = score_table(t), b = score_table(p);
  CHECK(a.dic.dic == doctest::Approx(b.dic.dic).epsilon(1e-12));
  CHECK(a.dic.p_d == doctest::Approx(b.dic.p_d).epsilon(1e-10));
  CHECK(a.waic.waic == doctest::Approx(b.waic.waic).epsilon(1e-12));
  CHECK(a.waic.p_waic == doctest::Approx(b.waic.p_waic).epsilon(1e-12));
  CHECK(a.lpml.lpml == doctest::Approx(b.lpml.lpml).epsilon(1e-12));
  for (std::size_t i = 0; i < rows.size(); ++i)
    CHECK(b.lpml.log_cpo[i] == doctest::Approx(a.lpml.log_cpo[static_cast<std::size_t>(rows[i])]).epsilon(1e-12));
}

TEST_CASE("LPML flags rows dominated by a few samples") {
  auto t = random_table(4, 400, 11);
  for (Eigen::Index s = 0; s < 400; ++s) t.log_lik(2, s) = s == 17 ? -40.0 : -1.0;
  const auto l = lpml(t);
  CHECK(l.unreliable[2]);
  CHECK_FALSE(l.unreliable[0]);
  CHECK(l.unreliable_count >= 1);
}

TEST_CASE("table validation") {
  auto t = random_table(5, 99, 12);
  CHECK_THROWS_AS(dic(t), std::invalid_argument);
  t = random_table(5, 150, 12);
  t.log_lik(1, 3) = NAN;
  CHECK_THROWS_AS(waic(t), std::invalid_argument);
  t = random_table(5, 150, 12);
  t.log_lik_at_mean.resize(4);
  CHECK_THROWS_AS(lpml(t), std::invalid_argument);
}
