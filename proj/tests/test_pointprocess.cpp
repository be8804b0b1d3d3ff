#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vse/grf.hpp"
#include "vse/pointprocess.hpp"
#include "vse/rng.hpp"

using namespace vse;

namespace {

LogIntensitySurface constant_surface(const GridSpec& g, double log_lambda) {
  LogIntensitySurface s;
  s.log_intensity = RasterGrid(g, log_lambda);
  return s;
}

}  // namespace

TEST_CASE("q_probability") {
  for (double z : {0.0, 0.5, 16.0, 1e6}) CHECK(q_probability(0.0, z) == 1.0);
  CHECK(q_probability(0.5, 16.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  CHECK(q_probability(0.5, 16.0) == doctest::Approx(0.1353).epsilon(1e-3));
  const double far = q_probability(3.0, 0.86);
  CHECK(far >= 0.019);
  CHECK(far <= 0.023);
  CHECK(q_probability(7.0, 0.0) == 1.0);
  // strictly decreasing in both arguments
  CHECK(q_probability(1.0, 2.0) < q_probability(0.9, 2.0));
  CHECK(q_probability(1.0, 2.0) < q_probability(1.0, 1.9));
  CHECK_THROWS(q_probability(-1.0, 1.0));
  CHECK_THROWS(q_probability(1.0, -1.0));
  CHECK_THROWS(q_probability(std::nan(""), 1.0));
}

TEST_CASE("integration scheme weights sum to the domain area") {
  const Rect domain{0.13, -0.4, 7.71, 3.3};
  const auto g = GridSpec::covering(domain, 17);
  const auto s = make_integration_scheme(GridSpec{g.x0 - 0.21, g.y0 - 0.1, g.cell, g.nx + 1, g.ny + 1}, domain);
  CHECK(std::abs(s.total_weight() - domain.area()) <= 1e-9 * domain.area());
  for (double w : s.weights) CHECK(w > 0.0);
}

TEST_CASE("simulate_lgcp constant intensity mean count") {
  const Rect unit{0, 0, 1, 1};
  const auto surf = constant_surface(GridSpec{0, 0, 0.1, 10, 10}, std::log(5.0));
  double total = 0.0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r) {
    const auto p = simulate_lgcp(surf, unit, derive_seed(99, {std::uint64_t(r)}));
    for (const auto& pt : p.points) REQUIRE(unit.contains(pt));
    total += p.size();
  }
  CHECK(std::abs(total / reps - 5.0) < 3.0 * std::sqrt(5.0) / std::sqrt(double(reps)));
}

TEST_CASE("simulate_lgcp edge cases") {
  const Rect unit{0, 0, 1, 1};
  const auto zero = constant_surface(GridSpec{0, 0, 0.1, 10, 10}, -std::numeric_limits<double>::infinity());
  CHECK(simulate_lgcp(zero, unit, 1).size() == 0);
  const auto hot = constant_surface(GridSpec{0, 0, 0.1, 10, 10}, 25.0);
  CHECK_THROWS_AS(simulate_lgcp(hot, unit, 1), std::overflow_error);
  SimulationOptions opt;
  opt.log_intensity_cap = 30.0;
  const auto mild = constant_surface(GridSpec{0, 0, 0.1, 10, 10}, 1.0);
  CHECK_NOTHROW(simulate_lgcp(mild, unit, 1, opt));
}

TEST_CASE("simulate_lgcp on a 160 km square with the simulation truths") {
  const Rect domain{0, 0, 160, 160};
  const GridSpec g = GridSpec::covering(domain, 80);
  // standardized smooth synthetic covariate
  const auto cov_raw = simulate_matern_field(g, MaternParams(1.0, 60.0), 5);
  RasterGrid cov = cov_raw;
  double m = 0, s = 0;
  for (double v : cov.values()) m += v;
  m /= cov.values().size();
  for (double v : cov.values()) s += (v - m) * (v - m);
  s = std::sqrt(s / cov.values().size());
  for (auto& v : cov.values()) v = (v - m) / s;
  const auto field = simulate_matern_field(g, MaternParams(std::sqrt(0.7), 34.0), 6);
  const std::vector<double> beta{-4.25, 0.82};
  const auto surf = make_log_intensity(std::span(&cov, 1), beta, &field);
  const auto a = simulate_lgcp(surf, domain, 123);
  const auto b = simulate_lgcp(surf, domain, 123);
  CHECK(a.size() > 0);
  CHECK(a.size() < 100000);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a.points[k].x == b.points[k].x);
    CHECK(a.points[k].y == b.points[k].y);
  }
}

TEST_CASE("thin") {
  const Rect unit{0, 0, 1, 1};
  const RoadNetwork road({{{0.0, 0.5}, {1.0, 0.5}}});
  const auto surf = constant_surface(GridSpec{0, 0, 0.05, 20, 20}, std::log(300.0));
  const auto pattern = simulate_lgcp(surf, unit, 4);
  REQUIRE(pattern.size() > 100);

  SUBCASE("zeta = 0 keeps everything") {
    const auto t = thin(pattern, ThinningConfig{0.0, {}}, road, 1);
    CHECK(t.size() == pattern.size());
  }
  SUBCASE("points on roads are always kept") {
    PointPattern on{{}, unit};
    for (int k = 0; k < 50; ++k) on.points.push_back({k / 50.0, 0.5});
    CHECK(thin(on, ThinningConfig{1000.0, {}}, road, 9).size() == 50);
  }
  SUBCASE("expected retention matches the mean of q") {
    const double zeta = 20.0;
    const auto d = distances_to_roads(pattern.points, road);
    double mean_q = 0.0, var_q = 0.0;
    for (double v : d) mean_q += q_probability(v, zeta);
    mean_q /= d.size();
    for (double v : d) var_q += q_probability(v, zeta) * (1 - q_probability(v, zeta));
    const double n = pattern.size();
    const int reps = 500;
    double kept = 0.0;
    for (int r = 0; r < reps; ++r) {
      const auto t = thin(pattern, ThinningConfig{zeta, {}}, road, derive_seed(5, {std::uint64_t(r)}));
      for (const auto& p : t.points) REQUIRE(std::find_if(pattern.points.begin(), pattern.points.end(), [&](const Point& o) { return o.x == p.x && o.y == p.y; }) != pattern.points.end());
      kept += t.size() / n;
    }
    // per-replicate fraction has variance sum q(1-q) / n^2
    const double se = std::sqrt(var_q) / n / std::sqrt(double(reps));
    CHECK(std::abs(kept / reps - mean_q) < 3.0 * se);
  }
  SUBCASE("removal fraction increases with zeta and patterns are nested") {
    const std::vector<double> zetas{0.0, 1.0, 8.0, 16.0};
    std::vector<double> removed(zetas.size(), 0.0);
    for (int r = 0; r < 100; ++r) {
      std::size_t prev = pattern.size() + 1;
      for (std::size_t z = 0; z < zetas.size(); ++z) {
        const auto t = thin(pattern, ThinningConfig{zetas[z], {}}, road, derive_seed(77, {std::uint64_t(r)}));
        CHECK(t.size() <= prev);
        prev = t.size();
        removed[z] += 1.0 - double(t.size()) / pattern.size();
      }
    }
    for (std::size_t z = 1; z < zetas.size(); ++z) CHECK(removed[z] > removed[z - 1]);
  }
}

TEST_CASE("a thinned LGCP is an LGCP with log-intensity shifted by log q") {
  const Rect unit{0, 0, 1, 1};
  const RoadNetwork road({{{0.0, 0.3}, {1.0, 0.7}}});
  const GridSpec g{0, 0, 1.0 / 64, 64, 64};
  const auto base = constant_surface(g, std::log(200.0));
  const double zeta = 30.0;
  const auto dist = distance_raster(g, road);
  auto shifted = base;
  for (std::size_t c = 0; c < g.size(); ++c)
    shifted.log_intensity[c] += std::log(q_probability(dist[c], zeta));

  std::vector<double> thinned_counts, direct_counts;
  for (int r = 0; r < 500; ++r) {
    const auto p = simulate_lgcp(base, unit, derive_seed(1, {std::uint64_t(r)}));
    thinned_counts.push_back(double(thin(p, ThinningConfig{zeta, {}}, road, derive_seed(2, {std::uint64_t(r)})).size()));
    direct_counts.push_back(double(simulate_lgcp(shifted, unit, derive_seed(3, {std::uint64_t(r)})).size()));
  }
  const auto ks = ks_two_sample(thinned_counts, direct_counts);
  CHECK(ks.p_value > 0.01);
}

TEST_CASE("loglik_lgcp closed forms") {
  const Rect unit{0, 0, 1, 1};
  const auto scheme = make_integration_scheme(GridSpec{0, 0, 0.25, 4, 4}, unit);
  const std::vector<double> zeros(scheme.nodes.size(), 0.0);
  PointPattern empty{{}, unit};
  CHECK(loglik_lgcp(empty, zeros, {}, scheme) == doctest::Approx(-1.0).epsilon(1e-14));

  PointPattern one{{{0.3, 0.3}}, unit};
  double best_c = 0.0, best = -1e300;
  for (int k = -20; k <= 20; ++k) {
    const double c = k * 0.05;
    const std::vector<double> nodes(scheme.nodes.size(), c);
    const std::vector<double> pts{c};
    const double ll = loglik_lgcp(one, nodes, pts, scheme);
    CHECK(ll == doctest::Approx(-std::exp(c) + c).epsilon(1e-13));
    if (ll > best) best = ll, best_c = c;
  }
  CHECK(std::abs(best_c) < 1e-12);

  CHECK_THROWS(loglik_lgcp(one, zeros, {}, scheme));
  CHECK_THROWS(loglik_lgcp(one, std::vector<double>(3, 0.0), std::vector<double>{0.0}, scheme));
}

TEST_CASE("loglik_lgcp is invariant to relabeling nodes") {
  const Rect unit{0, 0, 1, 1};
  auto scheme = make_integration_scheme(GridSpec{0, 0, 0.1, 10, 10}, unit);
  std::vector<double> eta(scheme.nodes.size());
  for (std::size_t k = 0; k < eta.size(); ++k) eta[k] = std::sin(scheme.nodes[k].x * 3) + scheme.nodes[k].y;
  PointPattern pts{{{0.1, 0.2}, {0.7, 0.9}}, unit};
  const std::vector<double> pe{0.4, -0.2};
  const double ref = loglik_lgcp(pts, eta, pe, scheme);
  Rng rng(8);
  std::vector<std::size_t> perm(eta.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  IntegrationScheme shuffled;
  std::vector<double> eta2;
  for (auto k : perm) {
    shuffled.nodes.push_back(scheme.nodes[k]);
    shuffled.weights.push_back(scheme.weights[k]);
    eta2.push_back(eta[k]);
  }
  CHECK(loglik_lgcp(pts, eta2, pe, shuffled) == doctest::Approx(ref).epsilon(1e-13));
}

TEST_CASE("loglik_lgcp midpoint rule converges at second order") {
  const Rect unit{0, 0, 1, 1};
  auto eta = [](const Point& p) { return std::sin(2.0 * p.x) + 0.5 * std::cos(3.0 * p.y) + p.x * p.y; };
  PointPattern pts{{{0.2, 0.3}, {0.8, 0.1}}, unit};
  const std::vector<double> pe{eta(pts.points[0]), eta(pts.points[1])};
  std::vector<double> values;
  for (int n : {4, 8, 16, 32}) {
    const auto s = make_integration_scheme(GridSpec{0, 0, 1.0 / n, n, n}, unit);
    std::vector<double> ne;
    for (const auto& p : s.nodes) ne.push_back(eta(p));
    values.push_back(loglik_lgcp(pts, ne, pe, s));
  }
  for (std::size_t k = 2; k < values.size(); ++k) {
    const double prev = std::abs(values[k - 1] - values[k - 2]);
    const double cur = std::abs(values[k] - values[k - 1]);
    CHECK(prev / cur >= 3.0);
  }
}
