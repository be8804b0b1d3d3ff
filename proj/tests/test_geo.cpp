#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "vse/geo.hpp"
#include "vse/rng.hpp"

using namespace vse;

namespace {

RoadNetwork random_network(Rng& rng, int lines, int verts) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<std::vector<Point>> pl;
  for (int l = 0; l < lines; ++l) {
    std::vector<Point> line;
    for (int v = 0; v < verts; ++v) line.push_back({u(rng), u(rng)});
    pl.push_back(line);
  }
  return RoadNetwork(pl);
}

// brute force over densified vertices; error bounded by half the spacing
double densified_distance(const Point& p, const RoadNetwork& roads, double spacing) {
  double best = 1e300;
  for (const auto& line : roads.polylines()) {
    for (std::size_t k = 0; k + 1 < line.size(); ++k) {
      const Point a = line[k], b = line[k + 1];
      const double len = std::hypot(b.x - a.x, b.y - a.y);
      const int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
      for (int s = 0; s <= n; ++s) {
        const double t = double(s) / n;
        best = std::min(best, std::hypot(a.x + t * (b.x - a.x) - p.x, a.y + t * (b.y - a.y) - p.y));
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("distance_to_roads geometry") {
  RoadNetwork road({{{0.0, 0.0}, {1.0, 0.0}}});
  CHECK(distance_to_roads({0.5, 0.0}, road) == 0.0);
  CHECK(distance_to_roads({0.4, 0.3}, road) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(distance_to_roads({2.0, 0.0}, road) == doctest::Approx(1.0));
  CHECK_THROWS(distance_to_roads({0, 0}, RoadNetwork{}));
  CHECK_THROWS(RoadNetwork({{{0.0, 0.0}}}));
  CHECK_THROWS(RoadNetwork({{{0.0, 0.0}, {std::nan(""), 1.0}}}));
}

TEST_CASE("distance_to_roads against densified brute force") {
  Rng rng(11);
  const auto roads = random_network(rng, 5, 4);
  const double spacing = 0.005;
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int k = 0; k < 50; ++k) {
    const Point p{u(rng), u(rng)};
    const double exact = distance_to_roads(p, roads);
    const double approx = densified_distance(p, roads, spacing);
    CHECK(approx >= exact - 1e-12);
    CHECK(approx - exact <= spacing);
  }
}

TEST_CASE("distance_to_roads is 1-Lipschitz") {
  Rng rng(5);
  const auto roads = random_network(rng, 4, 6);
  std::uniform_real_distribution<double> u(-2.0, 12.0);
  for (int k = 0; k < 500; ++k) {
    const Point p{u(rng), u(rng)}, q{u(rng), u(rng)};
    CHECK(std::abs(distance_to_roads(p, roads) - distance_to_roads(q, roads)) <=
          std::hypot(p.x - q.x, p.y - q.y) + 1e-12);
  }
}

TEST_CASE("distance_raster") {
  RoadNetwork road({{{-1.0, 5.05}, {11.0, 5.05}}});
  const GridSpec g{0.0, 0.0, 0.1, 100, 100};
  const auto r = distance_raster(g, road);
  // row j = 50 has centers at y = 5.05
  for (int i = 0; i < 100; ++i) CHECK(r(i, 50) == doctest::Approx(0.0).epsilon(1e-12));
  for (int j = 51; j < 100; ++j) CHECK(r(10, j) > r(10, j - 1));

  Rng rng(3);
  const auto net = random_network(rng, 3, 5);
  const auto r2 = distance_raster(g, net);
  std::uniform_int_distribution<int> ui(0, 99);
  for (int k = 0; k < 100; ++k) {
    const int i = ui(rng), j = ui(rng);
    CHECK(r2(i, j) == distance_to_roads(g.center(i, j), net));
  }
}

TEST_CASE("ecdf") {
  Ecdf e({3.0, 1.0, 2.0});
  CHECK(e(2.0) == doctest::Approx(2.0 / 3.0));
  CHECK(e(0.5) == 0.0);
  CHECK(e(3.0) == 1.0);
  CHECK(e(100.0) == 1.0);
  CHECK(e(1.999) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS(Ecdf({}));
}

TEST_CASE("ecdf DKW band holds for about 95% of seeds") {
  int inside = 0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(1000 + s);
    std::uniform_real_distribution<double> u;
    std::vector<double> v(1000);
    for (auto& x : v) x = u(rng);
    Ecdf e(v);
    double sup = 0.0;
    const auto& sv = e.sorted();
    for (std::size_t k = 0; k < sv.size(); ++k) {
      sup = std::max(sup, std::abs((k + 1.0) / sv.size() - sv[k]));
      sup = std::max(sup, std::abs(double(k) / sv.size() - sv[k]));
    }
    if (sup < 1.36 / std::sqrt(1000.0)) ++inside;
  }
  CHECK(inside >= 0.90 * seeds);
}

TEST_CASE("ks_two_sample") {
  std::vector<double> a{0.3, 1.2, 2.2, 5.0};
  auto same = ks_two_sample(a, a);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == 1.0);
  std::vector<double> x{1, 2, 3, 4}, y{5, 6, 7, 8};
  CHECK(ks_two_sample(x, y).statistic == 1.0);
  CHECK_THROWS(ks_two_sample(std::vector<double>{}, x));

  SUBCASE("statistic equals brute-force sup over pooled points") {
    Rng rng(9);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> s1(37 + rep), s2(53);
      for (auto& v : s1) v = std::round(nd(rng) * 4) / 4;  // ties on purpose
      for (auto& v : s2) v = std::round((nd(rng) + 0.3) * 4) / 4;
      Ecdf e1(s1), e2(s2);
      double d = 0.0;
      for (double v : s1) d = std::max(d, std::abs(e1(v) - e2(v)));
      for (double v : s2) d = std::max(d, std::abs(e1(v) - e2(v)));
      const auto r = ks_two_sample(s1, s2);
      CHECK(r.statistic == d);
      // symmetry and invariance under a monotone transform
      CHECK(ks_two_sample(s2, s1).statistic == r.statistic);
      std::vector<double> t1(s1), t2(s2);
      for (auto& v : t1) v = std::exp(3 * v);
      for (auto& v : t2) v = std::exp(3 * v);
      CHECK(ks_two_sample(t1, t2).statistic == r.statistic);
    }
  }
}

TEST_CASE("kolmogorov survival function values") {
  // reference values of 1 - K(x)
  CHECK(kolmogorov_survival(1.3581) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(kolmogorov_survival(1.2238) == doctest::Approx(0.10).epsilon(1e-3));
  CHECK(kolmogorov_survival(0.0) == 1.0);
  // both series agree in the overlap region
  CHECK(kolmogorov_survival(0.2) == doctest::Approx(kolmogorov_survival(0.19999999)).epsilon(1e-6));
  CHECK(kolmogorov_survival(0.1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pearson_corr") {
  std::vector<double> a{1, 2, 4, 7, 11};
  std::vector<double> b, c;
  for (double v : a) {
    b.push_back(2 * v + 1);
    c.push_back(-v);
  }
  CHECK(pearson_corr(a, b) == doctest::Approx(1.0));
  CHECK(pearson_corr(a, c) == doctest::Approx(-1.0));
  CHECK_THROWS(pearson_corr(a, std::vector<double>(5, 1.0)));
  CHECK_THROWS(pearson_corr(std::vector<double>{1}, std::vector<double>{2}));

  Rng rng(17);
  std::normal_distribution<double> nd;
  std::vector<double> x(500), y(500);
  for (int k = 0; k < 500; ++k) {
    x[k] = nd(rng);
    y[k] = 0.4 * x[k] + nd(rng);
  }
  // textbook two-pass formula
  double mx = 0, my = 0;
  for (int k = 0; k < 500; ++k) mx += x[k], my += y[k];
  mx /= 500, my /= 500;
  double sxy = 0, sxx = 0, syy = 0;
  for (int k = 0; k < 500; ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  CHECK(std::abs(pearson_corr(x, y) - sxy / std::sqrt(sxx * syy)) <= 1e-12);
}
