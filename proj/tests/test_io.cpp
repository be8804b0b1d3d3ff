#include <doctest.h>

#include <sstream>

#include "toy.hpp"
#include "vse/io.hpp"

using namespace vse;

TEST_CASE("ASCII grid round trip and orientation") {
  std::istringstream in(
      "ncols 3\nNROWS 2\nxllcorner 10\nyllcorner 20\ncellsize 0.5\nNODATA_value -9999\n"
      "1 2 3\n4 5 -9999\n");
  const auto g = read_ascii_grid(in);
  CHECK(g.spec().nx == 3);
  CHECK(g.spec().ny == 2);
  CHECK(g.spec().x0 == 10.0);
  CHECK(g(0, 1) == 1.0);  // top row first in the file
  CHECK(g(0, 0) == 4.0);
  CHECK(g.is_nodata(g.spec().index(2, 0)));
  std::stringstream out;
  write_ascii_grid(g, out);
  const auto h = read_ascii_grid(out);
  CHECK(h.values() == g.values());
  CHECK(h.spec().congruent(g.spec()));
  CHECK(h.nodata() == g.nodata());
}

TEST_CASE("ASCII grid center header") {
  std::istringstream in("ncols 1\nnrows 1\nxllcenter 1\nyllcenter 1\ncellsize 2\n7\n");
  const auto g = read_ascii_grid(in);
  CHECK(g.spec().x0 == 0.0);
  CHECK(g.spec().y0 == 0.0);
}

TEST_CASE("ASCII grid errors carry line numbers") {
  std::istringstream bad("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 x\n");
  try {
    read_ascii_grid(bad, "g.asc");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 7);
    CHECK(std::string(e.what()).find("g.asc:7:") == 0);
  }
  std::istringstream short_in("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n");
  CHECK_THROWS_AS(read_ascii_grid(short_in), ParseError);
  std::istringstream no_cell("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\n1 2\n");
  CHECK_THROWS_AS(read_ascii_grid(no_cell), ParseError);
}

TEST_CASE("roads from GeoJSON and CSV") {
  std::istringstream gj(R"({"type":"FeatureCollection","features":[
    {"type":"Feature","properties":{},"geometry":{"type":"LineString","coordinates":[[0,0],[1,0],[1,1]]}},
    {"type":"Feature","properties":{},"geometry":{"type":"MultiLineString","coordinates":[[[2,2],[3,3]],[[4,4],[5,5]]]}}]})");
  const auto r = read_roads_geojson(gj);
  REQUIRE(r.polylines().size() == 3);
  CHECK(r.polylines()[0].size() == 3);
  CHECK(r.polylines()[2][1].x == 5.0);

  std::stringstream csv;
  write_roads_csv(r, csv);
  const auto back = read_roads_csv(csv);
  REQUIRE(back.polylines().size() == 3);
  CHECK(back.polylines()[0][2].y == 1.0);

  std::stringstream js;
  write_roads_geojson(r, js);
  CHECK(read_roads_geojson(js).segment_count() == r.segment_count());

  // vertices may arrive out of order
  std::istringstream shuffled("polyline_id,vertex_index,x,y\na,1,1,0\na,0,0,0\nb,0,5,5\nb,1,6,6\n");
  const auto s = read_roads_csv(shuffled);
  CHECK(s.polylines()[0][0].x == 0.0);

  std::istringstream broken(R"({"type":"FeatureCollection",
  "features": [ oops ]})");
  try {
    read_roads_geojson(broken, "r.geojson");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream single("id,vertex,x,y\na,0,1,1\n");
  CHECK_THROWS_AS(read_roads_csv(single), ParseError);
}

TEST_CASE("points CSV") {
  std::istringstream a("id,y,x\n1,2.5,3.5\n2,4,5\n");
  const auto p = read_points_csv(a);
  REQUIRE(p.size() == 2);
  CHECK(p[0].x == 3.5);
  CHECK(p[0].y == 2.5);
  std::istringstream b("1,2\n3,4\n\n");
  CHECK(read_points_csv(b).size() == 2);
  std::istringstream c("x,y\n1,2\n3,nan?\n");
  try {
    read_points_csv(c, "p.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::stringstream out;
  const std::vector<Point> pts{{0.1, 0.2}, {1.0 / 3.0, 2.0 / 3.0}};
  write_points_csv(pts, out);
  const auto back = read_points_csv(out);
  CHECK(back[1].x == pts[1].x);
  CHECK(back[1].y == pts[1].y);
}

TEST_CASE("fit JSON restores the fit") {
  const auto toy = testing::make_toy(12, 1.0, 0.5, 0.5, 4.0, 31);
  ModelSpec spec;
  spec.covariate_names = {"x"};
  spec.use_vse = true;
  spec.pc_prior.rho0 = 3.0;
  FitOptions opt;
  opt.mesh.cells = 12;
  opt.summary_draws = 4000;
  opt.assess_samples = 200;
  const auto f = fit(toy.pattern, toy.covariates, &toy.roads, spec, opt);
  const std::string text = fit_to_json(f, opt.mesh, opt.mean_correction, R"({"inputs":{"points":"p.csv"}})");
  const auto saved = fit_from_json(text);
  CHECK(saved.spec.use_vse);
  CHECK(saved.spec.pc_prior.rho0 == 3.0);
  CHECK(saved.nodes.size() == f.nodes.size());
  CHECK(saved.scores.has_value());
  CHECK(text.find("\"inputs\"") != std::string::npos);

  auto model = std::make_shared<LatentModel>(toy.pattern, toy.covariates, &toy.roads, saved.spec, saved.mesh);
  FitOptions ropt = opt;
  ropt.seed = saved.seed;
  ropt.assess_samples = 0;
  const auto r = rebuild_fit(model, saved.grid, saved.nodes, saved.modes, ropt);
  for (const char* name : {"beta0", "beta1"}) {
    CHECK(r.summary(name).mean == doctest::Approx(f.summary(name).mean).epsilon(1e-6));
    CHECK(r.summary(name).sd == doctest::Approx(f.summary(name).sd).epsilon(1e-6));
  }
  CHECK_THROWS_AS(fit_from_json("{\"model\": 3}"), ParseError);
}
