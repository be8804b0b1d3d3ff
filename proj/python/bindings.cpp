#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vse/io.hpp"
#include "vse/simstudy.hpp"
#include "vse/synthetic.hpp"

namespace py = pybind11;
using namespace vse;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Rasters cross the boundary as (ny, nx) arrays whose row j is GridSpec row
// j, i.e. row 0 is the bottom (southern) row.
RasterGrid to_raster(const Array& a, const GridSpec& g) {
  if (a.ndim() != 2 || a.shape(0) != g.ny || a.shape(1) != g.nx)
    throw std::invalid_argument("raster array must have shape (ny, nx)");
  return RasterGrid(g, std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_raster(const RasterGrid& r) {
  Array a({r.spec().ny, r.spec().nx});
  std::copy(r.values().begin(), r.values().end(), a.mutable_data());
  return a;
}

std::vector<Point> to_points(const Array& a) {
  if (a.ndim() != 2 || (a.shape(1) != 2 && a.size() != 0)) throw std::invalid_argument("points must have shape (n, 2)");
  std::vector<Point> p(static_cast<std::size_t>(a.shape(0)));
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = {a.data()[2 * i], a.data()[2 * i + 1]};
  return p;
}

Array from_points(const std::vector<Point>& p) {
  Array a({static_cast<py::ssize_t>(p.size()), py::ssize_t{2}});
  for (std::size_t i = 0; i < p.size(); ++i) {
    a.mutable_data()[2 * i] = p[i].x;
    a.mutable_data()[2 * i + 1] = p[i].y;
  }
  return a;
}

RoadNetwork to_roads(const std::vector<Array>& lines) {
  std::vector<std::vector<Point>> out;
  for (const auto& l : lines) out.push_back(to_points(l));
  return RoadNetwork(std::move(out));
}

Rect to_rect(const std::array<double, 4>& r) {
  Rect out{r[0], r[1], r[2], r[3]};
  out.validate();
  return out;
}

py::dict summary_dict(const ParameterSummary& s) {
  py::dict d;
  d["mean"] = s.mean;
  d["sd"] = s.sd;
  d["q0.025"] = s.q025;
  d["q0.5"] = s.q50;
  d["q0.975"] = s.q975;
  return d;
}

py::dict scores_dict(const ModelScores& s) {
  py::dict d;
  d["dic"] = s.dic.dic;
  d["p_d"] = s.dic.p_d;
  d["waic"] = s.waic.waic;
  d["p_waic"] = s.waic.p_waic;
  d["lpml"] = s.lpml.lpml;
  d["unreliable_cpo"] = s.lpml.unreliable_count;
  return d;
}

PointwiseLikelihoodTable to_table(const Eigen::MatrixXd& log_lik, const Eigen::VectorXd& at_mean) {
  PointwiseLikelihoodTable t;
  t.log_lik = log_lik;
  t.log_lik_at_mean = at_mean;
  return t;
}

struct PyFit {
  FitResult result;
  MeshConfig mesh;
  bool mean_correction = true;

  py::dict summaries() const {
    py::dict d;
    for (const auto& s : result.summaries) d[py::str(s.name)] = summary_dict(s);
    return d;
  }
  py::object scores() const { return result.scores ? py::object(scores_dict(*result.scores)) : py::none(); }

  std::pair<Array, Array> predict(std::size_t samples, std::uint64_t seed) const {
    const auto p = predict_intensity(result, result.model->covariates().front().spec(), samples, seed);
    return {from_raster(p.median), from_raster(p.sd)};
  }

  py::dict draws(std::size_t n, std::uint64_t seed) const {
    std::vector<std::string> names;
    const auto d = posterior_parameter_draws(result, n, seed, &names);
    py::dict out;
    for (std::size_t k = 0; k < names.size(); ++k) out[py::str(names[k])] = py::array(py::cast(d[k]));
    return out;
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "LGCP fitting with and without road-distance thinning of sampling effort";

  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init([](double x0, double y0, double cell, int nx, int ny) {
             GridSpec g{x0, y0, cell, nx, ny};
             g.validate();
             return g;
           }),
           py::arg("x0"), py::arg("y0"), py::arg("cell"), py::arg("nx"), py::arg("ny"))
      .def_readonly("x0", &GridSpec::x0)
      .def_readonly("y0", &GridSpec::y0)
      .def_readonly("cell", &GridSpec::cell)
      .def_readonly("nx", &GridSpec::nx)
      .def_readonly("ny", &GridSpec::ny)
      .def("__repr__", [](const GridSpec& g) {
        return "GridSpec(x0=" + std::to_string(g.x0) + ", y0=" + std::to_string(g.y0) +
               ", cell=" + std::to_string(g.cell) + ", nx=" + std::to_string(g.nx) + ", ny=" + std::to_string(g.ny) + ")";
      });

  m.def("q_probability", py::vectorize(q_probability), py::arg("distance"), py::arg("zeta"),
        "Retention probability exp(-zeta d^2 / 2).");
  m.def(
      "distances_to_roads",
      [](const Array& pts, const std::vector<Array>& roads) {
        const auto d = distances_to_roads(to_points(pts), to_roads(roads));
        return py::array(py::cast(d));
      },
      py::arg("points"), py::arg("roads"));
  m.def(
      "ks_two_sample",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = ks_two_sample(a, b);
        return std::make_pair(r.statistic, r.p_value);
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "pearson_corr", [](const std::vector<double>& a, const std::vector<double>& b) { return pearson_corr(a, b); },
      py::arg("a"), py::arg("b"));
  m.def(
      "ecdf",
      [](const std::vector<double>& values, const std::vector<double>& at) {
        const Ecdf e(values);
        std::vector<double> out;
        for (double x : at) out.push_back(e(x));
        return py::array(py::cast(out));
      },
      py::arg("values"), py::arg("at"));

  m.def(
      "simulate_matern_field",
      [](const GridSpec& g, double sigma, double rho, std::uint64_t seed) {
        return from_raster(simulate_matern_field(g, MaternParams(sigma, rho), seed));
      },
      py::arg("grid"), py::arg("sigma"), py::arg("rho"), py::arg("seed"));
  m.def(
      "simulate_lgcp",
      [](const Array& log_intensity, const GridSpec& g, std::array<double, 4> domain, std::uint64_t seed) {
        LogIntensitySurface s;
        s.log_intensity = to_raster(log_intensity, g);
        s.beta = {0.0};
        return from_points(simulate_lgcp(s, to_rect(domain), seed).points);
      },
      py::arg("log_intensity"), py::arg("grid"), py::arg("domain"), py::arg("seed"));
  m.def(
      "thin",
      [](const Array& pts, const std::vector<Array>& roads, double zeta, std::uint64_t seed) {
        PointPattern p;
        p.points = to_points(pts);
        const auto d = distances_to_roads(p.points, to_roads(roads));
        Rect bound{-1e300, -1e300, 1e300, 1e300};
        p.domain = bound;
        return from_points(thin_by_distance(p, d, zeta, seed).points);
      },
      py::arg("points"), py::arg("roads"), py::arg("zeta"), py::arg("seed"));

  m.def(
      "synthetic_domain",
      [](double side, int raster_cells, int distance_cells, std::uint64_t seed) {
        SyntheticConfig c;
        c.side = side;
        c.raster_cells = raster_cells;
        c.distance_cells = distance_cells;
        c.seed = seed;
        const auto d = make_synthetic_domain(c);
        py::dict out;
        out["domain"] = std::array<double, 4>{d.domain.xmin, d.domain.ymin, d.domain.xmax, d.domain.ymax};
        out["grid"] = d.covariate.spec();
        out["covariate"] = from_raster(d.covariate);
        out["distance"] = from_raster(d.distance);
        out["fine_grid"] = d.fine_distance.spec();
        out["fine_distance"] = from_raster(d.fine_distance);
        py::list roads;
        for (const auto& l : d.roads.polylines()) roads.append(from_points(l));
        out["roads"] = roads;
        out["correlation"] = d.correlation;
        return out;
      },
      py::arg("side") = 120.0, py::arg("raster_cells") = 100, py::arg("distance_cells") = 300,
      py::arg("seed") = SyntheticConfig{}.seed);

  py::class_<PyFit>(m, "Fit")
      .def_property_readonly("summaries", &PyFit::summaries)
      .def_property_readonly("scores", &PyFit::scores)
      .def_property_readonly("model", [](const PyFit& f) { return f.result.spec.use_vse ? "vse" : "naive"; })
      .def_property_readonly("node_count", [](const PyFit& f) { return f.result.nodes.size(); })
      .def_property_readonly("diagnostics", [](const PyFit& f) { return f.result.diagnostics; })
      .def("predict", &PyFit::predict, py::arg("samples") = 1000, py::arg("seed") = 1,
           "Per-cell median and sd of log intensity (without q) on the covariate grid.")
      .def("parameter_draws", &PyFit::draws, py::arg("n"), py::arg("seed") = 1)
      .def("to_json", [](const PyFit& f) { return fit_to_json(f.result, f.mesh, f.mean_correction); });

  m.def(
      "fit",
      [](const Array& points, std::array<double, 4> domain, const std::vector<Array>& covariates, const GridSpec& grid,
         std::optional<std::vector<Array>> roads, const std::string& model, std::optional<std::vector<std::string>> names,
         double rho0, double sigma0, double theta_mean, double theta_precision, std::optional<double> fixed_zeta,
         int mesh_cells, std::uint64_t seed, int threads, int summary_draws, int assess_samples) {
        if (model != "naive" && model != "vse") throw std::invalid_argument("model must be 'naive' or 'vse'");
        PointPattern p;
        p.points = to_points(points);
        p.domain = to_rect(domain);
        std::vector<RasterGrid> covs;
        for (const auto& c : covariates) covs.push_back(to_raster(c, grid));
        ModelSpec spec;
        if (names) spec.covariate_names = *names;
        else
          for (std::size_t k = 0; k < covs.size(); ++k) spec.covariate_names.push_back("x" + std::to_string(k + 1));
        spec.use_vse = model == "vse";
        spec.pc_prior.rho0 = rho0;
        spec.pc_prior.sigma0 = sigma0;
        spec.theta_prior = {theta_mean, theta_precision};
        spec.fixed_zeta = fixed_zeta;
        FitOptions o;
        o.mesh.cells = mesh_cells;
        o.seed = seed;
        o.threads = threads;
        o.summary_draws = summary_draws;
        o.assess_samples = assess_samples;
        std::optional<RoadNetwork> net;
        if (roads) net = to_roads(*roads);
        PyFit f;
        {
          py::gil_scoped_release release;
          f.result = vse::fit(p, covs, net ? &*net : nullptr, spec, o);
        }
        f.mesh = o.mesh;
        f.mean_correction = o.mean_correction;
        return f;
      },
      py::arg("points"), py::arg("domain"), py::arg("covariates"), py::arg("grid"), py::arg("roads") = py::none(),
      py::arg("model") = "vse", py::arg("names") = py::none(), py::arg("rho0") = 15.0, py::arg("sigma0") = 1.0,
      py::arg("theta_mean") = 1.0, py::arg("theta_precision") = 0.05, py::arg("fixed_zeta") = py::none(),
      py::arg("mesh_cells") = 20, py::arg("seed") = 1, py::arg("threads") = 1, py::arg("summary_draws") = 20000,
      py::arg("assess_samples") = 1000);

  m.def(
      "dic",
      [](const Eigen::MatrixXd& ll, const Eigen::VectorXd& at_mean) {
        const auto d = dic(to_table(ll, at_mean));
        return py::dict(py::arg("dic") = d.dic, py::arg("p_d") = d.p_d, py::arg("d_bar") = d.d_bar,
                        py::arg("degenerate") = d.degenerate);
      },
      py::arg("log_lik"), py::arg("log_lik_at_mean"), "Rows are observations, columns posterior samples.");
  m.def(
      "waic",
      [](const Eigen::MatrixXd& ll) {
        PointwiseLikelihoodTable t = to_table(ll, ll.rowwise().mean());
        const auto w = waic(t);
        return py::dict(py::arg("waic") = w.waic, py::arg("p_waic") = w.p_waic, py::arg("lppd") = w.lppd);
      },
      py::arg("log_lik"));
  m.def(
      "lpml",
      [](const Eigen::MatrixXd& ll) {
        const auto l = lpml(to_table(ll, ll.rowwise().mean()));
        return py::dict(py::arg("lpml") = l.lpml, py::arg("log_cpo") = l.log_cpo,
                        py::arg("unreliable") = l.unreliable_count);
      },
      py::arg("log_lik"));

  m.def(
      "simstudy",
      [](int replicates, std::vector<double> levels, bool self_test, const std::string& preset,
         const std::string& models, std::uint64_t seed, int threads, double side, int raster_cells,
         int distance_cells, int mesh_cells) {
        ScenarioConfig c;
        c.replicates = replicates;
        c.zeta_levels = std::move(levels);
        c.self_test = self_test;
        c.theta_prior = preset == "informative" ? ThetaPreset::kInformative : ThetaPreset::kDefault;
        c.fit_naive = models != "vse";
        c.fit_vse = models != "naive";
        c.seed = seed;
        c.threads = threads;
        c.fit.mesh.cells = mesh_cells;
        c.fit.summary_draws = 2000;
        SyntheticConfig sc;
        sc.side = side;
        sc.raster_cells = raster_cells;
        sc.distance_cells = distance_cells;
        ScenarioResult r;
        {
          py::gil_scoped_release release;
          r = run_scenarios(c, make_synthetic_domain(sc));
        }
        py::list rows;
        for (const auto& s : summarize(r))
          rows.append(py::dict(py::arg("scenario") = s.scenario, py::arg("zeta") = s.level * r.zeta_scale,
                               py::arg("model") = s.model, py::arg("parameter") = s.parameter,
                               py::arg("bias") = s.bias, py::arg("rmse") = s.rmse,
                               py::arg("coverage") = s.coverage, py::arg("replicates") = s.replicates));
        return rows;
      },
      py::arg("replicates") = 20, py::arg("levels") = std::vector<double>{0.0, 1.0, 8.0, 16.0},
      py::arg("self_test") = false, py::arg("preset") = "default", py::arg("models") = "both", py::arg("seed") = 1,
      py::arg("threads") = 1, py::arg("side") = 120.0, py::arg("raster_cells") = 100,
      py::arg("distance_cells") = 300, py::arg("mesh_cells") = 20);
}
