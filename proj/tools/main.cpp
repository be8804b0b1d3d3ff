// vse: command-line driver. Every subcommand writes its artifacts plus a
// manifest.json into --out.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vse/io.hpp"
#include "vse/simstudy.hpp"
#include "vse/synthetic.hpp"

#ifndef VSE_VERSION
#define VSE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vse;

namespace {

struct Common {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out = "vse_out";
};

std::string precise(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

// Resolved settings of the global options and the active subcommand.
std::string config_echo(const CLI::App& root, const std::string& sub) {
  std::istringstream all(root.config_to_str(true, false));
  std::string line, out;
  while (std::getline(all, line)) {
    const auto eq = line.find('=');
    const auto dot = line.find('.');
    if (eq == std::string::npos) continue;
    if (dot == std::string::npos || dot > eq || line.compare(0, sub.size() + 1, sub + ".") == 0) out += line + "\n";
  }
  return out;
}

class Run {
 public:
  Run(std::string command, const CLI::App& root, const Common& c)
      : command_(std::move(command)), root_(root), common_(c), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(common_.out);
  }

  fs::path path(const std::string& name) {
    outputs_.push_back(name);
    return fs::path(common_.out) / name;
  }

  std::ofstream open(const std::string& name) {
    std::ofstream f(path(name));
    if (!f) throw std::runtime_error("cannot write " + (fs::path(common_.out) / name).string());
    return f;
  }

  json info = json::object();

  void finish() {
    for (const auto& o : outputs_)
      if (!fs::exists(fs::path(common_.out) / o)) throw std::runtime_error("artifact missing: " + o);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const std::time_t now = std::time(nullptr);
    std::ostringstream ts;
    ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
    json m{{"command", command_},
           {"seed", common_.seed},
           {"threads", common_.threads},
           {"version", VSE_VERSION},
           {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                         std::to_string(EIGEN_MINOR_VERSION)},
           {"finished_utc", ts.str()},
           {"wall_seconds", secs},
           {"config", config_echo(root_, command_)},
           {"outputs", outputs_},
           {"info", info}};
    std::ofstream f(fs::path(common_.out) / "manifest.json");
    f << m.dump(2) << '\n';
    if (!f) throw std::runtime_error("cannot write manifest");
  }

 private:
  std::string command_;
  const CLI::App& root_;
  Common common_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> outputs_;
};

Rect parse_rect(const std::vector<double>& v) {
  if (v.size() != 4) throw std::invalid_argument("--domain takes xmin ymin xmax ymax");
  Rect r{v[0], v[1], v[2], v[3]};
  r.validate();
  return r;
}

Rect bounding_rect(std::span<const Point> pts) {
  if (pts.empty()) throw std::invalid_argument("no points to bound");
  Rect r{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
  for (const auto& p : pts) {
    r.xmin = std::min(r.xmin, p.x);
    r.ymin = std::min(r.ymin, p.y);
    r.xmax = std::max(r.xmax, p.x);
    r.ymax = std::max(r.ymax, p.y);
  }
  const double pad = 1e-9 * std::max(1.0, std::max(r.width(), r.height()));
  return {r.xmin - pad, r.ymin - pad, r.xmax + pad, r.ymax + pad};
}

// ---------------------------------------------------------------- explore

struct ExploreArgs {
  std::string points, roads, covariate;
  double grid_cell = 1.0;
  std::vector<double> domain;
  std::vector<double> thresholds{0.1, 0.25, 0.5, 1.0, 2.0, 5.0};
  int ecdf_points = 200;
};

void cmd_explore(const ExploreArgs& a, Run& run) {
  const auto pts = read_points(a.points);
  const auto roads = read_roads(a.roads);
  std::optional<RasterGrid> cov;
  if (!a.covariate.empty()) cov = read_ascii_grid(a.covariate);
  const Rect dom = !a.domain.empty() ? parse_rect(a.domain) : cov ? cov->spec().bounds() : bounding_rect(pts);
  const auto nx = static_cast<int>(std::ceil(dom.width() / a.grid_cell - 1e-9));
  const auto ny = static_cast<int>(std::ceil(dom.height() / a.grid_cell - 1e-9));
  const GridSpec ref{dom.xmin, dom.ymin, a.grid_cell, nx, ny};
  const auto dp = distances_to_roads(pts, roads);
  std::vector<double> dg;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const Point c = ref.center(k);
    if (dom.contains(c)) dg.push_back(distance_to_roads(c, roads));
  }
  const Ecdf ep(dp), eg(dg);

  auto sum = run.open("distance_summary.csv");
  sum << "set,n,mean,q0.05,q0.25,q0.5,q0.75,q0.95,max";
  for (double t : a.thresholds) sum << ",within_" << t;
  sum << '\n' << std::setprecision(10);
  for (const auto& [name, e] : {std::pair<const char*, const Ecdf*>{"points", &ep}, {"grid", &eg}}) {
    double mean = 0.0;
    for (double v : e->sorted()) mean += v / static_cast<double>(e->size());
    sum << name << ',' << e->size() << ',' << mean;
    for (double q : {0.05, 0.25, 0.5, 0.75, 0.95}) sum << ',' << e->quantile(q);
    sum << ',' << e->sorted().back();
    for (double t : a.thresholds) sum << ',' << (*e)(t);
    sum << '\n';
  }

  auto ec = run.open("ecdf.csv");
  ec << "distance,ecdf_points,ecdf_grid\n" << std::setprecision(10);
  const double top = std::max(ep.sorted().back(), eg.sorted().back());
  for (int k = 0; k <= a.ecdf_points; ++k) {
    const double x = top * k / a.ecdf_points;
    ec << x << ',' << ep(x) << ',' << eg(x) << '\n';
  }

  const auto ks = ks_two_sample(dp, dg);
  json res{{"n_points", dp.size()}, {"n_grid", dg.size()}, {"grid_cell", a.grid_cell},
           {"ks_statistic", ks.statistic}, {"ks_p_value", ks.p_value}};
  if (cov) {
    const auto dr = distance_raster(cov->spec(), roads);
    std::vector<double> x, d;
    for (std::size_t k = 0; k < cov->values().size(); ++k)
      if (!cov->is_nodata(k)) {
        x.push_back((*cov)[k]);
        d.push_back(dr[k]);
      }
    res["covariate_distance_correlation"] = pearson_corr(x, d);
  }
  auto js = run.open("explore.json");
  js << res.dump(2) << '\n';
  run.info = res;
}

// --------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string covariate, roads;
  SyntheticConfig synth;
  TrueParams truth;
};

void cmd_simulate(const SimulateArgs& a, const Common& c, Run& run) {
  RasterGrid cov;
  RoadNetwork roads;
  Rect dom;
  if (!a.covariate.empty()) {
    cov = read_ascii_grid(a.covariate);
    dom = cov.spec().bounds();
    if (!a.roads.empty()) roads = read_roads(a.roads);
  } else {
    const auto d = make_synthetic_domain(a.synth);
    cov = d.covariate;
    roads = d.roads;
    dom = d.domain;
    write_ascii_grid(d.distance, run.path("distance.asc"));
    run.info["covariate_distance_correlation"] = d.correlation;
  }
  const std::vector<RasterGrid> covs{cov};
  const double beta[2] = {a.truth.beta0, a.truth.beta1};
  const auto field = simulate_matern_field(cov.spec(), MaternParams(a.truth.sigma, a.truth.rho), derive_seed(c.seed, {1}));
  const auto surface = make_log_intensity(covs, beta, &field, {"x"});
  const auto pattern = simulate_lgcp(surface, dom, derive_seed(c.seed, {2}));
  auto p = run.open("points.csv");
  write_points_csv(pattern.points, p);
  write_ascii_grid(cov, run.path("covariate.asc"));
  write_ascii_grid(field, run.path("field.asc"));
  write_ascii_grid(surface.log_intensity, run.path("log_intensity.asc"));
  if (!roads.empty()) {
    auto r = run.open("roads.geojson");
    write_roads_geojson(roads, r);
  }
  run.info["points"] = pattern.size();
  run.info["domain"] = {dom.xmin, dom.ymin, dom.xmax, dom.ymax};
  run.info["truth"] = {{"beta0", a.truth.beta0}, {"beta1", a.truth.beta1}, {"rho", a.truth.rho}, {"sigma", a.truth.sigma}};
}

// ------------------------------------------------------------------- thin

struct ThinArgs {
  std::string points, roads;
  double zeta = 0.0;
};

void cmd_thin(const ThinArgs& a, const Common& c, Run& run) {
  PointPattern p;
  p.points = read_points(a.points);
  p.domain = bounding_rect(p.points);
  const auto roads = read_roads(a.roads);
  ThinningConfig cfg;
  cfg.zeta = a.zeta;
  const auto kept = thin(p, cfg, roads, derive_seed(c.seed, {3}));
  auto f = run.open("points.csv");
  write_points_csv(kept.points, f);
  run.info["input_points"] = p.size();
  run.info["kept_points"] = kept.size();
  run.info["zeta"] = a.zeta;
}

// -------------------------------------------------------------------- fit

struct FitArgs {
  std::string points, roads, distance, model = "vse";
  std::vector<std::string> covariates, names;
  std::vector<double> domain;
  int mesh_cells = 20;
  double extension = -1.0;
  int quadrature_per_cell = 2;
  double rho0 = 15.0, sigma0 = 1.0, alpha_rho = 0.05, alpha_sigma = 0.05;
  double theta_mean = 1.0, theta_precision = 0.05, beta_precision = 0.01;
  std::optional<double> fixed_zeta;
  int summary_draws = 20000, assess_samples = 1000;
  bool no_mean_correction = false;
};

struct Inputs {
  PointPattern pattern;
  std::vector<RasterGrid> covariates;
  RoadNetwork roads;
  std::optional<RasterGrid> distance;
  std::vector<std::string> names;
};

Inputs load_inputs(const FitArgs& a) {
  Inputs in;
  for (const auto& c : a.covariates) in.covariates.push_back(read_ascii_grid(c));
  in.names = a.names;
  if (in.names.empty())
    for (const auto& c : a.covariates) in.names.push_back(fs::path(c).stem().string());
  if (in.names.size() != in.covariates.size()) throw std::invalid_argument("one --name per --covariate required");
  in.pattern.points = read_points(a.points);
  in.pattern.domain = !a.domain.empty()            ? parse_rect(a.domain)
                      : !in.covariates.empty()     ? in.covariates[0].spec().bounds()
                                                   : bounding_rect(in.pattern.points);
  if (!a.roads.empty()) in.roads = read_roads(a.roads);
  if (!a.distance.empty()) in.distance = read_ascii_grid(a.distance);
  return in;
}

json inputs_json(const FitArgs& a) {
  auto abs = [](const std::string& p) { return p.empty() ? p : fs::absolute(p).string(); };
  std::vector<std::string> covs;
  for (const auto& c : a.covariates) covs.push_back(abs(c));
  return {{"points", abs(a.points)}, {"roads", abs(a.roads)}, {"distance", abs(a.distance)},
          {"covariates", covs},      {"names", a.names},      {"domain", a.domain}};
}

void cmd_fit(const FitArgs& a, const Common& c, Run& run) {
  const auto in = load_inputs(a);
  ModelSpec spec;
  spec.covariate_names = in.names;
  if (a.model != "naive" && a.model != "vse") throw std::invalid_argument("--model must be naive or vse");
  spec.use_vse = a.model == "vse";
  spec.pc_prior = {a.rho0, a.alpha_rho, a.sigma0, a.alpha_sigma};
  spec.theta_prior = {a.theta_mean, a.theta_precision};
  spec.beta_precision = a.beta_precision;
  spec.fixed_zeta = a.fixed_zeta;
  FitOptions o;
  o.mesh = {a.mesh_cells, a.extension, a.quadrature_per_cell};
  o.threads = c.threads;
  o.seed = c.seed;
  o.summary_draws = a.summary_draws;
  o.assess_samples = a.assess_samples;
  o.mean_correction = !a.no_mean_correction;
  o.distance = in.distance ? &*in.distance : nullptr;
  const auto f = fit(in.pattern, in.covariates, in.roads.empty() ? nullptr : &in.roads, spec, o);
  auto js = run.open("fit.json");
  js << fit_to_json(f, o.mesh, o.mean_correction, json{{"inputs", inputs_json(a)}}.dump()) << '\n';
  auto s = run.open("summary.csv");
  write_summary_csv(f.summaries, s);
  if (f.scores) {
    auto sc = run.open("scores.csv");
    const NamedScores row{a.model, *f.scores};
    write_comparison_csv(std::span(&row, 1), sc);
  }
  for (const auto& d : f.diagnostics) std::cerr << "note: " << d << '\n';
  run.info["points"] = in.pattern.size();
  run.info["model"] = a.model;
  run.info["nodes"] = f.nodes.size();
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string fit;
  int samples = 1000;
};

void cmd_predict(const PredictArgs& a, const Common& c, Run& run) {
  const std::string text = read_text_file(a.fit);
  const auto saved = fit_from_json(text, a.fit);
  const auto doc = json::parse(text);
  if (!doc.contains("inputs")) throw std::invalid_argument(a.fit + ": no recorded inputs");
  const auto& ij = doc["inputs"];
  FitArgs fa;
  fa.points = ij.at("points");
  fa.roads = ij.at("roads");
  fa.distance = ij.at("distance");
  fa.covariates = ij.at("covariates").get<std::vector<std::string>>();
  fa.names = ij.at("names").get<std::vector<std::string>>();
  fa.domain = ij.at("domain").get<std::vector<double>>();
  const auto in = load_inputs(fa);
  if (in.covariates.empty()) throw std::invalid_argument("predict needs a covariate raster as the target grid");
  auto model = std::make_shared<LatentModel>(in.pattern, in.covariates, in.roads.empty() ? nullptr : &in.roads,
                                             saved.spec, saved.mesh, in.distance ? &*in.distance : nullptr);
  FitOptions o;
  o.mesh = saved.mesh;
  o.seed = saved.seed;
  o.threads = c.threads;
  o.mean_correction = saved.mean_correction;
  o.assess_samples = 0;
  o.summary_draws = 2000;
  const auto f = rebuild_fit(model, saved.grid, saved.nodes, saved.modes, o);
  const auto p = predict_intensity(f, in.covariates[0].spec(), static_cast<std::size_t>(a.samples), c.seed);
  write_ascii_grid(p.median, run.path("median_log_intensity.asc"));
  write_ascii_grid(p.sd, run.path("sd_log_intensity.asc"));
  run.info["samples"] = a.samples;
  run.info["model"] = saved.spec.use_vse ? "vse" : "naive";
}

// --------------------------------------------------------------- simstudy

struct SimstudyArgs {
  ScenarioConfig cfg;
  SyntheticConfig synth;
  std::string preset = "default";
  std::string models = "both";
  std::optional<double> zeta_scale;
  int mesh_cells = 20;
  int summary_draws = 2000;
  int assess_samples = 1000;
};

void cmd_simstudy(SimstudyArgs a, const Common& c, Run& run) {
  auto& cfg = a.cfg;
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  cfg.zeta_scale = a.zeta_scale;
  if (a.preset != "default" && a.preset != "informative") throw std::invalid_argument("--preset: default or informative");
  cfg.theta_prior = a.preset == "informative" ? ThetaPreset::kInformative : ThetaPreset::kDefault;
  if (a.models != "both" && a.models != "naive" && a.models != "vse")
    throw std::invalid_argument("--models: naive, vse or both");
  cfg.fit_naive = a.models != "vse";
  cfg.fit_vse = a.models != "naive";
  cfg.fit.mesh.cells = a.mesh_cells;
  cfg.fit.summary_draws = a.summary_draws;
  cfg.fit.assess_samples = a.assess_samples;
  const auto dom = make_synthetic_domain(a.synth);
  const auto r = run_scenarios(cfg, dom);
  auto rec = run.open("records.csv");
  write_records_csv(r, rec);
  auto dr = run.open("draws.csv");
  write_draws_csv(r, dr);
  auto fi = run.open("fits.csv");
  write_fits_csv(r, fi);
  auto md = run.open("summary.md");
  write_summary_markdown(r, md);
  auto cv = run.open("coverage.csv");
  cv << "scenario,zeta,model,parameter,coverage,mean_width,replicates\n" << std::setprecision(10);
  for (const auto& row : coverage_table(r))
    cv << row.scenario << ',' << row.level * r.zeta_scale << ',' << row.model << ',' << row.parameter << ','
       << row.coverage << ',' << row.mean_width << ',' << row.replicates << '\n';
  auto sm = run.open("summary.csv");
  sm << "scenario,zeta,model,parameter,bias,rmse,coverage,mean_width,replicates\n" << std::setprecision(10);
  for (const auto& row : summarize(r))
    sm << row.scenario << ',' << row.level * r.zeta_scale << ',' << row.model << ',' << row.parameter << ','
       << row.bias << ',' << row.rmse << ',' << row.coverage << ',' << row.mean_width << ',' << row.replicates << '\n';
  run.info["zeta_scale"] = r.zeta_scale;
  run.info["expected_removal"] = r.expected_removal;
  run.info["failed_fits"] = r.failures.size();
  run.info["attempted_fits"] = r.attempted_fits;
  for (const auto& f : r.failures) std::cerr << "fit failed (scenario " << f.scenario << ", " << f.model
                                             << ", replicate " << f.replicate << "): " << f.message << '\n';
}

// ----------------------------------------------------------------- report

struct ReportArgs {
  std::vector<std::string> fits;
  std::vector<std::string> labels;
};

void cmd_report(const ReportArgs& a, Run& run) {
  if (!a.labels.empty() && a.labels.size() != a.fits.size()) throw std::invalid_argument("one --label per fit");
  std::vector<NamedScores> rows;
  auto params = run.open("parameters.csv");
  params << "model,parameter,mean,sd,q0.025,q0.5,q0.975\n" << std::setprecision(10);
  for (std::size_t k = 0; k < a.fits.size(); ++k) {
    const auto s = fit_from_json(read_text_file(a.fits[k]), a.fits[k]);
    const std::string label = a.labels.empty() ? (s.spec.use_vse ? "vse" : "naive") : a.labels[k];
    for (const auto& p : s.summaries)
      params << label << ',' << p.name << ',' << p.mean << ',' << p.sd << ',' << p.q025 << ',' << p.q50 << ','
             << p.q975 << '\n';
    if (s.scores) rows.push_back({label, *s.scores});
    else std::cerr << "note: " << a.fits[k] << " has no criteria\n";
  }
  auto cmp = run.open("comparison.csv");
  write_comparison_csv(rows, cmp);
  if (rows.size() >= 2) {
    auto best = [&](auto key, bool lower) {
      std::size_t b = 0;
      for (std::size_t k = 1; k < rows.size(); ++k)
        if (lower ? key(rows[k]) < key(rows[b]) : key(rows[k]) > key(rows[b])) b = k;
      return rows[b].model;
    };
    run.info["preferred"] = {{"dic", best([](const NamedScores& r) { return r.scores.dic.dic; }, true)},
                             {"waic", best([](const NamedScores& r) { return r.scores.waic.waic; }, true)},
                             {"lpml", best([](const NamedScores& r) { return r.scores.lpml.lpml; }, false)}};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Log-Gaussian Cox process models with accessibility-driven sampling effort"};
  app.set_version_flag("--version", VSE_VERSION);
  app.set_config("--config", "", "TOML-style key = value file; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "Master seed")->capture_default_str();
  app.add_option("--threads", common.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out", common.out, "Output directory")->capture_default_str();

  ExploreArgs ea;
  auto* explore = app.add_subcommand("explore", "Distance summaries, ECDFs and KS test of points vs a reference grid");
  explore->add_option("--points", ea.points)->required()->check(CLI::ExistingFile);
  explore->add_option("--roads", ea.roads)->required()->check(CLI::ExistingFile);
  explore->add_option("--covariate", ea.covariate, "Raster for the covariate-distance correlation")->check(CLI::ExistingFile);
  explore->add_option("--grid-cell", ea.grid_cell, "Reference grid spacing")->capture_default_str()->check(CLI::PositiveNumber);
  explore->add_option("--domain", ea.domain, "xmin ymin xmax ymax")->expected(4);
  explore->add_option("--thresholds", ea.thresholds)->capture_default_str();

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Simulate an LGCP on a covariate raster or a synthetic landscape");
  simulate->add_option("--covariate", sa.covariate, "Covariate raster; omitted: synthetic landscape")->check(CLI::ExistingFile);
  simulate->add_option("--roads", sa.roads)->check(CLI::ExistingFile);
  simulate->add_option("--beta0", sa.truth.beta0)->capture_default_str();
  simulate->add_option("--beta1", sa.truth.beta1)->capture_default_str();
  simulate->add_option("--sigma", sa.truth.sigma)->default_str(precise(sa.truth.sigma));
  simulate->add_option("--rho", sa.truth.rho)->capture_default_str();
  simulate->add_option("--side", sa.synth.side)->capture_default_str();
  simulate->add_option("--raster-cells", sa.synth.raster_cells)->capture_default_str();
  simulate->add_option("--distance-cells", sa.synth.distance_cells)->capture_default_str();
  simulate->add_option("--landscape-seed", sa.synth.seed)->capture_default_str();

  ThinArgs ta;
  auto* thin_cmd = app.add_subcommand("thin", "Retain points with probability exp(-zeta d^2 / 2)");
  thin_cmd->add_option("--points", ta.points)->required()->check(CLI::ExistingFile);
  thin_cmd->add_option("--roads", ta.roads)->required()->check(CLI::ExistingFile);
  thin_cmd->add_option("--zeta", ta.zeta)->required()->check(CLI::NonNegativeNumber);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the naive or VSE model");
  fit_cmd->add_option("--points", fa.points)->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--covariate", fa.covariates, "Covariate raster (repeatable)")->check(CLI::ExistingFile);
  fit_cmd->add_option("--name", fa.names, "Covariate names (default: file stems)");
  fit_cmd->add_option("--roads", fa.roads)->check(CLI::ExistingFile);
  fit_cmd->add_option("--distance", fa.distance, "Fine road-distance raster for the quadrature")->check(CLI::ExistingFile);
  fit_cmd->add_option("--model", fa.model)->capture_default_str()->check(CLI::IsMember({"naive", "vse"}));
  fit_cmd->add_option("--domain", fa.domain, "xmin ymin xmax ymax (default: covariate bounds)")->expected(4);
  fit_cmd->add_option("--mesh-cells", fa.mesh_cells)->capture_default_str();
  fit_cmd->add_option("--extension", fa.extension)->capture_default_str();
  fit_cmd->add_option("--quadrature-per-cell", fa.quadrature_per_cell)->capture_default_str();
  fit_cmd->add_option("--rho0", fa.rho0)->capture_default_str();
  fit_cmd->add_option("--alpha-rho", fa.alpha_rho)->capture_default_str();
  fit_cmd->add_option("--sigma0", fa.sigma0)->capture_default_str();
  fit_cmd->add_option("--alpha-sigma", fa.alpha_sigma)->capture_default_str();
  fit_cmd->add_option("--theta-mean", fa.theta_mean)->capture_default_str();
  fit_cmd->add_option("--theta-precision", fa.theta_precision)->capture_default_str();
  fit_cmd->add_option("--beta-precision", fa.beta_precision)->capture_default_str();
  fit_cmd->add_option("--fixed-zeta", fa.fixed_zeta);
  fit_cmd->add_option("--summary-draws", fa.summary_draws)->capture_default_str();
  fit_cmd->add_option("--assess-samples", fa.assess_samples)->capture_default_str();
  fit_cmd->add_flag("--no-mean-correction", fa.no_mean_correction);

  PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "Median and sd of log intensity from a saved fit");
  predict->add_option("--fit", pa.fit)->required()->check(CLI::ExistingFile);
  predict->add_option("--samples", pa.samples)->capture_default_str();

  SimstudyArgs ssa;
  auto* simstudy = app.add_subcommand("simstudy", "Replicated simulate-thin-fit study");
  simstudy->add_option("--replicates", ssa.cfg.replicates)->capture_default_str();
  simstudy->add_option("--levels", ssa.cfg.zeta_levels, "Unscaled zeta levels")->capture_default_str();
  simstudy->add_option("--zeta-scale", ssa.zeta_scale, "Default: calibrated to --target-removal");
  simstudy->add_option("--target-removal", ssa.cfg.target_removal)->capture_default_str();
  simstudy->add_option("--preset", ssa.preset, "theta prior: default or informative")->capture_default_str();
  simstudy->add_option("--models", ssa.models, "naive, vse or both")->capture_default_str();
  simstudy->add_option("--posterior-draws", ssa.cfg.posterior_draws)->capture_default_str();
  simstudy->add_option("--interval-draws", ssa.cfg.interval_draws)->capture_default_str();
  simstudy->add_option("--level", ssa.cfg.level, "Credible interval level")->capture_default_str();
  simstudy->add_option("--mesh-cells", ssa.mesh_cells)->capture_default_str();
  simstudy->add_option("--summary-draws", ssa.summary_draws)->capture_default_str();
  simstudy->add_option("--assess-samples", ssa.assess_samples)->capture_default_str();
  simstudy->add_option("--side", ssa.synth.side)->capture_default_str();
  simstudy->add_option("--raster-cells", ssa.synth.raster_cells)->capture_default_str();
  simstudy->add_option("--distance-cells", ssa.synth.distance_cells)->capture_default_str();
  simstudy->add_option("--landscape-seed", ssa.synth.seed)->capture_default_str();
  simstudy->add_flag("--self-test", ssa.cfg.self_test, "Use the truth as every posterior draw");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Comparison table from saved fits");
  report->add_option("--fits", ra.fits)->required()->check(CLI::ExistingFile);
  report->add_option("--labels", ra.labels);

  CLI11_PARSE(app, argc, argv);

  try {
    auto* sub = app.get_subcommands().front();
    Run run(sub->get_name(), app, common);
    if (sub == explore) cmd_explore(ea, run);
    else if (sub == simulate) cmd_simulate(sa, common, run);
    else if (sub == thin_cmd) cmd_thin(ta, common, run);
    else if (sub == fit_cmd) cmd_fit(fa, common, run);
    else if (sub == predict) cmd_predict(pa, common, run);
    else if (sub == simstudy) cmd_simstudy(ssa, common, run);
    else if (sub == report) cmd_report(ra, run);
    run.finish();
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
