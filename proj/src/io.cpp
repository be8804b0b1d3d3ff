#include "vse/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

namespace vse {

using nlohmann::json;

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

bool parse_double(const std::string& tok, double& out) {
  const std::string t = trim(tok);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

double number(const std::string& tok, const std::string& source, std::size_t line, const std::string& what) {
  double v = 0.0;
  if (!parse_double(tok, v)) throw ParseError(source, line, "expected a number for " + what + ", got '" + tok + "'");
  if (!std::isfinite(v)) throw ParseError(source, line, what + " is not finite");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    else if (c == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else cur += c;
  }
  out.push_back(trim(cur));
  return out;
}

// Line number of a byte offset, for JSON errors.
std::size_t line_of(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------- rasters

RasterGrid read_ascii_grid(std::istream& in, const std::string& source) {
  std::map<std::string, std::pair<double, std::size_t>> header;
  std::vector<double> values;
  std::string line;
  std::size_t ln = 0;
  bool in_data = false;
  std::optional<double> nodata;
  long long nx = -1, ny = -1;
  while (std::getline(in, line)) {
    ++ln;
    std::istringstream ls(line);
    std::string tok;
    if (!in_data) {
      if (!(ls >> tok)) continue;
      if (std::isalpha(static_cast<unsigned char>(tok[0]))) {
        const std::string key = lower(tok);
        std::string v;
        if (!(ls >> v)) throw ParseError(source, ln, "header key '" + tok + "' has no value");
        header[key] = {number(v, source, ln, key), ln};
        continue;
      }
      in_data = true;
      for (const char* k : {"ncols", "nrows", "cellsize"})
        if (!header.count(k)) throw ParseError(source, ln, std::string("missing header key ") + k);
      nx = std::llround(header["ncols"].first);
      ny = std::llround(header["nrows"].first);
      if (nx < 1 || ny < 1 || static_cast<double>(nx) != header["ncols"].first ||
          static_cast<double>(ny) != header["nrows"].first)
        throw ParseError(source, header["ncols"].second, "ncols and nrows must be positive integers");
      if (header.count("nodata_value")) nodata = header["nodata_value"].first;
      ls.clear();
      ls.str(line);
    }
    while (ls >> tok) {
      double v = 0.0;
      if (!parse_double(tok, v) || std::isnan(v)) throw ParseError(source, ln, "bad cell value '" + tok + "'");
      values.push_back(v);
      if (values.size() > static_cast<std::size_t>(nx * ny))
        throw ParseError(source, ln, "more values than ncols * nrows");
    }
  }
  if (!in_data) throw ParseError(source, ln, "no cell values");
  if (values.size() != static_cast<std::size_t>(nx * ny))
    throw ParseError(source, ln,
                     "expected " + std::to_string(nx * ny) + " values, found " + std::to_string(values.size()));
  GridSpec spec;
  spec.nx = static_cast<int>(nx);
  spec.ny = static_cast<int>(ny);
  spec.cell = header["cellsize"].first;
  if (!(spec.cell > 0.0)) throw ParseError(source, header["cellsize"].second, "cellsize must be positive");
  const bool corner = header.count("xllcorner") && header.count("yllcorner");
  const bool center = header.count("xllcenter") && header.count("yllcenter");
  if (!corner && !center) throw ParseError(source, 1, "missing xllcorner/yllcorner (or xllcenter/yllcenter)");
  spec.x0 = corner ? header["xllcorner"].first : header["xllcenter"].first - 0.5 * spec.cell;
  spec.y0 = corner ? header["yllcorner"].first : header["yllcenter"].first - 0.5 * spec.cell;
  std::vector<double> flipped(values.size());
  for (int r = 0; r < spec.ny; ++r)
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(r) * spec.nx, spec.nx,
                flipped.begin() + static_cast<std::ptrdiff_t>(spec.ny - 1 - r) * spec.nx);
  return RasterGrid(spec, std::move(flipped), nodata);
}

RasterGrid read_ascii_grid(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_ascii_grid(in, path.string());
}

void write_ascii_grid(const RasterGrid& grid, std::ostream& out) {
  const auto& s = grid.spec();
  out << std::setprecision(17) << "ncols " << s.nx << "\nnrows " << s.ny << "\nxllcorner " << s.x0 << "\nyllcorner "
      << s.y0 << "\ncellsize " << s.cell << '\n';
  if (grid.nodata()) out << "NODATA_value " << *grid.nodata() << '\n';
  for (int j = s.ny - 1; j >= 0; --j) {
    for (int i = 0; i < s.nx; ++i) out << (i ? " " : "") << grid(i, j);
    out << '\n';
  }
}

void write_ascii_grid(const RasterGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_ascii_grid(grid, out);
}

// ------------------------------------------------------------------ roads

namespace {

std::vector<Point> line_coords(const json& coords, const std::string& source, std::size_t ln) {
  if (!coords.is_array() || coords.size() < 2)
    throw ParseError(source, ln, "a LineString needs at least two positions");
  std::vector<Point> line;
  for (const auto& pos : coords) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
      throw ParseError(source, ln, "a position must be [x, y]");
    const Point p{pos[0].get<double>(), pos[1].get<double>()};
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ParseError(source, ln, "non-finite coordinate");
    line.push_back(p);
  }
  return line;
}

void collect_geometry(const json& g, std::vector<std::vector<Point>>& lines, const std::string& source, std::size_t ln) {
  if (g.is_null()) return;
  const std::string type = g.value("type", "");
  if (type == "LineString") lines.push_back(line_coords(g.at("coordinates"), source, ln));
  else if (type == "MultiLineString")
    for (const auto& c : g.at("coordinates")) lines.push_back(line_coords(c, source, ln));
  else if (type == "GeometryCollection")
    for (const auto& c : g.at("geometries")) collect_geometry(c, lines, source, ln);
  else
    throw ParseError(source, ln, "unsupported geometry type '" + type + "'");
}

}  // namespace

RoadNetwork read_roads_geojson(std::istream& in, const std::string& source) {
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, line_of(text, e.byte), "invalid JSON");
  }
  std::vector<std::vector<Point>> lines;
  try {
    const std::string type = doc.value("type", "");
    if (type == "FeatureCollection") {
      for (const auto& f : doc.at("features")) collect_geometry(f.at("geometry"), lines, source, 1);
    } else if (type == "Feature") {
      collect_geometry(doc.at("geometry"), lines, source, 1);
    } else {
      collect_geometry(doc, lines, source, 1);
    }
  } catch (const json::exception& e) {
    throw ParseError(source, 1, std::string("malformed GeoJSON: ") + e.what());
  }
  if (lines.empty()) throw ParseError(source, 1, "no line geometries");
  return RoadNetwork(std::move(lines));
}

RoadNetwork read_roads_csv(std::istream& in, const std::string& source) {
  std::map<std::string, std::vector<std::pair<long long, Point>>> byid;
  std::vector<std::string> order;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    double probe = 0.0;
    if (ln == 1 && f.size() >= 2 && !parse_double(f[1], probe)) continue;  // header
    if (f.size() < 4) throw ParseError(source, ln, "expected polyline_id,vertex_index,x,y");
    const double vi = number(f[1], source, ln, "vertex_index");
    if (vi != std::floor(vi)) throw ParseError(source, ln, "vertex_index must be an integer");
    const Point p{number(f[2], source, ln, "x"), number(f[3], source, ln, "y")};
    if (!byid.count(f[0])) order.push_back(f[0]);
    byid[f[0]].push_back({static_cast<long long>(vi), p});
  }
  std::vector<std::vector<Point>> lines;
  for (const auto& id : order) {
    auto v = byid[id];
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (v.size() < 2) throw ParseError(source, ln, "polyline '" + id + "' has fewer than two vertices");
    std::vector<Point> pl;
    for (const auto& [k, p] : v) pl.push_back(p);
    lines.push_back(std::move(pl));
  }
  if (lines.empty()) throw ParseError(source, ln, "no polylines");
  return RoadNetwork(std::move(lines));
}

RoadNetwork read_roads(const std::filesystem::path& path) {
  auto in = open_in(path);
  if (lower(path.extension().string()) == ".csv") return read_roads_csv(in, path.string());
  return read_roads_geojson(in, path.string());
}

void write_roads_geojson(const RoadNetwork& roads, std::ostream& out) {
  json fc{{"type", "FeatureCollection"}, {"features", json::array()}};
  std::size_t id = 0;
  for (const auto& pl : roads.polylines()) {
    json coords = json::array();
    for (const auto& p : pl) coords.push_back({p.x, p.y});
    fc["features"].push_back({{"type", "Feature"},
                              {"properties", {{"id", id++}}},
                              {"geometry", {{"type", "LineString"}, {"coordinates", coords}}}});
  }
  out << fc.dump() << '\n';
}

void write_roads_csv(const RoadNetwork& roads, std::ostream& out) {
  out << "polyline_id,vertex_index,x,y\n" << std::setprecision(17);
  std::size_t id = 0;
  for (const auto& pl : roads.polylines()) {
    for (std::size_t k = 0; k < pl.size(); ++k) out << id << ',' << k << ',' << pl[k].x << ',' << pl[k].y << '\n';
    ++id;
  }
}

// ----------------------------------------------------------------- points

std::vector<Point> read_points_csv(std::istream& in, const std::string& source) {
  std::vector<Point> pts;
  std::string line;
  std::size_t ln = 0, xi = 0, yi = 1;
  bool first = true;
  while (std::getline(in, line)) {
    ++ln;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (first) {
      first = false;
      double probe = 0.0;
      if (!parse_double(f[0], probe)) {
        const auto fx = std::find_if(f.begin(), f.end(), [](const auto& s) { return lower(s) == "x"; });
        const auto fy = std::find_if(f.begin(), f.end(), [](const auto& s) { return lower(s) == "y"; });
        if (fx == f.end() || fy == f.end()) throw ParseError(source, ln, "header must name columns x and y");
        xi = static_cast<std::size_t>(fx - f.begin());
        yi = static_cast<std::size_t>(fy - f.begin());
        continue;
      }
    }
    if (f.size() <= std::max(xi, yi)) throw ParseError(source, ln, "too few columns");
    pts.push_back({number(f[xi], source, ln, "x"), number(f[yi], source, ln, "y")});
  }
  return pts;
}

std::vector<Point> read_points(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_points_csv(in, path.string());
}

void write_points_csv(std::span<const Point> points, std::ostream& out) {
  out << "x,y\n" << std::setprecision(17);
  for (const auto& p : points) out << p.x << ',' << p.y << '\n';
}

// ------------------------------------------------------------------- fits

namespace {

json vec(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json scores_json(const ModelScores& s) {
  return {{"dic", s.dic.dic},          {"p_d", s.dic.p_d},
          {"d_bar", s.dic.d_bar},      {"d_at_mean", s.dic.d_at_mean},
          {"waic", s.waic.waic},       {"p_waic", s.waic.p_waic},
          {"lppd", s.waic.lppd},       {"lpml", s.lpml.lpml},
          {"unreliable_cpo", s.lpml.unreliable_count}, {"samples", s.samples}};
}

}  // namespace

std::string fit_to_json(const FitResult& fit, const MeshConfig& mesh, bool mean_correction,
                        const std::string& extra_json) {
  const auto& sp = fit.spec;
  json j;
  j["model"] = {{"type", sp.use_vse ? "vse" : "naive"},
                {"covariates", sp.covariate_names},
                {"use_field", sp.use_field},
                {"pc_prior",
                 {{"rho0", sp.pc_prior.rho0},
                  {"alpha_rho", sp.pc_prior.alpha_rho},
                  {"sigma0", sp.pc_prior.sigma0},
                  {"alpha_sigma", sp.pc_prior.alpha_sigma}}},
                {"beta_precision", sp.beta_precision},
                {"theta_prior", {{"mean", sp.theta_prior.mean}, {"precision", sp.theta_prior.precision}}},
                {"fixed_zeta", sp.fixed_zeta ? json(*sp.fixed_zeta) : json(nullptr)}};
  j["mesh"] = {{"cells", mesh.cells}, {"extension", mesh.extension}, {"quadrature_per_cell", mesh.quadrature_per_cell}};
  j["mean_correction"] = mean_correction;
  j["seed"] = fit.seed;
  j["points"] = fit.model ? fit.model->point_count() : 0;
  json params = json::array();
  for (const auto& s : fit.summaries)
    params.push_back({{"name", s.name}, {"mean", s.mean}, {"sd", s.sd}, {"q0.025", s.q025}, {"q0.5", s.q50}, {"q0.975", s.q975}});
  j["parameters"] = params;
  j["scores"] = fit.scores ? scores_json(*fit.scores) : json(nullptr);
  j["diagnostics"] = fit.diagnostics;
  json axes = json::array();
  for (Eigen::Index r = 0; r < fit.grid.axes.rows(); ++r) axes.push_back(vec(fit.grid.axes.row(r).transpose()));
  json zs = json::array();
  for (const auto& z : fit.grid.z) zs.push_back(vec(z));
  j["hyper_grid"] = {{"names", sp.hyper_names()}, {"mode", vec(fit.grid.mode)}, {"mode_value", fit.grid.mode_value},
                     {"axes", axes}, {"z_step", fit.grid.z_step}, {"z", zs}, {"fallback", fit.grid.fallback},
                     {"evaluations", fit.grid.evaluations}};
  json nodes = json::array();
  for (std::size_t k = 0; k < fit.nodes.size(); ++k) {
    const auto& n = fit.nodes[k];
    nodes.push_back({{"h", vec(n.h)},
                     {"rho", n.values.rho},
                     {"sigma", n.values.sigma},
                     {"zeta", n.values.zeta},
                     {"log_marginal", n.laplace_log_marginal},
                     {"weight", n.weight},
                     {"latent_mode", vec(fit.approx[k].mode)}});
  }
  j["nodes"] = nodes;
  const json extra = json::parse(extra_json);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  return j.dump(1);
}

SavedFit fit_from_json(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, line_of(text, e.byte), "invalid JSON");
  }
  SavedFit s;
  try {
    const auto& m = j.at("model");
    s.spec.use_vse = m.at("type").get<std::string>() == "vse";
    s.spec.covariate_names = m.at("covariates").get<std::vector<std::string>>();
    s.spec.use_field = m.at("use_field").get<bool>();
    const auto& pc = m.at("pc_prior");
    s.spec.pc_prior = {pc.at("rho0"), pc.at("alpha_rho"), pc.at("sigma0"), pc.at("alpha_sigma")};
    s.spec.beta_precision = m.at("beta_precision");
    s.spec.theta_prior = {m.at("theta_prior").at("mean"), m.at("theta_prior").at("precision")};
    if (!m.at("fixed_zeta").is_null()) s.spec.fixed_zeta = m.at("fixed_zeta").get<double>();
    const auto& mesh = j.at("mesh");
    s.mesh.cells = mesh.at("cells");
    s.mesh.extension = mesh.at("extension");
    s.mesh.quadrature_per_cell = mesh.at("quadrature_per_cell");
    s.mean_correction = j.at("mean_correction");
    s.seed = j.at("seed");
    for (const auto& p : j.at("parameters"))
      s.summaries.push_back({p.at("name"), p.at("mean"), p.at("sd"), p.at("q0.025"), p.at("q0.5"), p.at("q0.975")});
    if (!j.at("scores").is_null()) {
      const auto& sc = j.at("scores");
      ModelScores ms;
      ms.dic = {sc.at("dic"), sc.at("p_d"), sc.at("d_bar"), sc.at("d_at_mean"), false};
      ms.waic = {sc.at("waic"), sc.at("p_waic"), sc.at("lppd")};
      ms.lpml.lpml = sc.at("lpml");
      ms.lpml.unreliable_count = sc.at("unreliable_cpo");
      ms.samples = sc.at("samples");
      s.scores = ms;
    }
    const auto& g = j.at("hyper_grid");
    s.grid.mode = to_vec(g.at("mode"));
    s.grid.mode_value = g.at("mode_value");
    const auto& axes = g.at("axes");
    const auto d = static_cast<Eigen::Index>(axes.size());
    s.grid.axes.resize(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      const Vector row = to_vec(axes[static_cast<std::size_t>(r)]);
      if (row.size() != d) throw ParseError(source, 1, "hyper_grid.axes is not square");
      s.grid.axes.row(r) = row.transpose();
    }
    s.grid.z_step = g.at("z_step");
    for (const auto& z : g.at("z")) s.grid.z.push_back(to_vec(z));
    s.grid.fallback = g.at("fallback");
    s.grid.evaluations = g.at("evaluations");
    for (const auto& n : j.at("nodes")) {
      HyperNode h;
      h.h = to_vec(n.at("h"));
      h.values = {n.at("rho"), n.at("sigma"), n.at("zeta")};
      h.laplace_log_marginal = n.at("log_marginal");
      h.weight = n.at("weight");
      s.grid.points.push_back(h.h);
      s.nodes.push_back(h);
      s.modes.push_back(to_vec(n.at("latent_mode")));
    }
  } catch (const json::exception& e) {
    throw ParseError(source, 1, std::string("malformed fit summary: ") + e.what());
  }
  if (s.nodes.empty()) throw ParseError(source, 1, "fit summary has no hyper nodes");
  return s;
}

void write_summary_csv(std::span<const ParameterSummary> summaries, std::ostream& out) {
  out << "parameter,mean,sd,q0.025,q0.5,q0.975\n" << std::setprecision(10);
  for (const auto& s : summaries)
    out << s.name << ',' << s.mean << ',' << s.sd << ',' << s.q025 << ',' << s.q50 << ',' << s.q975 << '\n';
}

void write_comparison_csv(std::span<const NamedScores> rows, std::ostream& out) {
  out << "model,dic,p_d,waic,p_waic,lpml,unreliable_cpo\n" << std::setprecision(12);
  for (const auto& r : rows)
    out << r.model << ',' << r.scores.dic.dic << ',' << r.scores.dic.p_d << ',' << r.scores.waic.waic << ','
        << r.scores.waic.p_waic << ',' << r.scores.lpml.lpml << ',' << r.scores.lpml.unreliable_count << '\n';
}

}  // namespace vse
