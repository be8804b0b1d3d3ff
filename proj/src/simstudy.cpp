#include "vse/simstudy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "parallel.hpp"
#include "vse/pointprocess.hpp"
#include "vse/rng.hpp"

namespace vse {

void ScenarioConfig::validate() const {
  if (replicates < 1) throw std::invalid_argument("simstudy: replicates must be at least 1");
  if (zeta_levels.empty()) throw std::invalid_argument("simstudy: no zeta levels");
  for (double z : zeta_levels)
    if (!(z >= 0.0) || !std::isfinite(z)) throw std::invalid_argument("simstudy: zeta levels must be nonnegative");
  if (posterior_draws < 1 || interval_draws < 2) throw std::invalid_argument("simstudy: too few posterior draws");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("simstudy: interval level must lie in (0, 1)");
  if (!fit_naive && !fit_vse) throw std::invalid_argument("simstudy: no model selected");
  if (zeta_scale && !(*zeta_scale > 0.0)) throw std::invalid_argument("simstudy: zeta scale must be positive");
  if (!(target_removal > 0.0 && target_removal < 1.0))
    throw std::invalid_argument("simstudy: target removal must lie in (0, 1)");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0))
    throw std::invalid_argument("simstudy: failure fraction must lie in [0, 1]");
  if (!(truth.rho > 0.0) || !(truth.sigma > 0.0)) throw std::invalid_argument("simstudy: invalid field truths");
  if (informative.precision <= 0.0) throw std::invalid_argument("simstudy: informative precision must be positive");
}

std::pair<double, double> equal_tailed_interval(std::vector<double> draws, double level) {
  if (draws.size() < 2) throw std::invalid_argument("interval: need at least two draws");
  std::sort(draws.begin(), draws.end());
  auto q = [&](double p) {
    const double h = p * static_cast<double>(draws.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, draws.size() - 1);
    return draws[lo] + (h - static_cast<double>(lo)) * (draws[hi] - draws[lo]);
  };
  const double tail = 0.5 * (1.0 - level);
  return {q(tail), q(1.0 - tail)};
}

namespace {

struct ReplicateOutput {
  std::vector<ReplicateRecord> records;
  std::vector<FitRecord> fits;
  std::vector<FailureRecord> failures;
  std::size_t attempted = 0;
};

double truth_of(const std::string& name, const TrueParams& t, double zeta) {
  if (name == "beta0") return t.beta0;
  if (name == "beta1") return t.beta1;
  if (name == "rho") return t.rho;
  if (name == "sigma") return t.sigma;
  if (name == "zeta") return zeta;
  throw std::logic_error("simstudy: unknown parameter " + name);
}

ReplicateOutput run_replicate(const ScenarioConfig& cfg, const SyntheticDomain& assets, double scale, int rep,
                              const std::atomic<bool>& stop) {
  ReplicateOutput out;
  const auto r = static_cast<std::uint64_t>(rep);
  const std::vector<RasterGrid> cov{assets.covariate};
  const double beta[2] = {cfg.truth.beta0, cfg.truth.beta1};
  const RasterGrid field = simulate_matern_field(assets.covariate.spec(), MaternParams(cfg.truth.sigma, cfg.truth.rho),
                                                 derive_seed(cfg.seed, {r, 1}));
  const auto surface = make_log_intensity(cov, beta, &field, {"x"});
  const PointPattern full = simulate_lgcp(surface, assets.domain, derive_seed(cfg.seed, {r, 2}));
  const std::vector<double> dist = distances_to_roads(full.points, assets.roads);

  std::vector<std::pair<std::string, bool>> models;
  if (cfg.fit_naive) models.emplace_back("naive", false);
  if (cfg.fit_vse) models.emplace_back("vse", true);

  for (std::size_t li = 0; li < cfg.zeta_levels.size(); ++li) {
    const double level = cfg.zeta_levels[li];
    const double zeta = level * scale;
    // one uniform stream per replicate, so patterns are nested across levels
    const PointPattern obs = thin_by_distance(full, dist, zeta, derive_seed(cfg.seed, {r, 3}));
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      if (stop.load()) return out;
      const auto& [name, use_vse] = models[mi];
      ++out.attempted;
      ModelSpec spec;
      spec.covariate_names = {"x"};
      spec.use_vse = use_vse;
      if (use_vse && cfg.theta_prior == ThetaPreset::kInformative) {
        const auto it = cfg.informative.means.find(level);
        if (it != cfg.informative.means.end())
          spec.theta_prior = NormalPrior{it->second + std::log(scale), cfg.informative.precision};
      }
      FitOptions opt = cfg.fit;
      opt.seed = derive_seed(cfg.seed, {r, li, mi, 4});
      opt.threads = 1;
      opt.distance = &assets.fine_distance;

      FitRecord fr;
      fr.scenario = li;
      fr.level = level;
      fr.model = name;
      fr.replicate = rep;
      fr.simulated = full.size();
      fr.observed = obs.size();

      std::vector<std::string> names;
      std::vector<std::vector<double>> draws, wide;
      try {
        if (cfg.self_test) {
          names = {"beta0", "beta1", "rho", "sigma"};
          if (use_vse) names.push_back("zeta");
          for (const auto& n : names) {
            const double t = truth_of(n, cfg.truth, zeta);
            draws.emplace_back(static_cast<std::size_t>(cfg.posterior_draws), t);
            wide.emplace_back(2, t);
          }
        } else {
          const FitResult f = fit(obs, cov, &assets.roads, spec, opt);
          draws = posterior_parameter_draws(f, static_cast<std::size_t>(cfg.posterior_draws),
                                            derive_seed(opt.seed, {5}), &names);
          wide = posterior_parameter_draws(f, static_cast<std::size_t>(cfg.interval_draws), derive_seed(opt.seed, {6}), nullptr);
          fr.scores = f.scores;
        }
      } catch (const std::exception& e) {
        out.failures.push_back({li, name, rep, e.what()});
        continue;
      }
      out.fits.push_back(std::move(fr));
      for (std::size_t k = 0; k < names.size(); ++k) {
        ReplicateRecord rec;
        rec.scenario = li;
        rec.level = level;
        rec.model = name;
        rec.replicate = rep;
        rec.parameter = names[k];
        rec.truth = truth_of(names[k], cfg.truth, zeta);
        double s1 = 0.0, s2 = 0.0;
        for (double d : draws[k]) {
          s1 += d - rec.truth;
          s2 += (d - rec.truth) * (d - rec.truth);
        }
        const double n = static_cast<double>(draws[k].size());
        rec.bias = s1 / n;
        rec.rmse = std::sqrt(s2 / n);
        std::tie(rec.lower, rec.upper) = equal_tailed_interval(wide[k], cfg.level);
        rec.covered = rec.lower <= rec.truth && rec.truth <= rec.upper;
        rec.ci_width = rec.upper - rec.lower;
        rec.draws = std::move(draws[k]);
        out.records.push_back(std::move(rec));
      }
    }
  }
  return out;
}

int parameter_rank(const std::string& p) {
  static const std::vector<std::string> order{"beta0", "beta1", "rho", "sigma", "zeta"};
  const auto it = std::find(order.begin(), order.end(), p);
  return static_cast<int>(it - order.begin());
}

int model_rank(const std::string& m) { return m == "naive" ? 0 : 1; }

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

ScenarioResult run_scenarios(const ScenarioConfig& config, const SyntheticDomain& assets) {
  config.validate();
  if (assets.roads.empty()) throw std::invalid_argument("simstudy: road network required");
  ScenarioResult res;
  res.config = config;

  // intensity weights exp(beta1 x) on the fine distance raster
  const auto& fine = assets.fine_distance;
  std::vector<double> w(fine.values().size());
  for (std::size_t k = 0; k < w.size(); ++k)
    w[k] = std::exp(config.truth.beta1 * assets.covariate.lookup(fine.spec().center(k)));
  const double top = *std::max_element(config.zeta_levels.begin(), config.zeta_levels.end());
  if (config.zeta_scale) res.zeta_scale = *config.zeta_scale;
  else if (top > 0.0) res.zeta_scale = calibrate_zeta_scale(fine.values(), w, top, config.target_removal);
  for (double l : config.zeta_levels) res.expected_removal.push_back(removal_fraction(fine.values(), w, l * res.zeta_scale));

  const auto reps = static_cast<std::size_t>(config.replicates);
  const std::size_t planned = reps * config.zeta_levels.size() * ((config.fit_naive ? 1 : 0) + (config.fit_vse ? 1 : 0));
  std::vector<ReplicateOutput> outs(reps);
  std::atomic<std::size_t> failed{0};
  std::atomic<bool> stop{false};
  detail::parallel_for(reps, config.threads, [&](std::size_t r, std::size_t) {
    if (stop.load()) return;
    outs[r] = run_replicate(config, assets, res.zeta_scale, static_cast<int>(r), stop);
    const std::size_t f = failed += outs[r].failures.size();
    if (static_cast<double>(f) > config.max_failure_fraction * static_cast<double>(planned)) stop = true;
  });
  for (auto& o : outs) {
    res.attempted_fits += o.attempted;
    for (auto& x : o.records) res.records.push_back(std::move(x));
    for (auto& x : o.fits) res.fits.push_back(std::move(x));
    for (auto& x : o.failures) res.failures.push_back(std::move(x));
  }
  if (stop.load() ||
      static_cast<double>(res.failures.size()) > config.max_failure_fraction * static_cast<double>(res.attempted_fits)) {
    std::ostringstream msg;
    msg << "simstudy: aborted, " << res.failures.size() << " of " << res.attempted_fits << " fits failed";
    if (!res.failures.empty()) msg << "; first: " << res.failures.front().message;
    throw std::runtime_error(msg.str());
  }
  return res;
}

std::vector<SummaryRow> summarize(const ScenarioResult& result) {
  std::map<std::tuple<std::size_t, int, int>, SummaryRow> acc;
  for (const auto& r : result.records) {
    auto& row = acc[{r.scenario, model_rank(r.model), parameter_rank(r.parameter)}];
    row.scenario = r.scenario;
    row.level = r.level;
    row.model = r.model;
    row.parameter = r.parameter;
    ++row.replicates;
    row.bias += r.bias;
    row.rmse += r.rmse;
    row.coverage += r.covered ? 1.0 : 0.0;
    row.mean_width += r.ci_width;
  }
  std::vector<SummaryRow> out;
  for (auto& [key, row] : acc) {
    const double n = static_cast<double>(row.replicates);
    row.bias /= n;
    row.rmse /= n;
    row.coverage /= n;
    row.mean_width /= n;
    out.push_back(row);
  }
  return out;
}

std::vector<CoverageRow> coverage_table(const ScenarioResult& result) {
  std::vector<CoverageRow> out;
  for (const auto& s : summarize(result))
    out.push_back({s.scenario, s.level, s.model, s.parameter, s.coverage, s.mean_width, s.replicates});
  return out;
}

void write_records_csv(const ScenarioResult& result, std::ostream& out) {
  out << "scenario,zeta,model,parameter,replicate,bias,rmse,covered,ci_width,truth,lower,upper\n";
  out << std::setprecision(17);
  for (const auto& r : result.records)
    out << r.scenario << ',' << r.level << ',' << r.model << ',' << r.parameter << ',' << r.replicate << ',' << r.bias
        << ',' << r.rmse << ',' << (r.covered ? 1 : 0) << ',' << r.ci_width << ',' << r.truth << ',' << r.lower << ','
        << r.upper << '\n';
}

void write_draws_csv(const ScenarioResult& result, std::ostream& out) {
  out << "scenario,model,parameter,replicate,draw,value\n";
  out << std::setprecision(17);
  for (const auto& r : result.records)
    for (std::size_t k = 0; k < r.draws.size(); ++k)
      out << r.scenario << ',' << r.model << ',' << r.parameter << ',' << r.replicate << ',' << k << ',' << r.draws[k]
          << '\n';
}

void write_fits_csv(const ScenarioResult& result, std::ostream& out) {
  out << "scenario,zeta,model,replicate,simulated,observed,dic,p_d,waic,p_waic,lpml,unreliable_cpo\n";
  out << std::setprecision(12);
  for (const auto& f : result.fits) {
    out << f.scenario << ',' << f.level << ',' << f.model << ',' << f.replicate << ',' << f.simulated << ','
        << f.observed;
    if (f.scores)
      out << ',' << f.scores->dic.dic << ',' << f.scores->dic.p_d << ',' << f.scores->waic.waic << ','
          << f.scores->waic.p_waic << ',' << f.scores->lpml.lpml << ',' << f.scores->lpml.unreliable_count;
    else
      out << ",,,,,,";
    out << '\n';
  }
}

void write_summary_markdown(const ScenarioResult& result, std::ostream& out) {
  const auto rows = summarize(result);
  std::vector<std::string> params;
  for (const auto& r : rows)
    if (std::find(params.begin(), params.end(), r.parameter) == params.end()) params.push_back(r.parameter);
  std::sort(params.begin(), params.end(), [](const auto& a, const auto& b) { return parameter_rank(a) < parameter_rank(b); });

  auto table = [&](const std::string& title, auto cell) {
    out << "### " << title << "\n\n| scenario | zeta | model |";
    for (const auto& p : params) out << ' ' << p << " |";
    out << "\n|---|---|---|";
    for (std::size_t k = 0; k < params.size(); ++k) out << "---|";
    out << '\n';
    std::map<std::pair<std::size_t, int>, std::map<std::string, const SummaryRow*>> grid;
    for (const auto& r : rows) grid[{r.scenario, model_rank(r.model)}][r.parameter] = &r;
    for (const auto& [key, cells] : grid) {
      const SummaryRow* any = cells.begin()->second;
      out << "| " << key.first << " | " << fmt(any->level * result.zeta_scale, 4) << " | " << any->model << " |";
      for (const auto& p : params) {
        const auto it = cells.find(p);
        out << ' ' << (it == cells.end() ? std::string("") : cell(*it->second)) << " |";
      }
      out << '\n';
    }
    out << '\n';
  };
  out << "Replicates: " << result.config.replicates << ", zeta scale: " << fmt(result.zeta_scale, 6)
      << ", failed fits: " << result.failures.size() << " of " << result.attempted_fits << "\n\n";
  table("Mean bias and RMSE", [](const SummaryRow& r) { return fmt(r.bias) + " (" + fmt(r.rmse) + ")"; });
  table("Coverage and mean interval width", [](const SummaryRow& r) {
    return fmt(r.coverage, 2) + " (" + fmt(r.mean_width) + ")";
  });
}

}  // namespace vse
