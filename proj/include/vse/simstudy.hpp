#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vse/inference.hpp"
#include "vse/synthetic.hpp"

namespace vse {

struct TrueParams {
  double beta0 = -4.25;
  double beta1 = 0.82;
  double rho = 34.0;
  double sigma = 0.8366600265340756;  // sqrt(0.7)
};

enum class ThetaPreset { kDefault, kInformative };

/// Informative theta priors keyed by the unscaled zeta level. Means are on
/// the unscaled level's log scale and get shifted by log(zeta_scale).
struct InformativePrior {
  std::map<double, double> means{{8.0, 3.5}, {16.0, 5.0}};
  double precision = 10.0;
};

struct ScenarioConfig {
  std::vector<double> zeta_levels{0.0, 1.0, 8.0, 16.0};  // unscaled
  int replicates = 20;
  TrueParams truth;
  int posterior_draws = 100;   // draws behind bias and RMSE
  int interval_draws = 4000;   // draws behind the credible interval
  double level = 0.95;         // equal-tailed interval
  ThetaPreset theta_prior = ThetaPreset::kDefault;
  InformativePrior informative;
  bool fit_naive = true;
  bool fit_vse = true;
  /// Multiplier turning levels into zeta in the domain's units. Empty:
  /// calibrated so the largest level removes `target_removal` of the
  /// intensity-weighted mass.
  std::optional<double> zeta_scale;
  double target_removal = 0.49;
  double max_failure_fraction = 0.2;
  /// Skip fitting and use the truth as every posterior draw.
  bool self_test = false;
  std::uint64_t seed = 1;
  int threads = 1;
  FitOptions fit;  // its seed, threads and distance are set per fit

  void validate() const;
};

struct ReplicateRecord {
  std::size_t scenario = 0;
  double level = 0.0;  // unscaled zeta level
  std::string model;
  int replicate = 0;
  std::string parameter;
  double truth = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool covered = false;
  double ci_width = 0.0;
  std::vector<double> draws;
};

struct FitRecord {
  std::size_t scenario = 0;
  double level = 0.0;
  std::string model;
  int replicate = 0;
  std::size_t simulated = 0;
  std::size_t observed = 0;
  std::optional<ModelScores> scores;
};

struct FailureRecord {
  std::size_t scenario = 0;
  std::string model;
  int replicate = 0;
  std::string message;
};

struct ScenarioResult {
  ScenarioConfig config;
  double zeta_scale = 1.0;
  std::vector<double> expected_removal;  // per level, intensity-weighted
  std::vector<ReplicateRecord> records;
  std::vector<FitRecord> fits;
  std::vector<FailureRecord> failures;
  std::size_t attempted_fits = 0;
};

/// Simulate, thin at every level, fit the configured models and record
/// per-replicate bias, RMSE and interval coverage. Replicates run in
/// parallel; results do not depend on the thread count.
ScenarioResult run_scenarios(const ScenarioConfig& config, const SyntheticDomain& assets);

/// Mean over replicates per (scenario, model, parameter).
struct SummaryRow {
  std::size_t scenario = 0;
  double level = 0.0;
  std::string model;
  std::string parameter;
  std::size_t replicates = 0;
  double bias = 0.0;
  double rmse = 0.0;
  double coverage = 0.0;
  double mean_width = 0.0;
};
std::vector<SummaryRow> summarize(const ScenarioResult& result);

struct CoverageRow {
  std::size_t scenario = 0;
  double level = 0.0;
  std::string model;
  std::string parameter;
  double coverage = 0.0;
  double mean_width = 0.0;
  std::size_t replicates = 0;
};
std::vector<CoverageRow> coverage_table(const ScenarioResult& result);

/// Tidy per-replicate CSV: scenario, zeta, model, parameter, replicate,
/// bias, rmse, covered, ci_width, truth, lower, upper.
void write_records_csv(const ScenarioResult& result, std::ostream& out);
/// One row per posterior draw: scenario, model, parameter, replicate, draw, value.
void write_draws_csv(const ScenarioResult& result, std::ostream& out);
/// One row per fit: point counts and criteria.
void write_fits_csv(const ScenarioResult& result, std::ostream& out);
/// Bias/RMSE table and coverage table in Markdown.
void write_summary_markdown(const ScenarioResult& result, std::ostream& out);

/// Equal-tailed interval from draws (type-7 quantiles).
std::pair<double, double> equal_tailed_interval(std::vector<double> draws, double level);

}  // namespace vse
