#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vse {

/// Log pointwise likelihood contributions, one row per pseudo-observation
/// and one column per posterior sample. For an LGCP the rows are the
/// integration nodes (-a_i exp(eta_i)) followed by the observed points
/// (eta(s_j)); any other model can fill the table the same way.
struct PointwiseLikelihoodTable {
  Eigen::MatrixXd log_lik;            // rows x samples
  /// Each row's log-likelihood evaluated at the posterior mean of the
  /// linear predictor, used as D(theta bar).
  Eigen::VectorXd log_lik_at_mean;
  std::size_t node_rows = 0;          // leading rows that are integration nodes

  std::size_t rows() const { return static_cast<std::size_t>(log_lik.rows()); }
  std::size_t samples() const { return static_cast<std::size_t>(log_lik.cols()); }
  void validate(std::size_t min_samples = 100) const;
};

struct DicResult {
  double dic = 0.0;
  double p_d = 0.0;
  double d_bar = 0.0;
  double d_at_mean = 0.0;
  bool degenerate = false;  // p_D numerically zero
};

struct WaicResult {
  double waic = 0.0;
  double p_waic = 0.0;  // sum over rows of the sample variance of log p
  double lppd = 0.0;
};

/// kPenalized: Watanabe's -2 [lppd - p_waic] (default). kPlusPenalty:
/// -2 [lppd + p_waic], a sign variant seen in some texts; kept for
/// comparison only since it rewards complexity.
enum class WaicConvention { kPenalized, kPlusPenalty };

struct LpmlResult {
  double lpml = 0.0;
  std::vector<double> log_cpo;
  std::vector<bool> unreliable;
  std::size_t unreliable_count = 0;
};

DicResult dic(const PointwiseLikelihoodTable& table);
WaicResult waic(const PointwiseLikelihoodTable& table,
                WaicConvention convention = WaicConvention::kPenalized);
/// Harmonic-mean CPO; rows whose importance weights have relative
/// effective sample size below `min_relative_ess` are flagged.
LpmlResult lpml(const PointwiseLikelihoodTable& table, double min_relative_ess = 0.05);

/// All three criteria for one fitted model.
struct ModelScores {
  DicResult dic;
  WaicResult waic;
  LpmlResult lpml;
  std::size_t samples = 0;
};

ModelScores score_table(const PointwiseLikelihoodTable& table,
                        WaicConvention convention = WaicConvention::kPenalized);

}  // namespace vse
