#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xai/simgen.hpp"
#include "xai/xai_model.hpp"

namespace xai::metrics {

double rmspe(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

struct IntervalSummary {
  Eigen::VectorXd lower;  // per target
  Eigen::VectorXd upper;
  double coverage = 0.0;
  double mean_length = 0.0;
};

enum class IntervalType { Quantile, Hpd };

// Equal-tailed (or HPD) intervals per target from an F x targets draw matrix.
IntervalSummary coverage_and_length(const Eigen::MatrixXd& draws,
                                    const Eigen::VectorXd& truth,
                                    double level = 0.95,
                                    IntervalType type = IntervalType::Quantile);

// Draw-wise Var(fit) / (Var(fit) + Var(residual)) averaged over draws.
double bayes_r2(const Eigen::MatrixXd& fit_draws,
                const Eigen::VectorXd& residual_var_draws);

struct GlmFit {
  Eigen::MatrixXd coef;        // J x (1 + Q + g_dim) per-ROI OLS coefficients
  Eigen::MatrixXd beta;        // J x Q coefficients on x, original scale
  Eigen::MatrixXd pred_test;   // n_test x J predictions, original scale
  double r2 = 0.0;             // frequentist R^2 on the test split
  int dropped_columns = 0;     // collinear columns removed
};

// Per-ROI ordinary least squares of y on (1, x, g); all inputs original scale.
GlmFit glm_baseline(const model::SpatialDataset& data,
                    const model::FeatureTable& features);

struct ReplicationRecord {
  std::string method;
  int replication = 0;
  bool ok = true;
  std::string error;
  double rmspe = 0.0;          // original scale, test split
  double coverage = 0.0;       // 95% predictive, standardized scale
  double interval_length = 0.0;
  std::vector<double> beta_rmse;  // per predictor, original scale
  double h_rmse = 0.0;            // centered comparison, original scale
  double r2 = 0.0;
  double seconds_simulate = 0.0;
  double seconds_fit = 0.0;
  double seconds_draws = 0.0;
  double seconds_eval = 0.0;
};

struct AggregateRow {
  std::string method;
  int replications = 0;
  double rmspe_mean = 0.0, rmspe_se = 0.0;
  double coverage_mean = 0.0, coverage_se = 0.0;
  double length_mean = 0.0, length_se = 0.0;
  std::vector<double> beta_rmse_mean, beta_rmse_se;
  double h_rmse_mean = 0.0, h_rmse_se = 0.0;
  double r2_mean = 0.0, r2_se = 0.0;
  bool se_available = true;
};

struct BenchmarkReport {
  std::string case_label;
  int replications = 0;
  std::vector<ReplicationRecord> records;
  std::vector<AggregateRow> aggregates;
  int failures = 0;
};

struct BenchmarkOptions {
  std::vector<std::string> methods = {"xai", "glm"};  // also "xai-no-network"
  int replications = 10;
  std::uint64_t seed = 0;
  model::XaiConfig xai;
  IntervalType interval_type = IntervalType::Quantile;
};

// Runs generate -> fit -> evaluate per replication and method; replication
// failures are recorded in the report rather than thrown.
BenchmarkReport benchmark(const simgen::ScenarioSpec& scenario,
                          const BenchmarkOptions& options);

// Evaluation of one fitted replication against the synthetic truth; shared
// between benchmark and the acceptance suite.
struct EvalResult {
  double rmspe = 0.0;
  double coverage = 0.0;
  double interval_length = 0.0;
  std::vector<double> beta_rmse;
  double h_rmse = 0.0;
  double r2 = 0.0;
};

EvalResult evaluate_xai(const simgen::SyntheticTruth& truth,
                        const model::SpatialDataset& standardized,
                        const model::TrainedModel& trained,
                        const model::PosteriorDraws& draws,
                        IntervalType type = IntervalType::Quantile);

EvalResult evaluate_glm(const simgen::SyntheticTruth& truth,
                        const GlmFit& fit);

AggregateRow aggregate(const std::string& method,
                       const std::vector<ReplicationRecord>& records);

}  // namespace xai::metrics
