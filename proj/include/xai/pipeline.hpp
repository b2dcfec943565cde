#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xai/bundle.hpp"
#include "xai/latent_network.hpp"
#include "xai/metrics.hpp"
#include "xai/simgen.hpp"
#include "xai/xai_model.hpp"

namespace xai::pipeline {

// Structured-text run configuration; every field has a default and unknown
// keys are rejected.
struct RunConfig {
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;

  std::string case_label = "case1";
  // scenario overrides, applied on top of the named case
  std::optional<int> n, n_train, n_val, n_test, V, J, Q, d, g_dim;
  std::optional<double> tau2;
  std::optional<bool> end_to_end_networks;
  std::optional<double> network_sigma2;
  std::vector<double> delta2;  // Q beta variances then the h variance
  std::vector<double> gp_scale;  // matching length-scales

  latent::McmcConfig mcmc;
  model::XaiConfig xai;

  std::vector<double> lr_grid;    // optional validation tuning grids
  std::vector<double> keep_grid;

  std::vector<std::string> methods = {"xai", "glm"};
  int replications = 10;
  metrics::IntervalType interval_type = metrics::IntervalType::Quantile;

  std::string predict_split = "test";  // train | val | test | all
  bool predict_samples = false;
};

RunConfig parse_run_config(const std::filesystem::path& path);

// Applies the scenario overrides of cfg to the named catalog case.
simgen::ScenarioSpec resolve_scenario(const RunConfig& cfg);

int worker_count();  // XAI_WORKERS env var, default hardware concurrency

void cmd_simulate(const RunConfig& cfg);

void cmd_embed(const RunConfig& cfg, const std::filesystem::path& bundle_dir);

struct FitOutcome {
  double tau2_hat = 0.0;
  double val_rmspe = 0.0;   // original scale; NaN when no validation split
  double test_rmspe = 0.0;  // original scale; NaN when no test split
  double chosen_learning_rate = 0.0;
  double chosen_keep = 0.0;
};

// features_path may be empty when the bundle carries a truth sidecar; the
// truth g table then stands in for stage-1 features.
FitOutcome cmd_fit(const RunConfig& cfg,
                   const std::filesystem::path& bundle_dir,
                   const std::filesystem::path& features_path);

void cmd_predict(const RunConfig& cfg,
                 const std::filesystem::path& checkpoint_path,
                 const std::filesystem::path& bundle_dir,
                 const std::filesystem::path& draws_dir,
                 const std::filesystem::path& features_path);

metrics::BenchmarkReport cmd_benchmark(const RunConfig& cfg);

}  // namespace xai::pipeline
