#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "xai/errors.hpp"
#include "xai/metrics.hpp"
#include "xai/rng.hpp"
#include "xai/simgen.hpp"

using namespace xai;
using namespace xai::metrics;

TEST_CASE("rmspe basics") {
  Eigen::VectorXd pred(3), truth(3);
  pred << 1, 2, 3;
  truth << 1, 2, 3;
  CHECK(rmspe(pred, truth) == 0.0);
  truth << 2, 3, 4;
  CHECK(rmspe(pred, truth) == doctest::Approx(1.0).epsilon(1e-12));
  Eigen::VectorXd shorter(2);
  CHECK_THROWS_AS(rmspe(pred, shorter), ValidationError);
}

TEST_CASE("coverage and length from known draws") {
  // draws at target 0 are 0..99, at target 1 are 100..199
  Eigen::MatrixXd draws(100, 2);
  for (int f = 0; f < 100; ++f) {
    draws(f, 0) = f;
    draws(f, 1) = 100 + f;
  }
  Eigen::VectorXd truth(2);
  truth << 50.0, 500.0;  // inside, outside
  const IntervalSummary s = coverage_and_length(draws, truth, 0.95);
  CHECK(s.coverage == doctest::Approx(0.5));
  // type-7 quantiles of 0..99 at 0.025 and 0.975
  CHECK(s.lower(0) == doctest::Approx(2.475));
  CHECK(s.upper(0) == doctest::Approx(96.525));
  CHECK(s.mean_length == doctest::Approx(96.525 - 2.475).epsilon(1e-10));
}

TEST_CASE("hpd intervals are no longer than quantile intervals") {
  Rng rng(12);
  const int F = 2000;
  Eigen::MatrixXd draws(F, 1);
  for (int f = 0; f < F; ++f) {
    const double z = rng.normal();
    draws(f, 0) = z * z;  // right skewed
  }
  Eigen::VectorXd truth(1);
  truth << 0.5;
  const auto q = coverage_and_length(draws, truth, 0.95, IntervalType::Quantile);
  const auto h = coverage_and_length(draws, truth, 0.95, IntervalType::Hpd);
  CHECK(h.mean_length <= q.mean_length + 1e-12);
  CHECK(h.lower(0) < 0.01);  // mass piles up at zero
}

TEST_CASE("bayes r2 on constructed draws") {
  Eigen::MatrixXd fits(3, 2);
  fits << 2, -2, 2, -2, 2, -2;  // per-draw sample variance 8
  Eigen::VectorXd resid(3);
  resid << 8, 8, 8;
  CHECK(bayes_r2(fits, resid) == doctest::Approx(0.5).epsilon(1e-12));
  Eigen::VectorXd bad(2);
  CHECK_THROWS_AS(bayes_r2(fits, bad), ValidationError);
}

TEST_CASE("glm baseline recovers a noiseless linear model exactly") {
  simgen::ScenarioSpec spec = simgen::find_scenario("case1");
  spec.n = 30;
  spec.n_train = 20;
  spec.n_val = 5;
  spec.n_test = 5;
  spec.J = 12;
  spec.V = 4;
  spec.seed = 8;
  spec.tau2 = 1e-20;  // effectively noiseless
  const auto truth = simgen::generate_scenario(spec);
  model::FeatureTable features;
  features.V = spec.V;
  features.values = truth.g;

  // y is exactly x' beta(s) + h(g); h is a nonlinear function of g so the
  // linear fit is not exact, but beta given (1, x, g) is close since x is
  // independent of g. Instead build a strictly linear outcome:
  model::SpatialDataset data = truth.dataset;
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.J(); ++j) {
      data.Y(i, j) = 1.0 + 2.0 * data.X[0](i, j) - 3.0 * data.X[1](i, j) +
                     0.5 * features.row(i, data.node_of[j])(0);
    }
  }
  const GlmFit fit = glm_baseline(data, features);
  CHECK(fit.dropped_columns == 0);
  for (int j = 0; j < data.J(); ++j) {
    CHECK(fit.beta(j, 0) == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(fit.beta(j, 1) == doctest::Approx(-3.0).epsilon(1e-8));
    CHECK(fit.coef(j, 0) == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("glm baseline flags collinear designs") {
  simgen::ScenarioSpec spec = simgen::find_scenario("case1");
  spec.n = 25;
  spec.n_train = 15;
  spec.n_val = 5;
  spec.n_test = 5;
  spec.J = 8;
  spec.V = 4;
  spec.seed = 9;
  const auto truth = simgen::generate_scenario(spec);
  model::SpatialDataset data = truth.dataset;
  data.X[1] = data.X[0];  // duplicated predictor
  model::FeatureTable features;
  features.V = spec.V;
  features.values = truth.g;
  const GlmFit fit = glm_baseline(data, features);
  CHECK(fit.dropped_columns > 0);
  CHECK(fit.pred_test.allFinite());
}

TEST_CASE("aggregate marks single-replication standard errors unavailable") {
  std::vector<ReplicationRecord> records;
  ReplicationRecord rec;
  rec.method = "xai";
  rec.rmspe = 2.0;
  rec.beta_rmse = {0.1, 0.2};
  records.push_back(rec);
  const AggregateRow one = aggregate("xai", records);
  CHECK(one.replications == 1);
  CHECK_FALSE(one.se_available);
  CHECK(one.rmspe_mean == doctest::Approx(2.0));

  rec.rmspe = 3.0;
  rec.replication = 1;
  records.push_back(rec);
  const AggregateRow two = aggregate("xai", records);
  CHECK(two.se_available);
  CHECK(two.rmspe_mean == doctest::Approx(2.5));
  CHECK(two.rmspe_se == doctest::Approx(0.5).epsilon(1e-10));

  // failed replications are excluded
  rec.ok = false;
  rec.rmspe = 1000.0;
  records.push_back(rec);
  CHECK(aggregate("xai", records).replications == 2);
}

TEST_CASE("benchmark runs a tiny sweep with failure capture") {
  simgen::ScenarioSpec spec = simgen::find_scenario("case1");
  spec.n = 24;
  spec.n_train = 14;
  spec.n_val = 5;
  spec.n_test = 5;
  spec.J = 8;
  spec.V = 4;
  BenchmarkOptions options;
  options.replications = 2;
  options.seed = 3;
  options.methods = {"xai", "glm", "xai-no-network"};
  options.xai.epochs = 5;
  options.xai.F = 20;
  options.xai.beta_hidden = {8};
  options.xai.h_hidden = {8};
  const BenchmarkReport report = benchmark(spec, options);
  CHECK(report.records.size() == 6);
  CHECK(report.failures == 0);
  CHECK(report.aggregates.size() == 3);
  for (const auto& rec : report.records) {
    CHECK(rec.ok);
    CHECK(std::isfinite(rec.rmspe));
    CHECK(rec.seconds_fit >= 0.0);
  }
  // determinism of the sweep
  const BenchmarkReport again = benchmark(spec, options);
  CHECK(again.records[0].rmspe == report.records[0].rmspe);

  BenchmarkOptions bad = options;
  bad.methods = {"nonsense"};
  const BenchmarkReport failed = benchmark(spec, bad);
  CHECK(failed.failures == 2);
  CHECK_FALSE(failed.records[0].ok);
  CHECK(failed.records[0].error.find("nonsense") != std::string::npos);
}
