#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "xai/errors.hpp"
#include "xai/metrics.hpp"
#include "xai/rng.hpp"
#include "xai/simgen.hpp"
#include "xai/xai_model.hpp"

using namespace xai;
using namespace xai::model;

namespace {

simgen::SyntheticTruth tiny_truth(std::uint64_t seed = 5, int n = 10,
                                  int J = 12, int V = 4) {
  simgen::ScenarioSpec spec = simgen::find_scenario("case1");
  spec.n = n;
  spec.n_train = n - 4;
  spec.n_val = 2;
  spec.n_test = 2;
  spec.J = J;
  spec.V = V;
  spec.seed = seed;
  return simgen::generate_scenario(spec);
}

FeatureTable features_of(const simgen::SyntheticTruth& truth) {
  FeatureTable f;
  f.V = truth.dataset.V;
  f.values = truth.g;
  return f;
}

XaiConfig tiny_config() {
  XaiConfig cfg;
  cfg.beta_hidden = {8};
  cfg.h_hidden = {8};
  cfg.epochs = 10;
  cfg.batch_size = 16;
  cfg.F = 20;
  cfg.seed = 3;
  return cfg;
}

// Monte Carlo estimate of the deep-GP evidence lower bound at one dropout
// realization: data log-likelihood under the masked network minus the
// inclusion-probability-weighted squared-norm prior term. Kept independent
// of the production loss so the two sides cross-check each other.
double gp_mc_objective(const TrainedModel& model, const SpatialDataset& data,
                       const FeatureTable& features, double tau2,
                       const ModelMask* mask) {
  double loglik = 0.0;
  const int V = data.V;
  for (int i : data.train_idx) {
    for (int j = 0; j < data.J(); ++j) {
      Eigen::VectorXd x(data.Q());
      for (int q = 0; q < data.Q(); ++q) x(q) = data.X[q](i, j);
      const Eigen::VectorXd s = data.coords.row(j).transpose();
      const Eigen::VectorXd g =
          features.row(i, data.node_of[j]).transpose();
      const double mean = model_mean(model, x, s, g, mask);
      const double r = data.Y(i, j) - mean;
      loglik += -r * r / (2.0 * tau2) - 0.5 * std::log(2.0 * M_PI * tau2);
    }
  }
  double prior = 0.0;
  auto add_prior = [&](const nnet::MLPParams& net) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      prior += 0.5 * net.spec[l].dropout_keep *
               (net.layers[l].W.squaredNorm() + net.layers[l].b.squaredNorm());
    }
  };
  for (const auto& net : model.beta_nets) add_prior(net);
  if (model.has_h) add_prior(model.h_net);
  return loglik - prior;
}

TrainingBatch full_batch(const SpatialDataset& data,
                         const FeatureTable& features) {
  const long N = static_cast<long>(data.train_idx.size()) * data.J();
  TrainingBatch batch;
  batch.S.resize(N, data.d());
  batch.Xb.resize(N, data.Q());
  batch.G.resize(N, features.dim());
  batch.y.resize(N);
  long t = 0;
  for (int i : data.train_idx) {
    for (int j = 0; j < data.J(); ++j, ++t) {
      batch.S.row(t) = data.coords.row(j);
      for (int q = 0; q < data.Q(); ++q) batch.Xb(t, q) = data.X[q](i, j);
      batch.G.row(t) = features.row(i, data.node_of[j]);
      batch.y(t) = data.Y(i, j);
    }
  }
  return batch;
}

}  // namespace

TEST_CASE("standardization uses training statistics and inverts") {
  const auto truth = tiny_truth();
  auto [std_data, stats] = standardize(truth.dataset);

  const int J = truth.dataset.J();
  for (int j = 0; j < J; ++j) {
    double sum = 0.0, sq = 0.0;
    for (int i : std_data.train_idx) {
      sum += std_data.Y(i, j);
      sq += std_data.Y(i, j) * std_data.Y(i, j);
    }
    const double n = static_cast<double>(std_data.train_idx.size());
    CHECK(sum / n == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(sq / (n - 1.0) == doctest::Approx(1.0).epsilon(1e-8));
  }

  const SpatialDataset back = unstandardize(std_data, stats);
  CHECK((back.Y - truth.dataset.Y).array().abs().maxCoeff() < 1e-12);
  for (int q = 0; q < truth.dataset.Q(); ++q) {
    CHECK((back.X[q] - truth.dataset.X[q]).array().abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("loss matches a hand computation on a linear model") {
  TrainedModel m;
  m.beta0 = 0.5;
  m.has_h = false;
  nnet::MLPParams net;
  net.spec = {{1, 1, nnet::Activation::Identity, 0.9}};
  net.layers.resize(1);
  net.layers[0].W = Eigen::MatrixXd::Constant(1, 1, 2.0);  // beta(s) = 2s + 1
  net.layers[0].b = Eigen::VectorXd::Constant(1, 1.0);
  m.beta_nets.push_back(net);

  TrainingBatch batch;
  batch.S = Eigen::MatrixXd::Constant(1, 1, 3.0);   // beta = 7
  batch.Xb = Eigen::MatrixXd::Constant(1, 1, 2.0);  // pred = 0.5 + 14 = 14.5
  batch.G.resize(1, 0);
  batch.y = Eigen::VectorXd::Constant(1, 10.0);
  const double tau2 = 2.0;
  const std::int64_t N = 50;
  // sse/(2*B*tau2) + keep/(2N) * (4 + 1)
  const double expect = 4.5 * 4.5 / (2.0 * 2.0) + 0.9 / 100.0 * 5.0;
  CHECK(loss(m, batch, N, tau2) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("regularized loss and the GP-MC bound are equivalent objectives") {
  const auto truth = tiny_truth(11, 10, 12, 4);
  auto [data, stats] = standardize(truth.dataset);
  const FeatureTable features = features_of(truth);
  const TrainingBatch batch = full_batch(data, features);
  const std::int64_t N = batch.y.size();

  XaiConfig cfg = tiny_config();
  cfg.epochs = 1;
  TrainedModel m = train(data, features, cfg);
  m.stand = stats;

  Rng rng(99);
  double reference = 0.0;
  for (int setting = 0; setting < 6; ++setting) {
    // random parameters, random tau2, random mask: the sum must not move
    for (auto& net : m.beta_nets) {
      net = nnet::init_mlp(net.spec, derive_seed(1000, 1, setting));
    }
    m.h_net = nnet::init_mlp(m.h_net.spec, derive_seed(1000, 2, setting));
    m.beta0 = rng.normal();
    const double tau2 = 0.5 + rng.uniform();
    const ModelMask mask = sample_model_mask(m, derive_seed(1000, 3, setting));

    const double combined =
        loss(m, batch, N, tau2, &mask) +
        gp_mc_objective(m, data, features, tau2, &mask) / N +
        0.5 * std::log(2.0 * M_PI * tau2);
    if (setting == 0) reference = combined;
    CHECK(std::abs(combined) < 1e-8);
    CHECK(std::abs(combined - reference) < 1e-10);
  }
}

TEST_CASE("training loss decreases with more epochs on easy data") {
  const auto truth = tiny_truth(21, 14, 12, 4);
  auto [data, stats] = standardize(truth.dataset);
  const FeatureTable features = features_of(truth);

  XaiConfig cfg = tiny_config();
  cfg.dropout_keep = 1.0;  // deterministic path
  cfg.learning_rate = 0.005;
  double last = std::numeric_limits<double>::infinity();
  for (int epochs : {5, 10, 20, 40}) {
    cfg.epochs = epochs;
    const TrainedModel m = train(data, features, cfg);
    const double final_loss = m.loss_trace.back();
    CHECK(final_loss <= last + 1e-9);
    last = final_loss;
  }
}

TEST_CASE("training is deterministic per seed") {
  const auto truth = tiny_truth(31);
  auto [data, stats] = standardize(truth.dataset);
  const FeatureTable features = features_of(truth);
  const XaiConfig cfg = tiny_config();
  const TrainedModel a = train(data, features, cfg);
  const TrainedModel b = train(data, features, cfg);
  CHECK(a.beta0 == b.beta0);
  CHECK(a.tau2_hat == b.tau2_hat);
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(a.beta_nets[0].layers[0].W == b.beta_nets[0].layers[0].W);
}

TEST_CASE("per-draw residual variance follows the masked-fit formula") {
  const auto truth = tiny_truth(41);
  auto [data, stats] = standardize(truth.dataset);
  const FeatureTable features = features_of(truth);
  const XaiConfig cfg = tiny_config();
  TrainedModel m = train(data, features, cfg);
  m.stand = stats;
  const PosteriorDraws draws = mc_dropout_draws(m, data, features, cfg);
  REQUIRE(draws.beta_draws.size() == 20);

  const int f = 3;
  const ModelMask mask =
      sample_model_mask(m, derive_seed(draws.mask_seed_base, 0, f));
  double sse = 0.0;
  long count = 0;
  for (int i : data.train_idx) {
    for (int j = 0; j < data.J(); ++j) {
      Eigen::VectorXd x(data.Q());
      for (int q = 0; q < data.Q(); ++q) x(q) = data.X[q](i, j);
      const double mean = model_mean(m, x, data.coords.row(j).transpose(),
                                     features.row(i, data.node_of[j]).transpose(),
                                     &mask);
      const double r = data.Y(i, j) - mean;
      sse += r * r;
      ++count;
    }
  }
  CHECK(draws.tau2(f) == doctest::Approx(sse / count).epsilon(1e-10));

  // the exported beta draw must match the masked network evaluated at the
  // model's centered coordinates
  for (int j = 0; j < data.J(); ++j) {
    const double val = nnet::forward(
        nnet::apply_mask(m.beta_nets[0], mask.beta[0]),
        (data.coords.row(j).transpose() - m.coord_center).eval());
    CHECK(draws.beta_draws[f](j, 0) == doctest::Approx(val).epsilon(1e-12));
  }
}

TEST_CASE("keep probability one collapses the posterior") {
  const auto truth = tiny_truth(51);
  auto [data, stats] = standardize(truth.dataset);
  const FeatureTable features = features_of(truth);
  XaiConfig cfg = tiny_config();
  cfg.dropout_keep = 1.0;
  TrainedModel m = train(data, features, cfg);
  m.stand = stats;
  const PosteriorDraws draws = mc_dropout_draws(m, data, features, cfg);
  for (std::size_t f = 1; f < draws.beta_draws.size(); ++f) {
    CHECK(draws.beta_draws[f] == draws.beta_draws[0]);
    CHECK(draws.h_draws.row(f) == draws.h_draws.row(0));
    CHECK(draws.tau2(f) == draws.tau2(0));
  }
  const HSummary h = infer_h(draws);
  CHECK((h.upper - h.lower).array().abs().maxCoeff() == 0.0);
  CHECK(h.sd.array().abs().maxCoeff() == 0.0);

  const BetaRefined refined = beta_normal_refine(draws);
  CHECK(refined.zero_variance_count ==
        static_cast<int>(refined.mu.size()));
}

TEST_CASE("posterior predictive composes draws with observation noise") {
  const auto truth = tiny_truth(61);
  auto [data, stats] = standardize(truth.dataset);
  const FeatureTable features = features_of(truth);
  const XaiConfig cfg = tiny_config();
  TrainedModel m = train(data, features, cfg);
  m.stand = stats;
  const PosteriorDraws draws = mc_dropout_draws(m, data, features, cfg);

  const int subject = data.test_idx.front();
  const PredictiveSamples ps =
      posterior_predictive(m, draws, data, subject, 17);
  CHECK(ps.std_scale.rows() == cfg.F);
  CHECK(ps.std_scale.cols() == data.J());
  for (int j = 0; j < data.J(); ++j) {
    for (int f = 0; f < cfg.F; ++f) {
      CHECK(ps.orig_scale(f, j) ==
            doctest::Approx(stats.y_mean(j) + stats.y_sd(j) * ps.std_scale(f, j))
                .epsilon(1e-12));
    }
  }
  // same seed reproduces, different seed varies
  const PredictiveSamples again =
      posterior_predictive(m, draws, data, subject, 17);
  CHECK(ps.std_scale == again.std_scale);
  const PredictiveSamples other =
      posterior_predictive(m, draws, data, subject, 18);
  CHECK(ps.std_scale != other.std_scale);
}

TEST_CASE("beta refinement averages the draws") {
  const auto truth = tiny_truth(71);
  auto [data, stats] = standardize(truth.dataset);
  const FeatureTable features = features_of(truth);
  const XaiConfig cfg = tiny_config();
  TrainedModel m = train(data, features, cfg);
  m.stand = stats;
  const PosteriorDraws draws = mc_dropout_draws(m, data, features, cfg);
  const BetaRefined refined = beta_normal_refine(draws);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(data.J(), data.Q());
  for (const auto& d : draws.beta_draws) mean += d;
  mean /= static_cast<double>(draws.beta_draws.size());
  CHECK((refined.mu - mean).array().abs().maxCoeff() < 1e-12);
}

TEST_CASE("config validation") {
  XaiConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
  cfg = XaiConfig{};
  cfg.dropout_keep = 0.0;
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
  cfg = XaiConfig{};
  cfg.F = 1;
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
  cfg = XaiConfig{};
  cfg.learning_rate = -0.1;
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
}
