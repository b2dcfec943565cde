#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "xai/nnet.hpp"

namespace xai::model {

// Outcomes and spatial predictors over J ROIs nested in V nodes.
struct SpatialDataset {
  Eigen::MatrixXd coords;    // J x d
  std::vector<int> node_of;  // J entries in [0, V)
  int V = 0;
  std::vector<Eigen::MatrixXd> X;  // Q matrices, each n x J
  Eigen::MatrixXd Y;               // n x J
  std::vector<int> train_idx;
  std::vector<int> val_idx;
  std::vector<int> test_idx;

  int n() const { return static_cast<int>(Y.rows()); }
  int J() const { return static_cast<int>(Y.cols()); }
  int Q() const { return static_cast<int>(X.size()); }
  int d() const { return static_cast<int>(coords.cols()); }
};

void validate_dataset(const SpatialDataset& data);

// Stage-1 features g_{i,v}, one row per (subject, node), row index i*V + v.
struct FeatureTable {
  Eigen::MatrixXd values;  // (n*V) x dim
  int V = 0;

  int dim() const { return static_cast<int>(values.cols()); }
  Eigen::RowVectorXd row(int i, int v) const { return values.row(i * V + v); }
};

struct Standardization {
  Eigen::VectorXd y_mean, y_sd;  // J
  Eigen::MatrixXd x_mean, x_sd;  // J x Q
  std::vector<int> degenerate_y;            // ROIs centered only
  std::vector<std::pair<int, int>> degenerate_x;  // (roi, q) centered only
};

// Per-ROI standardization using training-split statistics.
std::pair<SpatialDataset, Standardization> standardize(
    const SpatialDataset& data);

SpatialDataset unstandardize(const SpatialDataset& data,
                             const Standardization& stats);

struct XaiConfig {
  // Width matters for the beta surfaces: at 64 the nets plateau right at the
  // per-ROI least-squares error on rough coefficient fields, at 128 they pool
  // across nearby ROIs and get below it. h is much easier, 64 is plenty.
  std::vector<int> beta_hidden = {128, 128};
  std::vector<int> h_hidden = {64, 64};
  nnet::Activation hidden_activation = nnet::Activation::Relu;
  // Entrywise keep probabilities for weights and biases: the variational
  // inclusion probability of the mixture distribution. dropout_keep applies
  // to the final layer of each subnetwork, dropout_hidden_keep to the hidden
  // layers. Masking every layer at 0.9 attenuates the fitted surfaces badly,
  // so by default only the final layer is stochastic.
  double dropout_keep = 0.95;
  double dropout_hidden_keep = 1.0;
  double learning_rate = 0.25;
  // Step-size schedule: constant for the first three quarters of training,
  // then decays geometrically so the final epoch runs at
  // learning_rate * lr_decay.
  double lr_decay = 0.01;
  int epochs = 200;
  int batch_size = 64;
  int F = 200;               // MC dropout draws
  double prior_sigma2 = 1e-2;  // variational spread; enters the objective
                               // equivalence only through constants
  bool use_network = true;   // false drops the h network (ablation)
  std::uint64_t seed = 0;
};

void validate_config(const XaiConfig& cfg);

struct TrainedModel {
  std::vector<nnet::MLPParams> beta_nets;  // one per predictor q
  nnet::MLPParams h_net;
  bool has_h = true;
  double beta0 = 0.0;
  // Mean ROI coordinate; beta networks see s - coord_center so hidden units
  // activate around the middle of the domain. Empty means no centering.
  Eigen::VectorXd coord_center;
  double tau2_hat = 1.0;  // profiled residual variance, standardized scale
  Standardization stand;
  XaiConfig config;
  std::vector<double> loss_trace;  // full-data objective per epoch
};

struct ModelMask {
  std::vector<nnet::DropoutMask> beta;
  nnet::DropoutMask h;
};

ModelMask sample_model_mask(const TrainedModel& model, std::uint64_t seed);

double model_mean(const TrainedModel& model, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& s, const Eigen::VectorXd& g,
                  const ModelMask* mask = nullptr);

// A slice of (standardized) observations used by the loss.
struct TrainingBatch {
  Eigen::MatrixXd S;  // B x d
  Eigen::MatrixXd Xb; // B x Q
  Eigen::MatrixXd G;  // B x g_dim
  Eigen::VectorXd y;  // B
};

// Mean squared-error term normalized so a full-data batch reproduces the
// regularized objective exactly, plus L2 penalties with
// lambda_l = keep_l / (2N).
double loss(const TrainedModel& model, const TrainingBatch& batch,
            std::int64_t full_data_size, double tau2,
            const ModelMask* mask = nullptr);

TrainedModel train(const SpatialDataset& standardized,
                   const FeatureTable& features, const XaiConfig& cfg);

struct PosteriorDraws {
  std::vector<Eigen::MatrixXd> beta_draws;  // F entries, J x Q
  Eigen::MatrixXd h_draws;                  // F x (n*V)
  Eigen::VectorXd tau2;                     // F, standardized scale
  std::uint64_t mask_seed_base = 0;         // regenerates draw-f masks
  int V = 0;
};

PosteriorDraws mc_dropout_draws(const TrainedModel& model,
                                const SpatialDataset& standardized,
                                const FeatureTable& features,
                                const XaiConfig& cfg);

struct BetaRefined {
  Eigen::MatrixXd mu;  // J x Q
  Eigen::MatrixXd sd;  // J x Q, zero where draws were degenerate
  int zero_variance_count = 0;
};

BetaRefined beta_normal_refine(const PosteriorDraws& draws);

struct PredictiveSamples {
  Eigen::MatrixXd std_scale;   // F x J composition samples
  Eigen::MatrixXd orig_scale;  // F x J, per-ROI unstandardized
};

// Composition sampling for a subject already present in the draws.
PredictiveSamples posterior_predictive(const TrainedModel& model,
                                       const PosteriorDraws& draws,
                                       const SpatialDataset& standardized,
                                       int subject, std::uint64_t noise_seed);

// Composition sampling for an unseen subject: x on the original scale
// (J x Q), g one row per node. Masks are regenerated per draw.
PredictiveSamples posterior_predictive_new(const TrainedModel& model,
                                           const PosteriorDraws& draws,
                                           const Eigen::MatrixXd& x_orig,
                                           const Eigen::MatrixXd& g,
                                           const std::vector<int>& node_of,
                                           std::uint64_t noise_seed);

struct HSummary {
  Eigen::VectorXd mean, sd, lower, upper;  // per (i, v), row i*V + v
};

HSummary infer_h(const PosteriorDraws& draws, double level = 0.95);

}  // namespace xai::model
