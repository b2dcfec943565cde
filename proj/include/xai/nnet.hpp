#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "xai/rng.hpp"

namespace xai::nnet {

enum class Activation { Relu, Tanh, Identity };

struct LayerSpec {
  int width_in = 0;
  int width_out = 0;
  Activation activation = Activation::Identity;
  double dropout_keep = 1.0;
};

// Convenience builder: widths {in, h1, ..., 1}, hidden activation, identity
// output, given keep probability on every layer.
std::vector<LayerSpec> make_arch(const std::vector<int>& widths,
                                 Activation hidden = Activation::Relu,
                                 double dropout_keep = 1.0);

struct Layer {
  Eigen::MatrixXd W;  // width_out x width_in
  Eigen::VectorXd b;  // width_out
};

struct MLPParams {
  std::vector<Layer> layers;
  std::vector<LayerSpec> spec;

  int input_width() const { return spec.empty() ? 0 : spec.front().width_in; }
  int output_width() const { return spec.empty() ? 0 : spec.back().width_out; }
};

struct MaskLayer {
  Eigen::ArrayXXd W;  // 0/1, same shape as weights
  Eigen::ArrayXd b;   // 0/1, same shape as biases
};

struct DropoutMask {
  std::vector<MaskLayer> layers;
};

// Gradients share the storage layout of the parameters they differentiate.
using MLPGrad = MLPParams;

void validate_spec(const std::vector<LayerSpec>& spec);

// Zero-mean weights scaled by 1/sqrt(width_in), zero biases.
MLPParams init_mlp(const std::vector<LayerSpec>& spec, std::uint64_t seed);

MLPParams zero_like(const std::vector<LayerSpec>& spec);

double forward(const MLPParams& params, const Eigen::VectorXd& input,
               const DropoutMask* mask = nullptr);

// Batched forward: one input per row, one output per row.
Eigen::VectorXd forward_batch(const MLPParams& params,
                              const Eigen::MatrixXd& inputs,
                              const DropoutMask* mask = nullptr);

// Exact reverse-mode gradient of sum_b upstream_b * f(input_b) w.r.t. every
// weight and bias. When a mask is given, gradients are taken w.r.t. the
// underlying parameters of the masked network.
MLPGrad grad(const MLPParams& params,
             const std::vector<std::pair<Eigen::VectorXd, double>>& batch,
             const DropoutMask* mask = nullptr);

MLPGrad grad_batch(const MLPParams& params, const Eigen::MatrixXd& inputs,
                   const Eigen::VectorXd& upstream,
                   const DropoutMask* mask = nullptr);

// Central-difference oracle for grad.
MLPGrad finite_diff_grad(const MLPParams& params,
                         const std::vector<std::pair<Eigen::VectorXd, double>>& batch,
                         double epsilon = 1e-6,
                         const DropoutMask* mask = nullptr);

// params - lr * (grads + 2 * lambda o params), per layer, weights and biases
// penalized separately.
MLPParams sgd_step(const MLPParams& params, const MLPGrad& grads,
                   double learning_rate, const std::vector<double>& l2_weights,
                   const std::vector<double>& l2_biases);

void sgd_step_inplace(MLPParams& params, const MLPGrad& grads,
                      double learning_rate,
                      const std::vector<double>& l2_weights,
                      const std::vector<double>& l2_biases);

DropoutMask sample_dropout_mask(const std::vector<LayerSpec>& spec, Rng& rng);
DropoutMask sample_dropout_mask(const std::vector<LayerSpec>& spec,
                                std::uint64_t seed);

// Masked parameter set: entries of weights/biases zeroed where mask is 0.
MLPParams apply_mask(const MLPParams& params, const DropoutMask& mask);

double squared_l2(const MLPParams& params);

}  // namespace xai::nnet
