#include "xai/nnet.hpp"

#include <cmath>
#include <string>

#include "xai/errors.hpp"

namespace xai::nnet {

namespace {

void activate_inplace(Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::Relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::Tanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::Identity:
      break;
  }
}

// derivative expressed through the activation output a = sigma(z);
// relu subgradient at 0 is 0.
Eigen::ArrayXXd activation_deriv(const Eigen::MatrixXd& a, Activation act) {
  switch (act) {
    case Activation::Relu:
      return (a.array() > 0.0).cast<double>();
    case Activation::Tanh:
      return 1.0 - a.array().square();
    case Activation::Identity:
      return Eigen::ArrayXXd::Ones(a.rows(), a.cols());
  }
  return {};
}

void check_mask_shapes(const MLPParams& params, const DropoutMask& mask) {
  if (mask.layers.size() != params.layers.size()) {
    throw ValidationError("dropout mask layer count does not match network");
  }
  for (std::size_t l = 0; l < mask.layers.size(); ++l) {
    if (mask.layers[l].W.rows() != params.layers[l].W.rows() ||
        mask.layers[l].W.cols() != params.layers[l].W.cols() ||
        mask.layers[l].b.size() != params.layers[l].b.size()) {
      throw ValidationError("dropout mask shape mismatch at layer " +
                            std::to_string(l));
    }
  }
}

}  // namespace

std::vector<LayerSpec> make_arch(const std::vector<int>& widths,
                                 Activation hidden, double dropout_keep) {
  if (widths.size() < 2) {
    throw ValidationError("architecture needs at least input and output widths");
  }
  std::vector<LayerSpec> spec;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const bool last = (l + 2 == widths.size());
    spec.push_back({widths[l], widths[l + 1],
                    last ? Activation::Identity : hidden, dropout_keep});
  }
  return spec;
}

void validate_spec(const std::vector<LayerSpec>& spec) {
  if (spec.empty()) throw ValidationError("empty layer spec");
  for (std::size_t l = 0; l < spec.size(); ++l) {
    const auto& s = spec[l];
    if (s.width_in < 1 || s.width_out < 1) {
      throw ValidationError("layer " + std::to_string(l) +
                            ": widths must be >= 1");
    }
    if (s.dropout_keep < 0.0 || s.dropout_keep > 1.0) {
      throw ValidationError("layer " + std::to_string(l) +
                            ": dropout_keep outside [0,1]");
    }
    if (l > 0 && spec[l - 1].width_out != s.width_in) {
      throw ValidationError("layer widths do not chain at layer " +
                            std::to_string(l));
    }
  }
}

MLPParams init_mlp(const std::vector<LayerSpec>& spec, std::uint64_t seed) {
  validate_spec(spec);
  Rng rng(seed);
  MLPParams params;
  params.spec = spec;
  for (const auto& s : spec) {
    Layer layer;
    layer.W.resize(s.width_out, s.width_in);
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.width_in));
    for (int r = 0; r < layer.W.rows(); ++r) {
      for (int c = 0; c < layer.W.cols(); ++c) {
        layer.W(r, c) = scale * rng.normal();
      }
    }
    layer.b = Eigen::VectorXd::Zero(s.width_out);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

MLPParams zero_like(const std::vector<LayerSpec>& spec) {
  validate_spec(spec);
  MLPParams params;
  params.spec = spec;
  for (const auto& s : spec) {
    params.layers.push_back({Eigen::MatrixXd::Zero(s.width_out, s.width_in),
                             Eigen::VectorXd::Zero(s.width_out)});
  }
  return params;
}

Eigen::VectorXd forward_batch(const MLPParams& params,
                              const Eigen::MatrixXd& inputs,
                              const DropoutMask* mask) {
  if (inputs.cols() != params.input_width()) {
    throw ValidationError("forward: input width " +
                          std::to_string(inputs.cols()) + " != network input " +
                          std::to_string(params.input_width()));
  }
  if (!inputs.allFinite()) throw ValidationError("forward: non-finite input");
  if (mask) check_mask_shapes(params, *mask);
  if (params.output_width() != 1) {
    throw ValidationError("forward: network output width must be 1");
  }

  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Eigen::MatrixXd z;
    if (mask) {
      const Eigen::MatrixXd W = layer.W.array() * mask->layers[l].W;
      const Eigen::VectorXd b =
          (layer.b.array() * mask->layers[l].b).matrix();
      z = (a * W.transpose()).rowwise() + b.transpose();
    } else {
      z = (a * layer.W.transpose()).rowwise() + layer.b.transpose();
    }
    activate_inplace(z, params.spec[l].activation);
    a = std::move(z);
  }
  return a.col(0);
}

double forward(const MLPParams& params, const Eigen::VectorXd& input,
               const DropoutMask* mask) {
  Eigen::MatrixXd row = input.transpose();
  return forward_batch(params, row, mask)(0);
}

MLPGrad grad_batch(const MLPParams& params, const Eigen::MatrixXd& inputs,
                   const Eigen::VectorXd& upstream, const DropoutMask* mask) {
  if (inputs.rows() == 0) throw ValidationError("grad: empty batch");
  if (inputs.rows() != upstream.size()) {
    throw ValidationError("grad: upstream length mismatch");
  }
  if (inputs.cols() != params.input_width()) {
    throw ValidationError("grad: input width mismatch");
  }
  if (mask) check_mask_shapes(params, *mask);

  const std::size_t L = params.layers.size();
  std::vector<Eigen::MatrixXd> acts(L + 1);  // acts[0] = inputs
  acts[0] = inputs;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = params.layers[l];
    Eigen::MatrixXd z;
    if (mask) {
      const Eigen::MatrixXd W = layer.W.array() * mask->layers[l].W;
      const Eigen::VectorXd b =
          (layer.b.array() * mask->layers[l].b).matrix();
      z = (acts[l] * W.transpose()).rowwise() + b.transpose();
    } else {
      z = (acts[l] * layer.W.transpose()).rowwise() + layer.b.transpose();
    }
    activate_inplace(z, params.spec[l].activation);
    if (!z.allFinite()) {
      throw NumericError("grad: non-finite activations at layer " +
                         std::to_string(l));
    }
    acts[l + 1] = std::move(z);
  }

  MLPGrad g = zero_like(params.spec);
  // delta holds dL/dz for the current layer, one row per batch element
  Eigen::MatrixXd delta =
      upstream.asDiagonal() *
      activation_deriv(acts[L], params.spec[L - 1].activation).matrix();
  for (std::size_t l = L; l-- > 0;) {
    g.layers[l].W = delta.transpose() * acts[l];
    g.layers[l].b = delta.colwise().sum().transpose();
    if (mask) {
      g.layers[l].W.array() *= mask->layers[l].W;
      g.layers[l].b.array() *= mask->layers[l].b;
    }
    if (l > 0) {
      Eigen::MatrixXd W_eff = params.layers[l].W;
      if (mask) W_eff.array() *= mask->layers[l].W;
      delta = (delta * W_eff).array() *
              activation_deriv(acts[l], params.spec[l - 1].activation);
    }
  }
  return g;
}

MLPGrad grad(const MLPParams& params,
             const std::vector<std::pair<Eigen::VectorXd, double>>& batch,
             const DropoutMask* mask) {
  if (batch.empty()) throw ValidationError("grad: empty batch");
  Eigen::MatrixXd inputs(batch.size(), params.input_width());
  Eigen::VectorXd upstream(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].first.size() != params.input_width()) {
      throw ValidationError("grad: input width mismatch in batch");
    }
    inputs.row(b) = batch[b].first.transpose();
    upstream(b) = batch[b].second;
  }
  return grad_batch(params, inputs, upstream, mask);
}

MLPGrad finite_diff_grad(
    const MLPParams& params,
    const std::vector<std::pair<Eigen::VectorXd, double>>& batch,
    double epsilon, const DropoutMask* mask) {
  if (epsilon <= 0.0) throw ValidationError("finite_diff_grad: epsilon <= 0");
  if (batch.empty()) throw ValidationError("finite_diff_grad: empty batch");

  MLPParams work = params;
  auto objective = [&]() {
    double total = 0.0;
    for (const auto& [input, upstream] : batch) {
      total += upstream * forward(work, input, mask);
    }
    return total;
  };

  MLPGrad g = zero_like(params.spec);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    for (int r = 0; r < params.layers[l].W.rows(); ++r) {
      for (int c = 0; c < params.layers[l].W.cols(); ++c) {
        const double saved = work.layers[l].W(r, c);
        work.layers[l].W(r, c) = saved + epsilon;
        const double hi = objective();
        work.layers[l].W(r, c) = saved - epsilon;
        const double lo = objective();
        work.layers[l].W(r, c) = saved;
        g.layers[l].W(r, c) = (hi - lo) / (2.0 * epsilon);
      }
    }
    for (int r = 0; r < params.layers[l].b.size(); ++r) {
      const double saved = work.layers[l].b(r);
      work.layers[l].b(r) = saved + epsilon;
      const double hi = objective();
      work.layers[l].b(r) = saved - epsilon;
      const double lo = objective();
      work.layers[l].b(r) = saved;
      g.layers[l].b(r) = (hi - lo) / (2.0 * epsilon);
    }
  }
  return g;
}

void sgd_step_inplace(MLPParams& params, const MLPGrad& grads,
                      double learning_rate,
                      const std::vector<double>& l2_weights,
                      const std::vector<double>& l2_biases) {
  if (learning_rate <= 0.0) throw ValidationError("sgd_step: learning rate <= 0");
  if (grads.layers.size() != params.layers.size() ||
      l2_weights.size() != params.layers.size() ||
      l2_biases.size() != params.layers.size()) {
    throw ValidationError("sgd_step: per-layer size mismatch");
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (l2_weights[l] < 0.0 || l2_biases[l] < 0.0) {
      throw ValidationError("sgd_step: negative L2 penalty");
    }
    params.layers[l].W -=
        learning_rate *
        (grads.layers[l].W + 2.0 * l2_weights[l] * params.layers[l].W);
    params.layers[l].b -=
        learning_rate *
        (grads.layers[l].b + 2.0 * l2_biases[l] * params.layers[l].b);
  }
}

MLPParams sgd_step(const MLPParams& params, const MLPGrad& grads,
                   double learning_rate, const std::vector<double>& l2_weights,
                   const std::vector<double>& l2_biases) {
  MLPParams next = params;
  sgd_step_inplace(next, grads, learning_rate, l2_weights, l2_biases);
  return next;
}

DropoutMask sample_dropout_mask(const std::vector<LayerSpec>& spec, Rng& rng) {
  validate_spec(spec);
  DropoutMask mask;
  for (const auto& s : spec) {
    MaskLayer m;
    m.W.resize(s.width_out, s.width_in);
    m.b.resize(s.width_out);
    for (int r = 0; r < s.width_out; ++r) {
      for (int c = 0; c < s.width_in; ++c) {
        m.W(r, c) = rng.bernoulli(s.dropout_keep) ? 1.0 : 0.0;
      }
    }
    for (int r = 0; r < s.width_out; ++r) {
      m.b(r) = rng.bernoulli(s.dropout_keep) ? 1.0 : 0.0;
    }
    mask.layers.push_back(std::move(m));
  }
  return mask;
}

DropoutMask sample_dropout_mask(const std::vector<LayerSpec>& spec,
                                std::uint64_t seed) {
  Rng rng(seed);
  return sample_dropout_mask(spec, rng);
}

MLPParams apply_mask(const MLPParams& params, const DropoutMask& mask) {
  check_mask_shapes(params, mask);
  MLPParams masked = params;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    masked.layers[l].W.array() *= mask.layers[l].W;
    masked.layers[l].b.array() *= mask.layers[l].b;
  }
  return masked;
}

double squared_l2(const MLPParams& params) {
  double total = 0.0;
  for (const auto& layer : params.layers) {
    total += layer.W.squaredNorm() + layer.b.squaredNorm();
  }
  return total;
}

}  // namespace xai::nnet
