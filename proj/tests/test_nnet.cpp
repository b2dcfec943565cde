#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "xai/errors.hpp"
#include "xai/nnet.hpp"
#include "xai/rng.hpp"

using namespace xai;
using namespace xai::nnet;

namespace {

double max_rel_err(const MLPGrad& a, const MLPGrad& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto dW =
        (a.layers[l].W - b.layers[l].W).array().abs() /
        (b.layers[l].W.array().abs() + 1e-3);
    const auto db =
        (a.layers[l].b - b.layers[l].b).array().abs() /
        (b.layers[l].b.array().abs() + 1e-3);
    worst = std::max({worst, dW.maxCoeff(), db.maxCoeff()});
  }
  return worst;
}

}  // namespace

TEST_CASE("make_arch shapes and validation") {
  const auto spec = make_arch({3, 8, 1}, Activation::Relu, 0.9);
  REQUIRE(spec.size() == 2);
  CHECK(spec[0].width_in == 3);
  CHECK(spec[0].width_out == 8);
  CHECK(spec[0].activation == Activation::Relu);
  CHECK(spec[1].activation == Activation::Identity);
  CHECK(spec[1].dropout_keep == 0.9);
  validate_spec(spec);

  CHECK_THROWS_AS(validate_spec({}), ValidationError);
  auto bad = spec;
  bad[1].width_in = 5;  // mismatched widths
  CHECK_THROWS_AS(validate_spec(bad), ValidationError);
  bad = spec;
  bad[0].dropout_keep = 1.5;
  CHECK_THROWS_AS(validate_spec(bad), ValidationError);
}

TEST_CASE("init is deterministic per seed") {
  const auto spec = make_arch({4, 6, 1});
  const auto a = init_mlp(spec, 42);
  const auto b = init_mlp(spec, 42);
  const auto c = init_mlp(spec, 43);
  CHECK(a.layers[0].W == b.layers[0].W);
  CHECK(a.layers[0].W != c.layers[0].W);
  CHECK(a.layers[0].b.isZero());
}

TEST_CASE("forward of a hand-set linear net") {
  MLPParams net;
  net.spec = {{2, 1, Activation::Identity, 1.0}};
  net.layers.resize(1);
  net.layers[0].W.resize(1, 2);
  net.layers[0].W << 2.0, 3.0;
  net.layers[0].b.resize(1);
  net.layers[0].b << 1.0;
  Eigen::VectorXd x(2);
  x << 1.0, 1.0;
  CHECK(forward(net, x) == doctest::Approx(6.0).epsilon(1e-12));

  Eigen::MatrixXd batch(3, 2);
  batch << 1, 1, 0, 0, -1, 2;
  const Eigen::VectorXd out = forward_batch(net, batch);
  CHECK(out(0) == doctest::Approx(6.0));
  CHECK(out(1) == doctest::Approx(1.0));
  CHECK(out(2) == doctest::Approx(5.0));
}

TEST_CASE("forward_batch agrees with forward on random nets") {
  Rng rng(7);
  const auto spec = make_arch({3, 5, 4, 1}, Activation::Tanh);
  const auto net = init_mlp(spec, 11);
  Eigen::MatrixXd inputs(6, 3);
  for (long r = 0; r < 6; ++r) {
    for (long c = 0; c < 3; ++c) inputs(r, c) = rng.normal();
  }
  const Eigen::VectorXd batched = forward_batch(net, inputs);
  for (long r = 0; r < 6; ++r) {
    CHECK(batched(r) ==
          doctest::Approx(forward(net, inputs.row(r).transpose()))
              .epsilon(1e-12));
  }
}

TEST_CASE("masked forward equals forward of masked parameters") {
  const auto spec = make_arch({4, 7, 1}, Activation::Relu, 0.6);
  const auto net = init_mlp(spec, 3);
  const DropoutMask mask = sample_dropout_mask(spec, std::uint64_t{19});
  const MLPParams masked = apply_mask(net, mask);
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd x(4);
    for (int k = 0; k < 4; ++k) x(k) = rng.normal();
    CHECK(forward(net, x, &mask) ==
          doctest::Approx(forward(masked, x)).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches central differences") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const int depth = 1 + static_cast<int>(rng.below(3));
    std::vector<int> widths = {1 + static_cast<int>(rng.below(4))};
    for (int l = 0; l < depth; ++l) {
      widths.push_back(1 + static_cast<int>(rng.below(6)));
    }
    widths.push_back(1);
    const Activation act =
        trial % 2 == 0 ? Activation::Tanh : Activation::Relu;
    const auto spec = make_arch(widths, act);
    auto net = init_mlp(spec, derive_seed(9, 1, trial));
    // random biases keep relu pre-activations away from the exact kink,
    // where the analytic subgradient and central differences may not agree
    for (auto& layer : net.layers) {
      for (long r = 0; r < layer.b.size(); ++r) layer.b(r) = 0.3 * rng.normal();
    }

    std::vector<std::pair<Eigen::VectorXd, double>> batch;
    for (int bcase = 0; bcase < 4; ++bcase) {
      Eigen::VectorXd x(widths[0]);
      for (int k = 0; k < widths[0]; ++k) x(k) = rng.normal();
      batch.emplace_back(x, rng.normal());
    }
    const MLPGrad analytic = grad(net, batch);
    const MLPGrad numeric = finite_diff_grad(net, batch, 1e-6);
    CHECK(max_rel_err(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("gradient is zero at masked entries") {
  const auto spec = make_arch({3, 6, 1}, Activation::Tanh, 0.5);
  auto net = init_mlp(spec, 21);
  Rng bias_rng(8);
  for (auto& layer : net.layers) {
    for (long r = 0; r < layer.b.size(); ++r) layer.b(r) = 0.3 * bias_rng.normal();
  }
  const DropoutMask mask = sample_dropout_mask(spec, std::uint64_t{77});
  Rng rng(2);
  std::vector<std::pair<Eigen::VectorXd, double>> batch;
  for (int t = 0; t < 3; ++t) {
    Eigen::VectorXd x(3);
    for (int k = 0; k < 3; ++k) x(k) = rng.normal();
    batch.emplace_back(x, 1.0);
  }
  const MLPGrad g = grad(net, batch, &mask);
  const MLPGrad fd = finite_diff_grad(net, batch, 1e-6, &mask);
  CHECK(max_rel_err(g, fd) < 1e-5);
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    CHECK(((1.0 - mask.layers[l].W) * g.layers[l].W.array()).abs().maxCoeff() ==
          0.0);
    CHECK(((1.0 - mask.layers[l].b) * g.layers[l].b.array()).abs().maxCoeff() ==
          0.0);
  }
}

TEST_CASE("sgd step applies gradient and weight decay") {
  MLPParams net;
  net.spec = {{1, 1, Activation::Identity, 1.0}};
  net.layers.resize(1);
  net.layers[0].W = Eigen::MatrixXd::Constant(1, 1, 2.0);
  net.layers[0].b = Eigen::VectorXd::Constant(1, 1.0);
  MLPGrad g = net;
  g.layers[0].W(0, 0) = 0.5;
  g.layers[0].b(0) = -0.25;
  const MLPParams next = sgd_step(net, g, 0.1, {0.05}, {0.02});
  // w - lr * (g + 2 * lambda * w)
  CHECK(next.layers[0].W(0, 0) ==
        doctest::Approx(2.0 - 0.1 * (0.5 + 2 * 0.05 * 2.0)).epsilon(1e-12));
  CHECK(next.layers[0].b(0) ==
        doctest::Approx(1.0 - 0.1 * (-0.25 + 2 * 0.02 * 1.0)).epsilon(1e-12));
}

TEST_CASE("dropout mask statistics and determinism") {
  auto spec = make_arch({20, 30, 1}, Activation::Relu, 1.0);
  const DropoutMask all_on = sample_dropout_mask(spec, std::uint64_t{5});
  for (const auto& layer : all_on.layers) {
    CHECK(layer.W.minCoeff() == 1.0);
    CHECK(layer.b.minCoeff() == 1.0);
  }

  spec = make_arch({20, 30, 1}, Activation::Relu, 0.7);
  const DropoutMask a = sample_dropout_mask(spec, std::uint64_t{5});
  const DropoutMask b = sample_dropout_mask(spec, std::uint64_t{5});
  double total = 0.0, kept = 0.0;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK((a.layers[l].W == b.layers[l].W).all());
    total += static_cast<double>(a.layers[l].W.size());
    kept += a.layers[l].W.sum();
  }
  CHECK(kept / total == doctest::Approx(0.7).epsilon(0.1));
}

TEST_CASE("squared_l2 sums weights and biases") {
  MLPParams net;
  net.spec = {{2, 1, Activation::Identity, 1.0}};
  net.layers.resize(1);
  net.layers[0].W.resize(1, 2);
  net.layers[0].W << 3.0, 4.0;
  net.layers[0].b = Eigen::VectorXd::Constant(1, 2.0);
  CHECK(squared_l2(net) == doctest::Approx(29.0).epsilon(1e-12));
}
