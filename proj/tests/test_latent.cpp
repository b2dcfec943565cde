#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "xai/errors.hpp"
#include "xai/latent_network.hpp"
#include "xai/rng.hpp"
#include "xai/stats.hpp"

using namespace xai;
using namespace xai::latent;

namespace {

Eigen::MatrixXd random_orthogonal(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) m(r, c) = rng.normal();
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ();
}

Eigen::VectorXd upper_triangle(const Eigen::MatrixXd& m) {
  const int V = static_cast<int>(m.rows());
  Eigen::VectorXd out(V * (V - 1) / 2);
  int k = 0;
  for (int a = 0; a < V; ++a) {
    for (int b = a + 1; b < V; ++b) out(k++) = m(a, b);
  }
  return out;
}

}  // namespace

TEST_CASE("network validation") {
  NetworkObservation net;
  net.edges = Eigen::MatrixXd::Zero(4, 4);
  net.edges(0, 1) = net.edges(1, 0) = 1.5;
  validate_network(net);

  net.edges(2, 3) = 0.3;  // asymmetric
  CHECK_THROWS_AS(validate_network(net), ValidationError);
  net.edges(3, 2) = 0.3;
  net.edges(1, 1) = 0.1;  // nonzero diagonal
  CHECK_THROWS_AS(validate_network(net), ValidationError);
}

TEST_CASE("log posterior is invariant to rotating the latent positions") {
  Rng rng(31);
  const int V = 8, R = 2;
  LatentState state;
  state.eta = 1.2;
  state.sigma2 = 0.4;
  state.U.resize(V, R);
  for (int v = 0; v < V; ++v) {
    for (int r = 0; r < R; ++r) state.U(v, r) = rng.normal();
  }
  const NetworkObservation net =
      simulate_network(state.eta, state.U, state.sigma2, 99);
  McmcConfig cfg;
  cfg.R = R;
  const double base = log_posterior(state, net, cfg);

  // priors on U are isotropic so rotation leaves the posterior unchanged
  const Eigen::MatrixXd rot = random_orthogonal(R, 7);
  LatentState rotated = state;
  rotated.U = state.U * rot;
  CHECK(log_posterior(rotated, net, cfg) == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("simulated networks are symmetric with zero diagonal") {
  Rng rng(17);
  Eigen::MatrixXd U(6, 2);
  for (int v = 0; v < 6; ++v) {
    for (int r = 0; r < 2; ++r) U(v, r) = rng.normal();
  }
  const NetworkObservation net = simulate_network(0.5, U, 0.2, 5);
  validate_network(net);
  CHECK(net.edges.rows() == 6);
  // deterministic per seed
  const NetworkObservation again = simulate_network(0.5, U, 0.2, 5);
  CHECK(net.edges == again.edges);
}

TEST_CASE("procrustes alignment preserves pairwise distances") {
  Rng rng(11);
  const int V = 10, R = 3;
  std::vector<LatentState> chain;
  for (int t = 0; t < 20; ++t) {
    LatentState s;
    s.U.resize(V, R);
    for (int v = 0; v < V; ++v) {
      for (int r = 0; r < R; ++r) s.U(v, r) = rng.normal();
    }
    chain.push_back(std::move(s));
  }
  const Eigen::MatrixXd reference = chain.front().U;
  const AlignResult aligned = procrustes_align(chain, reference);
  REQUIRE(aligned.chain.size() == chain.size());
  CHECK(aligned.fallback_count == 0);
  for (std::size_t t = 0; t < chain.size(); ++t) {
    const Eigen::MatrixXd before = pairwise_distances(chain[t].U);
    const Eigen::MatrixXd after = pairwise_distances(aligned.chain[t].U);
    CHECK((before - after).array().abs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("procrustes undoes a rotation plus translation exactly") {
  Rng rng(13);
  const int V = 9, R = 2;
  Eigen::MatrixXd base(V, R);
  for (int v = 0; v < V; ++v) {
    for (int r = 0; r < R; ++r) base(v, r) = rng.normal();
  }
  Eigen::MatrixXd centered = base.rowwise() - base.colwise().mean();

  const Eigen::MatrixXd rot = random_orthogonal(R, 3);
  LatentState moved;
  moved.U = (centered * rot).rowwise() + Eigen::RowVector2d(5.0, -2.0);
  const AlignResult aligned = procrustes_align({moved}, base);
  CHECK((aligned.chain[0].U - centered).array().abs().maxCoeff() < 1e-8);
}

TEST_CASE("mcmc is deterministic per seed and recovers distances") {
  Rng rng(29);
  const int V = 12, R = 2;
  Eigen::MatrixXd U(V, R);
  for (int v = 0; v < V; ++v) {
    for (int r = 0; r < R; ++r) U(v, r) = rng.normal();
  }
  const NetworkObservation net = simulate_network(2.0, U, 0.05, 77);

  McmcConfig cfg;
  cfg.R = R;
  cfg.iterations = 2500;
  cfg.burn_in = 800;
  cfg.seed = 4;
  const SubjectFit fit = fit_subject(net, cfg);
  const SubjectFit fit2 = fit_subject(net, cfg);
  CHECK(fit.features.u_hat == fit2.features.u_hat);
  CHECK(fit.features.eta_hat == fit2.features.eta_hat);

  const Eigen::VectorXd truth = upper_triangle(pairwise_distances(U));
  const Eigen::VectorXd est =
      upper_triangle(pairwise_distances(fit.features.u_hat));
  CHECK(stats::correlation(truth, est) > 0.8);
}

TEST_CASE("mcmc config validation") {
  McmcConfig cfg;
  cfg.R = 0;
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
  cfg = McmcConfig{};
  cfg.burn_in = cfg.iterations + 1;
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
}
