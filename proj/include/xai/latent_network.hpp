#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace xai::latent {

// One subject's symmetric weighted adjacency matrix, zero diagonal.
struct NetworkObservation {
  Eigen::MatrixXd edges;  // V x V

  int node_count() const { return static_cast<int>(edges.rows()); }
};

void validate_network(const NetworkObservation& net, double tol = 1e-10);

struct LatentState {
  double eta = 0.0;
  Eigen::MatrixXd U;     // V x R latent coordinates
  double sigma2 = 1.0;   // edge noise variance
  double log_post = 0.0; // cached log posterior of this state
};

struct McmcConfig {
  int R = 3;
  int iterations = 5000;
  int burn_in = 1000;
  double step_eta = 0.1;
  double step_u = 0.1;
  double step_log_sigma2 = 0.3;
  double prior_ig_alpha = 2.0;
  double prior_ig_beta = 1.0;
  bool adapt_steps = true;         // tune toward 25-40% acceptance in burn-in
  bool allow_reflection = true;    // Procrustes may use reflections
  std::uint64_t seed = 0;
};

void validate_config(const McmcConfig& cfg);

struct NodeFeatures {
  Eigen::MatrixXd u_hat;  // V x R, posterior-mean aligned positions
  double eta_hat = 0.0;
};

struct AcceptanceRates {
  double eta = 0.0;
  double u = 0.0;
  double sigma2 = 0.0;
};

struct McmcResult {
  std::vector<LatentState> chain;  // post burn-in
  AcceptanceRates acceptance;
  std::vector<double> log_post_trace;  // full trace incl. burn-in
};

double log_posterior(const LatentState& state, const NetworkObservation& net,
                     const McmcConfig& cfg);

// Random-walk Metropolis-within-Gibbs over eta, each latent row, log sigma2.
McmcResult mcmc_fit(const NetworkObservation& net, const McmcConfig& cfg);

struct AlignResult {
  std::vector<LatentState> chain;  // U replaced by centered aligned positions
  int fallback_count = 0;          // draws where Procrustes was rank-deficient
};

// Orthogonal + translation alignment of every U to the (centered) reference.
// No scaling; pairwise distances are preserved.
AlignResult procrustes_align(const std::vector<LatentState>& chain,
                             const Eigen::MatrixXd& reference,
                             bool allow_reflection = true);

NodeFeatures extract_features(const std::vector<LatentState>& aligned_chain);

// Full stage-1 pipeline for one subject: fit, align to the highest
// log-posterior draw, average.
struct SubjectFit {
  NodeFeatures features;
  AcceptanceRates acceptance;
  double best_log_post = 0.0;
  int procrustes_fallbacks = 0;
};

SubjectFit fit_subject(const NetworkObservation& net, const McmcConfig& cfg);

NetworkObservation simulate_network(double eta, const Eigen::MatrixXd& U,
                                    double sigma2, std::uint64_t seed);

// Pairwise Euclidean distance matrix of the rows of U.
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& U);

}  // namespace xai::latent
