#include "xai/latent_network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xai/errors.hpp"
#include "xai/rng.hpp"

namespace xai::latent {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

double log_normal_pdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + r * r / var);
}

double log_inv_gamma_pdf(double x, double alpha, double beta) {
  return alpha * std::log(beta) - std::lgamma(alpha) -
         (alpha + 1.0) * std::log(x) - beta / x;
}

// Edge log likelihood restricted to pairs involving node v.
double node_edge_loglik(const LatentState& s, const NetworkObservation& net,
                        int v) {
  const int V = net.node_count();
  double total = 0.0;
  for (int w = 0; w < V; ++w) {
    if (w == v) continue;
    const double dist = (s.U.row(v) - s.U.row(w)).norm();
    total += log_normal_pdf(net.edges(v, w), s.eta - dist, s.sigma2);
  }
  return total;
}

double edge_loglik(const LatentState& s, const NetworkObservation& net) {
  const int V = net.node_count();
  double total = 0.0;
  for (int v = 0; v < V; ++v) {
    for (int w = v + 1; w < V; ++w) {
      const double dist = (s.U.row(v) - s.U.row(w)).norm();
      total += log_normal_pdf(net.edges(v, w), s.eta - dist, s.sigma2);
    }
  }
  return total;
}

Eigen::MatrixXd center_rows(const Eigen::MatrixXd& U) {
  return U.rowwise() - U.colwise().mean();
}

}  // namespace

void validate_network(const NetworkObservation& net, double tol) {
  const auto& z = net.edges;
  if (z.rows() != z.cols() || z.rows() < 2) {
    throw ValidationError("network must be a square matrix with V >= 2");
  }
  if (!z.allFinite()) throw ValidationError("network has non-finite entries");
  for (int v = 0; v < z.rows(); ++v) {
    if (std::abs(z(v, v)) > tol) {
      throw ValidationError("network diagonal not zero at node " +
                            std::to_string(v));
    }
    for (int w = v + 1; w < z.cols(); ++w) {
      if (std::abs(z(v, w) - z(w, v)) > tol) {
        throw ValidationError("network not symmetric at (" + std::to_string(v) +
                              "," + std::to_string(w) + ")");
      }
    }
  }
}

void validate_config(const McmcConfig& cfg) {
  if (cfg.R < 1) throw ValidationError("latent dimension R must be >= 1");
  if (cfg.burn_in < 0 || cfg.burn_in >= cfg.iterations) {
    throw ValidationError("require 0 <= burn_in < iterations");
  }
  if (cfg.step_eta <= 0 || cfg.step_u <= 0 || cfg.step_log_sigma2 <= 0) {
    throw ValidationError("proposal step sizes must be positive");
  }
  if (cfg.prior_ig_alpha <= 0 || cfg.prior_ig_beta <= 0) {
    throw ValidationError("IG prior parameters must be positive");
  }
}

double log_posterior(const LatentState& state, const NetworkObservation& net,
                     const McmcConfig& cfg) {
  if (state.sigma2 <= 0.0) throw ValidationError("sigma2 must be positive");
  if (state.U.rows() != net.node_count() || state.U.cols() != cfg.R) {
    throw ValidationError("latent state dimensions do not match network/config");
  }
  double lp = edge_loglik(state, net);
  lp += log_normal_pdf(state.eta, 0.0, 1.0);
  for (int v = 0; v < state.U.rows(); ++v) {
    for (int r = 0; r < state.U.cols(); ++r) {
      lp += log_normal_pdf(state.U(v, r), 0.0, 1.0);
    }
  }
  lp += log_inv_gamma_pdf(state.sigma2, cfg.prior_ig_alpha, cfg.prior_ig_beta);
  return lp;
}

McmcResult mcmc_fit(const NetworkObservation& net, const McmcConfig& cfg) {
  validate_network(net);
  validate_config(cfg);
  const int V = net.node_count();
  Rng rng(derive_seed(cfg.seed, 11));

  LatentState state;
  state.eta = net.edges.sum() / (V * (V - 1));
  state.U.resize(V, cfg.R);
  for (int v = 0; v < V; ++v) {
    for (int r = 0; r < cfg.R; ++r) state.U(v, r) = 0.1 * rng.normal();
  }
  state.sigma2 = 1.0;

  double step_eta = cfg.step_eta;
  double step_u = cfg.step_u;
  double step_ls2 = cfg.step_log_sigma2;

  // running pieces of the log posterior kept incrementally up to date
  double cur_edge = edge_loglik(state, net);
  auto prior_eta = [](double eta) { return log_normal_pdf(eta, 0.0, 1.0); };
  auto prior_row = [&](const Eigen::RowVectorXd& u) {
    double lp = 0.0;
    for (int r = 0; r < u.size(); ++r) lp += log_normal_pdf(u(r), 0.0, 1.0);
    return lp;
  };

  long acc_eta = 0, try_eta = 0, acc_u = 0, try_u = 0, acc_s2 = 0, try_s2 = 0;
  long win_acc_eta = 0, win_try_eta = 0, win_acc_u = 0, win_try_u = 0;
  long win_acc_s2 = 0, win_try_s2 = 0;

  McmcResult result;
  result.chain.reserve(cfg.iterations - cfg.burn_in);
  result.log_post_trace.reserve(cfg.iterations);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    // eta: scalar random walk
    {
      ++try_eta;
      ++win_try_eta;
      const double eta_prop = state.eta + step_eta * rng.normal();
      LatentState prop = state;
      prop.eta = eta_prop;
      const double prop_edge = edge_loglik(prop, net);
      const double log_ratio =
          (prop_edge + prior_eta(eta_prop)) - (cur_edge + prior_eta(state.eta));
      if (std::log(rng.uniform() + 1e-300) < log_ratio) {
        state.eta = eta_prop;
        cur_edge = prop_edge;
        ++acc_eta;
        ++win_acc_eta;
      }
    }

    // each latent row: R-dimensional random walk; only edges touching the
    // node change, so the likelihood delta is local
    for (int v = 0; v < V; ++v) {
      ++try_u;
      ++win_try_u;
      const double cur_local = node_edge_loglik(state, net, v);
      const Eigen::RowVectorXd saved = state.U.row(v);
      Eigen::RowVectorXd prop_row(cfg.R);
      for (int r = 0; r < cfg.R; ++r) {
        prop_row(r) = saved(r) + step_u * rng.normal();
      }
      state.U.row(v) = prop_row;
      const double prop_local = node_edge_loglik(state, net, v);
      const double log_ratio = (prop_local + prior_row(prop_row)) -
                               (cur_local + prior_row(saved));
      if (std::log(rng.uniform() + 1e-300) < log_ratio) {
        cur_edge += prop_local - cur_local;
        ++acc_u;
        ++win_acc_u;
      } else {
        state.U.row(v) = saved;
      }
    }

    // log sigma2: scalar random walk with Jacobian term
    {
      ++try_s2;
      ++win_try_s2;
      const double ls2_prop =
          std::log(state.sigma2) + step_ls2 * rng.normal();
      const double s2_prop = std::exp(ls2_prop);
      LatentState prop = state;
      prop.sigma2 = s2_prop;
      const double prop_edge = edge_loglik(prop, net);
      const double log_ratio =
          (prop_edge +
           log_inv_gamma_pdf(s2_prop, cfg.prior_ig_alpha, cfg.prior_ig_beta) +
           std::log(s2_prop)) -
          (cur_edge +
           log_inv_gamma_pdf(state.sigma2, cfg.prior_ig_alpha,
                             cfg.prior_ig_beta) +
           std::log(state.sigma2));
      if (std::log(rng.uniform() + 1e-300) < log_ratio) {
        state.sigma2 = s2_prop;
        cur_edge = prop_edge;
        ++acc_s2;
        ++win_acc_s2;
      }
    }

    state.log_post = log_posterior(state, net, cfg);
    result.log_post_trace.push_back(state.log_post);

    if (cfg.adapt_steps && iter < cfg.burn_in && (iter + 1) % 100 == 0) {
      auto tune = [](double step, long acc, long tries) {
        const double rate = static_cast<double>(acc) / tries;
        if (rate < 0.25) return step * 0.8;
        if (rate > 0.40) return step * 1.2;
        return step;
      };
      step_eta = tune(step_eta, win_acc_eta, win_try_eta);
      step_u = tune(step_u, win_acc_u, win_try_u);
      step_ls2 = tune(step_ls2, win_acc_s2, win_try_s2);
      win_acc_eta = win_try_eta = 0;
      win_acc_u = win_try_u = 0;
      win_acc_s2 = win_try_s2 = 0;
    }

    if (iter >= cfg.burn_in) result.chain.push_back(state);
  }

  result.acceptance.eta = static_cast<double>(acc_eta) / try_eta;
  result.acceptance.u = static_cast<double>(acc_u) / try_u;
  result.acceptance.sigma2 = static_cast<double>(acc_s2) / try_s2;
  return result;
}

AlignResult procrustes_align(const std::vector<LatentState>& chain,
                             const Eigen::MatrixXd& reference,
                             bool allow_reflection) {
  if (chain.empty()) throw ValidationError("procrustes_align: empty chain");
  for (const auto& s : chain) {
    if (s.U.rows() != reference.rows() || s.U.cols() != reference.cols()) {
      throw ValidationError("procrustes_align: dimension mismatch");
    }
  }
  const Eigen::MatrixXd ref_c = center_rows(reference);

  AlignResult out;
  out.chain.reserve(chain.size());
  for (const auto& s : chain) {
    LatentState aligned = s;
    const Eigen::MatrixXd Uc = center_rows(s.U);
    const Eigen::MatrixXd M = Uc.transpose() * ref_c;  // R x R
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (smax <= 0.0 || smin < 1e-12 * smax) {
      ++out.fallback_count;
      aligned.U = Uc;
    } else {
      Eigen::MatrixXd rot = svd.matrixU() * svd.matrixV().transpose();
      if (!allow_reflection && rot.determinant() < 0.0) {
        Eigen::MatrixXd Vm = svd.matrixV();
        Vm.col(Vm.cols() - 1) *= -1.0;
        rot = svd.matrixU() * Vm.transpose();
      }
      aligned.U = Uc * rot;
    }
    out.chain.push_back(std::move(aligned));
  }
  return out;
}

NodeFeatures extract_features(const std::vector<LatentState>& aligned_chain) {
  if (aligned_chain.empty()) {
    throw ValidationError("extract_features: empty chain");
  }
  NodeFeatures f;
  f.u_hat = Eigen::MatrixXd::Zero(aligned_chain.front().U.rows(),
                                  aligned_chain.front().U.cols());
  f.eta_hat = 0.0;
  for (const auto& s : aligned_chain) {
    f.u_hat += s.U;
    f.eta_hat += s.eta;
  }
  f.u_hat /= static_cast<double>(aligned_chain.size());
  f.eta_hat /= static_cast<double>(aligned_chain.size());
  return f;
}

SubjectFit fit_subject(const NetworkObservation& net, const McmcConfig& cfg) {
  McmcResult mc = mcmc_fit(net, cfg);
  const auto best = std::max_element(
      mc.chain.begin(), mc.chain.end(),
      [](const LatentState& a, const LatentState& b) {
        return a.log_post < b.log_post;
      });
  AlignResult aligned =
      procrustes_align(mc.chain, best->U, cfg.allow_reflection);
  SubjectFit fit;
  fit.features = extract_features(aligned.chain);
  fit.acceptance = mc.acceptance;
  fit.best_log_post = best->log_post;
  fit.procrustes_fallbacks = aligned.fallback_count;
  return fit;
}

NetworkObservation simulate_network(double eta, const Eigen::MatrixXd& U,
                                    double sigma2, std::uint64_t seed) {
  if (sigma2 < 0.0) throw ValidationError("simulate_network: sigma2 < 0");
  const int V = static_cast<int>(U.rows());
  Rng rng(derive_seed(seed, 12));
  NetworkObservation net;
  net.edges = Eigen::MatrixXd::Zero(V, V);
  const double sd = std::sqrt(sigma2);
  for (int v = 0; v < V; ++v) {
    for (int w = v + 1; w < V; ++w) {
      const double dist = (U.row(v) - U.row(w)).norm();
      const double z = eta - dist + sd * rng.normal();
      net.edges(v, w) = z;
      net.edges(w, v) = z;
    }
  }
  return net;
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& U) {
  const int V = static_cast<int>(U.rows());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(V, V);
  for (int v = 0; v < V; ++v) {
    for (int w = v + 1; w < V; ++w) {
      D(v, w) = D(w, v) = (U.row(v) - U.row(w)).norm();
    }
  }
  return D;
}

}  // namespace xai::latent
