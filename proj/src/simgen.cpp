#include "xai/simgen.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numeric>

#include "xai/errors.hpp"
#include "xai/latent_network.hpp"
#include "xai/rng.hpp"

namespace xai::simgen {

namespace {

constexpr std::uint64_t kStreamCoords = 41;
constexpr std::uint64_t kStreamX = 42;
constexpr std::uint64_t kStreamBeta = 43;
constexpr std::uint64_t kStreamG = 44;
constexpr std::uint64_t kStreamH = 45;
constexpr std::uint64_t kStreamNoise = 46;
constexpr std::uint64_t kStreamNet = 47;

// Cholesky with escalating relative jitter; returns the lower factor.
Eigen::MatrixXd robust_cholesky(Eigen::MatrixXd cov) {
  const double base = cov.diagonal().mean();
  const double scale = base > 0.0 ? base : 1.0;
  for (double jitter : {0.0, 1e-10, 1e-8, 1e-6}) {
    Eigen::MatrixXd work = cov;
    if (jitter > 0.0) {
      work.diagonal().array() += jitter * scale;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(std::move(work));
    if (llt.info() == Eigen::Success) {
      return llt.matrixL();
    }
  }
  throw NumericError("gp_draw: covariance not positive definite after jitter");
}

}  // namespace

void validate_spec(const ScenarioSpec& spec) {
  if (spec.n < 1 || spec.V < 1 || spec.J < 1 || spec.Q < 1) {
    throw ValidationError("scenario: counts must be positive");
  }
  if (spec.n_train + spec.n_val + spec.n_test != spec.n) {
    throw ValidationError("scenario: splits must sum to n");
  }
  if (spec.J % spec.V != 0) {
    throw ValidationError("scenario: J must be divisible by V");
  }
  if (spec.d != 2 && spec.d != 3) throw ValidationError("scenario: d must be 2 or 3");
  if (static_cast<int>(spec.beta_gp.size()) != spec.Q) {
    throw ValidationError("scenario: one GP spec required per predictor");
  }
  for (const auto& gp : spec.beta_gp) {
    if (gp.variance < 0.0 || gp.scale <= 0.0) {
      throw ValidationError("scenario: GP parameters must be positive");
    }
  }
  if (spec.h_gp.variance < 0.0 || spec.h_gp.scale <= 0.0) {
    throw ValidationError("scenario: GP parameters must be positive");
  }
  if (spec.tau2 < 0.0) throw ValidationError("scenario: tau2 must be >= 0");
}

Eigen::MatrixXd exp_cov(const Eigen::MatrixXd& points, const GpSpec& spec) {
  if (points.rows() == 0) throw ValidationError("exp_cov: no points");
  if (!points.allFinite()) throw ValidationError("exp_cov: non-finite points");
  const long m = points.rows();
  Eigen::MatrixXd cov(m, m);
  for (long a = 0; a < m; ++a) {
    cov(a, a) = spec.variance;
    for (long b = a + 1; b < m; ++b) {
      const double dist = (points.row(a) - points.row(b)).norm();
      cov(a, b) = cov(b, a) = spec.variance * std::exp(-dist / spec.scale);
    }
  }
  return cov;
}

Eigen::VectorXd gp_draw(const Eigen::MatrixXd& cov, Rng& rng) {
  const long m = cov.rows();
  if (cov.isZero(0.0)) return Eigen::VectorXd::Zero(m);
  const Eigen::MatrixXd L = robust_cholesky(cov);
  Eigen::VectorXd z(m);
  for (long t = 0; t < m; ++t) z(t) = rng.normal();
  return L * z;
}

Eigen::VectorXd gp_draw(const Eigen::MatrixXd& cov, std::uint64_t seed) {
  Rng rng(seed);
  return gp_draw(cov, rng);
}

Eigen::VectorXd gp_draw_at(const Eigen::MatrixXd& points, const GpSpec& spec,
                           Rng& rng, int block) {
  const long m = points.rows();
  if (spec.variance == 0.0) return Eigen::VectorXd::Zero(m);
  if (m <= block) {
    return gp_draw(exp_cov(points, spec), rng);
  }
  // Exact sequential conditioning: each block is drawn from its Gaussian
  // conditional given all previously drawn values.
  Eigen::VectorXd values(m);
  long done = 0;
  while (done < m) {
    const long bs = std::min<long>(block, m - done);
    const Eigen::MatrixXd pts_new = points.middleRows(done, bs);
    Eigen::MatrixXd k_nn = exp_cov(pts_new, spec);
    if (done == 0) {
      values.head(bs) = gp_draw(k_nn, rng);
    } else {
      const Eigen::MatrixXd pts_old = points.topRows(done);
      Eigen::MatrixXd k_on(done, bs);  // old x new cross covariance
      for (long a = 0; a < done; ++a) {
        for (long b = 0; b < bs; ++b) {
          const double dist = (pts_old.row(a) - pts_new.row(b)).norm();
          k_on(a, b) = spec.variance * std::exp(-dist / spec.scale);
        }
      }
      Eigen::MatrixXd k_oo = exp_cov(pts_old, spec);
      const Eigen::MatrixXd L = robust_cholesky(std::move(k_oo));
      // solve K_oo^{-1} applied through the factor
      const Eigen::MatrixXd w =
          L.transpose().triangularView<Eigen::Upper>().solve(
              L.triangularView<Eigen::Lower>().solve(k_on));
      const Eigen::VectorXd cond_mean = w.transpose() * values.head(done);
      Eigen::MatrixXd cond_cov = k_nn - k_on.transpose() * w;
      values.segment(done, bs) = cond_mean + gp_draw(cond_cov, rng);
    }
    done += bs;
  }
  return values;
}

SyntheticTruth generate_scenario(const ScenarioSpec& spec) {
  validate_spec(spec);
  SyntheticTruth truth;
  truth.spec = spec;

  model::SpatialDataset& data = truth.dataset;
  data.V = spec.V;
  const int per_node = spec.J / spec.V;

  Rng coord_rng(derive_seed(spec.seed, kStreamCoords));
  data.coords.resize(spec.J, spec.d);
  for (int j = 0; j < spec.J; ++j) {
    for (int k = 0; k < spec.d; ++k) data.coords(j, k) = coord_rng.uniform(0.0, 2.0);
  }
  data.node_of.resize(spec.J);
  for (int j = 0; j < spec.J; ++j) data.node_of[j] = j / per_node;

  // x_i constant across locations
  Rng x_rng(derive_seed(spec.seed, kStreamX));
  Eigen::MatrixXd x_subject(spec.n, spec.Q);
  for (int i = 0; i < spec.n; ++i) {
    for (int q = 0; q < spec.Q; ++q) x_subject(i, q) = x_rng.normal();
  }
  data.X.assign(spec.Q, Eigen::MatrixXd(spec.n, spec.J));
  for (int q = 0; q < spec.Q; ++q) {
    for (int i = 0; i < spec.n; ++i) {
      data.X[q].row(i).setConstant(x_subject(i, q));
    }
  }

  truth.beta.resize(spec.J, spec.Q);
  for (int q = 0; q < spec.Q; ++q) {
    Rng rng(derive_seed(spec.seed, kStreamBeta, q));
    truth.beta.col(q) = gp_draw_at(data.coords, spec.beta_gp[q], rng);
  }

  // latent features: simulated directly, or via stage-1 networks end to end
  truth.g.resize(static_cast<long>(spec.n) * spec.V, spec.g_dim);
  Rng g_rng(derive_seed(spec.seed, kStreamG));
  for (long t = 0; t < truth.g.rows(); ++t) {
    for (int k = 0; k < spec.g_dim; ++k) truth.g(t, k) = g_rng.normal();
  }
  if (spec.end_to_end_networks) {
    // Interpret the first g_dim-1 columns as latent positions and the last
    // as overall connectivity, then emit noisy networks from the distance
    // model.
    if (spec.g_dim < 2) {
      throw ValidationError("end-to-end scenario needs g_dim >= 2");
    }
    truth.networks.reserve(spec.n);
    for (int i = 0; i < spec.n; ++i) {
      const Eigen::MatrixXd U =
          truth.g.middleRows(static_cast<long>(i) * spec.V, spec.V)
              .leftCols(spec.g_dim - 1);
      const double eta =
          truth.g.middleRows(static_cast<long>(i) * spec.V, spec.V)
              .col(spec.g_dim - 1)
              .mean();
      truth.networks.push_back(
          latent::simulate_network(eta, U, spec.network_sigma2,
                                   derive_seed(spec.seed, kStreamNet, i))
              .edges);
    }
  }

  Rng h_rng(derive_seed(spec.seed, kStreamH));
  const Eigen::VectorXd h_flat = gp_draw_at(truth.g, spec.h_gp, h_rng);
  truth.h.resize(spec.n, spec.V);
  for (int i = 0; i < spec.n; ++i) {
    for (int v = 0; v < spec.V; ++v) {
      truth.h(i, v) = h_flat(static_cast<long>(i) * spec.V + v);
    }
  }

  Rng noise_rng(derive_seed(spec.seed, kStreamNoise));
  const double noise_sd = std::sqrt(spec.tau2);
  data.Y.resize(spec.n, spec.J);
  double sig_sum = 0.0, sig_sq = 0.0;
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.J; ++j) {
      double signal = truth.h(i, data.node_of[j]);
      for (int q = 0; q < spec.Q; ++q) {
        signal += x_subject(i, q) * truth.beta(j, q);
      }
      sig_sum += signal;
      sig_sq += signal * signal;
      data.Y(i, j) = signal + noise_sd * noise_rng.normal();
    }
  }
  const double total = static_cast<double>(spec.n) * spec.J;
  const double sig_var = sig_sq / total - (sig_sum / total) * (sig_sum / total);
  truth.empirical_snr = sig_var / (sig_var + spec.tau2);

  data.train_idx.resize(spec.n_train);
  std::iota(data.train_idx.begin(), data.train_idx.end(), 0);
  data.val_idx.resize(spec.n_val);
  std::iota(data.val_idx.begin(), data.val_idx.end(), spec.n_train);
  data.test_idx.resize(spec.n_test);
  std::iota(data.test_idx.begin(), data.test_idx.end(),
            spec.n_train + spec.n_val);

  return truth;
}

std::vector<ScenarioSpec> scenario_catalog() {
  std::vector<ScenarioSpec> cases;

  auto base = []() {
    ScenarioSpec s;
    s.n = 300;
    s.n_train = 180;
    s.n_val = 60;
    s.n_test = 60;
    s.V = 30;
    s.Q = 2;
    s.d = 3;
    s.g_dim = 2;
    s.tau2 = 4.0;
    return s;
  };

  // Cases 1-4: J sweep at fixed GP parameters.
  const std::vector<int> j_sweep = {150, 300, 600, 1200};
  for (std::size_t c = 0; c < j_sweep.size(); ++c) {
    ScenarioSpec s = base();
    s.label = "case" + std::to_string(c + 1);
    s.J = j_sweep[c];
    s.beta_gp = {{2.0, 5.0}, {1.0, 4.0}};
    s.h_gp = {2.5, 6.0};
    cases.push_back(s);
  }

  // Cases 5-7: SNR sweep at J = 600 via the variance parameters.
  struct SnrRow {
    double d1, d2, dh, snr;
  };
  const std::vector<SnrRow> snr_rows = {
      {2.0, 1.0, 1.0, 0.42}, {4.0, 3.0, 3.0, 0.69}, {5.0, 6.0, 5.0, 0.81}};
  for (std::size_t c = 0; c < snr_rows.size(); ++c) {
    ScenarioSpec s = base();
    s.label = "case" + std::to_string(c + 5);
    s.J = 600;
    s.beta_gp = {{snr_rows[c].d1, 5.0}, {snr_rows[c].d2, 4.0}};
    s.h_gp = {snr_rows[c].dh, 6.0};
    s.reference_snr = snr_rows[c].snr;
    cases.push_back(s);
  }

  // Scale-parameter variants: rougher and smoother surfaces at J = 600.
  {
    ScenarioSpec s = base();
    s.label = "case3_scale_half";
    s.J = 600;
    s.beta_gp = {{2.0, 2.5}, {1.0, 2.0}};
    s.h_gp = {2.5, 3.0};
    cases.push_back(s);
  }
  {
    ScenarioSpec s = base();
    s.label = "case3_scale_double";
    s.J = 600;
    s.beta_gp = {{2.0, 10.0}, {1.0, 8.0}};
    s.h_gp = {2.5, 12.0};
    cases.push_back(s);
  }

  // End-to-end variant: raw networks from the latent distance model.
  {
    ScenarioSpec s = base();
    s.label = "case1_end_to_end";
    s.J = 150;
    s.beta_gp = {{2.0, 5.0}, {1.0, 4.0}};
    s.h_gp = {2.5, 6.0};
    s.g_dim = 3;  // two latent coordinates plus overall connectivity
    s.end_to_end_networks = true;
    cases.push_back(s);
  }

  return cases;
}

ScenarioSpec find_scenario(const std::string& label) {
  for (const auto& s : scenario_catalog()) {
    if (s.label == label) return s;
  }
  throw ValidationError("unknown scenario case: " + label);
}

}  // namespace xai::simgen
