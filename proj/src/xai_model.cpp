#include "xai/xai_model.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "xai/errors.hpp"
#include "xai/rng.hpp"
#include "xai/stats.hpp"

namespace xai::model {

namespace {

// seed fan-out streams within this module
constexpr std::uint64_t kStreamInit = 21;
constexpr std::uint64_t kStreamShuffle = 22;
constexpr std::uint64_t kStreamTrainMask = 23;
constexpr std::uint64_t kStreamDrawMask = 24;
constexpr std::uint64_t kStreamPredNoise = 25;

std::vector<nnet::LayerSpec> beta_spec(const XaiConfig& cfg, int d) {
  std::vector<int> widths = {d};
  widths.insert(widths.end(), cfg.beta_hidden.begin(), cfg.beta_hidden.end());
  widths.push_back(1);
  auto spec = nnet::make_arch(widths, cfg.hidden_activation, cfg.dropout_keep);
  for (std::size_t l = 0; l + 1 < spec.size(); ++l) {
    spec[l].dropout_keep = cfg.dropout_hidden_keep;
  }
  return spec;
}

std::vector<nnet::LayerSpec> h_spec(const XaiConfig& cfg, int g_dim) {
  std::vector<int> widths = {g_dim};
  widths.insert(widths.end(), cfg.h_hidden.begin(), cfg.h_hidden.end());
  widths.push_back(1);
  auto spec = nnet::make_arch(widths, cfg.hidden_activation, cfg.dropout_keep);
  for (std::size_t l = 0; l + 1 < spec.size(); ++l) {
    spec[l].dropout_keep = cfg.dropout_hidden_keep;
  }
  return spec;
}

std::vector<double> l2_for(const nnet::MLPParams& net, std::int64_t N) {
  std::vector<double> l2;
  l2.reserve(net.spec.size());
  for (const auto& s : net.spec) {
    l2.push_back(s.dropout_keep / (2.0 * static_cast<double>(N)));
  }
  return l2;
}

double penalty_term(const nnet::MLPParams& net, std::int64_t N) {
  double total = 0.0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const double lambda =
        net.spec[l].dropout_keep / (2.0 * static_cast<double>(N));
    total += lambda * (net.layers[l].W.squaredNorm() +
                      net.layers[l].b.squaredNorm());
  }
  return total;
}

void check_feature_coverage(const SpatialDataset& data,
                            const FeatureTable& features) {
  if (features.V != data.V ||
      features.values.rows() != static_cast<long>(data.n()) * data.V) {
    throw ValidationError("feature table does not cover every (subject, node)");
  }
  if (!features.values.allFinite()) {
    throw ValidationError("feature table has non-finite entries");
  }
}

}  // namespace

void validate_dataset(const SpatialDataset& data) {
  if (data.V < 1) throw ValidationError("dataset: V must be >= 1");
  if (data.d() != 2 && data.d() != 3) {
    throw ValidationError("dataset: coordinate dimension must be 2 or 3");
  }
  if (static_cast<int>(data.node_of.size()) != data.J()) {
    throw ValidationError("dataset: node map length != J");
  }
  std::vector<int> counts(data.V, 0);
  for (int j = 0; j < data.J(); ++j) {
    if (data.node_of[j] < 0 || data.node_of[j] >= data.V) {
      throw ValidationError("dataset: node index out of range at ROI " +
                            std::to_string(j));
    }
    ++counts[data.node_of[j]];
  }
  if (data.coords.rows() != data.J() || !data.coords.allFinite()) {
    throw ValidationError("dataset: bad coordinate table");
  }
  for (const auto& x : data.X) {
    if (x.rows() != data.n() || x.cols() != data.J() || !x.allFinite()) {
      throw ValidationError("dataset: predictor table shape mismatch");
    }
  }
  if (!data.Y.allFinite()) throw ValidationError("dataset: non-finite outcome");
  for (int i : data.train_idx) {
    if (i < 0 || i >= data.n()) throw ValidationError("dataset: bad train index");
  }
}

std::pair<SpatialDataset, Standardization> standardize(
    const SpatialDataset& data) {
  validate_dataset(data);
  if (data.train_idx.size() < 2) {
    throw ValidationError("standardize: need >= 2 training subjects");
  }
  const int J = data.J(), Q = data.Q();
  const double nt = static_cast<double>(data.train_idx.size());

  Standardization st;
  st.y_mean.resize(J);
  st.y_sd.resize(J);
  st.x_mean.resize(J, Q);
  st.x_sd.resize(J, Q);

  SpatialDataset out = data;
  for (int j = 0; j < J; ++j) {
    double m = 0.0, s2 = 0.0;
    for (int i : data.train_idx) m += data.Y(i, j);
    m /= nt;
    for (int i : data.train_idx) s2 += (data.Y(i, j) - m) * (data.Y(i, j) - m);
    double sd = std::sqrt(s2 / (nt - 1.0));
    st.y_mean(j) = m;
    if (sd <= 0.0) {
      st.degenerate_y.push_back(j);
      sd = 1.0;
    }
    st.y_sd(j) = sd;
    out.Y.col(j) = (data.Y.col(j).array() - m) / sd;

    for (int q = 0; q < Q; ++q) {
      double mx = 0.0, sx2 = 0.0;
      for (int i : data.train_idx) mx += data.X[q](i, j);
      mx /= nt;
      for (int i : data.train_idx) {
        sx2 += (data.X[q](i, j) - mx) * (data.X[q](i, j) - mx);
      }
      double sx = std::sqrt(sx2 / (nt - 1.0));
      st.x_mean(j, q) = mx;
      if (sx <= 0.0) {
        st.degenerate_x.emplace_back(j, q);
        sx = 1.0;
      }
      st.x_sd(j, q) = sx;
      out.X[q].col(j) = (data.X[q].col(j).array() - mx) / sx;
    }
  }
  return {out, st};
}

SpatialDataset unstandardize(const SpatialDataset& data,
                             const Standardization& stats) {
  SpatialDataset out = data;
  for (int j = 0; j < data.J(); ++j) {
    out.Y.col(j) = data.Y.col(j).array() * stats.y_sd(j) + stats.y_mean(j);
    for (int q = 0; q < data.Q(); ++q) {
      out.X[q].col(j) =
          data.X[q].col(j).array() * stats.x_sd(j, q) + stats.x_mean(j, q);
    }
  }
  return out;
}

void validate_config(const XaiConfig& cfg) {
  if (cfg.dropout_keep <= 0.0 || cfg.dropout_keep > 1.0) {
    throw ValidationError("config: dropout_keep outside (0,1]");
  }
  if (cfg.dropout_hidden_keep <= 0.0 || cfg.dropout_hidden_keep > 1.0) {
    throw ValidationError("config: dropout_hidden_keep outside (0,1]");
  }
  if (cfg.learning_rate <= 0.0) throw ValidationError("config: learning_rate <= 0");
  if (cfg.lr_decay <= 0.0 || cfg.lr_decay > 1.0) {
    throw ValidationError("config: lr_decay outside (0,1]");
  }
  if (cfg.epochs < 1 || cfg.batch_size < 1) {
    throw ValidationError("config: epochs and batch_size must be >= 1");
  }
  if (cfg.F < 2) throw ValidationError("config: F must be >= 2");
  if (cfg.prior_sigma2 <= 0.0) throw ValidationError("config: prior_sigma2 <= 0");
}

ModelMask sample_model_mask(const TrainedModel& model, std::uint64_t seed) {
  ModelMask mask;
  for (std::size_t q = 0; q < model.beta_nets.size(); ++q) {
    mask.beta.push_back(
        nnet::sample_dropout_mask(model.beta_nets[q].spec,
                                  derive_seed(seed, 31, q)));
  }
  if (model.has_h) {
    mask.h = nnet::sample_dropout_mask(model.h_net.spec, derive_seed(seed, 32));
  }
  return mask;
}

namespace {

// beta-network input: coordinates relative to the stored training center
Eigen::MatrixXd centered_rows(const TrainedModel& model,
                              const Eigen::MatrixXd& S) {
  if (model.coord_center.size() == 0) return S;
  return S.rowwise() - model.coord_center.transpose();
}

}  // namespace

double model_mean(const TrainedModel& model, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& s_raw, const Eigen::VectorXd& g,
                  const ModelMask* mask) {
  const Eigen::VectorXd s =
      model.coord_center.size() == 0 ? s_raw : (s_raw - model.coord_center).eval();
  if (x.size() != static_cast<long>(model.beta_nets.size())) {
    throw ValidationError("model_mean: predictor length != Q");
  }
  double out = model.beta0;
  for (std::size_t q = 0; q < model.beta_nets.size(); ++q) {
    const nnet::DropoutMask* m = mask ? &mask->beta[q] : nullptr;
    out += x(q) * nnet::forward(model.beta_nets[q], s, m);
  }
  if (model.has_h) {
    const nnet::DropoutMask* m = mask ? &mask->h : nullptr;
    out += nnet::forward(model.h_net, g, m);
  }
  return out;
}

double loss(const TrainedModel& model, const TrainingBatch& batch,
            std::int64_t full_data_size, double tau2, const ModelMask* mask) {
  if (tau2 <= 0.0) throw ValidationError("loss: tau2 <= 0");
  const long B = batch.y.size();
  if (B < 1) throw ValidationError("loss: empty batch");

  Eigen::VectorXd pred = Eigen::VectorXd::Constant(B, model.beta0);
  for (std::size_t q = 0; q < model.beta_nets.size(); ++q) {
    const nnet::DropoutMask* m = mask ? &mask->beta[q] : nullptr;
    pred.array() +=
        batch.Xb.col(q).array() *
        nnet::forward_batch(model.beta_nets[q], centered_rows(model, batch.S), m)
            .array();
  }
  if (model.has_h) {
    const nnet::DropoutMask* m = mask ? &mask->h : nullptr;
    pred += nnet::forward_batch(model.h_net, batch.G, m);
  }
  const double sse = (batch.y - pred).squaredNorm();
  double out = sse / (2.0 * static_cast<double>(B) * tau2);
  for (const auto& net : model.beta_nets) out += penalty_term(net, full_data_size);
  if (model.has_h) out += penalty_term(model.h_net, full_data_size);
  return out;
}

TrainedModel train(const SpatialDataset& data, const FeatureTable& features,
                   const XaiConfig& cfg) {
  validate_dataset(data);
  validate_config(cfg);
  const int J = data.J(), Q = data.Q(), d = data.d();
  if (data.train_idx.empty()) throw ValidationError("train: empty train split");
  if (cfg.use_network) check_feature_coverage(data, features);
  const int g_dim = cfg.use_network ? features.dim() : 1;

  TrainedModel model;
  model.config = cfg;
  model.has_h = cfg.use_network;
  model.coord_center = data.coords.colwise().mean().transpose();
  const Eigen::MatrixXd coords_c =
      data.coords.rowwise() - model.coord_center.transpose();
  for (int q = 0; q < Q; ++q) {
    model.beta_nets.push_back(
        nnet::init_mlp(beta_spec(cfg, d), derive_seed(cfg.seed, kStreamInit, q)));
  }
  if (model.has_h) {
    model.h_net =
        nnet::init_mlp(h_spec(cfg, g_dim), derive_seed(cfg.seed, kStreamInit, 99));
  }

  const std::int64_t N =
      static_cast<std::int64_t>(data.train_idx.size()) * J;

  // beta0 is the training-outcome grand mean (zero once standardized)
  double y_sum = 0.0;
  for (int i : data.train_idx) y_sum += data.Y.row(i).sum();
  model.beta0 = y_sum / static_cast<double>(N);

  std::vector<std::pair<int, int>> tuples;  // (subject, roi)
  tuples.reserve(N);
  for (int i : data.train_idx) {
    for (int j = 0; j < J; ++j) tuples.emplace_back(i, j);
  }

  std::vector<std::vector<double>> l2w(Q + 1), l2b(Q + 1);
  for (int q = 0; q < Q; ++q) {
    l2w[q] = l2_for(model.beta_nets[q], N);
    l2b[q] = l2w[q];
  }
  if (model.has_h) {
    l2w[Q] = l2_for(model.h_net, N);
    l2b[Q] = l2w[Q];
  }

  Rng shuffle_rng(derive_seed(cfg.seed, kStreamShuffle));
  Rng mask_rng(derive_seed(cfg.seed, kStreamTrainMask));

  // full-data batch reused for the per-epoch objective trace and tau2 profile
  TrainingBatch full;
  full.S.resize(N, d);
  full.Xb.resize(N, Q);
  full.G.resize(N, g_dim);
  full.y.resize(N);
  for (std::int64_t t = 0; t < N; ++t) {
    const auto [i, j] = tuples[t];
    full.S.row(t) = coords_c.row(j);
    for (int q = 0; q < Q; ++q) full.Xb(t, q) = data.X[q](i, j);
    full.G.row(t) = cfg.use_network ? features.row(i, data.node_of[j])
                                    : Eigen::RowVectorXd::Zero(1);
    full.y(t) = data.Y(i, j);
  }

  double tau2 = 1.0;
  const int B = cfg.batch_size;
  TrainingBatch batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // constant step size for the first three quarters, then geometric decay
    // down to learning_rate * lr_decay at the final epoch
    double lr = cfg.learning_rate;
    if (cfg.epochs > 1) {
      const double t = static_cast<double>(epoch) / (cfg.epochs - 1);
      if (t > 0.75) lr *= std::pow(cfg.lr_decay, (t - 0.75) / 0.25);
    }
    shuffle_rng.shuffle(tuples);
    for (std::int64_t start = 0; start < N; start += B) {
      const long bs = static_cast<long>(std::min<std::int64_t>(B, N - start));
      batch.S.resize(bs, d);
      batch.Xb.resize(bs, Q);
      batch.G.resize(bs, g_dim);
      batch.y.resize(bs);
      for (long t = 0; t < bs; ++t) {
        const auto [i, j] = tuples[start + t];
        batch.S.row(t) = coords_c.row(j);
        for (int q = 0; q < Q; ++q) batch.Xb(t, q) = data.X[q](i, j);
        batch.G.row(t) = cfg.use_network ? features.row(i, data.node_of[j])
                                         : Eigen::RowVectorXd::Zero(1);
        batch.y(t) = data.Y(i, j);
      }

      ModelMask mask;
      for (int q = 0; q < Q; ++q) {
        mask.beta.push_back(
            nnet::sample_dropout_mask(model.beta_nets[q].spec, mask_rng));
      }
      if (model.has_h) {
        mask.h = nnet::sample_dropout_mask(model.h_net.spec, mask_rng);
      }

      Eigen::VectorXd pred = Eigen::VectorXd::Constant(bs, model.beta0);
      std::vector<Eigen::VectorXd> beta_out(Q);
      for (int q = 0; q < Q; ++q) {
        beta_out[q] =
            nnet::forward_batch(model.beta_nets[q], batch.S, &mask.beta[q]);
        pred.array() += batch.Xb.col(q).array() * beta_out[q].array();
      }
      if (model.has_h) {
        pred += nnet::forward_batch(model.h_net, batch.G, &mask.h);
      }
      const Eigen::VectorXd resid = pred - batch.y;
      if (!resid.allFinite()) {
        throw NumericError("train: non-finite residual at epoch " +
                           std::to_string(epoch) + ", batch offset " +
                           std::to_string(start));
      }

      // d/dtheta of (1/(2B)) sum r^2; Eq. 4's 1/tau2 factor is absorbed into
      // the learning rate so the effective step does not drift as tau2 is
      // profiled down (and does not blow up on high-SNR data)
      const double scale = 1.0 / static_cast<double>(bs);
      for (int q = 0; q < Q; ++q) {
        const Eigen::VectorXd upstream =
            (resid.array() * batch.Xb.col(q).array() * scale).matrix();
        const nnet::MLPGrad g =
            nnet::grad_batch(model.beta_nets[q], batch.S, upstream, &mask.beta[q]);
        nnet::sgd_step_inplace(model.beta_nets[q], g, lr, l2w[q], l2b[q]);
      }
      if (model.has_h) {
        const Eigen::VectorXd upstream = resid * scale;
        const nnet::MLPGrad g =
            nnet::grad_batch(model.h_net, batch.G, upstream, &mask.h);
        nnet::sgd_step_inplace(model.h_net, g, lr, l2w[Q], l2b[Q]);
      }
    }

    // profile tau2 from the deterministic full-data residuals
    {
      Eigen::VectorXd pred = Eigen::VectorXd::Constant(N, model.beta0);
      for (int q = 0; q < Q; ++q) {
        pred.array() += full.Xb.col(q).array() *
                        nnet::forward_batch(model.beta_nets[q], full.S).array();
      }
      if (model.has_h) pred += nnet::forward_batch(model.h_net, full.G);
      const double mse = (full.y - pred).squaredNorm() / static_cast<double>(N);
      if (!std::isfinite(mse)) {
        throw NumericError("train: non-finite loss after epoch " +
                           std::to_string(epoch));
      }
      tau2 = std::max(mse, 1e-8);
      model.tau2_hat = tau2;
      model.loss_trace.push_back(loss(model, full, N, tau2));
    }
  }
  return model;
}

PosteriorDraws mc_dropout_draws(const TrainedModel& model,
                                const SpatialDataset& data,
                                const FeatureTable& features,
                                const XaiConfig& cfg) {
  validate_dataset(data);
  if (cfg.F < 2) throw ValidationError("mc_dropout_draws: F must be >= 2");
  if (model.has_h) check_feature_coverage(data, features);
  const int J = data.J(), Q = data.Q(), V = data.V, n = data.n();

  PosteriorDraws draws;
  draws.V = V;
  draws.mask_seed_base = derive_seed(cfg.seed, kStreamDrawMask);
  draws.beta_draws.reserve(cfg.F);
  draws.h_draws.resize(cfg.F, static_cast<long>(n) * V);
  draws.h_draws.setZero();
  draws.tau2.resize(cfg.F);

  const std::int64_t N = static_cast<std::int64_t>(data.train_idx.size()) * J;

  for (int f = 0; f < cfg.F; ++f) {
    const ModelMask mask =
        sample_model_mask(model, derive_seed(draws.mask_seed_base, 0, f));

    Eigen::MatrixXd beta_f(J, Q);
    for (int q = 0; q < Q; ++q) {
      beta_f.col(q) = nnet::forward_batch(
          model.beta_nets[q], centered_rows(model, data.coords), &mask.beta[q]);
    }
    draws.beta_draws.push_back(beta_f);

    if (model.has_h) {
      draws.h_draws.row(f) =
          nnet::forward_batch(model.h_net, features.values, &mask.h).transpose();
    }

    // Step-3 residual variance over the fitted data
    double sse = 0.0;
    for (int i : data.train_idx) {
      for (int j = 0; j < J; ++j) {
        double pred = model.beta0;
        for (int q = 0; q < Q; ++q) pred += data.X[q](i, j) * beta_f(j, q);
        if (model.has_h) {
          pred += draws.h_draws(f, static_cast<long>(i) * V + data.node_of[j]);
        }
        const double r = data.Y(i, j) - pred;
        sse += r * r;
      }
    }
    draws.tau2(f) = sse / static_cast<double>(N);
  }
  return draws;
}

BetaRefined beta_normal_refine(const PosteriorDraws& draws) {
  if (draws.beta_draws.size() < 2) {
    throw ValidationError("beta_normal_refine: need F >= 2");
  }
  const int F = static_cast<int>(draws.beta_draws.size());
  const long J = draws.beta_draws.front().rows();
  const long Q = draws.beta_draws.front().cols();

  BetaRefined out;
  out.mu = Eigen::MatrixXd::Zero(J, Q);
  for (const auto& b : draws.beta_draws) out.mu += b;
  out.mu /= static_cast<double>(F);

  Eigen::MatrixXd ss = Eigen::MatrixXd::Zero(J, Q);
  Eigen::MatrixXd lo = draws.beta_draws.front();
  Eigen::MatrixXd hi = draws.beta_draws.front();
  for (const auto& b : draws.beta_draws) {
    ss.array() += (b - out.mu).array().square();
    lo = lo.cwiseMin(b);
    hi = hi.cwiseMax(b);
  }
  out.sd = (ss / static_cast<double>(F - 1)).cwiseSqrt();
  for (long j = 0; j < J; ++j) {
    for (long q = 0; q < Q; ++q) {
      // identical draws mean exactly zero spread regardless of rounding in
      // the accumulated mean
      if (lo(j, q) == hi(j, q)) out.sd(j, q) = 0.0;
      if (out.sd(j, q) == 0.0) ++out.zero_variance_count;
    }
  }
  return out;
}

namespace {

PredictiveSamples compose_samples(const TrainedModel& model,
                                  const PosteriorDraws& draws,
                                  const Eigen::MatrixXd& x_std,  // J x Q
                                  const Eigen::MatrixXd& h_per_draw,  // F x V
                                  const std::vector<int>& node_of,
                                  std::uint64_t noise_seed) {
  const int F = static_cast<int>(draws.beta_draws.size());
  const long J = x_std.rows();
  Rng rng(derive_seed(noise_seed, kStreamPredNoise));

  PredictiveSamples out;
  out.std_scale.resize(F, J);
  out.orig_scale.resize(F, J);
  for (int f = 0; f < F; ++f) {
    const double sd = std::sqrt(draws.tau2(f));
    for (long j = 0; j < J; ++j) {
      double mean = model.beta0;
      for (long q = 0; q < x_std.cols(); ++q) {
        mean += x_std(j, q) * draws.beta_draws[f](j, q);
      }
      if (model.has_h) mean += h_per_draw(f, node_of[j]);
      const double y_std = mean + sd * rng.normal();
      out.std_scale(f, j) = y_std;
      out.orig_scale(f, j) =
          model.stand.y_mean(j) + model.stand.y_sd(j) * y_std;
    }
  }
  return out;
}

}  // namespace

PredictiveSamples posterior_predictive(const TrainedModel& model,
                                       const PosteriorDraws& draws,
                                       const SpatialDataset& data, int subject,
                                       std::uint64_t noise_seed) {
  if (subject < 0 || subject >= data.n()) {
    throw ValidationError("posterior_predictive: subject index out of range");
  }
  const int F = static_cast<int>(draws.beta_draws.size());
  Eigen::MatrixXd x_std(data.J(), data.Q());
  for (int q = 0; q < data.Q(); ++q) {
    x_std.col(q) = data.X[q].row(subject).transpose();
  }
  Eigen::MatrixXd h_per_draw = Eigen::MatrixXd::Zero(F, data.V);
  if (model.has_h) {
    for (int f = 0; f < F; ++f) {
      for (int v = 0; v < data.V; ++v) {
        h_per_draw(f, v) =
            draws.h_draws(f, static_cast<long>(subject) * data.V + v);
      }
    }
  }
  return compose_samples(model, draws, x_std, h_per_draw, data.node_of,
                         derive_seed(noise_seed, 0, subject));
}

PredictiveSamples posterior_predictive_new(const TrainedModel& model,
                                           const PosteriorDraws& draws,
                                           const Eigen::MatrixXd& x_orig,
                                           const Eigen::MatrixXd& g,
                                           const std::vector<int>& node_of,
                                           std::uint64_t noise_seed) {
  const int F = static_cast<int>(draws.beta_draws.size());
  const long J = x_orig.rows();
  const long Q = x_orig.cols();
  if (J != model.stand.y_mean.size() ||
      node_of.size() != static_cast<std::size_t>(J)) {
    throw ValidationError("posterior_predictive_new: ROI count mismatch");
  }
  Eigen::MatrixXd x_std(J, Q);
  for (long j = 0; j < J; ++j) {
    for (long q = 0; q < Q; ++q) {
      x_std(j, q) =
          (x_orig(j, q) - model.stand.x_mean(j, q)) / model.stand.x_sd(j, q);
    }
  }
  const int V = model.has_h ? static_cast<int>(g.rows()) : draws.V;
  Eigen::MatrixXd h_per_draw = Eigen::MatrixXd::Zero(F, V);
  if (model.has_h) {
    for (int f = 0; f < F; ++f) {
      const nnet::DropoutMask mask = nnet::sample_dropout_mask(
          model.h_net.spec,
          derive_seed(derive_seed(draws.mask_seed_base, 0, f), 32));
      h_per_draw.row(f) =
          nnet::forward_batch(model.h_net, g, &mask).transpose();
    }
  }
  return compose_samples(model, draws, x_std, h_per_draw, node_of, noise_seed);
}

HSummary infer_h(const PosteriorDraws& draws, double level) {
  if (draws.h_draws.rows() < 2) throw ValidationError("infer_h: need F >= 2");
  const long F = draws.h_draws.rows();
  const long T = draws.h_draws.cols();
  const double alpha = (1.0 - level) / 2.0;

  HSummary s;
  s.mean.resize(T);
  s.sd.resize(T);
  s.lower.resize(T);
  s.upper.resize(T);
  std::vector<double> col(F);
  for (long t = 0; t < T; ++t) {
    const Eigen::VectorXd v = draws.h_draws.col(t);
    s.mean(t) = v.mean();
    s.sd(t) = v.minCoeff() == v.maxCoeff() ? 0.0 : stats::sd(v);
    for (long f = 0; f < F; ++f) col[f] = v(f);
    s.lower(t) = stats::quantile(col, alpha);
    s.upper(t) = stats::quantile(col, 1.0 - alpha);
  }
  return s;
}

}  // namespace xai::model
