#include "xai/metrics.hpp"

#include <chrono>
#include <cmath>

#include "xai/errors.hpp"
#include "xai/rng.hpp"
#include "xai/stats.hpp"

namespace xai::metrics {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / (static_cast<double>(v.size()) - 1.0));
  return sd / std::sqrt(static_cast<double>(v.size()));
}

}  // namespace

double rmspe(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size() || pred.size() < 1) {
    throw ValidationError("rmspe: length mismatch or empty");
  }
  return std::sqrt((pred - truth).squaredNorm() /
                   static_cast<double>(pred.size()));
}

IntervalSummary coverage_and_length(const Eigen::MatrixXd& draws,
                                    const Eigen::VectorXd& truth, double level,
                                    IntervalType type) {
  const long F = draws.rows();
  const long T = draws.cols();
  if (F < 20) throw ValidationError("coverage_and_length: need >= 20 draws");
  if (T != truth.size()) {
    throw ValidationError("coverage_and_length: target count mismatch");
  }
  IntervalSummary out;
  out.lower.resize(T);
  out.upper.resize(T);
  long inside = 0;
  double length_sum = 0.0;
  std::vector<double> col(F);
  for (long t = 0; t < T; ++t) {
    for (long f = 0; f < F; ++f) col[f] = draws(f, t);
    double lo, hi;
    if (type == IntervalType::Quantile) {
      const double alpha = (1.0 - level) / 2.0;
      lo = stats::quantile(col, alpha);
      hi = stats::quantile(col, 1.0 - alpha);
    } else {
      // shortest window containing ceil(level * F) sorted draws
      std::sort(col.begin(), col.end());
      const long keep = std::min<long>(
          F, static_cast<long>(std::ceil(level * static_cast<double>(F))));
      lo = col.front();
      hi = col[keep - 1];
      for (long s = 0; s + keep <= F; ++s) {
        if (col[s + keep - 1] - col[s] < hi - lo) {
          lo = col[s];
          hi = col[s + keep - 1];
        }
      }
    }
    out.lower(t) = lo;
    out.upper(t) = hi;
    if (truth(t) >= lo && truth(t) <= hi) ++inside;
    length_sum += hi - lo;
  }
  out.coverage = static_cast<double>(inside) / static_cast<double>(T);
  out.mean_length = length_sum / static_cast<double>(T);
  return out;
}

double bayes_r2(const Eigen::MatrixXd& fit_draws,
                const Eigen::VectorXd& residual_var_draws) {
  const long F = fit_draws.rows();
  if (F < 2 || residual_var_draws.size() != F) {
    throw ValidationError("bayes_r2: need F >= 2 matched draws");
  }
  double total = 0.0;
  for (long f = 0; f < F; ++f) {
    const Eigen::VectorXd fit = fit_draws.row(f).transpose();
    const double vf = stats::variance(fit);
    const double denom = vf + residual_var_draws(f);
    if (denom <= 0.0) throw ValidationError("bayes_r2: zero total variance");
    total += vf / denom;
  }
  return total / static_cast<double>(F);
}

GlmFit glm_baseline(const model::SpatialDataset& data,
                    const model::FeatureTable& features) {
  model::validate_dataset(data);
  const int J = data.J(), Q = data.Q();
  const int g_dim = features.dim();
  const int P = 1 + Q + g_dim;
  const long n_train = static_cast<long>(data.train_idx.size());
  if (n_train <= P) {
    throw ValidationError("glm_baseline: need more training subjects than regressors");
  }

  GlmFit fit;
  fit.coef = Eigen::MatrixXd::Zero(J, P);
  fit.beta = Eigen::MatrixXd::Zero(J, Q);
  fit.pred_test.resize(data.test_idx.size(), J);

  Eigen::MatrixXd design(n_train, P);
  Eigen::VectorXd y(n_train);
  for (int j = 0; j < J; ++j) {
    const int v = data.node_of[j];
    for (long t = 0; t < n_train; ++t) {
      const int i = data.train_idx[t];
      design(t, 0) = 1.0;
      for (int q = 0; q < Q; ++q) design(t, 1 + q) = data.X[q](i, j);
      design.row(t).segment(1 + Q, g_dim) = features.row(i, v);
      y(t) = data.Y(i, j);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < P) fit.dropped_columns += P - qr.rank();
    fit.coef.row(j) = qr.solve(y).transpose();
    for (int q = 0; q < Q; ++q) fit.beta(j, q) = fit.coef(j, 1 + q);

    for (std::size_t t = 0; t < data.test_idx.size(); ++t) {
      const int i = data.test_idx[t];
      double pred = fit.coef(j, 0);
      for (int q = 0; q < Q; ++q) pred += fit.coef(j, 1 + q) * data.X[q](i, j);
      const Eigen::RowVectorXd g = features.row(i, v);
      for (int k = 0; k < g_dim; ++k) pred += fit.coef(j, 1 + Q + k) * g(k);
      fit.pred_test(t, j) = pred;
    }
  }

  // frequentist R^2 on the test split
  double sse = 0.0, sst = 0.0, y_mean = 0.0;
  long count = 0;
  for (std::size_t t = 0; t < data.test_idx.size(); ++t) {
    for (int j = 0; j < J; ++j) {
      y_mean += data.Y(data.test_idx[t], j);
      ++count;
    }
  }
  if (count > 0) {
    y_mean /= static_cast<double>(count);
    for (std::size_t t = 0; t < data.test_idx.size(); ++t) {
      for (int j = 0; j < J; ++j) {
        const double yt = data.Y(data.test_idx[t], j);
        sse += (yt - fit.pred_test(t, j)) * (yt - fit.pred_test(t, j));
        sst += (yt - y_mean) * (yt - y_mean);
      }
    }
    fit.r2 = sst > 0.0 ? 1.0 - sse / sst : 0.0;
  }
  return fit;
}

EvalResult evaluate_xai(const simgen::SyntheticTruth& truth,
                        const model::SpatialDataset& data,
                        const model::TrainedModel& trained,
                        const model::PosteriorDraws& draws, IntervalType type) {
  const int J = data.J(), Q = data.Q(), V = data.V;
  const int F = static_cast<int>(draws.beta_draws.size());
  const long n_test = static_cast<long>(data.test_idx.size());
  const long T = n_test * J;

  EvalResult out;

  // per-draw predictive means on the standardized scale, test split
  Eigen::MatrixXd fit_draws(F, T);
  for (int f = 0; f < F; ++f) {
    long t = 0;
    for (long ti = 0; ti < n_test; ++ti) {
      const int i = data.test_idx[ti];
      for (int j = 0; j < J; ++j, ++t) {
        double mean = trained.beta0;
        for (int q = 0; q < Q; ++q) {
          mean += data.X[q](i, j) * draws.beta_draws[f](j, q);
        }
        if (trained.has_h) {
          mean += draws.h_draws(f, static_cast<long>(i) * V + data.node_of[j]);
        }
        fit_draws(f, t) = mean;
      }
    }
  }

  // point prediction: posterior mean, unstandardized for RMSPE
  Eigen::VectorXd pred_orig(T), truth_orig(T), truth_std(T);
  {
    const Eigen::VectorXd mean_std = fit_draws.colwise().mean().transpose();
    long t = 0;
    for (long ti = 0; ti < n_test; ++ti) {
      const int i = data.test_idx[ti];
      for (int j = 0; j < J; ++j, ++t) {
        pred_orig(t) =
            trained.stand.y_mean(j) + trained.stand.y_sd(j) * mean_std(t);
        truth_orig(t) = truth.dataset.Y(i, j);
        truth_std(t) = data.Y(i, j);
      }
    }
    out.rmspe = rmspe(pred_orig, truth_orig);
  }

  // composition samples for coverage/length, standardized scale
  {
    Eigen::MatrixXd samples(F, T);
    Rng rng(derive_seed(draws.mask_seed_base, 77));
    for (int f = 0; f < F; ++f) {
      const double sd = std::sqrt(draws.tau2(f));
      for (long t = 0; t < T; ++t) {
        samples(f, t) = fit_draws(f, t) + sd * rng.normal();
      }
    }
    const IntervalSummary iv = coverage_and_length(samples, truth_std, 0.95, type);
    out.coverage = iv.coverage;
    out.interval_length = iv.mean_length;
  }

  // beta estimation error on the original scale
  const model::BetaRefined refined = model::beta_normal_refine(draws);
  out.beta_rmse.resize(Q);
  for (int q = 0; q < Q; ++q) {
    double ss = 0.0;
    for (int j = 0; j < J; ++j) {
      const double est = refined.mu(j, q) * trained.stand.y_sd(j) /
                         trained.stand.x_sd(j, q);
      const double r = est - truth.beta(j, q);
      ss += r * r;
    }
    out.beta_rmse[q] = std::sqrt(ss / J);
  }

  // h estimation error, test subjects, centered comparison
  if (trained.has_h) {
    const double y_sd_bar = trained.stand.y_sd.mean();
    Eigen::VectorXd est(n_test * V), tru(n_test * V);
    long t = 0;
    for (long ti = 0; ti < n_test; ++ti) {
      const int i = data.test_idx[ti];
      for (int v = 0; v < V; ++v, ++t) {
        est(t) =
            y_sd_bar *
            draws.h_draws.col(static_cast<long>(i) * V + v).mean();
        tru(t) = truth.h(i, v);
      }
    }
    est.array() -= est.mean();
    tru.array() -= tru.mean();
    out.h_rmse = rmspe(est, tru);
  } else {
    Eigen::VectorXd tru(n_test * V);
    long t = 0;
    for (long ti = 0; ti < n_test; ++ti) {
      for (int v = 0; v < V; ++v, ++t) tru(t) = truth.h(data.test_idx[ti], v);
    }
    tru.array() -= tru.mean();
    out.h_rmse = std::sqrt(tru.squaredNorm() / static_cast<double>(tru.size()));
  }

  out.r2 = bayes_r2(fit_draws, draws.tau2);
  return out;
}

EvalResult evaluate_glm(const simgen::SyntheticTruth& truth,
                        const GlmFit& fit) {
  const auto& data = truth.dataset;
  const int J = data.J(), Q = data.Q(), V = data.V;
  const long n_test = static_cast<long>(data.test_idx.size());

  EvalResult out;
  Eigen::VectorXd pred(n_test * J), tru(n_test * J);
  long t = 0;
  for (long ti = 0; ti < n_test; ++ti) {
    const int i = data.test_idx[ti];
    for (int j = 0; j < J; ++j, ++t) {
      pred(t) = fit.pred_test(ti, j);
      tru(t) = data.Y(i, j);
    }
  }
  out.rmspe = rmspe(pred, tru);

  out.beta_rmse.resize(Q);
  for (int q = 0; q < Q; ++q) {
    double ss = 0.0;
    for (int j = 0; j < J; ++j) {
      const double r = fit.beta(j, q) - truth.beta(j, q);
      ss += r * r;
    }
    out.beta_rmse[q] = std::sqrt(ss / J);
  }

  // GLM offers no inference on h; its implied estimate is zero
  Eigen::VectorXd h_tru(n_test * V);
  t = 0;
  for (long ti = 0; ti < n_test; ++ti) {
    for (int v = 0; v < V; ++v, ++t) h_tru(t) = truth.h(data.test_idx[ti], v);
  }
  h_tru.array() -= h_tru.mean();
  out.h_rmse = std::sqrt(h_tru.squaredNorm() / static_cast<double>(h_tru.size()));

  out.coverage = 0.0;
  out.interval_length = 0.0;
  out.r2 = fit.r2;
  return out;
}

AggregateRow aggregate(const std::string& method,
                       const std::vector<ReplicationRecord>& records) {
  AggregateRow row;
  row.method = method;
  std::vector<double> rm, cov, len, hr, r2;
  std::vector<std::vector<double>> br;
  for (const auto& rec : records) {
    if (rec.method != method || !rec.ok) continue;
    rm.push_back(rec.rmspe);
    cov.push_back(rec.coverage);
    len.push_back(rec.interval_length);
    hr.push_back(rec.h_rmse);
    r2.push_back(rec.r2);
    if (br.size() < rec.beta_rmse.size()) br.resize(rec.beta_rmse.size());
    for (std::size_t q = 0; q < rec.beta_rmse.size(); ++q) {
      br[q].push_back(rec.beta_rmse[q]);
    }
  }
  row.replications = static_cast<int>(rm.size());
  if (rm.empty()) return row;
  row.rmspe_mean = mean_of(rm);
  row.rmspe_se = se_of(rm);
  row.coverage_mean = mean_of(cov);
  row.coverage_se = se_of(cov);
  row.length_mean = mean_of(len);
  row.length_se = se_of(len);
  row.h_rmse_mean = mean_of(hr);
  row.h_rmse_se = se_of(hr);
  row.r2_mean = mean_of(r2);
  row.r2_se = se_of(r2);
  for (const auto& v : br) {
    row.beta_rmse_mean.push_back(mean_of(v));
    row.beta_rmse_se.push_back(se_of(v));
  }
  row.se_available = rm.size() >= 2;
  return row;
}

BenchmarkReport benchmark(const simgen::ScenarioSpec& scenario,
                          const BenchmarkOptions& options) {
  if (options.replications < 1) {
    throw ValidationError("benchmark: replications must be >= 1");
  }
  BenchmarkReport report;
  report.case_label = scenario.label;
  report.replications = options.replications;

  for (int rep = 0; rep < options.replications; ++rep) {
    simgen::ScenarioSpec spec = scenario;
    spec.seed = derive_seed(options.seed, 61, rep);

    const auto t_sim = std::chrono::steady_clock::now();
    simgen::SyntheticTruth truth;
    try {
      truth = simgen::generate_scenario(spec);
    } catch (const std::exception& e) {
      for (const auto& method : options.methods) {
        ReplicationRecord rec;
        rec.method = method;
        rec.replication = rep;
        rec.ok = false;
        rec.error = e.what();
        report.records.push_back(rec);
        ++report.failures;
      }
      continue;
    }
    const double sim_seconds = seconds_since(t_sim);

    model::FeatureTable features;
    features.V = spec.V;
    features.values = truth.g;

    for (const auto& method : options.methods) {
      ReplicationRecord rec;
      rec.method = method;
      rec.replication = rep;
      rec.seconds_simulate = sim_seconds;
      try {
        if (method == "glm") {
          const auto t_fit = std::chrono::steady_clock::now();
          const GlmFit fit = glm_baseline(truth.dataset, features);
          rec.seconds_fit = seconds_since(t_fit);
          const auto t_eval = std::chrono::steady_clock::now();
          const EvalResult ev = evaluate_glm(truth, fit);
          rec.seconds_eval = seconds_since(t_eval);
          rec.rmspe = ev.rmspe;
          rec.coverage = ev.coverage;
          rec.interval_length = ev.interval_length;
          rec.beta_rmse = ev.beta_rmse;
          rec.h_rmse = ev.h_rmse;
          rec.r2 = ev.r2;
        } else if (method == "xai" || method == "xai-no-network") {
          model::XaiConfig cfg = options.xai;
          cfg.use_network = (method == "xai");
          cfg.seed = derive_seed(options.seed, 62, rep);
          auto [standardized, stats] = model::standardize(truth.dataset);

          const auto t_fit = std::chrono::steady_clock::now();
          model::TrainedModel trained =
              model::train(standardized, features, cfg);
          trained.stand = stats;
          rec.seconds_fit = seconds_since(t_fit);

          const auto t_draws = std::chrono::steady_clock::now();
          const model::PosteriorDraws draws =
              model::mc_dropout_draws(trained, standardized, features, cfg);
          rec.seconds_draws = seconds_since(t_draws);

          const auto t_eval = std::chrono::steady_clock::now();
          const EvalResult ev = evaluate_xai(truth, standardized, trained,
                                             draws, options.interval_type);
          rec.seconds_eval = seconds_since(t_eval);
          rec.rmspe = ev.rmspe;
          rec.coverage = ev.coverage;
          rec.interval_length = ev.interval_length;
          rec.beta_rmse = ev.beta_rmse;
          rec.h_rmse = ev.h_rmse;
          rec.r2 = ev.r2;
        } else {
          throw ValidationError("benchmark: unknown method " + method);
        }
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
        ++report.failures;
      }
      report.records.push_back(std::move(rec));
    }
  }

  for (const auto& method : options.methods) {
    report.aggregates.push_back(aggregate(method, report.records));
  }
  return report;
}

}  // namespace xai::metrics
