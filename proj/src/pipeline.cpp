#include "xai/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "xai/errors.hpp"
#include "xai/rng.hpp"
#include "xai/stats.hpp"

namespace fs = std::filesystem;

namespace xai::pipeline {

namespace {

std::vector<double> parse_double_list(const std::string& s,
                                      const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError("bad value '" + tok + "' for key " + key);
    }
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (double x : parse_double_list(s, key)) out.push_back(static_cast<int>(x));
  return out;
}

std::vector<std::string> parse_string_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

int parse_int(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const int x = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw ValidationError("bad integer '" + s + "' for key " + key);
  }
}

double parse_num(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw ValidationError("bad number '" + s + "' for key " + key);
  }
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw ValidationError("bad boolean '" + s + "' for key " + key);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

// Standardize with previously fitted statistics (prediction path).
model::SpatialDataset apply_standardization(const model::SpatialDataset& data,
                                            const model::Standardization& st) {
  model::SpatialDataset out = data;
  for (int j = 0; j < data.J(); ++j) {
    out.Y.col(j) = (data.Y.col(j).array() - st.y_mean(j)) / st.y_sd(j);
    for (int q = 0; q < data.Q(); ++q) {
      out.X[q].col(j) =
          (data.X[q].col(j).array() - st.x_mean(j, q)) / st.x_sd(j, q);
    }
  }
  return out;
}

// Posterior-mean predictions on the original scale for selected subjects.
Eigen::MatrixXd point_predictions(const model::TrainedModel& trained,
                                  const model::PosteriorDraws& draws,
                                  const model::SpatialDataset& standardized,
                                  const std::vector<int>& subjects) {
  const int J = standardized.J(), Q = standardized.Q(), V = standardized.V;
  const int F = static_cast<int>(draws.beta_draws.size());
  Eigen::MatrixXd beta_bar = Eigen::MatrixXd::Zero(J, Q);
  for (const auto& m : draws.beta_draws) beta_bar += m;
  beta_bar /= F;
  const Eigen::RowVectorXd h_bar = draws.h_draws.colwise().mean();

  Eigen::MatrixXd out(subjects.size(), J);
  for (std::size_t t = 0; t < subjects.size(); ++t) {
    const int i = subjects[t];
    for (int j = 0; j < J; ++j) {
      double mean = trained.beta0;
      for (int q = 0; q < Q; ++q) {
        mean += standardized.X[q](i, j) * beta_bar(j, q);
      }
      if (trained.has_h) {
        mean += h_bar(static_cast<long>(i) * V + standardized.node_of[j]);
      }
      out(t, j) = trained.stand.y_mean(j) + trained.stand.y_sd(j) * mean;
    }
  }
  return out;
}

double split_rmspe(const Eigen::MatrixXd& points,
                   const model::SpatialDataset& original,
                   const std::vector<int>& subjects) {
  if (subjects.empty()) return std::numeric_limits<double>::quiet_NaN();
  double ss = 0.0;
  for (std::size_t t = 0; t < subjects.size(); ++t) {
    for (int j = 0; j < original.J(); ++j) {
      const double r = points(t, j) - original.Y(subjects[t], j);
      ss += r * r;
    }
  }
  return std::sqrt(ss / (static_cast<double>(subjects.size()) * original.J()));
}

model::FeatureTable features_for(const bundle::DatasetBundle& b,
                                 const fs::path& features_path) {
  if (!features_path.empty()) {
    auto [features, eta] = bundle::load_features(features_path);
    if (features.values.rows() != static_cast<long>(b.data.n()) * b.data.V) {
      throw ValidationError("features table does not cover every subject");
    }
    return features;
  }
  if (!b.has_truth) {
    throw ValidationError(
        "no features table given and the bundle has no truth sidecar");
  }
  model::FeatureTable features;
  features.V = b.data.V;
  features.values = b.truth_g;
  return features;
}

std::string na_or(double value, bool available) {
  return available ? bundle::format_double(value) : "NA";
}

}  // namespace

int worker_count() {
  if (const char* env = std::getenv("XAI_WORKERS")) {
    const int w = parse_int(env, "XAI_WORKERS");
    if (w < 1) throw ValidationError("XAI_WORKERS must be >= 1");
    return w;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

RunConfig parse_run_config(const fs::path& path) {
  RunConfig cfg;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(path.string() + " line " + std::to_string(line_no) +
                            ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "out_dir") cfg.out_dir = value;
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "case") cfg.case_label = value;
    else if (key == "scenario.n") cfg.n = parse_int(value, key);
    else if (key == "scenario.n_train") cfg.n_train = parse_int(value, key);
    else if (key == "scenario.n_val") cfg.n_val = parse_int(value, key);
    else if (key == "scenario.n_test") cfg.n_test = parse_int(value, key);
    else if (key == "scenario.V") cfg.V = parse_int(value, key);
    else if (key == "scenario.J") cfg.J = parse_int(value, key);
    else if (key == "scenario.Q") cfg.Q = parse_int(value, key);
    else if (key == "scenario.d") cfg.d = parse_int(value, key);
    else if (key == "scenario.g_dim") cfg.g_dim = parse_int(value, key);
    else if (key == "scenario.tau2") cfg.tau2 = parse_num(value, key);
    else if (key == "scenario.end_to_end_networks")
      cfg.end_to_end_networks = parse_bool(value, key);
    else if (key == "scenario.network_sigma2")
      cfg.network_sigma2 = parse_num(value, key);
    else if (key == "scenario.delta2") cfg.delta2 = parse_double_list(value, key);
    else if (key == "scenario.gp_scale")
      cfg.gp_scale = parse_double_list(value, key);
    else if (key == "mcmc.R") cfg.mcmc.R = parse_int(value, key);
    else if (key == "mcmc.iterations") cfg.mcmc.iterations = parse_int(value, key);
    else if (key == "mcmc.burn_in") cfg.mcmc.burn_in = parse_int(value, key);
    else if (key == "mcmc.step_eta") cfg.mcmc.step_eta = parse_num(value, key);
    else if (key == "mcmc.step_u") cfg.mcmc.step_u = parse_num(value, key);
    else if (key == "mcmc.step_log_sigma2")
      cfg.mcmc.step_log_sigma2 = parse_num(value, key);
    else if (key == "mcmc.prior_ig_alpha")
      cfg.mcmc.prior_ig_alpha = parse_num(value, key);
    else if (key == "mcmc.prior_ig_beta")
      cfg.mcmc.prior_ig_beta = parse_num(value, key);
    else if (key == "mcmc.adapt_steps")
      cfg.mcmc.adapt_steps = parse_bool(value, key);
    else if (key == "mcmc.allow_reflection")
      cfg.mcmc.allow_reflection = parse_bool(value, key);
    else if (key == "xai.beta_hidden") cfg.xai.beta_hidden = parse_int_list(value, key);
    else if (key == "xai.h_hidden") cfg.xai.h_hidden = parse_int_list(value, key);
    else if (key == "xai.hidden_activation") {
      if (value == "relu") cfg.xai.hidden_activation = nnet::Activation::Relu;
      else if (value == "tanh") cfg.xai.hidden_activation = nnet::Activation::Tanh;
      else if (value == "identity")
        cfg.xai.hidden_activation = nnet::Activation::Identity;
      else throw ValidationError("unknown activation: " + value);
    } else if (key == "xai.dropout_keep")
      cfg.xai.dropout_keep = parse_num(value, key);
    else if (key == "xai.dropout_hidden_keep")
      cfg.xai.dropout_hidden_keep = parse_num(value, key);
    else if (key == "xai.learning_rate")
      cfg.xai.learning_rate = parse_num(value, key);
    else if (key == "xai.lr_decay") cfg.xai.lr_decay = parse_num(value, key);
    else if (key == "xai.epochs") cfg.xai.epochs = parse_int(value, key);
    else if (key == "xai.batch_size") cfg.xai.batch_size = parse_int(value, key);
    else if (key == "xai.F") cfg.xai.F = parse_int(value, key);
    else if (key == "xai.prior_sigma2")
      cfg.xai.prior_sigma2 = parse_num(value, key);
    else if (key == "xai.use_network")
      cfg.xai.use_network = parse_bool(value, key);
    else if (key == "fit.lr_grid") cfg.lr_grid = parse_double_list(value, key);
    else if (key == "fit.keep_grid")
      cfg.keep_grid = parse_double_list(value, key);
    else if (key == "benchmark.methods") cfg.methods = parse_string_list(value);
    else if (key == "benchmark.replications")
      cfg.replications = parse_int(value, key);
    else if (key == "benchmark.interval") {
      if (value == "quantile") cfg.interval_type = metrics::IntervalType::Quantile;
      else if (value == "hpd") cfg.interval_type = metrics::IntervalType::Hpd;
      else throw ValidationError("unknown interval type: " + value);
    } else if (key == "predict.split") cfg.predict_split = value;
    else if (key == "predict.samples")
      cfg.predict_samples = parse_bool(value, key);
    else {
      throw ValidationError(path.string() + " line " + std::to_string(line_no) +
                            ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

simgen::ScenarioSpec resolve_scenario(const RunConfig& cfg) {
  simgen::ScenarioSpec spec = simgen::find_scenario(cfg.case_label);
  if (cfg.n) spec.n = *cfg.n;
  if (cfg.n_train) spec.n_train = *cfg.n_train;
  if (cfg.n_val) spec.n_val = *cfg.n_val;
  if (cfg.n_test) spec.n_test = *cfg.n_test;
  if (cfg.V) spec.V = *cfg.V;
  if (cfg.J) spec.J = *cfg.J;
  if (cfg.Q) spec.Q = *cfg.Q;
  if (cfg.d) spec.d = *cfg.d;
  if (cfg.g_dim) spec.g_dim = *cfg.g_dim;
  if (cfg.tau2) spec.tau2 = *cfg.tau2;
  if (cfg.end_to_end_networks) spec.end_to_end_networks = *cfg.end_to_end_networks;
  if (cfg.network_sigma2) spec.network_sigma2 = *cfg.network_sigma2;
  if (cfg.n && !cfg.n_train && !cfg.n_val && !cfg.n_test) {
    // keep the catalog's 60/20/20 proportions
    spec.n_train = spec.n * 6 / 10;
    spec.n_val = spec.n * 2 / 10;
    spec.n_test = spec.n - spec.n_train - spec.n_val;
  }
  if (cfg.Q) {
    spec.beta_gp.resize(spec.Q, spec.beta_gp.empty() ? simgen::GpSpec{}
                                                     : spec.beta_gp.back());
  }
  if (!cfg.delta2.empty()) {
    if (static_cast<int>(cfg.delta2.size()) != spec.Q + 1) {
      throw ValidationError("scenario.delta2 needs Q + 1 entries");
    }
    for (int q = 0; q < spec.Q; ++q) spec.beta_gp[q].variance = cfg.delta2[q];
    spec.h_gp.variance = cfg.delta2[spec.Q];
  }
  if (!cfg.gp_scale.empty()) {
    if (static_cast<int>(cfg.gp_scale.size()) != spec.Q + 1) {
      throw ValidationError("scenario.gp_scale needs Q + 1 entries");
    }
    for (int q = 0; q < spec.Q; ++q) spec.beta_gp[q].scale = cfg.gp_scale[q];
    spec.h_gp.scale = cfg.gp_scale[spec.Q];
  }
  spec.seed = cfg.seed;
  return spec;
}

void cmd_simulate(const RunConfig& cfg) {
  const simgen::ScenarioSpec spec = resolve_scenario(cfg);
  const simgen::SyntheticTruth truth = simgen::generate_scenario(spec);
  bundle::save_bundle(bundle::from_truth(truth), cfg.out_dir);
}

void cmd_embed(const RunConfig& cfg, const fs::path& bundle_dir) {
  const bundle::DatasetBundle b = bundle::load_bundle(bundle_dir);
  if (b.networks.empty()) {
    throw ValidationError("bundle has no network matrices; nothing to embed");
  }
  const int n = b.data.n(), V = b.data.V, R = cfg.mcmc.R;
  for (int i = 0; i < n; ++i) {
    if (!b.networks[i].isApprox(b.networks[i].transpose(), 1e-10)) {
      throw ValidationError("network matrix for subject " + std::to_string(i) +
                            " is not symmetric");
    }
  }

  std::vector<latent::SubjectFit> fits(n);
  std::atomic<int> next{0};
  const int workers = std::min(worker_count(), n);
  auto run = [&]() {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      latent::NetworkObservation net;
      net.edges = b.networks[i];
      latent::McmcConfig mc = cfg.mcmc;
      mc.seed = derive_seed(cfg.seed, 71, i);
      fits[i] = latent::fit_subject(net, mc);
    }
  };
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create " + cfg.out_dir.string());

  model::FeatureTable features;
  features.V = V;
  features.values.resize(static_cast<long>(n) * V, R);
  Eigen::VectorXd eta(n);
  for (int i = 0; i < n; ++i) {
    features.values.middleRows(static_cast<long>(i) * V, V) =
        fits[i].features.u_hat;
    eta(i) = fits[i].features.eta_hat;
  }
  bundle::save_features(features, eta, cfg.out_dir / "features.csv");

  Eigen::MatrixXd diag(n, 6);
  for (int i = 0; i < n; ++i) {
    diag(i, 0) = i;
    diag(i, 1) = fits[i].acceptance.eta;
    diag(i, 2) = fits[i].acceptance.u;
    diag(i, 3) = fits[i].acceptance.sigma2;
    diag(i, 4) = fits[i].best_log_post;
    diag(i, 5) = fits[i].procrustes_fallbacks;
  }
  bundle::write_csv(cfg.out_dir / "embed_diagnostics.csv",
                    {"subject", "accept_eta", "accept_u", "accept_sigma2",
                     "best_log_post", "procrustes_fallbacks"},
                    diag);
}

FitOutcome cmd_fit(const RunConfig& cfg, const fs::path& bundle_dir,
                   const fs::path& features_path) {
  const bundle::DatasetBundle b = bundle::load_bundle(bundle_dir);
  const model::FeatureTable features = features_for(b, features_path);
  auto [standardized, stats] = model::standardize(b.data);

  std::vector<std::pair<double, double>> grid;
  const std::vector<double> lrs =
      cfg.lr_grid.empty() ? std::vector<double>{cfg.xai.learning_rate}
                          : cfg.lr_grid;
  const std::vector<double> keeps =
      cfg.keep_grid.empty() ? std::vector<double>{cfg.xai.dropout_keep}
                            : cfg.keep_grid;
  for (double lr : lrs) {
    for (double keep : keeps) grid.emplace_back(lr, keep);
  }
  if (grid.size() > 1 && b.data.val_idx.empty()) {
    throw ValidationError("tuning grid supplied but the validation split is empty");
  }

  model::TrainedModel best_model;
  model::PosteriorDraws best_draws;
  double best_val = std::numeric_limits<double>::infinity();
  FitOutcome outcome;
  for (const auto& [lr, keep] : grid) {
    model::XaiConfig xc = cfg.xai;
    xc.learning_rate = lr;
    xc.dropout_keep = keep;
    xc.seed = derive_seed(cfg.seed, 72);
    model::TrainedModel trained = model::train(standardized, features, xc);
    trained.stand = stats;
    model::PosteriorDraws draws =
        model::mc_dropout_draws(trained, standardized, features, xc);
    double val = std::numeric_limits<double>::quiet_NaN();
    if (!b.data.val_idx.empty()) {
      const Eigen::MatrixXd points =
          point_predictions(trained, draws, standardized, b.data.val_idx);
      val = split_rmspe(points, b.data, b.data.val_idx);
    }
    const double score = grid.size() > 1 ? val : 0.0;
    if (score < best_val || !std::isfinite(best_val)) {
      best_val = score;
      best_model = std::move(trained);
      best_draws = std::move(draws);
      outcome.val_rmspe = val;
      outcome.chosen_learning_rate = lr;
      outcome.chosen_keep = keep;
    }
  }

  outcome.tau2_hat = best_model.tau2_hat;
  if (!b.data.test_idx.empty()) {
    const Eigen::MatrixXd points =
        point_predictions(best_model, best_draws, standardized, b.data.test_idx);
    outcome.test_rmspe = split_rmspe(points, b.data, b.data.test_idx);
  } else {
    outcome.test_rmspe = std::numeric_limits<double>::quiet_NaN();
  }

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create " + cfg.out_dir.string());
  bundle::save_checkpoint(best_model, cfg.out_dir / "checkpoint.json");
  bundle::save_draws(best_draws, b.data.node_of, cfg.out_dir / "draws");

  {
    // fitted values for every subject, original scale
    std::vector<int> all(b.data.n());
    for (int i = 0; i < b.data.n(); ++i) all[i] = i;
    const Eigen::MatrixXd points =
        point_predictions(best_model, best_draws, standardized, all);
    Eigen::MatrixXd rows(static_cast<long>(b.data.n()) * b.data.J(), 3);
    long r = 0;
    for (int i = 0; i < b.data.n(); ++i) {
      for (int j = 0; j < b.data.J(); ++j, ++r) {
        rows(r, 0) = i;
        rows(r, 1) = j;
        rows(r, 2) = points(i, j);
      }
    }
    bundle::write_csv(cfg.out_dir / "fitted.csv", {"subject", "roi", "fitted"},
                      rows);
  }
  {
    Eigen::MatrixXd rows(best_model.loss_trace.size(), 2);
    for (std::size_t e = 0; e < best_model.loss_trace.size(); ++e) {
      rows(e, 0) = static_cast<double>(e);
      rows(e, 1) = best_model.loss_trace[e];
    }
    bundle::write_csv(cfg.out_dir / "loss_trace.csv", {"epoch", "loss"}, rows);
  }
  {
    auto out = open_out(cfg.out_dir / "fit_report.txt");
    out << "tau2_hat = " << bundle::format_double(outcome.tau2_hat) << '\n'
        << "learning_rate = "
        << bundle::format_double(outcome.chosen_learning_rate) << '\n'
        << "dropout_keep = " << bundle::format_double(outcome.chosen_keep)
        << '\n'
        << "val_rmspe = " << bundle::format_double(outcome.val_rmspe) << '\n'
        << "test_rmspe = " << bundle::format_double(outcome.test_rmspe) << '\n';
  }
  return outcome;
}

void cmd_predict(const RunConfig& cfg, const fs::path& checkpoint_path,
                 const fs::path& bundle_dir, const fs::path& draws_dir,
                 const fs::path& features_path) {
  const model::TrainedModel trained = bundle::load_checkpoint(checkpoint_path);
  const bundle::DatasetBundle b = bundle::load_bundle(bundle_dir);
  const model::PosteriorDraws draws = bundle::load_draws(draws_dir);
  if (trained.stand.y_mean.size() != b.data.J()) {
    throw ValidationError("checkpoint and bundle disagree on ROI count");
  }
  const model::SpatialDataset standardized =
      apply_standardization(b.data, trained.stand);

  std::vector<int> subjects;
  if (cfg.predict_split == "train") subjects = b.data.train_idx;
  else if (cfg.predict_split == "val") subjects = b.data.val_idx;
  else if (cfg.predict_split == "test") subjects = b.data.test_idx;
  else if (cfg.predict_split == "all") {
    subjects.resize(b.data.n());
    for (int i = 0; i < b.data.n(); ++i) subjects[i] = i;
  } else {
    throw ValidationError("predict.split must be train, val, test or all");
  }

  const bool in_sample =
      draws.h_draws.cols() == static_cast<long>(b.data.n()) * b.data.V;
  std::optional<model::FeatureTable> features;
  if (!in_sample) features = features_for(b, features_path);

  const Eigen::MatrixXd points =
      in_sample
          ? point_predictions(trained, draws, standardized, subjects)
          : Eigen::MatrixXd();

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create " + cfg.out_dir.string());
  auto out = open_out(cfg.out_dir / "predictions.csv");
  out << "subject,roi,point,lower,upper\n";
  std::ofstream samples_out;
  if (cfg.predict_samples) {
    samples_out = open_out(cfg.out_dir / "prediction_samples.csv");
    samples_out << "subject,roi,f,sample\n";
  }

  const int J = b.data.J();
  for (std::size_t t = 0; t < subjects.size(); ++t) {
    const int i = subjects[t];
    const std::uint64_t noise_seed = derive_seed(cfg.seed, 81, i);
    model::PredictiveSamples ps;
    Eigen::RowVectorXd point_row(J);
    if (in_sample) {
      ps = model::posterior_predictive(trained, draws, standardized, i,
                                       noise_seed);
      point_row = points.row(t);
    } else {
      Eigen::MatrixXd x_orig(J, b.data.Q());
      for (int q = 0; q < b.data.Q(); ++q) {
        x_orig.col(q) = b.data.X[q].row(i).transpose();
      }
      Eigen::MatrixXd g(b.data.V, features->dim());
      for (int v = 0; v < b.data.V; ++v) g.row(v) = features->row(i, v);
      ps = model::posterior_predictive_new(trained, draws, x_orig, g,
                                           b.data.node_of, noise_seed);
      point_row = ps.orig_scale.colwise().mean();
    }
    const int F = static_cast<int>(ps.orig_scale.rows());
    std::vector<double> col(F);
    for (int j = 0; j < J; ++j) {
      for (int f = 0; f < F; ++f) col[f] = ps.orig_scale(f, j);
      double lo, hi;
      if (cfg.interval_type == metrics::IntervalType::Quantile) {
        lo = stats::quantile(col, 0.025);
        hi = stats::quantile(col, 0.975);
      } else {
        std::sort(col.begin(), col.end());
        const int keep = static_cast<int>(std::ceil(0.95 * F));
        lo = col.front();
        hi = col[keep - 1];
        for (int s = 0; s + keep <= F; ++s) {
          if (col[s + keep - 1] - col[s] < hi - lo) {
            lo = col[s];
            hi = col[s + keep - 1];
          }
        }
      }
      out << i << ',' << j << ',' << bundle::format_double(point_row(j)) << ','
          << bundle::format_double(lo) << ',' << bundle::format_double(hi)
          << '\n';
      if (cfg.predict_samples) {
        for (int f = 0; f < F; ++f) {
          samples_out << i << ',' << j << ',' << f << ','
                      << bundle::format_double(ps.orig_scale(f, j)) << '\n';
        }
      }
    }
  }
  if (!out) throw IoError("write failed: predictions.csv");
}

metrics::BenchmarkReport cmd_benchmark(const RunConfig& cfg) {
  const simgen::ScenarioSpec scenario = resolve_scenario(cfg);
  metrics::BenchmarkOptions options;
  options.methods = cfg.methods;
  options.replications = cfg.replications;
  options.seed = cfg.seed;
  options.xai = cfg.xai;
  options.interval_type = cfg.interval_type;
  for (const auto& m : options.methods) {
    if (m != "xai" && m != "glm" && m != "xai-no-network") {
      throw ValidationError("unknown benchmark method: " + m);
    }
  }
  const metrics::BenchmarkReport report = metrics::benchmark(scenario, options);

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create " + cfg.out_dir.string());

  int max_q = 0;
  for (const auto& rec : report.records) {
    max_q = std::max(max_q, static_cast<int>(rec.beta_rmse.size()));
  }
  {
    auto out = open_out(cfg.out_dir / "benchmark_records.csv");
    out << "method,replication,ok,error,rmspe,coverage,interval_length";
    for (int q = 0; q < max_q; ++q) out << ",beta_rmse" << (q + 1);
    out << ",h_rmse,r2,seconds_simulate,seconds_fit,seconds_draws,seconds_eval\n";
    for (const auto& rec : report.records) {
      std::string error = rec.error;
      for (char& c : error) {
        if (c == ',' || c == '\n') c = ';';
      }
      out << rec.method << ',' << rec.replication << ',' << (rec.ok ? 1 : 0)
          << ',' << error << ',' << bundle::format_double(rec.rmspe) << ','
          << bundle::format_double(rec.coverage) << ','
          << bundle::format_double(rec.interval_length);
      for (int q = 0; q < max_q; ++q) {
        out << ','
            << (q < static_cast<int>(rec.beta_rmse.size())
                    ? bundle::format_double(rec.beta_rmse[q])
                    : "NA");
      }
      out << ',' << bundle::format_double(rec.h_rmse) << ','
          << bundle::format_double(rec.r2) << ','
          << bundle::format_double(rec.seconds_simulate) << ','
          << bundle::format_double(rec.seconds_fit) << ','
          << bundle::format_double(rec.seconds_draws) << ','
          << bundle::format_double(rec.seconds_eval) << '\n';
    }
    if (!out) throw IoError("write failed: benchmark_records.csv");
  }
  {
    auto out = open_out(cfg.out_dir / "benchmark_aggregate.csv");
    out << "method,replications,rmspe_mean,rmspe_se,coverage_mean,coverage_se,"
           "length_mean,length_se";
    for (int q = 0; q < max_q; ++q) {
      out << ",beta_rmse" << (q + 1) << "_mean,beta_rmse" << (q + 1) << "_se";
    }
    out << ",h_rmse_mean,h_rmse_se,r2_mean,r2_se\n";
    for (const auto& row : report.aggregates) {
      out << row.method << ',' << row.replications << ','
          << bundle::format_double(row.rmspe_mean) << ','
          << na_or(row.rmspe_se, row.se_available) << ','
          << bundle::format_double(row.coverage_mean) << ','
          << na_or(row.coverage_se, row.se_available) << ','
          << bundle::format_double(row.length_mean) << ','
          << na_or(row.length_se, row.se_available);
      for (int q = 0; q < max_q; ++q) {
        if (q < static_cast<int>(row.beta_rmse_mean.size())) {
          out << ',' << bundle::format_double(row.beta_rmse_mean[q]) << ','
              << na_or(row.beta_rmse_se[q], row.se_available);
        } else {
          out << ",NA,NA";
        }
      }
      out << ',' << bundle::format_double(row.h_rmse_mean) << ','
          << na_or(row.h_rmse_se, row.se_available) << ','
          << bundle::format_double(row.r2_mean) << ','
          << na_or(row.r2_se, row.se_available) << '\n';
    }
    if (!out) throw IoError("write failed: benchmark_aggregate.csv");
  }
  return report;
}

}  // namespace xai::pipeline
