#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "xai/bundle.hpp"
#include "xai/errors.hpp"
#include "xai/pipeline.hpp"
#include "xai/simgen.hpp"

using namespace xai;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("xai_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

simgen::SyntheticTruth tiny_truth(std::uint64_t seed = 15, bool networks = false) {
  simgen::ScenarioSpec spec =
      simgen::find_scenario(networks ? "case1_end_to_end" : "case1");
  spec.n = 10;
  spec.n_train = 6;
  spec.n_val = 2;
  spec.n_test = 2;
  spec.J = 12;
  spec.V = 4;
  if (networks) spec.g_dim = 3;
  spec.seed = seed;
  return simgen::generate_scenario(spec);
}

pipeline::RunConfig tiny_run_config() {
  pipeline::RunConfig cfg;
  cfg.xai.beta_hidden = {8};
  cfg.xai.h_hidden = {8};
  cfg.xai.epochs = 5;
  cfg.xai.F = 20;
  cfg.seed = 2;
  return cfg;
}

}  // namespace

TEST_CASE("bundle round trips exactly and re-saves byte-identically") {
  const auto truth = tiny_truth();
  const bundle::DatasetBundle original = bundle::from_truth(truth);
  const fs::path dir = temp_dir("bundle");
  bundle::save_bundle(original, dir / "a");
  const bundle::DatasetBundle loaded = bundle::load_bundle(dir / "a");

  CHECK(loaded.case_label == original.case_label);
  CHECK(loaded.seed == original.seed);
  CHECK(loaded.data.Y == original.data.Y);
  CHECK(loaded.data.coords == original.data.coords);
  CHECK(loaded.data.node_of == original.data.node_of);
  for (int q = 0; q < original.data.Q(); ++q) {
    CHECK(loaded.data.X[q] == original.data.X[q]);
  }
  CHECK(loaded.data.train_idx == original.data.train_idx);
  CHECK(loaded.truth_beta == original.truth_beta);
  CHECK(loaded.truth_h == original.truth_h);
  CHECK(loaded.truth_g == original.truth_g);
  CHECK(loaded.truth_tau2 == original.truth_tau2);

  bundle::save_bundle(loaded, dir / "b");
  for (const char* name : {"manifest.txt", "coords.csv", "nodes.csv", "x.csv",
                           "y.csv", "splits.csv"}) {
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
  }
  fs::remove_all(dir);
}

TEST_CASE("bundle with networks round trips") {
  const auto truth = tiny_truth(16, true);
  REQUIRE_FALSE(truth.networks.empty());
  const fs::path dir = temp_dir("bundle_net");
  bundle::save_bundle(bundle::from_truth(truth), dir);
  const bundle::DatasetBundle loaded = bundle::load_bundle(dir);
  REQUIRE(loaded.networks.size() == truth.networks.size());
  for (std::size_t i = 0; i < loaded.networks.size(); ++i) {
    CHECK(loaded.networks[i] == truth.networks[i]);
  }
  fs::remove_all(dir);
}

TEST_CASE("bundle validation names the offending table") {
  const auto truth = tiny_truth(17);
  const fs::path dir = temp_dir("bundle_bad");
  bundle::save_bundle(bundle::from_truth(truth), dir);

  // corrupt one row of y.csv
  std::string y = slurp(dir / "y.csv");
  const auto pos = y.rfind('\n', y.size() - 2);
  y = y.substr(0, pos + 1) + "0,0,1.0\n";  // duplicate index out of order
  std::ofstream(dir / "y.csv", std::ios::binary) << y;
  try {
    bundle::load_bundle(dir);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("y.csv") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("checkpoint save/load/save is byte identical") {
  const auto truth = tiny_truth(18);
  auto [data, stats] = model::standardize(truth.dataset);
  model::FeatureTable features;
  features.V = truth.dataset.V;
  features.values = truth.g;
  model::XaiConfig cfg = tiny_run_config().xai;
  model::TrainedModel trained = model::train(data, features, cfg);
  trained.stand = stats;

  const fs::path dir = temp_dir("ckpt");
  bundle::save_checkpoint(trained, dir / "a.json");
  const model::TrainedModel loaded = bundle::load_checkpoint(dir / "a.json");
  bundle::save_checkpoint(loaded, dir / "b.json");
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));

  CHECK(loaded.beta0 == trained.beta0);
  CHECK(loaded.tau2_hat == trained.tau2_hat);
  CHECK(loaded.beta_nets[0].layers[0].W == trained.beta_nets[0].layers[0].W);
  CHECK(loaded.stand.y_mean == trained.stand.y_mean);
  fs::remove_all(dir);
}

TEST_CASE("draws and features round trip") {
  const auto truth = tiny_truth(19);
  auto [data, stats] = model::standardize(truth.dataset);
  model::FeatureTable features;
  features.V = truth.dataset.V;
  features.values = truth.g;
  model::XaiConfig cfg = tiny_run_config().xai;
  model::TrainedModel trained = model::train(data, features, cfg);
  trained.stand = stats;
  const model::PosteriorDraws draws =
      model::mc_dropout_draws(trained, data, features, cfg);

  const fs::path dir = temp_dir("draws");
  bundle::save_draws(draws, data.node_of, dir);
  const model::PosteriorDraws loaded = bundle::load_draws(dir);
  CHECK(loaded.h_draws == draws.h_draws);
  CHECK(loaded.tau2 == draws.tau2);
  CHECK(loaded.mask_seed_base == draws.mask_seed_base);
  for (std::size_t f = 0; f < draws.beta_draws.size(); ++f) {
    CHECK(loaded.beta_draws[f] == draws.beta_draws[f]);
  }
  CHECK(fs::exists(dir / "draws_beta.csv"));
  CHECK(fs::exists(dir / "draws_h.csv"));
  CHECK(fs::exists(dir / "draws_tau2.csv"));

  Eigen::VectorXd eta = Eigen::VectorXd::LinSpaced(data.n(), 0.0, 1.0);
  bundle::save_features(features, eta, dir / "features.csv");
  auto [f2, eta2] = bundle::load_features(dir / "features.csv");
  CHECK(f2.values == features.values);
  CHECK(f2.V == features.V);
  CHECK(eta2 == eta);
  fs::remove_all(dir);
}

TEST_CASE("run config parsing rejects unknown keys") {
  const fs::path dir = temp_dir("cfg");
  {
    std::ofstream out(dir / "good.txt");
    out << "# comment\nseed = 12\ncase = case3\nxai.epochs = 17\n"
           "benchmark.methods = xai,glm\nscenario.J = 60\n";
  }
  const pipeline::RunConfig cfg = pipeline::parse_run_config(dir / "good.txt");
  CHECK(cfg.seed == 12);
  CHECK(cfg.case_label == "case3");
  CHECK(cfg.xai.epochs == 17);
  CHECK(cfg.methods == std::vector<std::string>{"xai", "glm"});
  REQUIRE(cfg.J.has_value());
  CHECK(*cfg.J == 60);

  {
    std::ofstream out(dir / "bad.txt");
    out << "xai.epochz = 17\n";
  }
  CHECK_THROWS_AS(pipeline::parse_run_config(dir / "bad.txt"), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("simulate twice yields byte-identical bundles") {
  pipeline::RunConfig cfg = tiny_run_config();
  cfg.case_label = "case1";
  cfg.n = 10;
  cfg.n_train = 6;
  cfg.n_val = 2;
  cfg.n_test = 2;
  cfg.J = 12;
  cfg.V = 4;
  const fs::path dir = temp_dir("sim");
  cfg.out_dir = dir / "a";
  pipeline::cmd_simulate(cfg);
  cfg.out_dir = dir / "b";
  pipeline::cmd_simulate(cfg);
  for (const char* name : {"manifest.txt", "y.csv", "x.csv"}) {
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
  }
  fs::remove_all(dir);
}

TEST_CASE("fit then predict reproduces fitted values") {
  pipeline::RunConfig cfg = tiny_run_config();
  cfg.case_label = "case1";
  cfg.n = 10;
  cfg.n_train = 6;
  cfg.n_val = 2;
  cfg.n_test = 2;
  cfg.J = 12;
  cfg.V = 4;
  const fs::path dir = temp_dir("fitpred");
  cfg.out_dir = dir / "bundle";
  pipeline::cmd_simulate(cfg);
  cfg.out_dir = dir / "fit";
  const pipeline::FitOutcome outcome =
      pipeline::cmd_fit(cfg, dir / "bundle", "");
  CHECK(std::isfinite(outcome.tau2_hat));
  CHECK(outcome.tau2_hat > 0.0);

  cfg.out_dir = dir / "pred";
  cfg.predict_split = "train";
  pipeline::cmd_predict(cfg, dir / "fit" / "checkpoint.json", dir / "bundle",
                        dir / "fit" / "draws", "");

  // same code path: the prediction points must match fitted.csv exactly
  auto [fh, fitted] = bundle::read_csv(dir / "fit" / "fitted.csv");
  auto [ph, preds] = bundle::read_csv(dir / "pred" / "predictions.csv");
  const bundle::DatasetBundle b = bundle::load_bundle(dir / "bundle");
  REQUIRE(preds.rows() ==
          static_cast<long>(b.data.train_idx.size()) * b.data.J());
  for (long r = 0; r < preds.rows(); ++r) {
    const int i = static_cast<int>(preds(r, 0));
    const int j = static_cast<int>(preds(r, 1));
    CHECK(preds(r, 2) ==
          doctest::Approx(fitted(static_cast<long>(i) * b.data.J() + j, 2))
              .epsilon(1e-10));
    CHECK(preds(r, 3) <= preds(r, 4));
  }

  // embed on a bundle without networks must fail loudly
  CHECK_THROWS_AS(pipeline::cmd_embed(cfg, dir / "bundle"), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("embed writes features for every subject") {
  pipeline::RunConfig cfg = tiny_run_config();
  cfg.case_label = "case1_end_to_end";
  cfg.n = 5;
  cfg.n_train = 3;
  cfg.n_val = 1;
  cfg.n_test = 1;
  cfg.J = 12;
  cfg.V = 4;
  cfg.g_dim = 3;
  cfg.mcmc.R = 2;
  cfg.mcmc.iterations = 400;
  cfg.mcmc.burn_in = 150;
  const fs::path dir = temp_dir("embed");
  cfg.out_dir = dir / "bundle";
  pipeline::cmd_simulate(cfg);
  cfg.out_dir = dir / "emb";
  pipeline::cmd_embed(cfg, dir / "bundle");
  auto [features, eta] = bundle::load_features(dir / "emb" / "features.csv");
  CHECK(features.values.rows() == 5 * 4);
  CHECK(features.dim() == 2);
  CHECK(eta.size() == 5);
  CHECK(fs::exists(dir / "emb" / "embed_diagnostics.csv"));

  // deterministic rerun
  cfg.out_dir = dir / "emb2";
  pipeline::cmd_embed(cfg, dir / "bundle");
  CHECK(slurp(dir / "emb" / "features.csv") ==
        slurp(dir / "emb2" / "features.csv"));
  fs::remove_all(dir);
}

#ifdef XAI_BIN_PATH
TEST_CASE("cli exit codes") {
  const std::string bin = XAI_BIN_PATH;
  const fs::path dir = temp_dir("cli");
  const std::string out = (dir / "out").string();
  // invalid case name -> validation error
  int rc = std::system(
      (bin + " simulate --case nope --out " + out + " >/dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(rc) == 2);
  // missing bundle -> io error
  rc = std::system(
      (bin + " embed --bundle " + (dir / "missing").string() + " --out " + out +
       " >/dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(rc) == 4);
  fs::remove_all(dir);
}
#endif
