#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "xai/errors.hpp"
#include "xai/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config, "run configuration file");
  cmd->add_option("--out", args->out, "output directory");
  cmd->add_option("--seed", args->seed, "master seed")
      ->each([args](const std::string&) { args->seed_given = true; });
}

xai::pipeline::RunConfig make_config(const CommonArgs& args) {
  xai::pipeline::RunConfig cfg;
  if (!args.config.empty()) {
    cfg = xai::pipeline::parse_run_config(args.config);
  }
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (args.seed_given) cfg.seed = args.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage explainable image-on-image regression"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string case_label;
  std::string bundle_dir, features_path, checkpoint_path, draws_dir;
  std::string methods, split;
  int reps = 0;
  bool samples = false;

  auto* sim = app.add_subcommand("simulate", "write a synthetic dataset bundle");
  add_common(sim, &common);
  sim->add_option("--case", case_label, "scenario name, e.g. case1");

  auto* embed = app.add_subcommand("embed", "stage-1 network embedding");
  add_common(embed, &common);
  embed->add_option("--bundle", bundle_dir, "dataset bundle directory")
      ->required();

  auto* fit = app.add_subcommand("fit", "train the regression model");
  add_common(fit, &common);
  fit->add_option("--bundle", bundle_dir, "dataset bundle directory")
      ->required();
  fit->add_option("--features", features_path, "stage-1 features table");

  auto* predict = app.add_subcommand("predict", "posterior predictions");
  add_common(predict, &common);
  predict->add_option("--checkpoint", checkpoint_path, "checkpoint file")
      ->required();
  predict->add_option("--bundle", bundle_dir, "dataset bundle directory")
      ->required();
  predict->add_option("--draws", draws_dir, "draws directory")->required();
  predict->add_option("--features", features_path, "stage-1 features table");
  predict->add_option("--split", split, "train | val | test | all");
  predict->add_flag("--samples", samples, "also write raw predictive samples");

  auto* bench = app.add_subcommand("benchmark", "replication study");
  add_common(bench, &common);
  bench->add_option("--case", case_label, "scenario name");
  bench->add_option("--reps", reps, "replication count");
  bench->add_option("--methods", methods, "comma list: xai,glm,xai-no-network");

  CLI11_PARSE(app, argc, argv);

  try {
    xai::pipeline::RunConfig cfg = make_config(common);
    if (!case_label.empty()) cfg.case_label = case_label;

    if (sim->parsed()) {
      xai::pipeline::cmd_simulate(cfg);
    } else if (embed->parsed()) {
      xai::pipeline::cmd_embed(cfg, bundle_dir);
    } else if (fit->parsed()) {
      const auto outcome = xai::pipeline::cmd_fit(cfg, bundle_dir, features_path);
      std::cout << "tau2_hat " << outcome.tau2_hat << "\nval_rmspe "
                << outcome.val_rmspe << "\ntest_rmspe " << outcome.test_rmspe
                << '\n';
    } else if (predict->parsed()) {
      if (!split.empty()) cfg.predict_split = split;
      if (samples) cfg.predict_samples = true;
      xai::pipeline::cmd_predict(cfg, checkpoint_path, bundle_dir, draws_dir,
                                 features_path);
    } else if (bench->parsed()) {
      if (reps > 0) cfg.replications = reps;
      if (!methods.empty()) {
        cfg.methods.clear();
        std::stringstream ss(methods);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.methods.push_back(tok);
      }
      const auto report = xai::pipeline::cmd_benchmark(cfg);
      for (const auto& row : report.aggregates) {
        std::cout << row.method << " rmspe " << row.rmspe_mean << " coverage "
                  << row.coverage_mean << " length " << row.length_mean << '\n';
      }
      if (report.failures > 0) {
        std::cout << report.failures << " replication failures recorded\n";
      }
    }
  } catch (const xai::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const xai::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const xai::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
