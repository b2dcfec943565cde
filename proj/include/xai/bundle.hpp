#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xai/latent_network.hpp"
#include "xai/simgen.hpp"
#include "xai/xai_model.hpp"

namespace xai::bundle {

inline constexpr int kBundleVersion = 1;
inline constexpr int kCheckpointVersion = 1;

// On-disk dataset: manifest + coords/nodes/x/y/splits tables, optional
// per-subject network matrices, optional truth sidecar.
struct DatasetBundle {
  std::string case_label = "custom";
  std::uint64_t seed = 0;
  model::SpatialDataset data;
  int g_dim = 0;  // manifest R; latent feature dimension when known
  std::vector<Eigen::MatrixXd> networks;  // n matrices, V x V, may be empty
  bool has_truth = false;
  Eigen::MatrixXd truth_beta;  // J x Q
  Eigen::MatrixXd truth_h;     // n x V
  Eigen::MatrixXd truth_g;     // (n*V) x g_dim
  double truth_tau2 = 0.0;
  double empirical_snr = 0.0;
};

DatasetBundle from_truth(const simgen::SyntheticTruth& truth);

void validate_bundle(const DatasetBundle& b);

void save_bundle(const DatasetBundle& b, const std::filesystem::path& dir);
DatasetBundle load_bundle(const std::filesystem::path& dir);

// Stage-1 features plus eta-hat column, row order (subject, node).
void save_features(const model::FeatureTable& features,
                   const Eigen::VectorXd& eta_hat,
                   const std::filesystem::path& path);
std::pair<model::FeatureTable, Eigen::VectorXd> load_features(
    const std::filesystem::path& path);

// JSON checkpoint: config echo, standardization stats, all parameters.
// save -> load -> save is byte identical.
void save_checkpoint(const model::TrainedModel& model,
                     const std::filesystem::path& path);
model::TrainedModel load_checkpoint(const std::filesystem::path& path);

// draws.json for reload plus the tabular exports draws_beta.csv
// (f,q,v,j,beta), draws_h.csv (f,i,v,h) and draws_tau2.csv.
void save_draws(const model::PosteriorDraws& draws,
                const std::vector<int>& node_of,
                const std::filesystem::path& dir);
model::PosteriorDraws load_draws(const std::filesystem::path& dir);

// Shared CSV helpers (header row, full round-trip precision).
void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const Eigen::MatrixXd& rows);
std::pair<std::vector<std::string>, Eigen::MatrixXd> read_csv(
    const std::filesystem::path& path);

std::string format_double(double x);

}  // namespace xai::bundle
