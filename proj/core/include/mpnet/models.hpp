#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mpnet/geometry.hpp"
#include "mpnet/neuralnet.hpp"
#include "mpnet/pointcloud.hpp"
#include "mpnet/rng.hpp"

namespace mpnet {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double lambda = 1e-3;  // encoder weight penalty coefficient
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
};

void validate_train_config(const TrainConfig& cfg);

struct CaeArchitecture {
  std::vector<int> hidden = {256, 128, 64};  // encoder hidden widths; decoder mirrors them
  int latent_dim = 28;
};

struct PnetArchitecture {
  std::vector<int> hidden = {512, 512, 384, 384, 256, 256, 128, 128, 64, 64, 32, 32};
  double dropout_p = 0.5;
};

/// Obstacle-cloud encoder theta^e plus the metadata needed to feed it.
struct EncoderModel {
  MlpParams params;
  int latent_dim = 0;
  int n_pc = 0;
  int dim_w = 0;
  Bounds cloud_bounds;
};

struct DecoderModel {
  MlpParams params;
};

/// Planning network theta; consumes (Z, x_t, x_T) normalized, emits the next
/// state normalized.
struct PlannerModel {
  MlpParams params;
  WorkspaceKind kind = WorkspaceKind::simple2d;
  int state_dim = 0;
  int latent_dim = 0;
  double dropout_p = 0.5;
  Bounds state_bounds;  // per state dimension; [-pi, pi] for the rigid2d angle
};

/// One expert transition, already normalized into [-1, 1] coordinates.
struct ImitationRecord {
  int workspace_index = 0;
  Eigen::VectorXd x_t;
  Eigen::VectorXd x_goal;
  Eigen::VectorXd x_next;
  std::string path_id;  // provenance: which stored expert path and step
  int step_index = 0;
};

struct ImitationDataset {
  WorkspaceKind kind = WorkspaceKind::simple2d;
  Bounds state_bounds;
  std::vector<std::string> workspace_ids;
  std::vector<Eigen::VectorXd> flat_clouds;  // normalized flattened cloud per workspace
  std::vector<ImitationRecord> records;
};

// --- normalization helpers shared by training and inference ----------------

/// Per-state-dimension normalization box: workspace bounds on spatial
/// coordinates, [-pi, pi] on the rigid2d angle.
Bounds state_bounds_for(const Workspace& w);

Eigen::VectorXd normalize_config(const Config& x, const Bounds& b);
Config denormalize_config(const Eigen::VectorXd& v, const Bounds& b, WorkspaceKind kind);

// --- training ---------------------------------------------------------------

struct CaeTrainResult {
  EncoderModel encoder;
  DecoderModel decoder;
  std::vector<double> loss_history;  // entry 0 = before training, then one per epoch
};

struct CloudMeta {
  int n_pc = 0;
  int dim_w = 0;
  Bounds bounds;
};

/// Trains the encoder-decoder pair on flattened normalized clouds by
/// minimizing reconstruction error plus the lambda-weighted squared encoder
/// weights. Throws TrainingDiverged on a non-finite loss.
CaeTrainResult train_cae(const std::vector<Eigen::VectorXd>& clouds, const CaeArchitecture& arch,
                         const TrainConfig& cfg, const CloudMeta& meta);

/// Deterministic latent encoding of a cloud (no dropout in the encoder).
Eigen::VectorXd encode(const EncoderModel& enc, const PointCloud& cloud);

struct PnetTrainResult {
  PlannerModel planner;
  std::vector<double> train_loss_history;  // deterministic full-train-set MSE; entry 0 = initial
  std::vector<double> val_loss_history;    // empty when the dataset has a single workspace
};

/// Imitation training of the planning network on (Z, x_t, x_T) -> x_{t+1}
/// with the encoder frozen. Dropout is active during training at
/// arch.dropout_p. Validation is split by workspace.
PnetTrainResult train_pnet(const ImitationDataset& ds, const EncoderModel& enc,
                           const PnetArchitecture& arch, const TrainConfig& cfg);

/// One planning-network step: predicts the next state toward x_goal,
/// denormalized into workspace coordinates. stochastic=true applies dropout
/// masks drawn from rng. Throws ModelOutputError on non-finite output.
Config pnet_step(const PlannerModel& pl, const Eigen::VectorXd& latent, const Config& x_t,
                 const Config& x_goal, RngStream& rng, bool stochastic);

// --- model bundle persistence ----------------------------------------------

struct ModelBundle {
  EncoderModel encoder;
  std::optional<DecoderModel> decoder;
  PlannerModel planner;
  std::string dataset_fingerprint;
  std::uint64_t seed = 0;
};

/// Writes encoder.mpw / decoder.mpw / pnet.mpw and model_manifest.json into
/// the directory.
void save_models(const ModelBundle& bundle, const std::filesystem::path& dir);
ModelBundle load_models(const std::filesystem::path& dir);

}  // namespace mpnet
