#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mpnet/rng.hpp"

namespace mpnet {

enum class Activation { prelu, identity };

struct LayerSpec {
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::prelu;
  double dropout_p = 0.0;
};

/// Builds the spec of a standard stack: PReLU hidden layers with the given
/// dropout, identity output layer with none.
std::vector<LayerSpec> mlp_spec(int input_dim, const std::vector<int>& hidden, int output_dim,
                                double dropout_p);

struct Layer {
  Eigen::MatrixXd weight;  // out_dim x in_dim
  Eigen::VectorXd bias;    // out_dim
  double slope = 0.25;     // layer-shared PReLU slope
};

struct MlpParams {
  std::vector<LayerSpec> spec;
  std::vector<Layer> layers;

  int input_dim() const { return spec.empty() ? 0 : spec.front().in_dim; }
  int output_dim() const { return spec.empty() ? 0 : spec.back().out_dim; }
  std::size_t parameter_count() const;
  bool all_finite() const;
};

/// Uniform init in +-sqrt(6/(in+out)), biases zero, slopes 0.25.
MlpParams init_mlp(const std::vector<LayerSpec>& spec, RngStream& rng);

/// Throws std::invalid_argument on inconsistent shapes or invalid specs.
void validate_params(const MlpParams& params);

enum class ForwardMode { train, stochastic_infer, deterministic_infer };

/// Per-layer intermediates needed by backward. mask[l] holds the applied
/// inverted-dropout scales (0 or 1/(1-p)); empty when the layer has none.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to layer l, one column per sample
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of layer l
  std::vector<Eigen::MatrixXd> mask;
};

/// prelu(x) = x for x >= 0, a*x otherwise.
inline double prelu(double x, double a) { return x >= 0.0 ? x : a * x; }

/// Affine + PReLU stack over a batch (one column per sample). In train and
/// stochastic_infer modes each hidden unit is zeroed with probability p and
/// survivors are scaled by 1/(1-p); deterministic_infer applies no dropout,
/// draws nothing from rng, and is a pure function.
Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& input, ForwardMode mode,
                        RngStream& rng, ForwardCache* cache = nullptr);
Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input, ForwardMode mode,
                        RngStream& rng, ForwardCache* cache = nullptr);
/// deterministic_infer without the unused rng argument.
Eigen::VectorXd forward_deterministic(const MlpParams& params, const Eigen::VectorXd& input);

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
  std::vector<double> slope;
};

MlpGrads zero_grads(const MlpParams& params);

/// Exact gradients of the loss whose gradient at the network output is
/// `output_grad` (same shape as the forward result). Dropout masks are
/// replayed from the cache. When `input_grad` is non-null it receives the
/// gradient with respect to the network input (needed to chain a decoder
/// into an encoder).
MlpGrads backward(const MlpParams& params, const ForwardCache& cache,
                  const Eigen::MatrixXd& output_grad, Eigen::MatrixXd* input_grad = nullptr);

/// Adds the gradient of lambda * sum_ij(W_ij^2) (weight matrices only) to
/// the weight gradients: 2 * lambda * W.
void add_weight_penalty(MlpGrads& grads, const MlpParams& params, double lambda);

/// Sum of squared weight-matrix entries (biases and slopes excluded).
double squared_weight_norm(const MlpParams& params);

/// (1/n_p) sum_j ||predicted_j - target_j||^2.
double mse_loss(const std::vector<Eigen::VectorXd>& predicted,
                const std::vector<Eigen::VectorXd>& target, int n_p);
double mse_loss(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target, int n_p);

/// (1/n_obs) sum ||x - x_hat||^2 + lambda * sum_ij (theta^e_ij)^2, the
/// penalty summing squared encoder weight-matrix entries only.
double cae_loss(const std::vector<Eigen::VectorXd>& batch,
                const std::vector<Eigen::VectorXd>& reconstructed, const MlpParams& encoder_params,
                double lambda, int n_obs);
double cae_loss(const Eigen::MatrixXd& batch, const Eigen::MatrixXd& reconstructed,
                const MlpParams& encoder_params, double lambda, int n_obs);

/// Adaptive-moment optimizer state; first/second moment accumulators match
/// the parameter shapes.
struct OptimizerState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Eigen::MatrixXd> m_weight, v_weight;
  std::vector<Eigen::VectorXd> m_bias, v_bias;
  std::vector<double> m_slope, v_slope;
};

OptimizerState make_optimizer(const MlpParams& params, double learning_rate = 1e-3);

/// One bias-corrected adaptive-moment update, in place.
void optimizer_step(MlpParams& params, const MlpGrads& grads, OptimizerState& state);

/// Single file: a JSON manifest {"spec": [...], "seed": ..., "created": ...}
/// followed by a blob of little-endian 64-bit floats per layer: weights
/// row-major, then bias, then slope.
void save_params(const MlpParams& params, const std::filesystem::path& file, std::uint64_t seed,
                 const std::string& created = "");
MlpParams load_params(const std::filesystem::path& file);

}  // namespace mpnet
