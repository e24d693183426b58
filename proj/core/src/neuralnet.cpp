#include "mpnet/neuralnet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mpnet/errors.hpp"
#include "json.hpp"

namespace mpnet {

namespace {

const char kWeightMagic[8] = {'M', 'P', 'N', 'E', 'T', 'W', '0', '1'};

std::string activation_name(Activation a) {
  return a == Activation::prelu ? "prelu" : "identity";
}

Activation activation_from_name(const std::string& s) {
  if (s == "prelu") return Activation::prelu;
  if (s == "identity") return Activation::identity;
  throw ParseError("unknown activation: " + s);
}

void validate_spec(const std::vector<LayerSpec>& spec) {
  if (spec.empty()) throw std::invalid_argument("mlp spec must have at least one layer");
  for (std::size_t l = 0; l < spec.size(); ++l) {
    if (spec[l].in_dim <= 0 || spec[l].out_dim <= 0)
      throw std::invalid_argument("layer dimensions must be positive");
    if (spec[l].dropout_p < 0.0 || spec[l].dropout_p > 1.0)
      throw std::invalid_argument("dropout_p must be in [0,1]");
    if (l + 1 < spec.size() && spec[l].out_dim != spec[l + 1].in_dim)
      throw std::invalid_argument("layer dimension chain broken at layer " + std::to_string(l));
  }
  if (spec.back().activation != Activation::identity || spec.back().dropout_p != 0.0)
    throw std::invalid_argument("output layer must have identity activation and no dropout");
}

}  // namespace

std::vector<LayerSpec> mlp_spec(int input_dim, const std::vector<int>& hidden, int output_dim,
                                double dropout_p) {
  std::vector<LayerSpec> spec;
  int in = input_dim;
  for (int h : hidden) {
    spec.push_back({in, h, Activation::prelu, dropout_p});
    in = h;
  }
  spec.push_back({in, output_dim, Activation::identity, 0.0});
  return spec;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers)
    n += static_cast<std::size_t>(l.weight.size()) + static_cast<std::size_t>(l.bias.size()) + 1;
  return n;
}

bool MlpParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite() || !std::isfinite(l.slope)) return false;
  }
  return true;
}

MlpParams init_mlp(const std::vector<LayerSpec>& spec, RngStream& rng) {
  validate_spec(spec);
  MlpParams params;
  params.spec = spec;
  params.layers.reserve(spec.size());
  for (const auto& s : spec) {
    Layer layer;
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
    layer.weight.resize(s.out_dim, s.in_dim);
    for (int r = 0; r < s.out_dim; ++r)
      for (int c = 0; c < s.in_dim; ++c) layer.weight(r, c) = rng.uniform(-limit, limit);
    layer.bias = Eigen::VectorXd::Zero(s.out_dim);
    layer.slope = 0.25;
    params.layers.push_back(std::move(layer));
  }
  return params;
}

void validate_params(const MlpParams& params) {
  validate_spec(params.spec);
  if (params.layers.size() != params.spec.size())
    throw std::invalid_argument("layer count does not match spec");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& s = params.spec[l];
    const auto& layer = params.layers[l];
    if (layer.weight.rows() != s.out_dim || layer.weight.cols() != s.in_dim ||
        layer.bias.size() != s.out_dim)
      throw std::invalid_argument("layer " + std::to_string(l) + " shape does not match spec");
  }
}

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& input, ForwardMode mode,
                        RngStream& rng, ForwardCache* cache) {
  if (input.rows() != params.input_dim())
    throw std::invalid_argument("forward: input dimension " + std::to_string(input.rows()) +
                                " != expected " + std::to_string(params.input_dim()));
  const std::size_t num_layers = params.layers.size();
  if (cache) {
    cache->inputs.assign(num_layers, {});
    cache->pre.assign(num_layers, {});
    cache->mask.assign(num_layers, {});
  }

  Eigen::MatrixXd h = input;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const auto& s = params.spec[l];
    const auto& layer = params.layers[l];
    if (cache) cache->inputs[l] = h;

    Eigen::MatrixXd z = (layer.weight * h).colwise() + layer.bias;
    if (cache) cache->pre[l] = z;

    if (s.activation == Activation::prelu)
      h = z.cwiseMax(0.0) + layer.slope * z.cwiseMin(0.0);
    else
      h = std::move(z);

    if (s.dropout_p > 0.0 && mode != ForwardMode::deterministic_infer) {
      const double keep = 1.0 - s.dropout_p;
      const double scale = keep > 0.0 ? 1.0 / keep : 0.0;
      Eigen::MatrixXd mask(h.rows(), h.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        for (Eigen::Index r = 0; r < mask.rows(); ++r)
          mask(r, c) = rng.bernoulli(s.dropout_p) ? 0.0 : scale;
      h = h.cwiseProduct(mask);
      if (cache) cache->mask[l] = std::move(mask);
    }
  }
  return h;
}

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input, ForwardMode mode,
                        RngStream& rng, ForwardCache* cache) {
  return forward(params, Eigen::MatrixXd(input), mode, rng, cache).col(0);
}

Eigen::VectorXd forward_deterministic(const MlpParams& params, const Eigen::VectorXd& input) {
  RngStream unused(0);
  return forward(params, input, ForwardMode::deterministic_infer, unused);
}

MlpGrads zero_grads(const MlpParams& params) {
  MlpGrads g;
  g.weight.reserve(params.layers.size());
  g.bias.reserve(params.layers.size());
  g.slope.assign(params.layers.size(), 0.0);
  for (const auto& l : params.layers) {
    g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

MlpGrads backward(const MlpParams& params, const ForwardCache& cache,
                  const Eigen::MatrixXd& output_grad, Eigen::MatrixXd* input_grad) {
  const std::size_t num_layers = params.layers.size();
  if (cache.inputs.size() != num_layers || cache.pre.size() != num_layers)
    throw std::invalid_argument("backward: cache does not match parameter stack");
  if (output_grad.rows() != params.output_dim() || output_grad.cols() != cache.pre.back().cols())
    throw std::invalid_argument("backward: output gradient shape mismatch");

  MlpGrads grads = zero_grads(params);
  Eigen::MatrixXd g = output_grad;
  for (std::size_t l = num_layers; l-- > 0;) {
    const auto& s = params.spec[l];
    const auto& layer = params.layers[l];
    const Eigen::MatrixXd& z = cache.pre[l];
    if (cache.mask[l].size() != 0) {
      if (cache.mask[l].rows() != g.rows() || cache.mask[l].cols() != g.cols())
        throw std::invalid_argument("backward: dropout mask shape mismatch at layer " + std::to_string(l));
      g = g.cwiseProduct(cache.mask[l]);
    }

    Eigen::MatrixXd dz;
    if (s.activation == Activation::prelu) {
      grads.slope[l] = (g.array() * z.array().min(0.0)).sum();
      dz = (z.array() >= 0.0).select(g, layer.slope * g);
    } else {
      dz = std::move(g);
    }

    grads.weight[l] = dz * cache.inputs[l].transpose();
    grads.bias[l] = dz.rowwise().sum();
    if (l > 0 || input_grad) g = layer.weight.transpose() * dz;
  }
  if (input_grad) *input_grad = std::move(g);
  return grads;
}

void add_weight_penalty(MlpGrads& grads, const MlpParams& params, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("add_weight_penalty: lambda must be >= 0");
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    grads.weight[l] += 2.0 * lambda * params.layers[l].weight;
}

double squared_weight_norm(const MlpParams& params) {
  double s = 0.0;
  for (const auto& l : params.layers) s += l.weight.squaredNorm();
  return s;
}

double mse_loss(const std::vector<Eigen::VectorXd>& predicted,
                const std::vector<Eigen::VectorXd>& target, int n_p) {
  if (predicted.empty() || predicted.size() != target.size())
    throw std::invalid_argument("mse_loss: empty batch or size mismatch");
  if (n_p <= 0) throw std::invalid_argument("mse_loss: n_p must be positive");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i].size() != target[i].size())
      throw std::invalid_argument("mse_loss: shape mismatch at element " + std::to_string(i));
    s += (predicted[i] - target[i]).squaredNorm();
  }
  return s / static_cast<double>(n_p);
}

double mse_loss(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target, int n_p) {
  if (predicted.size() == 0) throw std::invalid_argument("mse_loss: empty batch");
  if (predicted.rows() != target.rows() || predicted.cols() != target.cols())
    throw std::invalid_argument("mse_loss: shape mismatch");
  if (n_p <= 0) throw std::invalid_argument("mse_loss: n_p must be positive");
  return (predicted - target).squaredNorm() / static_cast<double>(n_p);
}

double cae_loss(const std::vector<Eigen::VectorXd>& batch,
                const std::vector<Eigen::VectorXd>& reconstructed, const MlpParams& encoder_params,
                double lambda, int n_obs) {
  if (lambda < 0.0) throw std::invalid_argument("cae_loss: lambda must be >= 0");
  if (n_obs <= 0) throw std::invalid_argument("cae_loss: n_obs must be positive");
  if (batch.size() != reconstructed.size())
    throw std::invalid_argument("cae_loss: batch size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) s += (batch[i] - reconstructed[i]).squaredNorm();
  return s / static_cast<double>(n_obs) + lambda * squared_weight_norm(encoder_params);
}

double cae_loss(const Eigen::MatrixXd& batch, const Eigen::MatrixXd& reconstructed,
                const MlpParams& encoder_params, double lambda, int n_obs) {
  if (lambda < 0.0) throw std::invalid_argument("cae_loss: lambda must be >= 0");
  if (n_obs <= 0) throw std::invalid_argument("cae_loss: n_obs must be positive");
  if (batch.rows() != reconstructed.rows() || batch.cols() != reconstructed.cols())
    throw std::invalid_argument("cae_loss: shape mismatch");
  return (batch - reconstructed).squaredNorm() / static_cast<double>(n_obs) +
         lambda * squared_weight_norm(encoder_params);
}

OptimizerState make_optimizer(const MlpParams& params, double learning_rate) {
  OptimizerState st;
  st.learning_rate = learning_rate;
  for (const auto& l : params.layers) {
    st.m_weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    st.v_weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    st.m_bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    st.v_bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    st.m_slope.push_back(0.0);
    st.v_slope.push_back(0.0);
  }
  return st;
}

void optimizer_step(MlpParams& params, const MlpGrads& grads, OptimizerState& state) {
  if (grads.weight.size() != params.layers.size() || state.m_weight.size() != params.layers.size())
    throw std::invalid_argument("optimizer_step: shape mismatch");
  state.step += 1;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = state.learning_rate;
  const double eps = state.epsilon;

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    state.m_weight[l] = b1 * state.m_weight[l] + (1.0 - b1) * grads.weight[l];
    state.v_weight[l] =
        (b2 * state.v_weight[l].array() + (1.0 - b2) * grads.weight[l].array().square()).matrix();
    layer.weight.array() -= lr * (state.m_weight[l].array() / correction1) /
                            ((state.v_weight[l].array() / correction2).sqrt() + eps);

    state.m_bias[l] = b1 * state.m_bias[l] + (1.0 - b1) * grads.bias[l];
    state.v_bias[l] =
        (b2 * state.v_bias[l].array() + (1.0 - b2) * grads.bias[l].array().square()).matrix();
    layer.bias.array() -= lr * (state.m_bias[l].array() / correction1) /
                          ((state.v_bias[l].array() / correction2).sqrt() + eps);

    state.m_slope[l] = b1 * state.m_slope[l] + (1.0 - b1) * grads.slope[l];
    state.v_slope[l] = b2 * state.v_slope[l] + (1.0 - b2) * grads.slope[l] * grads.slope[l];
    layer.slope -= lr * (state.m_slope[l] / correction1) /
                   (std::sqrt(state.v_slope[l] / correction2) + eps);
  }
}

// --- serialization ---------------------------------------------------------

namespace {

void append_le_double(std::string& out, double v) {
  static_assert(sizeof(double) == 8);
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char buf[8];
  std::memcpy(buf, &bits, 8);
  out.append(buf, 8);
}

double read_le_double(const char* p) {
  std::uint64_t bits;
  std::memcpy(&bits, p, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_params(const MlpParams& params, const std::filesystem::path& file, std::uint64_t seed,
                 const std::string& created) {
  validate_params(params);
  nlohmann::json manifest;
  nlohmann::json spec = nlohmann::json::array();
  for (const auto& s : params.spec)
    spec.push_back({{"in", s.in_dim},
                    {"out", s.out_dim},
                    {"activation", activation_name(s.activation)},
                    {"dropout_p", s.dropout_p}});
  manifest["spec"] = std::move(spec);
  manifest["seed"] = seed;
  manifest["created"] = created;
  const std::string header = manifest.dump();

  std::string blob;
  for (const auto& layer : params.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) append_le_double(blob, layer.weight(r, c));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) append_le_double(blob, layer.bias(i));
    append_le_double(blob, layer.slope);
  }

  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
  out.write(kWeightMagic, 8);
  const std::uint64_t len = header.size();
  char lenbuf[8];
  std::uint64_t le = len;
  if constexpr (std::endian::native == std::endian::big) le = __builtin_bswap64(le);
  std::memcpy(lenbuf, &le, 8);
  out.write(lenbuf, 8);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

MlpParams load_params(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError("cannot open weight file: " + file.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 16 || std::memcmp(data.data(), kWeightMagic, 8) != 0)
    throw ParseError("weight file " + file.string() + ": bad magic");
  std::uint64_t len;
  std::memcpy(&len, data.data() + 8, 8);
  if constexpr (std::endian::native == std::endian::big) len = __builtin_bswap64(len);
  if (16 + len > data.size()) throw ParseError("weight file " + file.string() + ": truncated header");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(data.substr(16, len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("weight file " + file.string() + ": bad manifest: " + e.what());
  }

  MlpParams params;
  std::size_t expected_doubles = 0;
  try {
    for (const auto& s : manifest.at("spec")) {
      LayerSpec spec;
      spec.in_dim = s.at("in").get<int>();
      spec.out_dim = s.at("out").get<int>();
      spec.activation = activation_from_name(s.at("activation").get<std::string>());
      spec.dropout_p = s.at("dropout_p").get<double>();
      params.spec.push_back(spec);
      expected_doubles += static_cast<std::size_t>(spec.in_dim) * spec.out_dim + spec.out_dim + 1;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("weight file " + file.string() + ": bad spec: " + e.what());
  }

  const std::size_t blob_offset = 16 + len;
  const std::size_t blob_size = data.size() - blob_offset;
  if (blob_size != expected_doubles * 8)
    throw ParseError("weight file " + file.string() + ": blob holds " + std::to_string(blob_size / 8) +
                     " doubles, spec expects " + std::to_string(expected_doubles));

  const char* p = data.data() + blob_offset;
  for (const auto& s : params.spec) {
    Layer layer;
    layer.weight.resize(s.out_dim, s.in_dim);
    for (int r = 0; r < s.out_dim; ++r)
      for (int c = 0; c < s.in_dim; ++c) {
        layer.weight(r, c) = read_le_double(p);
        p += 8;
      }
    layer.bias.resize(s.out_dim);
    for (int i = 0; i < s.out_dim; ++i) {
      layer.bias(i) = read_le_double(p);
      p += 8;
    }
    layer.slope = read_le_double(p);
    p += 8;
    params.layers.push_back(std::move(layer));
  }
  validate_params(params);
  return params;
}

}  // namespace mpnet
