#include "mpnet/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mpnet/errors.hpp"
#include "json.hpp"

namespace mpnet {

namespace {

Eigen::MatrixXd columns(const std::vector<Eigen::VectorXd>& v) {
  Eigen::MatrixXd m(v.front().size(), static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, RngStream& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t at = 0; at < n; at += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(n, at + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (cfg.batch_size <= 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
  if (cfg.lambda < 0.0) throw std::invalid_argument("TrainConfig: lambda must be >= 0");
  if (!(cfg.validation_fraction > 0.0) || cfg.validation_fraction > 0.5)
    throw std::invalid_argument("TrainConfig: validation_fraction must be in (0, 0.5]");
}

Bounds state_bounds_for(const Workspace& w) {
  Bounds b;
  b.dim = state_dim(w.kind);
  for (int i = 0; i < w.dim_w; ++i) {
    const auto k = static_cast<std::size_t>(i);
    b.min[k] = w.bounds.min[k];
    b.max[k] = w.bounds.max[k];
  }
  if (w.kind == WorkspaceKind::rigid2d) {
    b.min[2] = -std::numbers::pi;
    b.max[2] = std::numbers::pi;
  }
  return b;
}

Eigen::VectorXd normalize_config(const Config& x, const Bounds& b) {
  if (x.dim() != b.dim) throw std::invalid_argument("normalize_config: dimension mismatch");
  Eigen::VectorXd out(b.dim);
  for (int i = 0; i < b.dim; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out(i) = 2.0 * (x[i] - b.min[k]) / (b.max[k] - b.min[k]) - 1.0;
  }
  return out;
}

Config denormalize_config(const Eigen::VectorXd& v, const Bounds& b, WorkspaceKind kind) {
  if (static_cast<int>(v.size()) != b.dim) throw std::invalid_argument("denormalize_config: dimension mismatch");
  Config out = Config::zeros(b.dim);
  for (int i = 0; i < b.dim; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[i] = b.min[k] + (v(i) + 1.0) * 0.5 * (b.max[k] - b.min[k]);
  }
  if (kind == WorkspaceKind::rigid2d) out[2] = wrap_angle(out[2]);
  return out;
}

CaeTrainResult train_cae(const std::vector<Eigen::VectorXd>& clouds, const CaeArchitecture& arch,
                         const TrainConfig& cfg, const CloudMeta& meta) {
  validate_train_config(cfg);
  if (clouds.empty()) throw std::invalid_argument("train_cae: need at least one cloud");
  if (arch.hidden.empty()) throw std::invalid_argument("train_cae: encoder needs hidden layers");
  const auto input_dim = clouds.front().size();
  for (const auto& c : clouds)
    if (c.size() != input_dim) throw std::invalid_argument("train_cae: inconsistent cloud sizes");
  if (input_dim != static_cast<Eigen::Index>(meta.n_pc) * meta.dim_w)
    throw std::invalid_argument("train_cae: cloud size does not match n_pc * dim_w");

  RngStream rng(cfg.seed);
  RngStream init_rng = rng.derive("init");
  std::vector<int> dec_hidden(arch.hidden.rbegin(), arch.hidden.rend());
  MlpParams enc = init_mlp(mlp_spec(static_cast<int>(input_dim), arch.hidden, arch.latent_dim, 0.0), init_rng);
  MlpParams dec = init_mlp(
      mlp_spec(arch.latent_dim, dec_hidden, static_cast<int>(input_dim), 0.0), init_rng);

  const Eigen::MatrixXd all = columns(clouds);
  const int n = static_cast<int>(clouds.size());

  auto full_loss = [&]() {
    RngStream unused(0);
    const Eigen::MatrixXd z = forward(enc, all, ForwardMode::deterministic_infer, unused);
    const Eigen::MatrixXd rec = forward(dec, z, ForwardMode::deterministic_infer, unused);
    return cae_loss(all, rec, enc, cfg.lambda, n);
  };

  std::vector<double> history;
  history.push_back(full_loss());

  OptimizerState enc_opt = make_optimizer(enc, cfg.learning_rate);
  OptimizerState dec_opt = make_optimizer(dec, cfg.learning_rate);
  RngStream epoch_rng = rng.derive("epochs");

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& batch : make_batches(clouds.size(), cfg.batch_size, epoch_rng)) {
      Eigen::MatrixXd x(input_dim, static_cast<Eigen::Index>(batch.size()));
      for (std::size_t i = 0; i < batch.size(); ++i)
        x.col(static_cast<Eigen::Index>(i)) = clouds[batch[i]];

      ForwardCache enc_cache, dec_cache;
      const Eigen::MatrixXd z = forward(enc, x, ForwardMode::train, epoch_rng, &enc_cache);
      const Eigen::MatrixXd rec = forward(dec, z, ForwardMode::train, epoch_rng, &dec_cache);

      const auto n_obs = static_cast<double>(batch.size());
      const Eigen::MatrixXd dloss = 2.0 / n_obs * (rec - x);
      Eigen::MatrixXd dz;
      MlpGrads dec_grads = backward(dec, dec_cache, dloss, &dz);
      MlpGrads enc_grads = backward(enc, enc_cache, dz);
      add_weight_penalty(enc_grads, enc, cfg.lambda);

      optimizer_step(dec, dec_grads, dec_opt);
      optimizer_step(enc, enc_grads, enc_opt);
    }
    const double loss = full_loss();
    if (!std::isfinite(loss))
      throw TrainingDiverged(cfg.seed, epoch,
                             "train_cae diverged at epoch " + std::to_string(epoch) + " (seed " +
                                 std::to_string(cfg.seed) + ")");
    history.push_back(loss);
  }

  CaeTrainResult result;
  result.encoder = EncoderModel{std::move(enc), arch.latent_dim, meta.n_pc, meta.dim_w, meta.bounds};
  result.decoder = DecoderModel{std::move(dec)};
  result.loss_history = std::move(history);
  return result;
}

Eigen::VectorXd encode(const EncoderModel& enc, const PointCloud& cloud) {
  if (cloud.dim_w != enc.dim_w || cloud.size() != enc.n_pc)
    throw std::invalid_argument("encode: cloud shape does not match encoder (n_pc, dim_w)");
  const std::vector<double> flat = flatten_cloud(cloud, enc.cloud_bounds);
  Eigen::VectorXd input = Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
  Eigen::VectorXd z = forward_deterministic(enc.params, input);
  if (!z.allFinite()) throw ModelOutputError("encode: non-finite latent for workspace " + cloud.source_workspace_id);
  return z;
}

PnetTrainResult train_pnet(const ImitationDataset& ds, const EncoderModel& enc,
                           const PnetArchitecture& arch, const TrainConfig& cfg) {
  validate_train_config(cfg);
  if (ds.records.empty()) throw std::invalid_argument("train_pnet: dataset is empty");
  if (ds.flat_clouds.size() != ds.workspace_ids.size())
    throw std::invalid_argument("train_pnet: workspace/cloud list mismatch");

  const int d = ds.state_bounds.dim;
  const int m = enc.latent_dim;

  // Frozen-encoder latent per workspace.
  std::vector<Eigen::VectorXd> latents;
  latents.reserve(ds.flat_clouds.size());
  RngStream unused(0);
  for (const auto& flat : ds.flat_clouds)
    latents.push_back(forward(enc.params, flat, ForwardMode::deterministic_infer, unused));

  const int input_dim = m + 2 * d;
  auto record_input = [&](const ImitationRecord& r) {
    Eigen::VectorXd in(input_dim);
    in.head(m) = latents[static_cast<std::size_t>(r.workspace_index)];
    in.segment(m, d) = r.x_t;
    in.tail(d) = r.x_goal;
    return in;
  };

  // Validation split by workspace, so validation measures unseen start/goal
  // pairs in held-out workspaces rather than memorized paths.
  RngStream rng(cfg.seed);
  std::vector<std::size_t> ws_order(ds.workspace_ids.size());
  for (std::size_t i = 0; i < ws_order.size(); ++i) ws_order[i] = i;
  RngStream split_rng = rng.derive("split");
  split_rng.shuffle(ws_order);
  std::size_t val_ws_count = 0;
  if (ds.workspace_ids.size() >= 2)
    val_ws_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg.validation_fraction *
                                                 static_cast<double>(ds.workspace_ids.size()))));
  std::vector<bool> is_val_ws(ds.workspace_ids.size(), false);
  for (std::size_t i = 0; i < val_ws_count; ++i) is_val_ws[ws_order[i]] = true;

  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (is_val_ws[static_cast<std::size_t>(ds.records[i].workspace_index)])
      val_idx.push_back(i);
    else
      train_idx.push_back(i);
  }
  if (train_idx.empty()) throw std::invalid_argument("train_pnet: validation split left no training data");

  auto assemble = [&](const std::vector<std::size_t>& idx, Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
    x.resize(input_dim, static_cast<Eigen::Index>(idx.size()));
    y.resize(d, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& r = ds.records[idx[i]];
      x.col(static_cast<Eigen::Index>(i)) = record_input(r);
      y.col(static_cast<Eigen::Index>(i)) = r.x_next;
    }
  };
  Eigen::MatrixXd train_x, train_y, val_x, val_y;
  assemble(train_idx, train_x, train_y);
  if (!val_idx.empty()) assemble(val_idx, val_x, val_y);

  RngStream init_rng = rng.derive("init");
  MlpParams params = init_mlp(mlp_spec(input_dim, arch.hidden, d, arch.dropout_p), init_rng);
  OptimizerState opt = make_optimizer(params, cfg.learning_rate);

  auto eval_mse = [&](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    RngStream r0(0);
    const Eigen::MatrixXd pred = forward(params, x, ForwardMode::deterministic_infer, r0);
    return mse_loss(pred, y, static_cast<int>(x.cols()));
  };

  PnetTrainResult result;
  result.train_loss_history.push_back(eval_mse(train_x, train_y));
  if (!val_idx.empty()) result.val_loss_history.push_back(eval_mse(val_x, val_y));

  RngStream epoch_rng = rng.derive("epochs");
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& batch : make_batches(train_idx.size(), cfg.batch_size, epoch_rng)) {
      Eigen::MatrixXd x(input_dim, static_cast<Eigen::Index>(batch.size()));
      Eigen::MatrixXd y(d, static_cast<Eigen::Index>(batch.size()));
      for (std::size_t i = 0; i < batch.size(); ++i) {
        x.col(static_cast<Eigen::Index>(i)) = train_x.col(static_cast<Eigen::Index>(batch[i]));
        y.col(static_cast<Eigen::Index>(i)) = train_y.col(static_cast<Eigen::Index>(batch[i]));
      }
      ForwardCache cache;
      const Eigen::MatrixXd pred = forward(params, x, ForwardMode::train, epoch_rng, &cache);
      const auto n_p = static_cast<double>(batch.size());
      const Eigen::MatrixXd dloss = 2.0 / n_p * (pred - y);
      const MlpGrads grads = backward(params, cache, dloss);
      optimizer_step(params, grads, opt);
    }
    const double train_loss = eval_mse(train_x, train_y);
    if (!std::isfinite(train_loss))
      throw TrainingDiverged(cfg.seed, epoch,
                             "train_pnet diverged at epoch " + std::to_string(epoch) + " (seed " +
                                 std::to_string(cfg.seed) + ")");
    result.train_loss_history.push_back(train_loss);
    if (!val_idx.empty()) result.val_loss_history.push_back(eval_mse(val_x, val_y));
  }

  result.planner = PlannerModel{std::move(params), ds.kind, d, m, arch.dropout_p, ds.state_bounds};
  return result;
}

Config pnet_step(const PlannerModel& pl, const Eigen::VectorXd& latent, const Config& x_t,
                 const Config& x_goal, RngStream& rng, bool stochastic) {
  if (static_cast<int>(latent.size()) != pl.latent_dim)
    throw std::invalid_argument("pnet_step: latent dimension mismatch");
  if (x_t.dim() != pl.state_dim || x_goal.dim() != pl.state_dim)
    throw std::invalid_argument("pnet_step: state dimension mismatch");

  const int d = pl.state_dim;
  Eigen::VectorXd input(pl.latent_dim + 2 * d);
  input.head(pl.latent_dim) = latent;
  input.segment(pl.latent_dim, d) = normalize_config(x_t, pl.state_bounds);
  input.tail(d) = normalize_config(x_goal, pl.state_bounds);

  const Eigen::VectorXd out = forward(pl.params, input, stochastic ? ForwardMode::stochastic_infer : ForwardMode::deterministic_infer, rng);
  if (!out.allFinite()) {
    std::ostringstream oss;
    oss << "pnet_step: non-finite output for x_t=(";
    for (int i = 0; i < d; ++i) oss << (i ? "," : "") << x_t[i];
    oss << ") x_goal=(";
    for (int i = 0; i < d; ++i) oss << (i ? "," : "") << x_goal[i];
    oss << ")";
    throw ModelOutputError(oss.str());
  }
  return denormalize_config(out, pl.state_bounds, pl.kind);
}

// --- model bundle persistence ----------------------------------------------

namespace {

nlohmann::json bounds_to_json(const Bounds& b) {
  nlohmann::json mn = nlohmann::json::array(), mx = nlohmann::json::array();
  for (int i = 0; i < b.dim; ++i) {
    mn.push_back(b.min[static_cast<std::size_t>(i)]);
    mx.push_back(b.max[static_cast<std::size_t>(i)]);
  }
  return {{"min", mn}, {"max", mx}};
}

Bounds bounds_from_json(const nlohmann::json& j) {
  Bounds b;
  const auto& mn = j.at("min");
  const auto& mx = j.at("max");
  if (mn.size() != mx.size() || mn.size() > 3) throw ParseError("bounds json: bad corner lengths");
  b.dim = static_cast<int>(mn.size());
  for (int i = 0; i < b.dim; ++i) {
    b.min[static_cast<std::size_t>(i)] = mn[static_cast<std::size_t>(i)].get<double>();
    b.max[static_cast<std::size_t>(i)] = mx[static_cast<std::size_t>(i)].get<double>();
  }
  return b;
}

}  // namespace

void save_models(const ModelBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string created = "seed:" + std::to_string(bundle.seed);
  save_params(bundle.encoder.params, dir / "encoder.mpw", bundle.seed, created);
  if (bundle.decoder) save_params(bundle.decoder->params, dir / "decoder.mpw", bundle.seed, created);
  save_params(bundle.planner.params, dir / "pnet.mpw", bundle.seed, created);

  nlohmann::json j;
  j["kind"] = to_string(bundle.planner.kind);
  j["latent_dim"] = bundle.encoder.latent_dim;
  j["n_pc"] = bundle.encoder.n_pc;
  j["dim_w"] = bundle.encoder.dim_w;
  j["dropout_p"] = bundle.planner.dropout_p;
  j["state_dim"] = bundle.planner.state_dim;
  j["cloud_bounds"] = bounds_to_json(bundle.encoder.cloud_bounds);
  j["state_bounds"] = bounds_to_json(bundle.planner.state_bounds);
  j["dataset_fingerprint"] = bundle.dataset_fingerprint;
  j["seed"] = bundle.seed;
  j["files"] = {{"encoder", "encoder.mpw"}, {"pnet", "pnet.mpw"}};
  if (bundle.decoder) j["files"]["decoder"] = "decoder.mpw";

  std::ofstream out(dir / "model_manifest.json");
  if (!out) throw std::runtime_error("cannot write model manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

ModelBundle load_models(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model_manifest.json");
  if (!in) throw ParseError("missing model_manifest.json in " + dir.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model manifest: ") + e.what());
  }

  ModelBundle bundle;
  try {
    const auto kind = workspace_kind_from_string(j.at("kind").get<std::string>());
    bundle.encoder.params = load_params(dir / j.at("files").at("encoder").get<std::string>());
    bundle.encoder.latent_dim = j.at("latent_dim").get<int>();
    bundle.encoder.n_pc = j.at("n_pc").get<int>();
    bundle.encoder.dim_w = j.at("dim_w").get<int>();
    bundle.encoder.cloud_bounds = bounds_from_json(j.at("cloud_bounds"));

    if (j.at("files").contains("decoder"))
      bundle.decoder = DecoderModel{load_params(dir / j.at("files").at("decoder").get<std::string>())};

    bundle.planner.params = load_params(dir / j.at("files").at("pnet").get<std::string>());
    bundle.planner.kind = kind;
    bundle.planner.state_dim = j.at("state_dim").get<int>();
    bundle.planner.latent_dim = j.at("latent_dim").get<int>();
    bundle.planner.dropout_p = j.at("dropout_p").get<double>();
    bundle.planner.state_bounds = bounds_from_json(j.at("state_bounds"));

    bundle.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    bundle.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model manifest: ") + e.what());
  }
  return bundle;
}

}  // namespace mpnet
