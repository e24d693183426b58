#include "mpnet/neuralnet.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mpnet/errors.hpp"
#include "support/oracles.hpp"

using namespace mpnet;

namespace {

std::vector<int> hidden_for_depth(int layers) {
  // `layers` counts weight layers; layers-1 hidden plus the output layer.
  std::vector<int> hidden;
  for (int i = 0; i < layers - 1; ++i) hidden.push_back(8);
  return hidden;
}

struct ParamRef {
  double* value;
};

// Flat view over every scalar parameter for finite-difference sweeps.
std::vector<ParamRef> parameter_refs(MlpParams& params) {
  std::vector<ParamRef> refs;
  for (auto& layer : params.layers) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) refs.push_back({layer.weight.data() + i});
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) refs.push_back({layer.bias.data() + i});
    refs.push_back({&layer.slope});
  }
  return refs;
}

double grad_at(const MlpGrads& grads, const MlpParams& params, std::size_t flat) {
  std::size_t at = flat;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto wsize = static_cast<std::size_t>(params.layers[l].weight.size());
    const auto bsize = static_cast<std::size_t>(params.layers[l].bias.size());
    if (at < wsize) return grads.weight[l].data()[at];
    at -= wsize;
    if (at < bsize) return grads.bias[l].data()[at];
    at -= bsize;
    if (at == 0) return grads.slope[l];
    at -= 1;
  }
  FAIL("flat index out of range");
  return 0.0;
}

}  // namespace

TEST_CASE("prelu definition") {
  CHECK_EQ(prelu(2.0, 0.1), 2.0);
  CHECK_EQ(prelu(-1.0, 0.25), -0.25);
  CHECK_EQ(prelu(0.0, 0.7), 0.0);
}

TEST_CASE("forward: identity single layer and determinism") {
  RngStream rng(1);
  MlpParams params = init_mlp({{3, 3, Activation::identity, 0.0}}, rng);
  params.layers[0].weight = Eigen::MatrixXd::Identity(3, 3);
  params.layers[0].bias.setZero();
  const Eigen::VectorXd v = Eigen::Vector3d(0.3, -1.2, 7.0);
  CHECK((forward_deterministic(params, v) - v).norm() == doctest::Approx(0.0));

  MlpParams net = init_mlp(mlp_spec(4, {16, 16}, 2, 0.5), rng);
  const Eigen::VectorXd x = Eigen::Vector4d(0.1, -0.2, 0.3, -0.4);
  CHECK_EQ(forward_deterministic(net, x), forward_deterministic(net, x));
}

TEST_CASE("forward: stochastic_infer outputs differ across seeds") {
  RngStream rng(2);
  const MlpParams net = init_mlp(mlp_spec(6, std::vector<int>(12, 16), 2, 0.5), rng);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(6, 0.25);
  int distinct_pairs = 0;
  for (int trial = 0; trial < 100; ++trial) {
    RngStream r1(1000 + trial), r2(5000 + trial);
    const Eigen::VectorXd y1 = forward(net, x, ForwardMode::stochastic_infer, r1);
    const Eigen::VectorXd y2 = forward(net, x, ForwardMode::stochastic_infer, r2);
    if ((y1 - y2).norm() > 0.0) ++distinct_pairs;
  }
  CHECK_GE(distinct_pairs, 99);
}

TEST_CASE("forward: dimension contract") {
  RngStream rng(3);
  const MlpParams net = init_mlp(mlp_spec(4, {8}, 2, 0.0), rng);
  RngStream r(0);
  const Eigen::VectorXd wrong = Eigen::VectorXd::Zero(5);
  CHECK_THROWS_AS(forward(net, wrong, ForwardMode::deterministic_infer, r), std::invalid_argument);
}

TEST_CASE("inverted dropout keeps the linear-net expectation") {
  // Single hidden linear layer, so E[dropout(h)] = h exactly; the Monte
  // Carlo mean over masks must approach the deterministic output.
  RngStream rng(4);
  MlpParams net;
  net.spec = {{3, 32, Activation::identity, 0.5}, {32, 2, Activation::identity, 0.0}};
  RngStream init(5);
  net = init_mlp(net.spec, init);
  const Eigen::VectorXd x = Eigen::Vector3d(0.7, -0.3, 0.5);
  const Eigen::VectorXd expected = forward_deterministic(net, x);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
  const int trials = 20000;
  RngStream masks(6);
  for (int i = 0; i < trials; ++i) mean += forward(net, x, ForwardMode::stochastic_infer, masks);
  mean /= static_cast<double>(trials);
  for (int i = 0; i < 2; ++i)
    CHECK_EQ(mean(i), doctest::Approx(expected(i)).epsilon(0.02));
}

TEST_CASE("mse_loss: values and contracts") {
  const Eigen::VectorXd a = Eigen::Vector2d(1.0, 0.0);
  const Eigen::VectorXd z = Eigen::Vector2d(0.0, 0.0);
  const std::vector<Eigen::VectorXd> va{a}, vz{z};
  CHECK_EQ(mse_loss(va, va, 1), 0.0);
  CHECK_EQ(mse_loss(va, vz, 1), doctest::Approx(1.0));
  // Squared errors 0.25 and 0.75 over n_p = 2.
  const Eigen::VectorXd p1 = Eigen::Vector2d(0.5, 0.0), t1 = Eigen::Vector2d(0.0, 0.0);
  const Eigen::VectorXd p2 = Eigen::Vector2d(0.0, std::sqrt(0.75)), t2 = Eigen::Vector2d(0.0, 0.0);
  const std::vector<Eigen::VectorXd> vp{p1, p2}, vt{t1, t2};
  CHECK_EQ(mse_loss(vp, vt, 2), doctest::Approx(0.5));
  CHECK_THROWS_AS(mse_loss(std::vector<Eigen::VectorXd>{}, {}, 1), std::invalid_argument);
  CHECK_THROWS_AS(mse_loss(va, va, 0), std::invalid_argument);
}

TEST_CASE("cae_loss: reconstruction plus weight penalty") {
  RngStream rng(7);
  MlpParams enc = init_mlp(mlp_spec(2, {4}, 2, 0.0), rng);
  const Eigen::VectorXd x = Eigen::Vector2d(0.5, -0.5);
  const std::vector<Eigen::VectorXd> vx{x};
  CHECK_EQ(cae_loss(vx, vx, enc, 0.0, 1), 0.0);

  for (auto& layer : enc.layers) layer.weight.setZero();
  CHECK_EQ(cae_loss(vx, vx, enc, 0.01, 1), 0.0);

  // ||x - x_hat||^2 = 2, lambda = 0.5, sum theta^2 = 4 -> 2 + 2.
  enc.layers[0].weight.setZero();
  enc.layers[0].weight(0, 0) = 2.0;  // contributes 4
  const Eigen::VectorXd xhat = Eigen::Vector2d(0.5 + std::sqrt(2.0), -0.5);
  const std::vector<Eigen::VectorXd> vxh{xhat};
  CHECK_EQ(cae_loss(vx, vxh, enc, 0.5, 1), doctest::Approx(4.0));
  CHECK_GE(cae_loss(vx, vxh, enc, 0.5, 1), 0.5 * squared_weight_norm(enc));
}

TEST_CASE("backward: zero upstream gradient gives zero parameter gradients") {
  RngStream rng(8);
  const MlpParams net = init_mlp(mlp_spec(3, {8, 8}, 2, 0.0), rng);
  RngStream r(0);
  ForwardCache cache;
  const Eigen::MatrixXd out =
      forward(net, Eigen::MatrixXd(Eigen::Vector3d(0.1, 0.2, 0.3)), ForwardMode::train, r, &cache);
  const MlpGrads grads = backward(net, cache, Eigen::MatrixXd::Zero(out.rows(), out.cols()));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    CHECK_EQ(grads.weight[l].norm(), 0.0);
    CHECK_EQ(grads.bias[l].norm(), 0.0);
    CHECK_EQ(grads.slope[l], 0.0);
  }
}

TEST_CASE("weight penalty gradient is 2*lambda*theta") {
  RngStream rng(9);
  const MlpParams net = init_mlp(mlp_spec(3, {4}, 2, 0.0), rng);
  MlpGrads grads = zero_grads(net);
  add_weight_penalty(grads, net, 0.25);
  for (std::size_t l = 0; l < net.layers.size(); ++l)
    CHECK((grads.weight[l] - 0.5 * net.layers[l].weight).norm() == doctest::Approx(0.0));
}

// Central-difference oracle over both losses, all required depths, dropout
// active for the imitation loss (masks replayed by copying the rng).
TEST_CASE("gradient check: MSE and reconstruction losses at depths 1,2,4,12") {
  const double h = 1e-6;
  for (const int depth : {1, 2, 4, 12}) {
    for (int seed = 0; seed < 5; ++seed) {
      CAPTURE(depth);
      CAPTURE(seed);

      // --- Eq.-style MSE loss through one network, dropout 0.5 ----------
      {
        RngStream init(100 * depth + seed);
        MlpParams net = init_mlp(mlp_spec(5, hidden_for_depth(depth), 3, depth > 1 ? 0.5 : 0.0), init);
        // Inverted-dropout scaling doubles activations per hidden layer; damp
        // the weights so deep stacks keep the loss O(1), where an h = 1e-6
        // central difference still has ~9 significant digits.
        for (auto& layer : net.layers) layer.weight *= 0.35;
        RngStream data(17 + seed);
        Eigen::MatrixXd x(5, 4), target(3, 4);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = data.uniform(-1.0, 1.0);
        for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = data.uniform(-1.0, 1.0);
        const RngStream mask_seed(777 + seed);

        auto loss = [&]() {
          RngStream masks = mask_seed;  // identical masks for every evaluation
          RngStream m = masks;
          const Eigen::MatrixXd pred = forward(net, x, ForwardMode::train, m);
          return mse_loss(pred, target, 4);
        };

        RngStream masks = mask_seed;
        ForwardCache cache;
        const Eigen::MatrixXd pred = forward(net, x, ForwardMode::train, masks, &cache);
        const Eigen::MatrixXd dloss = 2.0 / 4.0 * (pred - target);
        const MlpGrads grads = backward(net, cache, dloss);

        auto kink_free = [&](double& param) {
          const double saved = param;
          param = saved + h;
          const auto up = testing::prelu_sign_signature(net, x, ForwardMode::train, mask_seed);
          param = saved - h;
          const auto down = testing::prelu_sign_signature(net, x, ForwardMode::train, mask_seed);
          param = saved;
          return up == down;
        };

        auto refs = parameter_refs(net);
        RngStream pick(55 + seed);
        int checked = 0;
        for (int probe = 0; probe < 80 && checked < 40; ++probe) {
          const std::size_t flat = pick.uniform_index(refs.size());
          if (!kink_free(*refs[flat].value)) continue;  // FD invalid across an activation corner
          ++checked;
          const double numeric = testing::central_difference(*refs[flat].value, h, loss);
          const double analytic = grad_at(grads, net, flat);
          CHECK_LT(testing::gradcheck_error(analytic, numeric), 1e-4);
        }
        CHECK_GE(checked, 30);
      }

      // --- reconstruction loss with encoder weight penalty --------------
      {
        RngStream init(9000 + 100 * depth + seed);
        MlpParams enc = init_mlp(mlp_spec(6, hidden_for_depth(depth), 3, 0.0), init);
        MlpParams dec = init_mlp(mlp_spec(3, hidden_for_depth(depth), 6, 0.0), init);
        RngStream data(29 + seed);
        Eigen::MatrixXd x(6, 3);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = data.uniform(-1.0, 1.0);
        const double lambda = 1e-2;

        auto loss = [&]() {
          RngStream r(0);
          const Eigen::MatrixXd z = forward(enc, x, ForwardMode::deterministic_infer, r);
          const Eigen::MatrixXd rec = forward(dec, z, ForwardMode::deterministic_infer, r);
          return cae_loss(x, rec, enc, lambda, 3);
        };

        RngStream r(0);
        ForwardCache ce, cd;
        const Eigen::MatrixXd z = forward(enc, x, ForwardMode::train, r, &ce);
        const Eigen::MatrixXd rec = forward(dec, z, ForwardMode::train, r, &cd);
        const Eigen::MatrixXd dloss = 2.0 / 3.0 * (rec - x);
        Eigen::MatrixXd dz;
        const MlpGrads dec_grads = backward(dec, cd, dloss, &dz);
        MlpGrads enc_grads = backward(enc, ce, dz);
        add_weight_penalty(enc_grads, enc, lambda);

        const RngStream nomask(0);
        auto kink_free = [&](double& param) {
          const double saved = param;
          auto chain_signs = [&]() {
            auto s = testing::prelu_sign_signature(enc, x, ForwardMode::deterministic_infer, nomask);
            RngStream r0(0);
            const Eigen::MatrixXd zz = forward(enc, x, ForwardMode::deterministic_infer, r0);
            const auto sd = testing::prelu_sign_signature(dec, zz, ForwardMode::deterministic_infer, nomask);
            s.insert(s.end(), sd.begin(), sd.end());
            return s;
          };
          param = saved + h;
          const auto up = chain_signs();
          param = saved - h;
          const auto down = chain_signs();
          param = saved;
          return up == down;
        };

        auto enc_refs = parameter_refs(enc);
        auto dec_refs = parameter_refs(dec);
        RngStream pick(66 + seed);
        int checked = 0;
        for (int probe = 0; probe < 60 && checked < 20; ++probe) {
          const std::size_t ef = pick.uniform_index(enc_refs.size());
          const std::size_t df = pick.uniform_index(dec_refs.size());
          if (!kink_free(*enc_refs[ef].value) || !kink_free(*dec_refs[df].value)) continue;
          ++checked;
          CHECK_LT(testing::gradcheck_error(grad_at(enc_grads, enc, ef),
                                            testing::central_difference(*enc_refs[ef].value, h, loss)),
                   1e-4);
          CHECK_LT(testing::gradcheck_error(grad_at(dec_grads, dec, df),
                                            testing::central_difference(*dec_refs[df].value, h, loss)),
                   1e-4);
        }
        CHECK_GE(checked, 15);
      }
    }
  }
}

TEST_CASE("optimizer: zero gradients leave parameters unchanged") {
  RngStream rng(10);
  MlpParams net = init_mlp(mlp_spec(3, {4}, 2, 0.0), rng);
  const MlpParams before = net;
  OptimizerState opt = make_optimizer(net);
  optimizer_step(net, zero_grads(net), opt);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    CHECK_EQ((net.layers[l].weight - before.layers[l].weight).norm(), 0.0);
    CHECK_EQ((net.layers[l].bias - before.layers[l].bias).norm(), 0.0);
  }
}

TEST_CASE("optimizer: first step moves against the gradient sign") {
  RngStream rng(11);
  MlpParams net = init_mlp(mlp_spec(1, {}, 1, 0.0), rng);
  const double w0 = net.layers[0].weight(0, 0);
  MlpGrads grads = zero_grads(net);
  grads.weight[0](0, 0) = 3.7;  // positive gradient
  OptimizerState opt = make_optimizer(net);
  optimizer_step(net, grads, opt);
  CHECK_LT(net.layers[0].weight(0, 0), w0);
}

TEST_CASE("optimizer: scalar quadratic converges") {
  // f(w) = (w-3)^2 from w = 0. Oracle run with lr 0.01: adaptive-moment
  // steps are ~lr in magnitude, so 2000 steps are ample to cover 3 units.
  MlpParams net;
  net.spec = {{1, 1, Activation::identity, 0.0}};
  net.layers.push_back(Layer{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1), 0.25});
  OptimizerState opt = make_optimizer(net, 0.01);
  for (int step = 0; step < 2000; ++step) {
    MlpGrads grads = zero_grads(net);
    grads.weight[0](0, 0) = 2.0 * (net.layers[0].weight(0, 0) - 3.0);
    optimizer_step(net, grads, opt);
  }
  CHECK_LT(std::abs(net.layers[0].weight(0, 0) - 3.0), 1e-2);
}

TEST_CASE("save/load: bit-exact round trip and shape validation") {
  RngStream rng(12);
  const MlpParams net = init_mlp(mlp_spec(7, {16, 8}, 3, 0.5), rng);
  const auto dir = std::filesystem::temp_directory_path() / "mpnet_nn_test";
  std::filesystem::create_directories(dir);
  const auto file = dir / "weights.mpw";
  save_params(net, file, 12, "test");

  const MlpParams back = load_params(file);
  REQUIRE_EQ(back.layers.size(), net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    CHECK_EQ((back.layers[l].weight - net.layers[l].weight).norm(), 0.0);
    CHECK_EQ((back.layers[l].bias - net.layers[l].bias).norm(), 0.0);
    CHECK_EQ(back.layers[l].slope, net.layers[l].slope);
    CHECK_EQ(back.spec[l].dropout_p, net.spec[l].dropout_p);
  }
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(7, 0.123);
  CHECK_EQ((forward_deterministic(back, x) - forward_deterministic(net, x)).norm(), 0.0);

  // Truncated blob must be rejected with shape context.
  std::ifstream in(file, std::ios::binary);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto bad = dir / "truncated.mpw";
  std::ofstream out(bad, std::ios::binary);
  out.write(data.data(), static_cast<std::streamsize>(data.size() - 16));
  out.close();
  CHECK_THROWS_AS(load_params(bad), ParseError);
}
