#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hvi/bench.hpp"
#include "hvi/trainer.hpp"
#include "oracles.hpp"

using hvi::MethodConfig;
using hvi::OptimizerState;
using hvi::TrainConfig;
using hvi::Vec;

namespace {
std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Vec fixed_gradient_sequence(int step, Eigen::Index n) {
  hvi::SplitMix64 rng(1000 + static_cast<std::uint64_t>(step));
  return hvi::normal_vec(rng, n);
}
}  // namespace

TEST_CASE("rmsprop") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto state = OptimizerState::rmsprop(3, 1e-3);
    Vec params = Vec::Constant(3, 0.7);
    hvi::rmsprop_step(state, params, Vec::Zero(3));
    CHECK((params.array() == 0.7).all());
  }
  SUBCASE("first step magnitude follows the normalized form") {
    auto state = OptimizerState::rmsprop(1, 1e-3);
    Vec params = Vec::Zero(1);
    const double g = 2.5;
    hvi::rmsprop_step(state, params, Vec::Constant(1, g));
    const double expected = 1e-3 * g / (std::sqrt(0.1 * g * g) + 1e-8);
    CHECK(params[0] == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("matches an independent transliteration over 100 steps") {
    auto state = OptimizerState::rmsprop(4, 1e-3);
    Vec params = Vec::Zero(4);
    Vec ref_params = Vec::Zero(4);
    Vec s = Vec::Zero(4);
    for (int t = 0; t < 100; ++t) {
      const Vec g = fixed_gradient_sequence(t, 4);
      hvi::rmsprop_step(state, params, g);
      for (int j = 0; j < 4; ++j) {
        s[j] = 0.9 * s[j] + 0.1 * g[j] * g[j];
        ref_params[j] += 1e-3 * g[j] / (std::sqrt(s[j]) + 1e-8);
      }
    }
    CHECK((params - ref_params).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("near scale invariance for large gradients") {
    auto s1 = OptimizerState::rmsprop(1, 1e-3);
    auto s2 = OptimizerState::rmsprop(1, 1e-3);
    Vec p1 = Vec::Zero(1), p2 = Vec::Zero(1);
    hvi::rmsprop_step(s1, p1, Vec::Constant(1, 1.0));
    hvi::rmsprop_step(s2, p2, Vec::Constant(1, 2.0));
    CHECK(std::abs(p1[0] - p2[0]) / std::abs(p1[0]) < 0.01);
  }
}

TEST_CASE("adamax") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto state = OptimizerState::adamax(2, 1e-3);
    Vec params = Vec::Constant(2, -1.5);
    hvi::adamax_step(state, params, Vec::Zero(2));
    CHECK((params.array() == -1.5).all());
  }
  SUBCASE("matches an independent transliteration over 100 steps") {
    auto state = OptimizerState::adamax(4, 1e-3);
    Vec params = Vec::Zero(4);
    Vec ref_params = Vec::Zero(4);
    Vec m = Vec::Zero(4), u = Vec::Zero(4);
    for (int t = 1; t <= 100; ++t) {
      const Vec g = fixed_gradient_sequence(t, 4);
      hvi::adamax_step(state, params, g);
      for (int j = 0; j < 4; ++j) {
        m[j] = 0.9 * m[j] + 0.1 * g[j];
        u[j] = std::max(0.999 * u[j], std::abs(g[j]));
        ref_params[j] += (1e-3 / (1.0 - std::pow(0.9, t))) * m[j] / u[j];
      }
    }
    CHECK((params - ref_params).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("per-step update is bounded by lr/(1 - beta1^t)") {
    auto state = OptimizerState::adamax(1, 1e-3);
    Vec params = Vec::Zero(1);
    double prev = 0.0;
    for (int t = 1; t <= 20; ++t) {
      const Vec g = fixed_gradient_sequence(t, 1);
      hvi::adamax_step(state, params, g);
      const double bound = 1e-3 / (1.0 - std::pow(0.9, t));
      CHECK(std::abs(params[0] - prev) <= bound + 1e-15);
      prev = params[0];
    }
  }
}

TEST_CASE("early stopping decision") {
  SUBCASE("strictly improving traces never stop") {
    std::vector<double> trace;
    for (int i = 0; i < 500; ++i) trace.push_back(i * 0.01);
    CHECK(hvi::early_stop_epoch(trace, 100) == -1);
  }
  SUBCASE("a flat trace with patience 100 stops at epoch 101") {
    const std::vector<double> trace(200, 1.0);
    CHECK(hvi::early_stop_epoch(trace, 100) == 101);
  }
  SUBCASE("patience zero stops at the first non-improving epoch") {
    const std::vector<double> trace{1.0, 1.0, 2.0};
    CHECK(hvi::early_stop_epoch(trace, 0) == 2);
  }
  SUBCASE("negative patience disables stopping") {
    const std::vector<double> trace(50, 0.0);
    CHECK(hvi::early_stop_epoch(trace, -1) == -1);
  }
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const hvi::Dataset data = hvi::generate_dataset(2, 50, 3);
  MethodConfig m;
  m.method = hvi::Method::Vb;
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 25;
  cfg.rel_tol = 0.0;
  cfg.return_best = false;
  const auto prob = hvi::make_gaussian_problem(data, m, cfg);
  const auto res = hvi::train(prob.objective, prob.init, cfg);
  CHECK(res.epochs_run == 25);
  CHECK((res.params_final - prob.init).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training is deterministic given the seed") {
  const hvi::Dataset data = hvi::generate_dataset(2, 100, 5);
  MethodConfig m;
  m.method = hvi::Method::Hvae;
  m.flow_steps = 3;
  TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.seed = 77;
  const auto prob = hvi::make_gaussian_problem(data, m, cfg);
  const auto r1 = hvi::train(prob.objective, prob.init, cfg);
  const auto r2 = hvi::train(prob.objective, prob.init, cfg);
  REQUIRE(r1.trace.size() == r2.trace.size());
  for (size_t i = 0; i < r1.trace.size(); ++i) {
    CHECK(r1.trace[i].train_elbo == r2.trace[i].train_elbo);
    CHECK(r1.trace[i].val_elbo == r2.trace[i].val_elbo);
  }
  CHECK((r1.params_final - r2.params_final).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stochastic VB on the conjugate model recovers the analytic posterior") {
  const hvi::Dataset data = hvi::generate_dataset(1, 1000, 9);
  MethodConfig m;
  m.method = hvi::Method::Vb;
  TrainConfig cfg;
  cfg.max_epochs = 20000;
  cfg.rel_tol = 0.0;
  const auto prob = hvi::make_gaussian_problem(data, m, cfg);
  const auto res = hvi::train(prob.objective, prob.init, cfg);
  REQUIRE_FALSE(res.aborted);

  const auto theta_hat = prob.theta_of(res.params());
  const auto post = hvi::gaussian_exact_posterior(theta_hat, data);
  const Vec variational = prob.variational_of(res.params());
  const double mu_hat = variational[0];
  const double var_hat = std::exp(2.0 * variational[1]);
  CHECK(std::abs(mu_hat - post.mean[0]) <= 1e-2);
  CHECK(std::abs(var_hat - post.var[0]) <= 1e-2);

  SUBCASE("the validation ELBO's 50-epoch moving average trends upward") {
    std::vector<double> ma;
    double acc = 0.0;
    for (size_t i = 0; i < res.trace.size(); ++i) {
      acc += res.trace[i].val_elbo;
      if (i >= 50) acc -= res.trace[i - 50].val_elbo;
      if (i >= 49) ma.push_back(acc / 50.0);
    }
    REQUIRE(ma.size() > 100);
    const double peak = *std::max_element(ma.begin(), ma.end());
    // non-decreasing up to a small slack until within half a nat of the
    // converged plateau; afterwards only parameter jitter remains
    size_t violations = 0;
    for (size_t i = 0; i + 1 < ma.size(); ++i) {
      if (ma[i] >= peak - 0.5) break;
      if (ma[i + 1] < ma[i] - 0.05) ++violations;
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("non-finite estimates abort with the epoch in the diagnostic") {
  hvi::StochasticObjective obj;
  obj.n_params = 1;
  obj.steps_per_epoch = 1;
  obj.sample_grad = [](const Vec& raw, hvi::SplitMix64&, Vec& grad) {
    grad[0] = 1.0;
    return raw[0] > 0.002 ? std::nan("") : 0.0;
  };
  TrainConfig cfg;
  cfg.max_epochs = 100;
  cfg.learning_rate = 1e-3;
  cfg.rel_tol = 0.0;
  const auto res = hvi::train(obj, Vec::Zero(1), cfg);
  CHECK(res.aborted);
  CHECK(res.message.find("epoch") != std::string::npos);
  CHECK(res.params_final.size() == 1);
}

TEST_CASE("free tempering trains and keeps its factors inside (0,1)") {
  const hvi::Dataset data = hvi::generate_dataset(2, 500, 15);
  MethodConfig m;
  m.method = hvi::Method::Hvae;
  m.tempering = hvi::TemperingKind::Free;
  m.flow_steps = 5;
  m.beta0_init = 0.25;
  m.eps_init = 0.01;
  TrainConfig cfg;
  cfg.max_epochs = 800;
  cfg.rel_tol = 0.0;
  cfg.seed = 99;
  const auto prob = hvi::make_gaussian_problem(data, m, cfg);
  const auto res = hvi::train(prob.objective, prob.init, cfg);
  REQUIRE_FALSE(res.aborted);
  CHECK(res.trace.back().train_elbo > res.trace.front().train_elbo);

  const Vec variational = prob.variational_of(res.params());
  // layout [eps_raw(2); alpha_raw(5)]
  for (int k = 0; k < 5; ++k) {
    const double alpha = hvi::constrain_unit(variational[2 + k]);
    CHECK(alpha > 0.0);
    CHECK(alpha < 1.0);
  }
}

TEST_CASE("bernoulli decoder trains with adamax on minibatches") {
  // synthetic binary data from a fixed decoder
  const Eigen::Index d = 6, l = 2, n = 240;
  hvi::SplitMix64 rng(1234);
  hvi::Mat w(d, l);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < l; ++j) w(i, j) = 1.5 * hvi::normal(rng);
  const Vec b = 0.3 * hvi::normal_vec(rng, d);
  hvi::Mat rows(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec z = hvi::normal_vec(rng, l);
    const Vec logits = w * z + b;
    for (Eigen::Index j = 0; j < d; ++j)
      rows(i, j) = hvi::uniform01(rng) < hvi::sigmoid(logits[j]) ? 1.0 : 0.0;
  }
  const hvi::Dataset data(rows);

  MethodConfig m;
  m.method = hvi::Method::Hvae;
  m.tempering = hvi::TemperingKind::Fixed;
  m.flow_steps = 4;
  TrainConfig cfg;
  cfg.optimizer = hvi::OptimizerKind::Adamax;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 60;
  cfg.patience = 50;
  cfg.batch_size = 32;
  cfg.validation_fraction = 0.1;
  cfg.rel_tol = 0.0;
  cfg.seed = 4321;

  const auto prob = hvi::make_bernoulli_problem(data, l, m, cfg);
  hvi::SplitMix64 eval_rng(1);
  const double before = prob.objective.eval_validation(prob.init, eval_rng);
  const auto res = hvi::train(prob.objective, prob.init, cfg);
  REQUIRE_FALSE(res.aborted);
  CHECK(res.final_elbo > before + 0.2);
  CHECK(res.trace.size() >= 50);

  const auto decoder = prob.theta_of(res.params());
  CHECK(decoder.weights.rows() == d);
  CHECK(decoder.weights.cols() == l);
  CHECK(prob.encoder_of(res.params()).allFinite());
}

TEST_CASE("trace CSV matches the documented schema") {
  std::vector<hvi::TraceRow> trace{{1, -2.0, -2.5, 0.1}, {2, -1.5, -2.0, 0.1}};
  const std::string path = temp_path("hvi_trace.csv");
  hvi::write_trace_csv(path, trace);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,train_elbo,val_elbo,wall_ms");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
  std::remove(path.c_str());
}

TEST_CASE("checkpoints round trip") {
  hvi::Checkpoint ck;
  ck.model_kind = 0;
  ck.method = 2;
  ck.dim = 3;
  ck.latent_dim = 3;
  hvi::SplitMix64 rng(5);
  ck.raw_params = hvi::normal_vec(rng, 7);
  ck.optimizer = OptimizerState::adamax(7, 2e-3);
  ck.optimizer.step_count = 41;
  ck.optimizer.m_ema = hvi::normal_vec(rng, 7);
  ck.optimizer.u_inf = hvi::normal_vec(rng, 7).cwiseAbs();

  const std::string path = temp_path("hvi_ck.hvck");
  hvi::save_checkpoint(path, ck);
  const auto back = hvi::load_checkpoint(path);
  CHECK(back.model_kind == ck.model_kind);
  CHECK(back.method == ck.method);
  CHECK(back.dim == ck.dim);
  CHECK((back.raw_params - ck.raw_params).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.optimizer.step_count == 41);
  CHECK(back.optimizer.learning_rate == 2e-3);
  CHECK((back.optimizer.m_ema - ck.optimizer.m_ema).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.optimizer.u_inf - ck.optimizer.u_inf).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());

  CHECK_THROWS_AS(hvi::load_checkpoint(temp_path("missing.hvck")), hvi::IoError);
}
