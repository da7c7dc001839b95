#include "hvi/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "hvi/priors.hpp"

namespace hvi {

int early_stop_epoch(const std::vector<double>& validation_trace, int patience) {
  if (patience < 0) return -1;
  const int window = std::max(patience, 1);
  double best = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  for (int e = 1; e <= static_cast<int>(validation_trace.size()); ++e) {
    const double v = validation_trace[static_cast<size_t>(e - 1)];
    if (v > best) {
      best = v;
      best_epoch = e;
    } else if (e - best_epoch >= window) {
      return e;
    }
  }
  return -1;
}

TrainResult train(const StochasticObjective& objective, const Vec& init,
                  const TrainConfig& cfg) {
  if (init.size() != objective.n_params)
    throw ConfigError("initial parameters do not match the objective");
  if (cfg.max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
  if (objective.steps_per_epoch < 1)
    throw ConfigError("steps_per_epoch must be >= 1");

  SplitMix64 grad_rng(derive_seed(cfg.seed, 0x67726164ull));
  SplitMix64 eval_rng(derive_seed(cfg.seed, 0x6576616cull));

  OptimizerState opt =
      cfg.optimizer == OptimizerKind::RmsProp
          ? OptimizerState::rmsprop(objective.n_params, cfg.learning_rate)
          : OptimizerState::adamax(objective.n_params, cfg.learning_rate);

  TrainResult result;
  result.params_final = init;
  result.params_best = init;
  Vec params = init;
  Vec grad(objective.n_params);

  double best_val = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  double prev_val = std::numeric_limits<double>::quiet_NaN();
  const int stop_window = std::max(cfg.patience, 1);
  const int avg_from =
      cfg.tail_average_fraction > 0.0
          ? cfg.max_epochs -
                static_cast<int>(cfg.tail_average_fraction * cfg.max_epochs)
          : cfg.max_epochs + 1;
  Vec avg_accum = Vec::Zero(objective.n_params);
  int avg_count = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double step_sum = 0.0;
    for (int s = 0; s < objective.steps_per_epoch; ++s) {
      grad.setZero();
      const double value = objective.sample_grad(params, grad_rng, grad);
      if (!std::isfinite(value) || !grad.allFinite()) {
        result.aborted = true;
        result.message = "non-finite training estimate at epoch " +
                         std::to_string(epoch);
        result.params_final = params;
        result.params_avg = avg_count > 0 ? Vec(avg_accum / avg_count) : params;
        result.epochs_run = epoch - 1;
        result.optimizer = opt;
        if (!cfg.return_best || best_epoch == 0) result.params_best = params;
        return result;
      }
      step_sum += value;
      optimizer_step(opt, params, grad);
      if (objective.post_update) objective.post_update(params);
    }

    TraceRow row;
    row.epoch = epoch;
    row.train_elbo = objective.eval_train
                         ? objective.eval_train(params, eval_rng)
                         : step_sum / objective.steps_per_epoch;
    row.val_elbo = objective.eval_validation
                       ? objective.eval_validation(params, eval_rng)
                       : row.train_elbo;
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    result.trace.push_back(row);
    result.epochs_run = epoch;

    if (epoch >= avg_from) {
      avg_accum += params;
      ++avg_count;
    }
    if (row.val_elbo > best_val) {
      best_val = row.val_elbo;
      best_epoch = epoch;
      result.params_best = params;
    }
    if (cfg.patience >= 0 && epoch - best_epoch >= stop_window) break;
    if (cfg.rel_tol > 0.0 && std::isfinite(prev_val) &&
        std::abs(row.val_elbo - prev_val) <=
            cfg.rel_tol * (1.0 + std::abs(row.val_elbo)))
      break;
    prev_val = row.val_elbo;
  }

  result.params_final = params;
  result.params_avg = avg_count > 0 ? Vec(avg_accum / avg_count) : params;
  result.best_epoch = best_epoch;
  result.optimizer = opt;
  if (!cfg.return_best || best_epoch == 0) result.params_best = params;
  result.final_elbo = cfg.return_best && best_epoch > 0 ? best_val
                      : result.trace.empty() ? 0.0
                                             : result.trace.back().val_elbo;
  return result;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "epoch,train_elbo,val_elbo,wall_ms\n";
  for (const auto& r : trace)
    out << r.epoch << ',' << r.train_elbo << ',' << r.val_elbo << ','
        << r.wall_ms << '\n';
}

// -- Gaussian problem ---------------------------------------------------------

namespace {

FlowPhi make_flow_phi(Eigen::Index d, const MethodConfig& m) {
  FlowPhi phi;
  phi.steps = m.flow_steps;
  phi.xi = m.xi;
  phi.eps_raw = Vec::Constant(d, unconstrain_unit(m.eps_init / m.xi));
  phi.kind = m.tempering;
  if (m.tempering == TemperingKind::Fixed) {
    phi.beta0_raw = unconstrain_unit(m.beta0_init);
  } else if (m.tempering == TemperingKind::Free) {
    // equal per-step cooling with prod alpha^2 = beta0_init
    const double alpha =
        std::exp(std::log(m.beta0_init) / (2.0 * std::max(m.flow_steps, 1)));
    phi.alpha_raw = Vec::Constant(m.flow_steps, unconstrain_unit(alpha));
  }
  return phi;
}

GaussianModelParams gaussian_theta_of(const Vec& raw, Eigen::Index d) {
  GaussianModelParams p;
  p.delta = raw.head(d);
  p.sigma_sq = raw.segment(d, d).array().exp();
  return p;
}

// chain d/d sigma_sq -> d/d log sigma_sq
Vec gaussian_theta_chain(const Vec& d_theta, const Vec& raw, Eigen::Index d) {
  Vec out(2 * d);
  out.head(d) = d_theta.head(d);
  out.segment(d, d) =
      d_theta.segment(d, d).array() * raw.segment(d, d).array().exp();
  return out;
}

}  // namespace

GaussianModelParams GaussianProblem::theta_of(const Vec& raw) const {
  return gaussian_theta_of(raw, dim);
}

Vec GaussianProblem::variational_of(const Vec& raw) const {
  return raw.tail(raw.size() - 2 * dim);
}

GaussianProblem make_gaussian_problem(const Dataset& data,
                                      const MethodConfig& method,
                                      const TrainConfig& cfg) {
  (void)cfg;
  const Eigen::Index d = data.dim();
  GaussianProblem prob;
  prob.dim = d;
  prob.method = method;

  // theta init: delta = 0, sigma_sq = 1
  const Vec theta_init = Vec::Zero(2 * d);
  const int n_mc = std::max(method.mc_samples, 1);
  const int n_eval = std::max(method.eval_draws, 1);

  switch (method.method) {
    case Method::Hvae: {
      const FlowPhi phi0 = make_flow_phi(d, method);
      const Eigen::Index np = 2 * d + phi0.flat_dim();
      prob.init = Vec::Zero(np);
      prob.init.head(2 * d) = theta_init;
      prob.init.tail(phi0.flat_dim()) = phi0.flatten();

      auto unpack = [d, phi0](const Vec& raw) {
        FlowPhi phi = phi0;
        phi.set_flat(raw.tail(phi.flat_dim()));
        return phi;
      };
      prob.objective.n_params = np;
      prob.objective.sample_grad = [&data, d, n_mc, unpack](const Vec& raw,
                                                           SplitMix64& rng,
                                                           Vec& grad) {
        const GaussianTarget target(data);
        const StandardNormalPrior prior(d);
        const Vec theta = gaussian_theta_of(raw, d).flatten();
        const FlowPhi phi = unpack(raw);
        double value = 0.0;
        for (int i = 0; i < n_mc; ++i) {
          const HisNoise noise = draw_his_noise(rng, d);
          auto [est, g] = backprop_his(target, theta, phi, prior, noise);
          value += est.value;
          grad.head(2 * d) += gaussian_theta_chain(g.d_theta, raw, d);
          grad.tail(phi.flat_dim()) += g.flatten_phi();
        }
        grad /= n_mc;
        return value / n_mc;
      };
      prob.objective.eval_train = [&data, d, n_eval, unpack](const Vec& raw,
                                                            SplitMix64& rng) {
        const GaussianTarget target(data);
        const StandardNormalPrior prior(d);
        const Vec theta = gaussian_theta_of(raw, d).flatten();
        const FlowConfig fc = unpack(raw).config();
        double acc = 0.0;
        for (int i = 0; i < n_eval; ++i)
          acc += his_elbo_rao_blackwell(target, theta, fc, prior,
                                        draw_his_noise(rng, d))
                     .value;
        return acc / n_eval;
      };
      break;
    }
    case Method::Vb: {
      const Eigen::Index np = 2 * d + 2 * d;
      prob.init = Vec::Zero(np);  // mu = 0, log sigma = 0
      prob.objective.n_params = np;
      if (method.vb_analytic) {
        prob.objective.sample_grad = [&data, d](const Vec& raw, SplitMix64&,
                                                Vec& grad) {
          const auto params = gaussian_theta_of(raw, d);
          const MeanFieldParams mf{raw.segment(2 * d, d),
                                   (2.0 * raw.tail(d)).array().exp()};
          const auto g = vb_expected_elbo_grad(params, data, mf);
          grad.head(2 * d) += gaussian_theta_chain(g.d_theta, raw, d);
          grad.segment(2 * d, d) += g.d_mu;
          grad.tail(d) += g.d_log_sigma;
          return g.value;
        };
        prob.objective.eval_train = [&data, d](const Vec& raw, SplitMix64&) {
          const auto params = gaussian_theta_of(raw, d);
          const MeanFieldParams mf{raw.segment(2 * d, d),
                                   (2.0 * raw.tail(d)).array().exp()};
          return vb_expected_elbo(params, data, mf);
        };
      } else {
        prob.objective.sample_grad = [&data, d, n_mc](const Vec& raw,
                                                     SplitMix64& rng, Vec& grad) {
          const GaussianTarget target(data);
          const Vec theta = gaussian_theta_of(raw, d).flatten();
          double value = 0.0;
          for (int i = 0; i < n_mc; ++i) {
            const auto g = vanilla_elbo_grad(target, theta, raw.segment(2 * d, d),
                                             raw.tail(d), normal_vec(rng, d));
            value += g.value;
            grad.head(2 * d) += gaussian_theta_chain(g.d_theta, raw, d);
            grad.segment(2 * d, d) += g.d_mu;
            grad.tail(d) += g.d_log_sigma;
          }
          grad /= n_mc;
          return value / n_mc;
        };
        // trace and best-epoch selection use the exact expectation, which is
        // available in closed form for the conjugate model
        prob.objective.eval_train = [&data, d](const Vec& raw, SplitMix64&) {
          const auto params = gaussian_theta_of(raw, d);
          const MeanFieldParams mf{raw.segment(2 * d, d),
                                   (2.0 * raw.tail(d)).array().exp()};
          return vb_expected_elbo(params, data, mf);
        };
      }
      break;
    }
    case Method::Nf: {
      const int T =
          method.nf_iterations >= 0 ? method.nf_iterations : method.flow_steps;
      const Eigen::Index np = 2 * d + 2 * d + 1;
      prob.init = Vec::Zero(np);
      prob.init.segment(2 * d + d, d) = Vec::Constant(d, 0.1);  // w
      prob.objective.n_params = np;
      auto unpack = [d, T](const Vec& raw) {
        PlanarFlowParams nf;
        nf.u = raw.segment(2 * d, d);
        nf.w = raw.segment(3 * d, d);
        nf.b = raw[4 * d];
        nf.iterations = T;
        return nf;
      };
      prob.objective.sample_grad = [&data, d, n_mc, unpack](const Vec& raw,
                                                           SplitMix64& rng,
                                                           Vec& grad) {
        const GaussianTarget target(data);
        const StandardNormalPrior prior(d);
        const Vec theta = gaussian_theta_of(raw, d).flatten();
        const PlanarFlowParams nf = unpack(raw);
        double value = 0.0;
        for (int i = 0; i < n_mc; ++i) {
          const auto g =
              planar_nf_elbo_grad(target, theta, nf, prior, normal_vec(rng, d));
          value += g.value;
          grad.head(2 * d) += gaussian_theta_chain(g.d_theta, raw, d);
          grad.segment(2 * d, d) += g.d_u;
          grad.segment(3 * d, d) += g.d_w;
          grad[4 * d] += g.d_b;
        }
        grad /= n_mc;
        return value / n_mc;
      };
      prob.objective.eval_train = [&data, d, n_eval, unpack](const Vec& raw,
                                                            SplitMix64& rng) {
        const GaussianTarget target(data);
        const StandardNormalPrior prior(d);
        const Vec theta = gaussian_theta_of(raw, d).flatten();
        const PlanarFlowParams nf = unpack(raw);
        double acc = 0.0;
        for (int i = 0; i < n_eval; ++i)
          acc += planar_nf_elbo(target, theta, nf, prior, normal_vec(rng, d)).value;
        return acc / n_eval;
      };
      prob.objective.post_update = [d, unpack](Vec& raw) {
        PlanarFlowParams nf = unpack(raw);
        if (!nf.invertible()) {
          nf.project();
          raw.segment(2 * d, d) = nf.u;
        }
      };
      break;
    }
  }
  return prob;
}

// -- Bernoulli problem --------------------------------------------------------

BernoulliDecoderParams BernoulliProblem::theta_of(const Vec& raw) const {
  return BernoulliDecoderParams::unflatten(
      raw.head(obs_dim * latent_dim + obs_dim), obs_dim, latent_dim);
}

Vec BernoulliProblem::encoder_of(const Vec& raw) const {
  const Eigen::Index enc = 2 * latent_dim * obs_dim + 2 * latent_dim;
  return raw.tail(enc);
}

FlowPhi BernoulliProblem::flow_of(const Vec& raw) const {
  FlowPhi phi = make_flow_phi(latent_dim, method);
  const Eigen::Index theta_dim = obs_dim * latent_dim + obs_dim;
  phi.set_flat(raw.segment(theta_dim, phi.flat_dim()));
  return phi;
}

BernoulliProblem make_bernoulli_problem(const Dataset& data,
                                        Eigen::Index latent_dim,
                                        const MethodConfig& method,
                                        const TrainConfig& cfg) {
  if (method.method != Method::Hvae)
    throw ConfigError("the Bernoulli problem trains the Hamiltonian estimator");
  const Eigen::Index d = data.dim();
  const Eigen::Index l = latent_dim;
  BernoulliProblem prob;
  prob.obs_dim = d;
  prob.latent_dim = l;
  prob.method = method;

  const Eigen::Index theta_dim = d * l + d;
  const FlowPhi phi0 = make_flow_phi(l, method);
  const Eigen::Index enc_dim = 2 * l * d + 2 * l;
  const Eigen::Index np = theta_dim + phi0.flat_dim() + enc_dim;

  // small seeded init so latent dimensions decouple immediately
  prob.init = Vec::Zero(np);
  SplitMix64 init_rng(derive_seed(cfg.seed, 0x696e6974ull));
  for (Eigen::Index j = 0; j < d * l; ++j) prob.init[j] = 0.01 * normal(init_rng);
  prob.init.segment(theta_dim, phi0.flat_dim()) = phi0.flatten();
  for (Eigen::Index j = 0; j < l * d; ++j)
    prob.init[theta_dim + phi0.flat_dim() + j] = 0.01 * normal(init_rng);

  // deterministic validation split
  std::vector<Eigen::Index> order(static_cast<size_t>(data.n()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  SplitMix64 split_rng(derive_seed(cfg.seed, 0x73706c69ull));
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng_index(split_rng, i)]);
  Eigen::Index n_val = static_cast<Eigen::Index>(
      cfg.validation_fraction * static_cast<double>(data.n()));
  n_val = std::min<Eigen::Index>(n_val, data.n() - 1);
  std::vector<Eigen::Index> val_rows(order.begin(), order.begin() + n_val);
  std::vector<Eigen::Index> train_rows(order.begin() + n_val, order.end());

  const int batch = std::max(1, std::min<int>(cfg.batch_size,
                                              static_cast<int>(train_rows.size())));
  prob.objective.n_params = np;
  prob.objective.steps_per_epoch =
      static_cast<int>((train_rows.size() + batch - 1) / batch);

  auto eval_rows = [d, l, theta_dim, phi0](const Vec& raw, SplitMix64& rng,
                                           const Dataset& ds,
                                           const std::vector<Eigen::Index>& rows) {
    FlowPhi phi = phi0;
    phi.set_flat(raw.segment(theta_dim, phi.flat_dim()));
    const FlowConfig fc = phi.config();
    AmortizedGaussianPrior enc(d, l);
    enc.set_params(raw.tail(2 * l * d + 2 * l));
    const Vec theta = raw.head(theta_dim);
    double acc = 0.0;
    for (const auto r : rows) {
      const Vec x = ds.row(r);
      const BernoulliTarget target(x, l);
      const auto prior = enc.at(x);
      acc += his_elbo_rao_blackwell(target, theta, fc, prior,
                                    draw_his_noise(rng, l))
                 .value;
    }
    return rows.empty() ? 0.0 : acc / static_cast<double>(rows.size());
  };

  prob.objective.sample_grad = [&data, d, l, theta_dim, phi0, batch, train_rows](
                                   const Vec& raw, SplitMix64& rng, Vec& grad) {
    FlowPhi phi = phi0;
    phi.set_flat(raw.segment(theta_dim, phi.flat_dim()));
    AmortizedGaussianPrior enc(d, l);
    enc.set_params(raw.tail(2 * l * d + 2 * l));
    const Vec theta = raw.head(theta_dim);
    double value = 0.0;
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index row = train_rows[rng_index(rng, train_rows.size())];
      const Vec x = data.row(row);
      const BernoulliTarget target(x, l);
      const auto prior = enc.at(x);
      auto [est, g] = backprop_his(target, theta, phi, prior,
                                   draw_his_noise(rng, l));
      value += est.value;
      grad.head(theta_dim) += g.d_theta;
      grad.segment(theta_dim, phi.flat_dim()) += g.flatten_phi();
      grad.tail(g.d_prior.size()) += g.d_prior;
    }
    grad /= batch;
    return value / batch;
  };
  prob.objective.eval_train = [&data, eval_rows, train_rows](const Vec& raw,
                                                             SplitMix64& rng) {
    // cap the trace evaluation at 64 rows
    std::vector<Eigen::Index> rows(
        train_rows.begin(),
        train_rows.begin() + std::min<size_t>(train_rows.size(), 64));
    return eval_rows(raw, rng, data, rows);
  };
  if (!val_rows.empty()) {
    prob.objective.eval_validation = [&data, eval_rows, val_rows](
                                         const Vec& raw, SplitMix64& rng) {
      return eval_rows(raw, rng, data, val_rows);
    };
  }
  return prob;
}

// -- checkpointing ------------------------------------------------------------

namespace {
constexpr char kCheckpointMagic[5] = {'H', 'V', 'C', 'K', '1'};

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
void write_f64(std::ofstream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}
void write_vec(std::ofstream& out, const Vec& v) {
  write_u32(out, static_cast<std::uint32_t>(v.size()));
  for (Eigen::Index j = 0; j < v.size(); ++j) write_f64(out, v[j]);
}
std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
double read_f64(std::ifstream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
Vec read_vec(std::ifstream& in) {
  const std::uint32_t n = read_u32(in);
  Vec v(n);
  for (std::uint32_t j = 0; j < n; ++j) v[j] = read_f64(in);
  return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kCheckpointMagic, 5);
  write_u32(out, ck.model_kind);
  write_u32(out, ck.method);
  write_u32(out, ck.dim);
  write_u32(out, ck.latent_dim);
  write_vec(out, ck.raw_params);
  write_u32(out, static_cast<std::uint32_t>(ck.optimizer.kind));
  write_f64(out, ck.optimizer.learning_rate);
  write_u32(out, static_cast<std::uint32_t>(ck.optimizer.step_count));
  write_f64(out, ck.optimizer.decay);
  write_f64(out, ck.optimizer.stabilizer);
  write_f64(out, ck.optimizer.beta1);
  write_f64(out, ck.optimizer.beta2);
  write_vec(out, ck.optimizer.sq_ema);
  write_vec(out, ck.optimizer.m_ema);
  write_vec(out, ck.optimizer.u_inf);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kCheckpointMagic, 5) != 0)
    throw IoError(path + ": not an HVCK1 checkpoint");
  Checkpoint ck;
  ck.model_kind = read_u32(in);
  ck.method = read_u32(in);
  ck.dim = read_u32(in);
  ck.latent_dim = read_u32(in);
  ck.raw_params = read_vec(in);
  ck.optimizer.kind = static_cast<OptimizerKind>(read_u32(in));
  ck.optimizer.learning_rate = read_f64(in);
  ck.optimizer.step_count = static_cast<int>(read_u32(in));
  ck.optimizer.decay = read_f64(in);
  ck.optimizer.stabilizer = read_f64(in);
  ck.optimizer.beta1 = read_f64(in);
  ck.optimizer.beta2 = read_f64(in);
  ck.optimizer.sq_ema = read_vec(in);
  ck.optimizer.m_ema = read_vec(in);
  ck.optimizer.u_inf = read_vec(in);
  if (!in) throw IoError(path + ": truncated checkpoint");
  return ck;
}

}  // namespace hvi
