#include "hvi/hvi.h"

#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "hvi/bench.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

hvi_status guard(const std::function<void()>& body) {
  try {
    body();
    return HVI_OK;
  } catch (const hvi::DomainError& e) {
    set_error(e.what());
    return HVI_ERROR_DOMAIN;
  } catch (const hvi::ConfigError& e) {
    set_error(e.what());
    return HVI_ERROR_INVALID_ARGUMENT;
  } catch (const hvi::IntegrationError& e) {
    set_error(e.what());
    return HVI_ERROR_NUMERIC;
  } catch (const hvi::SingularityError& e) {
    set_error(e.what());
    return HVI_ERROR_NUMERIC;
  } catch (const hvi::IoError& e) {
    set_error(e.what());
    return HVI_ERROR_IO;
  } catch (const std::exception& e) {
    set_error(e.what());
    return HVI_ERROR_INTERNAL;
  } catch (...) {
    set_error("unknown error");
    return HVI_ERROR_INTERNAL;
  }
}

hvi::Vec to_vec(const double* p, Eigen::Index n) {
  return Eigen::Map<const hvi::Vec>(p, n);
}

void from_vec(const hvi::Vec& v, double* out) {
  std::memcpy(out, v.data(), sizeof(double) * static_cast<size_t>(v.size()));
}

hvi::GaussianModelParams params_from(const hvi_dataset* data, const double* delta,
                                     const double* sigma_sq);

void require(bool ok, const char* what) {
  if (!ok) throw hvi::ConfigError(what);
}

hvi::TemperingKind to_kind(hvi_tempering t) {
  switch (t) {
    case HVI_TEMPERING_FIXED:
      return hvi::TemperingKind::Fixed;
    case HVI_TEMPERING_FREE:
      return hvi::TemperingKind::Free;
    case HVI_TEMPERING_NONE:
      return hvi::TemperingKind::None;
  }
  throw hvi::ConfigError("bad tempering tag");
}

hvi::FlowConfig flow_from(const hvi_flow_options& o, Eigen::Index dim) {
  hvi::FlowConfig cfg;
  cfg.steps = o.steps;
  cfg.xi = o.xi;
  cfg.eps = hvi::Vec::Constant(dim, o.eps);
  switch (to_kind(o.tempering)) {
    case hvi::TemperingKind::Fixed:
      cfg.tempering = hvi::TemperingScheme::fixed(o.beta0);
      break;
    case hvi::TemperingKind::None:
      cfg.tempering = hvi::TemperingScheme::none();
      break;
    case hvi::TemperingKind::Free: {
      // uniform cooling with prod alpha^2 = beta0
      require(o.steps >= 1, "free tempering needs steps >= 1");
      const double alpha = std::exp(std::log(o.beta0) / (2.0 * o.steps));
      cfg.tempering =
          hvi::TemperingScheme::free_scheme(hvi::Vec::Constant(o.steps, alpha));
      break;
    }
  }
  return cfg;
}

}  // namespace

struct hvi_dataset {
  hvi::Dataset data;
};

struct hvi_train_result {
  hvi::TrainResult result;
  hvi::GaussianModelParams theta;
  hvi::Checkpoint checkpoint;
};

extern "C" {

const char* hvi_status_name(hvi_status status) {
  switch (status) {
    case HVI_OK:
      return "ok";
    case HVI_ERROR_INVALID_ARGUMENT:
      return "invalid argument";
    case HVI_ERROR_DOMAIN:
      return "domain error";
    case HVI_ERROR_NUMERIC:
      return "numeric error";
    case HVI_ERROR_IO:
      return "io error";
    case HVI_ERROR_INTERNAL:
      return "internal error";
  }
  return "unknown";
}

const char* hvi_last_error_message(void) { return g_last_error.c_str(); }

hvi_status hvi_dataset_generate(int32_t dim, int32_t n, uint64_t seed,
                                hvi_dataset** out) {
  return guard([&] {
    require(out != nullptr, "out must not be null");
    *out = new hvi_dataset{hvi::generate_dataset(dim, n, seed)};
  });
}

hvi_status hvi_dataset_from_rows(const double* rows, int32_t n, int32_t dim,
                                 hvi_dataset** out) {
  return guard([&] {
    require(rows != nullptr && out != nullptr, "rows/out must not be null");
    require(n >= 1 && dim >= 1, "n and dim must be >= 1");
    hvi::Mat m(n, dim);
    for (int32_t i = 0; i < n; ++i)
      for (int32_t j = 0; j < dim; ++j)
        m(i, j) = rows[static_cast<size_t>(i) * dim + j];
    *out = new hvi_dataset{hvi::Dataset(std::move(m))};
  });
}

hvi_status hvi_dataset_load_csv(const char* path, hvi_dataset** out) {
  return guard([&] {
    require(path != nullptr && out != nullptr, "path/out must not be null");
    *out = new hvi_dataset{hvi::Dataset::load_csv(path)};
  });
}

hvi_status hvi_dataset_save_csv(const hvi_dataset* data, const char* path) {
  return guard([&] {
    require(data != nullptr && path != nullptr, "data/path must not be null");
    data->data.save_csv(path);
  });
}

hvi_status hvi_dataset_load_binary(const char* path, hvi_dataset** out) {
  return guard([&] {
    require(path != nullptr && out != nullptr, "path/out must not be null");
    *out = new hvi_dataset{hvi::Dataset::load_binary(path)};
  });
}

hvi_status hvi_dataset_save_binary(const hvi_dataset* data, const char* path) {
  return guard([&] {
    require(data != nullptr && path != nullptr, "data/path must not be null");
    data->data.save_binary(path);
  });
}

int32_t hvi_dataset_rows(const hvi_dataset* data) {
  return data == nullptr ? -1 : static_cast<int32_t>(data->data.n());
}

int32_t hvi_dataset_dim(const hvi_dataset* data) {
  return data == nullptr ? -1 : static_cast<int32_t>(data->data.dim());
}

hvi_status hvi_dataset_mean(const hvi_dataset* data, double* out_mean) {
  return guard([&] {
    require(data != nullptr && out_mean != nullptr, "data/out must not be null");
    from_vec(data->data.mean(), out_mean);
  });
}

void hvi_dataset_free(hvi_dataset* data) { delete data; }

hvi_status hvi_gaussian_true_params(int32_t dim, double* out_delta,
                                    double* out_sigma_sq) {
  return guard([&] {
    require(out_delta != nullptr && out_sigma_sq != nullptr,
            "out arrays must not be null");
    const auto p = hvi::make_true_params(dim);
    from_vec(p.delta, out_delta);
    from_vec(p.sigma_sq, out_sigma_sq);
  });
}

hvi_status hvi_gaussian_log_joint(const hvi_dataset* data, const double* delta,
                                  const double* sigma_sq, const double* z,
                                  double* out) {
  return guard([&] {
    require(data && delta && sigma_sq && z && out, "arguments must not be null");
    *out = hvi::gaussian_log_joint(params_from(data, delta, sigma_sq),
                                   data->data, to_vec(z, data->data.dim()));
  });
}

hvi_status hvi_gaussian_grad_u(const hvi_dataset* data, const double* delta,
                               const double* sigma_sq, const double* z,
                               double* out) {
  return guard([&] {
    require(data && delta && sigma_sq && z && out, "arguments must not be null");
    from_vec(hvi::gaussian_grad_u(params_from(data, delta, sigma_sq), data->data,
                                  to_vec(z, data->data.dim())),
             out);
  });
}

hvi_status hvi_gaussian_exact_log_marginal(const hvi_dataset* data,
                                           const double* delta,
                                           const double* sigma_sq, double* out) {
  return guard([&] {
    require(data && delta && sigma_sq && out, "arguments must not be null");
    *out = hvi::gaussian_exact_log_marginal(params_from(data, delta, sigma_sq),
                                            data->data);
  });
}

hvi_status hvi_gaussian_exact_posterior(const hvi_dataset* data,
                                        const double* delta,
                                        const double* sigma_sq,
                                        double* out_mean, double* out_var) {
  return guard([&] {
    require(data && delta && sigma_sq && out_mean && out_var,
            "arguments must not be null");
    const auto post = hvi::gaussian_exact_posterior(
        params_from(data, delta, sigma_sq), data->data);
    from_vec(post.mean, out_mean);
    from_vec(post.var, out_var);
  });
}

void hvi_flow_options_init(hvi_flow_options* opts) {
  if (opts == nullptr) return;
  opts->steps = 10;
  opts->tempering = HVI_TEMPERING_FIXED;
  opts->beta0 = 0.5;
  opts->xi = 0.5;
  opts->eps = 0.05;
}

hvi_status hvi_estimate_elbo(const hvi_dataset* data, const double* delta,
                             const double* sigma_sq, hvi_estimator estimator,
                             const hvi_flow_options* flow, int32_t iwae_samples,
                             int32_t ais_steps, int32_t draws, uint64_t seed,
                             double* out_mean, double* out_sd) {
  return guard([&] {
    require(data && delta && sigma_sq && out_mean, "arguments must not be null");
    require(draws >= 1, "draws must be >= 1");
    const Eigen::Index d = data->data.dim();
    const auto params = params_from(data, delta, sigma_sq);
    const hvi::Vec theta = params.flatten();
    const hvi::GaussianTarget target(data->data);
    const hvi::StandardNormalPrior prior(d);
    hvi_flow_options fo;
    hvi_flow_options_init(&fo);
    if (flow != nullptr) fo = *flow;
    const hvi::FlowConfig fc = flow_from(fo, d);
    const hvi::MeanFieldParams mf{hvi::Vec::Zero(d), hvi::Vec::Ones(d)};

    double sum = 0.0, sum_sq = 0.0;
    for (int32_t i = 0; i < draws; ++i) {
      hvi::SplitMix64 rng(hvi::derive_seed(seed, 0xe57ull, i));
      double v = 0.0;
      switch (estimator) {
        case HVI_ESTIMATOR_HIS:
          v = hvi::his_elbo(target, theta, fc, prior,
                            hvi::draw_his_noise(rng, d))
                  .value;
          break;
        case HVI_ESTIMATOR_HIS_RB:
          v = hvi::his_elbo_rao_blackwell(target, theta, fc, prior,
                                          hvi::draw_his_noise(rng, d))
                  .value;
          break;
        case HVI_ESTIMATOR_VANILLA:
          v = hvi::vanilla_elbo(target, theta, mf, hvi::normal_vec(rng, d)).value;
          break;
        case HVI_ESTIMATOR_PLANAR_NF: {
          hvi::PlanarFlowParams nf;
          nf.u = hvi::Vec::Zero(d);
          nf.w = hvi::Vec::Constant(d, 0.1);
          nf.b = 0.0;
          nf.iterations = fo.steps;
          v = hvi::planar_nf_elbo(target, theta, nf, prior,
                                  hvi::normal_vec(rng, d))
                  .value;
          break;
        }
        case HVI_ESTIMATOR_IWAE:
          require(iwae_samples >= 1, "iwae_samples must be >= 1");
          v = hvi::iwae_bound(target, theta, prior, iwae_samples, rng);
          break;
        case HVI_ESTIMATOR_AIS: {
          require(ais_steps >= 0, "ais_steps must be >= 0");
          hvi::AisConfig ac;
          v = hvi::ais_log_likelihood(target, theta, prior, ais_steps, ac, rng);
          break;
        }
        default:
          throw hvi::ConfigError("bad estimator tag");
      }
      sum += v;
      sum_sq += v * v;
    }
    const double mean = sum / draws;
    *out_mean = mean;
    if (out_sd != nullptr)
      *out_sd = draws > 1
                    ? std::sqrt(std::max(0.0, (sum_sq - draws * mean * mean) /
                                                  (draws - 1)))
                    : 0.0;
  });
}

void hvi_train_options_init(hvi_train_options* opts) {
  if (opts == nullptr) return;
  opts->method = HVI_METHOD_HVAE;
  opts->tempering = HVI_TEMPERING_FIXED;
  opts->flow_steps = 10;
  opts->beta0 = 0.5;
  opts->xi = 0.5;
  opts->eps_init = 0.05;
  opts->nf_iterations = -1;
  opts->mc_samples = 1;
  opts->vb_analytic = 0;
  opts->optimizer = HVI_OPTIMIZER_RMSPROP;
  opts->learning_rate = 1e-3;
  opts->max_epochs = 20000;
  opts->patience = -1;
  opts->batch_size = 64;
  opts->validation_fraction = 0.1;
  opts->rel_tol = 1e-8;
  opts->seed = 1;
}

namespace {

hvi::MethodConfig method_from(const hvi_train_options& o) {
  hvi::MethodConfig m;
  switch (o.method) {
    case HVI_METHOD_HVAE:
      m.method = hvi::Method::Hvae;
      break;
    case HVI_METHOD_VB:
      m.method = hvi::Method::Vb;
      break;
    case HVI_METHOD_NF:
      m.method = hvi::Method::Nf;
      break;
    default:
      throw hvi::ConfigError("bad method tag");
  }
  m.tempering = to_kind(o.tempering);
  m.flow_steps = o.flow_steps;
  m.beta0_init = o.beta0;
  m.xi = o.xi;
  m.eps_init = o.eps_init;
  m.nf_iterations = o.nf_iterations;
  m.mc_samples = o.mc_samples;
  m.vb_analytic = o.vb_analytic != 0;
  return m;
}

hvi::TrainConfig train_from(const hvi_train_options& o) {
  hvi::TrainConfig t;
  t.optimizer = o.optimizer == HVI_OPTIMIZER_ADAMAX ? hvi::OptimizerKind::Adamax
                                                    : hvi::OptimizerKind::RmsProp;
  t.learning_rate = o.learning_rate;
  t.max_epochs = o.max_epochs;
  t.patience = o.patience;
  t.batch_size = o.batch_size;
  t.validation_fraction = o.validation_fraction;
  t.rel_tol = o.rel_tol;
  t.seed = o.seed;
  return t;
}

}  // namespace

hvi_status hvi_train_gaussian(const hvi_dataset* data,
                              const hvi_train_options* opts,
                              hvi_train_result** out) {
  return guard([&] {
    require(data != nullptr && opts != nullptr && out != nullptr,
            "arguments must not be null");
    const hvi::MethodConfig m = method_from(*opts);
    const hvi::TrainConfig t = train_from(*opts);
    const hvi::GaussianProblem prob = hvi::make_gaussian_problem(data->data, m, t);
    hvi::TrainResult res = hvi::train(prob.objective, prob.init, t);
    if (res.aborted) throw hvi::IntegrationError(res.message, res.epochs_run);
    auto* r = new hvi_train_result;
    r->theta = prob.theta_of(res.params());
    r->checkpoint.model_kind = 0;
    r->checkpoint.method = static_cast<std::uint32_t>(opts->method);
    r->checkpoint.dim = static_cast<std::uint32_t>(data->data.dim());
    r->checkpoint.latent_dim = r->checkpoint.dim;
    r->checkpoint.raw_params = res.params();
    r->checkpoint.optimizer = res.optimizer;
    r->result = std::move(res);
    *out = r;
  });
}

int32_t hvi_train_result_dim(const hvi_train_result* result) {
  return result == nullptr ? -1
                           : static_cast<int32_t>(result->theta.delta.size());
}

hvi_status hvi_train_result_theta(const hvi_train_result* result,
                                  double* out_delta, double* out_sigma_sq) {
  return guard([&] {
    require(result && out_delta && out_sigma_sq, "arguments must not be null");
    from_vec(result->theta.delta, out_delta);
    from_vec(result->theta.sigma_sq, out_sigma_sq);
  });
}

double hvi_train_result_final_elbo(const hvi_train_result* result) {
  return result == nullptr ? 0.0 : result->result.final_elbo;
}

int32_t hvi_train_result_epochs(const hvi_train_result* result) {
  return result == nullptr ? -1 : result->result.epochs_run;
}

hvi_status hvi_train_result_write_trace_csv(const hvi_train_result* result,
                                            const char* path) {
  return guard([&] {
    require(result != nullptr && path != nullptr, "arguments must not be null");
    hvi::write_trace_csv(path, result->result.trace);
  });
}

hvi_status hvi_train_result_save_checkpoint(const hvi_train_result* result,
                                            const char* path) {
  return guard([&] {
    require(result != nullptr && path != nullptr, "arguments must not be null");
    hvi::save_checkpoint(path, result->checkpoint);
  });
}

void hvi_train_result_free(hvi_train_result* result) { delete result; }

void hvi_sweep_options_init(hvi_sweep_options* opts) {
  if (opts == nullptr) return;
  opts->dims = nullptr;
  opts->n_dims = 0;
  opts->methods = nullptr;
  opts->n_methods = 0;
  opts->runs = 10;
  opts->n = 10000;
  opts->seed = 1;
  hvi_train_options_init(&opts->train);
}

hvi_status hvi_sweep_run(const hvi_sweep_options* opts, const char* out_dir) {
  return guard([&] {
    require(opts != nullptr && out_dir != nullptr, "arguments must not be null");
    hvi::ExperimentSpec spec;
    if (opts->n_dims > 0) {
      require(opts->dims != nullptr, "dims must not be null");
      spec.dims.assign(opts->dims, opts->dims + opts->n_dims);
    }
    const hvi::MethodConfig base = method_from(opts->train);
    if (opts->n_methods > 0) {
      require(opts->methods != nullptr, "methods must not be null");
      for (int32_t i = 0; i < opts->n_methods; ++i)
        spec.methods.push_back(hvi::make_method_spec(opts->methods[i], base));
    } else {
      for (const char* token : {"hvae-fixed", "hvae-none", "vb", "nf"})
        spec.methods.push_back(hvi::make_method_spec(token, base));
    }
    spec.runs = opts->runs;
    spec.n = opts->n;
    spec.seed_base = opts->seed;
    spec.out_dir = out_dir;
    spec.train = train_from(opts->train);
    hvi::run_experiment(spec);
  });
}

hvi_status hvi_emit_plot(const char* aggregate_csv, const char* svg_path) {
  return guard([&] {
    require(aggregate_csv != nullptr && svg_path != nullptr,
            "arguments must not be null");
    hvi::emit_plot(aggregate_csv, svg_path);
  });
}

hvi_status hvi_eval_nll(const hvi_dataset* data, const double* delta,
                        const double* sigma_sq, hvi_proposal proposal,
                        const hvi_flow_options* flow, int32_t samples,
                        uint64_t seed, double* out_nll) {
  return guard([&] {
    require(data && delta && sigma_sq && out_nll, "arguments must not be null");
    require(samples >= 1, "samples must be >= 1");
    const Eigen::Index d = data->data.dim();
    const auto params = params_from(data, delta, sigma_sq);
    const hvi::Vec theta = params.flatten();
    const hvi::GaussianTarget target(data->data);
    hvi::SplitMix64 rng(hvi::derive_seed(seed, 0x11feull));
    switch (proposal) {
      case HVI_PROPOSAL_PRIOR: {
        const hvi::StandardNormalPrior prior(d);
        *out_nll = hvi::importance_sampled_nll(target, theta, prior, samples, rng);
        break;
      }
      case HVI_PROPOSAL_EXACT_POSTERIOR: {
        const auto post = hvi::gaussian_exact_posterior(params, data->data);
        const hvi::MeanFieldPrior prior(hvi::MeanFieldParams{post.mean, post.var});
        *out_nll = hvi::importance_sampled_nll(target, theta, prior, samples, rng);
        break;
      }
      case HVI_PROPOSAL_FLOW: {
        hvi_flow_options fo;
        hvi_flow_options_init(&fo);
        if (flow != nullptr) fo = *flow;
        const hvi::StandardNormalPrior prior(d);
        *out_nll = hvi::importance_sampled_nll_his(target, theta,
                                                   flow_from(fo, d), prior,
                                                   samples, rng);
        break;
      }
      default:
        throw hvi::ConfigError("bad proposal tag");
    }
  });
}

}  // extern "C"

namespace {

hvi::GaussianModelParams params_from(const hvi_dataset* data, const double* delta,
                                     const double* sigma_sq) {
  const Eigen::Index d = data->data.dim();
  hvi::GaussianModelParams p{to_vec(delta, d), to_vec(sigma_sq, d)};
  p.validate();
  return p;
}

}  // namespace
