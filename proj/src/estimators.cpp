#include "hvi/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace hvi {

HisNoise draw_his_noise(SplitMix64& rng, Eigen::Index latent_dim) {
  HisNoise n;
  n.prior_noise = normal_vec(rng, latent_dim);
  n.gamma0 = normal_vec(rng, latent_dim);
  return n;
}

namespace {

// log N(rho; 0, beta^{-1} I)
double momentum_log_density(const Vec& rho, double beta) {
  const double l = static_cast<double>(rho.size());
  return -0.5 * l * kLog2Pi + 0.5 * l * std::log(beta) -
         0.5 * beta * rho.squaredNorm();
}

struct HisForward {
  PhasePoint p0;
  Trajectory traj;
  double beta0 = 1.0;
};

HisForward run_his_forward(const TargetModel& target, const Vec& theta,
                           const FlowConfig& config, const VariationalPrior& prior,
                           const HisNoise& noise) {
  HisForward f;
  f.beta0 = config.tempering.beta0_value();
  f.p0.z = prior.sample(noise.prior_noise);
  f.p0.rho = noise.gamma0 / std::sqrt(f.beta0);
  f.traj = forward_flow(config, target, theta, f.p0);
  return f;
}

}  // namespace

ElboEstimate his_elbo(const TargetModel& target, const Vec& theta,
                      const FlowConfig& config, const VariationalPrior& prior,
                      const HisNoise& noise) {
  const auto f = run_his_forward(target, theta, config, prior, noise);
  const double l = static_cast<double>(target.latent_dim());
  const auto& pK = f.traj.final_point();

  const double log_p_bar =
      target.log_joint(theta, pK.z) + momentum_log_density(pK.rho, 1.0);
  const double log_q_bar = prior.log_density(f.p0.z) +
                           momentum_log_density(f.p0.rho, f.beta0) -
                           0.5 * l * std::log(f.beta0);
  ElboEstimate e;
  e.value = log_p_bar - log_q_bar;
  e.final_hamiltonian = hamiltonian(target, theta, pK);
  e.log_jacobian = f.traj.log_jacobian;
  e.z_final = pK.z;
  return e;
}

ElboEstimate his_elbo_rao_blackwell(const TargetModel& target, const Vec& theta,
                                    const FlowConfig& config,
                                    const VariationalPrior& prior,
                                    const HisNoise& noise) {
  const auto f = run_his_forward(target, theta, config, prior, noise);
  const double l = static_cast<double>(target.latent_dim());
  const auto& pK = f.traj.final_point();

  ElboEstimate e;
  e.value = target.log_joint(theta, pK.z) - 0.5 * pK.rho.squaredNorm() -
            prior.log_density(f.p0.z) + 0.5 * l;
  e.final_hamiltonian = hamiltonian(target, theta, pK);
  e.log_jacobian = f.traj.log_jacobian;
  e.z_final = pK.z;
  return e;
}

ElboEstimate vanilla_elbo(const TargetModel& target, const Vec& theta,
                          const MeanFieldParams& mf, const Vec& noise) {
  mf.validate();
  if (mf.dim() != target.latent_dim())
    throw ConfigError("mean-field dimension does not match target");
  const Vec z = mf.mu.array() + mf.var.array().sqrt() * noise.array();
  ElboEstimate e;
  e.value = target.log_joint(theta, z) - diag_gaussian_log_density(z, mf.mu, mf.var);
  e.final_hamiltonian = target.potential(theta, z);
  e.log_jacobian = 0.0;
  e.z_final = z;
  return e;
}

void PlanarFlowParams::validate(Eigen::Index dim) const {
  if (u.size() != dim || w.size() != dim)
    throw ConfigError("planar flow parameters do not match the latent dimension");
  if (iterations < 0) throw ConfigError("planar iteration count must be >= 0");
  if (!invertible())
    throw DomainError("planar flow violates the invertibility condition w'u >= -1");
}

bool PlanarFlowParams::invertible() const { return w.dot(u) >= -1.0; }

void PlanarFlowParams::project() {
  const double s = w.dot(u);
  if (s >= -1.0) return;
  const double wn2 = w.squaredNorm();
  if (wn2 <= 0.0) return;  // w = 0 gives s = 0, never reaches here
  const double m = -1.0 + softplus(s);
  u += ((m - s) / wn2) * w;
}

namespace {

struct PlanarForward {
  std::vector<Vec> zs;       // T+1 states
  std::vector<double> s;     // w'z_t + b
  std::vector<double> h;     // tanh(s_t)
  std::vector<double> det;   // 1 + h'(s_t) u'w
  double sum_log_det = 0.0;
};

PlanarForward run_planar_forward(const PlanarFlowParams& nf, const Vec& z0) {
  PlanarForward f;
  const int T = nf.iterations;
  f.zs.reserve(static_cast<size_t>(T) + 1);
  f.zs.push_back(z0);
  const double uw = nf.u.dot(nf.w);
  for (int t = 0; t < T; ++t) {
    const Vec& z = f.zs.back();
    const double s = nf.w.dot(z) + nf.b;
    const double h = std::tanh(s);
    const double hp = 1.0 - h * h;
    const double det = 1.0 + hp * uw;
    if (std::abs(det) < 1e-12)
      throw SingularityError("planar flow determinant vanished");
    f.s.push_back(s);
    f.h.push_back(h);
    f.det.push_back(det);
    f.sum_log_det += std::log(std::abs(det));
    f.zs.push_back(z + h * nf.u);
  }
  return f;
}

}  // namespace

ElboEstimate planar_nf_elbo(const TargetModel& target, const Vec& theta,
                            const PlanarFlowParams& nf,
                            const VariationalPrior& prior, const Vec& noise) {
  nf.validate(target.latent_dim());
  const Vec z0 = prior.sample(noise);
  const auto f = run_planar_forward(nf, z0);
  const Vec& zT = f.zs.back();
  ElboEstimate e;
  e.value = target.log_joint(theta, zT) - prior.log_density(z0) + f.sum_log_det;
  e.final_hamiltonian = target.potential(theta, zT);
  e.log_jacobian = f.sum_log_det;
  e.z_final = zT;
  return e;
}

double log_mean_exp(const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("log_mean_exp of an empty set");
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc / static_cast<double>(values.size()));
}

void write_replicates_csv(const std::string& path, const std::string& estimator,
                          const std::vector<double>& values) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "replicate,estimator,value\n";
  for (size_t i = 0; i < values.size(); ++i)
    out << i << ',' << estimator << ',' << values[i] << '\n';
}

double iwae_bound(const TargetModel& target, const Vec& theta,
                  const VariationalPrior& proposal,
                  const std::vector<Vec>& noises) {
  if (noises.empty()) throw ConfigError("iwae_bound needs at least one sample");
  std::vector<double> log_w;
  log_w.reserve(noises.size());
  for (const Vec& n : noises) {
    const Vec z = proposal.sample(n);
    log_w.push_back(target.log_joint(theta, z) - proposal.log_density(z));
  }
  return log_mean_exp(log_w);
}

double iwae_bound(const TargetModel& target, const Vec& theta,
                  const VariationalPrior& proposal, int L, SplitMix64& rng) {
  if (L < 1) throw ConfigError("iwae_bound needs L >= 1");
  std::vector<Vec> noises;
  noises.reserve(static_cast<size_t>(L));
  for (int i = 0; i < L; ++i)
    noises.push_back(normal_vec(rng, proposal.noise_dim()));
  return iwae_bound(target, theta, proposal, noises);
}

namespace {

// One Metropolis-corrected HMC move invariant for the bridge density
// f(z) = (1 - beta) log q0(z) + beta log p(x, z).
void ais_hmc_move(const TargetModel& target, const Vec& theta,
                  const VariationalPrior& prior, double beta,
                  const AisConfig& cfg, Vec& z, SplitMix64& rng) {
  const auto bridge_log = [&](const Vec& v) {
    return (1.0 - beta) * prior.log_density(v) + beta * target.log_joint(theta, v);
  };
  const auto bridge_grad_u = [&](const Vec& v) -> Vec {
    return -((1.0 - beta) * prior.grad_z_log_density(v) +
             beta * target.grad_z(theta, v));
  };
  const Vec rho0 = normal_vec(rng, z.size());
  PhasePoint p{z, rho0};
  const double h0 = -bridge_log(p.z) + 0.5 * p.rho.squaredNorm();
  const Vec eps = Vec::Constant(z.size(), cfg.step_size);
  for (int s = 0; s < cfg.leapfrog_steps; ++s)
    p = leapfrog_step(p, eps, bridge_grad_u, s + 1);
  const double h1 = -bridge_log(p.z) + 0.5 * p.rho.squaredNorm();
  if (std::log(std::max(uniform01(rng), 1e-300)) < h0 - h1) z = p.z;
}

}  // namespace

double ais_log_likelihood(const TargetModel& target, const Vec& theta,
                          const VariationalPrior& prior, int annealing_steps,
                          const AisConfig& mcmc, SplitMix64& rng) {
  if (annealing_steps < 0) throw ConfigError("annealing steps must be >= 0");
  Vec z = prior.sample(normal_vec(rng, prior.noise_dim()));
  const auto delta_log = [&](const Vec& v) {
    return target.log_joint(theta, v) - prior.log_density(v);
  };
  if (annealing_steps == 0) return delta_log(z);
  double log_w = 0.0;
  const int S = annealing_steps;
  for (int s = 1; s <= S; ++s) {
    const double beta_prev = static_cast<double>(s - 1) / S;
    const double beta = static_cast<double>(s) / S;
    log_w += (beta - beta_prev) * delta_log(z);
    if (s < S) ais_hmc_move(target, theta, prior, beta, mcmc, z, rng);
  }
  return log_w;
}

double importance_sampled_nll(const TargetModel& target, const Vec& theta,
                              const VariationalPrior& proposal, int n,
                              SplitMix64& rng) {
  if (n < 1) throw ConfigError("importance sampling needs n >= 1");
  std::vector<double> log_w;
  log_w.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Vec z = proposal.sample(normal_vec(rng, proposal.noise_dim()));
    log_w.push_back(target.log_joint(theta, z) - proposal.log_density(z));
  }
  return -log_mean_exp(log_w);
}

double importance_sampled_nll_his(const TargetModel& target, const Vec& theta,
                                  const FlowConfig& config,
                                  const VariationalPrior& prior, int n,
                                  SplitMix64& rng) {
  if (n < 1) throw ConfigError("importance sampling needs n >= 1");
  std::vector<double> log_w;
  log_w.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const HisNoise noise = draw_his_noise(rng, target.latent_dim());
    log_w.push_back(his_elbo(target, theta, config, prior, noise).value);
  }
  return -log_mean_exp(log_w);
}

VanillaElboGrad vanilla_elbo_grad(const TargetModel& target, const Vec& theta,
                                  const Vec& mu, const Vec& log_sigma,
                                  const Vec& noise) {
  const Vec sigma = log_sigma.array().exp();
  const Vec z = mu.array() + sigma.array() * noise.array();
  const Vec gz = target.grad_z(theta, z);

  VanillaElboGrad g;
  // log q(mu + sigma e; mu, sigma) depends on sigma only through the
  // normalizer, so d/dmu = grad_z log p and d/dlog_sigma picks up +1.
  g.value = target.log_joint(theta, z) -
            diag_gaussian_log_density(z, mu, sigma.array().square());
  g.d_theta = target.grad_theta(theta, z);
  g.d_mu = gz;
  g.d_log_sigma = (gz.array() * sigma.array() * noise.array() + 1.0).matrix();
  return g;
}

PlanarElboGrad planar_nf_elbo_grad(const TargetModel& target, const Vec& theta,
                                   const PlanarFlowParams& nf,
                                   const VariationalPrior& prior,
                                   const Vec& noise) {
  nf.validate(target.latent_dim());
  const Vec z0 = prior.sample(noise);
  const auto f = run_planar_forward(nf, z0);
  const Vec& zT = f.zs.back();
  const double uw = nf.u.dot(nf.w);

  PlanarElboGrad g;
  g.value = target.log_joint(theta, zT) - prior.log_density(z0) + f.sum_log_det;
  g.d_theta = target.grad_theta(theta, zT);
  g.d_u = Vec::Zero(nf.u.size());
  g.d_w = Vec::Zero(nf.w.size());
  g.d_b = 0.0;

  Vec a = target.grad_z(theta, zT);  // adjoint of z_{t+1}
  for (int t = nf.iterations - 1; t >= 0; --t) {
    const Vec& z = f.zs[static_cast<size_t>(t)];
    const double h = f.h[static_cast<size_t>(t)];
    const double hp = 1.0 - h * h;
    const double det = f.det[static_cast<size_t>(t)];
    const double ua = nf.u.dot(a);

    // z_{t+1} = z_t + u h(s_t), s_t = w'z_t + b
    g.d_u += h * a;
    g.d_w += ua * hp * z;
    g.d_b += ua * hp;
    Vec az = a + ua * hp * nf.w;

    // log|det_t| with det_t = 1 + h'(s_t) u'w and dh'/ds = -2 h h'
    const double c = -2.0 * h * hp * uw / det;
    g.d_u += (hp / det) * nf.w;
    g.d_w += (hp / det) * nf.u + c * z;
    g.d_b += c;
    az += c * nf.w;

    a = std::move(az);
  }
  return g;
}

double vb_expected_elbo(const GaussianModelParams& params, const Dataset& data,
                        const MeanFieldParams& mf) {
  params.validate();
  mf.validate();
  if (params.dim() != data.dim() || mf.dim() != data.dim())
    throw ConfigError("dimension mismatch in expected ELBO");
  const double n = static_cast<double>(data.n());
  double acc = 0.0;
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    const double s2 = params.sigma_sq[j];
    const double m = mf.mu[j] + params.delta[j];
    const double v = mf.var[j];
    const double ss =
        data.sum_sq()[j] - 2.0 * n * data.mean()[j] * m + n * m * m;
    acc += -0.5 * n * (kLog2Pi + std::log(s2)) - 0.5 * (ss + n * v) / s2;
    acc += -0.5 * kLog2Pi - 0.5 * (mf.mu[j] * mf.mu[j] + v);  // prior term
    acc += 0.5 * (kLog2Pi + std::log(v)) + 0.5;               // entropy
  }
  return acc;
}

VbExpectedElboGrad vb_expected_elbo_grad(const GaussianModelParams& params,
                                         const Dataset& data,
                                         const MeanFieldParams& mf) {
  params.validate();
  mf.validate();
  if (params.dim() != data.dim() || mf.dim() != data.dim())
    throw ConfigError("dimension mismatch in expected ELBO");
  const double n = static_cast<double>(data.n());
  const Eigen::Index d = data.dim();

  VbExpectedElboGrad g;
  g.value = vb_expected_elbo(params, data, mf);
  g.d_theta = Vec(2 * d);
  g.d_mu = Vec(d);
  g.d_log_sigma = Vec(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double s2 = params.sigma_sq[j];
    const double m = mf.mu[j] + params.delta[j];
    const double v = mf.var[j];
    const double ss =
        data.sum_sq()[j] - 2.0 * n * data.mean()[j] * m + n * m * m;
    const double resid = n * (data.mean()[j] - m) / s2;
    g.d_theta[j] = resid;
    g.d_theta[d + j] = -0.5 * n / s2 + 0.5 * (ss + n * v) / (s2 * s2);
    g.d_mu[j] = resid - mf.mu[j];
    const double dv = -0.5 * n / s2 - 0.5 + 0.5 / v;
    g.d_log_sigma[j] = dv * 2.0 * v;
  }
  return g;
}

}  // namespace hvi
