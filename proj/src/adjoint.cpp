#include "hvi/adjoint.hpp"

namespace hvi {

double constrain_unit(double raw) { return sigmoid(raw); }

double unconstrain_unit(double v) {
  if (!(v > 0.0) || !(v < 1.0)) throw DomainError("value must lie in (0,1)");
  return logit(v);
}

double constrain_unit_derivative(double raw) {
  const double s = sigmoid(raw);
  return s * (1.0 - s);
}

Vec constrain_step_sizes(const Vec& raw, double xi) {
  if (!(xi > 0.0)) throw DomainError("xi must be > 0");
  Vec eps(raw.size());
  for (Eigen::Index j = 0; j < raw.size(); ++j) eps[j] = xi * sigmoid(raw[j]);
  return eps;
}

Vec unconstrain_step_sizes(const Vec& eps, double xi) {
  if (!(xi > 0.0)) throw DomainError("xi must be > 0");
  Vec raw(eps.size());
  for (Eigen::Index j = 0; j < eps.size(); ++j) {
    if (!(eps[j] > 0.0) || !(eps[j] < xi))
      throw DomainError("step sizes must lie in (0, xi)");
    raw[j] = logit(eps[j] / xi);
  }
  return raw;
}

Vec constrain_step_sizes_derivative(const Vec& raw, double xi) {
  Vec d(raw.size());
  for (Eigen::Index j = 0; j < raw.size(); ++j) {
    const double s = sigmoid(raw[j]);
    d[j] = xi * s * (1.0 - s);
  }
  return d;
}

Eigen::Index FlowPhi::temper_dim() const {
  switch (kind) {
    case TemperingKind::None:
      return 0;
    case TemperingKind::Fixed:
      return 1;
    case TemperingKind::Free:
      return alpha_raw.size();
  }
  return 0;
}

FlowConfig FlowPhi::config() const {
  FlowConfig cfg;
  cfg.steps = steps;
  cfg.xi = xi;
  cfg.eps = constrain_step_sizes(eps_raw, xi);
  switch (kind) {
    case TemperingKind::None:
      cfg.tempering = TemperingScheme::none();
      break;
    case TemperingKind::Fixed:
      cfg.tempering = TemperingScheme::fixed(constrain_unit(beta0_raw));
      break;
    case TemperingKind::Free: {
      Vec alphas(alpha_raw.size());
      for (Eigen::Index k = 0; k < alphas.size(); ++k)
        alphas[k] = constrain_unit(alpha_raw[k]);
      cfg.tempering = TemperingScheme::free_scheme(std::move(alphas));
      break;
    }
  }
  return cfg;
}

FlowPhi FlowPhi::from_config(const FlowConfig& cfg) {
  FlowPhi phi;
  phi.steps = cfg.steps;
  phi.xi = cfg.xi;
  phi.eps_raw = unconstrain_step_sizes(cfg.eps, cfg.xi);
  phi.kind = cfg.tempering.kind;
  if (phi.kind == TemperingKind::Fixed)
    phi.beta0_raw = unconstrain_unit(cfg.tempering.beta0);
  else if (phi.kind == TemperingKind::Free) {
    phi.alpha_raw = Vec(cfg.tempering.alphas.size());
    for (Eigen::Index k = 0; k < phi.alpha_raw.size(); ++k)
      phi.alpha_raw[k] = unconstrain_unit(cfg.tempering.alphas[k]);
  }
  return phi;
}

Vec FlowPhi::flatten() const {
  Vec flat(flat_dim());
  flat.head(eps_raw.size()) = eps_raw;
  if (kind == TemperingKind::Fixed)
    flat[eps_raw.size()] = beta0_raw;
  else if (kind == TemperingKind::Free)
    flat.tail(alpha_raw.size()) = alpha_raw;
  return flat;
}

void FlowPhi::set_flat(const Vec& flat) {
  if (flat.size() != flat_dim()) throw ConfigError("bad flow phi length");
  eps_raw = flat.head(eps_raw.size());
  if (kind == TemperingKind::Fixed)
    beta0_raw = flat[eps_raw.size()];
  else if (kind == TemperingKind::Free)
    alpha_raw = flat.tail(alpha_raw.size());
}

Vec GradientBundle::flatten_phi() const {
  Vec flat(d_eps_raw.size() + d_temper_raw.size());
  flat.head(d_eps_raw.size()) = d_eps_raw;
  flat.tail(d_temper_raw.size()) = d_temper_raw;
  return flat;
}

std::pair<ElboEstimate, GradientBundle> backprop_his(
    const TargetModel& target, const Vec& theta, const FlowPhi& phi,
    const VariationalPrior& prior, const HisNoise& noise) {
  const Eigen::Index l = target.latent_dim();
  const int K = phi.steps;
  const FlowConfig cfg = phi.config();
  const double beta0 = cfg.tempering.beta0_value();
  const Vec& eps = cfg.eps;

  PhasePoint p0;
  p0.z = prior.sample(noise.prior_noise);
  p0.rho = noise.gamma0 / std::sqrt(beta0);
  const Trajectory traj = forward_flow(cfg, target, theta, p0);
  const PhasePoint& pK = traj.final_point();

  ElboEstimate est;
  est.value = target.log_joint(theta, pK.z) - 0.5 * pK.rho.squaredNorm() -
              prior.log_density(p0.z) + 0.5 * static_cast<double>(l);
  est.final_hamiltonian = hamiltonian(target, theta, pK);
  est.log_jacobian = traj.log_jacobian;
  est.z_final = pK.z;

  // Backward sweep. a_z / a_r are adjoints of the state entering step k+1.
  Vec a_z = target.grad_z(theta, pK.z);
  Vec a_r = -pK.rho;
  Vec g_theta = target.grad_theta(theta, pK.z);
  Vec g_eps = Vec::Zero(l);
  Vec g_alpha = Vec::Zero(K);

  for (int k = K; k >= 1; --k) {
    const Vec& z_prev = traj.points[static_cast<size_t>(k - 1)].z;
    const Vec& rho_prev = traj.points[static_cast<size_t>(k - 1)].rho;
    const double alpha = traj.alphas[k - 1];

    // Recompute the step's intermediates from the stored endpoints.
    const Vec g1 = target.grad_u(theta, z_prev);
    const Vec rho_half = rho_prev - 0.5 * (eps.array() * g1.array()).matrix();
    const Vec& z_k = traj.points[static_cast<size_t>(k)].z;
    const Vec g2 = target.grad_u(theta, z_k);
    const Vec rho_prime = rho_half - 0.5 * (eps.array() * g2.array()).matrix();

    // rho_k = alpha * rho_prime
    g_alpha[k - 1] = a_r.dot(rho_prime);
    const Vec a_rp = alpha * a_r;

    // rho' = rho_half - eps/2 .* gradU(z_k)
    g_eps.array() += -0.5 * a_rp.array() * g2.array();
    const Vec he_rp = 0.5 * (eps.array() * a_rp.array()).matrix();
    a_z -= target.hess_u_vec(theta, z_k, he_rp);
    g_theta -= target.grad_theta_of_grad_u_dot(theta, z_k, he_rp);
    Vec a_rh = a_rp;

    // z_k = z_prev + eps .* rho_half
    g_eps.array() += a_z.array() * rho_half.array();
    a_rh.array() += eps.array() * a_z.array();

    // rho_half = rho_prev - eps/2 .* gradU(z_prev)
    g_eps.array() += -0.5 * a_rh.array() * g1.array();
    const Vec he_rh = 0.5 * (eps.array() * a_rh.array()).matrix();
    a_z -= target.hess_u_vec(theta, z_prev, he_rh);
    g_theta -= target.grad_theta_of_grad_u_dot(theta, z_prev, he_rh);
    a_r = a_rh;

    if (!a_z.allFinite() || !a_r.allFinite())
      throw IntegrationError("non-finite adjoint", k);
  }

  // -log q0(z0) plus the prior's own parameters.
  a_z -= prior.grad_z_log_density(p0.z);
  Vec g_prior = Vec::Zero(prior.param_dim());
  if (prior.param_dim() > 0) {
    prior.add_grad_params_log_density(p0.z, -1.0, g_prior);
    prior.add_vjp_sample(noise.prior_noise, a_z, g_prior);
  }

  // rho0 = gamma0 / sqrt(beta0)
  const double dl_dbeta0_rho = a_r.dot(p0.rho) * (-0.5 / beta0);

  GradientBundle grad;
  grad.d_theta = std::move(g_theta);
  grad.d_eps_raw =
      (g_eps.array() * constrain_step_sizes_derivative(phi.eps_raw, phi.xi).array())
          .matrix();
  grad.d_prior = std::move(g_prior);

  switch (phi.kind) {
    case TemperingKind::None:
      grad.d_temper_raw = Vec(0);
      break;
    case TemperingKind::Fixed: {
      double dl_dbeta0 = dl_dbeta0_rho;
      if (K >= 1) {
        const double b = std::sqrt(beta0);
        double s_prev = quadratic_sqrt_beta(beta0, 0, K);
        double sp_prev = quadratic_sqrt_beta_derivative(beta0, 0, K);
        for (int k = 1; k <= K; ++k) {
          const double s_k = quadratic_sqrt_beta(beta0, k, K);
          const double sp_k = quadratic_sqrt_beta_derivative(beta0, k, K);
          const double dalpha_db = (sp_prev * s_k - s_prev * sp_k) / (s_k * s_k);
          dl_dbeta0 += g_alpha[k - 1] * dalpha_db / (2.0 * b);
          s_prev = s_k;
          sp_prev = sp_k;
        }
      }
      grad.d_temper_raw = Vec(1);
      grad.d_temper_raw[0] = dl_dbeta0 * constrain_unit_derivative(phi.beta0_raw);
      break;
    }
    case TemperingKind::Free: {
      grad.d_temper_raw = Vec(K);
      for (int k = 0; k < K; ++k) {
        const double alpha = traj.alphas[k];
        // beta0 = prod alpha^2 feeds rho0
        const double dl_dalpha = g_alpha[k] + dl_dbeta0_rho * 2.0 * beta0 / alpha;
        grad.d_temper_raw[k] =
            dl_dalpha * constrain_unit_derivative(phi.alpha_raw[k]);
      }
      break;
    }
  }
  return {std::move(est), std::move(grad)};
}

Vec finite_diff_gradient(const std::function<double(const Vec&)>& f,
                         const Vec& params, double step) {
  if (!(step > 0.0)) throw DomainError("finite-difference step must be > 0");
  Vec g(params.size());
  Vec x = params;
  for (Eigen::Index j = 0; j < params.size(); ++j) {
    const double xj = x[j];
    x[j] = xj + step;
    const double up = f(x);
    x[j] = xj - step;
    const double down = f(x);
    x[j] = xj;
    g[j] = (up - down) / (2.0 * step);
  }
  return g;
}

}  // namespace hvi
