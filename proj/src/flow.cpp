#include "hvi/flow.hpp"

#include <ostream>

namespace hvi {

TemperingScheme TemperingScheme::fixed(double beta0) {
  if (!(beta0 > 0.0) || !(beta0 < 1.0))
    throw DomainError("fixed tempering requires beta0 in (0,1)");
  TemperingScheme s;
  s.kind = TemperingKind::Fixed;
  s.beta0 = beta0;
  return s;
}

TemperingScheme TemperingScheme::free_scheme(Vec alphas) {
  TemperingScheme s;
  s.kind = TemperingKind::Free;
  s.alphas = std::move(alphas);
  for (Eigen::Index k = 0; k < s.alphas.size(); ++k)
    if (!(s.alphas[k] > 0.0) || !(s.alphas[k] < 1.0))
      throw DomainError("free tempering requires alpha_k in (0,1)");
  s.beta0 = s.alphas.array().square().prod();
  return s;
}

double TemperingScheme::beta0_value() const {
  switch (kind) {
    case TemperingKind::None:
      return 1.0;
    case TemperingKind::Fixed:
      return beta0;
    case TemperingKind::Free:
      return alphas.size() == 0 ? 1.0 : alphas.array().square().prod();
  }
  return 1.0;
}

double TemperingScheme::alpha(int k, int K) const {
  switch (kind) {
    case TemperingKind::None:
      return 1.0;
    case TemperingKind::Fixed:
      return quadratic_sqrt_beta(beta0, k - 1, K) / quadratic_sqrt_beta(beta0, k, K);
    case TemperingKind::Free:
      return alphas[k - 1];
  }
  return 1.0;
}

void TemperingScheme::validate(int K) const {
  if (kind == TemperingKind::Fixed) {
    if (!(beta0 > 0.0) || !(beta0 < 1.0))
      throw DomainError("fixed tempering requires beta0 in (0,1)");
  } else if (kind == TemperingKind::Free) {
    if (alphas.size() != K)
      throw ConfigError("free tempering needs one alpha per step");
    for (Eigen::Index k = 0; k < alphas.size(); ++k)
      if (!(alphas[k] > 0.0) || !(alphas[k] < 1.0))
        throw DomainError("free tempering requires alpha_k in (0,1)");
  }
}

void FlowConfig::validate(Eigen::Index latent_dim) const {
  if (steps < 0) throw ConfigError("step count must be >= 0");
  if (!(xi > 0.0)) throw DomainError("step-size cap xi must be > 0");
  if (eps.size() != latent_dim)
    throw ConfigError("eps must have one entry per latent dimension");
  for (Eigen::Index j = 0; j < eps.size(); ++j)
    if (!(eps[j] > 0.0) || !(eps[j] < xi))
      throw DomainError("leapfrog step sizes must lie in (0, xi)");
  tempering.validate(steps);
}

double quadratic_sqrt_beta(double beta0, int k, int K) {
  if (!(beta0 > 0.0) || beta0 > 1.0)
    throw DomainError("quadratic schedule requires beta0 in (0,1]");
  if (K < 1 || k < 0 || k > K)
    throw ConfigError("schedule index out of range");
  // Endpoint-exact by construction.
  if (k == 0) return std::sqrt(beta0);
  if (k == K) return 1.0;
  const double inv_sb0 = 1.0 / std::sqrt(beta0);
  const double t = (static_cast<double>(k) * k) / (static_cast<double>(K) * K);
  return 1.0 / ((1.0 - inv_sb0) * t + inv_sb0);
}

double quadratic_beta(double beta0, int k, int K) {
  const double s = quadratic_sqrt_beta(beta0, k, K);
  return k == 0 ? beta0 : s * s;
}

double quadratic_sqrt_beta_derivative(double beta0, int k, int K) {
  if (!(beta0 > 0.0) || beta0 > 1.0)
    throw DomainError("quadratic schedule requires beta0 in (0,1]");
  if (K < 1 || k < 0 || k > K)
    throw ConfigError("schedule index out of range");
  // s_k = b / (1 - t + t b) with b = sqrt(beta0), t = k^2/K^2,
  // so ds_k/db = (1 - t) / (1 - t + t b)^2.
  const double b = std::sqrt(beta0);
  const double t = (static_cast<double>(k) * k) / (static_cast<double>(K) * K);
  const double den = 1.0 - t + t * b;
  return (1.0 - t) / (den * den);
}

PhasePoint leapfrog_step(const PhasePoint& p, const Vec& eps, const GradU& grad_u,
                         int step_index) {
  p.validate();
  if (eps.size() != p.dim())
    throw ConfigError("eps must match the phase-point dimension");
  const Vec g1 = grad_u(p.z);
  if (!g1.allFinite())
    throw IntegrationError("non-finite gradient at leapfrog entry", step_index);
  PhasePoint out;
  const Vec rho_half = p.rho - 0.5 * (eps.array() * g1.array()).matrix();
  out.z = p.z + (eps.array() * rho_half.array()).matrix();
  const Vec g2 = grad_u(out.z);
  if (!g2.allFinite())
    throw IntegrationError("non-finite gradient after drift", step_index);
  out.rho = rho_half - 0.5 * (eps.array() * g2.array()).matrix();
  return out;
}

Vec temper_momentum(const Vec& rho, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("tempering factor must be > 0");
  return alpha * rho;
}

Trajectory forward_flow(const FlowConfig& config, const TargetModel& target,
                        const Vec& theta, const PhasePoint& p0) {
  config.validate(target.latent_dim());
  p0.validate();
  if (p0.dim() != target.latent_dim())
    throw ConfigError("phase point does not match the target dimension");
  const int K = config.steps;
  const double l = static_cast<double>(p0.dim());

  Trajectory traj;
  traj.points.reserve(static_cast<size_t>(K) + 1);
  traj.points.push_back(p0);
  traj.betas = Vec(K + 1);
  traj.alphas = Vec(K);
  traj.betas[0] = config.tempering.beta0_value();

  auto grad = [&](const Vec& z) { return target.grad_u(theta, z); };
  double sum_log_alpha = 0.0;
  for (int k = 1; k <= K; ++k) {
    PhasePoint next = leapfrog_step(traj.points.back(), config.eps, grad, k);
    const double alpha = config.tempering.alpha(k, K);
    next.rho = temper_momentum(next.rho, alpha);
    traj.alphas[k - 1] = alpha;
    traj.betas[k] = traj.betas[k - 1] / (alpha * alpha);
    sum_log_alpha += std::log(alpha);
    traj.points.push_back(std::move(next));
  }
  traj.log_jacobian = l * sum_log_alpha;
  return traj;
}

PhasePoint inverse_flow(const FlowConfig& config, const TargetModel& target,
                        const Vec& theta, const PhasePoint& pK) {
  config.validate(target.latent_dim());
  pK.validate();
  const int K = config.steps;
  PhasePoint p = pK;
  for (int k = K; k >= 1; --k) {
    const double alpha = config.tempering.alpha(k, K);
    Vec rho_prime = p.rho / alpha;
    const Vec g2 = target.grad_u(theta, p.z);
    if (!g2.allFinite())
      throw IntegrationError("non-finite gradient in inverse flow", k);
    const Vec rho_half = rho_prime + 0.5 * (config.eps.array() * g2.array()).matrix();
    const Vec z_prev = p.z - (config.eps.array() * rho_half.array()).matrix();
    const Vec g1 = target.grad_u(theta, z_prev);
    if (!g1.allFinite())
      throw IntegrationError("non-finite gradient in inverse flow", k);
    p.z = z_prev;
    p.rho = rho_half + 0.5 * (config.eps.array() * g1.array()).matrix();
  }
  return p;
}

double hamiltonian(const TargetModel& target, const Vec& theta,
                   const PhasePoint& p) {
  return target.potential(theta, p.z) + 0.5 * p.rho.squaredNorm();
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                          const TargetModel& target, const Vec& theta) {
  const Eigen::Index l = traj.initial().dim();
  out << "k,beta";
  for (Eigen::Index j = 0; j < l; ++j) out << ",z" << j;
  for (Eigen::Index j = 0; j < l; ++j) out << ",rho" << j;
  out << ",H\n";
  out.precision(17);
  for (int k = 0; k <= traj.steps(); ++k) {
    const auto& p = traj.points[static_cast<size_t>(k)];
    out << k << ',' << traj.betas[k];
    for (Eigen::Index j = 0; j < l; ++j) out << ',' << p.z[j];
    for (Eigen::Index j = 0; j < l; ++j) out << ',' << p.rho[j];
    out << ',' << hamiltonian(target, theta, p) << '\n';
  }
}

}  // namespace hvi
