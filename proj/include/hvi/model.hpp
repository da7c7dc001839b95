#ifndef HVI_MODEL_HPP
#define HVI_MODEL_HPP

#include "hvi/common.hpp"

namespace hvi {

/// A generative model bound to one observation (a single datapoint, or the
/// whole dataset when the model has one global latent). Exposes the log
/// joint density and the derivatives the flow and its adjoint need. theta is
/// the model's flat parameter vector in its natural parametrization.
///
/// All methods are pure; implementations carry no mutable state.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual Eigen::Index latent_dim() const = 0;
  virtual Eigen::Index param_dim() const = 0;

  virtual double log_joint(const Vec& theta, const Vec& z) const = 0;

  /// d log_joint / dz.
  virtual Vec grad_z(const Vec& theta, const Vec& z) const = 0;

  /// d log_joint / dtheta.
  virtual Vec grad_theta(const Vec& theta, const Vec& z) const = 0;

  /// Hessian-vector product of the potential U = -log_joint in z:
  /// (d^2 U / dz^2) v. Needed by the momentum half-kick adjoints.
  virtual Vec hess_u_vec(const Vec& theta, const Vec& z, const Vec& v) const = 0;

  /// d/dtheta of v . grad_z U(z), the mixed second derivative contracted
  /// against an adjoint vector.
  virtual Vec grad_theta_of_grad_u_dot(const Vec& theta, const Vec& z,
                                       const Vec& v) const = 0;

  /// Potential energy U(z) = -log_joint.
  double potential(const Vec& theta, const Vec& z) const {
    return -log_joint(theta, z);
  }
  Vec grad_u(const Vec& theta, const Vec& z) const { return -grad_z(theta, z); }
};

/// The initial distribution q^0 over latents: reparameterizable sampling,
/// density evaluation, and sensitivities of both with respect to the prior's
/// own parameters (param_dim() == 0 for fixed priors).
class VariationalPrior {
 public:
  virtual ~VariationalPrior() = default;

  virtual Eigen::Index latent_dim() const = 0;
  virtual Eigen::Index noise_dim() const { return latent_dim(); }
  virtual Eigen::Index param_dim() const { return 0; }

  /// z0 as a smooth deterministic map of parameter-free noise.
  virtual Vec sample(const Vec& noise) const = 0;
  virtual double log_density(const Vec& z) const = 0;
  virtual Vec grad_z_log_density(const Vec& z) const = 0;

  /// Accumulates cotangent^T d sample/d phi into grad_phi.
  virtual void add_vjp_sample(const Vec& noise, const Vec& cotangent,
                              Vec& grad_phi) const {
    (void)noise;
    (void)cotangent;
    (void)grad_phi;
  }

  /// Accumulates coeff * d log_density(z)/d phi (z held fixed) into grad_phi.
  virtual void add_grad_params_log_density(const Vec& z, double coeff,
                                           Vec& grad_phi) const {
    (void)z;
    (void)coeff;
    (void)grad_phi;
  }
};

}  // namespace hvi

#endif  // HVI_MODEL_HPP
