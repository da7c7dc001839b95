#ifndef HVI_ADJOINT_HPP
#define HVI_ADJOINT_HPP

#include <functional>
#include <utility>

#include "hvi/estimators.hpp"

namespace hvi {

// Smooth squashing bijections keeping optimization in-domain. raw = 0 maps
// to the midpoint of each interval.
double constrain_unit(double raw);                 // (0,1)
double unconstrain_unit(double v);
double constrain_unit_derivative(double raw);
Vec constrain_step_sizes(const Vec& raw, double xi);  // (0,xi)^l
Vec unconstrain_step_sizes(const Vec& eps, double xi);
Vec constrain_step_sizes_derivative(const Vec& raw, double xi);

/// Unconstrained representation of the flow's variational parameters:
/// eps = xi*sigmoid(eps_raw); Fixed tempering stores beta0 = sigmoid(beta0_raw),
/// Free stores alpha_k = sigmoid(alpha_raw_k), None stores nothing.
struct FlowPhi {
  int steps = 0;
  double xi = 0.5;
  Vec eps_raw;
  TemperingKind kind = TemperingKind::None;
  double beta0_raw = 0.0;
  Vec alpha_raw;

  Eigen::Index temper_dim() const;
  Eigen::Index flat_dim() const { return eps_raw.size() + temper_dim(); }

  FlowConfig config() const;
  static FlowPhi from_config(const FlowConfig& cfg);

  /// [eps_raw; beta0_raw or alpha_raw] -- the order GradientBundle uses.
  Vec flatten() const;
  void set_flat(const Vec& flat);
};

/// Sensitivities of one Hamiltonian ELBO draw. d_theta is in the model's
/// natural parametrization; the flow blocks are with respect to the
/// unconstrained representation; d_prior covers the variational prior's own
/// parameters (empty for fixed priors).
struct GradientBundle {
  Vec d_theta;
  Vec d_eps_raw;
  Vec d_temper_raw;
  Vec d_prior;

  Vec flatten_phi() const;  // [d_eps_raw; d_temper_raw]
};

/// Value and exact gradients of the Rao-Blackwellized Hamiltonian ELBO for
/// one fixed noise draw: a stored-trajectory backward sweep through the
/// tempering scalings and the three shear stages of each leapfrog step.
std::pair<ElboEstimate, GradientBundle> backprop_his(
    const TargetModel& target, const Vec& theta, const FlowPhi& phi,
    const VariationalPrior& prior, const HisNoise& noise);

/// Central finite differences of f per coordinate.
Vec finite_diff_gradient(const std::function<double(const Vec&)>& f,
                         const Vec& params, double step);

}  // namespace hvi

#endif  // HVI_ADJOINT_HPP
