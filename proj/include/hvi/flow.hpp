#ifndef HVI_FLOW_HPP
#define HVI_FLOW_HPP

#include <functional>
#include <iosfwd>
#include <vector>

#include "hvi/model.hpp"

namespace hvi {

struct PhasePoint {
  Vec z;
  Vec rho;

  Eigen::Index dim() const { return z.size(); }
  void validate() const {
    if (z.size() != rho.size())
      throw ConfigError("position and momentum must have the same dimension");
  }
};

enum class TemperingKind { None, Fixed, Free };

/// Per-step momentum cooling. Fixed derives alpha_k = sqrt(beta_{k-1}/beta_k)
/// from the quadratic schedule on beta_0; Free carries learned alphas with
/// beta_0 = prod alpha_k^2; None is the identity (beta_0 = 1).
struct TemperingScheme {
  TemperingKind kind = TemperingKind::None;
  double beta0 = 1.0;  // Fixed
  Vec alphas;          // Free

  static TemperingScheme none() { return {}; }
  static TemperingScheme fixed(double beta0);
  static TemperingScheme free_scheme(Vec alphas);

  /// Initial inverse temperature implied by the scheme.
  double beta0_value() const;
  /// Cooling factor applied after leapfrog step k (1-based).
  double alpha(int k, int K) const;
  void validate(int K) const;
};

struct FlowConfig {
  int steps = 0;  // K
  Vec eps;        // per-dimension leapfrog step sizes, each in (0, xi)
  TemperingScheme tempering;
  double xi = 0.5;

  void validate(Eigen::Index latent_dim) const;
};

struct Trajectory {
  std::vector<PhasePoint> points;  // K+1 states
  Vec betas;                       // K+1 inverse temperatures
  Vec alphas;                      // K cooling factors
  double log_jacobian = 0.0;       // l * sum_k log alpha_k

  int steps() const { return static_cast<int>(points.size()) - 1; }
  const PhasePoint& initial() const { return points.front(); }
  const PhasePoint& final_point() const { return points.back(); }
};

/// sqrt(beta_k) = ((1 - 1/sqrt(beta0)) k^2/K^2 + 1/sqrt(beta0))^{-1}.
/// Endpoints are exact: beta(0) = beta0, beta(K) = 1.
double quadratic_beta(double beta0, int k, int K);
double quadratic_sqrt_beta(double beta0, int k, int K);
/// d sqrt(beta_k) / d sqrt(beta0), used by the flow adjoint.
double quadratic_sqrt_beta_derivative(double beta0, int k, int K);

using GradU = std::function<Vec(const Vec&)>;

/// One half-kick / drift / half-kick leapfrog step. Throws IntegrationError
/// (step index supplied by the caller) if the gradient is non-finite.
PhasePoint leapfrog_step(const PhasePoint& p, const Vec& eps, const GradU& grad_u,
                         int step_index = 0);

/// Elementwise momentum scaling; the flow log-Jacobian picks up l*log(alpha).
Vec temper_momentum(const Vec& rho, double alpha);

/// K alternating leapfrog+temper steps, recording every state, the beta
/// schedule, and the exact accumulated log-Jacobian. K = 0 is the identity.
Trajectory forward_flow(const FlowConfig& config, const TargetModel& target,
                        const Vec& theta, const PhasePoint& p0);

/// Exact algebraic inverse of forward_flow (un-temper, then reverse the three
/// shear stages of each leapfrog step).
PhasePoint inverse_flow(const FlowConfig& config, const TargetModel& target,
                        const Vec& theta, const PhasePoint& pK);

/// H(z, rho) = U(z) + rho'rho/2 with U = -log_joint.
double hamiltonian(const TargetModel& target, const Vec& theta,
                   const PhasePoint& p);

/// Debug dump, columns: k, beta_k, z..., rho..., H.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                          const TargetModel& target, const Vec& theta);

}  // namespace hvi

#endif  // HVI_FLOW_HPP
