#ifndef HVI_ESTIMATORS_HPP
#define HVI_ESTIMATORS_HPP

#include <vector>

#include "hvi/flow.hpp"
#include "hvi/gaussian_model.hpp"
#include "hvi/priors.hpp"

namespace hvi {

/// Scalar log-domain estimate plus trajectory diagnostics.
struct ElboEstimate {
  double value = 0.0;
  double final_hamiltonian = 0.0;
  double log_jacobian = 0.0;
  Vec z_final;
};

/// Noise driving one Hamiltonian estimate: the variational-prior draw and
/// gamma0 ~ N(0, I); rho0 = gamma0 / sqrt(beta0).
struct HisNoise {
  Vec prior_noise;
  Vec gamma0;
};

HisNoise draw_his_noise(SplitMix64& rng, Eigen::Index latent_dim);

/// log pbar - log qbar with pbar = p(x, z_K) N(rho_K | 0, I) and
/// qbar = q0(z0) N(rho0 | 0, beta0^{-1} I) beta0^{-l/2}. exp(value) is an
/// unbiased estimate of p_theta(x); its expectation lower-bounds log p.
ElboEstimate his_elbo(const TargetModel& target, const Vec& theta,
                      const FlowConfig& config, const VariationalPrior& prior,
                      const HisNoise& noise);

/// log p(x, z_K) - rho_K'rho_K/2 - log q0(z0) + l/2: the momentum-entropy
/// term integrated analytically. Per draw this equals
/// his_elbo + l/2 - gamma0'gamma0/2.
ElboEstimate his_elbo_rao_blackwell(const TargetModel& target, const Vec& theta,
                                    const FlowConfig& config,
                                    const VariationalPrior& prior,
                                    const HisNoise& noise);

/// Plain reparameterized ELBO draw: log p(x, z) - log q(z) with
/// z = mu + sqrt(var) .* noise.
ElboEstimate vanilla_elbo(const TargetModel& target, const Vec& theta,
                          const MeanFieldParams& mf, const Vec& noise);

/// Planar normalizing flow with parameters tied across iterations:
/// z' = z + u tanh(w'z + b), log-det log|1 + u'psi(z)|.
struct PlanarFlowParams {
  Vec u;
  Vec w;
  double b = 0.0;
  int iterations = 1;

  void validate(Eigen::Index dim) const;
  /// True when w'u >= -1 (sufficient for invertibility).
  bool invertible() const;
  /// Standard reprojection of u onto the invertible region; identity when
  /// the condition already holds.
  void project();
};

ElboEstimate planar_nf_elbo(const TargetModel& target, const Vec& theta,
                            const PlanarFlowParams& nf,
                            const VariationalPrior& prior, const Vec& noise);

/// log[(1/L) sum p(x, z_i)/q(z_i)] over L proposal draws.
double iwae_bound(const TargetModel& target, const Vec& theta,
                  const VariationalPrior& proposal,
                  const std::vector<Vec>& noises);
double iwae_bound(const TargetModel& target, const Vec& theta,
                  const VariationalPrior& proposal, int L, SplitMix64& rng);

struct AisConfig {
  int leapfrog_steps = 1;  // per bridge density
  double step_size = 0.2;
};

/// Annealed importance sampling along the geometric path from the prior to
/// the posterior, with a Metropolis-corrected HMC kernel per bridge. Unbiased
/// in weight space; not reparameterizable -- verification oracle only.
double ais_log_likelihood(const TargetModel& target, const Vec& theta,
                          const VariationalPrior& prior, int annealing_steps,
                          const AisConfig& mcmc, SplitMix64& rng);

/// -log[(1/n) sum w_i] with w_i = p(x, z_i)/q(z_i), z_i ~ proposal.
double importance_sampled_nll(const TargetModel& target, const Vec& theta,
                              const VariationalPrior& proposal, int n,
                              SplitMix64& rng);

/// Same, with the Hamiltonian-flow posterior as proposal: the weights are
/// exp(his_elbo) draws on the extended space.
double importance_sampled_nll_his(const TargetModel& target, const Vec& theta,
                                  const FlowConfig& config,
                                  const VariationalPrior& prior, int n,
                                  SplitMix64& rng);

/// Max-shifted log(mean(exp(v))).
double log_mean_exp(const std::vector<double>& values);

/// Replicate dump for the harness, columns: replicate, estimator, value.
void write_replicates_csv(const std::string& path, const std::string& estimator,
                          const std::vector<double>& values);

// -- gradient-carrying variants used by the trainer --------------------------

struct VanillaElboGrad {
  double value = 0.0;
  Vec d_theta;
  Vec d_mu;
  Vec d_log_sigma;
};

/// Reparameterized gradient of one vanilla ELBO draw; the variational
/// parameters are (mu, log sigma).
VanillaElboGrad vanilla_elbo_grad(const TargetModel& target, const Vec& theta,
                                  const Vec& mu, const Vec& log_sigma,
                                  const Vec& noise);

struct PlanarElboGrad {
  double value = 0.0;
  Vec d_theta;
  Vec d_u;
  Vec d_w;
  double d_b = 0.0;
};

/// Exact reverse-mode gradient of one planar-flow ELBO draw at feasible
/// (w'u >= -1) parameters.
PlanarElboGrad planar_nf_elbo_grad(const TargetModel& target, const Vec& theta,
                                   const PlanarFlowParams& nf,
                                   const VariationalPrior& prior,
                                   const Vec& noise);

// -- closed forms for the conjugate Gaussian model ---------------------------

/// E_q[log p(D, z) - log q(z)] in closed form for the offset Gaussian model
/// with a mean-field q. This is the exact (zero-variance) value of the
/// vanilla estimator's expectation.
double vb_expected_elbo(const GaussianModelParams& params, const Dataset& data,
                        const MeanFieldParams& mf);

struct VbExpectedElboGrad {
  double value = 0.0;
  Vec d_theta;  // [delta; sigma_sq]
  Vec d_mu;
  Vec d_log_sigma;
};

VbExpectedElboGrad vb_expected_elbo_grad(const GaussianModelParams& params,
                                         const Dataset& data,
                                         const MeanFieldParams& mf);

}  // namespace hvi

#endif  // HVI_ESTIMATORS_HPP
