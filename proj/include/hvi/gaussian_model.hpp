#ifndef HVI_GAUSSIAN_MODEL_HPP
#define HVI_GAUSSIAN_MODEL_HPP

#include "hvi/dataset.hpp"
#include "hvi/model.hpp"

namespace hvi {

/// Parameters of the offset Gaussian model
///   z ~ N(0, I_d),  x_i | z ~ N(z + delta, diag(sigma_sq)).
struct GaussianModelParams {
  Vec delta;
  Vec sigma_sq;

  void validate() const;
  Eigen::Index dim() const { return delta.size(); }

  /// Flat layout [delta; sigma_sq] used by TargetModel and the trainer.
  Vec flatten() const;
  static GaussianModelParams unflatten(const Vec& theta);
};

/// log p(D, z) = sum_i log N(x_i; z + delta, Sigma) + log N(z; 0, I).
double gaussian_log_joint(const GaussianModelParams& params, const Dataset& data,
                          const Vec& z);

/// grad_z U = z + N Sigma^{-1} (z + delta - xbar), with U = -log p(D, z).
Vec gaussian_grad_u(const GaussianModelParams& params, const Dataset& data,
                    const Vec& z);

/// Closed-form log p(D) by per-dimension conjugacy.
double gaussian_exact_log_marginal(const GaussianModelParams& params,
                                   const Dataset& data);

struct GaussianPosterior {
  Vec mean;
  Vec var;  // diagonal
};

/// Exact posterior of z | D; diagonal because Sigma is diagonal. Empty-data
/// overload below returns the prior.
GaussianPosterior gaussian_exact_posterior(const GaussianModelParams& params,
                                           const Dataset& data);
GaussianPosterior gaussian_prior_posterior(Eigen::Index d);

/// True parameters of the benchmark study: delta_j = (j-1-(d-1)/2)/5 and
/// standard deviations on the parabola through (1,1), ((d+1)/2, 0.1), (d,1).
/// For d = 1 the parabola degenerates; the endpoint value sigma = 1 is used.
GaussianModelParams make_true_params(Eigen::Index d);

/// TargetModel adapter: observation is the whole dataset (one global
/// latent), theta = [delta; sigma_sq].
class GaussianTarget final : public TargetModel {
 public:
  explicit GaussianTarget(const Dataset& data) : data_(&data) {}

  Eigen::Index latent_dim() const override { return data_->dim(); }
  Eigen::Index param_dim() const override { return 2 * data_->dim(); }

  double log_joint(const Vec& theta, const Vec& z) const override;
  Vec grad_z(const Vec& theta, const Vec& z) const override;
  Vec grad_theta(const Vec& theta, const Vec& z) const override;
  Vec hess_u_vec(const Vec& theta, const Vec& z, const Vec& v) const override;
  Vec grad_theta_of_grad_u_dot(const Vec& theta, const Vec& z,
                               const Vec& v) const override;

  const Dataset& data() const { return *data_; }

 private:
  const Dataset* data_;
};

}  // namespace hvi

#endif  // HVI_GAUSSIAN_MODEL_HPP
