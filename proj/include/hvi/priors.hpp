#ifndef HVI_PRIORS_HPP
#define HVI_PRIORS_HPP

#include "hvi/model.hpp"

namespace hvi {

/// Mean-field Gaussian q(z) = N(z | mu, diag(var)).
struct MeanFieldParams {
  Vec mu;
  Vec var;

  void validate() const;
  Eigen::Index dim() const { return mu.size(); }
};

class StandardNormalPrior final : public VariationalPrior {
 public:
  explicit StandardNormalPrior(Eigen::Index dim) : dim_(dim) {}

  Eigen::Index latent_dim() const override { return dim_; }
  Vec sample(const Vec& noise) const override { return noise; }
  double log_density(const Vec& z) const override {
    return std_normal_log_density(z);
  }
  Vec grad_z_log_density(const Vec& z) const override { return -z; }

 private:
  Eigen::Index dim_;
};

/// Trainable mean-field prior; parameter layout [mu; log sigma] so both
/// blocks are unconstrained.
class MeanFieldPrior final : public VariationalPrior {
 public:
  explicit MeanFieldPrior(const MeanFieldParams& p);
  MeanFieldPrior(Vec mu, Vec log_sigma);

  Eigen::Index latent_dim() const override { return mu_.size(); }
  Eigen::Index param_dim() const override { return 2 * mu_.size(); }

  Vec sample(const Vec& noise) const override;
  double log_density(const Vec& z) const override;
  Vec grad_z_log_density(const Vec& z) const override;
  void add_vjp_sample(const Vec& noise, const Vec& cotangent,
                      Vec& grad_phi) const override;
  void add_grad_params_log_density(const Vec& z, double coeff,
                                   Vec& grad_phi) const override;

  Vec params() const;
  void set_params(const Vec& phi);
  MeanFieldParams mean_field() const;

 private:
  Vec mu_;
  Vec log_sigma_;
};

}  // namespace hvi

#endif  // HVI_PRIORS_HPP
