#ifndef HVI_BERNOULLI_MODEL_HPP
#define HVI_BERNOULLI_MODEL_HPP

#include "hvi/model.hpp"

namespace hvi {

/// Affine-then-sigmoid Bernoulli decoder:
///   z ~ N(0, I_l),  x_j | z ~ Bernoulli(sigmoid(W z + b)_j).
struct BernoulliDecoderParams {
  Mat weights;  // d x l
  Vec bias;     // d

  void validate() const;
  Eigen::Index obs_dim() const { return weights.rows(); }
  Eigen::Index latent_dim() const { return weights.cols(); }

  /// Flat layout [vec(W) column-major; b].
  Vec flatten() const;
  static BernoulliDecoderParams unflatten(const Vec& theta, Eigen::Index d,
                                          Eigen::Index l);
};

/// Bernoulli log mass uses the softplus identity, so it stays finite for
/// logits up to the exp overflow range; x must be exactly 0/1.
double bernoulli_decoder_log_joint(const BernoulliDecoderParams& params,
                                   const Vec& x, const Vec& z);

/// sigmoid(W z + b), clamped to [1e-12, 1 - 1e-12].
Vec decoder_probabilities(const BernoulliDecoderParams& params, const Vec& z);

/// TargetModel adapter bound to a single binary observation.
class BernoulliTarget final : public TargetModel {
 public:
  BernoulliTarget(const Vec& x, Eigen::Index latent_dim);

  Eigen::Index latent_dim() const override { return latent_dim_; }
  Eigen::Index param_dim() const override {
    return x_.size() * latent_dim_ + x_.size();
  }

  double log_joint(const Vec& theta, const Vec& z) const override;
  Vec grad_z(const Vec& theta, const Vec& z) const override;
  Vec grad_theta(const Vec& theta, const Vec& z) const override;
  Vec hess_u_vec(const Vec& theta, const Vec& z, const Vec& v) const override;
  Vec grad_theta_of_grad_u_dot(const Vec& theta, const Vec& z,
                               const Vec& v) const override;

 private:
  BernoulliDecoderParams unpack(const Vec& theta) const;
  Vec x_;
  Eigen::Index latent_dim_;
};

/// Single affine encoder layer mapping x to a diagonal Gaussian over z:
///   mu = Wm x + bm,  sigma = softplus(Ws x + bs) + floor.
/// Parameter layout [vec(Wm); bm; vec(Ws); bs].
class AmortizedGaussianPrior {
 public:
  AmortizedGaussianPrior(Eigen::Index obs_dim, Eigen::Index latent_dim);

  Eigen::Index obs_dim() const { return obs_dim_; }
  Eigen::Index latent_dim() const { return latent_dim_; }
  Eigen::Index param_dim() const { return phi_.size(); }

  const Vec& params() const { return phi_; }
  void set_params(const Vec& phi);

  Vec encode_mean(const Vec& x) const;
  Vec encode_sigma(const Vec& x) const;

  /// VariationalPrior view bound to one observation. The view references the
  /// encoder; keep the encoder alive while the view is in use.
  class BoundPrior final : public VariationalPrior {
   public:
    BoundPrior(const AmortizedGaussianPrior& enc, Vec x);

    Eigen::Index latent_dim() const override;
    Eigen::Index param_dim() const override;
    Vec sample(const Vec& noise) const override;
    double log_density(const Vec& z) const override;
    Vec grad_z_log_density(const Vec& z) const override;
    void add_vjp_sample(const Vec& noise, const Vec& cotangent,
                        Vec& grad_phi) const override;
    void add_grad_params_log_density(const Vec& z, double coeff,
                                     Vec& grad_phi) const override;

   private:
    const AmortizedGaussianPrior* enc_;
    Vec x_;
    Vec mu_, sigma_, raw_;  // cached encoder outputs at x
  };

  BoundPrior at(const Vec& x) const { return BoundPrior(*this, x); }

 private:
  friend class BoundPrior;
  Eigen::Index obs_dim_, latent_dim_;
  Vec phi_;
};

}  // namespace hvi

#endif  // HVI_BERNOULLI_MODEL_HPP
