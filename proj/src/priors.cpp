#include "hvi/priors.hpp"

namespace hvi {

void MeanFieldParams::validate() const {
  if (mu.size() != var.size())
    throw ConfigError("mean-field mu and var must have the same length");
  for (Eigen::Index j = 0; j < var.size(); ++j)
    if (!(var[j] > 0.0)) throw DomainError("mean-field variances must be > 0");
}

MeanFieldPrior::MeanFieldPrior(const MeanFieldParams& p)
    : mu_(p.mu), log_sigma_(0.5 * p.var.array().log()) {
  p.validate();
}

MeanFieldPrior::MeanFieldPrior(Vec mu, Vec log_sigma)
    : mu_(std::move(mu)), log_sigma_(std::move(log_sigma)) {
  if (mu_.size() != log_sigma_.size())
    throw ConfigError("mu and log_sigma must have the same length");
}

Vec MeanFieldPrior::sample(const Vec& noise) const {
  return mu_.array() + log_sigma_.array().exp() * noise.array();
}

double MeanFieldPrior::log_density(const Vec& z) const {
  const Vec var = (2.0 * log_sigma_).array().exp();
  return diag_gaussian_log_density(z, mu_, var);
}

Vec MeanFieldPrior::grad_z_log_density(const Vec& z) const {
  const Vec var = (2.0 * log_sigma_).array().exp();
  return -(z - mu_).array() / var.array();
}

void MeanFieldPrior::add_vjp_sample(const Vec& noise, const Vec& cotangent,
                                    Vec& grad_phi) const {
  const Eigen::Index d = mu_.size();
  grad_phi.head(d) += cotangent;
  // d z / d log_sigma = sigma * noise
  grad_phi.tail(d).array() +=
      cotangent.array() * log_sigma_.array().exp() * noise.array();
}

void MeanFieldPrior::add_grad_params_log_density(const Vec& z, double coeff,
                                                 Vec& grad_phi) const {
  const Eigen::Index d = mu_.size();
  const Vec var = (2.0 * log_sigma_).array().exp();
  const Vec r = (z - mu_).array() / var.array();
  grad_phi.head(d).array() += coeff * r.array();
  // d/d log_sigma log N = (z-mu)^2/var - 1
  grad_phi.tail(d).array() +=
      coeff * ((z - mu_).array() * r.array() - 1.0);
}

Vec MeanFieldPrior::params() const {
  Vec phi(2 * mu_.size());
  phi.head(mu_.size()) = mu_;
  phi.tail(mu_.size()) = log_sigma_;
  return phi;
}

void MeanFieldPrior::set_params(const Vec& phi) {
  const Eigen::Index d = mu_.size();
  if (phi.size() != 2 * d) throw ConfigError("bad mean-field parameter length");
  mu_ = phi.head(d);
  log_sigma_ = phi.tail(d);
}

MeanFieldParams MeanFieldPrior::mean_field() const {
  return {mu_, (2.0 * log_sigma_).array().exp()};
}

}  // namespace hvi
