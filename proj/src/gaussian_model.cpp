#include "hvi/gaussian_model.hpp"

namespace hvi {

void GaussianModelParams::validate() const {
  if (delta.size() != sigma_sq.size())
    throw ConfigError("delta and sigma_sq must have the same length");
  if (delta.size() == 0) throw ConfigError("empty parameter vectors");
  for (Eigen::Index j = 0; j < sigma_sq.size(); ++j)
    if (!(sigma_sq[j] > 0.0))
      throw DomainError("sigma_sq must be strictly positive");
}

Vec GaussianModelParams::flatten() const {
  Vec theta(2 * delta.size());
  theta.head(delta.size()) = delta;
  theta.tail(delta.size()) = sigma_sq;
  return theta;
}

GaussianModelParams GaussianModelParams::unflatten(const Vec& theta) {
  if (theta.size() % 2 != 0) throw ConfigError("theta must have even length");
  const Eigen::Index d = theta.size() / 2;
  return {theta.head(d), theta.tail(d)};
}

namespace {

void check_dims(const GaussianModelParams& params, const Dataset& data,
                const Vec& z) {
  params.validate();
  if (params.dim() != data.dim())
    throw ConfigError("parameter dimension does not match dataset");
  if (z.size() != data.dim())
    throw ConfigError("latent dimension does not match dataset");
}

}  // namespace

double gaussian_log_joint(const GaussianModelParams& params,
                          const Dataset& data, const Vec& z) {
  check_dims(params, data, z);
  const double n = static_cast<double>(data.n());
  const Eigen::Index d = data.dim();
  double acc = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double m = z[j] + params.delta[j];
    // sum_i (x_ij - m)^2 from the cached sufficient statistics
    const double ss = data.sum_sq()[j] - 2.0 * n * data.mean()[j] * m + n * m * m;
    acc += -0.5 * n * (kLog2Pi + std::log(params.sigma_sq[j])) -
           0.5 * ss / params.sigma_sq[j];
  }
  acc += std_normal_log_density(z);
  return acc;
}

Vec gaussian_grad_u(const GaussianModelParams& params, const Dataset& data,
                    const Vec& z) {
  check_dims(params, data, z);
  const double n = static_cast<double>(data.n());
  return z.array() +
         n * (z + params.delta - data.mean()).array() / params.sigma_sq.array();
}

double gaussian_exact_log_marginal(const GaussianModelParams& params,
                                   const Dataset& data) {
  params.validate();
  if (params.dim() != data.dim())
    throw ConfigError("parameter dimension does not match dataset");
  const double n = static_cast<double>(data.n());
  double acc = 0.0;
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    const double s2 = params.sigma_sq[j];
    const double ybar = data.mean()[j] - params.delta[j];
    // sum_i (x_ij - delta_j)^2
    const double ysq = data.sum_sq()[j] - 2.0 * n * data.mean()[j] * params.delta[j] +
                       n * params.delta[j] * params.delta[j];
    const double lambda = 1.0 + n / s2;      // posterior precision
    const double mu = (n * ybar / s2) / lambda;  // posterior mean
    acc += -0.5 * n * (kLog2Pi + std::log(s2)) - 0.5 * std::log(lambda) +
           0.5 * lambda * mu * mu - 0.5 * ysq / s2;
  }
  return acc;
}

GaussianPosterior gaussian_exact_posterior(const GaussianModelParams& params,
                                           const Dataset& data) {
  params.validate();
  if (params.dim() != data.dim())
    throw ConfigError("parameter dimension does not match dataset");
  const double n = static_cast<double>(data.n());
  const Eigen::Index d = data.dim();
  GaussianPosterior post{Vec(d), Vec(d)};
  for (Eigen::Index j = 0; j < d; ++j) {
    const double lambda = 1.0 + n / params.sigma_sq[j];
    post.var[j] = 1.0 / lambda;
    post.mean[j] = post.var[j] * (n / params.sigma_sq[j]) *
                   (data.mean()[j] - params.delta[j]);
  }
  return post;
}

GaussianPosterior gaussian_prior_posterior(Eigen::Index d) {
  return {Vec::Zero(d), Vec::Ones(d)};
}

GaussianModelParams make_true_params(Eigen::Index d) {
  if (d < 1) throw ConfigError("dimension must be >= 1");
  GaussianModelParams p{Vec(d), Vec(d)};
  for (Eigen::Index j = 1; j <= d; ++j) {
    p.delta[j - 1] =
        (static_cast<double>(j) - 1.0 - (static_cast<double>(d) - 1.0) / 2.0) / 5.0;
    double sigma = 1.0;
    if (d > 1) {
      const double half = (static_cast<double>(d) - 1.0) / 2.0;
      const double t = (static_cast<double>(j) - (static_cast<double>(d) + 1.0) / 2.0) / half;
      sigma = 0.1 + 0.9 * t * t;
    }
    p.sigma_sq[j - 1] = sigma * sigma;
  }
  return p;
}

double GaussianTarget::log_joint(const Vec& theta, const Vec& z) const {
  return gaussian_log_joint(GaussianModelParams::unflatten(theta), *data_, z);
}

Vec GaussianTarget::grad_z(const Vec& theta, const Vec& z) const {
  return -gaussian_grad_u(GaussianModelParams::unflatten(theta), *data_, z);
}

Vec GaussianTarget::grad_theta(const Vec& theta, const Vec& z) const {
  const auto params = GaussianModelParams::unflatten(theta);
  check_dims(params, *data_, z);
  const double n = static_cast<double>(data_->n());
  const Eigen::Index d = data_->dim();
  Vec g(2 * d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double s2 = params.sigma_sq[j];
    const double m = z[j] + params.delta[j];
    const double ss =
        data_->sum_sq()[j] - 2.0 * n * data_->mean()[j] * m + n * m * m;
    g[j] = n * (data_->mean()[j] - m) / s2;            // d/d delta_j
    g[d + j] = -0.5 * n / s2 + 0.5 * ss / (s2 * s2);   // d/d sigma_sq_j
  }
  return g;
}

Vec GaussianTarget::hess_u_vec(const Vec& theta, const Vec& z, const Vec& v) const {
  const auto params = GaussianModelParams::unflatten(theta);
  check_dims(params, *data_, z);
  const double n = static_cast<double>(data_->n());
  // d^2 U / dz^2 = I + N Sigma^{-1}
  return v.array() * (1.0 + n / params.sigma_sq.array());
}

Vec GaussianTarget::grad_theta_of_grad_u_dot(const Vec& theta, const Vec& z,
                                             const Vec& v) const {
  const auto params = GaussianModelParams::unflatten(theta);
  check_dims(params, *data_, z);
  const double n = static_cast<double>(data_->n());
  const Eigen::Index d = data_->dim();
  // v . grad_u = v.z + N sum_j v_j (z_j + delta_j - xbar_j) / sigma_sq_j
  Vec g(2 * d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double s2 = params.sigma_sq[j];
    const double r = z[j] + params.delta[j] - data_->mean()[j];
    g[j] = n * v[j] / s2;
    g[d + j] = -n * v[j] * r / (s2 * s2);
  }
  return g;
}

}  // namespace hvi
