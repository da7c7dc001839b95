#include "hvi/bernoulli_model.hpp"

namespace hvi {

namespace {
constexpr double kProbClamp = 1e-12;
constexpr double kSigmaFloor = 1e-8;

void check_binary(const Vec& x) {
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (x[j] != 0.0 && x[j] != 1.0)
      throw DomainError("observations must be exactly 0 or 1");
}
}  // namespace

void BernoulliDecoderParams::validate() const {
  if (bias.size() != weights.rows())
    throw ConfigError("decoder bias length must match weight rows");
}

Vec BernoulliDecoderParams::flatten() const {
  Vec theta(weights.size() + bias.size());
  theta.head(weights.size()) = Eigen::Map<const Vec>(weights.data(), weights.size());
  theta.tail(bias.size()) = bias;
  return theta;
}

BernoulliDecoderParams BernoulliDecoderParams::unflatten(const Vec& theta,
                                                         Eigen::Index d,
                                                         Eigen::Index l) {
  if (theta.size() != d * l + d)
    throw ConfigError("decoder theta has wrong length");
  BernoulliDecoderParams p;
  p.weights = Eigen::Map<const Mat>(theta.data(), d, l);
  p.bias = theta.tail(d);
  return p;
}

double bernoulli_decoder_log_joint(const BernoulliDecoderParams& params,
                                   const Vec& x, const Vec& z) {
  params.validate();
  if (x.size() != params.obs_dim() || z.size() != params.latent_dim())
    throw ConfigError("decoder dimensions do not match inputs");
  check_binary(x);
  const Vec a = params.weights * z + params.bias;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j)
    acc += x[j] * a[j] - softplus(a[j]);
  return acc + std_normal_log_density(z);
}

Vec decoder_probabilities(const BernoulliDecoderParams& params, const Vec& z) {
  const Vec a = params.weights * z + params.bias;
  Vec p(a.size());
  for (Eigen::Index j = 0; j < a.size(); ++j)
    p[j] = std::min(1.0 - kProbClamp, std::max(kProbClamp, sigmoid(a[j])));
  return p;
}

BernoulliTarget::BernoulliTarget(const Vec& x, Eigen::Index latent_dim)
    : x_(x), latent_dim_(latent_dim) {
  check_binary(x_);
  if (latent_dim_ < 1) throw ConfigError("latent dimension must be >= 1");
}

BernoulliDecoderParams BernoulliTarget::unpack(const Vec& theta) const {
  return BernoulliDecoderParams::unflatten(theta, x_.size(), latent_dim_);
}

double BernoulliTarget::log_joint(const Vec& theta, const Vec& z) const {
  return bernoulli_decoder_log_joint(unpack(theta), x_, z);
}

Vec BernoulliTarget::grad_z(const Vec& theta, const Vec& z) const {
  const auto p = unpack(theta);
  const Vec a = p.weights * z + p.bias;
  Vec resid(a.size());
  for (Eigen::Index j = 0; j < a.size(); ++j) resid[j] = x_[j] - sigmoid(a[j]);
  return p.weights.transpose() * resid - z;
}

Vec BernoulliTarget::grad_theta(const Vec& theta, const Vec& z) const {
  const auto p = unpack(theta);
  const Vec a = p.weights * z + p.bias;
  Vec resid(a.size());
  for (Eigen::Index j = 0; j < a.size(); ++j) resid[j] = x_[j] - sigmoid(a[j]);
  const Mat gw = resid * z.transpose();
  Vec g(param_dim());
  g.head(gw.size()) = Eigen::Map<const Vec>(gw.data(), gw.size());
  g.tail(resid.size()) = resid;
  return g;
}

Vec BernoulliTarget::hess_u_vec(const Vec& theta, const Vec& z, const Vec& v) const {
  const auto p = unpack(theta);
  const Vec a = p.weights * z + p.bias;
  const Vec wv = p.weights * v;
  Vec s(a.size());
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    const double pi = sigmoid(a[j]);
    s[j] = pi * (1.0 - pi);
  }
  return v + p.weights.transpose() * (s.array() * wv.array()).matrix();
}

Vec BernoulliTarget::grad_theta_of_grad_u_dot(const Vec& theta, const Vec& z,
                                              const Vec& v) const {
  const auto p = unpack(theta);
  const Vec a = p.weights * z + p.bias;
  const Vec wv = p.weights * v;
  Vec resid(a.size()), s(a.size());
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    const double pi = sigmoid(a[j]);
    resid[j] = x_[j] - pi;
    s[j] = pi * (1.0 - pi);
  }
  // d/dW [v . grad_u] = (s .* Wv) z^T - resid v^T ; d/db = s .* Wv
  const Vec swv = (s.array() * wv.array()).matrix();
  const Mat gw = swv * z.transpose() - resid * v.transpose();
  Vec g(param_dim());
  g.head(gw.size()) = Eigen::Map<const Vec>(gw.data(), gw.size());
  g.tail(swv.size()) = swv;
  return g;
}

AmortizedGaussianPrior::AmortizedGaussianPrior(Eigen::Index obs_dim,
                                               Eigen::Index latent_dim)
    : obs_dim_(obs_dim), latent_dim_(latent_dim) {
  if (obs_dim < 1 || latent_dim < 1) throw ConfigError("bad encoder dimensions");
  phi_ = Vec::Zero(2 * latent_dim * obs_dim + 2 * latent_dim);
}

void AmortizedGaussianPrior::set_params(const Vec& phi) {
  if (phi.size() != phi_.size()) throw ConfigError("bad encoder parameter length");
  phi_ = phi;
}

namespace {
struct EncoderView {
  Eigen::Map<const Mat> wm;
  Eigen::Map<const Vec> bm;
  Eigen::Map<const Mat> ws;
  Eigen::Map<const Vec> bs;
};

EncoderView view(const Vec& phi, Eigen::Index d, Eigen::Index l) {
  const double* p = phi.data();
  return {Eigen::Map<const Mat>(p, l, d), Eigen::Map<const Vec>(p + l * d, l),
          Eigen::Map<const Mat>(p + l * d + l, l, d),
          Eigen::Map<const Vec>(p + 2 * l * d + l, l)};
}
}  // namespace

Vec AmortizedGaussianPrior::encode_mean(const Vec& x) const {
  const auto v = view(phi_, obs_dim_, latent_dim_);
  return v.wm * x + v.bm;
}

Vec AmortizedGaussianPrior::encode_sigma(const Vec& x) const {
  const auto v = view(phi_, obs_dim_, latent_dim_);
  const Vec raw = v.ws * x + v.bs;
  Vec s(raw.size());
  for (Eigen::Index j = 0; j < raw.size(); ++j)
    s[j] = softplus(raw[j]) + kSigmaFloor;
  return s;
}

AmortizedGaussianPrior::BoundPrior::BoundPrior(const AmortizedGaussianPrior& enc,
                                               Vec x)
    : enc_(&enc), x_(std::move(x)) {
  if (x_.size() != enc.obs_dim())
    throw ConfigError("observation does not match encoder input size");
  const auto v = view(enc.phi_, enc.obs_dim_, enc.latent_dim_);
  mu_ = v.wm * x_ + v.bm;
  raw_ = v.ws * x_ + v.bs;
  sigma_ = Vec(raw_.size());
  for (Eigen::Index j = 0; j < raw_.size(); ++j)
    sigma_[j] = softplus(raw_[j]) + kSigmaFloor;
}

Eigen::Index AmortizedGaussianPrior::BoundPrior::latent_dim() const {
  return enc_->latent_dim();
}

Eigen::Index AmortizedGaussianPrior::BoundPrior::param_dim() const {
  return enc_->param_dim();
}

Vec AmortizedGaussianPrior::BoundPrior::sample(const Vec& noise) const {
  return mu_.array() + sigma_.array() * noise.array();
}

double AmortizedGaussianPrior::BoundPrior::log_density(const Vec& z) const {
  return diag_gaussian_log_density(z, mu_, sigma_.array().square());
}

Vec AmortizedGaussianPrior::BoundPrior::grad_z_log_density(const Vec& z) const {
  return -(z - mu_).array() / sigma_.array().square();
}

void AmortizedGaussianPrior::BoundPrior::add_vjp_sample(const Vec& noise,
                                                        const Vec& cotangent,
                                                        Vec& grad_phi) const {
  const Eigen::Index d = enc_->obs_dim_, l = enc_->latent_dim_;
  // z = mu + sigma .* noise; d sigma / d raw = sigmoid(raw)
  Vec dsig(l);
  for (Eigen::Index j = 0; j < l; ++j)
    dsig[j] = cotangent[j] * noise[j] * sigmoid(raw_[j]);
  Eigen::Map<Mat>(grad_phi.data(), l, d) += cotangent * x_.transpose();
  Eigen::Map<Vec>(grad_phi.data() + l * d, l) += cotangent;
  Eigen::Map<Mat>(grad_phi.data() + l * d + l, l, d) += dsig * x_.transpose();
  Eigen::Map<Vec>(grad_phi.data() + 2 * l * d + l, l) += dsig;
}

void AmortizedGaussianPrior::BoundPrior::add_grad_params_log_density(
    const Vec& z, double coeff, Vec& grad_phi) const {
  const Eigen::Index d = enc_->obs_dim_, l = enc_->latent_dim_;
  Vec dmu(l), dsig(l);
  for (Eigen::Index j = 0; j < l; ++j) {
    const double s = sigma_[j];
    const double r = z[j] - mu_[j];
    dmu[j] = coeff * r / (s * s);
    dsig[j] = coeff * (r * r / (s * s * s) - 1.0 / s) * sigmoid(raw_[j]);
  }
  Eigen::Map<Mat>(grad_phi.data(), l, d) += dmu * x_.transpose();
  Eigen::Map<Vec>(grad_phi.data() + l * d, l) += dmu;
  Eigen::Map<Mat>(grad_phi.data() + l * d + l, l, d) += dsig * x_.transpose();
  Eigen::Map<Vec>(grad_phi.data() + 2 * l * d + l, l) += dsig;
}

}  // namespace hvi
