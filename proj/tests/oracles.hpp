// Independent oracles used by the test suites: adaptive quadrature, naive
// row-sum densities, and finite-difference Jacobian determinants. These stay
// free of the library's own evaluation paths.
#ifndef HVI_TESTS_ORACLES_HPP
#define HVI_TESTS_ORACLES_HPP

#include <cmath>
#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

#include "hvi/dataset.hpp"
#include "hvi/gaussian_model.hpp"
#include "hvi/model.hpp"

namespace hvi_tests {

using hvi::Vec;

inline double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f,
                                   double a, double b, double fa, double fm,
                                   double fb, double whole, double tol,
                                   int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double tol = 1e-12, int depth = 40) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb),
                              tol, depth);
}

// Naive per-row Gaussian log joint, the independent re-implementation
// against which the sufficient-statistics path is checked.
inline double row_sum_log_joint(const hvi::GaussianModelParams& params,
                                const hvi::Dataset& data, const Vec& z) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const Vec x = data.row(i);
    for (Eigen::Index j = 0; j < data.dim(); ++j) {
      const double r = x[j] - z[j] - params.delta[j];
      acc += -0.5 * (hvi::kLog2Pi + std::log(params.sigma_sq[j])) -
             0.5 * r * r / params.sigma_sq[j];
    }
  }
  for (Eigen::Index j = 0; j < z.size(); ++j)
    acc += -0.5 * hvi::kLog2Pi - 0.5 * z[j] * z[j];
  return acc;
}

// log integral of exp(log_f) over [lo, hi] by quadrature with max-shifting.
inline double log_quadrature(const std::function<double(double)>& log_f,
                             double lo, double hi, double shift,
                             double tol = 1e-13) {
  const auto f = [&](double z) { return std::exp(log_f(z) - shift); };
  const double integral = adaptive_simpson(f, lo, hi, tol);
  return shift + std::log(integral);
}

// 1-D quadrature oracle for the Gaussian model's log marginal.
inline double quadrature_log_marginal_1d(const hvi::GaussianModelParams& params,
                                         const hvi::Dataset& data) {
  if (data.dim() != 1) throw std::invalid_argument("1-D oracle");
  const auto post = hvi::gaussian_exact_posterior(params, data);
  const double center = post.mean[0];
  const double width = 14.0 * std::sqrt(post.var[0]);
  const auto log_f = [&](double z) {
    Vec zv(1);
    zv[0] = z;
    return row_sum_log_joint(params, data, zv);
  };
  return log_quadrature(log_f, center - width, center + width, log_f(center));
}

// Finite-difference Jacobian determinant of a phase-space map R^{2l} -> R^{2l}.
inline double fd_jacobian_det(const std::function<Vec(const Vec&)>& map,
                              const Vec& at, double h = 1e-6) {
  const Eigen::Index n = at.size();
  Eigen::MatrixXd jac(n, n);
  Vec x = at;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double xj = x[j];
    x[j] = xj + h;
    const Vec up = map(x);
    x[j] = xj - h;
    const Vec down = map(x);
    x[j] = xj;
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac.determinant();
}

// Quadratic potential U(z) = z'Az/2 with diagonal A and no parameters; the
// simplest smooth target for flow mechanics tests.
class QuadraticTarget final : public hvi::TargetModel {
 public:
  explicit QuadraticTarget(Vec curvature) : a_(std::move(curvature)) {}

  Eigen::Index latent_dim() const override { return a_.size(); }
  Eigen::Index param_dim() const override { return 0; }
  double log_joint(const Vec&, const Vec& z) const override {
    return -0.5 * (a_.array() * z.array().square()).sum();
  }
  Vec grad_z(const Vec&, const Vec& z) const override {
    return -(a_.array() * z.array()).matrix();
  }
  Vec grad_theta(const Vec&, const Vec&) const override { return Vec(0); }
  Vec hess_u_vec(const Vec&, const Vec&, const Vec& v) const override {
    return (a_.array() * v.array()).matrix();
  }
  Vec grad_theta_of_grad_u_dot(const Vec&, const Vec&, const Vec&) const override {
    return Vec(0);
  }

 private:
  Vec a_;
};

// Relative closeness with an absolute floor, the comparison used by the
// gradient-fidelity checks.
inline bool close_rel(double a, double b, double rtol, double atol) {
  return std::abs(a - b) <= std::max(atol, rtol * std::max(std::abs(a), std::abs(b)));
}

}  // namespace hvi_tests

#endif  // HVI_TESTS_ORACLES_HPP
