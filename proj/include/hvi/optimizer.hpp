#ifndef HVI_OPTIMIZER_HPP
#define HVI_OPTIMIZER_HPP

#include "hvi/common.hpp"

namespace hvi {

enum class OptimizerKind { RmsProp, Adamax };

/// Per-parameter accumulator state for gradient-ascent updates.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::RmsProp;
  double learning_rate = 1e-3;
  int step_count = 0;

  // RMSProp
  double decay = 0.9;
  double stabilizer = 1e-8;
  Vec sq_ema;

  // Adamax
  double beta1 = 0.9;
  double beta2 = 0.999;
  Vec m_ema;
  Vec u_inf;

  static OptimizerState rmsprop(Eigen::Index n, double lr, double decay = 0.9,
                                double stabilizer = 1e-8);
  static OptimizerState adamax(Eigen::Index n, double lr, double beta1 = 0.9,
                               double beta2 = 0.999);
};

/// s <- decay s + (1-decay) g^2;  params += lr g / (sqrt(s) + stabilizer).
void rmsprop_step(OptimizerState& state, Vec& params, const Vec& grad);

/// m <- b1 m + (1-b1) g;  u <- max(b2 u, |g|);
/// params += lr/(1-b1^t) m/u (update 0 where u = 0).
void adamax_step(OptimizerState& state, Vec& params, const Vec& grad);

void optimizer_step(OptimizerState& state, Vec& params, const Vec& grad);

}  // namespace hvi

#endif  // HVI_OPTIMIZER_HPP
