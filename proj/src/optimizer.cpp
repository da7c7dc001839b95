#include "hvi/optimizer.hpp"

namespace hvi {

OptimizerState OptimizerState::rmsprop(Eigen::Index n, double lr, double decay,
                                       double stabilizer) {
  OptimizerState s;
  s.kind = OptimizerKind::RmsProp;
  s.learning_rate = lr;
  s.decay = decay;
  s.stabilizer = stabilizer;
  s.sq_ema = Vec::Zero(n);
  return s;
}

OptimizerState OptimizerState::adamax(Eigen::Index n, double lr, double beta1,
                                      double beta2) {
  OptimizerState s;
  s.kind = OptimizerKind::Adamax;
  s.learning_rate = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.m_ema = Vec::Zero(n);
  s.u_inf = Vec::Zero(n);
  return s;
}

void rmsprop_step(OptimizerState& state, Vec& params, const Vec& grad) {
  if (params.size() != grad.size() || params.size() != state.sq_ema.size())
    throw ConfigError("optimizer shapes do not match");
  ++state.step_count;
  state.sq_ema = state.decay * state.sq_ema +
                 (1.0 - state.decay) * grad.array().square().matrix();
  params.array() += state.learning_rate * grad.array() /
                    (state.sq_ema.array().sqrt() + state.stabilizer);
}

void adamax_step(OptimizerState& state, Vec& params, const Vec& grad) {
  if (params.size() != grad.size() || params.size() != state.m_ema.size())
    throw ConfigError("optimizer shapes do not match");
  ++state.step_count;
  state.m_ema = state.beta1 * state.m_ema + (1.0 - state.beta1) * grad;
  state.u_inf = (state.beta2 * state.u_inf.array()).max(grad.array().abs());
  const double scale =
      state.learning_rate / (1.0 - std::pow(state.beta1, state.step_count));
  for (Eigen::Index j = 0; j < params.size(); ++j) {
    if (state.u_inf[j] > 0.0)
      params[j] += scale * state.m_ema[j] / state.u_inf[j];
  }
}

void optimizer_step(OptimizerState& state, Vec& params, const Vec& grad) {
  if (state.kind == OptimizerKind::RmsProp)
    rmsprop_step(state, params, grad);
  else
    adamax_step(state, params, grad);
}

}  // namespace hvi
