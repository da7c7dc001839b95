#ifndef HVI_TRAINER_HPP
#define HVI_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hvi/adjoint.hpp"
#include "hvi/bernoulli_model.hpp"
#include "hvi/estimators.hpp"
#include "hvi/optimizer.hpp"

namespace hvi {

enum class Method { Hvae, Vb, Nf };

struct MethodConfig {
  Method method = Method::Hvae;
  TemperingKind tempering = TemperingKind::Fixed;  // HVAE only
  int flow_steps = 10;
  double beta0_init = 0.5;
  double xi = 0.5;
  double eps_init = 0.05;
  int nf_iterations = -1;  // -1: match flow_steps
  int mc_samples = 1;      // estimator draws per gradient step
  int eval_draws = 8;      // draws per trace evaluation
  // Closed-form expected-ELBO gradients for VB on the conjugate Gaussian
  // model (exact Rao-Blackwellization); the stochastic path is the default.
  bool vb_analytic = false;
};

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::RmsProp;
  double learning_rate = 1e-3;
  int max_epochs = 20000;
  int patience = -1;  // epochs without validation improvement; -1 disables
  int batch_size = 64;
  // per-datapoint-latent problems hold out this fraction of rows; the
  // global-latent benchmark problem trains on full-batch statistics and
  // ignores it
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
  double rel_tol = 1e-8;  // relative-change alternative stop; 0 disables
  bool return_best = true;
  // Polyak averaging over the trailing fraction of the epoch budget; a
  // fixed-rate optimizer orbits the optimum at a learning-rate-sized limit
  // cycle, and the tail mean sits at the cycle center. 0 disables.
  double tail_average_fraction = 0.0;
};

struct TraceRow {
  int epoch = 0;
  double train_elbo = 0.0;
  double val_elbo = 0.0;
  double wall_ms = 0.0;
};

/// A maximization problem presented as stochastic gradient estimates over a
/// flat unconstrained parameter vector.
struct StochasticObjective {
  Eigen::Index n_params = 0;
  int steps_per_epoch = 1;
  /// One ascent step's (minibatch-averaged) estimate and gradient.
  std::function<double(const Vec& raw, SplitMix64& rng, Vec& grad)> sample_grad;
  /// Trace evaluation; deterministic for conjugate closed forms.
  std::function<double(const Vec& raw, SplitMix64& rng)> eval_train;
  /// Validation evaluation; empty means reuse the train metric.
  std::function<double(const Vec& raw, SplitMix64& rng)> eval_validation;
  /// Applied after each optimizer update (e.g. feasibility reprojection).
  std::function<void(Vec& raw)> post_update;
};

struct TrainResult {
  Vec params_final;
  Vec params_best;
  Vec params_avg;  // trailing average; equals params_final when disabled
  int best_epoch = 0;
  int epochs_run = 0;
  double final_elbo = 0.0;  // validation metric at the returned parameters
  bool aborted = false;
  std::string message;
  std::vector<TraceRow> trace;
  OptimizerState optimizer;

  const Vec& params() const { return params_best; }
};

/// Minibatch stochastic gradient ascent with optional early stopping and a
/// relative-change stop. Deterministic given the config seed.
TrainResult train(const StochasticObjective& objective, const Vec& init,
                  const TrainConfig& cfg);

/// First 1-based epoch at which training should stop for this validation
/// trace (maximizing), or -1 to continue. Stops once the best value has not
/// improved for max(patience, 1) consecutive epochs; patience < 0 never stops.
int early_stop_epoch(const std::vector<double>& validation_trace, int patience);

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

// -- problem factories --------------------------------------------------------

/// The benchmark study's training problem: one global latent, full-batch
/// sufficient statistics, theta raw layout [delta; log sigma_sq] followed by
/// the method's variational block.
struct GaussianProblem {
  StochasticObjective objective;
  Vec init;
  Eigen::Index dim = 0;
  MethodConfig method;

  GaussianModelParams theta_of(const Vec& raw) const;
  Vec variational_of(const Vec& raw) const;
};

GaussianProblem make_gaussian_problem(const Dataset& data,
                                      const MethodConfig& method,
                                      const TrainConfig& cfg);

/// Per-datapoint latent with an amortized Gaussian prior and the affine
/// Bernoulli decoder; exercises the minibatch path. Raw layout
/// [decoder theta; flow phi; encoder phi].
struct BernoulliProblem {
  StochasticObjective objective;
  Vec init;
  Eigen::Index obs_dim = 0;
  Eigen::Index latent_dim = 0;
  MethodConfig method;

  BernoulliDecoderParams theta_of(const Vec& raw) const;
  Vec encoder_of(const Vec& raw) const;
  FlowPhi flow_of(const Vec& raw) const;
};

BernoulliProblem make_bernoulli_problem(const Dataset& data,
                                        Eigen::Index latent_dim,
                                        const MethodConfig& method,
                                        const TrainConfig& cfg);

// -- checkpointing ------------------------------------------------------------

/// Versioned binary checkpoint: magic "HVCK1", model/method tags, the flat
/// raw parameter vector, and the optimizer accumulators.
struct Checkpoint {
  std::uint32_t model_kind = 0;  // 0 gaussian, 1 bernoulli
  std::uint32_t method = 0;
  std::uint32_t dim = 0;
  std::uint32_t latent_dim = 0;
  Vec raw_params;
  OptimizerState optimizer;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hvi

#endif  // HVI_TRAINER_HPP
