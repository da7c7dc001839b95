#ifndef HVI_BENCH_HPP
#define HVI_BENCH_HPP

#include "hvi/trainer.hpp"

namespace hvi {

struct MethodSpec {
  std::string name;
  MethodConfig config;
};

/// Recognized tokens: hvae (tempering from base), hvae-fixed, hvae-free,
/// hvae-none, vb, vb-analytic, nf. Other fields copy from base.
MethodSpec make_method_spec(const std::string& token, const MethodConfig& base);

struct ExperimentSpec {
  std::vector<int> dims = {1, 5, 11, 21};
  std::vector<MethodSpec> methods;
  int runs = 10;
  int n = 10000;
  std::uint64_t seed_base = 1;
  std::string out_dir;  // empty: no files written
  TrainConfig train;

  void validate() const;
};

struct ResultRow {
  std::string method;
  int d = 0;
  std::uint64_t seed = 0;
  double theta_err_sq = 0.0;
  double delta_err_sq = 0.0;
  double sigma_sq_err_sq = 0.0;
  double final_elbo = 0.0;
  int epochs = 0;
  double wall_ms = 0.0;
  std::string status = "ok";
};

struct AggregateRow {
  std::string method;
  int d = 0;
  int runs = 0;
  double mean_theta_err_sq = 0.0;
  double sd_theta_err_sq = 0.0;
};

/// One dataset of the benchmark generative model: a single z ~ N(0, I_d),
/// then n rows x_i ~ N(z + delta, Sigma) at the true parameters for d.
/// Deterministic per seed. z_out, when given, receives the latent draw.
Dataset generate_dataset(Eigen::Index d, Eigen::Index n, std::uint64_t seed,
                         Vec* z_out = nullptr);

/// Trains every (method, d, run) cell. Datasets are keyed by (seed_base, d,
/// run) so methods at the same cell coordinates see the same data; training
/// streams are keyed by (seed_base, method, d, run). Cells run on a work
/// pool capped by HVI_THREADS; failures are recorded in the status column
/// and do not abort the sweep. Writes results.csv and aggregate.csv under
/// out_dir when set.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

std::vector<AggregateRow> aggregate_results(const std::vector<ResultRow>& rows);

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);
void write_aggregate_csv(const std::string& path,
                         const std::vector<AggregateRow>& rows);
std::vector<AggregateRow> load_aggregate_csv(const std::string& path);

/// Error-vs-dimension line chart, one polyline per method, written as a
/// standalone SVG. Empty input is a warning no-op.
void emit_plot(const std::string& aggregate_csv, const std::string& svg_path);

/// Work-pool width: HVI_THREADS when set, else hardware concurrency.
int thread_pool_size();

}  // namespace hvi

#endif  // HVI_BENCH_HPP
