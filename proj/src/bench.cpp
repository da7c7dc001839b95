#include "hvi/bench.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace hvi {

MethodSpec make_method_spec(const std::string& token, const MethodConfig& base) {
  MethodSpec spec;
  spec.name = token;
  spec.config = base;
  if (token == "hvae") {
    spec.config.method = Method::Hvae;
  } else if (token == "hvae-fixed") {
    spec.config.method = Method::Hvae;
    spec.config.tempering = TemperingKind::Fixed;
  } else if (token == "hvae-free") {
    spec.config.method = Method::Hvae;
    spec.config.tempering = TemperingKind::Free;
  } else if (token == "hvae-none") {
    spec.config.method = Method::Hvae;
    spec.config.tempering = TemperingKind::None;
  } else if (token == "vb") {
    spec.config.method = Method::Vb;
    spec.config.vb_analytic = false;
  } else if (token == "vb-analytic") {
    spec.config.method = Method::Vb;
    spec.config.vb_analytic = true;
  } else if (token == "nf") {
    spec.config.method = Method::Nf;
  } else {
    throw ConfigError("unknown method token '" + token + "'");
  }
  return spec;
}

void ExperimentSpec::validate() const {
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (dims.empty()) throw ConfigError("dims must be nonempty");
  if (methods.empty()) throw ConfigError("methods must be nonempty");
  if (n < 1) throw ConfigError("n must be >= 1");
  for (int d : dims)
    if (d < 1) throw ConfigError("dims entries must be >= 1");
}

Dataset generate_dataset(Eigen::Index d, Eigen::Index n, std::uint64_t seed,
                         Vec* z_out) {
  if (d < 1 || n < 1) throw ConfigError("dataset dimensions must be >= 1");
  const GaussianModelParams truth = make_true_params(d);
  SplitMix64 rng(derive_seed(seed, 0xda7aull));
  const Vec z = normal_vec(rng, d);
  if (z_out != nullptr) *z_out = z;
  const Vec sigma = truth.sigma_sq.array().sqrt();
  Mat rows(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      rows(i, j) = z[j] + truth.delta[j] + sigma[j] * normal(rng);
  return Dataset(std::move(rows));
}

int thread_pool_size() {
  if (const char* env = std::getenv("HVI_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace {

ResultRow run_cell(const ExperimentSpec& spec, const MethodSpec& method,
                   int cell_id, int d, int run) {
  ResultRow row;
  row.method = method.name;
  row.d = d;
  row.seed = derive_seed(spec.seed_base, static_cast<std::uint64_t>(cell_id),
                         static_cast<std::uint64_t>(run));
  const auto t0 = std::chrono::steady_clock::now();
  try {
    // Datasets are shared across methods at the same (d, run) so method
    // comparisons are paired.
    const Dataset data = generate_dataset(
        d, spec.n, derive_seed(spec.seed_base, 0xd5ull, d, run));
    TrainConfig cfg = spec.train;
    cfg.seed = row.seed;
    const GaussianProblem prob = make_gaussian_problem(data, method.config, cfg);
    const TrainResult res = train(prob.objective, prob.init, cfg);
    if (res.aborted) {
      row.status = "error: " + res.message;
      row.theta_err_sq = row.delta_err_sq = row.sigma_sq_err_sq =
          std::numeric_limits<double>::quiet_NaN();
      row.epochs = res.epochs_run;
    } else {
      const GaussianModelParams hat = prob.theta_of(res.params());
      const GaussianModelParams truth = make_true_params(d);
      row.delta_err_sq = (hat.delta - truth.delta).squaredNorm();
      row.sigma_sq_err_sq = (hat.sigma_sq - truth.sigma_sq).squaredNorm();
      row.theta_err_sq = row.delta_err_sq + row.sigma_sq_err_sq;
      row.final_elbo = res.final_elbo;
      row.epochs = res.epochs_run;
    }
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
    row.theta_err_sq = row.delta_err_sq = row.sigma_sq_err_sq =
        std::numeric_limits<double>::quiet_NaN();
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return row;
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec) {
  spec.validate();

  struct Cell {
    int method_idx, cell_id, d, run;
  };
  std::vector<Cell> cells;
  int cell_id = 0;
  for (size_t m = 0; m < spec.methods.size(); ++m)
    for (int d : spec.dims) {
      for (int run = 0; run < spec.runs; ++run)
        cells.push_back({static_cast<int>(m), cell_id, d, run});
      ++cell_id;
    }

  std::vector<ResultRow> rows(cells.size());
  const int n_threads =
      std::min<int>(thread_pool_size(), static_cast<int>(cells.size()));
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& c = cells[i];
      rows[i] = run_cell(spec, spec.methods[static_cast<size_t>(c.method_idx)],
                         c.cell_id, c.d, c.run);
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  if (!spec.out_dir.empty()) {
    std::filesystem::create_directories(spec.out_dir);
    write_results_csv(spec.out_dir + "/results.csv", rows);
    write_aggregate_csv(spec.out_dir + "/aggregate.csv", aggregate_results(rows));
  }
  return rows;
}

std::vector<AggregateRow> aggregate_results(const std::vector<ResultRow>& rows) {
  std::vector<AggregateRow> agg;
  auto find = [&](const std::string& method, int d) -> AggregateRow& {
    for (auto& a : agg)
      if (a.method == method && a.d == d) return a;
    agg.push_back({method, d, 0, 0.0, 0.0});
    return agg.back();
  };
  // two passes: means, then spread
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    auto& a = find(r.method, r.d);
    ++a.runs;
    a.mean_theta_err_sq += r.theta_err_sq;
  }
  for (auto& a : agg) a.mean_theta_err_sq /= std::max(a.runs, 1);
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    auto& a = find(r.method, r.d);
    const double dv = r.theta_err_sq - a.mean_theta_err_sq;
    a.sd_theta_err_sq += dv * dv;
  }
  for (auto& a : agg)
    a.sd_theta_err_sq =
        a.runs > 1 ? std::sqrt(a.sd_theta_err_sq / (a.runs - 1)) : 0.0;
  return agg;
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "method,d,seed,theta_err_sq,delta_err_sq,sigma_sq_err_sq,"
         "final_elbo,epochs,wall_ms,status\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.d << ',' << r.seed << ',' << r.theta_err_sq
        << ',' << r.delta_err_sq << ',' << r.sigma_sq_err_sq << ','
        << r.final_elbo << ',' << r.epochs << ',' << r.wall_ms << ','
        << r.status << '\n';
}

void write_aggregate_csv(const std::string& path,
                         const std::vector<AggregateRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "method,d,runs,mean_theta_err_sq,sd_theta_err_sq\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.d << ',' << r.runs << ',' << r.mean_theta_err_sq
        << ',' << r.sd_theta_err_sq << '\n';
}

std::vector<AggregateRow> load_aggregate_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<AggregateRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::stringstream ss(line);
    AggregateRow r;
    std::string cell;
    std::getline(ss, r.method, ',');
    std::getline(ss, cell, ',');
    r.d = std::stoi(cell);
    std::getline(ss, cell, ',');
    r.runs = std::stoi(cell);
    std::getline(ss, cell, ',');
    r.mean_theta_err_sq = std::stod(cell);
    std::getline(ss, cell, ',');
    r.sd_theta_err_sq = std::stod(cell);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace hvi
