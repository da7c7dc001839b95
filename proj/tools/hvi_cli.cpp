// Benchmark harness CLI. Talks to the library exclusively through the C API
// in hvi/hvi.h, the same surface external consumers link against.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hvi/hvi.h"

namespace {

struct DatasetDeleter {
  void operator()(hvi_dataset* d) const { hvi_dataset_free(d); }
};
using DatasetPtr = std::unique_ptr<hvi_dataset, DatasetDeleter>;

struct ResultDeleter {
  void operator()(hvi_train_result* r) const { hvi_train_result_free(r); }
};
using ResultPtr = std::unique_ptr<hvi_train_result, ResultDeleter>;

[[noreturn]] void fail(hvi_status status, const std::string& where) {
  std::fprintf(stderr, "error: %s (%s): %s\n", where.c_str(),
               hvi_status_name(status), hvi_last_error_message());
  std::exit(1);
}

void check(hvi_status status, const std::string& where) {
  if (status != HVI_OK) fail(status, where);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Config files are plain `key = value` lines with '#' comments. Values are
// injected as defaults ahead of the real command line, so explicit flags
// override file values. Multi-token values expand to repeated occurrences.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string config_path;
  std::vector<std::string> out;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      ++i;
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (config_path.empty()) return out;

  std::ifstream in(config_path);
  if (!in) {
    std::fprintf(stderr, "error: cannot open config file %s\n",
                 config_path.c_str());
    std::exit(1);
  }
  std::vector<std::string> injected;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) continue;
    const std::string flag = "--" + key;
    bool given = false;
    for (const auto& a : out)
      if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
    if (given) continue;
    std::stringstream tokens(value);
    std::string token;
    while (tokens >> token) {
      injected.push_back(flag);
      injected.push_back(token);
    }
  }
  // config-derived defaults go right after the subcommand name
  if (!out.empty()) {
    std::vector<std::string> merged;
    merged.push_back(out.front());
    merged.insert(merged.end(), injected.begin(), injected.end());
    merged.insert(merged.end(), out.begin() + 1, out.end());
    return merged;
  }
  return out;
}

struct CommonFlags {
  int dim = 5;
  int n = 10000;
  std::uint64_t seed = 1;
  std::string method = "hvae";
  int K = 10;
  std::string tempering = "fixed";
  double beta0 = 0.5;
  double xi = 0.5;
  double eps = 0.05;
  double lr = 1e-3;
  int epochs = 20000;
  int patience = -1;
  int mc_samples = 1;
  std::string optimizer = "rmsprop";
  std::string out = ".";
  std::string data_path;
};

void add_model_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--dim", f.dim, "latent/observation dimension");
  cmd->add_option("--n", f.n, "number of observations");
  cmd->add_option("--seed", f.seed, "RNG seed");
}

void add_train_flags(CLI::App* cmd, CommonFlags& f, bool scalar_method = true) {
  if (scalar_method)
    cmd->add_option("--method", f.method,
                    "hvae | hvae-fixed | hvae-free | hvae-none | vb | vb-analytic | nf");
  cmd->add_option("--K", f.K, "leapfrog steps (and planar-flow iterations)");
  cmd->add_option("--tempering", f.tempering, "fixed | free | none");
  cmd->add_option("--beta0", f.beta0, "initial inverse temperature");
  cmd->add_option("--xi", f.xi, "leapfrog step-size cap");
  cmd->add_option("--eps", f.eps, "initial leapfrog step size");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--epochs", f.epochs, "maximum training epochs");
  cmd->add_option("--patience", f.patience,
                  "early-stopping patience in epochs (-1 disables)");
  cmd->add_option("--mc-samples", f.mc_samples, "estimator draws per step");
  cmd->add_option("--optimizer", f.optimizer, "rmsprop | adamax");
}

hvi_tempering tempering_from(const std::string& s) {
  if (s == "fixed") return HVI_TEMPERING_FIXED;
  if (s == "free") return HVI_TEMPERING_FREE;
  if (s == "none") return HVI_TEMPERING_NONE;
  std::fprintf(stderr, "error: unknown tempering '%s'\n", s.c_str());
  std::exit(1);
}

hvi_train_options train_options_from(const CommonFlags& f) {
  hvi_train_options o;
  hvi_train_options_init(&o);
  if (f.method.rfind("hvae", 0) == 0)
    o.method = HVI_METHOD_HVAE;
  else if (f.method.rfind("vb", 0) == 0)
    o.method = HVI_METHOD_VB;
  else if (f.method == "nf")
    o.method = HVI_METHOD_NF;
  else {
    std::fprintf(stderr, "error: unknown method '%s'\n", f.method.c_str());
    std::exit(1);
  }
  o.tempering = tempering_from(f.tempering);
  if (f.method == "hvae-fixed") o.tempering = HVI_TEMPERING_FIXED;
  if (f.method == "hvae-free") o.tempering = HVI_TEMPERING_FREE;
  if (f.method == "hvae-none") o.tempering = HVI_TEMPERING_NONE;
  o.vb_analytic = f.method == "vb-analytic" ? 1 : 0;
  o.flow_steps = f.K;
  o.beta0 = f.beta0;
  o.xi = f.xi;
  o.eps_init = f.eps;
  o.mc_samples = f.mc_samples;
  o.learning_rate = f.lr;
  o.max_epochs = f.epochs;
  o.patience = f.patience;
  o.optimizer =
      f.optimizer == "adamax" ? HVI_OPTIMIZER_ADAMAX : HVI_OPTIMIZER_RMSPROP;
  o.seed = f.seed;
  return o;
}

DatasetPtr obtain_dataset(const CommonFlags& f) {
  hvi_dataset* raw = nullptr;
  if (!f.data_path.empty()) {
    if (ends_with(f.data_path, ".bin"))
      check(hvi_dataset_load_binary(f.data_path.c_str(), &raw), "load dataset");
    else
      check(hvi_dataset_load_csv(f.data_path.c_str(), &raw), "load dataset");
  } else {
    check(hvi_dataset_generate(f.dim, f.n, f.seed, &raw), "generate dataset");
  }
  return DatasetPtr(raw);
}

int cmd_gen(const CommonFlags& f) {
  DatasetPtr data = obtain_dataset(f);
  const std::string path = f.out;
  if (ends_with(path, ".bin"))
    check(hvi_dataset_save_binary(data.get(), path.c_str()), "save dataset");
  else
    check(hvi_dataset_save_csv(data.get(), path.c_str()), "save dataset");
  std::printf("wrote %d x %d dataset to %s\n", hvi_dataset_rows(data.get()),
              hvi_dataset_dim(data.get()), path.c_str());
  return 0;
}

int cmd_train(const CommonFlags& f) {
  DatasetPtr data = obtain_dataset(f);
  const int d = hvi_dataset_dim(data.get());
  const hvi_train_options opts = train_options_from(f);

  hvi_train_result* raw = nullptr;
  check(hvi_train_gaussian(data.get(), &opts, &raw), "train");
  ResultPtr result(raw);

  std::vector<double> delta(d), sigma_sq(d), true_delta(d), true_sigma_sq(d);
  check(hvi_train_result_theta(result.get(), delta.data(), sigma_sq.data()),
        "read theta");
  check(hvi_gaussian_true_params(d, true_delta.data(), true_sigma_sq.data()),
        "true params");
  double err = 0.0;
  for (int j = 0; j < d; ++j) {
    const double de = delta[j] - true_delta[j];
    const double se = sigma_sq[j] - true_sigma_sq[j];
    err += de * de + se * se;
  }
  double exact = 0.0;
  check(hvi_gaussian_exact_log_marginal(data.get(), delta.data(),
                                        sigma_sq.data(), &exact),
        "exact marginal");

  std::filesystem::create_directories(f.out);
  const std::string trace_path = f.out + "/trace.csv";
  const std::string ck_path = f.out + "/checkpoint.hvck";
  check(hvi_train_result_write_trace_csv(result.get(), trace_path.c_str()),
        "write trace");
  check(hvi_train_result_save_checkpoint(result.get(), ck_path.c_str()),
        "write checkpoint");

  std::printf("method=%s d=%d epochs=%d final_elbo=%.6f exact_log_marginal=%.6f "
              "theta_err_sq=%.6f\n",
              f.method.c_str(), d, hvi_train_result_epochs(result.get()),
              hvi_train_result_final_elbo(result.get()), exact, err);
  std::printf("wrote %s and %s\n", trace_path.c_str(), ck_path.c_str());
  return 0;
}

int cmd_sweep(const CommonFlags& f, const std::vector<int>& dims,
              const std::vector<std::string>& methods, int runs) {
  hvi_sweep_options opts;
  hvi_sweep_options_init(&opts);
  std::vector<int32_t> dims32(dims.begin(), dims.end());
  if (!dims32.empty()) {
    opts.dims = dims32.data();
    opts.n_dims = static_cast<int32_t>(dims32.size());
  }
  std::vector<const char*> method_ptrs;
  for (const auto& m : methods) method_ptrs.push_back(m.c_str());
  if (!method_ptrs.empty()) {
    opts.methods = method_ptrs.data();
    opts.n_methods = static_cast<int32_t>(method_ptrs.size());
  }
  opts.runs = runs;
  opts.n = f.n;
  opts.seed = f.seed;
  opts.train = train_options_from(f);
  check(hvi_sweep_run(&opts, f.out.c_str()), "sweep");
  std::printf("wrote %s/results.csv and %s/aggregate.csv\n", f.out.c_str(),
              f.out.c_str());
  return 0;
}

int cmd_eval_nll(const CommonFlags& f, const std::string& proposal, int samples) {
  DatasetPtr data = obtain_dataset(f);
  const int d = hvi_dataset_dim(data.get());
  std::vector<double> delta(d), sigma_sq(d);
  check(hvi_gaussian_true_params(d, delta.data(), sigma_sq.data()), "true params");

  hvi_proposal prop = HVI_PROPOSAL_PRIOR;
  if (proposal == "posterior")
    prop = HVI_PROPOSAL_EXACT_POSTERIOR;
  else if (proposal == "flow")
    prop = HVI_PROPOSAL_FLOW;
  else if (proposal != "prior") {
    std::fprintf(stderr, "error: unknown proposal '%s'\n", proposal.c_str());
    return 1;
  }
  hvi_flow_options flow;
  hvi_flow_options_init(&flow);
  flow.steps = f.K;
  flow.tempering = tempering_from(f.tempering);
  flow.beta0 = f.beta0;
  flow.xi = f.xi;
  flow.eps = f.eps;

  double nll = 0.0, exact = 0.0;
  check(hvi_eval_nll(data.get(), delta.data(), sigma_sq.data(), prop, &flow,
                     samples, f.seed, &nll),
        "eval-nll");
  check(hvi_gaussian_exact_log_marginal(data.get(), delta.data(),
                                        sigma_sq.data(), &exact),
        "exact marginal");
  std::printf("proposal=%s samples=%d nll=%.6f exact_nll=%.6f\n",
              proposal.c_str(), samples, nll, -exact);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hamiltonian variational inference benchmark harness"};
  app.require_subcommand(1);

  CommonFlags f;
  std::vector<int> sweep_dims;
  std::vector<std::string> sweep_methods;
  int runs = 10;
  std::string proposal = "prior";
  int nll_samples = 1000;
  std::string plot_in, plot_out = "fig.svg";

  std::string config_path;  // handled by expand_config before parsing

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  add_model_flags(gen, f);
  gen->add_option("--out", f.out, "output file (.csv or .bin)")->required();
  gen->add_option("--config", config_path, "key = value config file");

  auto* train = app.add_subcommand("train", "train one method on one dataset");
  add_model_flags(train, f);
  add_train_flags(train, f);
  train->add_option("--data", f.data_path, "dataset file instead of synthetic");
  train->add_option("--out", f.out, "output directory");
  train->add_option("--config", config_path, "key = value config file");

  auto* sweep = app.add_subcommand("sweep", "multi-method multi-dimension study");
  sweep->add_option("--n", f.n, "number of observations");
  sweep->add_option("--seed", f.seed, "RNG seed base");
  add_train_flags(sweep, f, /*scalar_method=*/false);
  sweep->add_option("--dim", sweep_dims, "dimension grid (default 1 5 11 21)")
      ->take_all();
  sweep->add_option("--method", sweep_methods,
                    "method tokens (default hvae-fixed hvae-none vb nf)")
      ->take_all();
  sweep->add_option("--runs", runs, "runs per cell");
  sweep->add_option("--out", f.out, "output directory");
  sweep->add_option("--config", config_path, "key = value config file");

  auto* nll = app.add_subcommand("eval-nll", "importance-sampled NLL estimate");
  add_model_flags(nll, f);
  nll->add_option("--data", f.data_path, "dataset file instead of synthetic");
  nll->add_option("--proposal", proposal, "prior | posterior | flow");
  nll->add_option("--samples", nll_samples, "importance samples");
  nll->add_option("--K", f.K, "flow steps (proposal=flow)");
  nll->add_option("--tempering", f.tempering, "fixed | free | none");
  nll->add_option("--beta0", f.beta0, "inverse temperature");
  nll->add_option("--xi", f.xi, "step-size cap");
  nll->add_option("--eps", f.eps, "leapfrog step size");
  nll->add_option("--config", config_path, "key = value config file");

  auto* plot = app.add_subcommand("plot", "render an aggregate CSV as SVG");
  plot->add_option("--in", plot_in, "aggregate.csv path")->required();
  plot->add_option("--out", plot_out, "output SVG path");
  plot->add_option("--config", config_path, "key = value config file");

  std::vector<std::string> args(argv + 1, argv + argc);
  args = expand_config(args);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (gen->parsed()) return cmd_gen(f);
  if (train->parsed()) return cmd_train(f);
  if (sweep->parsed()) return cmd_sweep(f, sweep_dims, sweep_methods, runs);
  if (nll->parsed()) return cmd_eval_nll(f, proposal, nll_samples);
  if (plot->parsed()) {
    check(hvi_emit_plot(plot_in.c_str(), plot_out.c_str()), "plot");
    std::printf("wrote %s\n", plot_out.c_str());
    return 0;
  }
  return 0;
}
