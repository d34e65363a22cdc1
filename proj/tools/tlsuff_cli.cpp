// Command-line front end. Links only the C API.

#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "tlsuff.h"

namespace {

int fail(tls_status st) {
  std::fprintf(stderr, "error: %s\n", tls_last_error());
  return static_cast<int>(st);
}

struct FitFlags {
  tls_fit_options opts;

  FitFlags() { tls_fit_options_defaults(&opts); }

  void attach(CLI::App* cmd) {
    cmd->add_option("--grad-tol", opts.grad_tol, "Gradient sup-norm tolerance");
    cmd->add_option("--rel-tol", opts.rel_tol, "Relative log-likelihood change tolerance");
    cmd->add_option("--max-iter", opts.max_iter, "Maximum solver iterations");
    cmd->add_option("--ridge", opts.ridge, "Optional ridge stabilizer weight");
    cmd->add_option("--solver", opts.solver,
                    "Solver: 0 auto, 1 exact Newton, 2 limited-memory quasi-Newton");
    cmd->add_option("--hessian-cap", opts.dense_hessian_cap,
                    "Largest p*K fitted with a dense Newton Hessian");
  }
};

int env_threads() {
  const char* env = std::getenv("TLSUFF_THREADS");
  if (env != nullptr) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer-learning estimation and sufficiency testing for "
               "high-dimensional binary logistic models"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Export simulated source/target CSV datasets");
  long long gen_n = 200, gen_N = 2000, gen_p = 20;
  int gen_K = 4;
  double gen_rho = 0.5, gen_delta = 0.0;
  std::uint64_t gen_seed = 0;
  std::string gen_out = ".";
  gen->add_option("--n", gen_n, "Target sample size (0 to skip)");
  gen->add_option("--N", gen_N, "Source sample size (0 to skip)");
  gen->add_option("--p", gen_p, "Feature dimension")->required();
  gen->add_option("--K", gen_K, "Source class count excluding the base class");
  gen->add_option("--rho", gen_rho, "AR(1) correlation of the feature covariance");
  gen->add_option("--delta", gen_delta, "Alternative signal strength (0 = null)");
  gen->add_option("--seed", gen_seed, "Base seed");
  gen->add_option("--out", gen_out, "Output directory");

  // fit-source
  auto* fits = app.add_subcommand("fit-source", "Fit the multinomial source model from CSV");
  std::string fits_csv, fits_out = "model.csv";
  bool fits_center = false;
  FitFlags fits_flags;
  fits->add_option("source_csv", fits_csv, "Source dataset (y,x1..xp)")->required();
  fits->add_option("--out", fits_out, "Model output path (CSV + .meta.json sidecar)");
  fits->add_flag("--center", fits_center, "Center feature columns before fitting");
  fits_flags.attach(fits);

  // test
  auto* test = app.add_subcommand("test", "Run the transfer-learning sufficiency test");
  std::string test_csv, test_model, test_out;
  double test_alpha = 0.05;
  bool test_center = false;
  FitFlags test_flags;
  test->add_option("target_csv", test_csv, "Target dataset (y,x1..xp)")->required();
  test->add_option("--model", test_model, "Fitted source model CSV")->required();
  test->add_option("--alpha", test_alpha, "Significance level");
  test->add_option("--out", test_out, "Result JSON path");
  test->add_flag("--center", test_center, "Center feature columns before testing");
  test_flags.attach(test);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo experiment from a config file");
  std::string sim_config, sim_out = "experiment";
  int sim_threads = env_threads();
  bool sim_full = false, sim_quiet = false;
  sim->add_option("config", sim_config, "Flat key = value config file")->required();
  sim->add_option("--out", sim_out, "Output prefix (<prefix>.csv and <prefix>.json)");
  sim->add_option("--threads", sim_threads, "Worker threads (TLSUFF_THREADS as fallback)");
  sim->add_flag("--full", sim_full, "Allow full-scale problem sizes (long runtimes)");
  sim->add_flag("--quiet", sim_quiet, "Suppress progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (gen->parsed()) {
    const tls_status st = tls_generate(gen_n, gen_N, gen_p, gen_K, gen_rho, gen_delta,
                                       gen_seed, gen_out.c_str());
    if (st != TLS_OK) return fail(st);
    std::printf("wrote datasets under %s\n", gen_out.c_str());
    return 0;
  }

  if (fits->parsed()) {
    tls_source_data* data = nullptr;
    tls_status st = tls_source_read_csv(fits_csv.c_str(), fits_center ? 1 : 0, &data);
    if (st != TLS_OK) return fail(st);
    tls_source_model* model = nullptr;
    st = tls_fit_source(data, &fits_flags.opts, &model);
    tls_source_free(data);
    if (st != TLS_OK) return fail(st);
    st = tls_model_write(model, fits_out.c_str());
    if (st != TLS_OK) {
      tls_model_free(model);
      return fail(st);
    }
    tls_fit_diagnostics diag;
    tls_model_diagnostics(model, &diag);
    std::printf("fit source model: p=%lld K=%lld iterations=%d loglik=%.6f converged=%s\n",
                tls_model_p(model), tls_model_k(model), diag.iterations, diag.final_loglik,
                diag.converged ? "yes" : "no");
    std::printf("wrote %s\n", fits_out.c_str());
    tls_model_free(model);
    return 0;
  }

  if (test->parsed()) {
    tls_source_model* model = nullptr;
    tls_status st = tls_model_read(test_model.c_str(), &model);
    if (st != TLS_OK) return fail(st);
    tls_target_data* data = nullptr;
    st = tls_target_read_csv(test_csv.c_str(), test_center ? 1 : 0, &data);
    if (st != TLS_OK) {
      tls_model_free(model);
      return fail(st);
    }
    const long long n_source = tls_model_n_source(model);
    if (n_source > 0) {
      const double n = static_cast<double>(tls_target_n(data));
      const double ratio = n * n * static_cast<double>(tls_target_p(data)) /
                           static_cast<double>(n_source);
      if (ratio > 1.0) {
        std::fprintf(stderr,
                     "warning: n^2 p / N = %.3g exceeds 1; the null approximation of "
                     "the test may be inaccurate at this scale\n",
                     ratio);
      }
    }
    tls_suff_result r;
    st = tls_test_sufficiency(model, data, test_alpha, &test_flags.opts, &r);
    tls_target_free(data);
    tls_model_free(model);
    if (st != TLS_OK) return fail(st);
    std::printf("T4=%.6f p_value=%.6g decision=%s (alpha=%g)\n", r.T4, r.p_value,
                r.reject ? "reject transfer-learning sufficiency"
                         : "do not reject transfer-learning sufficiency",
                r.alpha);
    if (!test_out.empty()) {
      st = tls_suff_result_write(&r, test_center ? 1 : 0, test_out.c_str());
      if (st != TLS_OK) return fail(st);
    }
    return 0;
  }

  if (sim->parsed()) {
    const tls_status st = tls_simulate_file(sim_config.c_str(), sim_out.c_str(), sim_threads,
                                            sim_full ? 1 : 0, sim_quiet ? 0 : 1);
    if (st != TLS_OK) return fail(st);
    std::printf("wrote %s.csv and %s.json\n", sim_out.c_str(), sim_out.c_str());
    return 0;
  }

  return 2;
}
