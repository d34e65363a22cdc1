#include "tlsuff.h"

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include "tlsuff/glm.hpp"
#include "tlsuff/io.hpp"
#include "tlsuff/mc_harness.hpp"
#include "tlsuff/simgen.hpp"
#include "tlsuff/suff_test.hpp"

namespace {

thread_local std::string g_last_error;

tls_status status_of(const tlsuff::Error& e) {
  switch (e.kind()) {
    case tlsuff::Error::Kind::usage:
      return TLS_ERR_USAGE;
    case tlsuff::Error::Kind::data:
      return TLS_ERR_DATA;
    case tlsuff::Error::Kind::numeric:
      return TLS_ERR_NUMERIC;
  }
  return TLS_ERR_USAGE;
}

template <typename Fn>
tls_status guard(Fn&& fn) {
  try {
    fn();
    return TLS_OK;
  } catch (const tlsuff::Error& e) {
    g_last_error = e.what();
    return status_of(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TLS_ERR_NUMERIC;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw tlsuff::ConfigError(std::string("null argument: ") + what);
}

tlsuff::FitOptions to_cpp(const tls_fit_options* opts) {
  tlsuff::FitOptions o;
  if (opts == nullptr) return o;
  o.grad_tol = opts->grad_tol;
  o.rel_tol = opts->rel_tol;
  o.max_iter = opts->max_iter;
  o.ridge = opts->ridge;
  o.solver = opts->solver == 1   ? tlsuff::Solver::exact_newton
             : opts->solver == 2 ? tlsuff::Solver::lbfgs
                                 : tlsuff::Solver::automatic;
  o.dense_hessian_cap = opts->dense_hessian_cap;
  return o;
}

// Desk-scale guard for tls_simulate_file without allow_full.
void check_desk_scale(const tlsuff::ExperimentConfig& c) {
  if (c.N > 200000 || c.p > 1000 || c.n > 2000 || c.B_reps > 1000) {
    throw tlsuff::ConfigError(
        "config exceeds desk scale (N <= 200000, p <= 1000, n <= 2000, "
        "B_reps <= 1000); pass --full to run anyway (expect long runtimes)");
  }
}

}  // namespace

struct tls_target_data {
  tlsuff::TargetDataset data;
};
struct tls_source_data {
  tlsuff::SourceDataset data;
};
struct tls_source_model {
  tlsuff::SourceModel model;
};

extern "C" {

const char* tls_version(void) { return "0.1.0"; }

const char* tls_last_error(void) { return g_last_error.c_str(); }

void tls_fit_options_defaults(tls_fit_options* opts) {
  if (opts == nullptr) return;
  const tlsuff::FitOptions d;
  opts->grad_tol = d.grad_tol;
  opts->rel_tol = d.rel_tol;
  opts->max_iter = d.max_iter;
  opts->ridge = d.ridge;
  opts->solver = 0;
  opts->dense_hessian_cap = d.dense_hessian_cap;
}

tls_status tls_target_read_csv(const char* path, int center, tls_target_data** out) {
  return guard([&] {
    require(path != nullptr, "path");
    require(out != nullptr, "out");
    *out = new tls_target_data{tlsuff::read_target_csv(path, center != 0)};
  });
}

tls_status tls_target_from_arrays(const double* X_rowmajor, long long n, long long p,
                                  const int* y, tls_target_data** out) {
  return guard([&] {
    require(X_rowmajor != nullptr, "X_rowmajor");
    require(y != nullptr, "y");
    require(out != nullptr, "out");
    tlsuff::TargetDataset d;
    d.X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                         Eigen::RowMajor>>(X_rowmajor, n, p);
    d.y = Eigen::Map<const tlsuff::IntVector>(y, n);
    d.validate();
    *out = new tls_target_data{std::move(d)};
  });
}

tls_status tls_target_write_csv(const tls_target_data* data, const char* path) {
  return guard([&] {
    require(data != nullptr, "data");
    require(path != nullptr, "path");
    tlsuff::write_target_csv(path, data->data);
  });
}

long long tls_target_n(const tls_target_data* data) { return data->data.n(); }
long long tls_target_p(const tls_target_data* data) { return data->data.p(); }
void tls_target_free(tls_target_data* data) { delete data; }

tls_status tls_source_read_csv(const char* path, int center, tls_source_data** out) {
  return guard([&] {
    require(path != nullptr, "path");
    require(out != nullptr, "out");
    *out = new tls_source_data{tlsuff::read_source_csv(path, center != 0)};
  });
}

tls_status tls_source_from_arrays(const double* X_rowmajor, long long N, long long p,
                                  const int* y, int K, tls_source_data** out) {
  return guard([&] {
    require(X_rowmajor != nullptr, "X_rowmajor");
    require(y != nullptr, "y");
    require(out != nullptr, "out");
    tlsuff::SourceDataset d;
    d.Xs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                          Eigen::RowMajor>>(X_rowmajor, N, p);
    d.ys = Eigen::Map<const tlsuff::IntVector>(y, N);
    d.K = K;
    d.validate();
    *out = new tls_source_data{std::move(d)};
  });
}

tls_status tls_source_write_csv(const tls_source_data* data, const char* path) {
  return guard([&] {
    require(data != nullptr, "data");
    require(path != nullptr, "path");
    tlsuff::write_source_csv(path, data->data);
  });
}

long long tls_source_n(const tls_source_data* data) { return data->data.N(); }
long long tls_source_p(const tls_source_data* data) { return data->data.p(); }
int tls_source_k(const tls_source_data* data) { return data->data.K; }
void tls_source_free(tls_source_data* data) { delete data; }

tls_status tls_fit_source(const tls_source_data* data, const tls_fit_options* opts,
                          tls_source_model** out) {
  return guard([&] {
    require(data != nullptr, "data");
    require(out != nullptr, "out");
    *out = new tls_source_model{tlsuff::fit_multinomial_logistic(data->data, to_cpp(opts))};
  });
}

tls_status tls_model_read(const char* path, tls_source_model** out) {
  return guard([&] {
    require(path != nullptr, "path");
    require(out != nullptr, "out");
    *out = new tls_source_model{tlsuff::read_model(path)};
  });
}

tls_status tls_model_write(const tls_source_model* model, const char* path) {
  return guard([&] {
    require(model != nullptr, "model");
    require(path != nullptr, "path");
    tlsuff::write_model(path, model->model);
  });
}

long long tls_model_p(const tls_source_model* model) { return model->model.p(); }
long long tls_model_k(const tls_source_model* model) { return model->model.K(); }
long long tls_model_n_source(const tls_source_model* model) { return model->model.n_source; }

tls_status tls_model_coefficients(const tls_source_model* model, double* out) {
  return guard([&] {
    require(model != nullptr, "model");
    require(out != nullptr, "out");
    const tlsuff::Matrix& B = model->model.B;
    Eigen::Map<tlsuff::Matrix>(out, B.rows(), B.cols()) = B;
  });
}

void tls_model_diagnostics(const tls_source_model* model, tls_fit_diagnostics* out) {
  const tlsuff::FitDiagnostics& d = model->model.diagnostics;
  out->iterations = d.iterations;
  out->final_grad_norm = d.final_grad_norm;
  out->final_loglik = d.final_loglik;
  out->converged = d.converged ? 1 : 0;
}

void tls_model_free(tls_source_model* model) { delete model; }

tls_status tls_test_sufficiency(const tls_source_model* model, const tls_target_data* data,
                                double alpha, const tls_fit_options* opts,
                                tls_suff_result* out) {
  return guard([&] {
    require(model != nullptr, "model");
    require(data != nullptr, "data");
    require(out != nullptr, "out");
    const tlsuff::SufficiencyResult r =
        tlsuff::test_sufficiency(model->model, data->data, alpha, to_cpp(opts));
    out->n = r.n;
    out->p = r.p;
    out->K = r.K;
    out->T1 = r.T1;
    out->T2 = r.T2;
    out->trace_sigma = r.trace_sigma;
    out->trace_sigma_sq = r.trace_sigma_sq;
    out->T4 = r.T4;
    out->p_value = r.p_value;
    out->alpha = r.alpha;
    out->reject = r.reject ? 1 : 0;
  });
}

tls_status tls_suff_result_write(const tls_suff_result* result, int centered,
                                 const char* path) {
  return guard([&] {
    require(result != nullptr, "result");
    require(path != nullptr, "path");
    tlsuff::SufficiencyResult r;
    r.n = result->n;
    r.p = result->p;
    r.K = result->K;
    r.T1 = result->T1;
    r.T2 = result->T2;
    r.trace_sigma = result->trace_sigma;
    r.trace_sigma_sq = result->trace_sigma_sq;
    r.T4 = result->T4;
    r.p_value = result->p_value;
    r.alpha = result->alpha;
    r.reject = result->reject != 0;
    tlsuff::write_sufficiency_result(path, r, centered != 0);
  });
}

tls_status tls_generate(long long n, long long N, long long p, int K, double rho,
                        double delta, uint64_t seed, const char* out_dir) {
  return guard([&] {
    require(out_dir != nullptr, "out_dir");
    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    fs::create_directories(dir);

    tlsuff::GenSpec spec;
    spec.p = static_cast<int>(p);
    spec.K = K;
    spec.rho = rho;
    spec.gamma = tlsuff::default_gamma(K);
    spec.delta = delta;
    spec.base_seed = seed;
    spec.validate();

    const std::string id = "generate";
    auto coef = tlsuff::derive_stream(seed, id, 0, 0);
    const tlsuff::GroundTruth truth =
        tlsuff::gen_coefficients(spec.p, spec.K, spec.gamma, coef);

    if (N > 0) {
      auto sx = tlsuff::derive_stream(seed, id, 1, 0);
      auto sl = tlsuff::derive_stream(seed, id, 2, 0);
      const tlsuff::SourceDataset source = tlsuff::gen_source(N, spec, truth, sx, sl);
      tlsuff::write_source_csv((dir / "source.csv").string(), source);
    }
    if (n > 0) {
      auto tx = tlsuff::derive_stream(seed, id, 3, 0);
      auto tl = tlsuff::derive_stream(seed, id, 4, 0);
      const tlsuff::TargetDataset target = tlsuff::gen_target(n, spec, truth, tx, tl);
      tlsuff::write_target_csv((dir / "target.csv").string(), target);
    }
    tlsuff::write_model_csv((dir / "truth_B.csv").string(), truth.B);

    std::string theta_csv = "theta\n";
    char buf[64];
    for (Eigen::Index j = 0; j < truth.theta.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g\n", truth.theta[j]);
      theta_csv += buf;
    }
    tlsuff::atomic_write_file((dir / "truth_theta.csv").string(), theta_csv);

    const std::string meta = std::string("{\n") + "  \"schema_version\": 1,\n" +
                             "  \"n\": " + std::to_string(n) + ",\n" +
                             "  \"N\": " + std::to_string(N) + ",\n" +
                             "  \"p\": " + std::to_string(p) + ",\n" +
                             "  \"K\": " + std::to_string(K) + ",\n" +
                             "  \"rho\": " + std::to_string(rho) + ",\n" +
                             "  \"delta\": " + std::to_string(delta) + ",\n" +
                             "  \"seed\": " + std::to_string(seed) + "\n}\n";
    tlsuff::atomic_write_file((dir / "meta.json").string(), meta);
  });
}

tls_status tls_simulate_file(const char* config_path, const char* out_prefix, int threads,
                             int allow_full, int verbose) {
  return guard([&] {
    require(config_path != nullptr, "config_path");
    require(out_prefix != nullptr, "out_prefix");
    tlsuff::ExperimentConfig config = tlsuff::parse_experiment_config(config_path);
    if (allow_full == 0) {
      check_desk_scale(config);
    }
    const double ratio = static_cast<double>(config.n) * static_cast<double>(config.n) *
                         static_cast<double>(config.p) / std::max(1.0, static_cast<double>(config.N));
    if (config.kind != tlsuff::ExperimentKind::mse && ratio > 1.0) {
      std::fprintf(stderr,
                   "warning: n^2 p / N = %.3g exceeds 1; the null approximation of the "
                   "test may be inaccurate at this scale\n",
                   ratio);
    }
    tlsuff::ProgressFn progress;
    if (verbose != 0) {
      progress = [](int done, int total) {
        if (done == total || done % 25 == 0) {
          std::fprintf(stderr, "replication %d/%d\n", done, total);
        }
      };
    }
    const tlsuff::ExperimentResult result =
        tlsuff::run_experiment(config, threads, progress);
    tlsuff::write_experiment_result(out_prefix, result);
  });
}

}  // extern "C"
