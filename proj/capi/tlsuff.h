/* C API for the transfer-learning sufficiency library.
 *
 * All functions return a tls_status; any non-TLS_OK status leaves a
 * human-readable message retrievable with tls_last_error() (thread-local).
 * Objects are opaque handles released with the matching *_free function.
 */
#ifndef TLSUFF_H
#define TLSUFF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tls_status {
  TLS_OK = 0,
  TLS_ERR_USAGE = 2,   /* bad arguments or configuration */
  TLS_ERR_DATA = 3,    /* schema, parse or label problems */
  TLS_ERR_NUMERIC = 4, /* separation, non-convergence, degeneracy */
} tls_status;

typedef struct tls_target_data tls_target_data;
typedef struct tls_source_data tls_source_data;
typedef struct tls_source_model tls_source_model;

typedef struct tls_fit_options {
  double grad_tol;          /* sup-norm gradient threshold (default 1e-8) */
  double rel_tol;           /* relative log-likelihood change (default 1e-12) */
  int max_iter;             /* default 200 */
  double ridge;             /* default 0 */
  int solver;               /* 0 auto, 1 exact Newton, 2 limited-memory */
  int dense_hessian_cap;    /* default 2000 */
} tls_fit_options;

typedef struct tls_suff_result {
  long long n, p, K;
  double T1, T2, trace_sigma, trace_sigma_sq, T4, p_value, alpha;
  int reject;
} tls_suff_result;

typedef struct tls_fit_diagnostics {
  int iterations;
  double final_grad_norm;
  double final_loglik;
  int converged;
} tls_fit_diagnostics;

const char* tls_version(void);
const char* tls_last_error(void);
void tls_fit_options_defaults(tls_fit_options* opts);

/* ---- datasets ---------------------------------------------------------- */

tls_status tls_target_read_csv(const char* path, int center, tls_target_data** out);
tls_status tls_target_from_arrays(const double* X_rowmajor, long long n, long long p,
                                  const int* y, tls_target_data** out);
tls_status tls_target_write_csv(const tls_target_data* data, const char* path);
long long tls_target_n(const tls_target_data* data);
long long tls_target_p(const tls_target_data* data);
void tls_target_free(tls_target_data* data);

tls_status tls_source_read_csv(const char* path, int center, tls_source_data** out);
tls_status tls_source_from_arrays(const double* X_rowmajor, long long N, long long p,
                                  const int* y, int K, tls_source_data** out);
tls_status tls_source_write_csv(const tls_source_data* data, const char* path);
long long tls_source_n(const tls_source_data* data);
long long tls_source_p(const tls_source_data* data);
int tls_source_k(const tls_source_data* data);
void tls_source_free(tls_source_data* data);

/* ---- source model ------------------------------------------------------ */

tls_status tls_fit_source(const tls_source_data* data, const tls_fit_options* opts,
                          tls_source_model** out);
tls_status tls_model_read(const char* path, tls_source_model** out);
tls_status tls_model_write(const tls_source_model* model, const char* path);
long long tls_model_p(const tls_source_model* model);
long long tls_model_k(const tls_source_model* model);
long long tls_model_n_source(const tls_source_model* model);
/* Copies B column-major into `out` (p*K doubles). */
tls_status tls_model_coefficients(const tls_source_model* model, double* out);
void tls_model_diagnostics(const tls_source_model* model, tls_fit_diagnostics* out);
void tls_model_free(tls_source_model* model);

/* ---- sufficiency test -------------------------------------------------- */

tls_status tls_test_sufficiency(const tls_source_model* model, const tls_target_data* data,
                                double alpha, const tls_fit_options* opts,
                                tls_suff_result* out);

/* Serializes a test result to its JSON schema (atomically). */
tls_status tls_suff_result_write(const tls_suff_result* result, int centered,
                                 const char* path);

/* ---- simulation -------------------------------------------------------- */

/* Writes source.csv, target.csv, truth_B.csv, truth_theta.csv and meta.json
 * under out_dir. delta = 0 generates null-mechanism target labels. */
tls_status tls_generate(long long n, long long N, long long p, int K, double rho,
                        double delta, uint64_t seed, const char* out_dir);

/* Runs the experiment described by a flat key=value config file and writes
 * <out_prefix>.csv / <out_prefix>.json. allow_full lifts the desk-scale
 * guard on problem sizes. */
tls_status tls_simulate_file(const char* config_path, const char* out_prefix, int threads,
                             int allow_full, int verbose);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* TLSUFF_H */
