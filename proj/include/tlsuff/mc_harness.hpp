#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tlsuff/simgen.hpp"
#include "tlsuff/types.hpp"

namespace tlsuff {

enum class ExperimentKind { mse, size, power };

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::size;
  long long n = 0;
  long long p = 0;
  long long N = 0;
  int K = 8;
  int B_reps = 0;
  double alpha = 0.05;
  std::vector<double> delta_grid;             // power only
  bool est_mle = false, est_transfer = true, est_oracle = true;  // mse only
  std::uint64_t base_seed = 0;
  double rho = 0.5;
  Vector gamma_override;                      // empty = default_gamma(K)
  FitOptions target_fit;
  FitOptions source_fit;
  bool oracle_t3 = false;                     // simulation-only T3 diagnostic
  std::string experiment_id;                  // defaults to the kind name

  std::string id() const;
  Vector gamma() const;
  void validate() const;
};

// One row per replication (per (replication, delta) pair for power runs).
// Fields not applicable to the experiment kind stay NaN / -1.
struct RepRecord {
  long long rep = 0;
  bool ok = true;
  std::string error;
  double delta = std::numeric_limits<double>::quiet_NaN();
  double t4 = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
  int reject = -1;
  double t4_oracle = std::numeric_limits<double>::quiet_NaN();
  int reject_oracle = -1;
  double t3 = std::numeric_limits<double>::quiet_NaN();
  double mse_mle = std::numeric_limits<double>::quiet_NaN();
  double mse_transfer = std::numeric_limits<double>::quiet_NaN();
  double mse_oracle = std::numeric_limits<double>::quiet_NaN();
};

struct LogMseSummary {
  std::string estimator;
  double median = 0.0, q1 = 0.0, q3 = 0.0;
  long long count = 0;
};

struct PowerPoint {
  double delta = 0.0;
  double ejp = 0.0;
  long long rejected = 0, total = 0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RepRecord> records;             // emitted in replication order
  long long failures = 0;
  // size aggregates
  double ejp = std::numeric_limits<double>::quiet_NaN();
  double ejp_oracle = std::numeric_limits<double>::quiet_NaN();
  double t4_mean = std::numeric_limits<double>::quiet_NaN();
  double t4_var = std::numeric_limits<double>::quiet_NaN();
  // power aggregates
  std::vector<PowerPoint> power;
  // mse aggregates
  std::vector<LogMseSummary> log_mse;
};

using ProgressFn = std::function<void(int done, int total)>;

ExperimentResult run_experiment(const ExperimentConfig& config, int threads,
                                const ProgressFn& progress = {});

ExperimentResult run_mse(const ExperimentConfig& config, int threads = 1);
ExperimentResult run_size(const ExperimentConfig& config, int threads = 1);
ExperimentResult run_power(const ExperimentConfig& config, int threads = 1);

}  // namespace tlsuff
