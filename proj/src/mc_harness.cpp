#include "tlsuff/mc_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "tlsuff/glm.hpp"
#include "tlsuff/suff_test.hpp"
#include "tlsuff/transfer.hpp"

namespace tlsuff {

namespace {

// Stream purpose tags. Replication data depends only on
// (base_seed, experiment id, purpose, replication index).
constexpr std::uint64_t kPurposeCoefficients = 0;
constexpr std::uint64_t kPurposeSourceX = 1;
constexpr std::uint64_t kPurposeSourceLabels = 2;
constexpr std::uint64_t kPurposeInitSourceX = 3;
constexpr std::uint64_t kPurposeInitSourceLabels = 4;
constexpr std::uint64_t kPurposeTraceCalibration = 5;
constexpr std::uint64_t kPurposeTargetX = 0x100;      // + delta index
constexpr std::uint64_t kPurposeTargetLabels = 0x200;  // + delta index

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = q * static_cast<double>(n - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

struct ExperimentContext {
  const ExperimentConfig& config;
  std::string id;
  GenSpec spec;
  GroundTruth truth;
  Matrix B_init;             // common warm start for source fits (may be empty)
  double z_crit = 0.0;       // z_{1-alpha}
  double true_trace_sq = 0;  // Monte Carlo plug-in tr(Sigma_gamma^2), T3 diagnostic
  FisherPreconditioner precond;  // frozen curvature at B_init (may be unset)
};

// Per-replication source fit: scoring with the frozen preconditioner when
// one was built, otherwise the general solver warm-started at B_init.
SourceModel fit_source(const ExperimentContext& ctx, const SourceDataset& source) {
  if (ctx.precond.ready()) {
    return fit_multinomial_scoring(source, ctx.config.source_fit, ctx.precond, ctx.B_init);
  }
  const Matrix* warm = ctx.B_init.size() > 0 ? &ctx.B_init : nullptr;
  return fit_multinomial_logistic(source, ctx.config.source_fit, warm);
}

bool needs_source_fit(const ExperimentConfig& c) {
  return c.kind != ExperimentKind::mse || c.est_transfer;
}

SufficiencyResult run_test_with_matrix(const Matrix& B, const TargetDataset& data,
                                       const ExperimentContext& ctx) {
  const TransferFit fit = oracle_fit(B, data, ctx.config.target_fit);
  return test_sufficiency_with_fit(fit, data, ctx.config.alpha);
}

// One replication of the size experiment: fresh source draw + fit, null
// target draw, empirical and oracle tests.
RepRecord size_rep(const ExperimentContext& ctx, int b) {
  const ExperimentConfig& c = ctx.config;
  RepRecord rec;
  rec.rep = b;
  rec.delta = 0.0;

  auto sx = derive_stream(c.base_seed, ctx.id, kPurposeSourceX, b);
  auto sl = derive_stream(c.base_seed, ctx.id, kPurposeSourceLabels, b);
  const SourceDataset source = gen_source(c.N, ctx.spec, ctx.truth, sx, sl);
  const SourceModel model = fit_source(ctx, source);

  auto tx = derive_stream(c.base_seed, ctx.id, kPurposeTargetX, b);
  auto tl = derive_stream(c.base_seed, ctx.id, kPurposeTargetLabels, b);
  const TargetDataset target = gen_target(c.n, ctx.spec, ctx.truth, tx, tl);

  const SufficiencyResult emp = test_sufficiency(model, target, c.alpha, c.target_fit);
  rec.t4 = emp.T4;
  rec.p_value = emp.p_value;
  rec.reject = emp.reject ? 1 : 0;

  const SufficiencyResult orc = run_test_with_matrix(ctx.truth.B, target, ctx);
  rec.t4_oracle = orc.T4;
  rec.reject_oracle = orc.reject ? 1 : 0;

  if (c.oracle_t3 && ctx.true_trace_sq > 0.0) {
    const double dn = static_cast<double>(emp.n);
    rec.t3 = emp.T2 / std::sqrt(2.0 * ctx.true_trace_sq / (dn * dn));
  }
  return rec;
}

RepRecord mse_rep(const ExperimentContext& ctx, int b) {
  const ExperimentConfig& c = ctx.config;
  RepRecord rec;
  rec.rep = b;

  auto tx = derive_stream(c.base_seed, ctx.id, kPurposeTargetX, b);
  auto tl = derive_stream(c.base_seed, ctx.id, kPurposeTargetLabels, b);
  const TargetDataset target = gen_target(c.n, ctx.spec, ctx.truth, tx, tl);

  if (c.est_transfer) {
    auto sx = derive_stream(c.base_seed, ctx.id, kPurposeSourceX, b);
    auto sl = derive_stream(c.base_seed, ctx.id, kPurposeSourceLabels, b);
    const SourceDataset source = gen_source(c.N, ctx.spec, ctx.truth, sx, sl);
    const SourceModel model = fit_source(ctx, source);
    const TransferFit fit = fit_transfer(model, target, c.target_fit);
    rec.mse_transfer = mse(fit.theta, ctx.truth.theta);
  }
  if (c.est_oracle) {
    const TransferFit fit = oracle_fit(ctx.truth.B, target, c.target_fit);
    rec.mse_oracle = mse(fit.theta, ctx.truth.theta);
  }
  if (c.est_mle) {
    const auto fit = fit_binary_logistic(target, c.target_fit);
    rec.mse_mle = mse(fit.theta, ctx.truth.theta);
  }
  return rec;
}

// All delta points of one power replication share one source fit.
std::vector<RepRecord> power_rep(const ExperimentContext& ctx, int b) {
  const ExperimentConfig& c = ctx.config;

  auto sx = derive_stream(c.base_seed, ctx.id, kPurposeSourceX, b);
  auto sl = derive_stream(c.base_seed, ctx.id, kPurposeSourceLabels, b);
  const SourceDataset source = gen_source(c.N, ctx.spec, ctx.truth, sx, sl);
  const SourceModel model = fit_source(ctx, source);

  std::vector<RepRecord> out;
  out.reserve(c.delta_grid.size());
  for (size_t d = 0; d < c.delta_grid.size(); ++d) {
    RepRecord rec;
    rec.rep = b;
    rec.delta = c.delta_grid[d];
    try {
      GenSpec alt = ctx.spec;
      alt.delta = c.delta_grid[d];
      auto tx = derive_stream(c.base_seed, ctx.id, kPurposeTargetX + d, b);
      auto tl = derive_stream(c.base_seed, ctx.id, kPurposeTargetLabels + d, b);
      const TargetDataset target = gen_target(c.n, alt, ctx.truth, tx, tl);
      const SufficiencyResult res = test_sufficiency(model, target, c.alpha, c.target_fit);
      rec.t4 = res.T4;
      rec.p_value = res.p_value;
      rec.reject = res.reject ? 1 : 0;
    } catch (const Error& e) {
      rec.ok = false;
      rec.error = e.what();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<RepRecord> run_one(const ExperimentContext& ctx, int b) {
  try {
    switch (ctx.config.kind) {
      case ExperimentKind::size:
        return {size_rep(ctx, b)};
      case ExperimentKind::mse:
        return {mse_rep(ctx, b)};
      case ExperimentKind::power:
        return power_rep(ctx, b);
    }
  } catch (const Error& e) {
    const size_t count =
        ctx.config.kind == ExperimentKind::power ? ctx.config.delta_grid.size() : 1;
    std::vector<RepRecord> out(count);
    for (size_t d = 0; d < count; ++d) {
      out[d].rep = b;
      out[d].ok = false;
      out[d].error = e.what();
      out[d].delta = ctx.config.kind == ExperimentKind::power ? ctx.config.delta_grid[d]
                     : ctx.config.kind == ExperimentKind::size ? 0.0
                     : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
  }
  return {};
}

// Plug-in Monte Carlo estimate of tr(Sigma_gamma^2) from the known
// generator, via the pair U-statistic with true residual variances
// w_i = g(z_i'gamma)(1 - g(z_i'gamma)).
double estimate_true_trace_sq(const ExperimentContext& ctx) {
  const Eigen::Index M = 2000;
  auto rng = derive_stream(ctx.config.base_seed, ctx.id, kPurposeTraceCalibration, 0);
  const Matrix X = sample_ar1_rows(M, ctx.spec.p, ctx.spec.rho, rng);
  const Vector eta = (X * ctx.truth.B) * ctx.config.gamma();
  Vector w(M);
  for (Eigen::Index i = 0; i < M; ++i) {
    const double mu = sigmoid(eta[i]);
    w[i] = mu * (1.0 - mu);
  }
  const Matrix G = X * X.transpose();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < M; ++i) {
    for (Eigen::Index j = 0; j < M; ++j) {
      if (i != j) {
        acc += w[i] * w[j] * G(i, j) * G(i, j);
      }
    }
  }
  return acc / (static_cast<double>(M) * static_cast<double>(M - 1));
}

void aggregate(ExperimentResult& result) {
  const ExperimentConfig& c = result.config;
  long long failed = 0;
  for (const auto& r : result.records) {
    if (!r.ok) ++failed;
  }
  result.failures = failed;
  const long long total = static_cast<long long>(result.records.size());
  if (total > 0 && failed * 10 > total) {
    std::string first;
    for (const auto& r : result.records) {
      if (!r.ok) {
        first = r.error;
        break;
      }
    }
    throw Error(Error::Kind::numeric,
                "experiment aborted: " + std::to_string(failed) + " of " +
                    std::to_string(total) + " replications failed (> 10%); first error: " +
                    first);
  }

  switch (c.kind) {
    case ExperimentKind::size: {
      long long ok = 0, rej = 0, rej_orc = 0;
      double sum = 0.0, sumsq = 0.0;
      for (const auto& r : result.records) {
        if (!r.ok) continue;
        ++ok;
        rej += r.reject;
        rej_orc += r.reject_oracle > 0 ? 1 : 0;
        sum += r.t4;
        sumsq += r.t4 * r.t4;
      }
      if (ok > 0) {
        result.ejp = static_cast<double>(rej) / static_cast<double>(ok);
        result.ejp_oracle = static_cast<double>(rej_orc) / static_cast<double>(ok);
        result.t4_mean = sum / static_cast<double>(ok);
        if (ok > 1) {
          result.t4_var =
              (sumsq - sum * sum / static_cast<double>(ok)) / static_cast<double>(ok - 1);
        }
      }
      break;
    }
    case ExperimentKind::power: {
      for (size_t d = 0; d < c.delta_grid.size(); ++d) {
        PowerPoint pt;
        pt.delta = c.delta_grid[d];
        for (const auto& r : result.records) {
          if (!r.ok || r.delta != pt.delta) continue;
          ++pt.total;
          pt.rejected += r.reject;
        }
        pt.ejp = pt.total > 0 ? static_cast<double>(pt.rejected) / static_cast<double>(pt.total)
                              : std::numeric_limits<double>::quiet_NaN();
        result.power.push_back(pt);
      }
      break;
    }
    case ExperimentKind::mse: {
      struct Entry {
        const char* name;
        double RepRecord::* field;
        bool enabled;
      };
      const Entry entries[] = {{"mle", &RepRecord::mse_mle, c.est_mle},
                               {"transfer", &RepRecord::mse_transfer, c.est_transfer},
                               {"oracle", &RepRecord::mse_oracle, c.est_oracle}};
      for (const auto& e : entries) {
        if (!e.enabled) continue;
        std::vector<double> vals;
        for (const auto& r : result.records) {
          const double v = r.*e.field;
          if (r.ok && std::isfinite(v) && v > 0.0) {
            vals.push_back(std::log(v));
          }
        }
        std::sort(vals.begin(), vals.end());
        LogMseSummary s;
        s.estimator = e.name;
        s.count = static_cast<long long>(vals.size());
        if (!vals.empty()) {
          s.median = quantile_sorted(vals, 0.5);
          s.q1 = quantile_sorted(vals, 0.25);
          s.q3 = quantile_sorted(vals, 0.75);
        }
        result.log_mse.push_back(s);
      }
      break;
    }
  }
}

}  // namespace

std::string ExperimentConfig::id() const {
  if (!experiment_id.empty()) return experiment_id;
  switch (kind) {
    case ExperimentKind::mse:
      return "mse";
    case ExperimentKind::size:
      return "size";
    case ExperimentKind::power:
      return "power";
  }
  return "experiment";
}

Vector ExperimentConfig::gamma() const {
  return gamma_override.size() == K ? gamma_override : default_gamma(K);
}

void ExperimentConfig::validate() const {
  if (B_reps < 1) throw ConfigError("B_reps must be >= 1");
  if (n < 2) throw ConfigError("n must be >= 2");
  if (p < 1) throw ConfigError("p must be >= 1");
  if (K < 1) throw ConfigError("K must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  if (!(std::fabs(rho) < 1.0)) throw ConfigError("rho must satisfy |rho| < 1");
  if (gamma_override.size() != 0 && gamma_override.size() != K) {
    throw ConfigError("gamma must have length K");
  }
  const bool source_needed = kind != ExperimentKind::mse || est_transfer;
  if (source_needed && N < K + 1) throw ConfigError("N must be >= K + 1");
  if (kind == ExperimentKind::power) {
    if (delta_grid.empty()) throw ConfigError("delta_grid must be nonempty for power runs");
    for (double d : delta_grid) {
      if (!(d > 0.0)) throw ConfigError("delta_grid entries must be positive");
    }
  } else if (!delta_grid.empty()) {
    throw ConfigError("delta_grid only applies to power runs");
  }
  if (kind == ExperimentKind::mse) {
    if (!est_mle && !est_transfer && !est_oracle) {
      throw ConfigError("estimators must name at least one of mle, transfer, oracle");
    }
    if (est_mle && p >= n) {
      throw ConfigError("estimator 'mle' requires p < n (the target MLE is not computable)");
    }
  }
}

ExperimentResult run_experiment(const ExperimentConfig& config, int threads,
                                const ProgressFn& progress) {
  config.validate();

  ExperimentContext ctx{config, config.id(), {}, {}, {}, 0.0, 0.0, {}};
  ctx.spec.p = static_cast<int>(config.p);
  ctx.spec.K = config.K;
  ctx.spec.rho = config.rho;
  ctx.spec.gamma = config.gamma();
  ctx.spec.delta = 0.0;
  ctx.spec.base_seed = config.base_seed;

  auto coef_rng = derive_stream(config.base_seed, ctx.id, kPurposeCoefficients, 0);
  ctx.truth = gen_coefficients(static_cast<int>(config.p), config.K, ctx.spec.gamma, coef_rng);
  ctx.z_crit = normal_quantile(1.0 - config.alpha);

  // A fixed warm start keeps the per-replication source fits cheap: every
  // replication starts from the same point, so results do not depend on the
  // execution schedule.
  if (needs_source_fit(config)) {
    auto ix = derive_stream(config.base_seed, ctx.id, kPurposeInitSourceX, 0);
    auto il = derive_stream(config.base_seed, ctx.id, kPurposeInitSourceLabels, 0);
    const SourceDataset init = gen_source(config.N, ctx.spec, ctx.truth, ix, il);
    ctx.B_init = fit_multinomial_logistic(init, config.source_fit).B;
    // The replication fits all start near B_init, so one factored curvature
    // matrix serves them all. Skipped when it would not fit in memory.
    if (config.source_fit.solver == Solver::automatic && config.p * config.K <= 4000) {
      ctx.precond = FisherPreconditioner(init, ctx.B_init, config.source_fit.ridge);
    }
  }
  if (config.oracle_t3 && config.kind == ExperimentKind::size) {
    ctx.true_trace_sq = estimate_true_trace_sq(ctx);
  }

  std::vector<std::vector<RepRecord>> by_rep(static_cast<size_t>(config.B_reps));
  const int workers = std::max(1, std::min(threads, config.B_reps));
  if (workers == 1) {
    for (int b = 0; b < config.B_reps; ++b) {
      by_rep[static_cast<size_t>(b)] = run_one(ctx, b);
      if (progress) progress(b + 1, config.B_reps);
    }
  } else {
    std::atomic<int> next{0};
    std::atomic<int> done{0};
    std::mutex progress_mutex;
    auto work = [&]() {
      for (;;) {
        const int b = next.fetch_add(1);
        if (b >= config.B_reps) break;
        by_rep[static_cast<size_t>(b)] = run_one(ctx, b);
        const int d = ++done;
        if (progress) {
          std::lock_guard<std::mutex> lock(progress_mutex);
          progress(d, config.B_reps);
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  ExperimentResult result;
  result.config = config;
  for (auto& recs : by_rep) {
    for (auto& r : recs) result.records.push_back(std::move(r));
  }
  aggregate(result);
  return result;
}

ExperimentResult run_mse(const ExperimentConfig& config, int threads) {
  ExperimentConfig c = config;
  c.kind = ExperimentKind::mse;
  return run_experiment(c, threads);
}

ExperimentResult run_size(const ExperimentConfig& config, int threads) {
  ExperimentConfig c = config;
  c.kind = ExperimentKind::size;
  return run_experiment(c, threads);
}

ExperimentResult run_power(const ExperimentConfig& config, int threads) {
  ExperimentConfig c = config;
  c.kind = ExperimentKind::power;
  return run_experiment(c, threads);
}

}  // namespace tlsuff
