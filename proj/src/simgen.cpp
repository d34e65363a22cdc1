#include "tlsuff/simgen.hpp"

#include <cmath>
#include <string>

#include "tlsuff/glm.hpp"

namespace tlsuff {

void GenSpec::validate() const {
  if (p < 1 || K < 1) {
    throw ConfigError("generator spec: need p >= 1 and K >= 1");
  }
  if (!(std::fabs(rho) < 1.0)) {
    throw ConfigError("generator spec: |rho| must be < 1");
  }
  if (gamma.size() != 0 && gamma.size() != K) {
    throw ConfigError("generator spec: gamma length " + std::to_string(gamma.size()) +
                      " != K = " + std::to_string(K));
  }
  if (delta < 0.0) {
    throw ConfigError("generator spec: delta must be >= 0");
  }
}

Vector default_gamma(int K) {
  const double base[8] = {0.5, 0.5, 0.5, 0.5, 0.5, -1.25, 0.0, 0.0};
  Vector g = Vector::Zero(K);
  for (int k = 0; k < K && k < 8; ++k) {
    g[k] = base[k];
  }
  return g;
}

Matrix sample_ar1_rows(Eigen::Index count, Eigen::Index p, double rho, RngStream& rng) {
  Matrix X(count, p);
  const double scale = std::sqrt(1.0 - rho * rho);
  for (Eigen::Index i = 0; i < count; ++i) {
    double prev = rng.next_normal();
    X(i, 0) = prev;
    for (Eigen::Index j = 1; j < p; ++j) {
      prev = rho * prev + scale * rng.next_normal();
      X(i, j) = prev;
    }
  }
  return X;
}

GroundTruth gen_coefficients(int p, int K, const Vector& gamma, RngStream& rng) {
  if (gamma.size() != K) {
    throw ConfigError("gen_coefficients: gamma length != K");
  }
  Vector beta0(p);
  for (int j = 0; j < p; ++j) {
    beta0[j] = rng.next_normal();
  }
  GroundTruth truth;
  truth.beta0_dir = beta0 / beta0.norm();
  truth.B.resize(p, K);
  for (int k = 0; k < K; ++k) {
    Vector bk(p);
    for (int j = 0; j < p; ++j) {
      bk[j] = rng.next_normal();
    }
    truth.B.col(k) = bk / bk.norm() - truth.beta0_dir;
  }
  truth.theta = truth.B * gamma;
  return truth;
}

namespace {

// Inverse-CDF draw from the categorical softmax distribution over classes
// 0..K given logits (l_1..l_K) with the base logit fixed at 0. Accumulates
// cumulative probabilities left to right; any uniform at or beyond the last
// cumulative value lands in class K.
int draw_class(const Eigen::Ref<const Vector>& logits, double unif) {
  const Eigen::Index K = logits.size();
  double mx = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    mx = std::max(mx, logits[k]);
  }
  double denom = std::exp(-mx);
  for (Eigen::Index k = 0; k < K; ++k) {
    denom += std::exp(logits[k] - mx);
  }
  double cum = std::exp(-mx) / denom;
  if (unif < cum) {
    return 0;
  }
  for (Eigen::Index k = 0; k < K - 1; ++k) {
    cum += std::exp(logits[k] - mx) / denom;
    if (unif < cum) {
      return static_cast<int>(k) + 1;
    }
  }
  return static_cast<int>(K);
}

}  // namespace

SourceDataset gen_source(Eigen::Index N, const GenSpec& spec, const GroundTruth& truth,
                         RngStream& x_rng, RngStream& label_rng) {
  spec.validate();
  if (N < spec.K + 1) {
    throw ConfigError("gen_source: need N >= K + 1");
  }
  SourceDataset data;
  data.K = spec.K;
  data.Xs = sample_ar1_rows(N, spec.p, spec.rho, x_rng);
  const Matrix logits = data.Xs * truth.B;
  data.ys.resize(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    data.ys[i] = draw_class(logits.row(i).transpose(), label_rng.next_unit());
  }
  return data;
}

TargetDataset gen_target(Eigen::Index n, const GenSpec& spec, const GroundTruth& truth,
                         RngStream& x_rng, RngStream& label_rng) {
  spec.validate();
  if (n < 2) {
    throw ConfigError("gen_target: need n >= 2");
  }
  const Vector g = spec.gamma.size() == spec.K ? spec.gamma : default_gamma(spec.K);
  TargetDataset data;
  data.X = sample_ar1_rows(n, spec.p, spec.rho, x_rng);
  const Vector eta = (data.X * truth.B) * g + spec.delta * data.X.col(0);
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.y[i] = label_rng.next_unit() < sigmoid(eta[i]) ? 1 : 0;
  }
  return data;
}

}  // namespace tlsuff
