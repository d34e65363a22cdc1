#pragma once

#include <cstdint>

#include "tlsuff/rng.hpp"
#include "tlsuff/types.hpp"

namespace tlsuff {

struct GenSpec {
  int p = 0;
  int K = 8;
  double rho = 0.5;
  Vector gamma;              // length K; defaulted by default_gamma(K)
  double delta = 0.0;        // 0 = null mechanism
  std::uint64_t base_seed = 0;

  void validate() const;
};

// (0.5, 0.5, 0.5, 0.5, 0.5, -1.25, 0, 0) truncated or zero-padded to K.
Vector default_gamma(int K);

struct GroundTruth {
  Matrix B;          // p x K true coefficients
  Vector theta;      // B * gamma
  Vector beta0_dir;  // normalized beta~_0 used in the centering
};

// Rows i.i.d. N(0, Sigma) with Sigma_{jk} = rho^{|j-k|}, generated by the
// stationary AR(1) recursion x_1 = z_1, x_j = rho x_{j-1} + sqrt(1-rho^2) z_j.
Matrix sample_ar1_rows(Eigen::Index count, Eigen::Index p, double rho, RngStream& rng);

// Draws beta~_0..beta~_K with i.i.d. standard normal entries and forms
// column k of B as beta~_k/|beta~_k| - beta~_0/|beta~_0|.
GroundTruth gen_coefficients(int p, int K, const Vector& gamma, RngStream& rng);

// Source draws: covariates via sample_ar1_rows, labels by inverse-CDF on the
// cumulative softmax probabilities (base-class logit 0).
SourceDataset gen_source(Eigen::Index N, const GenSpec& spec, const GroundTruth& truth,
                         RngStream& x_rng, RngStream& label_rng);

// Target draws: y_i ~ Bernoulli(g(z_i'gamma + delta * x_i1)). delta = 0 is
// exactly the null mechanism.
TargetDataset gen_target(Eigen::Index n, const GenSpec& spec, const GroundTruth& truth,
                         RngStream& x_rng, RngStream& label_rng);

}  // namespace tlsuff
