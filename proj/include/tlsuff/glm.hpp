#pragma once

#include "tlsuff/types.hpp"

namespace tlsuff {

// g(x) = exp(x)/(1+exp(x)), evaluated in the branch that never overflows.
double sigmoid(double x);

// log(1 + exp(x)) without overflow or catastrophic cancellation.
double log1pexp(double x);

// Binary logistic log-likelihood sum_i [ y_i x_i'theta - log(1+exp(x_i'theta)) ].
double binary_loglik(const TargetDataset& data, const Vector& theta);

// Multinomial logistic log-likelihood with base-class logit fixed at 0.
double multinomial_loglik(const SourceDataset& data, const Matrix& B);

// Class probabilities (N x (K+1)), row-stochastic; column 0 is the base class.
Matrix multinomial_probs(const Matrix& X, const Matrix& B);

// Analytic score vectors, exposed for gradient checking.
Vector binary_loglik_gradient(const TargetDataset& data, const Vector& theta);
Matrix multinomial_loglik_gradient(const SourceDataset& data, const Matrix& B);

struct BinaryFitResult {
  Vector theta;
  FitDiagnostics diagnostics;
};

// Newton maximization of the binary log-likelihood (minus ridge*|theta|^2/2
// when opts.ridge > 0), with step-halving. Throws DegenerateLabels,
// SeparationDiverged or NotConverged.
BinaryFitResult fit_binary_logistic(const TargetDataset& data, const FitOptions& opts,
                                    const Vector* warm_start = nullptr);

// Multinomial MLE. Exact Newton when p*K is within opts.dense_hessian_cap
// (or forced), otherwise limited-memory BFGS on the negated log-likelihood.
SourceModel fit_multinomial_logistic(const SourceDataset& data, const FitOptions& opts,
                                     const Matrix* warm_start = nullptr);

// Fisher information of the multinomial model, factored once at a reference
// coefficient on (a subsample of) a reference dataset. Scaled to full-sample
// units so it can precondition gradients of same-sized datasets.
class FisherPreconditioner {
 public:
  FisherPreconditioner() = default;
  FisherPreconditioner(const SourceDataset& data, const Matrix& B_ref, double ridge = 0.0,
                       Eigen::Index max_rows = 20000);
  bool ready() const { return dim_ > 0; }
  Eigen::Index dim() const { return dim_; }
  Vector solve(const Vector& g) const;

 private:
  Eigen::LDLT<Matrix> ldlt_;
  Eigen::Index dim_ = 0;
};

// Scoring iteration with a frozen preconditioner: B <- B - t H0^{-1} grad
// with step-halving. Converges fast when warm_start and the preconditioner
// come from a statistically equivalent sample; stopping rules and error
// behavior match the other solvers.
SourceModel fit_multinomial_scoring(const SourceDataset& data, const FitOptions& opts,
                                    const FisherPreconditioner& pre, const Matrix& warm_start);

}  // namespace tlsuff
