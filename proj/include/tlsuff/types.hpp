#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "tlsuff/errors.hpp"

namespace tlsuff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

// Target data: n x p design matrix with binary labels in {0,1}.
struct TargetDataset {
  Matrix X;
  IntVector y;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }

  // Throws unless dimensions agree, entries are finite and both label
  // values occur at least once.
  void validate() const;
};

// Source data: N x p design matrix with labels in {0,...,K}. Class 0 is the
// base class and is excluded from the coefficient count.
struct SourceDataset {
  Matrix Xs;
  IntVector ys;
  int K = 0;

  Eigen::Index N() const { return Xs.rows(); }
  Eigen::Index p() const { return Xs.cols(); }

  void validate() const;
};

enum class Solver {
  automatic,       // exact Newton iff p*K <= dense_hessian_cap
  exact_newton,
  lbfgs,
};

struct FitOptions {
  double grad_tol = 1e-8;   // sup-norm of the log-likelihood gradient
  double rel_tol = 1e-12;   // relative log-likelihood change
  int max_iter = 200;
  double ridge = 0.0;       // opt-in stabilizer, default off
  Solver solver = Solver::automatic;
  int dense_hessian_cap = 2000;
  int lbfgs_history = 10;
};

struct FitDiagnostics {
  int iterations = 0;
  double final_grad_norm = 0.0;
  double final_loglik = 0.0;
  bool converged = false;
};

// Estimated source coefficient matrix, column k holds the coefficients of
// class k (k = 1..K) against the base class.
struct SourceModel {
  Matrix B;  // p x K
  FitDiagnostics diagnostics;
  long long n_source = 0;  // sample size the model was fit on (0 if unknown)

  Eigen::Index p() const { return B.rows(); }
  Eigen::Index K() const { return B.cols(); }
};

// Low-dimensional working fit plus the induced p-dimensional estimator.
struct TransferFit {
  Vector gamma;  // K
  Vector theta;  // p, equals B * gamma for the B used
  Matrix Z;      // n x K features actually used
  FitDiagnostics diagnostics;
};

struct SufficiencyResult {
  long long n = 0, p = 0, K = 0;
  double T1 = 0.0;
  double T2 = 0.0;
  double trace_sigma = 0.0;
  double trace_sigma_sq = 0.0;
  double T4 = 0.0;
  double p_value = 1.0;
  double alpha = 0.05;
  bool reject = false;
};

}  // namespace tlsuff
