#pragma once

#include "tlsuff/glm.hpp"
#include "tlsuff/types.hpp"

namespace tlsuff {

// Row i of the result is B' x_i, i.e. the K-dimensional feature vector.
Matrix make_features(const Matrix& B, const Matrix& X);

// Fits the working binary model on Z = make_features(source.B, X) and
// assembles theta = B * gamma.
TransferFit fit_transfer(const SourceModel& source, const TargetDataset& data,
                         const FitOptions& opts);

// Same construction with the true coefficient matrix; simulation benchmark.
TransferFit oracle_fit(const Matrix& B_true, const TargetDataset& data,
                       const FitOptions& opts);

// Mean squared error p^{-1} sum_j (a_j - b_j)^2.
double mse(const Vector& theta_hat, const Vector& theta_true);

// Plug-in standard error sqrt(v' B I(gamma)^{-1} B' v) for a direction v,
// with the empirical Fisher information of the working fit. This is an
// extension beyond the asymptotic result, which assumes the true B.
double direction_se(const SourceModel& source, const TransferFit& fit, const Vector& v);

}  // namespace tlsuff
